"""Gradient-combination rules producing the pseudo-gradient g(x_t).

Four strategies:
  - alone: ignore collaborators, g = g_0
  - weighted gradient averaging (WGA): g = (1-a) g_0 + a sum_k tau_k g_k
  - bias correction (BC): WGA with the collaborator average shifted by an
    EMA estimate c_t of the gradient bias sum_k tau_k grad f_k - grad f_0
  - oracle BC: the bias estimate comes from a noisy oracle instead of the
    EMA, making the combined estimator exactly unbiased

All combine functions are pure; `bc_update` is the only state transition
and returns a fresh BcState.  Gradient arguments may be GradientSample
or plain arrays (with leading batch axes), which lets the simulator run
many seeds through the same arithmetic.
"""

from dataclasses import dataclass

import numpy as np

from .objective import GradientSample, _as_vector


@dataclass
class CollaborationWeights:
    """alpha in [0,1], tau on the simplex over collaborators, EMA rate beta."""

    alpha: float
    tau: np.ndarray
    beta: float | None = None

    def __post_init__(self):
        self.tau = _as_vector(self.tau)
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if np.any(self.tau < 0) or abs(self.tau.sum() - 1.0) > 1e-12:
            raise ValueError("tau must be nonnegative and sum to 1")
        if self.beta is not None and not (0.0 < self.beta <= 1.0):
            raise ValueError("beta must lie in (0, 1]")

    @property
    def n_collaborators(self) -> int:
        return self.tau.shape[0]


def check_alpha_guard(alpha: float, m: float) -> None:
    """For WGA with m > 0 the theory requires alpha < 1/sqrt(m)."""
    if m > 0 and alpha >= 1.0 / np.sqrt(m):
        raise ValueError(
            f"alpha={alpha} >= 1/sqrt(m)={1.0 / np.sqrt(m):.6g}: "
            "WGA guarantee is vacuous in this regime")


@dataclass
class BcState:
    """Running bias estimate c_t."""

    bias_estimate: np.ndarray
    initialized: bool = True

    def __post_init__(self):
        self.bias_estimate = np.asarray(self.bias_estimate, dtype=float)


def _value(g) -> np.ndarray:
    return g.value if isinstance(g, GradientSample) else np.asarray(g, dtype=float)


def _tau_average(gks, tau: np.ndarray) -> np.ndarray:
    if len(gks) != tau.shape[0]:
        raise ValueError("number of collaborator gradients must match tau")
    avg = tau[0] * _value(gks[0])
    for k in range(1, len(gks)):
        avg = avg + tau[k] * _value(gks[k])
    return avg


def alone_combine(g0) -> np.ndarray:
    """g = g_0, collaborators ignored."""
    return _value(g0)


def wga_combine(g0, gks, w: CollaborationWeights) -> np.ndarray:
    """g = (1-alpha) g_0 + alpha sum_k tau_k g_k."""
    return (1.0 - w.alpha) * _value(g0) + w.alpha * _tau_average(gks, w.tau)


def bc_combine(g0, gks, w: CollaborationWeights, state: BcState):
    """Corrected pseudo-gradient and the observed bias b_t.

    g = (1-alpha) g_0 + alpha (g_avg - c_t),  b_t = g_avg - g_0.
    Does not mutate `state`; feed b_t to `bc_update` after the step.
    """
    if not state.initialized:
        raise ValueError("BcState must be initialized before combining")
    g0v = _value(g0)
    gavg = _tau_average(gks, w.tau)
    combined = (1.0 - w.alpha) * g0v + w.alpha * (gavg - state.bias_estimate)
    return combined, gavg - g0v


def bc_update(state: BcState, observed_bias, beta: float) -> BcState:
    """EMA step c_{t+1} = (1-beta) c_t + beta b_t."""
    if not (0.0 < beta <= 1.0):
        raise ValueError("beta must lie in (0, 1]")
    b = np.asarray(observed_bias, dtype=float)
    return BcState(bias_estimate=(1.0 - beta) * state.bias_estimate + beta * b)


def oracle_bc_combine(g0, gks, w: CollaborationWeights, true_bias,
                      oracle_noise, v: float) -> np.ndarray:
    """BC with a noisy unbiased bias oracle.

    c_oracle = true_bias + n, where n is Gaussian with total variance
    v^2/N split across coordinates, independent of the gradient samples.
    `oracle_noise` is either a Generator or pre-drawn standard normals of
    the same shape as g_0.
    """
    if v < 0:
        raise ValueError("v must be >= 0")
    g0v = _value(g0)
    gavg = _tau_average(gks, w.tau)
    n = len(gks)
    d = g0v.shape[-1]
    if isinstance(oracle_noise, np.random.Generator):
        z = oracle_noise.standard_normal(g0v.shape)
    else:
        z = np.asarray(oracle_noise, dtype=float)
    c_oracle = np.asarray(true_bias, dtype=float) + z * (v / np.sqrt(n * d))
    return (1.0 - w.alpha) * g0v + w.alpha * (gavg - c_oracle)
