"""Training-loop simulator with deterministic seeded replication.

A run executes x_{t+1} = x_t - eta_t g(x_t) for T steps, where g is the
configured aggregator's pseudo-gradient built from per-agent stochastic
gradients.  Every agent's noise comes from its own counter-based stream
keyed by (seed, agent), so:

  - runs are bit-reproducible and independent of thread count,
  - methods compared under the same seed share random numbers,
  - alpha = 0 reproduces the Alone trace bit-for-bit (collaborator
    streams are drawn either way).

Seeds are vectorized through one kernel: all per-step operations are
elementwise across seed lanes, which makes a batched run bitwise equal
to the corresponding single-seed runs.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import rng as rng_mod
from .aggregators import CollaborationWeights, check_alpha_guard
from .objective import QuadraticTask, _as_vector
from .schedules import ScheduleInputs, eta_decreasing_pl

AGGREGATORS = ("alone", "wga", "bc", "oracle_bc")
C0_POLICIES = ("first_bias", "zero", "warm_start")

DIVERGENCE_LIMIT = 1e12
_CHUNK = 4096


@dataclass
class DecreasingPlSchedule:
    """Step-size schedule eta_t from the decreasing PL analysis."""

    inputs: ScheduleInputs
    c: int = 2

    def values(self, horizon: int) -> np.ndarray:
        return np.array([eta_decreasing_pl(t, self.inputs, self.c)
                         for t in range(horizon)])


@dataclass
class RunConfig:
    main_task: QuadraticTask
    collaborators: list
    aggregator: str
    weights: CollaborationWeights
    step_size: float | DecreasingPlSchedule
    horizon: int
    x0: np.ndarray
    seed: int = 0
    c0_policy: str = "first_bias"
    warm_start_samples: int = 8
    oracle_v: float = 0.0
    iterate_stride: int = 0  # 0: do not record iterates

    def __post_init__(self):
        self.x0 = _as_vector(self.x0)
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if self.c0_policy not in C0_POLICIES:
            raise ValueError(f"c0_policy must be one of {C0_POLICIES}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.warm_start_samples < 1:
            raise ValueError("warm_start_samples must be >= 1")
        if self.oracle_v < 0:
            raise ValueError("oracle_v must be >= 0")
        for task in [self.main_task] + list(self.collaborators):
            if task.dim != self.x0.shape[0]:
                raise ValueError("all tasks must match the dimension of x0")
        if self.aggregator != "alone":
            if len(self.collaborators) != self.weights.n_collaborators:
                raise ValueError("tau length must match number of collaborators")


@dataclass
class Trace:
    """Per-step metrics of one run (arrays of length T+1, step 0 included)."""

    test_loss: np.ndarray
    grad_norm_sq: np.ndarray
    final_gap: float
    iterates: np.ndarray | None = None
    iterate_stride: int = 0
    diverged: bool = False
    steps_completed: int = 0


@dataclass
class RunResult:
    """Seed-aggregated outcome of replicated runs."""

    final_gap_mean: float
    final_gap_se: float | None
    avg_grad_sq_mean: float
    avg_grad_sq_se: float | None
    plateau_mean: float
    plateau_se: float | None
    mean_test_loss: np.ndarray
    mean_grad_norm_sq: np.ndarray
    seeds: list
    diverged_seeds: list
    per_seed_final_gap: np.ndarray
    per_seed_plateau: np.ndarray
    traces: list | None = None
    plateau_fraction: float = 0.1


def _step_sizes(cfg: RunConfig) -> np.ndarray:
    if isinstance(cfg.step_size, DecreasingPlSchedule):
        return cfg.step_size.values(cfg.horizon)
    eta = float(cfg.step_size)
    if eta <= 0:
        raise ValueError("step_size must be > 0")
    return np.full(cfg.horizon, eta)


def _validate(cfg: RunConfig) -> None:
    if cfg.aggregator == "wga" and cfg.weights.alpha > 0:
        from .objective import similarity_params
        sim = similarity_params(cfg.main_task, cfg.collaborators, cfg.weights.tau)
        check_alpha_guard(cfg.weights.alpha, sim.grad_scale_mismatch)
    if cfg.aggregator == "bc" and cfg.weights.beta is None:
        raise ValueError("BC requires weights.beta")


def _run_batch(cfg: RunConfig, seeds) -> list:
    """Run one config under many seeds through a vectorized kernel.

    Returns one Trace per seed, bitwise identical to running each seed
    alone (all per-step operations are elementwise across seed lanes).
    """
    _validate(cfg)
    seeds = [int(s) for s in seeds]
    S = len(seeds)
    d = cfg.main_task.dim
    T = cfg.horizon
    w = cfg.weights
    tasks = [cfg.main_task] + list(cfg.collaborators)
    n_agents = len(tasks)
    etas = _step_sizes(cfg)
    alone = cfg.aggregator == "alone"

    gens = [[rng_mod.agent_stream(s, a) for s in seeds] for a in range(n_agents)]
    oracle_gens = None
    if cfg.aggregator == "oracle_bc":
        oracle_gens = [rng_mod.agent_stream(s, 0, rng_mod.ORACLE_CONTEXT)
                       for s in seeds]

    x = np.tile(cfg.x0, (S, 1))
    alive = np.ones(S, dtype=bool)
    all_alive = True
    steps_completed = np.full(S, T)

    test_loss = np.empty((T + 1, S))
    grad_sq = np.empty((T + 1, S))
    stride = cfg.iterate_stride
    iterates = np.empty((T // stride + 1, S, d)) if stride else None

    a0 = cfg.main_task.curvature
    opt0 = cfg.main_task.optimum
    curvs = [task.curvature for task in tasks]
    opts = [task.optimum for task in tasks]
    stds = [task.noise_std for task in tasks]
    scaled = [task.noise_scale for task in tasks]
    alpha = w.alpha
    tau = w.tau
    beta = w.beta
    one_minus_alpha = 1.0 - alpha
    mode = cfg.aggregator
    oracle_std = cfg.oracle_v / math.sqrt(max(1, n_agents - 1) * d)

    c_state = None
    if mode == "bc":
        if cfg.c0_policy == "zero":
            c_state = np.zeros((S, d))
        elif cfg.c0_policy == "warm_start":
            c_state = _warm_start_bias(cfg, seeds)
        # first_bias: set at t = 0 from the first round's samples.

    t = 0
    while t < T:
        n = min(_CHUNK, T - t)
        # Pre-draw this chunk's normals, scaled for pure-additive agents:
        # noise[agent] has shape (S, n, d).
        noise = []
        for a in range(n_agents):
            z = np.stack([gen.standard_normal((n, d)) for gen in gens[a]])
            noise.append(z * stds[a] if scaled[a] == 0 else z)
        z_oracle = None
        if oracle_gens is not None:
            z_oracle = np.stack([gen.standard_normal((n, d)) for gen in oracle_gens])

        for i in range(n):
            diff0 = x - opt0
            g0_true = a0 * diff0
            test_loss[t] = 0.5 * np.sum(g0_true * diff0, axis=-1)
            grad_sq[t] = np.sum(g0_true * g0_true, axis=-1)
            if stride and t % stride == 0:
                iterates[t // stride] = x

            # Per-agent samples; arithmetic mirrors objective.sample_gradient
            # and the aggregators module op for op.
            if scaled[0] == 0:
                g0 = g0_true + noise[0][:, i, :]
            else:
                std0 = np.sqrt(stds[0] ** 2
                               + scaled[0] * np.sum(g0_true * g0_true, axis=-1,
                                                    keepdims=True) / d)
                g0 = g0_true + noise[0][:, i, :] * std0
            if alone:
                g = g0
            else:
                samples = []
                for a in range(1, n_agents):
                    ga = curvs[a] * (x - opts[a])
                    if scaled[a] == 0:
                        samples.append(ga + noise[a][:, i, :])
                    else:
                        stda = np.sqrt(stds[a] ** 2
                                       + scaled[a] * np.sum(ga * ga, axis=-1,
                                                            keepdims=True) / d)
                        samples.append(ga + noise[a][:, i, :] * stda)
                gavg = tau[0] * samples[0]
                for k in range(1, n_agents - 1):
                    gavg = gavg + tau[k] * samples[k]
                if mode == "wga":
                    g = one_minus_alpha * g0 + alpha * gavg
                elif mode == "bc":
                    b = gavg - g0
                    if c_state is None:  # first_bias policy, t == 0
                        c_state = b
                    g = one_minus_alpha * g0 + alpha * (gavg - c_state)
                    c_state = (1.0 - beta) * c_state + beta * b
                else:  # oracle_bc
                    true_bias = tau[0] * (curvs[1] * (x - opts[1]))
                    for k in range(1, n_agents - 1):
                        true_bias = true_bias + tau[k] * (curvs[1 + k] * (x - opts[1 + k]))
                    true_bias = true_bias - g0_true
                    c_oracle = true_bias + z_oracle[:, i, :] * oracle_std
                    g = one_minus_alpha * g0 + alpha * (gavg - c_oracle)

            x_new = x - etas[t] * g
            if all_alive:
                with np.errstate(invalid="ignore"):
                    inside = bool(np.all(np.abs(x_new) <= DIVERGENCE_LIMIT))
                if inside:
                    x = x_new
                    t += 1
                    continue
                all_alive = False
            blown = np.any(np.abs(x_new) > DIVERGENCE_LIMIT, axis=-1) | \
                ~np.all(np.isfinite(x_new), axis=-1)
            newly = alive & blown
            if newly.any():
                steps_completed[newly] = t
                alive = alive & ~blown
            x = np.where(alive[:, None], x_new, x)
            t += 1

    diff0 = x - opt0
    test_loss[T] = 0.5 * np.sum(a0 * diff0 * diff0, axis=-1)
    g0_true = a0 * diff0
    grad_sq[T] = np.sum(g0_true * g0_true, axis=-1)
    if stride and T % stride == 0:
        iterates[T // stride] = x

    traces = []
    for j in range(S):
        traces.append(Trace(
            test_loss=test_loss[:, j].copy(),
            grad_norm_sq=grad_sq[:, j].copy(),
            final_gap=float(test_loss[T, j]),
            iterates=iterates[:, j, :].copy() if stride else None,
            iterate_stride=stride,
            diverged=not alive[j],
            steps_completed=int(steps_completed[j]),
        ))
    return traces


def _warm_start_bias(cfg: RunConfig, seeds) -> np.ndarray:
    """c_0 = average of S independent bias samples at x_0, from dedicated
    warm-start streams (keeps the main gradient streams aligned)."""
    d = cfg.main_task.dim
    tasks = [cfg.main_task] + list(cfg.collaborators)
    tau = cfg.weights.tau
    out = np.zeros((len(seeds), d))
    for j, s in enumerate(seeds):
        gens = [rng_mod.agent_stream(s, a, rng_mod.WARMSTART_CONTEXT)
                for a in range(len(tasks))]
        acc = np.zeros(d)
        for _ in range(cfg.warm_start_samples):
            samples = []
            for task, gen in zip(tasks, gens):
                g = task.curvature * (cfg.x0 - task.optimum)
                std = np.sqrt(task.noise_std ** 2
                              + task.noise_scale * np.dot(g, g) / d)
                samples.append(g + gen.standard_normal(d) * std)
            acc += sum(tau[k] * samples[1 + k] for k in range(len(tasks) - 1)) - samples[0]
        out[j] = acc / cfg.warm_start_samples
    return out


def run(cfg: RunConfig) -> Trace:
    """Execute one seeded run; a pure function of the config."""
    return _run_batch(cfg, [cfg.seed])[0]


def _mean_se(values: np.ndarray):
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) >= 2 else None
    return mean, se


def run_replicated(cfg: RunConfig, seeds, workers: int = 1,
                   keep_traces: bool = False,
                   plateau_fraction: float = 0.1) -> RunResult:
    """Independent runs per seed, aggregated mean/SE.

    Diverged seeds are reported and excluded from the aggregates.  The
    plateau metric is the mean test loss over the final `plateau_fraction`
    of steps.  Results are gathered in input order; `workers` only
    affects wall time.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    if workers <= 1 or len(seeds) == 1:
        traces = _run_batch(cfg, seeds)
    else:
        chunks = np.array_split(np.array(seeds), min(workers, len(seeds)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ch: _run_batch(cfg, list(ch)),
                                  [c for c in chunks if len(c)]))
        traces = [tr for part in parts for tr in part]

    T = cfg.horizon
    tail = max(1, int(round(plateau_fraction * T)))
    ok = [tr for tr in traces if not tr.diverged]
    diverged_seeds = [s for s, tr in zip(seeds, traces) if tr.diverged]
    if not ok:
        raise RuntimeError("all seeds diverged")

    final_gaps = np.array([tr.final_gap for tr in ok])
    avg_grads = np.array([tr.grad_norm_sq[:T].mean() for tr in ok])
    plateaus = np.array([tr.test_loss[T + 1 - tail:].mean() for tr in ok])
    mean_trace = np.mean([tr.test_loss for tr in ok], axis=0)
    mean_grad_trace = np.mean([tr.grad_norm_sq for tr in ok], axis=0)

    fg_mean, fg_se = _mean_se(final_gaps)
    ag_mean, ag_se = _mean_se(avg_grads)
    pl_mean, pl_se = _mean_se(plateaus)
    return RunResult(
        final_gap_mean=fg_mean, final_gap_se=fg_se,
        avg_grad_sq_mean=ag_mean, avg_grad_sq_se=ag_se,
        plateau_mean=pl_mean, plateau_se=pl_se,
        mean_test_loss=mean_trace,
        mean_grad_norm_sq=mean_grad_trace,
        seeds=seeds, diverged_seeds=diverged_seeds,
        per_seed_final_gap=final_gaps, per_seed_plateau=plateaus,
        traces=traces if keep_traces else None,
        plateau_fraction=plateau_fraction,
    )


SWEEP_AXES = ("zeta", "N", "alpha", "beta", "eta", "delta", "sigma", "T")


def sweep_config(base: RunConfig, axis: str, value, alpha_rule: str | None = None) -> RunConfig:
    """Variant of `base` with one swept parameter.

    zeta: rebuild each collaborator optimum so zeta_k = value (1D only)
    N: averaged-collaborator noise sigma/sqrt(N); with
       alpha_rule="n_over_n_plus_1" also alpha = N/(N+1)
    delta: collaborator curvature a_0 + delta, optimum moved to keep zeta_k
    sigma: main noise value, collaborator noise rescaled proportionally
    alpha/beta/eta/T: direct replacements
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; valid axes: {SWEEP_AXES}")
    cfg = base
    if axis == "zeta":
        if base.main_task.dim != 1:
            raise ValueError("zeta sweep requires 1D tasks")
        colls = [replace(c, optimum=base.main_task.optimum + value / c.curvature)
                 for c in base.collaborators]
        return replace(cfg, collaborators=colls)
    if axis == "N":
        n = int(value)
        if n < 1:
            raise ValueError("N must be >= 1")
        sigma = base.main_task.noise_std
        colls = [replace(c, noise_std=sigma / math.sqrt(n))
                 for c in base.collaborators]
        cfg = replace(cfg, collaborators=colls)
        if alpha_rule == "n_over_n_plus_1":
            cfg = replace(cfg, weights=replace(base.weights, alpha=n / (n + 1.0)))
        elif alpha_rule is not None:
            raise ValueError(f"unknown alpha_rule {alpha_rule!r}")
        return cfg
    if axis == "alpha":
        return replace(cfg, weights=replace(base.weights, alpha=float(value)))
    if axis == "beta":
        return replace(cfg, weights=replace(base.weights, beta=float(value)))
    if axis == "eta":
        return replace(cfg, step_size=float(value))
    if axis == "delta":
        if base.main_task.dim != 1:
            raise ValueError("delta sweep requires 1D tasks")
        a_new = base.main_task.curvature + float(value)
        colls = []
        for c in base.collaborators:
            zeta_k = c.curvature * (c.optimum - base.main_task.optimum)
            colls.append(replace(c, curvature=a_new,
                                 optimum=base.main_task.optimum + zeta_k / a_new))
        return replace(cfg, collaborators=colls)
    if axis == "sigma":
        old = base.main_task.noise_std
        colls = []
        for c in base.collaborators:
            ratio = c.noise_std / old if old > 0 else 1.0
            colls.append(replace(c, noise_std=float(value) * ratio))
        return replace(cfg, main_task=replace(base.main_task, noise_std=float(value)),
                       collaborators=colls)
    # axis == "T"
    return replace(cfg, horizon=int(value))


def sweep(base: RunConfig, axis: str, values, seeds, workers: int = 1,
          alpha_rule: str | None = None, plateau_fraction: float = 0.1) -> list:
    """One RunResult per swept value, in input order."""
    return [(v, run_replicated(sweep_config(base, axis, v, alpha_rule), seeds,
                               workers=workers, plateau_fraction=plateau_fraction))
            for v in values]


def mean_dynamics_oracle(cfg: RunConfig, T: int | None = None) -> np.ndarray:
    """Exact expected-iterate sequence for Alone/WGA with constant step.

    Noise is additive and zero-mean, so E[x_t] follows the affine
    recursion E[x_{t+1}] = E[x_t] - eta [(1-a) A_0 (E-x_0*)
    + a sum_k tau_k A_k (E-x_k*)].  Unsupported for BC (the bias-estimate
    state couples to the noise history).
    """
    if cfg.aggregator not in ("alone", "wga"):
        raise ValueError("mean dynamics oracle supports alone and wga only")
    if isinstance(cfg.step_size, DecreasingPlSchedule):
        raise ValueError("mean dynamics oracle requires a constant step size")
    T = cfg.horizon if T is None else int(T)
    eta = float(cfg.step_size)
    alpha = 0.0 if cfg.aggregator == "alone" else cfg.weights.alpha
    out = np.empty((T + 1, cfg.main_task.dim))
    out[0] = cfg.x0
    for t in range(T):
        g = (1.0 - alpha) * cfg.main_task.curvature * (out[t] - cfg.main_task.optimum)
        if alpha > 0:
            for k, c in enumerate(cfg.collaborators):
                g = g + alpha * cfg.weights.tau[k] * c.curvature * (out[t] - c.optimum)
        out[t + 1] = out[t] - eta * g
    return out


def mean_fixed_point(cfg: RunConfig) -> np.ndarray:
    """Fixed point of the mean dynamics: the weighted optimum
    ((1-a) A_0 x_0* + a sum tau_k A_k x_k*) / ((1-a) A_0 + a sum tau_k A_k)."""
    alpha = 0.0 if cfg.aggregator == "alone" else cfg.weights.alpha
    num = (1.0 - alpha) * cfg.main_task.curvature * cfg.main_task.optimum
    den = (1.0 - alpha) * cfg.main_task.curvature
    if alpha > 0:
        for k, c in enumerate(cfg.collaborators):
            num = num + alpha * cfg.weights.tau[k] * c.curvature * c.optimum
            den = den + alpha * cfg.weights.tau[k] * c.curvature
    return num / den
