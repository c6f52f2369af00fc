"""Deterministic counter-based random streams.

Every stochastic draw in the library comes from a Philox stream keyed by
(seed, agent, context).  Streams for distinct keys are statistically
independent and reproducible regardless of execution order or thread
count, so a run is a pure function of its config.
"""

import numpy as np

# Stream contexts.  Gradient noise, oracle bias noise and warm-start bias
# samples live in disjoint streams so that enabling one feature never
# shifts the draws of another.
GRADIENT_CONTEXT = 0
ORACLE_CONTEXT = 1
WARMSTART_CONTEXT = 2

_MASK64 = (1 << 64) - 1


def agent_stream(seed: int, agent: int, context: int = GRADIENT_CONTEXT) -> np.random.Generator:
    """Generator for the (seed, agent, context) stream.

    The t-th standard normal drawn from this stream is, by construction,
    the noise used at step t for this agent.
    """
    if agent < 0 or agent >= (1 << 32):
        raise ValueError(f"agent index out of range: {agent}")
    if context < 0 or context >= (1 << 32):
        raise ValueError(f"context out of range: {context}")
    key = [int(seed) & _MASK64, (int(agent) | (int(context) << 32)) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))
