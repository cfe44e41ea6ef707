"""Deterministic seeding helpers shared by the simulator and the samplers.

Per-replica seeds are derived from a master seed by a splitmix64 hash
(seed_r = mix64(master + (r+1)*GOLDEN)), and every event stream runs on
its own xoshiro256** generator whose four state words come from a
splitmix64 stream of the replica seed.  Both state transitions follow
the published reference algorithms bit for bit, so results are
reproducible across platforms, processes and thread schedules.
"""

import numpy as np

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def splitmix64(state: int):
    """One splitmix64 step.  Returns (next_state, output)."""
    state = (state + GOLDEN_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, (z ^ (z >> 31)) & _MASK64


def derive_seed(master_seed: int, index: int) -> int:
    """Replica seed: splitmix64 output of master + (index+1)*GOLDEN_GAMMA."""
    s = (int(master_seed) + (index + 1) * GOLDEN_GAMMA) & _MASK64
    return splitmix64(s)[1]


def derive_seeds(master_seed: int, n: int) -> np.ndarray:
    return np.array([derive_seed(master_seed, i) for i in range(n)],
                    dtype=np.uint64)


def xoshiro256_init(seed: int) -> np.ndarray:
    """xoshiro256** state vector from a 64-bit seed via splitmix64."""
    state = np.empty(4, dtype=np.uint64)
    s = int(seed) & _MASK64
    for i in range(4):
        s, out = splitmix64(s)
        state[i] = out
    if not state.any():
        # all-zero state is the one forbidden xoshiro fixed point
        state[0] = np.uint64(GOLDEN_GAMMA)
    return state
