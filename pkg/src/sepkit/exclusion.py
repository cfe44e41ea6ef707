"""Exact continuous-time simulation of the 1-D symmetric simple exclusion
process on a periodic window, with bond-current and tagged-particle
tracking and the exact microscopic identity checks.

Every bond of the ring carries an independent rate-1/2 exponential clock.
Scheduling uses the equivalent aggregate construction: exponential waits
at total rate L/2 followed by a uniform bond pick, which is exact in
distribution and O(1) per event.  The event loop is JIT-compiled; a pure
Python fallback keeps the module importable without numba (slow, test
scale only).

Window convention: window index i in [0, L) is lattice coordinate
x = i - L//2, so the window covers {-L/2, ..., L/2-1}.  Bond index b
joins sites b and b+1 (mod L); lattice bond (x, x+1) is b = x + L//2.
The wrap bond b = L-1 exists but the guard keeps it causally irrelevant
to any observable window.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import GOLDEN_GAMMA, xoshiro256_init

try:
    from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


DEFAULT_SAFETY_FACTOR = 10.0

_INV_2_53 = 1.0 / 9007199254740992.0  # 2^-53


class GuardError(ValueError):
    """Wrap-around guard violated: lattice too small for the horizon."""


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (np.uint64(64) - k))


@njit(cache=True, inline="always")
def _xo_next(s):
    # xoshiro256** state transition, s is a uint64[4] view
    result = _rotl(s[1] * np.uint64(5), np.uint64(7)) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], np.uint64(45))
    return result


@njit(cache=True, inline="always")
def _xo_uniform(s):
    # double in [0, 1) from the top 53 bits
    return (_xo_next(s) >> np.uint64(11)) * _INV_2_53


@njit(cache=True, inline="always")
def _splitmix_next(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _seed_state(seed):
    s = np.empty(4, dtype=np.uint64)
    acc = seed
    nonzero = False
    for i in range(4):
        acc, out = _splitmix_next(acc)
        s[i] = out
        if out != np.uint64(0):
            nonzero = True
    if not nonzero:
        s[0] = np.uint64(0x9E3779B97F4A7C15)
    return s


@njit(cache=True)
def _fill_bernoulli(occ, rho, s):
    # one uniform per site, independent of outcomes, so the draw count
    # (hence the downstream stream) never depends on the configuration
    for i in range(occ.shape[0]):
        occ[i] = 1 if _xo_uniform(s) < rho else 0


@njit(cache=True)
def _run_to(occ, cur, ledger_lo, ledger_hi, labels, track_stir,
            tagged_idx, tagged_x, s, t_now, t_end):
    """Run the exact jump chain from t_now to t_end on one state.

    Mutates occ, cur, labels, s in place; returns the tagged bookkeeping.
    The overshooting wait past t_end is discarded, which is exact by
    memorylessness of the exponential clock.
    """
    L = occ.shape[0]
    inv_rate = 2.0 / L  # total swap rate is L/2
    uL = np.uint64(L)
    t = t_now
    while True:
        u = _xo_uniform(s)
        t = t - math.log(1.0 - u) * inv_rate
        if t > t_end:
            break
        # uniform bond pick; modulo bias is O(L/2^64), irrelevant here
        b = int(_xo_next(s) % uL)
        i = b
        j = b + 1 if b + 1 < L else 0
        if track_stir:
            tmp = labels[i]
            labels[i] = labels[j]
            labels[j] = tmp
        a = occ[i]
        c = occ[j]
        if a != c:
            occ[i] = c
            occ[j] = a
            if a == 1:
                # particle crossed bond b left to right
                if ledger_lo <= b < ledger_hi:
                    cur[b] += 1
                if tagged_idx == i:
                    tagged_idx = j
                    tagged_x += 1
            else:
                if ledger_lo <= b < ledger_hi:
                    cur[b] -= 1
                if tagged_idx == j:
                    tagged_idx = i
                    tagged_x -= 1
    return tagged_idx, tagged_x


@njit(cache=True, parallel=True)
def _ensemble_paths(L, rho, conditioned, times, seeds, X_out, J_out):
    """Replica-parallel path ensemble, ledgering every bond.

    Each replica is a self-contained stream seeded from seeds[r]; rows of
    the outputs are written independently, so aggregation order cannot
    affect the result.
    """
    n = seeds.shape[0]
    bond0 = L // 2 - 1  # lattice bond (-1, 0)
    origin = L // 2
    for r in prange(n):
        s = _seed_state(seeds[r])
        occ = np.zeros(L, dtype=np.uint8)
        cur = np.zeros(L, dtype=np.int64)
        labels = np.zeros(1, dtype=np.int64)
        _fill_bernoulli(occ, rho, s)
        tagged_idx = -1
        tagged_x = 0
        if conditioned:
            occ[origin] = 1
            tagged_idx = origin
        t = 0.0
        for k in range(times.shape[0]):
            tagged_idx, tagged_x = _run_to(
                occ, cur, 0, L, labels, False,
                tagged_idx, tagged_x, s, t, times[k])
            t = times[k]
            X_out[r, k] = tagged_x
            J_out[r, k] = cur[bond0]


@dataclass
class LatticeWindow:
    """Periodic window of L sites identified with {-L/2, ..., L/2-1}."""
    size: int
    origin_offset: int = 0

    def __post_init__(self):
        if self.size < 4:
            raise ValueError("window size must be at least 4 sites")
        self.origin_offset = self.size // 2

    def to_lattice(self, idx):
        return idx - self.origin_offset

    def to_index(self, x):
        return x + self.origin_offset


@dataclass
class SimState:
    """Occupancy window + clocks + ledgers for one SSEP trajectory."""
    window: LatticeWindow
    rho: float
    occupancy: np.ndarray          # uint8, by window index
    initial_occupancy: np.ndarray  # snapshot at clock 0
    currents: np.ndarray           # int64 net signed crossings per bond
    rng_state: np.ndarray          # xoshiro256** uint64[4]
    clock: float = 0.0
    tagged_idx: int = -1           # window index, -1 when inactive
    tagged_x: int = 0              # unwrapped lattice coordinate X(t)
    labels: np.ndarray | None = None   # site -> initial label (stirring)
    ledger_bonds: tuple = field(default=None)  # (lo, hi) window bond range

    def __post_init__(self):
        if self.ledger_bonds is None:
            self.ledger_bonds = (0, self.window.size)

    @property
    def L(self):
        return self.window.size

    @property
    def tagged_active(self):
        return self.tagged_idx >= 0

    def occupancy_at(self, x):
        """Occupancy at lattice coordinate x."""
        return int(self.occupancy[self.window.to_index(x)])

    def current_at(self, x):
        """Net current J_{x,x+1}(t) at lattice bond (x, x+1)."""
        b = self.window.to_index(x)
        lo, hi = self.ledger_bonds
        if not lo <= b < hi:
            raise ValueError("bond (%d,%d) is not in the ledgered set" % (x, x + 1))
        return int(self.currents[b])


def _validate_init(rho, L):
    if not 0.0 < rho < 1.0:
        raise ValueError("density must lie strictly inside (0, 1)")
    if L < 4:
        raise ValueError("window size must be at least 4 sites")


def init_bernoulli(rho, L, seed, track_stirring=False, ledger_bonds=None):
    """Product-Bernoulli(rho) initial state, no tagged particle."""
    _validate_init(rho, L)
    win = LatticeWindow(L)
    s = xoshiro256_init(seed)
    occ = np.zeros(L, dtype=np.uint8)
    _fill_bernoulli(occ, float(rho), s)
    labels = np.arange(L, dtype=np.int64) if track_stirring else None
    return SimState(window=win, rho=float(rho), occupancy=occ,
                    initial_occupancy=occ.copy(),
                    currents=np.zeros(L, dtype=np.int64),
                    rng_state=s, labels=labels,
                    ledger_bonds=ledger_bonds)


def init_conditioned(rho, L, seed, track_stirring=False, ledger_bonds=None):
    """Bernoulli(rho) conditioned on a particle at the origin; tag it."""
    state = init_bernoulli(rho, L, seed, track_stirring=track_stirring,
                           ledger_bonds=ledger_bonds)
    origin = state.window.to_index(0)
    state.occupancy[origin] = 1
    state.initial_occupancy[origin] = 1
    state.tagged_idx = origin
    state.tagged_x = 0
    return state


def advance_to(state: SimState, t: float) -> SimState:
    """Advance the exact jump chain to simulation time t (in place)."""
    if t < state.clock:
        raise ValueError("cannot advance backwards: t=%g < clock=%g"
                         % (t, state.clock))
    if t == state.clock:
        return state
    labels = state.labels if state.labels is not None \
        else np.zeros(1, dtype=np.int64)
    lo, hi = state.ledger_bonds
    tagged_idx, tagged_x = _run_to(
        state.occupancy, state.currents, lo, hi, labels,
        state.labels is not None, state.tagged_idx, state.tagged_x,
        state.rng_state, state.clock, float(t))
    state.tagged_idx = tagged_idx
    state.tagged_x = tagged_x
    state.clock = float(t)
    return state


def check_guard(L, t_max, window_pad=0, safety_factor=DEFAULT_SAFETY_FACTOR):
    """Wrap-around guard: diffusive spread must stay inside half the ring.

    Requires 2*safety_factor*sqrt(t_max) + window_pad < L/2.  Raises
    GuardError otherwise.
    """
    need = 2.0 * safety_factor * math.sqrt(max(t_max, 0.0)) + window_pad
    if need >= L / 2.0:
        raise GuardError(
            "guard violated: need 2*%g*sqrt(%g)+%d = %.1f < L/2 = %.1f"
            % (safety_factor, t_max, window_pad, need, L / 2.0))


@dataclass
class PathSample:
    """(X(t_i), J_{-1,0}(t_i)) along one trajectory."""
    times: np.ndarray
    X_values: np.ndarray
    J_values: np.ndarray
    seed: int


def sample_path(rho, L, grid, seed, tagged=True,
                safety_factor=DEFAULT_SAFETY_FACTOR) -> PathSample:
    """Simulate one trajectory and record (X, J_{-1,0}) on the time grid."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D array of times")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid times must be strictly increasing")
    if grid[0] < 0:
        raise ValueError("grid times must be nonnegative")
    check_guard(L, grid[-1], window_pad=1, safety_factor=safety_factor)
    if tagged:
        state = init_conditioned(rho, L, seed)
    else:
        state = init_bernoulli(rho, L, seed)
    X = np.zeros(grid.size, dtype=np.int64)
    J = np.zeros(grid.size, dtype=np.int64)
    bond0 = -1  # lattice bond (-1, 0)
    for k, t in enumerate(grid):
        advance_to(state, t)
        X[k] = state.tagged_x if tagged else 0
        J[k] = state.current_at(bond0)
    return PathSample(times=grid.copy(), X_values=X, J_values=J,
                      seed=int(seed))


def ensemble_paths(rho, L, grid, seeds, tagged=True,
                   safety_factor=DEFAULT_SAFETY_FACTOR):
    """Replica ensemble of sample_path runs (JIT, replica-parallel).

    Returns (X, J) int64 arrays of shape (n_replicas, n_times).  Each
    replica is bit-identical to sample_path(rho, L, grid, seeds[r]).
    """
    grid = np.asarray(grid, dtype=np.float64)
    if np.any(np.diff(grid) <= 0) or grid.size == 0 or grid[0] < 0:
        raise ValueError("grid times must be nonnegative, strictly increasing")
    check_guard(L, grid[-1], window_pad=1, safety_factor=safety_factor)
    seeds = np.asarray(seeds, dtype=np.uint64)
    X = np.zeros((seeds.size, grid.size), dtype=np.int64)
    J = np.zeros((seeds.size, grid.size), dtype=np.int64)
    _ensemble_paths(int(L), float(rho), bool(tagged), grid, seeds, X, J)
    return X, J


# --- exact microscopic identity checks -----------------------------------

def check_conservation(state: SimState, window) -> bool:
    """Discrete conservation law on a lattice window [x_lo, x_hi].

    J_{x-1,x}(t) - J_{x,x+1}(t) == eta_t(x) - eta_0(x), exactly, per site.
    """
    x_lo, x_hi = window
    L = state.L
    if not (-L // 2 < x_lo - 1 and x_hi + 1 < L // 2 - 1):
        raise ValueError("window must sit strictly inside the ring segment")
    for x in range(x_lo, x_hi + 1):
        lhs = state.current_at(x - 1) - state.current_at(x)
        i = state.window.to_index(x)
        rhs = int(state.occupancy[i]) - int(state.initial_occupancy[i])
        if lhs != rhs:
            return False
    return True


def check_current_tagged_identity(state: SimState) -> bool:
    """Order-preservation identity tying J_{-1,0}(t) to X(t).

    J >= 0: J equals the particle count on [0, X(t)-1] at time t.
    J <  0: J equals minus the count on [X(t), -1].  Empty sums are zero.
    """
    if not state.tagged_active:
        raise ValueError("no tagged particle is active")
    J = state.current_at(-1)
    X = state.tagged_x
    win = state.window
    if J >= 0:
        count = sum(int(state.occupancy[win.to_index(x)])
                    for x in range(0, X))
        return J == count
    count = sum(int(state.occupancy[win.to_index(x)])
                for x in range(X, 0))
    return J == -count


def check_Gn_decomposition(state: SimState, n, N, a_N) -> float:
    """Residual of the triangular-test-function current decomposition.

    With G_n(u) = (1-u/n)^+ 1{u>=0} and the empirical field pairing
    <mu_t, G> = (1/a_N) sum_x (eta_t(x) - rho) G(x/N), returns

        J_{-1,0}(t)/a_N - [<mu_t,G_n> - <mu_0,G_n>]
            - (1/(n N a_N)) sum_{x=0}^{nN-1} J_{x,x+1}(t),

    which is exactly zero up to float round-off.
    """
    nN = n * N
    L = state.L
    if nN >= L // 2 - 1:
        raise ValueError("nN sites must fit inside the guarded window")
    win = state.window
    xs = np.arange(0, nN)
    g = 1.0 - xs / float(nN)  # G_n(x/N) = 1 - x/(nN) on the support
    idx = xs + win.origin_offset
    eta_t = state.occupancy[idx].astype(np.float64)
    eta_0 = state.initial_occupancy[idx].astype(np.float64)
    pair_t = np.sum((eta_t - state.rho) * g) / a_N
    pair_0 = np.sum((eta_0 - state.rho) * g) / a_N
    sum_J = sum(state.current_at(x) for x in range(0, nN))
    return (state.current_at(-1) / a_N - (pair_t - pair_0)
            - sum_J / (nN * a_N))


def stirring_positions(state: SimState) -> np.ndarray:
    """Positions xi_t^x of the stirring labels (inverse of site->label)."""
    if state.labels is None:
        raise ValueError("stirring tracking is off for this state")
    pos = np.empty(state.L, dtype=np.int64)
    pos[state.labels] = np.arange(state.L, dtype=np.int64)
    return pos


def check_stirring_pushforward(state: SimState) -> bool:
    """Occupancy must equal the pushforward of eta_0 by the permutation."""
    if state.labels is None:
        raise ValueError("stirring tracking is off for this state")
    if np.unique(state.labels).size != state.L:
        return False
    return bool(np.all(state.occupancy ==
                       state.initial_occupancy[state.labels]))
