"""Fractional Brownian motion with Hurst 1/4.

Covariance a(t,s) = (sqrt(t)+sqrt(s)-sqrt(|t-s|))/2, the Volterra kernel
built on the Gauss hypergeometric function, and two samplers: exact
Cholesky of the covariance matrix, and kernel discretization of the
moving-average representation against white noise.

The hypergeometric evaluation follows the convergence map
    |z| <= 1/2          direct series,
    1/2 < z < 1         z -> 1-z connection,
    z = 1               Gauss summation,
    -4 <= z < -1/2      Pfaff transform z -> z/(z-1),
    z < -4              z -> 1/z connection (the Pfaff series alone
                        needs O(|z|) terms, hopeless near the kernel's
                        s -> 0 endpoint where z ~ -t/s).
All branches target 1e-12 relative termination and signal
non-convergence past 1_000_000 terms.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import roots_jacobi, roots_legendre

from .exclusion import njit  # shared decorator, falls back without numba

GAMMA_3_4 = math.gamma(0.75)
#: normalization of the moving-average kernel, 8*Gamma(3/2)*cos(pi/4)/pi
V_NORM = 8.0 * math.gamma(1.5) * math.cos(math.pi / 4.0) / math.pi
#: prefactor 1/(sqrt(V)*Gamma(3/4)) multiplying (t-s)^(-1/4)
KERNEL_PREF = 1.0 / (math.sqrt(V_NORM) * GAMMA_3_4)

_MAX_TERMS = 1_000_000
_SERIES_TOL = 1e-16


class Hyp2f1Error(ArithmeticError):
    """Series exceeded the term cap without converging."""


def cov_a(t, s):
    """fBM(1/4) covariance a(t,s) = (sqrt t + sqrt s - sqrt|t-s|)/2."""
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if np.any(t < 0) or np.any(s < 0):
        raise ValueError("covariance arguments must be nonnegative")
    out = 0.5 * (np.sqrt(t) + np.sqrt(s) - np.sqrt(np.abs(t - s)))
    return float(out) if out.ndim == 0 else out


@njit(cache=True)
def _series(a, b, c, z):
    """Direct Gauss series; nan signals the term cap."""
    term = 1.0
    total = 1.0
    for k in range(_MAX_TERMS):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        total += term
        if abs(term) <= _SERIES_TOL * abs(total):
            return total
    return np.nan


@njit(cache=True)
def _hyp2f1_core(a, b, c, z):
    """Branch dispatch; assumes a-b and c-a-b are not integers when the
    corresponding connection formulas are taken (true for the kernel's
    (1/4,-1/4,3/4))."""
    if z == 0.0:
        return 1.0
    if z == 1.0:
        # Gauss summation, requires c-a-b > 0
        return (math.gamma(c) * math.gamma(c - a - b)
                / (math.gamma(c - a) * math.gamma(c - b)))
    if 0.5 < z < 1.0:
        w = 1.0 - z
        c1 = (math.gamma(c) * math.gamma(c - a - b)
              / (math.gamma(c - a) * math.gamma(c - b)))
        c2 = (math.gamma(c) * math.gamma(a + b - c)
              / (math.gamma(a) * math.gamma(b)))
        return (c1 * _series(a, b, a + b - c + 1.0, w)
                + c2 * w ** (c - a - b) * _series(c - a, c - b,
                                                  c - a - b + 1.0, w))
    if abs(z) <= 0.5:
        return _series(a, b, c, z)
    if z < -4.0:
        w = 1.0 / z
        c1 = (math.gamma(c) * math.gamma(b - a)
              / (math.gamma(b) * math.gamma(c - a)))
        c2 = (math.gamma(c) * math.gamma(a - b)
              / (math.gamma(a) * math.gamma(c - b)))
        return (c1 * (-z) ** (-a) * _series(a, a - c + 1.0, a - b + 1.0, w)
                + c2 * (-z) ** (-b) * _series(b, b - c + 1.0,
                                              b - a + 1.0, w))
    # -4 <= z < -1/2: Pfaff, argument z/(z-1) in [1/3, 4/5)
    w = z / (z - 1.0)
    return (1.0 - z) ** (-a) * _series(a, c - b, c, w)


def hyp2f1(a, b, c, z):
    """Gauss hypergeometric F(a,b;c;z) for real z <= 1."""
    if z > 1.0:
        raise ValueError("only z <= 1 is supported")
    if c <= 0 and c == int(c):
        raise ValueError("c must not be a nonpositive integer")
    if z == 1.0 and c - a - b <= 0:
        raise ValueError("series diverges at z=1 when c-a-b <= 0")
    for diff in (c - a - b, a - b):
        if 0.5 < z < 1.0 or z < -4.0:
            if abs(diff - round(diff)) < 1e-12:
                raise ValueError("degenerate (log) connection case is "
                                 "not implemented")
            break
    out = _hyp2f1_core(float(a), float(b), float(c), float(z))
    if math.isnan(out):
        raise Hyp2f1Error("hypergeometric series did not converge in "
                          f"{_MAX_TERMS} terms (z={z})")
    return out


@njit(cache=True, inline="always")
def _hyp2f1_kernel(z):
    # fixed-parameter fast path F(1/4,-1/4;3/4;z), z <= 0
    return _hyp2f1_core(0.25, -0.25, 0.75, z)


@njit(cache=True)
def _kernel_scalar(t, s):
    return (t - s) ** (-0.25) * KERNEL_PREF * _hyp2f1_kernel(1.0 - t / s)


@njit(cache=True)
def _kernel_vec(t, svals, out):
    for i in range(svals.shape[0]):
        out[i] = _kernel_scalar(t, svals[i])


def kernel_K(t, s):
    """Moving-average kernel of the Hurst-1/4 representation, 0 < s < t.

    Diverges like (t-s)^(-1/4) as s -> t and like s^(-1/4) as s -> 0;
    both singularities are integrable.
    """
    if not 0.0 < s < t:
        raise ValueError("kernel requires 0 < s < t")
    return float(_kernel_scalar(float(t), float(s)))


def kernel_K_many(t, svals):
    svals = np.ascontiguousarray(svals, dtype=np.float64)
    out = np.empty_like(svals)
    _kernel_vec(float(t), svals, out)
    return out


def _panel_gl(cache={}):
    if "gl" not in cache:
        cache["gl"] = roots_legendre(4)
    return cache["gl"]


def kernel_cov_quadrature(t, s, panels_per_unit=2048):
    """Quadrature of int_0^(t^s) K(t,u) K(s,u) du.

    Equals a(t,s) exactly in the continuum.  The u -> 0 endpoint
    (integrand ~ u^{-1/2}) is removed by the substitution u = w^2; the
    u -> min(t,s) endpoint carries weight (m-u)^{-1/4} (or ^{-1/2} at
    t == s) and is handled by Gauss-Jacobi product integration on the
    final panel.
    """
    if t <= 0 or s <= 0:
        raise ValueError("times must be positive")
    if t == s:
        gamma = 0.5
    else:
        gamma = 0.25
    m = min(t, s)
    big, small = max(t, s), m
    xg, wg = _panel_gl()

    # left half [0, m/2] via u = w^2: integrand analytic in w
    wmax = math.sqrt(m / 2.0)
    n_w = 192
    edges = np.linspace(0.0, wmax, n_w + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    wnodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wwts = (half[:, None] * wg[None, :]).ravel()
    u = wnodes ** 2
    vals = 2.0 * wnodes * kernel_K_many(big, u) * kernel_K_many(small, u)
    total = float(np.sum(vals * wwts))

    # right half [m/2, m]: plain panels, singular product rule at the end
    n_p = max(8, int(math.ceil(panels_per_unit * (m / 2.0))))
    edges = np.linspace(m / 2.0, m, n_p + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:-1]
    half = 0.5 * np.diff(edges)[:-1]
    unodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    uwts = (half[:, None] * wg[None, :]).ravel()
    vals = kernel_K_many(big, unodes) * kernel_K_many(small, unodes)
    total += float(np.sum(vals * uwts))

    # final panel [m-h, m]: weight (m-u)^(-gamma), smooth factor psi
    h = edges[-1] - edges[-2]
    xj, wj = roots_jacobi(16, -gamma, 0.0)
    unodes = m - h * (1.0 - xj) / 2.0
    scale = (h / 2.0) ** (1.0 - gamma)
    if t == s:
        psi = ((m - unodes) ** gamma
               * kernel_K_many(big, unodes) ** 2)
    else:
        psi = ((m - unodes) ** gamma * kernel_K_many(small, unodes)
               * kernel_K_many(big, unodes))
    total += float(scale * np.sum(wj * psi))
    return total


@dataclass
class CovMatrix:
    """Covariance matrix A[k,l] = a(t_k, t_l) on a strictly increasing
    positive grid, with a lazily computed Cholesky factor."""
    times: np.ndarray
    entries: np.ndarray = field(init=False)
    _chol: np.ndarray | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("times must be a non-empty 1-D array")
        if np.any(t <= 0):
            raise ValueError("grid times must be positive (t=0 row is "
                             "degenerate: B_0 = 0)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid times must be strictly increasing")
        self.times = t
        self.entries = cov_a(t[:, None], t[None, :])

    @property
    def chol(self):
        """Lower-triangular factor; raises LinAlgError if not PD."""
        if self._chol is None:
            self._chol = np.linalg.cholesky(self.entries)
        return self._chol

    def solve(self, rhs):
        c = scipy.linalg.cho_factor(self.entries, lower=True)
        return scipy.linalg.cho_solve(c, rhs)


def _kernel_row_weights(t, cells):
    """Cell averages of K(t, .) over the sub-grid cells up to t.

    The average is the L2 projection matching white-noise increments of
    variance equal to the cell width.  Interior cells use 2-point
    Gauss-Legendre; the cell ending at t pulls out the (t-s)^(-1/4)
    weight exactly (Gauss-Jacobi).
    """
    xg, wg = roots_legendre(2)
    xj, wj = roots_jacobi(4, -0.25, 0.0)
    w = np.zeros(len(cells))
    for j, (a, b) in enumerate(cells):
        if a >= t:
            break
        if b < t - 1e-15:
            half = 0.5 * (b - a)
            nodes = 0.5 * (a + b) + half * xg
            w[j] = half * np.sum(wg * kernel_K_many(t, nodes)) / (b - a)
        else:
            # singular cell [a, t]; t is a cell edge by construction
            h = t - a
            nodes = t - h * (1.0 - xj) / 2.0
            psi = (t - nodes) ** 0.25 * kernel_K_many(t, nodes)
            w[j] = (h / 2.0) ** 0.75 * np.sum(wj * psi) / (b - a)
            break
    return w


def sample_fbm(grid, n_paths, seed, method="cholesky", resolution=None):
    """Sample fBM(1/4) paths on a strictly increasing positive grid.

    cholesky: exact Gaussian vector with covariance CovMatrix(grid).
    kernel:   moving-average discretization sum_k w_k dB_k with product
              integration of the singular weight near s = t; requires a
              sub-grid `resolution` (cells per unit time).

    Returns an (n_paths, len(grid)) array; deterministic under `seed`.
    """
    grid = np.asarray(grid, dtype=np.float64)
    rng = np.random.default_rng(seed)
    if method == "cholesky":
        cm = CovMatrix(grid)
        z = rng.standard_normal((n_paths, grid.size))
        return z @ cm.chol.T
    if method != "kernel":
        raise ValueError("method must be 'cholesky' or 'kernel'")
    if resolution is None:
        raise ValueError("kernel method requires a sub-grid resolution")
    t_max = grid[-1]
    n_cells = int(math.ceil(t_max * resolution))
    edges = np.union1d(np.linspace(0.0, t_max, n_cells + 1), grid)
    cells = list(zip(edges[:-1], edges[1:]))
    W = np.vstack([_kernel_row_weights(t, cells) for t in grid])
    dB = rng.standard_normal((n_paths, len(cells))) * np.sqrt(np.diff(edges))
    return dB @ W.T
