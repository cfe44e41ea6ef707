"""Rate functions for the current/tagged-particle deviation laws.

finite_dim_rate is the quadratic form alpha^T A^{-1} alpha / 2 built on
the fBM(1/4) covariance matrix; rate_current and rate_tagged rescale it
by sigma_J^2 = sqrt(2/pi) rho (1-rho) and sigma_X^2 = sqrt(2/pi)(1-rho)/rho.

The path-level energy is evaluated two independent ways: inversion of
the first-kind Volterra equation f(t) = int_0^t K(t,s) h(s) ds by
product-integration collocation (singular kernel handled with its
(t-s)^(-1/4) weight), and as a supremum of finite-dimensional rates over
greedily refined time subsets.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.special import roots_jacobi, roots_legendre

from .fbm import CovMatrix, kernel_K_many


def sigma_J2(rho):
    if not 0.0 < rho < 1.0:
        raise ValueError("density must lie in (0, 1)")
    return math.sqrt(2.0 / math.pi) * rho * (1.0 - rho)


def sigma_X2(rho):
    if not 0.0 < rho < 1.0:
        raise ValueError("density must lie in (0, 1)")
    return math.sqrt(2.0 / math.pi) * (1.0 - rho) / rho


@dataclass
class RateQuery:
    times: np.ndarray
    alphas: np.ndarray
    rho: float | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        if self.times.shape != self.alphas.shape:
            raise ValueError("times and alphas must have matching length")


def finite_dim_rate(times, alphas):
    """(1/2) alpha^T A^{-1} alpha via Cholesky solve, never an inverse."""
    cm = CovMatrix(times)
    alphas = np.asarray(alphas, dtype=np.float64)
    try:
        x = cm.solve(alphas)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "covariance matrix is singular (duplicate times?)") from exc
    return 0.5 * float(alphas @ x)


def rate_current(times, alphas, rho):
    return finite_dim_rate(times, alphas) / sigma_J2(rho)


def rate_tagged(times, alphas, rho):
    return finite_dim_rate(times, alphas) / sigma_X2(rho)


@dataclass
class PathFunction:
    """A path sampled on a grid in [0, T]."""
    grid: np.ndarray
    values: np.ndarray
    T: float

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values must have matching length")
        if self.grid[0] < 0 or self.grid[-1] > self.T + 1e-12:
            raise ValueError("grid must lie inside [0, T]")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")


def _cell_quartic(t, a, b, xg, wg, n_sub):
    """int_a^b K(t,s) ds via s = w^4, which absorbs the s^(-1/4) branch
    (and the subleading s^(+1/4) one) of the kernel near s = 0."""
    wa, wb = a ** 0.25, b ** 0.25
    sub = np.linspace(wa, wb, n_sub + 1)
    mid = 0.5 * (sub[1:] + sub[:-1])
    h2 = 0.5 * (sub[1] - sub[0])
    w = (mid[:, None] + h2 * xg[None, :]).ravel()
    vals = 4.0 * w ** 3 * kernel_K_many(t, w ** 4)
    return h2 * float(np.sum(vals.reshape(n_sub, xg.size) @ wg))


def _cell_jacobi_right(t, a, xj, wj):
    """int_a^t K(t,s) ds with the (t-s)^(-1/4) weight pulled out."""
    h = t - a
    nodes = t - h * (1.0 - xj) / 2.0
    psi = (t - nodes) ** 0.25 * kernel_K_many(t, nodes)
    return (h / 2.0) ** 0.75 * float(wj @ psi)


def _volterra_matrix(T, n, order, n_sub, n_refine):
    """Lower-triangular collocation matrix M[i,j] = int_{cell j} K(t_i, s) ds
    for piecewise-constant h on n uniform cells, collocation at right
    endpoints.  The cell touching t_i carries the exact (t_i-s)^(-1/4)
    Gauss-Jacobi weight, the first cells use the s = w^4 substitution for
    the left-endpoint singularity, and the n_refine cells next to the
    diagonal are subdivided n_sub-fold."""
    dt = T / n
    xg, wg = roots_legendre(order)
    xj, wj = roots_jacobi(2 * order, -0.25, 0.0)
    n_left = 4  # cells treated with the quartic substitution
    M = np.zeros((n, n))
    edges = np.linspace(0.0, T, n + 1)
    for i in range(1, n + 1):
        t = edges[i]
        row = np.zeros(i)
        if i > 1:
            # smooth middle cells, batched Gauss-Legendre
            a = edges[:i - 1]
            half = 0.5 * dt
            nodes = (a[:, None] + half + half * xg[None, :]).ravel()
            vals = kernel_K_many(t, nodes).reshape(i - 1, order)
            row[:i - 1] = half * vals @ wg
            for j in range(min(n_left, i - 1)):
                row[j] = _cell_quartic(t, edges[j], edges[j + 1], xg, wg,
                                       n_sub)
            for j in range(max(n_left, i - 1 - n_refine), i - 1):
                sub = np.linspace(edges[j], edges[j + 1], n_sub + 1)
                mid = 0.5 * (sub[1:] + sub[:-1])
                h2 = 0.5 * (sub[1] - sub[0])
                nd = (mid[:, None] + h2 * xg[None, :]).ravel()
                row[j] = h2 * float(
                    np.sum(kernel_K_many(t, nd).reshape(n_sub, order) @ wg))
        if i == 1:
            # both endpoints singular: quartic left half, Jacobi right half
            row[0] = (_cell_quartic(t, 0.0, 0.5 * dt, xg, wg, n_sub)
                      + _cell_jacobi_right(t, 0.5 * dt, xj, wj))
        else:
            row[i - 1] = _cell_jacobi_right(t, t - dt, xj, wj)
        M[i - 1, :i] = row
    return M


@lru_cache(maxsize=8)
def _volterra_matrices(T, n):
    # both rules are high order so their disagreement stays ~1e-10 for
    # bounded h and the residual threshold only reacts to exploding h
    solve = _volterra_matrix(T, n, order=6, n_sub=6, n_refine=3)
    check = _volterra_matrix(T, n, order=10, n_sub=10, n_refine=4)
    return solve, check


def path_rate_volterra(f: PathFunction, resolution=None, tol=1e-6,
                       full_output=False):
    """Path energy (1/2) int h^2 via Volterra inversion.

    f must be sampled on the uniform resolution grid over [0, T] with
    f(0) = 0.  Returns +inf when the input fails the representability
    proxy: high-order reconstruction residual above `tol` (relative L2),
    or the recovered energy growing by more than 25% from half to full
    resolution (both symptoms of h escaping L2).
    """
    grid, vals, T = f.grid, f.values, float(f.T)
    n = grid.size - 1
    if resolution is not None and resolution != n:
        raise ValueError("f must be given on the full resolution grid")
    if n < 8 or n % 2:
        raise ValueError("resolution must be even and at least 8")
    if abs(grid[0]) > 1e-15 or abs(grid[-1] - T) > 1e-12 * max(T, 1.0):
        raise ValueError("grid must span [0, T] for the inversion")
    if not np.allclose(np.diff(grid), T / n, rtol=1e-10):
        raise ValueError("grid must be uniform")
    if abs(vals[0]) > 0:
        raise ValueError("f(0) must be 0")

    M, M_check = _volterra_matrices(T, n)
    rhs = vals[1:]
    h = scipy.linalg.solve_triangular(M, rhs, lower=True)
    dt = T / n
    rate = 0.5 * float(h @ h) * dt

    scale = float(np.linalg.norm(rhs))
    resid = float(np.linalg.norm(M_check @ h - rhs)) / max(scale, 1e-300)

    # half-resolution energy from the even samples
    Mc, _ = _volterra_matrices(T, n // 2)
    hc = scipy.linalg.solve_triangular(Mc, rhs[1::2], lower=True)
    rate_c = 0.5 * float(hc @ hc) * (2.0 * dt)

    finite = resid <= tol and rate <= 1.25 * rate_c + 1e-12
    out = rate if finite else math.inf
    if full_output:
        return out, {"h": h, "residual": resid, "rate_coarse": rate_c}
    return out


def path_rate_sup(f: PathFunction, max_n=32):
    """Supremum of finite-dimensional rates over nested subsets of the
    grid times, grown greedily by the largest rate increment (ties to the
    smallest time).  Lower bound on the Volterra energy."""
    cand = [i for i, t in enumerate(f.grid) if t > 0]
    chosen = []
    best = 0.0
    while len(chosen) < min(max_n, len(cand)):
        gain, pick = -1.0, None
        for i in cand:
            if i in chosen:
                continue
            idx = sorted(chosen + [i])
            times = f.grid[idx]
            alphas = f.values[idx]
            try:
                r = finite_dim_rate(times, alphas)
            except np.linalg.LinAlgError:
                continue
            if r - best > gain + 1e-15:
                gain, pick = r - best, i
        if pick is None or gain <= 0.0 and chosen:
            # no strict improvement; keep scanning only while empty
            if chosen:
                break
        if pick is None:
            break
        chosen.append(pick)
        best += gain
    return best
