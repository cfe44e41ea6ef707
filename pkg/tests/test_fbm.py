import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepkit import fbm

mp.mp.dps = 40


def test_normalization_constant():
    assert abs(fbm.V_NORM - 1.5957691216057307) < 1e-12


def test_cov_a_values():
    assert fbm.cov_a(1.0, 1.0) == 1.0
    assert fbm.cov_a(1.0, 0.0) == 0.0
    assert abs(fbm.cov_a(1.0, 4.0) - 0.6339745962155614) < 1e-15
    with pytest.raises(ValueError):
        fbm.cov_a(-1.0, 2.0)


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0.0, 50.0), s=st.floats(0.0, 50.0))
def test_cov_a_symmetry_and_diagonal(t, s):
    assert fbm.cov_a(t, s) == fbm.cov_a(s, t)
    assert abs(fbm.cov_a(t, t) - math.sqrt(t)) < 1e-13


def test_hyp2f1_at_zero_and_one():
    assert fbm.hyp2f1(0.25, -0.25, 0.75, 0.0) == 1.0
    gauss = math.gamma(0.75) ** 2 / math.sqrt(math.pi)
    assert abs(fbm.hyp2f1(0.25, -0.25, 0.75, 1.0) - gauss) < 1e-14
    assert abs(gauss - 0.8472130847939791) < 1e-13


def test_hyp2f1_against_extended_precision_series():
    for z in (-1e6, -100.0, -10.0, -3.0, -1.0, -0.5, 0.0, 0.5, 0.99):
        ref = float(mp.hyp2f1(mp.mpf(1) / 4, -mp.mpf(1) / 4,
                              mp.mpf(3) / 4, z))
        val = fbm.hyp2f1(0.25, -0.25, 0.75, z)
        assert abs(val - ref) <= 1e-9 * abs(ref)


def test_hyp2f1_validation():
    with pytest.raises(ValueError):
        fbm.hyp2f1(0.25, -0.25, 0.75, 1.5)
    with pytest.raises(ValueError):
        fbm.hyp2f1(1.0, 1.0, -2.0, 0.3)
    with pytest.raises(ValueError):
        fbm.hyp2f1(1.0, 1.0, 1.0, 1.0)   # c-a-b <= 0 diverges at z=1


def test_kernel_domain():
    with pytest.raises(ValueError):
        fbm.kernel_K(1.0, 1.0)
    with pytest.raises(ValueError):
        fbm.kernel_K(1.0, 0.0)


def test_kernel_diagonal_limit():
    # K(t,s) (t-s)^{1/4} -> 1/(sqrt(V) Gamma(3/4)) as s -> t
    target = 1.0 / (math.sqrt(fbm.V_NORM) * math.gamma(0.75))
    assert abs(target - 0.6459980037407519) < 1e-12
    for t in (0.5, 2.0):
        val = fbm.kernel_K(t, t - 1e-8) * (1e-8) ** 0.25
        assert abs(val - target) < 1e-6


def test_kernel_covariance_identity_pointwise():
    assert abs(fbm.kernel_cov_quadrature(1.0, 1.0) - 1.0) < 1e-6
    assert abs(fbm.kernel_cov_quadrature(4.0, 1.0)
               - fbm.cov_a(4.0, 1.0)) < 1e-6


def test_kernel_covariance_identity_grid():
    ts = np.linspace(0.4, 4.0, 10)
    worst = max(abs(fbm.kernel_cov_quadrature(a, b) - fbm.cov_a(a, b))
                for a in ts for b in ts if a >= b)
    assert worst < 1e-5


def test_cov_matrix_validation_and_chol():
    with pytest.raises(ValueError):
        fbm.CovMatrix([0.0, 1.0])
    with pytest.raises(ValueError):
        fbm.CovMatrix([1.0, 1.0])
    cm = fbm.CovMatrix([1.0, 4.0])
    assert np.allclose(cm.chol @ cm.chol.T, cm.entries)


def test_cov_matrix_pd_random_grids():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        n = rng.integers(2, 13)
        grid = np.sort(rng.uniform(0.05, 9.0, size=n))
        if np.any(np.diff(grid) < 1e-3):
            continue
        fbm.CovMatrix(grid).chol  # raises LinAlgError if not PD


def test_cholesky_sampler_moments():
    p = fbm.sample_fbm([1.0], 100000, seed=5)
    assert abs(p.var() - 1.0) < 0.02
    p = fbm.sample_fbm([1.0, 4.0], 100000, seed=5)
    cov = np.cov(p.T)[0, 1]
    assert abs(cov - fbm.cov_a(1.0, 4.0)) < 0.02


def test_sampler_determinism():
    a = fbm.sample_fbm([0.5, 1.0], 100, seed=3)
    b = fbm.sample_fbm([0.5, 1.0], 100, seed=3)
    assert np.array_equal(a, b)
    k1 = fbm.sample_fbm([0.5, 1.0], 50, seed=3, method="kernel",
                        resolution=128)
    k2 = fbm.sample_fbm([0.5, 1.0], 50, seed=3, method="kernel",
                        resolution=128)
    assert np.array_equal(k1, k2)


def test_kernel_vs_cholesky_sampler():
    grid = np.array([0.5, 1.0, 2.0])
    n = 20000
    pk = fbm.sample_fbm(grid, n, seed=9, method="kernel", resolution=512)
    emp = np.cov(pk.T)
    exact = fbm.cov_a(grid[:, None], grid[None, :])
    se = np.sqrt((np.outer(np.diag(exact), np.diag(exact)) + exact ** 2)
                 / n)
    assert np.all(np.abs(emp - exact) < 3 * se + 1e-2)


def test_kernel_sampler_needs_resolution():
    with pytest.raises(ValueError):
        fbm.sample_fbm([1.0], 10, seed=1, method="kernel")
