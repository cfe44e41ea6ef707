import math

import numpy as np
import pytest

from sepkit import field as fd
from sepkit import variational as va
from sepkit.fbm import cov_a

SQRT_2PI = math.sqrt(2.0 * math.pi)


def test_beta_system():
    spec = va.multi_time_minimizer([1.0, 4.0], [1.0, 1.0], 4.0, 0.5)
    A = cov_a(spec.times[:, None], spec.times[None, :])
    D = np.diag(1.0 / np.sqrt(spec.times))
    assert np.allclose(A @ D @ spec.betas, spec.alphas, atol=1e-12)
    # n = 1 reduces to beta = alpha
    one = va.single_time_minimizer(2.0, 1.7, 3.0, 0.4)
    assert abs(one.betas[0] - 1.7) < 1e-14


def test_spec_validation():
    with pytest.raises(ValueError):
        va.MinimizerSpec(times=[2.0, 1.0], alphas=[1.0, 1.0], T=4.0,
                         rho=0.5)
    with pytest.raises(ValueError):
        va.MinimizerSpec(times=[1.0], alphas=[1.0], T=0.5, rho=0.5)


def test_profile_boundary_and_zero_time():
    spec = va.single_time_minimizer(1.0, 1.0, 2.0, 0.5)
    # FK(0, xi) = 0 identically (up to expm1/exp rounding over xi^2)
    # and K(t, 0) = alpha
    assert np.abs(va.khat(spec, 0.0)).max() < 1e-12
    assert abs(va.K_at_zero(spec, 1.0) - 1.0) < 1e-6
    # alpha = 0 gives identically zero profiles
    zero = va.single_time_minimizer(1.0, 0.0, 2.0, 0.5)
    assert np.abs(va.khat(zero, 0.7)).max() == 0.0


def test_current_profile_matches_covariance_shape():
    # K(s, 0) = alpha a(t, s)/sqrt(t) for all 0 <= s <= T, including the
    # relaxation after the constraint time
    t, alpha, T = 1.0, 1.3, 4.0
    spec = va.single_time_minimizer(t, alpha, T, 0.5)
    for s in np.linspace(0.0, T, 64):
        want = alpha * cov_a(t, s) / math.sqrt(t)
        assert abs(va.K_at_zero(spec, s) - want) < 1e-5
    for s in (t / 4, t / 2, 2 * t):
        want = alpha * cov_a(t, s) / math.sqrt(t)
        assert abs(va.K_at_zero(spec, s) - want) < 1e-5


def test_real_space_reconstruction_is_real():
    spec = va.multi_time_minimizer([1.0, 4.0], [1.0, -0.5], 4.0, 0.5)
    xi = spec.xi
    for s in (0.5, 1.0, 3.0):
        prof = va.khat(spec, s) + 0j
        u = 0.37
        val = np.trapezoid(prof * np.exp(-1j * u * xi), dx=spec.xi_step)
        assert abs(val.imag) < 1e-9 * max(abs(val.real), 1.0)
    m = va.mu0hat(spec)
    assert np.abs(m.real).max() == 0.0
    # Hermitian symmetry of the complex profiles
    assert np.allclose(m[::-1], np.conj(m))


def test_parseval_single_time():
    for t, T, rho, alpha in ((1.0, 1.0, 0.5, 1.0), (1.0, 4.0, 0.5, 1.0),
                             (2.0, 3.0, 0.3, -0.7)):
        spec = va.single_time_minimizer(t, alpha, T, rho)
        want = SQRT_2PI * alpha ** 2 / (4.0 * fd.chi(rho) * math.sqrt(t))
        got = va.parseval_Q(spec)
        assert abs(got - want) <= 1e-4 * want
    spec = va.single_time_minimizer(1.0, 2.0, 1.0, 0.5)
    assert abs(va.parseval_Q(spec) / va.parseval_Q(
        va.single_time_minimizer(1.0, 1.0, 1.0, 0.5)) - 4.0) < 1e-9


def test_parseval_cutoff_flag():
    spec = va.single_time_minimizer(1.0, 1.0, 1.0, 0.5, xi_cutoff=3.0,
                                    xi_step=3.0 / 2 ** 12)
    _, rep = va.parseval_Q(spec, with_report=True)
    assert rep["cutoff_flagged"]
    spec = va.single_time_minimizer(1.0, 1.0, 1.0, 0.5)
    _, rep = va.parseval_Q(spec, with_report=True)
    assert not rep["cutoff_flagged"]


def test_multi_time_constraints_and_value():
    spec = va.multi_time_minimizer([1.0, 4.0], [1.0, 1.0], 4.0, 0.5)
    assert np.abs(va.constraint_residuals(spec)).max() < 1e-5
    got = va.parseval_Q(spec)
    want = va.closed_form_Q(spec)
    assert abs(got - want) <= 1e-3 * want
    # cross-check against the finite-dimensional rate value:
    # Q = sqrt(2 pi)/(4 chi) alpha^T A^{-1} alpha with rate = half that
    # quadratic form
    from sepkit.ratefn import finite_dim_rate
    rate = finite_dim_rate([1.0, 4.0], [1.0, 1.0])
    assert abs(want - SQRT_2PI / (4 * 0.25) * 2 * rate) < 1e-12


def test_consistency_triangle():
    # parseval <-> real-space quadrature <-> quadratic form, pairwise
    for times, alphas, T in (([1.0], [1.0], 1.0),
                             ([1.0, 4.0], [1.0, 1.0], 4.0)):
        spec = va.multi_time_minimizer(times, alphas, T, 0.5)
        routes = [va.parseval_Q(spec), va.q_realspace_minimizer(spec),
                  va.closed_form_Q(spec)]
        for i in range(3):
            for j in range(i + 1, 3):
                rel = abs(routes[i] - routes[j]) / max(abs(routes[i]),
                                                       abs(routes[j]))
                assert rel < 1e-3


def test_q_jk_quadrature():
    num, closed = va.q_jk_quadrature(1.0, 4.0, 5.0)
    assert abs(closed - SQRT_2PI / 8.0 * cov_a(1.0, 4.0)) < 1e-15
    assert abs(num - closed) < 1e-5
    # t_j = t_k reduces to sqrt(2 pi)/(4 sqrt(t))
    num, closed = va.q_jk_quadrature(2.0, 2.0, 3.0)
    assert abs(closed - SQRT_2PI / (4.0 * math.sqrt(2.0))) < 1e-14
    assert abs(num - closed) < 1e-5
    # symmetry
    a, _ = va.q_jk_quadrature(0.7, 2.9, 3.5)
    b, _ = va.q_jk_quadrature(2.9, 0.7, 3.5)
    assert abs(a - b) < 1e-10


def test_integral_formula():
    for val, ref in va.integral_formula_check():
        assert abs(val - ref) < 1e-8


def test_lambda_form_positive_and_matches_total_cost():
    g = fd.Grids(T=0.5, du=0.02, dt=2e-3, U=4.0)
    rng = np.random.default_rng(6)
    for _ in range(25):
        mu0 = rng.standard_normal() * np.exp(
            -((g.u - rng.uniform(-1, 1)) / rng.uniform(0.5, 1)) ** 2)
        K = np.outer(g.t / g.T * rng.standard_normal(),
                     np.exp(-((g.u - rng.uniform(-1, 1))) ** 2))
        lam = va.lambda_form(mu0, K, mu0, K, g)
        assert lam >= 0.0
        qt = fd.q_total_muK(mu0, K, g, 0.3)
        assert abs(lam - fd.chi(0.3) * qt) <= 1e-6 * max(abs(lam), 1e-12)
    zero = va.lambda_form(np.zeros_like(g.u), np.zeros((g.t.size,
                                                        g.u.size)),
                          np.zeros_like(g.u),
                          np.zeros((g.t.size, g.u.size)), g)
    assert zero == 0.0


def test_lambda_orthogonality_of_minimizer():
    spec = va.single_time_minimizer(1.0, 1.0, 1.0, 0.5)
    g = fd.Grids(T=1.0, du=2.5e-3, dt=5e-4, U=6.0)
    mu0, K, _, _ = va.minimizer_grid_fields(spec, g, eps=1e-4)
    rng = np.random.default_rng(3)
    for _ in range(10):
        c1 = rng.uniform(0.3, 1.5)
        W = 0.01 * rng.standard_normal() * g.u * np.exp(
            -((g.u - c1) / rng.uniform(0.4, 1.0)) ** 2)
        b = np.sin(math.pi * rng.uniform(0.5, 2.0) * g.t / g.T) \
            * (g.t / g.T)
        dK = np.outer(b, W)
        dmu0 = 0.01 * rng.standard_normal() * np.exp(
            -((g.u - rng.uniform(-1, 1)) / rng.uniform(0.5, 1.5)) ** 2)
        assert abs(va.lambda_form(mu0, K, dmu0, dK, g)) < 1e-3
    # inadmissible direction (dK(t_j, 0) != 0) picks up a signal
    bad = va.lambda_form(mu0, K, np.zeros_like(g.u),
                         np.outer(g.t / g.T, 0.05 * np.exp(-g.u ** 2)), g)
    assert abs(bad) > 1e-3


def test_parseval_minimality():
    spec = va.single_time_minimizer(1.0, 1.0, 1.0, 0.5)
    rng = np.random.default_rng(11)
    for _ in range(50):
        pert = va.SpectralPerturbation.random(spec, rng, amplitude=0.5)
        cross = va.parseval_cross(spec, pert)
        delta = 2.0 * cross + va.parseval_pert(spec, pert)
        assert delta / fd.chi(0.5) >= -1e-6
        assert abs(cross) < 1e-9
    # inadmissible perturbation produces a first-order signal
    pert = va.SpectralPerturbation.random(spec, rng, amplitude=0.5)
    bad = va.SpectralPerturbation(b=pert.b, db=pert.db,
                                  G=np.exp(-0.5 * spec.xi ** 2),
                                  E=0.0 * pert.E)
    assert abs(va.parseval_cross(spec, bad)) > 1e-3


def test_brute_force_oracle_single_time():
    res = va.brute_force_min([1.0], [1.0], 1.0, 0.5)
    want = SQRT_2PI / (4.0 * 0.25)
    assert abs(res["Q"] - want) <= 0.02 * want
    assert va.brute_force_min([1.0], [0.0], 1.0, 0.5)["Q"] == 0.0


def test_realspace_route_single_time():
    spec = va.single_time_minimizer(1.0, 1.0, 2.0, 0.4)
    want = va.closed_form_Q(spec)
    assert abs(va.q_realspace_minimizer(spec) - want) <= 1e-6 * want
