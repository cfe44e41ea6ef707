"""Named invariant suites behind the `verify` CLI command.

Each check returns (name, passed, detail).  Suites are kept light enough
for CI; the heavy statistical gates live in the acceptance test module.
"""

import math

import numpy as np

from . import exclusion as ex
from . import fbm
from . import field as fd
from . import variational as va
from .rng import derive_seeds


def _micro_checks(corrupt=False):
    checks = []
    rng = np.random.default_rng(20240811)
    n_runs = 24
    ok_cons = ok_tag = ok_gn = True
    worst_gn = 0.0
    for i in range(n_runs):
        rho = rng.uniform(0.15, 0.85)
        t = rng.uniform(1.0, 60.0)
        seed = int(derive_seeds(99, i + 1)[-1])
        st = ex.init_conditioned(rho, 512, seed)
        ex.advance_to(st, t)
        if corrupt and i == 5:
            st.currents[st.window.to_index(3)] += 1
        ok_cons &= ex.check_conservation(st, (-60, 60))
        ok_tag &= ex.check_current_tagged_identity(st)
        res = abs(ex.check_Gn_decomposition(st, n=4, N=10, a_N=17.0))
        worst_gn = max(worst_gn, res)
        ok_gn &= res < 1e-10
    checks.append(("conservation-law", ok_cons, {"runs": n_runs}))
    checks.append(("current-tagged-identity", ok_tag, {"runs": n_runs}))
    checks.append(("triangular-decomposition-residual", ok_gn,
                   {"worst": worst_gn}))
    s1 = ex.sample_path(0.5, 256, [5.0, 20.0], seed=7)
    s2 = ex.sample_path(0.5, 256, [5.0, 20.0], seed=7)
    checks.append(("path-determinism",
                   bool(np.array_equal(s1.X_values, s2.X_values)
                        and np.array_equal(s1.J_values, s2.J_values)), {}))
    st = ex.init_bernoulli(0.3, 256, seed=11, track_stirring=True)
    ex.advance_to(st, 30.0)
    checks.append(("stirring-pushforward",
                   ex.check_stirring_pushforward(st), {}))
    return checks


def _fbm_checks():
    checks = []
    ts = np.linspace(0.5, 4.0, 5)
    worst = max(abs(fbm.kernel_cov_quadrature(a, b, panels_per_unit=512)
                    - fbm.cov_a(a, b)) for a in ts for b in ts)
    checks.append(("kernel-covariance-identity", worst < 1e-5,
                   {"worst": worst}))
    rng = np.random.default_rng(5)
    pairs = rng.uniform(0.0, 9.0, size=(200, 2))
    sym = max(abs(fbm.cov_a(a, b) - fbm.cov_a(b, a)) for a, b in pairs)
    diag = max(abs(fbm.cov_a(a, a) - math.sqrt(a)) for a, _ in pairs)
    checks.append(("covariance-symmetry-and-diagonal",
                   sym == 0.0 and diag < 1e-14,
                   {"sym": sym, "diag": diag}))
    ok_pd = True
    for i in range(40):
        grid = np.sort(rng.uniform(0.05, 9.0, size=rng.integers(2, 12)))
        if np.any(np.diff(grid) < 1e-4):
            continue
        try:
            fbm.CovMatrix(grid).chol
        except np.linalg.LinAlgError:
            ok_pd = False
    checks.append(("covariance-positive-definite", ok_pd, {}))
    p = fbm.sample_fbm([1.0], 20000, seed=3)
    checks.append(("cholesky-sampler-variance",
                   abs(p.var() - 1.0) < 0.05, {"var": float(p.var())}))
    return checks


def _fourier_checks():
    checks = []
    num, closed = va.q_jk_quadrature(1.0, 4.0, 5.0)
    checks.append(("pairwise-cost-quadrature", abs(num - closed) < 1e-5,
                   {"numeric": num, "closed": closed}))
    worst = max(abs(v - ref) for v, ref in va.integral_formula_check())
    checks.append(("gaussian-integral-formula", worst < 1e-8,
                   {"worst": worst}))
    spec = va.single_time_minimizer(1.0, 1.0, 1.0, 0.5)
    Q = va.parseval_Q(spec)
    closed = va.closed_form_Q(spec)
    checks.append(("parseval-single-time",
                   abs(Q - closed) / closed < 1e-4,
                   {"parseval": Q, "closed": closed}))
    spec2 = va.single_time_minimizer(1.0, 1.0, 4.0, 0.5)
    svals = np.linspace(0.0, 4.0, 33)
    worst = max(abs(va.K_at_zero(spec2, s) - fbm.cov_a(1.0, s))
                for s in svals)
    checks.append(("current-profile-curve", worst < 1e-5, {"worst": worst}))
    return checks


def _field_checks():
    checks = []
    for t in (0.01, 1.0, 100.0):
        span = 15.0 * math.sqrt(t)
        val = np.trapezoid(fd.heat_p(t, np.linspace(-span, span, 200001)),
                           dx=2.0 * span / 200000)
        if abs(val - 1.0) >= 1e-10:
            checks.append(("heat-kernel-normalization", False, {"t": t}))
            break
    else:
        checks.append(("heat-kernel-normalization", True, {}))
    g = fd.Grids(T=1.0, du=0.01, dt=1e-3, U=8.0)
    psi = g.u * np.exp(-g.u ** 2)
    f = fd.evolve_mu(psi, None, g, rho=0.5)
    _, _, resid = fd.field_current(f, times=[1.0])
    checks.append(("integrated-current-identity",
                   abs(float(resid[0])) < 1e-4, {"residual": float(resid[0])}))
    rng = np.random.default_rng(2)
    taper = np.exp(-(g.u / (0.7 * g.U)) ** 8 * 30)
    psi_r = 0.4 * np.exp(-((g.u - 0.5) / 0.8) ** 2) * taper
    H_r = np.outer(np.sin(np.pi * g.t / g.T) + 0.2,
                   0.5 * np.exp(-((g.u + 0.3) / 0.9) ** 2) * taper)
    fr = fd.evolve_mu(psi_r, H_r, g, rho=0.4)
    qt = fd.q_total_muK(fr.psi, fr.K, g, 0.4)
    q0d = fd.q_zero(psi_r, g, 0.4) + fd.q_dyn(H_r, g, 0.4)
    checks.append(("total-cost-two-routes", abs(qt - q0d) / q0d < 0.01,
                   {"muK_form": qt, "zero_plus_dyn": q0d}))
    ok, C = fd.check_pprime_bound(1.0, report=True)
    checks.append(("heat-gradient-envelope", ok and C <= 1.2, {"C": C}))
    return checks


SUITES = {
    "micro": _micro_checks,
    "fbm": _fbm_checks,
    "fourier": _fourier_checks,
    "field": _field_checks,
}


def run_suite(name, corrupt=False):
    if name == "all":
        names = ["micro", "fbm", "fourier", "field"]
    elif name in SUITES:
        names = [name]
    else:
        raise ValueError("unknown suite %r (choose from %s, all)"
                         % (name, ", ".join(SUITES)))
    checks = []
    for n in names:
        if n == "micro":
            checks.extend(SUITES[n](corrupt=corrupt))
        else:
            checks.extend(SUITES[n]())
    passed = all(bool(ok) for _, ok, _ in checks)

    def scrub(v):
        if isinstance(v, (bool, np.bool_)):
            return bool(v)
        if isinstance(v, (int, np.integer)):
            return int(v)
        if isinstance(v, (float, np.floating)):
            return float(v)
        return v

    return {
        "suite": name,
        "passed": passed,
        "checks": [{"name": n, "passed": bool(ok),
                    "detail": {k: scrub(v) for k, v in d.items()}}
                   for n, ok, d in checks],
    }
