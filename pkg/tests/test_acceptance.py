"""Acceptance gate: every numbered criterion at its stated tolerance.

Run with `pytest -s tests/test_acceptance.py` to see one PASS/FAIL line
per criterion.  The two 10^4-replica ensembles are shared between the
variance-law and covariance criteria.
"""

import hashlib
import math

import numpy as np
import pytest

from sepkit import cli
from sepkit import exclusion as ex
from sepkit import fbm
from sepkit import field as fd
from sepkit import variational as va
from sepkit.probe import ProbeConfig, run_probe
from sepkit.ratefn import finite_dim_rate, sigma_J2, sigma_X2
from sepkit.rng import derive_seed

SQRT_2PI = math.sqrt(2.0 * math.pi)


def report(num, ok, desc):
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {desc}")
    assert ok, f"criterion {num} failed: {desc}"


# --- criterion 1: exact microscopic identities ----------------------------

def test_criterion_01_exact_identities():
    rng = np.random.default_rng(20260810)
    L = 2048
    n_runs = 1000
    ok_cons = ok_tag = True
    worst_gn = 0.0
    for i in range(n_runs):
        rho = rng.uniform(0.1, 0.9)
        t = rng.uniform(1.0, 400.0)
        seed = int(derive_seed(1, i))
        st = ex.init_conditioned(rho, L, seed)
        ex.advance_to(st, t)
        ok_cons &= ex.check_conservation(st, (-300, 300))
        ok_tag &= ex.check_current_tagged_identity(st)
        worst_gn = max(worst_gn,
                       abs(ex.check_Gn_decomposition(st, n=5, N=20,
                                                     a_N=30.0)))
    ok = ok_cons and ok_tag and worst_gn < 1e-10
    report(1, ok, f"10^3 randomized runs: conservation={ok_cons}, "
           f"tagged-identity={ok_tag}, |triangular residual|<=1e-10 "
           f"(worst {worst_gn:.2e})")


# --- criteria 2 and 3: variance laws and fBM covariance matching ----------

@pytest.fixture(scope="module")
def big_ensembles():
    grid = (100.0, 400.0)
    cur = run_probe(ProbeConfig(rho=0.5, T=400.0, grid=grid,
                                replicas=10000, master_seed=2024),
                    "current")
    tag = run_probe(ProbeConfig(rho=0.5, T=400.0, grid=grid,
                                replicas=10000, master_seed=2025),
                    "tagged")
    return cur, tag


def test_criterion_02_variance_laws(big_ensembles):
    cur, tag = big_ensembles
    want_J = sigma_J2(0.5) * math.sqrt(400.0)
    want_X = sigma_X2(0.5) * math.sqrt(400.0)
    vJ = cur.variance[-1]
    vX = tag.variance[-1]
    ok = abs(vJ - want_J) < 0.10 * want_J \
        and abs(vX - want_X) < 0.10 * want_X
    report(2, ok, f"Var J(400)={vJ:.3f} in {want_J:.3f}+-10%, "
           f"Var X(400)={vX:.3f} in {want_X:.3f}+-10% (10^4 replicas)")


def test_criterion_03_fbm_covariance(big_ensembles):
    cur, tag = big_ensembles
    a_ref = fbm.cov_a(100.0, 400.0)
    n = 10000
    oks, devs = [], []
    for summ, sig2 in ((tag, sigma_X2(0.5)), (cur, sigma_J2(0.5))):
        c = summ.covariance
        se = math.sqrt((c[0, 0] * c[1, 1] + c[0, 1] ** 2) / n) / sig2
        dev = abs(c[0, 1] / sig2 - a_ref)
        devs.append((dev, 4 * se))
        oks.append(dev < 4 * se)
    ok = all(oks)
    report(3, ok, "Cov/sigma^2 at (100,400) vs a=6.3397: tagged dev "
           f"{devs[0][0]:.3f} < {devs[0][1]:.3f}, current dev "
           f"{devs[1][0]:.3f} < {devs[1][1]:.3f} (4 MC SE)")


# --- criterion 4: kernel-covariance identity -------------------------------

def test_criterion_04_kernel_identity():
    ts = np.linspace(0.4, 4.0, 10)
    worst = max(abs(fbm.kernel_cov_quadrature(a, b) - fbm.cov_a(a, b))
                for a in ts for b in ts)
    ok = worst < 1e-5
    report(4, ok, f"kernel-covariance identity on 10x10 grid in (0,4]^2: "
           f"max |quad - a| = {worst:.2e} < 1e-5")


# --- criterion 5: variational closed forms ---------------------------------

def test_criterion_05_variational_closed_forms():
    worst_q = 0.0
    for t, T, rho, alpha in ((1.0, 1.0, 0.5, 1.0), (1.0, 4.0, 0.5, 1.0),
                             (2.0, 4.0, 0.3, -1.3)):
        spec = va.single_time_minimizer(t, alpha, T, rho)
        want = SQRT_2PI * alpha ** 2 / (4.0 * fd.chi(rho) * math.sqrt(t))
        worst_q = max(worst_q, abs(va.parseval_Q(spec) - want) / want)
    spec = va.single_time_minimizer(1.0, 1.3, 4.0, 0.5)
    worst_k = max(abs(va.K_at_zero(spec, s)
                      - 1.3 * fbm.cov_a(1.0, s) / 1.0)
                  for s in np.linspace(0.0, 4.0, 64))
    ok = worst_q < 1e-4 and worst_k < 1e-5
    report(5, ok, f"parseval vs closed value rel err {worst_q:.2e} < 1e-4; "
           f"K(s,0) profile max err {worst_k:.2e} < 1e-5 on 64 s-values")


# --- criterion 6: consistency triangle -------------------------------------

def test_criterion_06_consistency_triangle():
    worst = 0.0
    for times, alphas, T in (([1.0], [1.0], 1.0),
                             ([1.0], [1.0], 4.0),
                             ([1.0, 4.0], [1.0, 1.0], 4.0)):
        spec = va.multi_time_minimizer(times, alphas, T, 0.5)
        routes = {"parseval": va.parseval_Q(spec),
                  "realspace": va.q_realspace_minimizer(spec),
                  "quadratic": va.closed_form_Q(spec)}
        vals = list(routes.values())
        for i in range(3):
            for j in range(i + 1, 3):
                worst = max(worst, abs(vals[i] - vals[j])
                            / max(abs(vals[i]), abs(vals[j])))
    ok = worst < 1e-3
    report(6, ok, "parseval <-> real-space <-> quadratic-form pairwise "
           f"rel spread {worst:.2e} < 1e-3 for n in {{1,2}}")


# --- criterion 7: appendix quadratures --------------------------------------

def test_criterion_07_appendix_quadratures():
    worst = abs(np.subtract(*va.q_jk_quadrature(1.0, 4.0, 5.0)))
    rng = np.random.default_rng(7)
    for _ in range(5):
        T = rng.uniform(2.0, 6.0)
        tj, tk = np.sort(rng.uniform(0.2, T, size=2))
        worst = max(worst, abs(np.subtract(*va.q_jk_quadrature(tj, tk,
                                                               T))))
    worst_int = max(abs(v - ref) for v, ref in va.integral_formula_check())
    ok = worst < 1e-5 and worst_int < 1e-8
    report(7, ok, f"pairwise cost quadrature max |num-closed| = "
           f"{worst:.2e} < 1e-5; Gaussian integral formula "
           f"{worst_int:.2e} < 1e-8")


# --- criterion 8: brute-force oracle ----------------------------------------

def test_criterion_08_brute_force_oracle():
    res1 = va.brute_force_min([1.0], [1.0], 1.0, 0.5)
    want1 = SQRT_2PI / (4.0 * 0.25)
    rel1 = abs(res1["Q"] - want1) / want1
    spec2 = va.multi_time_minimizer([1.0, 4.0], [1.0, 1.0], 4.0, 0.5)
    res2 = va.brute_force_min([1.0, 4.0], [1.0, 1.0], 4.0, 0.5)
    want2 = va.closed_form_Q(spec2)
    rel2 = abs(res2["Q"] - want2) / want2
    ok = rel1 <= 0.02 and rel2 <= 0.02
    report(8, ok, f"projected-CG oracle: n=1 rel err {rel1:.4f}, "
           f"n=2 rel err {rel2:.4f} (<= 2%)")


# --- criterion 9: orthogonality and minimality ------------------------------

def test_criterion_09_orthogonality_minimality():
    spec = va.single_time_minimizer(1.0, 1.0, 1.0, 0.5)
    g = fd.Grids(T=1.0, du=2.5e-3, dt=5e-4, U=6.0)
    mu0, K, _, _ = va.minimizer_grid_fields(spec, g, eps=1e-4)
    rng = np.random.default_rng(99)
    worst_lam = 0.0
    for _ in range(10):
        W = 0.01 * rng.standard_normal() * g.u * np.exp(
            -((g.u - rng.uniform(0.2, 1.5)) / rng.uniform(0.4, 1.0)) ** 2)
        b = np.sin(math.pi * rng.uniform(0.5, 2.0) * g.t / g.T) \
            * (g.t / g.T)
        dmu0 = 0.01 * rng.standard_normal() * np.exp(
            -((g.u - rng.uniform(-1, 1)) / rng.uniform(0.5, 1.5)) ** 2)
        worst_lam = max(worst_lam,
                        abs(va.lambda_form(mu0, K, dmu0,
                                           np.outer(b, W), g)))
    worst_delta = 0.0
    for _ in range(50):
        pert = va.SpectralPerturbation.random(spec, rng, amplitude=0.5)
        delta = (2.0 * va.parseval_cross(spec, pert)
                 + va.parseval_pert(spec, pert)) / fd.chi(0.5)
        worst_delta = min(worst_delta, delta)
    ok = worst_lam < 1e-3 and worst_delta >= -1e-6
    report(9, ok, f"|Lambda(min, delta)| <= {worst_lam:.2e} (< 1e-3); "
           f"min Q(min+delta)-Q(min) = {worst_delta:.2e} (>= -1e-6, "
           "50 perturbations)")


# --- criterion 10: reproducibility ------------------------------------------

def test_criterion_10_reproducibility(tmp_path):
    args = ["simulate", "--rho", "0.5", "--L", "512", "--grid", "50",
            "150", "--replicas", "25", "--seed", "31415"]
    hashes = []
    for sub in ("r1", "r2"):
        out = tmp_path / sub
        assert cli.main(args + ["--out", str(out)]) == 0
        hashes.append(hashlib.sha256(
            (out / "paths.csv").read_bytes()).hexdigest())
    mins = []
    for sub in ("m1", "m2"):
        out = tmp_path / sub
        assert cli.main(["minimizer", "--times", "1", "--alphas", "1",
                         "--T", "2", "--rho", "0.5",
                         "--out", str(out)]) == 0
        mins.append(hashlib.sha256(
            (out / "q_report.json").read_bytes()).hexdigest())
    ok = hashes[0] == hashes[1] and mins[0] == mins[1]
    report(10, ok, "identical config+seed reruns: data files and reports "
           f"hash-identical ({hashes[0][:12]}..., {mins[0][:12]}...)")
