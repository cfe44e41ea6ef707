"""Command-line entry point.

Commands: simulate (path ensembles to disk), rate (quadratic-form rate
values), minimizer (spectral minimizer profiles + cost report), verify
(invariant suites).

Exit codes: 0 success, 2 configuration error, 3 wrap-around guard
violation, 4 verification failure.  All randomized commands require an
explicit master seed; outputs are byte-identical under identical
config + seed (the manifest additionally records wall time, which is
excluded from that contract).
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import exclusion as ex
from . import ratefn
from . import variational as va
from . import verify as verify_mod
from .pathio import write_paths_csv, write_paths_jsonl
from .rng import derive_seeds

SCHEMA_VERSION = 1

CONFIG_SCHEMA = {
    "version": None,
    "model": {"rho", "L", "T", "grid"},
    "probe": {"replicas", "master_seed", "a_N", "N"},
    "numerics": {"xi_cutoff", "xi_step", "du", "dt", "U"},
    "io": {"out_dir", "format"},
}


class ConfigError(ValueError):
    pass


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    for key, val in doc.items():
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section {key!r}")
        allowed = CONFIG_SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(val, dict):
            raise ConfigError(f"section {key!r} must be an object")
        for sub in val:
            if sub not in allowed:
                raise ConfigError(f"unknown key {key}.{sub}")
    return doc


def _cfg_get(doc, section, key, override, default=None):
    if override is not None:
        return override
    return doc.get(section, {}).get(key, default)


def cmd_simulate(args):
    doc = load_config(args.config) if args.config else {}
    rho = _cfg_get(doc, "model", "rho", args.rho)
    L = _cfg_get(doc, "model", "L", args.L)
    grid = _cfg_get(doc, "model", "grid", args.grid)
    replicas = _cfg_get(doc, "probe", "replicas", args.replicas)
    seed = _cfg_get(doc, "probe", "master_seed", args.seed)
    out_dir = _cfg_get(doc, "io", "out_dir", args.out)
    fmt = _cfg_get(doc, "io", "format", args.format, "csv")
    for name, val in (("rho", rho), ("L", L), ("grid", grid),
                      ("replicas", replicas), ("master_seed", seed),
                      ("out", out_dir)):
        if val is None:
            raise ConfigError(f"missing required setting: {name}")
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"unknown format {fmt!r}")
    grid = np.asarray(grid, dtype=np.float64)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = derive_seeds(int(seed), int(replicas))
    t0 = time.time()
    X, J = ex.ensemble_paths(float(rho), int(L), grid, seeds)
    wall = time.time() - t0
    data_path = out / ("paths.csv" if fmt == "csv" else "paths.jsonl")
    with open(data_path, "w") as fh:
        if fmt == "csv":
            write_paths_csv(fh, grid, X, J, seeds)
        else:
            write_paths_jsonl(fh, grid, X, J, seeds)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "master_seed": int(seed),
        "replicas": int(replicas),
        "rho": float(rho),
        "L": int(L),
        "grid": [float(t) for t in grid],
        "guard": {"safety_factor": ex.DEFAULT_SAFETY_FACTOR,
                  "window_pad": 1},
        "format": fmt,
        "data_file": data_path.name,
        "wall_time_s": wall,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    print(f"wrote {data_path} ({replicas} replicas x {grid.size} times)")
    return 0


def cmd_rate(args):
    times = np.asarray(args.times, dtype=np.float64)
    alphas = np.asarray(args.alphas, dtype=np.float64)
    if args.mode in ("current", "tagged") and args.rho is None:
        raise ConfigError("--rho is required for sigma-scaled modes")
    raw = ratefn.finite_dim_rate(times, alphas)
    record = {"times": times.tolist(), "alphas": alphas.tolist()}
    scaled = {}
    if args.rho is not None:
        scaled = {"current": raw / ratefn.sigma_J2(args.rho),
                  "tagged": raw / ratefn.sigma_X2(args.rho)}
        record["rho"] = args.rho
    record["rate"] = {"raw": raw}.get(args.mode, scaled.get(args.mode, raw))
    record["sigma_scaled_rates"] = scaled
    print(json.dumps(record, sort_keys=True))
    return 0


def cmd_minimizer(args):
    spec = va.MinimizerSpec(times=args.times, alphas=args.alphas,
                            T=args.T, rho=args.rho)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    svals = np.linspace(0.0, spec.T, 65)
    with open(out / "K0_curve.csv", "w") as fh:
        fh.write("s,K_at_zero\n")
        for s in svals:
            fh.write("%s,%s\n" % (repr(float(s)),
                                  repr(float(va.K_at_zero(spec, s)))))
    u = np.arange(-6.0 * np.sqrt(spec.T), 6.0 * np.sqrt(spec.T) + 1e-9,
                  0.05)
    s_profile = np.unique(np.concatenate(
        [np.linspace(0, spec.T, 9), spec.times]))
    with open(out / "profiles.csv", "w") as fh:
        fh.write("s,u,K,mu\n")
        for s in s_profile:
            K = va.K_real(spec, s, u)
            mu = va.mu_real(spec, s, u)
            for j, uu in enumerate(u):
                fh.write("%s,%s,%s,%s\n" % (repr(float(s)), repr(float(uu)),
                                            repr(float(K[j])),
                                            repr(float(mu[j]))))
    q_par = va.parseval_Q(spec)
    q_real = va.q_realspace_minimizer(spec)
    q_alg = va.closed_form_Q(spec)
    vals = [q_par, q_real, q_alg]
    scale = max(abs(v) for v in vals)
    spread = (max(vals) - min(vals)) / scale if scale > 0 else 0.0
    report = {"times": [float(t) for t in spec.times],
              "alphas": [float(a) for a in spec.alphas],
              "T": spec.T, "rho": spec.rho,
              "Q_parseval": q_par, "Q_realspace": q_real,
              "Q_quadratic_form": q_alg,
              "max_relative_spread": spread}
    with open(out / "q_report.json", "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_verify(args):
    report = verify_mod.run_suite(args.suite,
                                  corrupt=args.inject_corruption)
    text = json.dumps(report, sort_keys=True, indent=1)
    if args.report:
        Path(args.report).write_text(text)
    print(text)
    return 0 if report["passed"] else 4


def build_parser():
    p = argparse.ArgumentParser(prog="sepkit")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="write a path ensemble to disk")
    ps.add_argument("--config", help="JSON config document")
    ps.add_argument("--rho", type=float)
    ps.add_argument("--L", type=int)
    ps.add_argument("--grid", type=float, nargs="+")
    ps.add_argument("--replicas", type=int)
    ps.add_argument("--seed", type=int)
    ps.add_argument("--out")
    ps.add_argument("--format", choices=["csv", "jsonl"])
    ps.set_defaults(func=cmd_simulate)

    pr = sub.add_parser("rate", help="finite-dimensional rate values")
    pr.add_argument("--times", type=float, nargs="+", required=True)
    pr.add_argument("--alphas", type=float, nargs="+", required=True)
    pr.add_argument("--mode", choices=["raw", "current", "tagged"],
                    default="raw")
    pr.add_argument("--rho", type=float)
    pr.set_defaults(func=cmd_rate)

    pm = sub.add_parser("minimizer", help="spectral minimizer profiles")
    pm.add_argument("--times", type=float, nargs="+", required=True)
    pm.add_argument("--alphas", type=float, nargs="+", required=True)
    pm.add_argument("--T", type=float, required=True)
    pm.add_argument("--rho", type=float, required=True)
    pm.add_argument("--out", required=True)
    pm.set_defaults(func=cmd_minimizer)

    pv = sub.add_parser("verify", help="run an invariant suite")
    pv.add_argument("--suite", default="all",
                    choices=["micro", "fbm", "fourier", "field", "all"])
    pv.add_argument("--report", help="write the JSON report here")
    pv.add_argument("--inject-corruption", action="store_true",
                    help=argparse.SUPPRESS)
    pv.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ex.GuardError as exc:
        print(f"guard error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
