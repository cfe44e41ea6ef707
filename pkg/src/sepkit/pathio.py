"""Serialization of path ensembles.

Two stable on-disk formats share one schema:

CSV     header ``replica,seed,time,X,J``, one row per (replica, time);
JSONL   one object per replica:
        ``{"replica": r, "seed": s, "times": [...], "X": [...], "J": [...]}``.

Floats are written with repr (shortest round-trip), so identical data
produce byte-identical files.  fBM samples reuse the schema with the
path value in the X column and J = 0.
"""

import json

import numpy as np

CSV_HEADER = "replica,seed,time,X,J"


def write_paths_csv(fh, times, X, J, seeds):
    X = np.atleast_2d(X)
    J = np.atleast_2d(J)
    fh.write(CSV_HEADER + "\n")
    for r in range(X.shape[0]):
        for k, t in enumerate(times):
            fh.write("%d,%d,%s,%s,%s\n"
                     % (r, int(seeds[r]), repr(float(t)),
                        repr(float(X[r, k])), repr(float(J[r, k]))))


def write_paths_jsonl(fh, times, X, J, seeds):
    X = np.atleast_2d(X)
    J = np.atleast_2d(J)
    times = [float(t) for t in times]
    for r in range(X.shape[0]):
        fh.write(json.dumps({
            "replica": r,
            "seed": int(seeds[r]),
            "times": times,
            "X": [float(v) for v in X[r]],
            "J": [float(v) for v in J[r]],
        }, sort_keys=True) + "\n")


def read_paths_csv(fh):
    header = fh.readline().strip()
    if header != CSV_HEADER:
        raise ValueError("unexpected CSV header: %r" % header)
    rows = [line.strip().split(",") for line in fh if line.strip()]
    replicas = sorted({int(r[0]) for r in rows})
    times = sorted({float(r[2]) for r in rows})
    t_index = {t: k for k, t in enumerate(times)}
    X = np.zeros((len(replicas), len(times)))
    J = np.zeros_like(X)
    seeds = np.zeros(len(replicas), dtype=np.uint64)
    for rep, seed, t, x, j in rows:
        r, k = int(rep), t_index[float(t)]
        X[r, k] = float(x)
        J[r, k] = float(j)
        seeds[r] = np.uint64(int(seed))
    return np.asarray(times), X, J, seeds


def read_paths_jsonl(fh):
    recs = [json.loads(line) for line in fh if line.strip()]
    recs.sort(key=lambda r: r["replica"])
    times = np.asarray(recs[0]["times"], dtype=np.float64)
    X = np.vstack([r["X"] for r in recs])
    J = np.vstack([r["J"] for r in recs])
    seeds = np.asarray([r["seed"] for r in recs], dtype=np.uint64)
    return times, X, J, seeds
