"""Compare the numba and pure-numpy eigenfeature kernels.

Runs the same neighborhood eigenfeature workload under both backends in
fresh subprocesses (the backend is fixed at import time) and prints a
small timing table.

Usage: python3 benchmarks/bench_backends.py [--points N] [--k K] [--repeats R]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from nss3dqa.kernels import eigenfeatures_from_neighbors, get_backend
from nss3dqa.pc_features import NeighborhoodIndex

n, k, repeats = json.loads(sys.argv[1])
rng = np.random.default_rng(0)
pts = rng.normal(size=(n, 3))
neighbors = NeighborhoodIndex(pts, k=k).query_all()
# Warm-up compiles the jit path so timings measure steady state.
eigenfeatures_from_neighbors(pts, neighbors)
times = []
for _ in range(repeats):
    t0 = time.perf_counter()
    out = eigenfeatures_from_neighbors(pts, neighbors)
    times.append(time.perf_counter() - t0)
print(json.dumps({
    "backend": get_backend(),
    "best_ms": min(times) * 1e3,
    "mean_ms": sum(times) / len(times) * 1e3,
    "checksum": float(out.sum()),
}))
"""


def run(backend, n, k, repeats):
    env = dict(os.environ, NSS3DQA_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, json.dumps([n, k, repeats])],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=50_000)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    results = [run(b, args.points, args.k, args.repeats)
               for b in ("numpy", "numba")]
    print(f"{args.points} points, k={args.k}, best of {args.repeats}:")
    for r in results:
        print(f"  {r['backend']:<6} best {r['best_ms']:8.1f} ms   "
              f"mean {r['mean_ms']:8.1f} ms")
    a, b = results
    if abs(a["checksum"] - b["checksum"]) > 1e-6 * max(1.0, abs(a["checksum"])):
        print("  WARNING: backend results disagree "
              f"({a['checksum']} vs {b['checksum']})")
    else:
        print(f"  results agree (checksum {a['checksum']:.6f}); "
              f"speedup {a['best_ms'] / b['best_ms']:.1f}x "
              f"({b['backend']} over {a['backend']})")


if __name__ == "__main__":
    main()
