"""Compiled kernels against the numpy fallback.

For each system the same ensemble is run with both backends; the script
reports wall time, throughput in trial-steps per second, the speedup and the
largest absolute difference between the two feature matrices.

    python3 benchmarks/bench_kernels.py [--L 2000] [--T 3000] [--threads 1]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ensemble_rc import _backend, dynamics, ensemble


def systems():
    yield "esn", dynamics.EsnSpec.random(30, 0.94, 0.01, 0.01, 0), [0, 1, 2]
    yield "lorenz", dynamics.OdeSpec("lorenz"), [0]
    yield "stuart-landau-x", dynamics.OdeSpec("stuart-landau-x"), [0]
    yield "copy", dynamics.CopyMapSpec(1.5), [0]


def run(spec, comps, u, washout, L, threads, kern):
    cfg = ensemble.EnsembleConfig(L=L, master_seed=0)
    phis = [ensemble.ObservationFn.parse(n) for n in ("x", "x^2", "x^3")]
    feats = [ensemble.FeatureSpec(c, p) for c in comps for p in phis]
    t0 = time.perf_counter()
    res = ensemble.ensemble_features(spec, cfg, u, washout, feats, threads=threads, kern=kern)
    return time.perf_counter() - t0, res.features.values


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=2000)
    ap.add_argument("--T", type=int, default=3000)
    ap.add_argument("--washout", type=int, default=500)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    if "cython" not in _backend.available():
        raise SystemExit("compiled kernels are not built; run `python3 setup.py build_ext --inplace`")
    u = np.random.Generator(np.random.Philox(1)).uniform(0.0, 1.0, args.T)
    work = args.L * args.T
    print(f"L={args.L} T={args.T} threads={args.threads}")
    print(f"{'system':<18}{'cython s':>10}{'python s':>10}{'Msteps/s c':>12}{'Msteps/s py':>12}"
          f"{'speedup':>9}{'max |diff|':>12}")
    for name, spec, comps in systems():
        tc, fc = run(spec, comps, u, args.washout, args.L, args.threads, _backend.get("cython"))
        tp, fp = run(spec, comps, u, args.washout, args.L, args.threads, _backend.get("python"))
        diff = float(np.max(np.abs(fc - fp)))
        print(f"{name:<18}{tc:>10.3f}{tp:>10.3f}{work / tc / 1e6:>12.2f}{work / tp / 1e6:>12.2f}"
              f"{tp / tc:>9.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
