"""Compiled versus numpy shooting kernel on the same seeded cycles.

Usage: python benchmarks/bench_shooting.py [--periods 6 10 14] [--repeat 3]
"""
import argparse
import time

import numpy as np

from ruelle import _backend, corpus
from ruelle.periodic_orbits import _orbit_structure, _seed_cycles, residue_classes


def inputs(fmap, n):
    A = fmap.linear
    D, c, _ = residue_classes(A, n)
    reps, _ = _orbit_structure(A, c, D, n)
    u0, p = _seed_cycles(A, c[reps], D, n)
    v = [(comp.freqs, comp.coeffs) for comp in fmap.displacement]
    return u0, p, A.as_array().astype(np.float64), v[0], v[1]


def best_time(kernel, args, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = kernel(*args, 60, 1e-11)
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--map", default="eps005", help="corpus map name")
    ap.add_argument("--periods", type=int, nargs="+", default=[6, 10, 14])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _backend.compiled_shoot_orbits is None:
        raise SystemExit("compiled extension is not built; run `pip install -e . --no-build-isolation`")
    fmap, _ = corpus()[args.map]
    print(f"{'n':>3} {'cycles':>7} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'max |du|':>9}")
    for n in args.periods:
        data = inputs(fmap, n)
        tp, out_p = best_time(_backend.python_shoot_orbits, data, args.repeat)
        tc, out_c = best_time(_backend.compiled_shoot_orbits, data, args.repeat)
        diff = float(np.max(np.abs(out_p[0] - out_c[0])))
        print(f"{n:>3} {len(data[0]):>7} {tp:>11.4f} {tc:>13.4f} {tp / tc:>8.1f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
