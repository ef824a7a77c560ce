"""Compare the compiled and numpy tree kernels on identical batches.

    python benchmarks/bench_kernels.py --paths 4096 --order 3 --repeat 3
"""
import argparse
import time

import numpy as np

from levychaos import kernels
from levychaos.chaos import _basis_tree, chaos_basis, dyadic_cells
from levychaos.measure import Atomic, LevyTriplet
from levychaos.montecarlo import simulate_batch, tree_values
from levychaos.systems import gram_schmidt, teugels_system


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=4096)
    ap.add_argument("--order", type=int, default=3)
    ap.add_argument("--depth", type=int, default=2)
    ap.add_argument("--grid", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=20261016)
    args = ap.parse_args()

    triplet = LevyTriplet(0.0, 1.0, Atomic.of([(1.0, 2.0), (-0.5, 1.0)]))
    system = list(gram_schmidt(teugels_system(3, triplet.mu), triplet.mu))
    edges = dyadic_cells(1.0, args.depth)
    basis = chaos_basis(len(system), args.order, len(edges) - 1)
    tree, _ = _basis_tree(basis, edges, 1.0)
    batch = simulate_batch(triplet, 1.0, args.grid, args.seed, 0, args.paths)
    print(f"paths {args.paths}, grid {args.grid:g}, tree nodes {len(tree)}, "
          f"jumps {len(batch.jtimes)}; import-time backend: {kernels.BACKEND}")

    results = {}
    for name in ("cython", "python"):
        try:
            t, vals = best_of(lambda: tree_values(tree, system, triplet.nu, batch, backend=name),
                              args.repeat)
        except ImportError as exc:
            print(f"{name:7s} unavailable ({exc})")
            continue
        results[name] = vals
        rate = args.paths * len(tree) / t
        print(f"{name:7s} {t * 1e3:9.1f} ms   {rate:12.3g} node-paths/s")
    if len(results) == 2:
        gap = float(np.max(np.abs(results["cython"] - results["python"])))
        print(f"max |cython - python| = {gap:.3e}")


if __name__ == "__main__":
    main()
