"""Time the compiled kernels against their pure-Python twins.

Usage: python3 benchmarks/bench_kernels.py [--repeat 3] [--points 2000]
"""
import argparse
import time

import numpy as np

from conflab import _pykernels, geom, percolation as pc

try:
    from conflab import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n_points):
    rng = np.random.default_rng(0)
    xy = rng.random((n_points, 2))
    t = geom.delaunay(xy)
    q = rng.random((10 * n_points, 2))
    c = pc.color_grid(100, 0.3, 1)
    cost = c.blue.astype(np.uint8)
    hx = geom.hex_patch(12)
    ptr, idx = hx.flowers
    interior = ~hx.boundary_flags
    labels = np.full(len(hx.vertices), 0.3)
    return {
        f"delaunay ({n_points} points)": lambda k: k.delaunay(xy),
        f"locate ({len(q)} queries)": lambda k: k.locate(t.vertices, t.triangles, t.neighbors, q, 0),
        "chem_distance_field (201^2 grid)": lambda k: k.chem_distance_field(cost, 100, 100),
        f"pack_sweep ({len(hx.vertices)} labels, 20 sweeps)":
            lambda k: k.pack_sweep(labels.copy(), interior, ptr, idx, 20),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--points", type=int, default=2000)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; only the Python timings are shown")
    print(f"{'kernel':44s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, fn in cases(args.points).items():
        tp = best_of(lambda: fn(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:44s} {tp:11.4f}")
            continue
        tc = best_of(lambda: fn(_ckernels), args.repeat)
        print(f"{name:44s} {tp:11.4f} {tc:11.4f} {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
