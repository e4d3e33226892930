"""Time the compiled kernels against the numpy fallback on training-sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from wrapnet import _pykernels
from wrapnet.sphere import fibonacci_grid, sample_sphere_uniform
from wrapnet.synthetic import make_dataset
from wrapnet.wrapping import Topology

try:
    from wrapnet import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def cases():
    rng = np.random.default_rng(0)
    grid = fibonacci_grid(704)
    pts = sample_sphere_uniform(642, 1)
    cost = np.zeros((704, 704))
    cost[:642] = ((pts[:, None, :] - grid.points[None]) ** 2).sum(-1)
    fine = {s.name: s for s in make_dataset(0)}["torus_0"].subdiv.fine
    adj = Topology.of(fine.triangles, fine.n_vertices).adj
    F = rng.normal(size=(fine.n_faces, 128))
    G = rng.normal(size=(fine.n_faces, 512))
    p, g = rng.normal(size=1_000_000), rng.normal(size=1_000_000)
    m, v = rng.normal(size=1_000_000) * 0.1, rng.random(1_000_000)
    idx = rng.integers(0, 2304, size=3 * 2304).astype(np.int64)
    rows = rng.normal(size=(3 * 2304, 128))
    return {
        "lsap 704x704": lambda k: k.lsap(cost),
        "nearest 642 -> 20000": lambda k, s=sample_sphere_uniform(20000, 2): k.nearest(pts, s),
        "adam_update 1e6": lambda k: k.adam_update(p.copy(), g, m.copy(), v.copy(), 5e-5, 0.9, 0.999, 1e-8, 0.1, 0.001),
        "scatter_add_rows 6912x128": lambda k: k.scatter_add_rows(np.zeros((2304, 128)), idx, rows),
        "face_conv_stack 2304x128": lambda k: k.face_conv_stack(F, adj),
        "face_conv_stack_back 2304x128": lambda k: k.face_conv_stack_back(G, F, adj),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [("python", _pykernels)] + ([("cython", _kernels)] if _kernels else [])
    print(f"{'kernel':32s}" + "".join(f"{name:>12s}" for name, _ in backends) + "     speedup")
    for label, fn in cases().items():
        times = [min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) for _, mod in backends]
        speed = f"{times[0] / times[1]:10.1f}x" if len(times) == 2 else ""
        print(f"{label:32s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
