"""Time the numpy fallback against the numba loops on the hot kernels.

    python benchmarks/bench_kernels.py [--level 5] [--repeat 5]

Numba compile time is paid once in a warm-up call and excluded.
"""

import argparse
import timeit

import numpy as np

from flbo import fixtures
from flbo.geometry import curvature_tensors, estimate_curvature_frames
from flbo.kernels import face_metrics, scatter_faces_to_vertices, stiffness_triplets
from flbo.operators import AnisotropyParams, assemble_family


def cases(mesh):
    frames = estimate_curvature_frames(mesh).as_matrices()
    d = face_metrics(frames, 10.0, 0.1, 0.3, backend="numpy")[6]
    vals = np.random.default_rng(0).standard_normal((mesh.n_faces, 3, 3))
    params = AnisotropyParams()
    return {
        "face_metrics": lambda b: face_metrics(frames, 10.0, 0.1, 0.3, backend=b),
        "stiffness_triplets": lambda b: stiffness_triplets(mesh.vertices, mesh.faces, d, backend=b),
        "scatter_faces": lambda b: scatter_faces_to_vertices(mesh.faces, vals, mesh.n_vertices, backend=b),
        "curvature_tensors": lambda b: curvature_tensors(mesh, backend=b),
        "assemble_family(8)": lambda b: assemble_family(mesh, params, backend=b),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--level", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    mesh = fixtures.icosphere(args.level)
    print(f"icosphere level {args.level}: {mesh.n_vertices} vertices, {mesh.n_faces} faces")
    print(f"{'kernel':<22}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, fn in cases(mesh).items():
        fn("numba")  # compile
        t = {}
        for b in ("numpy", "numba"):
            t[b] = min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<22}{t['numpy']:>12.2f}{t['numba']:>12.2f}{t['numpy'] / t['numba']:>9.1f}x")


if __name__ == "__main__":
    main()
