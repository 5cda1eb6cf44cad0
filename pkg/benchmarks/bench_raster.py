#!/usr/bin/env python3
"""Compare the compiled rasterizer kernel against the numpy fallback.

Usage: python benchmarks/bench_raster.py [--faces 2000] [--size 256]
"""

import argparse
import time

import numpy as np

from posesynth.body_model import Mesh
from posesynth.camera import WeakPerspectiveCamera
from posesynth.raster import available_kernels, render_depth
from posesynth.toy import random_mesh


def sphere_mesh(subdiv=24):
    """Lat-long sphere: dense, watertight-ish, realistic triangle sizes."""
    us = np.linspace(0, 2 * np.pi, subdiv * 2, endpoint=False)
    vs = np.linspace(0.05, np.pi - 0.05, subdiv)
    verts = []
    for v in vs:
        for u in us:
            verts.append([np.sin(v) * np.cos(u), np.sin(v) * np.sin(u),
                          np.cos(v)])
    faces = []
    cols = len(us)
    for i in range(len(vs) - 1):
        for j in range(cols):
            a = i * cols + j
            b = i * cols + (j + 1) % cols
            c = (i + 1) * cols + j
            d = (i + 1) * cols + (j + 1) % cols
            faces.append([a, b, c])
            faces.append([b, d, c])
    return Mesh(np.array(verts) * 0.8, np.array(faces, dtype=np.int64))


def bench(fill, mesh, cam, size, repeats):
    # warm up once, then time
    render_depth(mesh, cam, size, kernel=fill)
    start = time.perf_counter()
    for _ in range(repeats):
        out = render_depth(mesh, cam, size, kernel=fill)
    return (time.perf_counter() - start) / repeats, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--subdiv", type=int, default=24,
                    help="sphere subdivision (faces ~ 2*subdiv^2*2)")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    mesh = sphere_mesh(args.subdiv)
    cam = WeakPerspectiveCamera(0.9, 0.0, 0.0, args.size, args.size)
    size = (args.size, args.size)
    kernels = available_kernels()
    if "compiled" not in kernels:
        print("compiled kernel not built; benchmarking the fallback only")

    results = {}
    outputs = {}
    for name, fill in kernels.items():
        secs, out = bench(fill, mesh, cam, size, args.repeats)
        results[name] = secs
        outputs[name] = out.data
        print(f"{name:>9}: {secs * 1000:8.2f} ms/frame "
              f"({mesh.faces.shape[0]} faces @ {args.size}x{args.size})")

    if len(results) == 2:
        ratio = results["python"] / results["compiled"]
        print(f"  speedup: compiled is {ratio:.1f}x faster")
        identical = np.array_equal(outputs["python"], outputs["compiled"])
        print(f"  outputs bit-identical: {identical}")
        if not identical:
            raise SystemExit("kernel mismatch!")


if __name__ == "__main__":
    main()
