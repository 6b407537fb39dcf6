"""Times the hot kernels on both backends and prints a speedup table.

Run as: python benchmarks/bench_kernels.py [--size 64] [--batch 256] [--repeats 5]

The numba path must have compiled at import for the comparison to run
(LGPREP_BACKEND=auto or numba); otherwise only numpy numbers print.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lgprep import _backend
from lgprep.imagecore import rotate
from lgprep.spectral import dft2_naive
from lgprep.features import lg_preprocess_batch
from lgprep.imagecore import LabeledDataset
from lgprep.synthshapes import ShapeSpec, render_shape


def _best_of(repeats: int, fn) -> float:
    fn()  # warmup: jit compilation, cache population
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--batch", type=int, default=256)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    stack = rng.random((args.batch, args.size, args.size))
    ds = LabeledDataset(
        items=[(stack[i], 0) for i in range(args.batch)],
        class_names=["x"],
        split="train",
    )
    one = stack[0]
    spec = ShapeSpec(
        shape="triangle",
        cx=args.size / 2,
        cy=args.size / 2,
        scale=args.size / 3,
        rotation_deg=30.0,
        aspect=0.8,
    )

    cases = {
        f"preprocess batch ({args.batch}x{args.size}x{args.size})": lambda: lg_preprocess_batch(
            ds, workers=1
        ),
        f"naive dft2 ({args.size}x{args.size})": lambda: dft2_naive(one),
        f"rotate 17deg ({args.size}x{args.size})": lambda: rotate(one, 17.0),
        f"render triangle ({args.size}x{args.size})": lambda: render_shape(spec, args.size),
    }

    initial = _backend.active_backend()
    backends = ["numpy"]
    if initial == "numba":
        backends.append("numba")
    else:
        print("note: numba backend unavailable; timing numpy only")

    results: dict[str, dict[str, float]] = {name: {} for name in cases}
    for backend in backends:
        _backend.set_backend(backend)
        for name, fn in cases.items():
            results[name][backend] = _best_of(args.repeats, fn)
    _backend.set_backend(initial)

    width = max(len(name) for name in cases)
    header = f"{'kernel':<{width}}  {'numpy':>10}"
    if "numba" in backends:
        header += f"  {'numba':>10}  {'speedup':>8}"
    print(header)
    for name, times in results.items():
        row = f"{name:<{width}}  {times['numpy'] * 1e3:>8.2f}ms"
        if "numba" in times:
            row += f"  {times['numba'] * 1e3:>8.2f}ms  {times['numpy'] / times['numba']:>7.2f}x"
        print(row)


if __name__ == "__main__":
    main()
