"""Timing comparison of the compiled and pure-numpy kernel backends.

Run as: python benchmarks/compare_backends.py [--grid N] [--repeats K]

Measures the individual kernels and a full forward/backward training step
at several grid sizes.  The compiled radix-2 kernels win on small grids
where Python call overhead dominates; numpy's pocketfft-backed transforms
win on large grids.  The numbers printed by this script are how that
crossover was measured — `auto` still prefers the compiled backend for its
consistency on the tiny grids the gradient checker uses.
"""

import argparse
import time

import numpy as np

from onn4f import backend
from onn4f.grad import backward
from onn4f.optics import forward_batch
from onn4f.train import init_model, sgd_step, softmax


def timeit(fn, repeats: int) -> float:
    """Median wall time of fn() over `repeats` calls, in seconds."""
    fn()  # warm up caches and any lazy allocation
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def bench_kernels(name: str, n: int, repeats: int) -> dict[str, float]:
    mod = backend.resolve(name)
    rng = np.random.default_rng(0)
    field = rng.standard_normal((8, n, n)) + 1j * rng.standard_normal((8, n, n))
    theta = rng.uniform(0, 2 * np.pi, (n, n))
    spec = mod.fft2(field)
    return {
        "fft2": timeit(lambda: mod.fft2(field), repeats),
        "ifft2": timeit(lambda: mod.ifft2(spec), repeats),
        "phase_mask": timeit(lambda: mod.apply_phase_mask(spec, theta), repeats),
        "relu": timeit(lambda: mod.shifted_relu(field, 0.01), repeats),
        "intensity": timeit(lambda: mod.intensity(field), repeats),
    }


def bench_training_step(name: str, n: int, layers: int, repeats: int) -> float:
    rng = np.random.default_rng(0)
    images = rng.random((32, n, n))
    labels = rng.integers(0, 10, size=32)
    with backend.use(name):
        model = init_model(n, layers, 0.01, np.random.default_rng(0))

        def step():
            readouts, tape = forward_batch(model, images)
            probs = softmax(readouts)
            seed = probs.copy()
            seed[np.arange(32), labels] -= 1.0
            seed /= 32
            sgd_step(model, backward(model, tape, seed), 0.05)

        return timeit(step, repeats)


def fmt(seconds: float) -> str:
    if seconds < 1e-3:
        return f"{seconds * 1e6:8.1f} us"
    return f"{seconds * 1e3:8.2f} ms"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument(
        "--grids", type=int, nargs="+", default=[8, 16, 32, 64, 128]
    )
    args = parser.parse_args()

    names = backend.available()
    if "compiled" not in names:
        print("note: compiled extension not built; showing python only")

    print(f"kernel timings (batch of 8 fields, median of {args.repeats}):")
    for n in args.grids:
        print(f"\n  grid {n}x{n}")
        results = {name: bench_kernels(name, n, args.repeats) for name in names}
        for kernel in ("fft2", "ifft2", "phase_mask", "relu", "intensity"):
            row = f"    {kernel:<12}"
            for name in names:
                row += f"  {name}: {fmt(results[name][kernel])}"
            print(row)

    print(f"\nfull training step (1 layer, batch 32, median of {args.repeats}):")
    for n in args.grids:
        row = f"  grid {n:>3}x{n:<3}"
        for name in names:
            t = bench_training_step(name, n, 1, max(3, args.repeats // 4))
            row += f"  {name}: {fmt(t)}"
        print(row)

    print("\nfull training step (3 layers, batch 32):")
    for n in (32, 64):
        row = f"  grid {n:>3}x{n:<3}"
        for name in names:
            t = bench_training_step(name, n, 3, max(3, args.repeats // 4))
            row += f"  {name}: {fmt(t)}"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
