#!/usr/bin/env python3
"""Benchmark the likelihood kernels: compiled extension vs numpy fallback.

The kernel (pointwise mixture log likelihood plus its gradient in the three
linear predictors) is the inner loop of every leapfrog step, so this is the
number that decides sampling throughput. Run::

    python benchmarks/bench_zib_kernels.py --rows 840 --repeats 2000
"""

import argparse
import time

import numpy as np

import cyclesync.zib._kernels_py as python_impl

try:
    import cyclesync.zib._zibkern as compiled_impl
except ImportError:
    compiled_impl = None


def make_inputs(rows: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    y = rng.beta(2.0, 3.0, size=rows)
    y[rng.random(rows) < 0.18] = 0.0
    return (
        y,
        (y == 0.0).astype(np.uint8),
        rng.normal(size=rows),
        rng.normal(size=rows),
        rng.normal(size=rows) * 0.5,
    )


def bench(impl, args, repeats: int) -> tuple[float, float]:
    for _ in range(max(repeats // 10, 5)):  # warm up
        impl.zib_terms(*args)
    t0 = time.perf_counter()
    for _ in range(repeats):
        impl.zib_terms(*args)
    terms = (time.perf_counter() - t0) / repeats
    t0 = time.perf_counter()
    for _ in range(repeats):
        impl.zib_pointwise(*args)
    pointwise = (time.perf_counter() - t0) / repeats
    return terms, pointwise


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=840)
    parser.add_argument("--repeats", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    opts = parser.parse_args()

    args = make_inputs(opts.rows, opts.seed)
    backends = [("python", python_impl)]
    if compiled_impl is not None:
        backends.insert(0, ("compiled", compiled_impl))

    ref = python_impl.zib_terms(*args)
    print(f"rows={opts.rows} repeats={opts.repeats}")
    print(f"{'backend':<10} {'zib_terms':>12} {'zib_pointwise':>14}  parity")
    results = {}
    for name, impl in backends:
        got = impl.zib_terms(*args)
        parity = max(
            abs(got[0] - ref[0]),
            *(float(np.max(np.abs(a - b))) for a, b in zip(got[1:], ref[1:])),
        )
        terms_t, pw_t = bench(impl, args, opts.repeats)
        results[name] = terms_t
        print(f"{name:<10} {terms_t * 1e6:>10.1f}us {pw_t * 1e6:>12.1f}us  {parity:.2e}")
    if len(results) == 2:
        print(f"speedup: {results['python'] / results['compiled']:.2f}x "
              "(compiled over python)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
