"""Compare the compiled and numpy flow kernels on identical batches.

Usage::

    python benchmarks/bench_flow.py [--points N] [--repeat R]

Prints the best-of-R wall time of each backend for the full Strang flow and
the averaged-model flow, the speedup, and the largest difference between the
two backends' feet (they should agree to rounding).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gyroscale import available_backends, use_backend
from gyroscale.dynamics import flow_full_backward, flow_gc_backward
from gyroscale.kernel import FieldConfig

FIELDS = FieldConfig.smooth_bounded(e_amp=(0.3, 0.3, 0.3), b_amp=(0.2, 0.2, 0.2),
                                    E=(0.2, 0.3, -0.2), B=(0.3, 0.1, 0.2))


def _best(func, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = func()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(points=2048, repeat=3, t=0.5, eps=0.05, seed=0):
    """Return ``{kernel: {backend: (seconds, feet)}}``."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(points, 3))
    v = rng.normal(size=(points, 3))
    kernels = {
        "flow_full": lambda: flow_full_backward(t, x, v, eps, FIELDS),
        "flow_gc": lambda: flow_gc_backward(t, x, v, FIELDS),
    }
    results = {}
    for name, func in kernels.items():
        results[name] = {}
        for backend in available_backends():
            prev = use_backend(backend)
            try:
                results[name][backend] = _best(func, repeat)
            finally:
                use_backend(prev)
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=2048)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    results = bench(args.points, args.repeat)
    print(f"{'kernel':<10} {'backend':<8} {'seconds':>10} {'speedup':>8} {'max |diff|':>11}")
    for name, per in results.items():
        ref_time, ref_out = per["numpy"]
        for backend, (sec, out) in per.items():
            diff = max(float(np.abs(a - b).max()) for a, b in zip(out, ref_out))
            print(f"{name:<10} {backend:<8} {sec:>10.4f} {ref_time / sec:>8.1f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
