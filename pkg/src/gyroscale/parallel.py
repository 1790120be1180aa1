"""Deterministic parallel map over fixed-size chunks.

Chunk boundaries depend only on the problem size, never on the worker
count, and results are gathered in submission order.  Every chunk therefore
performs the same floating-point operations whatever the number of threads,
which keeps outputs bit-identical.  The compiled kernels release the GIL, so
threads give real parallelism.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

ENV_THREADS = "GYROSCALE_THREADS"
DEFAULT_CHUNK = 1024


def resolve_threads(requested=None):
    """Worker count: ``GYROSCALE_THREADS`` if set, else ``requested``, else the core count."""
    env = os.environ.get(ENV_THREADS)
    if env is not None and env.strip():
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
    elif requested is not None:
        n = int(requested)
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ValueError("thread count must be at least 1")
    return n


def chunk_slices(n, chunk=DEFAULT_CHUNK):
    return [slice(i, min(i + chunk, n)) for i in range(0, n, chunk)]


@contextmanager
def executor_for(threads):
    """A thread pool for ``threads > 1``, otherwise ``None`` (serial map)."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            yield ex
    else:
        yield None


def chunked_map(func, n, executor=None, chunk=DEFAULT_CHUNK):
    """``[func(slice) for slice in chunks]`` in order, possibly on ``executor``."""
    slices = chunk_slices(n, chunk)
    if executor is None:
        return [func(s) for s in slices]
    return list(executor.map(func, slices))
