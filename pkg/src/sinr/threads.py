"""BLAS thread control.

At the array sizes this package works with, multithreaded BLAS loses
badly to a single thread (per-call thread wake latency dwarfs the
matmuls), and a fixed thread count is also what makes runs bit-exactly
reproducible. Compute entry points therefore run under a one-thread
limit unless SINR_THREADS raises the cap.
"""

from __future__ import annotations

import contextlib
import os

__all__ = ["compute_threads", "thread_limit"]


def compute_threads(force_single: bool = False) -> int:
    if force_single:
        return 1
    value = os.environ.get("SINR_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return 1


def thread_limit(force_single: bool = False):
    """Context manager capping BLAS worker threads."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return contextlib.nullcontext()
    return threadpool_limits(limits=compute_threads(force_single))
