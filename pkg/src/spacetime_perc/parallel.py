"""Replica-level parallelism with results returned in submission order."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def pmap(fn, tasks, workers: int = 1) -> list:
    """``[fn(*t) for t in tasks]``, optionally spread over processes.

    Each task carries its own seed key, so results do not depend on the
    number of workers.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(fn, *t) for t in tasks]
        return [f.result() for f in futs]


def blocks(total: int, size: int) -> list[tuple[int, int]]:
    """(block index, block length) covering ``total`` items in fixed-size blocks."""
    out = []
    i = 0
    while total > 0:
        k = min(size, total)
        out.append((i, k))
        total -= k
        i += 1
    return out
