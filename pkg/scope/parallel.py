from __future__ import annotations

import os
from multiprocessing import Pool
from typing import Callable, Sequence, TypeVar

from tqdm import tqdm


T = TypeVar("T")
R = TypeVar("R")

# Below this many items a progress bar is noise.
_MIN_PROGRESS_ITEMS = 200


def resolve_workers(workers: int) -> int:
    if workers <= 0:
        return os.cpu_count() or 1
    return workers


def parallel_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    *,
    workers: int = 1,
    desc: str = "",
    progress: bool = True,
) -> list[R]:
    """
    Map a picklable top-level function over items, preserving input order.

    workers <= 0 uses every CPU; 1 runs in-process.
    """
    workers = resolve_workers(workers)
    show = progress and len(items) >= _MIN_PROGRESS_ITEMS
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in tqdm(items, desc=desc, disable=not show)]

    chunksize = max(1, len(items) // (workers * 8))
    with Pool(processes=workers) as pool:
        it = pool.imap(fn, items, chunksize=chunksize)
        return list(tqdm(it, total=len(items), desc=desc, disable=not show))
