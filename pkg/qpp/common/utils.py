"""General utilities for the QPP toolkit."""

import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TypeVar, Union

import pandas as pd

from qpp.common.logging import logger
from qpp.constants import NUM_THREADS_ENV

T = TypeVar("T")
R = TypeVar("R")


def num_threads() -> int:
    """Worker count for sweeps, capped by QPP_NUM_THREADS."""
    default = os.cpu_count() or 1
    try:
        value = int(os.getenv(NUM_THREADS_ENV, str(default)))
    except ValueError:
        logger.warning(f"Ignoring invalid {NUM_THREADS_ENV} value, using {default}")
        value = default
    return max(1, value)


def map_ordered(
    fn: Callable[[T], R], items: Sequence[T], max_workers: Optional[int] = None
) -> List[R]:
    """Apply `fn` to every item concurrently and return results in input order.

    Args:
        fn: Function applied to each item
        items: Inputs
        max_workers: Worker cap (defaults to `num_threads()`)

    Returns:
        List of results, `results[i] == fn(items[i])`
    """
    workers = min(max_workers or num_threads(), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]

    results: List[Optional[R]] = [None] * len(items)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(fn, item): idx for idx, item in enumerate(items)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results  # type: ignore[return-value]


def format_float(value: float) -> str:
    """Locale-independent 17-significant-digit formatting."""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return "%.17g" % value


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Write `text` to `path` via a temporary file and an atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"Wrote file [path={path}, bytes={len(text)}]")
    return path


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write a DataFrame as CSV with 17 significant digits, atomically."""
    text = frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    return atomic_write_text(path, text)
