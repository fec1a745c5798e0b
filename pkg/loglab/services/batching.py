"""
Batch slicing shared by training and scoring.
"""

from typing import Iterator, Tuple


def batch_bounds(n: int, batch_size: int) -> Iterator[Tuple[int, int]]:
    """Yield (start, stop) pairs covering range(n); the last batch may be short."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    for start in range(0, n, batch_size):
        yield start, min(start + batch_size, n)
