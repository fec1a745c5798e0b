"""
Weak label partition into the trusted-normal class P and the unlabeled class U.
"""

import logging
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from ..core.exceptions import DegeneratePartition
from .ingestion import LogDataset, LogRecord

logger = logging.getLogger(__name__)

# inaccurate labels: P -> 0, U -> 1
WEAK_P = 0
WEAK_U = 1
_WEAK_NAMES = {WEAK_P: "P", WEAK_U: "U"}


def compute_q(n_p: int, n_u: int) -> float:
    """Imbalance ratio |P| / (|P| + |U|), strictly inside (0, 1)."""
    if n_p <= 0 or n_u <= 0:
        raise DegeneratePartition(f"both classes must be non-empty (|P|={n_p}, |U|={n_u})")
    return n_p / (n_p + n_u)


class WeakDataset:
    """Records with one weak label each; q follows the current partition."""

    def __init__(
        self,
        records: Union[LogDataset, Sequence[LogRecord]],
        weak_labels: np.ndarray,
        delta_ms: int,
    ):
        weak_labels = np.asarray(weak_labels, dtype=np.int8)
        if weak_labels.shape != (len(records),):
            raise ValueError(
                f"expected {len(records)} weak labels, got shape {weak_labels.shape}"
            )
        if not np.isin(weak_labels, (WEAK_P, WEAK_U)).all():
            raise ValueError("weak labels must be 0 (P) or 1 (U)")
        weak_labels = weak_labels.copy()
        weak_labels.setflags(write=False)
        self.records = records
        self.weak_labels = weak_labels
        self.delta_ms = delta_ms

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_u(self) -> int:
        return int(self.weak_labels.sum())

    @property
    def n_p(self) -> int:
        return len(self.weak_labels) - self.n_u

    @property
    def is_degenerate(self) -> bool:
        return self.n_p == 0 or self.n_u == 0

    @property
    def q(self) -> float:
        return compute_q(self.n_p, self.n_u)

    def weak_label_name(self, index: int) -> str:
        return _WEAK_NAMES[int(self.weak_labels[index])]


def _timestamps(records: Union[LogDataset, Sequence[LogRecord]]) -> np.ndarray:
    if isinstance(records, LogDataset):
        return records.timestamps_ms
    return np.fromiter(
        (r.timestamp_ms for r in records), dtype=np.int64, count=len(records)
    )


def assign_weak_labels(
    records: Union[LogDataset, Sequence[LogRecord]],
    failure_times_ms: Sequence[int],
    delta_ms: int,
) -> WeakDataset:
    """Put every record within ``delta_ms`` (inclusive) of a failure time into U.

    Failure times are sorted once; each record then needs one binary search for
    the first failure at or after ``t - delta`` and a single comparison.
    """
    if delta_ms < 0:
        raise ValueError(f"delta_ms must be >= 0, got {delta_ms}")

    timestamps = _timestamps(records)
    failures = np.sort(np.asarray(failure_times_ms, dtype=np.int64))
    if failures.size == 0:
        weak = np.zeros(len(timestamps), dtype=np.int8)
    else:
        idx = np.searchsorted(failures, timestamps - delta_ms, side="left")
        in_range = idx < failures.size
        nearest = failures[np.minimum(idx, failures.size - 1)]
        weak = (in_range & (nearest <= timestamps + delta_ms)).astype(np.int8)

    dataset = WeakDataset(records, weak, delta_ms)
    logger.info(
        f"Weak partition (delta={delta_ms}ms, {failures.size} failure times): "
        f"|P|={dataset.n_p}, |U|={dataset.n_u}"
    )
    return dataset


def build_eval_partition(records: LogDataset, delta_ms: int) -> WeakDataset:
    """Derive failure times from the ground-truth abnormal records and partition."""
    if not records.has_labels:
        raise ValueError("every record must carry a true label")
    abnormal = records.abnormal_mask()
    if not abnormal.any():
        raise DegeneratePartition("no abnormal records to derive failure times from")
    failure_times = records.timestamps_ms[abnormal]
    return assign_weak_labels(records, failure_times, delta_ms)


def dump_weak_labels(dataset: WeakDataset, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record, label in zip(dataset.records, dataset.weak_labels):
            handle.write(f"{record.id}\t{_WEAK_NAMES[int(label)]}\n")


def load_weak_labels(
    records: Union[LogDataset, Sequence[LogRecord]],
    path: Union[str, Path],
    delta_ms: int,
) -> WeakDataset:
    """Reload a partition dump; ids must line up with ``records``."""
    lookup = {"P": WEAK_P, "U": WEAK_U}
    labels = np.empty(len(records), dtype=np.int8)
    count = 0
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 2 or fields[1] not in lookup:
                raise ValueError(
                    f"bad weak label row {lineno} in {path}: {line.rstrip()!r}"
                )
            record_id, name = fields
            if count >= len(records) or str(records[count].id) != record_id:
                raise ValueError(f"weak label dump {path} does not match records")
            labels[count] = lookup[name]
            count += 1
    if count != len(records):
        raise ValueError(
            f"weak label dump {path} has {count} rows, expected {len(records)}"
        )
    return WeakDataset(records, labels, delta_ms)
