"""
Log file ingestion and synthetic corpus generation.
"""

import logging
import math
import re
from bisect import bisect_left
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from itertools import islice
from pathlib import Path
from typing import Iterable, Iterator, List, NamedTuple, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from ..core.config import config
from ..core.exceptions import EmptyDataset, InvalidSpec, MalformedLine
from ..core.schemas import DatasetFormat, SyntheticSpec

logger = logging.getLogger(__name__)

NORMAL = "normal"
ABNORMAL = "abnormal"

PathLike = Union[str, Path]


class LogRecord(NamedTuple):
    """One parsed log line."""

    id: int
    timestamp_ms: int
    content: str
    true_label: Optional[str] = None

    @property
    def is_abnormal(self) -> bool:
        return self.true_label == ABNORMAL


class LogDataset(Sequence):
    """Immutable, file-ordered collection of records plus ingestion counters."""

    def __init__(
        self,
        records: List[LogRecord],
        name: str = "",
        malformed: int = 0,
        lines_read: int = 0,
    ):
        self._records = records
        self.name = name
        self.malformed = malformed
        self.lines_read = lines_read or len(records)
        self._timestamps: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self._records)

    def __getitem__(self, index):
        return self._records[index]

    def __iter__(self) -> Iterator[LogRecord]:
        return iter(self._records)

    @property
    def timestamps_ms(self) -> np.ndarray:
        if self._timestamps is None:
            self._timestamps = np.fromiter(
                (r.timestamp_ms for r in self._records),
                dtype=np.int64,
                count=len(self._records),
            )
            self._timestamps.setflags(write=False)
        return self._timestamps

    @property
    def has_labels(self) -> bool:
        return all(r.true_label is not None for r in self._records)

    def abnormal_mask(self) -> np.ndarray:
        return np.fromiter(
            (r.true_label == ABNORMAL for r in self._records),
            dtype=bool,
            count=len(self._records),
        )

    def abnormal_fraction(self) -> float:
        if not self._records:
            return 0.0
        return float(self.abnormal_mask().mean())


def _parse_timestamp_ms(raw: str, unit: str) -> int:
    try:
        value: float = int(raw)
    except ValueError:
        try:
            value = float(raw)
        except ValueError:
            raise MalformedLine(f"unparsable timestamp {raw!r}")
        if not math.isfinite(value):
            raise MalformedLine(f"non-finite timestamp {raw!r}")
    if unit == "seconds":
        ms = int(round(value * 1000))
    else:
        ms = int(round(value))
    if ms < 0:
        raise MalformedLine(f"negative timestamp {raw!r}")
    return ms


def parse_log_line(line: str, dataset_format: DatasetFormat, id: int) -> LogRecord:
    """Parse one whitespace-delimited line into a record.

    The label field "-" marks a normal message; any other tag is abnormal.
    """
    fields = line.split()
    if len(fields) < dataset_format.min_fields:
        raise MalformedLine(
            f"expected at least {dataset_format.min_fields} fields, got {len(fields)}"
        )
    label = fields[dataset_format.label_field_index]
    timestamp_ms = _parse_timestamp_ms(
        fields[dataset_format.timestamp_field_index], dataset_format.timestamp_unit
    )
    content = " ".join(fields[dataset_format.content_start_field_index :])
    return LogRecord(
        id=id,
        timestamp_ms=timestamp_ms,
        content=content,
        true_label=NORMAL if label == "-" else ABNORMAL,
    )


def serialize_log_line(
    record: LogRecord, dataset_format: DatasetFormat, tag: str = "FAILURE"
) -> str:
    """Render a record back into the raw line layout of ``dataset_format``."""
    fields = ["-"] * dataset_format.content_start_field_index
    fields[dataset_format.label_field_index] = "-" if not record.is_abnormal else tag
    if dataset_format.timestamp_unit == "seconds":
        seconds, millis = divmod(record.timestamp_ms, 1000)
        stamp = str(seconds) if millis == 0 else f"{seconds}.{millis:03d}"
    else:
        stamp = str(record.timestamp_ms)
    fields[dataset_format.timestamp_field_index] = stamp
    return " ".join(fields + [record.content])


class ParsedChunk(NamedTuple):
    rows: List[Tuple[int, int, str, str]]  # (offset, timestamp_ms, content, label)
    bad_offsets: List[int]
    errors: List[Tuple[int, str]]  # first few (offset, message) pairs
    n_lines: int


def _parse_chunk(lines: List[str], dataset_format: DatasetFormat) -> ParsedChunk:
    """Parse a block of lines, keeping each row's offset within the block."""
    rows: List[Tuple[int, int, str, str]] = []
    bad_offsets: List[int] = []
    errors: List[Tuple[int, str]] = []
    for offset, line in enumerate(lines):
        try:
            record = parse_log_line(line, dataset_format, 0)
        except MalformedLine as e:
            bad_offsets.append(offset)
            if len(errors) < config.MAX_MALFORMED_WARNINGS:
                errors.append((offset, str(e)))
            continue
        rows.append((offset, record.timestamp_ms, record.content, record.true_label))
    return ParsedChunk(rows, bad_offsets, errors, len(lines))


def _read_chunks(path: Path, chunk_size: int) -> Iterator[List[str]]:
    with open(path, "r", encoding="utf-8", errors="replace") as handle:
        while True:
            chunk = list(islice(handle, chunk_size))
            if not chunk:
                return
            yield chunk


def _parsed_chunks(
    path: Path, dataset_format: DatasetFormat, workers: int
) -> Iterator[ParsedChunk]:
    chunks = _read_chunks(path, config.PARSE_CHUNK_SIZE)
    if workers <= 1:
        for chunk in chunks:
            yield _parse_chunk(chunk, dataset_format)
        return

    # Bounded fan-out: at most `workers` chunks in flight, results in file order
    with ProcessPoolExecutor(max_workers=workers) as pool:
        while True:
            group = list(islice(chunks, workers))
            if not group:
                return
            futures = [pool.submit(_parse_chunk, c, dataset_format) for c in group]
            for future in futures:
                yield future.result()


def load_dataset(
    path: PathLike,
    dataset_format: DatasetFormat,
    limit: Optional[int] = None,
    workers: int = 1,
) -> LogDataset:
    """Load up to ``limit`` records from a raw log file in file order.

    Malformed lines are skipped and counted, never fatal.
    """
    if limit is not None and limit <= 0:
        raise EmptyDataset(f"limit {limit} admits no records")

    path = Path(path)
    logger.info(f"Loading {dataset_format.name} records from {path}")

    records: List[LogRecord] = []
    malformed = 0
    lines_read = 0
    for chunk in _parsed_chunks(path, dataset_format, workers):
        # lines after the one that fills the limit are not counted
        stop_at = chunk.n_lines
        for offset, timestamp_ms, content, label in chunk.rows:
            records.append(LogRecord(len(records), timestamp_ms, content, label))
            if limit is not None and len(records) >= limit:
                stop_at = offset + 1
                break
        for offset, message in chunk.errors:
            if offset < stop_at:
                logger.warning(f"Skipping malformed line: {message}")
        malformed += bisect_left(chunk.bad_offsets, stop_at)
        lines_read += stop_at
        if limit is not None and len(records) >= limit:
            break

    if not records:
        raise EmptyDataset(f"no valid records in {path}")

    dataset = LogDataset(
        records, name=dataset_format.name, malformed=malformed, lines_read=lines_read
    )
    logger.info(
        f"Loaded {len(dataset)} records ({malformed} malformed lines skipped), "
        f"{dataset.abnormal_fraction():.2%} abnormal"
    )
    _check_abnormal_fraction(dataset)
    return dataset


def _check_abnormal_fraction(dataset: LogDataset) -> None:
    preset = config.DATASET_PRESETS.get(dataset.name)
    if preset is None or preset.abnormal_fraction is None:
        return
    if len(dataset) != preset.full_size:
        return
    drift = abs(dataset.abnormal_fraction() - preset.abnormal_fraction)
    if drift > config.ABNORMAL_FRACTION_TOLERANCE:
        logger.warning(
            f"Abnormal fraction {dataset.abnormal_fraction():.4f} differs from the "
            f"expected {preset.abnormal_fraction:.4f} for {dataset.name}; "
            f"check content_start_field_index and the label column"
        )


def load_failure_times(path: PathLike, unit: str = "milliseconds") -> List[int]:
    """Read failure timestamps (one per line) supplied by a monitoring system."""
    times: List[int] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                times.append(_parse_timestamp_ms(stripped, unit))
            except MalformedLine as e:
                logger.warning(f"Skipping failure time on line {lineno}: {e}")
    times.sort()
    logger.info(f"Loaded {len(times)} failure times from {path}")
    return times


def dump_records(records: Iterable[LogRecord], path: PathLike) -> None:
    """Write the normalized id/timestamp_ms/true_label/content TSV dump."""
    with open(path, "w", encoding="utf-8") as handle:
        for r in records:
            handle.write(f"{r.id}\t{r.timestamp_ms}\t{r.true_label or ''}\t{r.content}\n")


def load_records(path: PathLike, name: str = "") -> LogDataset:
    records: List[LogRecord] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            record_id, timestamp_ms, label, content = line.rstrip("\n").split("\t", 3)
            records.append(
                LogRecord(int(record_id), int(timestamp_ms), content, label or None)
            )
    if not records:
        raise EmptyDataset(f"no records in {path}")
    return LogDataset(records, name=name)


# Synthetic corpora

_SLOT = re.compile(r"\{(num|hex|node)\}")

BUNDLED_TEMPLATES = [
    "RAS KERNEL INFO instruction cache parity error corrected",
    "RAS KERNEL INFO generating core.{num}",
    "RAS KERNEL INFO {num} double-hummer alignment exceptions",
    "RAS KERNEL INFO CE sym {num}, at {hex}, mask {hex}",
    "RAS APP INFO ciod: generated {num} core files for program {node}",
    "RAS KERNEL INFO total of {num} ddr error(s) detected and corrected",
    "RAS MMCS INFO idoproxydb hit ASSERT condition: ASSERT expression=0",
    "RAS KERNEL INFO data TLB error interrupt",
    "RAS DISCOVERY INFO Node card VPD check: {node} node in processor card slot {num}",
    "RAS LINKCARD INFO MidplaneSwitchController performing bit sparing on {node}",
    "RAS KERNEL INFO shutdown complete",
    "RAS KERNEL INFO Kernel detected {num} integer alignment exceptions iar {hex}",
    "RAS KERNEL INFO program interrupt: fp cr update field",
    "RAS MONITOR INFO fan speed {num} rpm within limits on {node}",
    "RAS BGLMASTER INFO BGLMaster started on {node}",
    "RAS KERNEL INFO ciod: Message code {num} is not 3 or 4",
    "RAS KERNEL INFO L3 ecc status register: {hex}",
    "RAS CMCS INFO Starting SystemController on {node}",
    "RAS KERNEL FATAL data storage interrupt at {hex}",
    "RAS KERNEL FATAL machine check interrupt (bit={hex}): L2 dcache unit data parity",
]
BUNDLED_ANOMALY_TEMPLATES = BUNDLED_TEMPLATES[-2:]


def bundled_synthetic_spec(
    n_messages: int = 50_000,
    n_failures: int = 50,
    mean_rate_per_s: float = 1.0,
    seed: int = 0,
) -> SyntheticSpec:
    """The bundled 20-template corpus with two abnormal templates."""
    try:
        return SyntheticSpec(
            n_messages=n_messages,
            templates=BUNDLED_TEMPLATES,
            anomaly_templates=BUNDLED_ANOMALY_TEMPLATES,
            n_failures=n_failures,
            mean_rate_per_s=mean_rate_per_s,
            seed=seed,
        )
    except ValidationError as e:
        raise InvalidSpec(str(e))


def _fill_template(template: str, rng: np.random.Generator) -> str:
    def _value(match: "re.Match[str]") -> str:
        kind = match.group(1)
        if kind == "num":
            return str(int(rng.integers(0, 100_000)))
        if kind == "hex":
            return f"0x{int(rng.integers(0, 2**32)):08x}"
        return (
            f"R{int(rng.integers(0, 64)):02d}-M{int(rng.integers(0, 2))}"
            f"-N{int(rng.integers(0, 16))}"
        )

    return _SLOT.sub(_value, template)


def generate_synthetic(spec: SyntheticSpec) -> Tuple[LogDataset, List[int]]:
    """Generate a labeled corpus and its failure timestamps, deterministic in seed.

    Normal messages form a Poisson stream at ``mean_rate_per_s``; each failure
    places one abnormal-template message at a uniformly drawn time in the span.
    """
    if not isinstance(spec, SyntheticSpec):
        try:
            spec = SyntheticSpec.model_validate(spec)
        except ValidationError as e:
            raise InvalidSpec(str(e))

    rng = np.random.default_rng(spec.seed)
    n_normal = spec.n_messages - spec.n_failures
    mean_gap_ms = 1000.0 / spec.mean_rate_per_s

    gaps = rng.exponential(mean_gap_ms, size=n_normal)
    normal_ts = spec.start_ms + np.floor(np.cumsum(gaps)).astype(np.int64)
    if n_normal:
        span_end = int(normal_ts[-1])
    else:
        span_end = spec.start_ms + int(spec.n_failures * mean_gap_ms)
    failure_ts = np.sort(
        rng.integers(spec.start_ms, span_end + 1, size=spec.n_failures)
    ).astype(np.int64)

    normal_templates = spec.normal_templates
    normal_choice = rng.integers(0, max(len(normal_templates), 1), size=n_normal)
    anomaly_choice = rng.integers(
        0, max(len(spec.anomaly_templates), 1), size=spec.n_failures
    )
    contents = [_fill_template(normal_templates[i], rng) for i in normal_choice]
    contents += [_fill_template(spec.anomaly_templates[i], rng) for i in anomaly_choice]

    timestamps = np.concatenate([normal_ts, failure_ts])
    is_abnormal = np.concatenate(
        [np.zeros(n_normal, dtype=bool), np.ones(spec.n_failures, dtype=bool)]
    )
    # sort by time, normal first on ties
    order = np.lexsort((is_abnormal, timestamps))

    records = [
        LogRecord(
            id=new_id,
            timestamp_ms=int(timestamps[old]),
            content=contents[old],
            true_label=ABNORMAL if is_abnormal[old] else NORMAL,
        )
        for new_id, old in enumerate(order)
    ]
    logger.info(
        f"Generated {len(records)} synthetic records with {spec.n_failures} failures"
    )
    return LogDataset(records, name="synthetic"), [int(t) for t in failure_ts]
