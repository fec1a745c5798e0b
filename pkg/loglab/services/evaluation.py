"""
Thresholding of anomaly scores and precision/recall/F1 against ground truth.
"""

import json
import logging
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional, Sequence, Union

import numpy as np

from ..core.exceptions import LengthMismatch
from ..core.schemas import EvalReport, SweepResult
from .ingestion import ABNORMAL, NORMAL
from .model import ScoreTable

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ScoresLike = Union[ScoreTable, Sequence[float], np.ndarray]
LabelsLike = Union[Sequence[str], Sequence[bool], np.ndarray]


def _score_array(scores: ScoresLike) -> np.ndarray:
    if isinstance(scores, ScoreTable):
        return scores.scores
    if len(scores) and hasattr(scores[0], "score"):
        return np.asarray([s.score for s in scores], dtype=np.float64)
    return np.asarray(scores, dtype=np.float64)


def _label_array(labels: LabelsLike) -> np.ndarray:
    """Boolean abnormal mask from label names or booleans."""
    array = np.asarray(labels)
    if array.dtype == bool:
        return array
    if array.size == 0:
        return np.zeros(array.shape, dtype=bool)
    if array.dtype.kind in "iuf":
        return array.astype(bool)
    abnormal = array == ABNORMAL
    known = abnormal | (array == NORMAL)
    if not known.all():
        raise ValueError(f"unknown or missing label {array[~known].flat[0]!r}")
    return abnormal


def apply_threshold(scores: ScoresLike, threshold: float) -> np.ndarray:
    """Abnormal (True) iff score >= threshold."""
    if threshold <= 0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    return _score_array(scores) >= threshold


def label_names(predicted: np.ndarray) -> List[str]:
    return [ABNORMAL if p else NORMAL for p in predicted]


def _safe_ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


def evaluate(
    predicted: LabelsLike,
    truth: LabelsLike,
    threshold: Optional[float] = None,
    delta_ms: Optional[int] = None,
    dataset: str = "",
) -> EvalReport:
    """Confusion counts and metrics, abnormal as the positive class."""
    pred = _label_array(predicted)
    true = _label_array(truth)
    if pred.shape != true.shape:
        raise LengthMismatch(
            f"{pred.size} predictions but {true.size} ground-truth labels"
        )

    tp = int(np.count_nonzero(pred & true))
    fp = int(np.count_nonzero(pred & ~true))
    fn = int(np.count_nonzero(~pred & true))
    tn = int(pred.size - tp - fp - fn)
    precision = _safe_ratio(tp, tp + fp)
    recall = _safe_ratio(tp, tp + fn)
    f1 = (
        2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    )
    return EvalReport(
        dataset=dataset,
        delta_ms=delta_ms,
        threshold=threshold,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        precision=precision,
        recall=recall,
        f1=f1,
    )


def sweep_report(
    scores: ScoresLike,
    truth: LabelsLike,
    thresholds: Iterable[float],
    delta_ms: Optional[int] = None,
    dataset: str = "",
) -> SweepResult:
    """One report per threshold plus the best F1 over the sweep."""
    thresholds = list(thresholds)
    if not thresholds:
        raise ValueError("at least one threshold is required")
    if any(t <= 0 for t in thresholds):
        raise ValueError("thresholds must be positive")
    if thresholds != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")

    score_array = _score_array(scores)
    reports = [
        evaluate(
            apply_threshold(score_array, t),
            truth,
            threshold=t,
            delta_ms=delta_ms,
            dataset=dataset,
        )
        for t in thresholds
    ]
    best = max(reports, key=lambda r: r.f1)
    return SweepResult(reports=reports, best=best)


def sweep_thresholds(base: float, factors: Sequence[float]) -> List[float]:
    """Sorted, de-duplicated multiples of ``base``."""
    return sorted({base * f for f in factors})


# Report output


def write_report(
    report: EvalReport,
    json_path: PathLike,
    text_path: PathLike,
    sweep: Optional[SweepResult] = None,
) -> None:
    Path(json_path).write_text(
        report.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
    text = format_report_table([report])
    if sweep is not None:
        text += "\n\nthreshold sweep\n" + format_report_table(sweep.reports)
        text += f"\nbest F1 {sweep.best.f1:.4f} at threshold {sweep.best.threshold:.4f}"
    Path(text_path).write_text(text + "\n", encoding="utf-8")


def read_report(path: PathLike) -> EvalReport:
    return EvalReport.model_validate_json(Path(path).read_text(encoding="utf-8"))


def write_sweep(result: SweepResult, path: PathLike) -> None:
    Path(path).write_text(result.model_dump_json(indent=2) + "\n", encoding="utf-8")


def format_report_table(reports: Sequence[EvalReport]) -> str:
    """Human-readable table, one row per report."""
    header = (
        f"{'dataset':<12} {'delta_ms':>9} {'threshold':>10} {'TP':>8} {'FP':>8} "
        f"{'TN':>10} {'FN':>8} {'precision':>9} {'recall':>9} {'F1':>9}"
    )
    lines = [header, "-" * len(header)]
    for r in reports:
        delta = "-" if r.delta_ms is None else str(r.delta_ms)
        threshold = "-" if r.threshold is None else f"{r.threshold:.4f}"
        lines.append(
            f"{r.dataset:<12} {delta:>9} {threshold:>10} {r.tp:>8} {r.fp:>8} "
            f"{r.tn:>10} {r.fn:>8} {r.precision:>9.4f} {r.recall:>9.4f} {r.f1:>9.4f}"
        )
    return "\n".join(lines)


class LabeledRow(NamedTuple):
    id: int
    timestamp_ms: int
    weak_label: str
    score: float
    predicted_label: str
    true_label: Optional[str]


def write_labeled(rows: Iterable[LabeledRow], path: PathLike) -> int:
    """Tab-separated labeled output, one record per line."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(
                f"{row.id}\t{row.timestamp_ms}\t{row.weak_label}\t"
                f"{float(row.score)!r}\t{row.predicted_label}\t{row.true_label or ''}\n"
            )
            count += 1
    return count


def read_labeled(path: PathLike) -> List[LabeledRow]:
    rows: List[LabeledRow] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 6:
                raise ValueError(f"expected 6 fields in {path}, got {len(fields)}")
            rows.append(
                LabeledRow(
                    id=int(fields[0]),
                    timestamp_ms=int(fields[1]),
                    weak_label=fields[2],
                    score=float(fields[3]),
                    predicted_label=fields[4],
                    true_label=fields[5] or None,
                )
            )
    return rows


def summarize_sweep(result: SweepResult) -> str:
    return json.dumps(
        {
            "best_threshold": result.best.threshold,
            "best_f1": round(result.best.f1, 6),
            "thresholds": [r.threshold for r in result.reports],
        }
    )
