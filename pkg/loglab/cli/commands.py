"""
Stage commands of the labeling pipeline.

Each command reads its inputs from and writes its artifacts to the run's output
directory, so ``cmd_run_all`` is exactly the four stage commands in sequence.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..core.config import config, delta_sweep_values, resolve_max_len
from ..core.exceptions import LogLabError
from ..core.schemas import EvalReport, RunConfig
from ..services.evaluation import (
    LabeledRow,
    apply_threshold,
    evaluate,
    format_report_table,
    label_names,
    read_labeled,
    sweep_report,
    sweep_thresholds,
    write_labeled,
    write_report,
    write_sweep,
)
from ..services.ingestion import (
    LogDataset,
    bundled_synthetic_spec,
    dump_records,
    generate_synthetic,
    load_dataset,
    load_failure_times,
    load_records,
)
from ..services.model import score_dataset
from ..services.objective import decision_threshold
from ..services.preprocessing import Vocabulary, build_vocabulary, tokenize
from ..services.training import (
    checkpoint,
    restore,
    summarize_log,
    train,
    write_training_log,
)
from ..services.weak_supervision import (
    assign_weak_labels,
    build_eval_partition,
    compute_q,
    dump_weak_labels,
    load_weak_labels,
)

logger = logging.getLogger(__name__)


def _out(run_config: RunConfig, name: str) -> Path:
    return Path(run_config.out_dir) / name


def _load_source(run_config: RunConfig) -> LogDataset:
    if run_config.format == "synthetic":
        spec = bundled_synthetic_spec(
            n_messages=run_config.synthetic_n_messages,
            n_failures=run_config.synthetic_n_failures,
            mean_rate_per_s=run_config.synthetic_rate,
            seed=run_config.seed,
        )
        records, _ = generate_synthetic(spec)
        return records
    preset = config.DATASET_PRESETS[run_config.format]
    return load_dataset(
        run_config.dataset,
        preset.format,
        limit=run_config.limit,
        workers=run_config.workers,
    )


def _load_prepared(run_config: RunConfig):
    records = load_records(_out(run_config, config.RECORDS_FILE), name=run_config.format)
    weak = load_weak_labels(
        records, _out(run_config, config.WEAK_LABELS_FILE), run_config.delta_ms
    )
    vocab = Vocabulary.load(_out(run_config, config.VOCAB_FILE))
    return records, weak, vocab


def cmd_prepare(run_config: RunConfig) -> Dict[str, Any]:
    """Normalize the dataset, build the weak partition and the vocabulary."""
    Path(run_config.out_dir).mkdir(parents=True, exist_ok=True)
    records = _load_source(run_config)

    if run_config.failure_times_path:
        failure_times = load_failure_times(
            run_config.failure_times_path, run_config.failure_unit
        )
        weak = assign_weak_labels(records, failure_times, run_config.delta_ms)
    else:
        weak = build_eval_partition(records, run_config.delta_ms)

    vocab = build_vocabulary(
        (tokenize(r.content) for r in records), min_freq=run_config.min_freq
    )

    dump_records(records, _out(run_config, config.RECORDS_FILE))
    dump_weak_labels(weak, _out(run_config, config.WEAK_LABELS_FILE))
    vocab.save(_out(run_config, config.VOCAB_FILE))

    summary = {
        "stage": "prepare",
        "records": len(records),
        "malformed_lines": records.malformed,
        "p": weak.n_p,
        "u": weak.n_u,
        "q": None if weak.is_degenerate else weak.q,
        "vocab_size": len(vocab),
    }
    logger.info(f"Prepare complete: {summary}")
    return summary


def cmd_train(run_config: RunConfig) -> Dict[str, Any]:
    """Train the scorer on the prepared partition and store the checkpoint."""
    _, weak, vocab = _load_prepared(run_config)
    model_config = run_config.to_model_config(len(vocab), resolve_max_len(run_config))
    model, log = train(weak, vocab, model_config, run_config.to_training_config())

    checkpoint(model, _out(run_config, config.CHECKPOINT_FILE))
    write_training_log(log, _out(run_config, config.TRAINING_LOG_FILE))

    summary = {
        "stage": "train",
        "epochs": len(log.epochs),
        "final_loss": log.epochs[-1].mean_loss,
        "log": summarize_log(log),
    }
    logger.info(f"Train complete: {summary['log']}")
    return summary


def cmd_label(
    run_config: RunConfig, checkpoint_path: Optional[Path] = None
) -> Dict[str, Any]:
    """Score every record and write the labeled output file."""
    records, weak, vocab = _load_prepared(run_config)
    model = restore(
        checkpoint_path or _out(run_config, config.CHECKPOINT_FILE),
        vocab_size=len(vocab),
    )
    table = score_dataset(records, vocab, model, run_config.eval_batch_size)

    threshold = (
        run_config.threshold
        if run_config.threshold is not None
        else decision_threshold(weak.q)
    )
    predicted = label_names(apply_threshold(table, threshold))
    rows = (
        LabeledRow(
            id=record.id,
            timestamp_ms=record.timestamp_ms,
            weak_label=weak.weak_label_name(i),
            score=float(table.scores[i]),
            predicted_label=predicted[i],
            true_label=record.true_label,
        )
        for i, record in enumerate(records)
    )
    written = write_labeled(rows, _out(run_config, config.LABELED_FILE))

    summary = {
        "stage": "label",
        "records": written,
        "threshold": threshold,
        "abnormal": predicted.count("abnormal"),
    }
    logger.info(f"Label complete: {summary}")
    return summary


def _threshold_from_rows(run_config: RunConfig, rows: List[LabeledRow]) -> float:
    if run_config.threshold is not None:
        return run_config.threshold
    n_u = sum(1 for row in rows if row.weak_label == "U")
    return decision_threshold(compute_q(len(rows) - n_u, n_u))


def cmd_evaluate(
    run_config: RunConfig, labeled_path: Optional[Path] = None
) -> Dict[str, Any]:
    """Compare the labeled file against ground truth and write the reports."""
    rows = read_labeled(labeled_path or _out(run_config, config.LABELED_FILE))
    if not rows:
        raise LogLabError("labeled file is empty")
    if any(row.true_label is None for row in rows):
        raise LogLabError("labeled file lacks ground-truth labels")

    truth = [row.true_label for row in rows]
    threshold = _threshold_from_rows(run_config, rows)
    report = evaluate(
        [row.predicted_label for row in rows],
        truth,
        threshold=threshold,
        delta_ms=run_config.delta_ms,
        dataset=run_config.format,
    )
    sweep = sweep_report(
        [row.score for row in rows],
        truth,
        sweep_thresholds(threshold, config.THRESHOLD_SWEEP_FACTORS),
        delta_ms=run_config.delta_ms,
        dataset=run_config.format,
    )

    write_report(
        report,
        _out(run_config, config.REPORT_JSON_FILE),
        _out(run_config, config.REPORT_TEXT_FILE),
        sweep=sweep,
    )
    write_sweep(sweep, _out(run_config, config.SWEEP_FILE))

    logger.info(
        f"Evaluation: precision={report.precision:.4f}, recall={report.recall:.4f}, "
        f"F1={report.f1:.4f} at threshold {threshold:.4f} "
        f"(best sweep F1={sweep.best.f1:.4f} at {sweep.best.threshold:.4f})"
    )
    return {
        "stage": "evaluate",
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "threshold": threshold,
        "best_f1": sweep.best.f1,
        "best_threshold": sweep.best.threshold,
    }


def cmd_run_all(run_config: RunConfig) -> Dict[str, Any]:
    """prepare -> train -> label -> evaluate."""
    logger.info(f"Starting full run into {run_config.out_dir}")
    return {
        "prepare": cmd_prepare(run_config),
        "train": cmd_train(run_config),
        "label": cmd_label(run_config),
        "evaluate": cmd_evaluate(run_config),
    }


def cmd_sweep_delta(run_config: RunConfig) -> Dict[str, Any]:
    """Full run per window half-width, each in its own sub-directory."""
    reports: List[EvalReport] = []
    results: Dict[str, Any] = {}
    for delta_ms in delta_sweep_values(run_config):
        sub_config = run_config.model_copy(
            update={
                "delta_ms": delta_ms,
                "out_dir": str(Path(run_config.out_dir) / f"delta_{delta_ms}"),
            }
        )
        results[str(delta_ms)] = cmd_run_all(sub_config)
        reports.append(
            EvalReport.model_validate_json(
                _out(sub_config, config.REPORT_JSON_FILE).read_text(encoding="utf-8")
            )
        )

    table = format_report_table(reports)
    Path(run_config.out_dir).mkdir(parents=True, exist_ok=True)
    _out(run_config, config.DELTA_SWEEP_FILE).write_text(table + "\n", encoding="utf-8")
    logger.info(f"Delta sweep complete:\n{table}")
    return {
        "stage": "sweep-delta",
        "f1": {str(r.delta_ms): r.f1 for r in reports},
        "runs": results,
    }


__all__ = [
    "cmd_evaluate",
    "cmd_label",
    "cmd_prepare",
    "cmd_run_all",
    "cmd_sweep_delta",
    "cmd_train",
]
