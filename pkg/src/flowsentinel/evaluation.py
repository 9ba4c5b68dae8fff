"""Metrics, ROC/AUC, model comparison, and report files.

Conventions. Zero-denominator precision/recall are defined as 0 so every
report stays total. Multiclass AUC is the unweighted (macro) mean of
one-vs-rest AUCs over the classes present in the truth labels. Execution
time is fit time plus full-test-set prediction time, with prediction
averaged over a repeat count. Exports are deterministic: sorted keys,
fixed decimal formatting, stable row order.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (DegenerateClassError, EmptyDatasetError, EmptyMatrixError,
                     IoFailureError, LabelOutOfRangeError, LengthMismatchError,
                     NotLabeledError)
from .flowdata import CLASS_COUNT, CLASS_NAMES, Dataset
from .learn import TrainedModel, predict_proba_matrix


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[t][p] = how many records of true class t were predicted p."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (CLASS_COUNT, CLASS_COUNT) or (c < 0).any():
            raise ValueError("confusion matrix must be 4x4 non-negative counts")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float


@dataclass(frozen=True)
class RocCurve:
    """One-vs-rest curve; points run from (0,0) to (1,1), tied scores
    collapse into single diagonal segments."""

    positive_class: int
    points: np.ndarray  # (m, 2) of (fpr, tpr)
    auc: float


@dataclass(frozen=True)
class EvalReport:
    kind: str
    seed: int
    model_id: str
    converged: bool
    confusion: ConfusionMatrix
    metrics: ClassMetrics
    roc_curves: dict
    macro_auc: float
    fit_seconds: float
    predict_seconds: float
    execution_seconds: float
    repeats: int
    dataset: dict


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple
    reports: tuple


def confusion_matrix(truth, predicted) -> ConfusionMatrix:
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    p = np.asarray(predicted, dtype=np.int64).reshape(-1)
    if t.shape[0] != p.shape[0] or t.shape[0] == 0:
        raise LengthMismatchError(
            f"need equal non-empty label arrays, got {t.shape[0]} and {p.shape[0]}")
    for name, arr in (("truth", t), ("predicted", p)):
        if arr.min() < 0 or arr.max() >= CLASS_COUNT:
            raise LabelOutOfRangeError(f"{name} labels must lie in [0, {CLASS_COUNT - 1}]")
    counts = np.bincount(t * CLASS_COUNT + p, minlength=CLASS_COUNT * CLASS_COUNT)
    return ConfusionMatrix(counts.reshape(CLASS_COUNT, CLASS_COUNT))


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyMatrixError("confusion matrix has no records")
    diag = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    precision = np.where(col > 0, diag / np.where(col > 0, col, 1.0), 0.0)
    recall = np.where(row > 0, diag / np.where(row > 0, row, 1.0), 0.0)
    # harmonic mean in simplified form: one exact-integer division, so the
    # result is the correctly rounded value of the underlying rational
    support = row + col
    f1 = np.where(support > 0, 2.0 * diag / np.where(support > 0, support, 1.0), 0.0)
    accuracy = float(diag.sum() / total)
    return ClassMetrics(precision=precision, recall=recall, f1=f1, accuracy=accuracy)


def roc_curve(truth, scores, positive_class: int) -> RocCurve:
    """Sweep thresholds over descending positive-class scores; tied scores
    are processed as one block so the curve walks a single diagonal."""
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim == 2:
        s = s[:, positive_class]
    if t.shape[0] != s.shape[0]:
        raise LengthMismatchError("truth and scores lengths differ")
    pos = t == positive_class
    n_pos = int(pos.sum())
    n_neg = t.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassError(
            positive_class,
            f"class {positive_class} needs at least one positive and one negative")

    order = np.argsort(-s, kind="stable")
    sorted_scores = s[order]
    sorted_pos = pos[order].astype(np.int64)
    block_ends = np.flatnonzero(
        np.concatenate([sorted_scores[1:] != sorted_scores[:-1], [True]]))
    tp = np.cumsum(sorted_pos)[block_ends]
    fp = (block_ends + 1) - tp
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(positive_class=positive_class,
                    points=np.column_stack([fpr, tpr]), auc=auc)


def macro_auc(truth, scores) -> float:
    """Unweighted mean of one-vs-rest AUCs over classes present in truth."""
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    present = np.unique(t)
    if present.shape[0] < 2:
        raise DegenerateClassError(
            int(present[0]) if present.shape[0] else -1,
            "macro AUC needs at least two classes present")
    return float(np.mean([roc_curve(t, scores, int(c)).auc for c in present]))


def evaluate(m: TrainedModel, test: Dataset, *, repeats: int = 3,
             dataset: dict | None = None) -> EvalReport:
    """Score a model on a labeled test set, timing prediction over
    `repeats` passes."""
    if len(test) == 0:
        raise EmptyDatasetError("cannot evaluate on an empty test set")
    if not test.labeled:
        raise NotLabeledError("evaluation requires labeled data")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")

    durations = []
    proba = None
    for _ in range(repeats):
        started = time.perf_counter()
        proba = predict_proba_matrix(m, test.X)
        durations.append(time.perf_counter() - started)
    predicted = proba.argmax(axis=1)

    cm = confusion_matrix(test.y, predicted)
    metrics = class_metrics(cm)
    curves = {}
    for c in np.unique(test.y):
        c = int(c)
        if 0 < int((test.y == c).sum()) < len(test):
            curves[c] = roc_curve(test.y, proba, c)
    if len(curves) < 2:
        raise DegenerateClassError(int(test.y[0]),
                                   "test set must contain at least two classes")
    macro = float(np.mean([curves[c].auc for c in sorted(curves)]))

    predict_seconds = float(np.mean(durations))
    info = dict(dataset or {})
    info.setdefault("test_counts", [int(v) for v in test.class_counts()])
    info.setdefault("test_rows", len(test))
    return EvalReport(
        kind=m.spec.kind,
        seed=m.spec.seed,
        model_id=m.model_id,
        converged=m.converged,
        confusion=cm,
        metrics=metrics,
        roc_curves=curves,
        macro_auc=macro,
        fit_seconds=m.fit_seconds,
        predict_seconds=predict_seconds,
        execution_seconds=m.fit_seconds + predict_seconds,
        repeats=repeats,
        dataset=info,
    )


def compare_models(reports) -> ComparisonTable:
    """Rank reports by accuracy, then macro AUC, then kind name."""
    reports = list(reports)
    if not reports:
        raise ValueError("compare_models needs at least one report")
    ranked = sorted(reports,
                    key=lambda r: (-r.metrics.accuracy, -r.macro_auc, r.kind))
    rows = tuple(
        {
            "kind": r.kind,
            "accuracy": r.metrics.accuracy,
            "macro_auc": r.macro_auc,
            "fit_seconds": r.fit_seconds,
            "predict_seconds": r.predict_seconds,
            "execution_seconds": r.execution_seconds,
        }
        for r in ranked
    )
    return ComparisonTable(rows=rows, reports=tuple(ranked))


def _fmt(x: float, places: int) -> str:
    return f"{float(x):.{places}f}"


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def _report_json(r: EvalReport, include_timing: bool) -> dict:
    body = {
        "kind": r.kind,
        "seed": r.seed,
        "model_id": r.model_id,
        "converged": r.converged,
        "accuracy": r.metrics.accuracy,
        "macro_auc": r.macro_auc,
        "per_class": {
            CLASS_NAMES[c]: {
                "precision": float(r.metrics.precision[c]),
                "recall": float(r.metrics.recall[c]),
                "f1": float(r.metrics.f1[c]),
                "auc": float(r.roc_curves[c].auc) if c in r.roc_curves else None,
            }
            for c in range(CLASS_COUNT)
        },
        "confusion": [[int(v) for v in row] for row in r.confusion.counts],
        "dataset": r.dataset,
        "repeats": r.repeats,
    }
    if include_timing:
        body["fit_seconds"] = r.fit_seconds
        body["predict_seconds"] = r.predict_seconds
        body["execution_seconds"] = r.execution_seconds
    return body


def _export_eval_report(r: EvalReport, out: Path, include_timing: bool) -> list:
    tag = r.kind.lower()
    written = []

    lines = ["true\\predicted," + ",".join(CLASS_NAMES)]
    for c in range(CLASS_COUNT):
        lines.append(CLASS_NAMES[c] + "," + ",".join(str(int(v)) for v in r.confusion.counts[c]))
    path = out / f"confusion_{tag}.csv"
    _write_text(path, "\n".join(lines) + "\n")
    written.append(path)

    lines = ["class,precision,recall,f1"]
    for c in range(CLASS_COUNT):
        lines.append(",".join([CLASS_NAMES[c], _fmt(r.metrics.precision[c], 4),
                               _fmt(r.metrics.recall[c], 4), _fmt(r.metrics.f1[c], 4)]))
    lines.append(f"accuracy,{_fmt(r.metrics.accuracy, 4)},,")
    path = out / f"metrics_{tag}.csv"
    _write_text(path, "\n".join(lines) + "\n")
    written.append(path)

    # 2-decimal per-class view mirroring the published table formatting
    lines = ["class,precision,recall,f1"]
    for c in range(CLASS_COUNT):
        lines.append(",".join([str(c), _fmt(r.metrics.precision[c], 2),
                               _fmt(r.metrics.recall[c], 2), _fmt(r.metrics.f1[c], 2)]))
    path = out / f"metrics_2dp_{tag}.csv"
    _write_text(path, "\n".join(lines) + "\n")
    written.append(path)

    for c in sorted(r.roc_curves):
        curve = r.roc_curves[c]
        lines = ["fpr,tpr"]
        for x, y in curve.points:
            lines.append(f"{x!r},{y!r}")
        path = out / f"roc_{tag}_class{c}.csv"
        _write_text(path, "\n".join(lines) + "\n")
        written.append(path)

    path = out / f"report_{tag}.json"
    _write_text(path, json.dumps(_report_json(r, include_timing), sort_keys=True, indent=2) + "\n")
    written.append(path)
    return written


def _export_comparison(table: ComparisonTable, out: Path, include_timing: bool) -> list:
    written = []
    header = "kind,accuracy,macro_auc"
    if include_timing:
        header += ",execution_time_s"
    lines = [header]
    for row in table.rows:
        cells = [row["kind"], _fmt(row["accuracy"], 4), _fmt(row["macro_auc"], 4)]
        if include_timing:
            cells.append(_fmt(row["execution_seconds"], 4))
        lines.append(",".join(cells))
    path = out / "comparison.csv"
    _write_text(path, "\n".join(lines) + "\n")
    written.append(path)

    lines = ["kind,accuracy"]
    for row in table.rows:
        lines.append(f"{row['kind']},{_fmt(row['accuracy'], 4)}")
    path = out / "accuracy_bars.csv"
    _write_text(path, "\n".join(lines) + "\n")
    written.append(path)

    for r in table.reports:
        written.extend(_export_eval_report(r, out, include_timing))
    return written


def export_report(obj, out_dir, *, include_timing: bool = True,
                  correlation=None, label_counts=None) -> list:
    """Write the machine-readable files behind every figure and table.

    Accepts an EvalReport or a ComparisonTable; optionally also writes
    label-count (count-plot) data and a correlation matrix. Returns the
    written paths. Output is byte-identical across re-exports of the
    same inputs.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailureError(f"cannot create {out}: {exc}") from exc

    if isinstance(obj, EvalReport):
        written = _export_eval_report(obj, out, include_timing)
    elif isinstance(obj, ComparisonTable):
        written = _export_comparison(obj, out, include_timing)
    else:
        raise TypeError("export_report accepts an EvalReport or a ComparisonTable")

    if label_counts is not None:
        lines = ["class,count"]
        for c in range(CLASS_COUNT):
            lines.append(f"{CLASS_NAMES[c]},{int(label_counts[c])}")
        path = out / "label_counts.csv"
        _write_text(path, "\n".join(lines) + "\n")
        written.append(path)

    if correlation is not None:
        matrix = getattr(correlation, "matrix", correlation)
        names = getattr(getattr(correlation, "schema", None), "names", None)
        if names is None:
            names = [f"f{i}" for i in range(np.asarray(matrix).shape[0])]
        lines = ["feature," + ",".join(names)]
        for i, name in enumerate(names):
            lines.append(name + "," + ",".join(repr(float(v)) for v in np.asarray(matrix)[i]))
        path = out / "correlation_matrix.csv"
        _write_text(path, "\n".join(lines) + "\n")
        written.append(path)
    return written
