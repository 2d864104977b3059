"""Scoring suite: accuracy, per-class/macro/weighted P/R/F1, and ROC-AUC.

Malware is the positive class. Undefined 0/0 precision or recall is
reported as 0.0 with a warning flag, which is how a predictor that never
flags malware ends up with malware precision 0.00 rather than NaN.
ROC-AUC uses the rank statistic (ties get half credit), equivalent to
trapezoidal integration of the ROC curve.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyPredictions, MissingScores, SingleClassOnly
from .labels import Label

PREDICTIONS_HEADER = ("sample_id", "true", "pred", "score")


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    true_label: Label
    predicted_label: Label
    score_malware: float | None = None

    def __post_init__(self):
        if self.score_malware is not None and not (0.0 <= self.score_malware <= 1.0):
            raise ValueError(f"score_malware must lie in [0, 1], got {self.score_malware}")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    per_class: dict[Label, ClassMetrics]
    macro: ClassMetrics
    weighted: ClassMetrics
    roc_auc: float | None
    n: int
    confusion: ConfusionMatrix
    warnings: tuple[str, ...]


def confusion(predictions: list[PredictionRecord]) -> ConfusionMatrix:
    if not predictions:
        raise EmptyPredictions("no predictions to score")
    tp = fp = tn = fn = 0
    for p in predictions:
        if p.predicted_label is Label.MALWARE:
            if p.true_label is Label.MALWARE:
                tp += 1
            else:
                fp += 1
        else:
            if p.true_label is Label.MALWARE:
                fn += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def _safe_div(num: int, den: int, warnings: list[str], what: str) -> float:
    if den == 0:
        warnings.append(f"{what} is 0/0, reported as 0.0")
        return 0.0
    return num / den


def _class_metrics(tp: int, fp: int, fn: int, support: int, name: str, warnings: list[str]) -> ClassMetrics:
    precision = _safe_div(tp, tp + fp, warnings, f"{name} precision")
    recall = _safe_div(tp, tp + fn, warnings, f"{name} recall")
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return ClassMetrics(precision=precision, recall=recall, f1=f1, support=support)


def report(predictions: list[PredictionRecord]) -> MetricsReport:
    """Aggregate one prediction set into the full metric table.

    ROC-AUC is included only when every record carries a score and both
    classes are present; otherwise the field is None.
    """
    cm = confusion(predictions)
    warnings: list[str] = []
    n = cm.total

    malware = _class_metrics(cm.tp, cm.fp, cm.fn, cm.tp + cm.fn, "malware", warnings)
    benign = _class_metrics(cm.tn, cm.fn, cm.fp, cm.tn + cm.fp, "benign", warnings)
    per_class = {Label.BENIGN: benign, Label.MALWARE: malware}

    macro = ClassMetrics(
        precision=(benign.precision + malware.precision) / 2,
        recall=(benign.recall + malware.recall) / 2,
        f1=(benign.f1 + malware.f1) / 2,
        support=n,
    )
    weighted = ClassMetrics(
        precision=(benign.support * benign.precision + malware.support * malware.precision) / n,
        recall=(benign.support * benign.recall + malware.support * malware.recall) / n,
        f1=(benign.support * benign.f1 + malware.support * malware.f1) / n,
        support=n,
    )

    auc = None
    if all(p.score_malware is not None for p in predictions):
        try:
            auc = roc_auc(predictions)
        except SingleClassOnly:
            warnings.append("ROC-AUC undefined: only one class present")

    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / n,
        per_class=per_class,
        macro=macro,
        weighted=weighted,
        roc_auc=auc,
        n=n,
        confusion=cm,
        warnings=tuple(warnings),
    )


def roc_auc(predictions: list[PredictionRecord]) -> float:
    """Rank-statistic AUC: P(score of random positive > random negative),
    ties counted half."""
    if not predictions:
        raise EmptyPredictions("no predictions to score")
    if any(p.score_malware is None for p in predictions):
        raise MissingScores("every prediction needs a score_malware for ROC-AUC")
    n_pos = sum(1 for p in predictions if p.true_label is Label.MALWARE)
    n_neg = len(predictions) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassOnly(f"need both classes for ROC-AUC ({n_pos} positive, {n_neg} negative)")

    indexed = sorted(range(len(predictions)), key=lambda i: predictions[i].score_malware)
    ranks = [0.0] * len(predictions)
    i = 0
    while i < len(indexed):
        j = i
        while (
            j + 1 < len(indexed)
            and predictions[indexed[j + 1]].score_malware == predictions[indexed[i]].score_malware
        ):
            j += 1
        mean_rank = (i + j) / 2 + 1  # 1-based average rank across the tie group
        for k in range(i, j + 1):
            ranks[indexed[k]] = mean_rank
        i = j + 1

    rank_sum_pos = sum(ranks[i] for i, p in enumerate(predictions) if p.true_label is Label.MALWARE)
    u_statistic = rank_sum_pos - n_pos * (n_pos + 1) / 2
    return u_statistic / (n_pos * n_neg)


# -- prediction file I/O ---------------------------------------------------------

def write_predictions(records: list[PredictionRecord], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PREDICTIONS_HEADER)
        for r in records:
            score = "" if r.score_malware is None else f"{r.score_malware:.10g}"
            writer.writerow([r.sample_id, r.true_label.value, r.predicted_label.value, score])
    return path


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as handle:
        for row_num, row in enumerate(csv.reader(handle), start=1):
            if not row:
                continue
            if row_num == 1 and tuple(cell.strip().lower() for cell in row) == PREDICTIONS_HEADER:
                continue
            if len(row) not in (3, 4):
                raise ValueError(f"{path}:{row_num}: expected sample_id,true,pred[,score]")
            score = None
            if len(row) == 4 and row[3].strip():
                score = float(row[3])
            records.append(
                PredictionRecord(
                    sample_id=row[0].strip(),
                    true_label=Label.parse(row[1]),
                    predicted_label=Label.parse(row[2]),
                    score_malware=score,
                )
            )
    return records


# -- rendering -------------------------------------------------------------------

def _fmt(value: float | None) -> str:
    return "." if value is None else f"{value:.4f}"


def render_table(rep: MetricsReport) -> str:
    """Human-readable table with the usual column set."""
    rows = [
        ("", "Accuracy", "Precision", "Recall", "F1-Score", "ROC AUC"),
        (
            "benign",
            ".",
            _fmt(rep.per_class[Label.BENIGN].precision),
            _fmt(rep.per_class[Label.BENIGN].recall),
            _fmt(rep.per_class[Label.BENIGN].f1),
            ".",
        ),
        (
            "malware",
            ".",
            _fmt(rep.per_class[Label.MALWARE].precision),
            _fmt(rep.per_class[Label.MALWARE].recall),
            _fmt(rep.per_class[Label.MALWARE].f1),
            ".",
        ),
        (
            "macro",
            _fmt(rep.accuracy),
            _fmt(rep.macro.precision),
            _fmt(rep.macro.recall),
            _fmt(rep.macro.f1),
            _fmt(rep.roc_auc),
        ),
        (
            "weighted",
            _fmt(rep.accuracy),
            _fmt(rep.weighted.precision),
            _fmt(rep.weighted.recall),
            _fmt(rep.weighted.f1),
            _fmt(rep.roc_auc),
        ),
    ]
    widths = [max(len(row[col]) for row in rows) for col in range(6)]
    lines = ["  ".join(cell.ljust(widths[col]) for col, cell in enumerate(row)).rstrip() for row in rows]
    lines.append(f"n = {rep.n}")
    for warning in rep.warnings:
        lines.append(f"note: {warning}")
    return "\n".join(lines)


def report_to_dict(rep: MetricsReport) -> dict:
    """Machine-readable report; values rounded to 4 decimals."""

    def r4(v: float | None) -> float | None:
        return None if v is None else round(v, 4)

    def cls(c: ClassMetrics) -> dict:
        return {"precision": r4(c.precision), "recall": r4(c.recall), "f1": r4(c.f1), "support": c.support}

    return {
        "n": rep.n,
        "accuracy": r4(rep.accuracy),
        "per_class": {label.value: cls(c) for label, c in rep.per_class.items()},
        "macro": cls(rep.macro),
        "weighted": cls(rep.weighted),
        "roc_auc": r4(rep.roc_auc),
        "confusion": {"tp": rep.confusion.tp, "fp": rep.confusion.fp, "tn": rep.confusion.tn, "fn": rep.confusion.fn},
        "warnings": list(rep.warnings),
    }
