"""Multi-label metrics, per-class reports, collapsed confusion matrices,
and aggregation over repeated runs.

Headline scores are micro-averaged: true positives and label counts are
pooled over all documents and classes before the F1 is formed. Macro-F1
(mean of per-class F1 over classes present in gold or predictions) is
reported alongside for transparency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .taxonomy import MAIN_ORDER, Taxonomy, default_taxonomy

HYBRID_CLASS = "HYB"
EMPTY_CLASS = "∅"
CONFUSION_CLASSES = (*MAIN_ORDER, HYBRID_CLASS, EMPTY_CLASS)

LabelSets = Sequence[frozenset[str]]


def _check_aligned(gold: LabelSets, pred: LabelSets) -> None:
    if len(gold) != len(pred):
        raise ValueError(
            f"gold and predictions must align: {len(gold)} != {len(pred)} documents"
        )


def micro_counts(gold: LabelSets, pred: LabelSets) -> tuple[int, int, int]:
    """(matched labels, total predicted labels, total gold labels)."""
    _check_aligned(gold, pred)
    tp = sum(len(g & p) for g, p in zip(gold, pred))
    n_pred = sum(len(p) for p in pred)
    n_gold = sum(len(g) for g in gold)
    return tp, n_pred, n_gold


def micro_f1(gold: LabelSets, pred: LabelSets) -> float:
    tp, n_pred, n_gold = micro_counts(gold, pred)
    if n_pred + n_gold == 0:
        return 1.0
    return 2 * tp / (n_pred + n_gold)


def micro_prf(gold: LabelSets, pred: LabelSets) -> tuple[float, float, float]:
    tp, n_pred, n_gold = micro_counts(gold, pred)
    if n_pred + n_gold == 0:
        return 1.0, 1.0, 1.0
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = 2 * tp / (n_pred + n_gold)
    return precision, recall, f1


@dataclass(frozen=True)
class PerClass:
    code: str
    f1: float
    precision: float
    recall: float
    support: int  # gold occurrences
    predicted: int  # predicted occurrences
    present: bool  # occurs in gold or predictions; absent classes sit out of macro


@dataclass(frozen=True)
class EvalReport:
    n_docs: int
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_f1: float
    per_class: tuple[PerClass, ...]

    def class_report(self, code: str) -> PerClass:
        for entry in self.per_class:
            if entry.code == code:
                return entry
        raise KeyError(code)

    def metrics(self) -> dict[str, float]:
        out = {
            "micro_f1": self.micro_f1,
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "macro_f1": self.macro_f1,
        }
        for entry in self.per_class:
            out[f"f1_{entry.code}"] = entry.f1
        return out

    def as_text(self) -> str:
        lines = [
            f"documents: {self.n_docs}",
            f"micro-F1: {100 * self.micro_f1:.2f}%  "
            f"(P {100 * self.micro_precision:.2f}%, R {100 * self.micro_recall:.2f}%)",
            f"macro-F1: {100 * self.macro_f1:.2f}%",
            f"{'class':<6}{'F1':>9}{'P':>9}{'R':>9}{'support':>9}",
        ]
        for entry in self.per_class:
            if entry.present:
                lines.append(
                    f"{entry.code:<6}{100 * entry.f1:>8.2f}%{100 * entry.precision:>8.2f}%"
                    f"{100 * entry.recall:>8.2f}%{entry.support:>9}"
                )
            else:
                lines.append(f"{entry.code:<6}{'-':>9}{'-':>9}{'-':>9}{entry.support:>9}")
        return "\n".join(lines)

    def as_tsv_rows(self) -> list[tuple[str, ...]]:
        rows = [("metric", "value")]
        for name, value in self.metrics().items():
            rows.append((name, f"{value:.6f}"))
        rows.append(("n_docs", str(self.n_docs)))
        return rows


def per_class_f1(
    gold: LabelSets, pred: LabelSets, taxonomy: Taxonomy | None = None
) -> tuple[PerClass, ...]:
    """One-vs-rest scores per main register.

    A class that occurs in gold or predictions but scores no matches gets
    F1 = 0; a class absent from both is reported with support 0 and marked
    not present (it does not enter the macro average).
    """
    taxonomy = taxonomy or default_taxonomy()
    _check_aligned(gold, pred)
    out = []
    for code in taxonomy.label_order:
        tp = sum(1 for g, p in zip(gold, pred) if code in g and code in p)
        support = sum(1 for g in gold if code in g)
        predicted = sum(1 for p in pred if code in p)
        present = (support + predicted) > 0
        f1 = 2 * tp / (support + predicted) if present else 0.0
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        out.append(
            PerClass(
                code=code,
                f1=f1,
                precision=precision,
                recall=recall,
                support=support,
                predicted=predicted,
                present=present,
            )
        )
    return tuple(out)


def evaluate(
    gold: LabelSets, pred: LabelSets, taxonomy: Taxonomy | None = None
) -> EvalReport:
    taxonomy = taxonomy or default_taxonomy()
    precision, recall, f1 = micro_prf(gold, pred)
    per_class = per_class_f1(gold, pred, taxonomy)
    present = [entry.f1 for entry in per_class if entry.present]
    macro = sum(present) / len(present) if present else 0.0
    return EvalReport(
        n_docs=len(gold),
        micro_precision=precision,
        micro_recall=recall,
        micro_f1=f1,
        macro_f1=macro,
        per_class=per_class,
    )


# --- collapsed confusion matrices ----------------------------------------


def collapse_class(labels: frozenset[str]) -> str:
    """Single class id for a main-level label set: the register itself for
    single labels, HYB for two or more, the empty symbol for none."""
    if len(labels) == 0:
        return EMPTY_CLASS
    if len(labels) >= 2:
        return HYBRID_CLASS
    return next(iter(labels))


@dataclass
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: list[list[int]]  # [observed][predicted]
    proportions: list[list[float]]  # rows normalized; zero rows stay zero

    def row(self, observed: str) -> list[float]:
        return self.proportions[self.classes.index(observed)]

    def cell(self, observed: str, predicted: str) -> float:
        return self.proportions[self.classes.index(observed)][
            self.classes.index(predicted)
        ]

    def as_tsv_rows(self) -> list[tuple[str, ...]]:
        rows = [("observed\\predicted", *self.classes)]
        for name, row in zip(self.classes, self.counts):
            rows.append((name, *[str(c) for c in row]))
        rows.append(("#proportions", *[""] * len(self.classes)))
        for name, row in zip(self.classes, self.proportions):
            rows.append((name, *[f"{p:.4f}" for p in row]))
        return rows


def confusion(gold: LabelSets, pred: LabelSets) -> ConfusionMatrix:
    """Counts of collapsed observed classes (rows) vs collapsed predicted
    classes (columns), plus row-normalized proportions."""
    _check_aligned(gold, pred)
    index = {name: i for i, name in enumerate(CONFUSION_CLASSES)}
    n = len(CONFUSION_CLASSES)
    counts = [[0] * n for _ in range(n)]
    for g, p in zip(gold, pred):
        counts[index[collapse_class(g)]][index[collapse_class(p)]] += 1
    proportions = []
    for row in counts:
        total = sum(row)
        proportions.append([c / total for c in row] if total else [0.0] * n)
    return ConfusionMatrix(
        classes=CONFUSION_CLASSES, counts=counts, proportions=proportions
    )


# --- aggregation over repeated runs ---------------------------------------


@dataclass(frozen=True)
class RunAggregate:
    n_runs: int
    means: dict[str, float]
    stds: dict[str, float]

    def mean(self, metric: str) -> float:
        return self.means[metric]

    def std(self, metric: str) -> float:
        return self.stds[metric]

    def as_tsv_rows(self) -> list[tuple[str, ...]]:
        rows = [("metric", "mean", "std", "n")]
        for name in self.means:
            rows.append(
                (name, f"{self.means[name]:.6f}", f"{self.stds[name]:.6f}", str(self.n_runs))
            )
        return rows


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and sample standard deviation (N-1; 0 when N=1)."""
    n = len(values)
    if n == 0:
        raise ValueError("cannot aggregate zero values")
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate_runs(reports: Iterable[EvalReport]) -> RunAggregate:
    reports = list(reports)
    if not reports:
        raise ValueError("cannot aggregate zero reports")
    keys = reports[0].metrics().keys()
    means: dict[str, float] = {}
    stds: dict[str, float] = {}
    for key in keys:
        values = [r.metrics()[key] for r in reports]
        means[key], stds[key] = mean_std(values)
    return RunAggregate(n_runs=len(reports), means=means, stds=stds)


def write_tsv(path, rows: list[tuple[str, ...]]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")
