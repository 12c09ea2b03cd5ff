"""Confusion accounting and scoring for concept annotation.

All scores derive from true/false positive/negative counts over concept
sets:

    recall            = TP / (TP + FN)
    precision         = TP / (TP + FP)
    f_score           = 2 * P * R / (P + R)
    accuracy          = (TP + TN) / (TP + FP + TN + FN)
    balanced accuracy = (TPR + TNR) / 2

A metric whose denominator is zero is *undefined* and reported as None,
never silently NaN; undefined values render as "-" in tables and are
excluded from averages.  Inter-rater reliability counts, across all
annotators, the assignments that are part of a unanimous agreement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

Sid = Hashable  # sentence key, typically (doc_id, idx)


class EvaluationError(Exception):
    pass


class ConceptOutsideUniverse(EvaluationError):
    pass


class FewerThanTwoAnnotators(EvaluationError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    precision: float | None
    recall: float | None
    f_score: float | None
    accuracy: float | None
    misclassification: float | None
    balanced_accuracy: float | None
    tpr: float | None
    tnr: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f_score": self.f_score,
            "accuracy": self.accuracy,
            "misclassification": self.misclassification,
            "balanced_accuracy": self.balanced_accuracy,
            "tpr": self.tpr,
            "tnr": self.tnr,
        }


def accumulate_confusion(predicted: Iterable[str], actual: Iterable[str],
                         universe: Iterable[str]) -> ConfusionCounts:
    """Set-arithmetic confusion over a concept universe."""
    pred, act, uni = set(predicted), set(actual), set(universe)
    outside = (pred | act) - uni
    if outside:
        raise ConceptOutsideUniverse(f"concepts outside universe: {sorted(outside)}")
    return ConfusionCounts(
        tp=len(pred & act),
        fp=len(pred - act),
        fn=len(act - pred),
        tn=len(uni - (pred | act)),
    )


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def compute_metrics(counts: ConfusionCounts) -> MetricsReport:
    """Every score from the module docstring, with explicit undefined states."""
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    if precision is None or recall is None or precision + recall == 0:
        f_score = None
    else:
        f_score = 2 * precision * recall / (precision + recall)
    accuracy = _ratio(counts.tp + counts.tn, counts.total)
    misclassification = None if accuracy is None else 1.0 - accuracy
    tnr = _ratio(counts.tn, counts.tn + counts.fp)
    tpr = recall
    if tpr is None or tnr is None:
        balanced = None
    else:
        balanced = (tpr + tnr) / 2
    return MetricsReport(precision, recall, f_score, accuracy,
                         misclassification, balanced, tpr, tnr)


def per_sentence_metrics(predictions: Mapping[Sid, set[str]],
                         gold: Mapping[Sid, set[str]],
                         universe: Iterable[str]) -> list[MetricsReport]:
    """One MetricsReport per sentence, over the shared sentence set."""
    uni = set(universe)
    sids = sorted(set(predictions) | set(gold))
    return [
        compute_metrics(accumulate_confusion(
            predictions.get(sid, set()), gold.get(sid, set()), uni))
        for sid in sids
    ]


def mean_sd(values: Sequence[float]) -> tuple[float | None, float]:
    """Mean and sample standard deviation; SD is 0.0 for fewer than 2 values."""
    if not values:
        return None, 0.0
    m = sum(values) / len(values)
    if len(values) < 2:
        return m, 0.0
    var = sum((v - m) ** 2 for v in values) / (len(values) - 1)
    return m, math.sqrt(var)


METRIC_ORDER = ("precision", "recall", "f_score", "misclassification",
                "accuracy", "balanced_accuracy")


def summarize_metrics(reports: Sequence[MetricsReport]
                      ) -> dict[str, tuple[float | None, float]]:
    """Mean and SD of each metric across sentences, skipping undefined values."""
    out: dict[str, tuple[float | None, float]] = {}
    for name in METRIC_ORDER:
        vals = [r.as_dict()[name] for r in reports]
        defined = [v for v in vals if v is not None]
        out[name] = mean_sd(defined)
    return out


@dataclass(frozen=True)
class ConceptRow:
    counts: ConfusionCounts
    metrics: MetricsReport
    pct_correct: float | None  # 100 * tp / (tp + fn); None when absent from gold


def per_concept_table(predictions: Mapping[Sid, set[str]],
                      gold: Mapping[Sid, set[str]],
                      universe: Iterable[str] | None = None
                      ) -> dict[str, ConceptRow]:
    """Micro confusion per concept plus the %-correct statistic.

    %-correct is the share of gold occurrences the predictions recovered;
    a concept with no gold occurrences gets None (rendered "-").
    """
    uni = set(universe) if universe is not None else set()
    for sets in (predictions.values(), gold.values()):
        for s in sets:
            uni |= set(s)
    sids = sorted(set(predictions) | set(gold))
    table: dict[str, ConceptRow] = {}
    for concept in sorted(uni):
        counts = ConfusionCounts()
        for sid in sids:
            pred = concept in predictions.get(sid, set())
            act = concept in gold.get(sid, set())
            counts = counts + ConfusionCounts(
                tp=int(pred and act), fp=int(pred and not act),
                fn=int(act and not pred), tn=int(not pred and not act))
        gold_n = counts.tp + counts.fn
        pct = 100.0 * counts.tp / gold_n if gold_n > 0 else None
        table[concept] = ConceptRow(counts, compute_metrics(counts), pct)
    return table


@dataclass(frozen=True)
class GroupRow:
    correct: int
    incorrect: int

    @property
    def pct_correct(self) -> float | None:
        n = self.correct + self.incorrect
        return 100.0 * self.correct / n if n else None


@dataclass(frozen=True)
class GroupTable:
    rows: dict[str, GroupRow]
    sum_correct: int
    sum_incorrect: int
    overall_pct: float | None   # pooled: 100 * sum_correct / total instances
    group_pct_sd: float         # sample SD across the per-group percentages


def per_group_table(predictions: Mapping[Sid, set[str]],
                    gold: Mapping[Sid, set[str]],
                    doc_groups: Mapping[str, str]) -> GroupTable:
    """Correct vs incorrect gold concept instances per demographic group.

    A gold instance counts as correct when predicted, incorrect when
    missed.  Sentences whose document has no group land in
    "Data not received".  The summary carries instance sums, the pooled
    overall percentage, and the sample SD of the per-group percentages.
    """
    acc: dict[str, list[int]] = {}
    for sid in sorted(set(predictions) | set(gold)):
        doc_id = sid[0] if isinstance(sid, tuple) else str(sid)
        group = doc_groups.get(doc_id, "Data not received")
        pred = predictions.get(sid, set())
        act = gold.get(sid, set())
        slot = acc.setdefault(group, [0, 0])
        slot[0] += len(set(act) & set(pred))
        slot[1] += len(set(act) - set(pred))
    rows = {g: GroupRow(c, i) for g, (c, i) in sorted(acc.items())}
    sum_c = sum(r.correct for r in rows.values())
    sum_i = sum(r.incorrect for r in rows.values())
    overall = 100.0 * sum_c / (sum_c + sum_i) if (sum_c + sum_i) else None
    pcts = [r.pct_correct for r in rows.values() if r.pct_correct is not None]
    _, sd = mean_sd(pcts)
    return GroupTable(rows, sum_c, sum_i, overall, sd)


def per_concept_by_group(predictions: Mapping[Sid, set[str]],
                         gold: Mapping[Sid, set[str]],
                         doc_groups: Mapping[str, str]
                         ) -> dict[str, dict[str, float | None]]:
    """%-correct per (concept, group); None where the concept has no gold
    occurrence in that group."""
    by_group: dict[str, tuple[dict[Sid, set[str]], dict[Sid, set[str]]]] = {}
    for sid in sorted(set(predictions) | set(gold)):
        doc_id = sid[0] if isinstance(sid, tuple) else str(sid)
        group = doc_groups.get(doc_id, "Data not received")
        preds, golds = by_group.setdefault(group, ({}, {}))
        preds[sid] = set(predictions.get(sid, set()))
        golds[sid] = set(gold.get(sid, set()))

    concepts: set[str] = set()
    for preds, golds in by_group.values():
        for s in list(preds.values()) + list(golds.values()):
            concepts |= s

    table: dict[str, dict[str, float | None]] = {}
    for concept in sorted(concepts):
        row: dict[str, float | None] = {}
        for group in sorted(by_group):
            preds, golds = by_group[group]
            tp = sum(1 for sid, g in golds.items() if concept in g and concept in preds[sid])
            fn = sum(1 for sid, g in golds.items() if concept in g and concept not in preds[sid])
            row[group] = 100.0 * tp / (tp + fn) if (tp + fn) else None
        table[concept] = row
    return table


@dataclass(frozen=True)
class MultiAnnotatorSet:
    """Concept assignments by several annotators over a shared sentence set.

    Sentences an annotator skipped count as empty sets, so every annotator
    covers every sentence.
    """
    annotators: tuple[str, ...]
    assignments: dict[Sid, dict[str, frozenset[str]]]

    @classmethod
    def build(cls, per_annotator: Mapping[str, Mapping[Sid, Iterable[str]]]
              ) -> "MultiAnnotatorSet":
        annotators = tuple(sorted(per_annotator))
        sids = sorted({sid for m in per_annotator.values() for sid in m})
        assignments = {
            sid: {
                a: frozenset(per_annotator[a].get(sid, ()))
                for a in annotators
            }
            for sid in sids
        }
        return cls(annotators, assignments)


@dataclass(frozen=True)
class IrrResult:
    irr: float
    agreements: int
    total_concepts: int
    n_annotators: int
    mode: str


def inter_rater_reliability(annotations: MultiAnnotatorSet,
                            mode: str = "assignments") -> IrrResult:
    """Agreement ratio across annotators.

    Per sentence, an assignment agrees when every annotator made it (the
    intersection of their concept sets).  ``agreements`` counts agreeing
    assignments across all annotators; ``total_concepts`` counts all
    assignments made.  Mode "assignments" (default) reports
    agreements / total_concepts; mode "per_annotator" divides that by the
    number of annotators again.
    """
    n = len(annotations.annotators)
    if n < 2:
        raise FewerThanTwoAnnotators(f"need >= 2 annotators, got {n}")
    if mode not in ("assignments", "per_annotator"):
        raise ValueError(f"unknown IRR mode {mode!r}")
    agreed = 0
    total = 0
    for sid in annotations.assignments:
        sets = [annotations.assignments[sid][a] for a in annotations.annotators]
        inter = frozenset.intersection(*sets)
        agreed += n * len(inter)
        total += sum(len(s) for s in sets)
    if total == 0:
        raise EvaluationError("annotators made no assignments at all")
    irr = agreed / total
    if mode == "per_annotator":
        irr /= n
    return IrrResult(irr, agreed, total, n, mode)
