"""CSV report writers.

Layouts mirror the summary tables this kind of evaluation is reported
with: an overall metric table (mean and SD per metric), a per-concept
%-correct table with an Average/SD footer, a per-group correct/incorrect
table whose footer carries instance sums and the pooled mean with the SD
of the group percentages, a concept-by-group matrix, per-group signed-rank
results (``ethnicity,W,p``), and a per-report inter-annotator agreement
table.  Percentages print to 2 decimals, W to 1, Z to 3; undefined cells
print "-".
"""
from __future__ import annotations

import csv
from typing import IO, Mapping, Sequence

from .evaluation import ConceptRow, GroupTable, IrrResult, MultiAnnotatorSet, mean_sd
from .fairness import GroupComparison, GroupDistribution


def _fmt(value: float | None, decimals: int = 2) -> str:
    return "-" if value is None else f"{value:.{decimals}f}"


METRIC_TITLES = (
    ("precision", "Precision"),
    ("recall", "Recall"),
    ("f_score", "F-score"),
    ("misclassification", "Misclassification"),
    ("accuracy", "Accuracy"),
    ("balanced_accuracy", "Balanced Accuracy"),
)


def write_overall_csv(summary: Mapping[str, tuple[float | None, float]],
                      fp: IO[str]) -> None:
    """``metric,avg,sd`` rows, one per headline metric."""
    writer = csv.writer(fp)
    writer.writerow(["metric", "avg", "sd"])
    for key, title in METRIC_TITLES:
        mean, sd = summary.get(key, (None, 0.0))
        writer.writerow([title, _fmt(mean), _fmt(sd)])


def write_per_concept_csv(table: Mapping[str, ConceptRow], fp: IO[str],
                          labels: Mapping[str, str] | None = None) -> None:
    """``concept,correct_pct`` rows plus Average / Standard Deviation footer."""
    writer = csv.writer(fp)
    writer.writerow(["concept", "correct_pct"])
    defined: list[float] = []
    for code in sorted(table):
        row = table[code]
        label = (labels or {}).get(code, code)
        writer.writerow([label, _fmt(row.pct_correct)])
        if row.pct_correct is not None:
            defined.append(row.pct_correct)
    mean, sd = mean_sd(defined)
    writer.writerow(["Average", _fmt(mean)])
    writer.writerow(["Standard Deviation", _fmt(sd)])


def write_per_group_csv(table: GroupTable, fp: IO[str]) -> None:
    """``group,correct,incorrect,correct_pct`` with a sums + mean/SD footer."""
    writer = csv.writer(fp)
    writer.writerow(["group", "correct", "incorrect", "correct_pct"])
    for group in sorted(table.rows):
        row = table.rows[group]
        writer.writerow([group, row.correct, row.incorrect, _fmt(row.pct_correct)])
    mean = _fmt(table.overall_pct)
    writer.writerow([
        "All", table.sum_correct, table.sum_incorrect,
        f"{mean} +/- {table.group_pct_sd:.2f}",
    ])


def write_concept_by_group_csv(table: Mapping[str, Mapping[str, float | None]],
                               fp: IO[str],
                               labels: Mapping[str, str] | None = None) -> None:
    """Concept rows x group columns, with per-row Avg and SD columns."""
    groups = sorted({g for row in table.values() for g in row})
    writer = csv.writer(fp)
    writer.writerow(["concept", *groups, "avg", "sd"])
    for code in sorted(table):
        row = table[code]
        cells = [row.get(g) for g in groups]
        defined = [c for c in cells if c is not None]
        mean, sd = mean_sd(defined)
        writer.writerow([
            (labels or {}).get(code, code),
            *[_fmt(c) for c in cells], _fmt(mean), _fmt(sd),
        ])


def write_wilcoxon_csv(rows: Sequence[tuple[str, GroupComparison]],
                       fp: IO[str]) -> None:
    """``ethnicity,W,p`` rows, one comparison per line."""
    writer = csv.writer(fp)
    writer.writerow(["ethnicity", "W", "p"])
    for name, comparison in rows:
        writer.writerow([
            name,
            _fmt(comparison.result.w, 1),
            _fmt(comparison.result.p_value, 2),
        ])


def write_group_distribution_csv(dist: GroupDistribution, fp: IO[str]) -> None:
    """``group,reports,concepts,avg_concepts_per_report`` with totals row."""
    writer = csv.writer(fp)
    writer.writerow(["group", "reports", "concepts", "avg_concepts_per_report"])
    for group in sorted(dist.rows):
        row = dist.rows[group]
        writer.writerow([group, row.reports, row.concepts,
                         row.avg_concepts_per_report])
    writer.writerow(["Total", dist.total_reports, dist.total_concepts,
                     dist.avg_concepts_per_report])


def write_irr_csv(annotations: MultiAnnotatorSet, result: IrrResult,
                  fp: IO[str]) -> None:
    """Per-report assignment counts per annotator plus the agreement column."""
    writer = csv.writer(fp)
    writer.writerow(["report", *annotations.annotators, "agreement"])
    by_doc: dict[str, list] = {}
    for sid in sorted(annotations.assignments):
        doc_id = sid[0] if isinstance(sid, tuple) else str(sid)
        by_doc.setdefault(doc_id, []).append(annotations.assignments[sid])
    totals = [0] * len(annotations.annotators)
    total_agreement = 0
    for doc_id in sorted(by_doc):
        sentences = by_doc[doc_id]
        per_annotator = [
            sum(len(s[a]) for s in sentences) for a in annotations.annotators
        ]
        agreement = sum(
            len(frozenset.intersection(*(s[a] for a in annotations.annotators)))
            for s in sentences
        )
        writer.writerow([doc_id, *per_annotator, agreement])
        totals = [t + p for t, p in zip(totals, per_annotator)]
        total_agreement += agreement
    writer.writerow(["Total", *totals, total_agreement])
    writer.writerow(["Total concept assignments", result.total_concepts])
    writer.writerow(["Concept agreements", result.agreements])
    writer.writerow([f"IRR ({result.mode})", f"{100 * result.irr:.2f}%"])
