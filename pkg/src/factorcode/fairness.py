"""Demographic-group performance comparison.

The core test is the Wilcoxon signed-rank test over matched per-concept
%-correct values.  Zero differences are dropped; absolute differences are
ranked with mid-rank ties; W = min(W+, W-).  For small tie-free samples the
two-sided p-value comes from full enumeration of the 2^n sign assignments,
otherwise from a normal approximation with tie-corrected variance and
continuity correction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Mapping, Sequence

from .evaluation import mean_sd


class FairnessError(Exception):
    pass


class EmptySample(FairnessError):
    pass


class AllZeroDifferences(FairnessError):
    pass


class NoCommonConcepts(FairnessError):
    pass


@dataclass(frozen=True)
class PairedSample:
    """Matched observations for two conditions, keyed for auditability."""
    pairs: tuple[tuple[float, float], ...]
    keys: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.keys and len(self.keys) != len(self.pairs):
            raise ValueError("keys must match pairs 1:1 when given")


@dataclass(frozen=True)
class WilcoxonConfig:
    exact_cutoff: int = 12


@dataclass(frozen=True)
class WilcoxonResult:
    n_effective: int
    w_plus: float
    w_minus: float
    w: float
    z: float | None
    p_value: float
    method: str  # "exact" | "normal_approximation"


def _rank_abs(diffs: Sequence[float]) -> list[float]:
    """Mid-rank (average) ranks of |d|, 1-based."""
    order = sorted(range(len(diffs)), key=lambda i: abs(diffs[i]))
    ranks = [0.0] * len(diffs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and abs(diffs[order[j + 1]]) == abs(diffs[order[i]]):
            j += 1
        avg = (i + j) / 2 + 1  # average of 1-based positions i+1..j+1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _norm_sf(z: float) -> float:
    """P(Z > z) for a standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2))


def wilcoxon_signed_rank(sample: PairedSample,
                         config: WilcoxonConfig | None = None) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on differences y - x.

    Exact enumeration is used when the effective sample (zero differences
    dropped) has no tied |d| and is at most ``exact_cutoff`` pairs;
    otherwise the tie-corrected normal approximation with continuity
    correction applies and Z is reported.
    """
    cfg = config or WilcoxonConfig()
    if not sample.pairs:
        raise EmptySample("no pairs to test")
    diffs = [y - x for x, y in sample.pairs if y - x != 0.0]
    if not diffs:
        raise AllZeroDifferences("every pair has zero difference")

    n = len(diffs)
    ranks = _rank_abs(diffs)
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, diffs) if d < 0)
    w = min(w_plus, w_minus)
    total = n * (n + 1) / 2
    has_ties = len({abs(d) for d in diffs}) < n

    if n <= cfg.exact_cutoff and not has_ties:
        # Distribution of W+ over all sign assignments; two-sided tail mass.
        counts: dict[float, int] = {}
        for signs in product((0, 1), repeat=n):
            s = sum(r for r, bit in zip(ranks, signs) if bit)
            counts[s] = counts.get(s, 0) + 1
        lo = sum(c for v, c in counts.items() if v <= w)
        hi = sum(c for v, c in counts.items() if v >= total - w)
        p = min(1.0, (lo + hi) / 2 ** n)
        return WilcoxonResult(n, w_plus, w_minus, w, None, p, "exact")

    mean = total / 2
    var = n * (n + 1) * (2 * n + 1) / 24
    # Tie correction: subtract sum(t^3 - t)/48 over groups of tied |d|.
    tie_groups: dict[float, int] = {}
    for d in diffs:
        tie_groups[abs(d)] = tie_groups.get(abs(d), 0) + 1
    var -= sum(t ** 3 - t for t in tie_groups.values()) / 48
    if var <= 0:
        raise FairnessError("degenerate variance (all differences tied)")
    sd = math.sqrt(var)
    z = (w - mean + 0.5) / sd  # continuity correction toward the mean
    p = min(1.0, 2 * _norm_sf(-z))
    return WilcoxonResult(n, w_plus, w_minus, w, z, p, "normal_approximation")


@dataclass(frozen=True)
class GroupComparison:
    group_a: str
    group_b: str
    n_pairs: int
    median_a: float
    median_b: float
    sd_a: float
    sd_b: float
    result: WilcoxonResult
    note: str = ""


def _median(values: Sequence[float]) -> float:
    vals = sorted(values)
    n = len(vals)
    mid = n // 2
    return vals[mid] if n % 2 else (vals[mid - 1] + vals[mid]) / 2


def compare_groups(table: Mapping[str, Mapping[str, float | None]],
                   group_a: str, group_b: str,
                   config: WilcoxonConfig | None = None) -> GroupComparison:
    """Wilcoxon comparison of two groups over concepts defined for both.

    ``table`` maps concept -> group -> %-correct (None where the concept
    never occurred for the group).  Identical groups surface as
    "no difference" with p = 1.0 rather than an error.
    """
    pairs: list[tuple[float, float]] = []
    keys: list[str] = []
    for concept in sorted(table):
        row = table[concept]
        a, b = row.get(group_a), row.get(group_b)
        if a is not None and b is not None:
            pairs.append((a, b))
            keys.append(concept)
    if not pairs:
        raise NoCommonConcepts(f"no concept defined for both {group_a!r} and {group_b!r}")

    a_vals = [p[0] for p in pairs]
    b_vals = [p[1] for p in pairs]
    _, sd_a = mean_sd(a_vals)
    _, sd_b = mean_sd(b_vals)
    sample = PairedSample(tuple(pairs), tuple(keys))
    try:
        result = wilcoxon_signed_rank(sample, config)
        note = ""
    except AllZeroDifferences:
        result = WilcoxonResult(0, 0.0, 0.0, 0.0, None, 1.0, "exact")
        note = "no difference: all paired values identical"
    return GroupComparison(group_a, group_b, len(pairs), _median(a_vals),
                           _median(b_vals), sd_a, sd_b, result, note)


@dataclass(frozen=True)
class GroupDistributionRow:
    reports: int
    concepts: int

    @property
    def avg_concepts_per_report(self) -> int:
        # Reported as a whole number; rounded up as in published summaries.
        return math.ceil(self.concepts / self.reports) if self.reports else 0


@dataclass(frozen=True)
class GroupDistribution:
    rows: dict[str, GroupDistributionRow]
    total_reports: int
    total_concepts: int

    @property
    def avg_concepts_per_report(self) -> int:
        return math.ceil(self.total_concepts / self.total_reports) if self.total_reports else 0


def group_distribution_report(doc_groups: Mapping[str, str],
                              annotations: Mapping[str, Sequence[str]]
                              ) -> GroupDistribution:
    """Report and concept counts per demographic group, with totals.

    Every document in ``doc_groups`` counts as a report; ``annotations``
    maps doc_id to its assigned concepts (missing docs contribute zero).
    """
    acc: dict[str, list[int]] = {}
    for doc_id in sorted(doc_groups):
        group = doc_groups[doc_id]
        slot = acc.setdefault(group, [0, 0])
        slot[0] += 1
        slot[1] += len(annotations.get(doc_id, ()))
    rows = {g: GroupDistributionRow(r, c) for g, (r, c) in sorted(acc.items())}
    return GroupDistribution(
        rows,
        total_reports=sum(r.reports for r in rows.values()),
        total_concepts=sum(r.concepts for r in rows.values()),
    )
