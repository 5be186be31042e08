"""Binary classification metrics for heavily imbalanced evaluation.

Positive-class precision/recall, macro F1, Matthews correlation, and
rank-based AUC, plus mean/std aggregation across seeded runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricReport:
    precision_pos: float
    recall_pos: float
    macro_f1: float
    mcc: float
    auc: Optional[float]
    n: int
    flags: tuple[str, ...] = ()


METRIC_NAMES = ("precision_pos", "recall_pos", "macro_f1", "mcc", "auc")


def confusion(labels: Sequence[int], predictions: Sequence[int]) -> ConfusionCounts:
    """Tally a confusion matrix with 1 as the positive class."""
    if len(labels) != len(predictions):
        raise ValueError(
            "labels and predictions differ in length: %d vs %d"
            % (len(labels), len(predictions))
        )
    if not labels:
        raise ValueError("cannot tally an empty evaluation set")
    tp = fp = fn = tn = 0
    for y, p in zip(labels, predictions):
        if y == 1 and p == 1:
            tp += 1
        elif y == 0 and p == 1:
            fp += 1
        elif y == 1 and p == 0:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def _safe_div(num: float, den: float, flags: list[str], flag: str) -> float:
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def rank_auc(scores: Sequence[tuple[float, int]]) -> Optional[float]:
    """Mann-Whitney AUC: P(random positive outscores random negative).

    Ties count one half. Returns None when only one class is present.
    """
    pos = sorted(s for s, y in scores if y == 1)
    neg = sorted(s for s, y in scores if y == 0)
    if not pos or not neg:
        return None
    # average ranks over the pooled, sorted scores
    pooled = sorted((s, y) for s, y in scores)
    rank_sum_pos = 0.0
    i = 0
    while i < len(pooled):
        j = i
        while j < len(pooled) and pooled[j][0] == pooled[i][0]:
            j += 1
        avg_rank = (i + 1 + j) / 2.0  # ranks are 1-based; block spans i+1..j
        rank_sum_pos += avg_rank * sum(1 for _, y in pooled[i:j] if y == 1)
        i = j
    n_pos, n_neg = len(pos), len(neg)
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def metrics(
    counts: ConfusionCounts,
    scores: Optional[Sequence[tuple[float, int]]] = None,
) -> MetricReport:
    """Compute the full report from confusion counts and optional scores.

    Zero-denominator cases yield 0.0 and a degeneracy flag. AUC needs
    scored examples of both classes; otherwise it is None and flagged.
    """
    flags: list[str] = []
    tp, fp, fn, tn = counts.tp, counts.fp, counts.fn, counts.tn
    precision = _safe_div(tp, tp + fp, flags, "precision_degenerate")
    recall = _safe_div(tp, tp + fn, flags, "recall_degenerate")
    f1_pos = _safe_div(2 * tp, 2 * tp + fp + fn, flags, "f1_pos_degenerate")
    f1_neg = _safe_div(2 * tn, 2 * tn + fn + fp, flags, "f1_neg_degenerate")
    macro_f1 = (f1_pos + f1_neg) / 2.0

    mcc_den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    if mcc_den == 0:
        flags.append("mcc_degenerate")
        mcc = 0.0
    else:
        mcc = (tp * tn - fp * fn) / mcc_den

    auc = None
    if scores is not None:
        auc = rank_auc(scores)
        if auc is None:
            flags.append("auc_undefined")

    return MetricReport(
        precision_pos=precision,
        recall_pos=recall,
        macro_f1=macro_f1,
        mcc=mcc,
        auc=auc,
        n=counts.total,
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class SeedAggregate:
    """Per-metric mean and population std over repeated runs."""

    means: dict[str, Optional[float]]
    stds: dict[str, Optional[float]]
    n_runs: int

    def formatted(self, metric: str, precision: int = 3) -> str:
        mean, std = self.means[metric], self.stds[metric]
        if mean is None:
            return "n/a"
        return "%.*f_{%.*f}" % (precision, mean, precision, std)


def _mean_std(values: list[float]) -> tuple[float, float]:
    if all(v == values[0] for v in values):
        # identical runs must report exactly zero spread
        return values[0], 0.0
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)


def aggregate_runs(reports: Sequence[MetricReport]) -> SeedAggregate:
    """Aggregate reports from repeated seeded runs (population std)."""
    if not reports:
        raise ValueError("need at least one report")
    means: dict[str, Optional[float]] = {}
    stds: dict[str, Optional[float]] = {}
    for name in METRIC_NAMES:
        values = [getattr(r, name) for r in reports]
        if any(v is None for v in values):
            means[name], stds[name] = None, None
        else:
            means[name], stds[name] = _mean_std(values)
    return SeedAggregate(means=means, stds=stds, n_runs=len(reports))
