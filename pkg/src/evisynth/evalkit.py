"""Classification and retrieval/generation metrics.

Confusion-matrix rates, Mean Reciprocal Rank, and ROUGE overlap scores.
All functions are pure; zero denominators yield None ("undefined") rather
than a silent 0 so aggregate reports cannot be corrupted.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

from .errors import EmptyCounts, EmptyInput


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    precision: Optional[float]
    recall: Optional[float]
    specificity: Optional[float]
    accuracy: Optional[float]
    npv: Optional[float]

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["metric", "value"])
        for name, value in sorted(self.as_dict().items()):
            writer.writerow([name, "" if value is None else f"{value:.6f}"])
        return buf.getvalue()


def _ratio(num: int, den: int) -> Optional[float]:
    return None if den == 0 else num / den


def derive_metrics(
    counts: ConfusionCounts | int,
    fp: Optional[int] = None,
    tn: Optional[int] = None,
    fn: Optional[int] = None,
) -> MetricsReport:
    """Derive precision/recall/specificity/accuracy/NPV from raw counts.

    Takes either a ConfusionCounts or the four raw counts in tp, fp, tn,
    fn order. Sensitivity is recall and PPV is precision; the names used
    here are the machine-learning ones. A metric whose denominator is
    zero comes back as None.
    """
    if not isinstance(counts, ConfusionCounts):
        counts = ConfusionCounts(tp=int(counts), fp=int(fp), tn=int(tn), fn=int(fn))
    if counts.total <= 0:
        raise EmptyCounts("confusion counts sum to zero")
    if min(counts.tp, counts.fp, counts.tn, counts.fn) < 0:
        raise EmptyCounts("confusion counts must be non-negative")
    return MetricsReport(
        precision=_ratio(counts.tp, counts.tp + counts.fp),
        recall=_ratio(counts.tp, counts.tp + counts.fn),
        specificity=_ratio(counts.tn, counts.tn + counts.fp),
        accuracy=_ratio(counts.tp + counts.tn, counts.total),
        npv=_ratio(counts.tn, counts.tn + counts.fn),
    )


def confusion_from_pairs(pairs: Sequence[tuple[bool, bool]]) -> ConfusionCounts:
    """Count a confusion matrix from (predicted, gold) boolean pairs."""
    tp = fp = tn = fn = 0
    for predicted, gold in pairs:
        if predicted and gold:
            tp += 1
        elif predicted and not gold:
            fp += 1
        elif not predicted and not gold:
            tn += 1
        else:
            fn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def mrr(ranks: Sequence[Optional[int]]) -> float:
    """Mean reciprocal rank of the first relevant result per query.

    A rank is a 1-based position; None means no relevant result was found
    and contributes 0 to the mean.
    """
    if not ranks:
        raise EmptyInput("no ranks given")
    total = 0.0
    for rank in ranks:
        if rank is None:
            continue
        if rank < 1:
            raise ValueError(f"ranks are 1-based, got {rank}")
        total += 1.0 / rank
    return total / len(ranks)


def _tokens(text: str) -> list[str]:
    # lowercase whitespace tokens; fixed so scores are bit-exact across runs
    return text.lower().split()


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _prf(overlap: int, cand_total: int, ref_total: int) -> tuple[float, float, float]:
    precision = overlap / cand_total if cand_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return recall, precision, f1


def rouge_n(candidate: str, reference: str, n: int = 1) -> tuple[float, float, float]:
    """ROUGE-N (recall, precision, f1) with clipped n-gram overlap.

    Overlap counts use the multiset intersection of n-grams, so repeated
    candidate n-grams only count up to their reference frequency.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = _ngrams(_tokens(candidate), n)
    ref = _ngrams(_tokens(reference), n)
    overlap = sum((cand & ref).values())
    return _prf(overlap, sum(cand.values()), sum(ref.values()))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


def rouge_l(candidate: str, reference: str) -> tuple[float, float, float]:
    """ROUGE-L (recall, precision, f1) via longest common subsequence."""
    cand = _tokens(candidate)
    ref = _tokens(reference)
    lcs = _lcs_length(cand, ref)
    return _prf(lcs, len(cand), len(ref))
