"""Rank-cutoff retrieval metrics and the paired significance test.

Conventions follow trec_eval: gain 2^grade - 1 with 1/log2(rank+1)
discount for NDCG, and a fixed denominator of 10 for P@10 even on short
runs.  The t-distribution CDF is evaluated through the regularized
incomplete beta function (Lentz continued fraction), so the module has no
stats dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ContractViolation, ParseError
from .ranking import RankedList

RELEVANT_GRADE = 1  # binarization threshold for Hits and default P@10


@dataclass(frozen=True)
class QrelSet:
    """Relevance grades keyed by query, then docid."""

    grades: dict[str, dict[str, int]]

    def for_query(self, query_key: str) -> dict[str, int] | None:
        return self.grades.get(query_key)

    def __contains__(self, query_key: str) -> bool:
        return query_key in self.grades


def read_qrels(lines) -> QrelSet:
    """TREC qrels: `qid 0 docid grade` per line."""
    grades: dict[str, dict[str, int]] = {}
    for line_no, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise ParseError(f"expected 4 whitespace-separated fields, got {len(parts)}", line_no)
        qid, _, docid, grade = parts
        try:
            value = int(grade)
        except ValueError:
            raise ParseError(f"grade {grade!r} is not an integer", line_no) from None
        if value < 0:
            raise ParseError("grades must be nonnegative", line_no)
        grades.setdefault(qid, {})[docid] = value
    return QrelSet(grades=grades)


def read_qrels_file(path) -> QrelSet:
    with open(path, encoding="utf-8") as handle:
        return read_qrels(handle)


def hits_at_k(run: RankedList, qrels: QrelSet, k: int) -> int | None:
    """1 iff a relevant doc (grade >= 1) appears within rank k; None when
    the query has no judgments (excluded, counted by the aggregator)."""
    if k < 1:
        raise ContractViolation("k must be >= 1")
    judged = qrels.for_query(run.query_key)
    if judged is None:
        return None
    for entry in run.entries[:k]:
        if judged.get(entry.doc_id, 0) >= RELEVANT_GRADE:
            return 1
    return 0


def ndcg_at_10(run: RankedList, qrels: QrelSet) -> float | None:
    judged = qrels.for_query(run.query_key)
    if judged is None:
        return None
    dcg = 0.0
    for entry in run.entries[:10]:
        grade = judged.get(entry.doc_id, 0)
        if grade > 0:
            dcg += (2.0**grade - 1.0) / math.log2(entry.rank + 1)
    ideal = 0.0
    for rank, grade in enumerate(sorted(judged.values(), reverse=True)[:10], start=1):
        if grade > 0:
            ideal += (2.0**grade - 1.0) / math.log2(rank + 1)
    if ideal == 0.0:
        return 0.0
    return dcg / ideal


def precision_at_10(run: RankedList, qrels: QrelSet, threshold: int = RELEVANT_GRADE) -> float | None:
    """Relevant docs in the top 10 over a fixed denominator of 10."""
    judged = qrels.for_query(run.query_key)
    if judged is None:
        return None
    hits = sum(1 for entry in run.entries[:10] if judged.get(entry.doc_id, 0) >= threshold)
    return hits / 10.0


@dataclass(frozen=True)
class MetricTable:
    name: str
    cutoff: int
    per_query: dict[str, float]
    skipped: int  # queries without judgments

    @property
    def mean(self) -> float:
        if not self.per_query:
            return 0.0
        return sum(self.per_query.values()) / len(self.per_query)

    def to_tsv(self) -> str:
        lines = [f"# metric={self.name}\tcutoff={self.cutoff}\tskipped={self.skipped}"]
        for qid in sorted(self.per_query):
            lines.append(f"{qid}\t{self.per_query[qid]:.6f}")
        lines.append(f"__mean__\t{self.mean:.6f}")
        return "\n".join(lines) + "\n"


_METRICS = {
    "hits@1": lambda run, qrels: hits_at_k(run, qrels, 1),
    "hits@10": lambda run, qrels: hits_at_k(run, qrels, 10),
    "ndcg@10": ndcg_at_10,
    "p@10": precision_at_10,
}


def evaluate_runs(runs: Sequence[RankedList], qrels: QrelSet, metric: str) -> MetricTable:
    if metric not in _METRICS:
        raise ContractViolation(f"unknown metric {metric!r}; expected one of {sorted(_METRICS)}")
    cutoff = int(metric.split("@")[1])
    fn = _METRICS[metric]
    per_query: dict[str, float] = {}
    skipped = 0
    for run in runs:
        value = fn(run, qrels)
        if value is None:
            skipped += 1
        else:
            per_query[run.query_key] = float(value)
    return MetricTable(name=metric, cutoff=cutoff, per_query=per_query, skipped=skipped)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    result = d
    for m in range(1, 200):
        m2 = 2 * m
        numerator = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        result *= d * c
        numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        result *= delta
        if abs(delta - 1.0) < 3e-16:
            break
    return result


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log(1.0 - x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def paired_t_test(values_a: Sequence[float], values_b: Sequence[float]) -> tuple[float, float]:
    """Paired two-tailed t-test on aligned per-query values.

    Returns (t statistic, two-tailed p).  Zero-variance differences give
    p = 1.0 when the mean difference is zero and p = 0.0 (with an infinite
    t) otherwise.
    """
    if len(values_a) != len(values_b):
        raise ContractViolation("paired t-test needs aligned value lists of equal length")
    n = len(values_a)
    if n < 2:
        raise ContractViolation("paired t-test needs at least 2 pairs")
    diffs = [a - b for a, b in zip(values_a, values_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / math.sqrt(var / n)
    df = n - 1
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return t, min(max(p, 0.0), 1.0)


def align_for_test(table_a: MetricTable, table_b: MetricTable) -> tuple[list[float], list[float]]:
    """Per-query values of both tables over their shared queries, aligned."""
    shared = sorted(set(table_a.per_query) & set(table_b.per_query))
    if not shared:
        raise ContractViolation("metric tables share no queries")
    return [table_a.per_query[q] for q in shared], [table_b.per_query[q] for q in shared]
