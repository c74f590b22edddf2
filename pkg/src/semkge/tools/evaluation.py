"""Link-prediction ranking and the MRR / Hits@K / Sem@K metrics.

Both prediction sides of every triple are ranked against all entities.
Filtered mode drops the other known-true completions before ranking and
from the top-K list. Aggregates use ``math.fsum`` in query order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Literal, Sequence

import numpy as np

from semkge.tools.buckets import ALL_BUCKETS, UNBUCKETED, BucketSpec, bucket_assign
from semkge.tools.errors import undefined_metric, usage_error
from semkge.tools.kg import SIDES, KnowledgeGraph, Side, Triple, check_side
from semkge.tools.models import ModelParams, score_all

logger = logging.getLogger(__name__)

Mode = Literal["raw", "filtered"]
Ties = Literal["optimistic", "pessimistic"]
MODES = ("raw", "filtered")
TIES = ("optimistic", "pessimistic")
DEFAULT_KS = (1, 3, 10)


@dataclass(frozen=True)
class RankResult:
    head: int
    rel: int
    tail: int
    side: Side
    rank: int
    topk: tuple[int, ...]
    topk_valid: tuple[bool, ...]
    num_candidates: int

    def to_json(self) -> dict[str, Any]:
        return {
            "h": self.head,
            "r": self.rel,
            "t": self.tail,
            "side": self.side,
            "rank": self.rank,
            "topk": list(self.topk),
            "topk_valid": [int(v) for v in self.topk_valid],
            "num_candidates": self.num_candidates,
        }

    @classmethod
    def from_json(cls, row: dict[str, Any]) -> "RankResult":
        return cls(
            head=int(row["h"]),
            rel=int(row["r"]),
            tail=int(row["t"]),
            side=check_side(row["side"]),
            rank=int(row["rank"]),
            topk=tuple(int(e) for e in row["topk"]),
            topk_valid=tuple(bool(v) for v in row["topk_valid"]),
            num_candidates=int(row.get("num_candidates", len(row["topk"]))),
        )


def rank_from_scores(
    scores: np.ndarray,
    truth: int,
    *,
    exclude: Iterable[int] = (),
    valid_mask: np.ndarray | None = None,
    k: int = 10,
    ties: Ties = "optimistic",
) -> tuple[int, tuple[int, ...], tuple[bool, ...], int]:
    """
    Rank ``truth`` inside a full score vector.

    Returns ``(rank, top-k ids, top-k validity, number of candidates)``.
    Excluded entities are removed from both the ranking and the top-k list;
    top-k ties are broken by ascending entity id.
    """
    if ties not in TIES:
        raise usage_error(f"ties must be one of {TIES}, got {ties!r}")
    s = np.array(scores, dtype=np.float64)
    keep = np.ones(len(s), dtype=bool)
    excluded = np.fromiter((e for e in exclude if e != truth), dtype=np.int64)
    keep[excluded] = False
    s[excluded] = -np.inf
    target = s[truth]
    others = keep.copy()
    others[truth] = False
    if ties == "optimistic":
        rank = 1 + int(np.count_nonzero(s[others] > target))
    else:
        rank = 1 + int(np.count_nonzero(s[others] >= target))
    order = np.argsort(-s, kind="stable")
    order = order[keep[order]]
    topk = order[:k]
    flags = valid_mask[topk] if valid_mask is not None else np.ones(len(topk), dtype=bool)
    return rank, tuple(topk.tolist()), tuple(bool(v) for v in flags), int(keep.sum())


def rank_query(
    params: ModelParams,
    t: Triple,
    side: Side,
    kg: KnowledgeGraph,
    mode: Mode = "filtered",
    *,
    k: int = 10,
    ties: Ties = "optimistic",
) -> RankResult:
    side = check_side(side)
    if mode not in MODES:
        raise usage_error(f"mode must be one of {MODES}, got {mode!r}")
    h, r, tail = Triple(*t)
    fixed, truth = (h, tail) if side == "tail" else (tail, h)
    scores = score_all(params, r, fixed, side)
    exclude = kg.known(r, fixed, side).tolist() if mode == "filtered" else ()
    rank, topk, flags, n = rank_from_scores(
        scores, truth, exclude=exclude, valid_mask=kg.candidate_mask(r, side), k=k, ties=ties
    )
    return RankResult(h, r, tail, side, rank, topk, flags, n)


def _require(results: Sequence[RankResult], metric: str) -> None:
    if not results:
        raise undefined_metric(metric, "no ranking results to aggregate")


def mrr(results: Sequence[RankResult]) -> float:
    _require(results, "MRR")
    return math.fsum(1.0 / res.rank for res in results) / len(results)


def hits_at_k(results: Sequence[RankResult], k: int) -> float:
    _require(results, f"Hits@{k}")
    return math.fsum(1.0 for res in results if res.rank <= k) / len(results)


def sem_at_k(results: Sequence[RankResult], k: int, kg: KnowledgeGraph | None = None) -> float:
    """
    Mean share of semantically valid entities among each query's top ``k``.

    The denominator is ``min(k, number of candidates)``. With ``kg`` the
    validity of each listed entity is re-read from the schema; otherwise the
    flags recorded at ranking time are used.
    """
    _require(results, f"Sem@{k}")
    ratios = []
    for res in results:
        top = res.topk[:k]
        if len(top) < min(k, res.num_candidates):
            raise usage_error(f"Sem@{k} needs top-{k} lists; results hold only {len(res.topk)}")
        if kg is not None:
            flags = kg.candidate_mask(res.rel, res.side)[list(top)] if top else []
        else:
            flags = res.topk_valid[:k]
        ratios.append(sum(bool(v) for v in flags) / len(top) if top else 0.0)
    return math.fsum(ratios) / len(ratios)


@dataclass(frozen=True)
class MetricBlock:
    num_queries: int
    mrr: float | None
    hits: dict[int, float | None]
    sem: dict[int, float | None]

    def to_json(self) -> dict[str, Any]:
        return {
            "num_queries": self.num_queries,
            "mrr": self.mrr,
            "hits": {str(k): v for k, v in self.hits.items()},
            "sem": {str(k): v for k, v in self.sem.items()},
        }


def summarize(results: Sequence[RankResult], ks: Sequence[int] = DEFAULT_KS) -> MetricBlock:
    if not results:
        return MetricBlock(0, None, {k: None for k in ks}, {k: None for k in ks})
    return MetricBlock(
        num_queries=len(results),
        mrr=mrr(results),
        hits={k: hits_at_k(results, k) for k in ks},
        sem={k: sem_at_k(results, k) for k in ks},
    )


@dataclass(frozen=True)
class EvalReport:
    split: str
    mode: str
    ks: tuple[int, ...]
    overall: MetricBlock
    by_side: dict[str, MetricBlock]
    by_bucket: dict[str, MetricBlock]
    results: tuple[RankResult, ...] = field(default=(), repr=False)

    @property
    def num_queries(self) -> int:
        return self.overall.num_queries

    def to_json(self) -> dict[str, Any]:
        overall = self.overall.to_json()
        return {
            "split": self.split,
            "mode": self.mode,
            "overall": {key: overall[key] for key in ("mrr", "hits", "sem")},
            "by_side": {side: block.to_json() for side, block in self.by_side.items()},
            "by_bucket": {bucket: block.to_json() for bucket, block in self.by_bucket.items()},
            "num_queries": self.num_queries,
        }


def aggregate(
    results: Sequence[RankResult],
    *,
    split: str,
    mode: str,
    ks: Sequence[int] = DEFAULT_KS,
    buckets: dict[tuple[int, Side], str] | None = None,
) -> EvalReport:
    _require(results, "MRR")
    ks = tuple(sorted(set(ks)))
    by_side = {side: summarize([x for x in results if x.side == side], ks) for side in SIDES}
    assigned = [(buckets or {}).get((x.rel, x.side), UNBUCKETED) for x in results]
    by_bucket = {
        bucket: summarize([x for x, b in zip(results, assigned) if b == bucket], ks)
        for bucket in ALL_BUCKETS
    }
    return EvalReport(split, mode, ks, summarize(results, ks), by_side, by_bucket, tuple(results))


def evaluate(
    params: ModelParams,
    kg: KnowledgeGraph,
    split: str,
    mode: Mode = "filtered",
    bucket_spec: BucketSpec | None = None,
    *,
    ks: Sequence[int] = DEFAULT_KS,
    ties: Ties = "optimistic",
    threads: int = 1,
) -> EvalReport:
    """Rank both sides of every triple of ``split`` and aggregate the metrics."""
    triples = kg.split(split)
    if len(triples) == 0:
        raise undefined_metric("MRR", f"the {split} split is empty")
    k = max(ks)
    queries = [(Triple(*t), side) for t in triples.tolist() for side in SIDES]

    def run(query: tuple[Triple, Side]) -> RankResult:
        return rank_query(params, query[0], query[1], kg, mode, k=k, ties=ties)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, queries))
    else:
        results = [run(q) for q in queries]

    buckets = bucket_assign(kg, bucket_spec) if bucket_spec is not None else None
    report = aggregate(results, split=split, mode=mode, ks=ks, buckets=buckets)
    logger.debug("Evaluated %d %s queries (%s): MRR %.4f", len(results), split, mode, report.overall.mrr)
    return report
