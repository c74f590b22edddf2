"""Negative sampling: uniform corruption and paired valid/invalid negatives.

Every draw for train triple ``i`` at epoch ``k`` comes from a generator keyed
by ``(master_seed, k, i)``, so negative streams are identical across models,
losses, batch sizes and thread counts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from semkge.tools.errors import sampling_error, usage_error
from semkge.tools.kg import SIDES, KnowledgeGraph, Side, Triple, check_side

logger = logging.getLogger(__name__)

MAX_RETRIES = 100

# purpose tags mixed into every keyed generator
SAMPLER = 1
RELABEL = 2
SHUFFLE = 3


def keyed_rng(master_seed: int, purpose: int, *key: int) -> np.random.Generator:
    """Generator that is a pure function of ``(master_seed, purpose, *key)``."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), purpose, *map(int, key)]))


@dataclass
class SamplerStats:
    # negatives accepted although they are known true triples
    leaks: int = 0
    # positives for which no semantically valid negative can be built
    unpaired: int = 0


@dataclass(frozen=True)
class NegativePair:
    valid_neg: Triple
    invalid_neg: Triple
    valid_side: Side
    invalid_side: Side


def _replace(t: Triple, side: Side, entity: int) -> Triple:
    return Triple(entity, t.rel, t.tail) if side == "head" else Triple(t.head, t.rel, entity)


def _truth(t: Triple, side: Side) -> int:
    return t.head if side == "head" else t.tail


def _other(side: Side) -> Side:
    return "tail" if side == "head" else "head"


def corrupt_uniform(
    t: Triple,
    side: Side,
    kg: KnowledgeGraph,
    rng: np.random.Generator,
    stats: SamplerStats | None = None,
) -> Triple:
    """Replace one slot with an entity drawn uniformly from all others, rejecting known positives."""
    side = check_side(side)
    n = kg.num_entities
    if n < 2:
        raise usage_error(f"uniform corruption needs at least 2 entities, got {n}")
    t = Triple(*t)
    gt = _truth(t, side)
    candidate = t
    for _ in range(MAX_RETRIES):
        x = int(rng.integers(n - 1))
        candidate = _replace(t, side, x + (x >= gt))
        if tuple(candidate) not in kg.all_true:
            return candidate
    logger.warning("No unseen %s corruption of %s after %d draws; accepting %s", side, tuple(t), MAX_RETRIES, tuple(candidate))
    if stats is not None:
        stats.leaks += 1
    return candidate


def _draw(
    t: Triple,
    side: Side,
    pool: np.ndarray,
    kg: KnowledgeGraph,
    rng: np.random.Generator,
    *,
    allow_known: bool = False,
) -> Triple | None:
    """Uniform draw from ``pool`` minus the ground truth (and minus known positives)."""
    if len(pool) == 0:
        return None
    gt = _truth(t, side)

    def admissible(e: int) -> bool:
        return e != gt and (allow_known or tuple(_replace(t, side, e)) not in kg.all_true)

    for _ in range(MAX_RETRIES):
        e = int(pool[rng.integers(len(pool))])
        if admissible(e):
            return _replace(t, side, e)
    remaining = [int(e) for e in pool if admissible(int(e))]
    if not remaining:
        return None
    return _replace(t, side, remaining[int(rng.integers(len(remaining)))])


def _sample_one(
    t: Triple,
    kg: KnowledgeGraph,
    rng: np.random.Generator,
    stats: SamplerStats,
    *,
    valid: bool,
) -> tuple[Triple, Side]:
    first: Side = SIDES[int(rng.integers(2))]
    order = (first, _other(first))

    def pool(side: Side) -> np.ndarray:
        valid_ids, invalid_ids = kg.candidate_ids(t.rel, side)
        return valid_ids if valid else invalid_ids

    def feasible(side: Side) -> bool:
        # A valid negative keeps the untouched slot, which must already be valid.
        if not valid:
            return True
        kept = _other(side)
        return bool(kg.candidate_mask(t.rel, kept)[_truth(t, kept)])

    sides = [s for s in order if feasible(s)]
    for allow_known in (False, True):
        for side in sides:
            neg = _draw(t, side, pool(side), kg, rng, allow_known=allow_known)
            if neg is not None:
                if allow_known:
                    stats.leaks += 1
                    logger.warning("Accepted known positive %s as a negative for %s", tuple(neg), tuple(t))
                return neg, side

    if valid:
        # only reachable on unfiltered graphs; the loss re-classifies the negative
        neg = corrupt_uniform(t, first, kg, rng, stats)
        stats.unpaired += 1
        logger.warning("No semantically valid negative exists for %s; using %s", tuple(t), tuple(neg))
        return neg, first
    raise sampling_error(f"no semantically invalid replacement exists on either side of {tuple(t)}")


def sample_pair(
    t: Triple,
    kg: KnowledgeGraph,
    rng: np.random.Generator,
    stats: SamplerStats | None = None,
) -> NegativePair:
    """One semantically valid and one semantically invalid negative for ``t``."""
    stats = stats if stats is not None else SamplerStats()
    t = Triple(*t)
    valid_neg, valid_side = _sample_one(t, kg, rng, stats, valid=True)
    invalid_neg, invalid_side = _sample_one(t, kg, rng, stats, valid=False)
    return NegativePair(valid_neg, invalid_neg, valid_side, invalid_side)


@dataclass(frozen=True, eq=False)
class EpochNegatives:
    """Materialised negatives for one epoch, aligned with ``kg.train``."""

    epoch: int
    valid: np.ndarray
    invalid: np.ndarray
    valid_side: tuple[Side, ...]
    invalid_side: tuple[Side, ...]
    stats: SamplerStats = field(default_factory=SamplerStats)

    def __len__(self) -> int:
        return len(self.valid)

    def __getitem__(self, i: int) -> NegativePair:
        return NegativePair(
            Triple(*self.valid[i].tolist()),
            Triple(*self.invalid[i].tolist()),
            self.valid_side[i],
            self.invalid_side[i],
        )

    def __iter__(self) -> Iterator[NegativePair]:
        return (self[i] for i in range(len(self)))


def iter_epoch_negatives(kg: KnowledgeGraph, epoch_index: int, master_seed: int, stats: SamplerStats | None = None) -> Iterator[NegativePair]:
    stats = stats if stats is not None else SamplerStats()
    for i, t in enumerate(kg.train.tolist()):
        yield sample_pair(Triple(*t), kg, keyed_rng(master_seed, SAMPLER, epoch_index, i), stats)


def epoch_negatives(kg: KnowledgeGraph, epoch_index: int, master_seed: int) -> EpochNegatives:
    stats = SamplerStats()
    pairs = list(iter_epoch_negatives(kg, epoch_index, master_seed, stats))
    if stats.leaks or stats.unpaired:
        logger.info("Epoch %d negatives: %d leak(s), %d unpaired positive(s)", epoch_index, stats.leaks, stats.unpaired)
    return EpochNegatives(
        epoch=epoch_index,
        valid=np.array([p.valid_neg for p in pairs], dtype=np.int64).reshape(-1, 3),
        invalid=np.array([p.invalid_neg for p in pairs], dtype=np.int64).reshape(-1, 3),
        valid_side=tuple(p.valid_side for p in pairs),
        invalid_side=tuple(p.invalid_side for p in pairs),
        stats=stats,
    )
