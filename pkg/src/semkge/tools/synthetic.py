"""Synthetic schema'd knowledge graphs for desk-scale checks and property tests."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from semkge.tools.errors import usage_error
from semkge.tools.kg import KnowledgeGraph, Schema


def _two_type_kg(
    triples: list[tuple[int, int, int]],
    seed: int,
    size: int,
    domains: Mapping[int, int],
    ranges: Mapping[int, int],
    num_valid: int,
    num_test: int,
    relation_names: tuple[str, ...],
) -> KnowledgeGraph:
    """Random valid/test split of ``triples`` over two types of ``size`` entities each."""
    num_entities, num_relations = 2 * size, len(relation_names)
    triples_arr = np.asarray(triples, dtype=np.int64)
    order = np.random.default_rng(seed).permutation(len(triples_arr))
    if num_valid + num_test >= len(order):
        raise usage_error(f"{num_valid} valid + {num_test} test triples leave no training data")
    test = triples_arr[order[:num_test]]
    valid = triples_arr[order[num_test:num_test + num_valid]]
    train = triples_arr[np.sort(order[num_test + num_valid:])]

    schema = Schema(
        num_entities=num_entities,
        num_relations=num_relations,
        num_classes=2,
        entity_classes={e: frozenset({e // size}) for e in range(num_entities)},
        rel_domain={r: frozenset({c}) for r, c in domains.items()},
        rel_range={r: frozenset({c}) for r, c in ranges.items()},
        class_names=("block_a", "block_b"),
    )
    return KnowledgeGraph(
        num_entities=num_entities,
        num_relations=num_relations,
        train=train,
        valid=valid,
        test=test,
        schema=schema,
        entity_names=tuple(f"{'ab'[e // size]}{e % size:03d}" for e in range(num_entities)),
        relation_names=relation_names,
    )


def typed_blocks(
    seed: int = 0,
    *,
    num_entities: int = 200,
    num_relations: int = 4,
    tails_per_head: int = 6,
    num_valid: int = 100,
    num_test: int = 100,
) -> KnowledgeGraph:
    """
    Two disjoint entity types; relation ``r`` links entities of block ``r % 2``.

    Each head of a block has ``tails_per_head`` tails in its own block at a
    relation-specific offset. Domains and ranges declare the block type, so
    every entity of the other block is a semantically invalid candidate.
    """
    if num_entities < 4 or num_entities % 2:
        raise usage_error(f"typed blocks need an even number of entities >= 4, got {num_entities}")
    size = num_entities // 2
    if not 0 < tails_per_head < size:
        raise usage_error(f"tails_per_head must be in [1, {size - 1}], got {tails_per_head}")

    triples = []
    for r in range(num_relations):
        block = r % 2
        base = block * size
        offset = 1 + 7 * (r // 2)
        for local in range(size):
            for j in range(tails_per_head):
                tail = (local + offset + j) % size
                triples.append((base + local, r, base + tail))
    blocks = {r: r % 2 for r in range(num_relations)}
    return _two_type_kg(
        triples, seed, size, blocks, blocks, num_valid, num_test,
        tuple(f"rel{r}" for r in range(num_relations)),
    )


def linked_blocks(
    seed: int = 0,
    *,
    num_groups: int = 10,
    group_size: int = 10,
    num_valid: int = 100,
    num_test: int = 100,
) -> KnowledgeGraph:
    """
    Two typed blocks of chained groups, linked one-to-one across the blocks.

    Each block holds ``num_groups`` groups of ``group_size`` entities.
    ``chain_a`` (``chain_b``) links every entity of group ``g`` to every entity
    of group ``g + 1`` inside block A (B). ``twin`` links the i-th entity of A
    to the i-th entity of B and ``twin_of`` links it back.

    A chain query has two kinds of near misses: the neighbouring groups of its
    own block (valid) and the twins of its true tails (invalid, one ``twin``
    translation away). A loss that pushes both kinds equally far leaves them
    interleaved in the ranking.
    """
    if num_groups < 2 or group_size < 1:
        raise usage_error(f"linked blocks need >= 2 groups of >= 1 entity, got {num_groups} x {group_size}")
    size = num_groups * group_size

    triples = []
    for block in (0, 1):
        base = block * size
        for g in range(num_groups - 1):
            heads = range(base + g * group_size, base + (g + 1) * group_size)
            tails = range(base + (g + 1) * group_size, base + (g + 2) * group_size)
            triples.extend((h, block, t) for h in heads for t in tails)
    for i in range(size):
        triples.append((i, 2, size + i))
        triples.append((size + i, 3, i))
    return _two_type_kg(
        triples, seed, size,
        {0: 0, 1: 1, 2: 0, 3: 1},
        {0: 0, 1: 1, 2: 1, 3: 0},
        num_valid, num_test,
        ("chain_a", "chain_b", "twin", "twin_of"),
    )


def random_kg(
    seed: int,
    *,
    num_entities: int = 30,
    num_relations: int = 3,
    num_classes: int = 3,
    num_triples: int = 60,
    untyped_share: float = 0.1,
    undeclared_share: float = 0.0,
    split: tuple[float, float, float] = (0.8, 0.1, 0.1),
) -> KnowledgeGraph:
    """Random typed entities, random domain/range constraints, random distinct triples."""
    rng = np.random.default_rng(seed)
    entity_classes = {}
    for e in range(num_entities):
        if rng.random() < untyped_share:
            continue
        k = int(rng.integers(1, min(2, num_classes) + 1))
        entity_classes[e] = frozenset(rng.choice(num_classes, size=k, replace=False).tolist())

    def constraint() -> frozenset[int] | None:
        if rng.random() < undeclared_share:
            return None
        k = int(rng.integers(1, max(1, num_classes - 1) + 1))
        return frozenset(rng.choice(num_classes, size=k, replace=False).tolist())

    rel_domain, rel_range = {}, {}
    for r in range(num_relations):
        dom, rng_ = constraint(), constraint()
        if dom is not None:
            rel_domain[r] = dom
        if rng_ is not None:
            rel_range[r] = rng_

    seen: dict[tuple[int, int, int], None] = {}
    for _ in range(num_triples * 4):
        if len(seen) == num_triples:
            break
        t = (int(rng.integers(num_entities)), int(rng.integers(num_relations)), int(rng.integers(num_entities)))
        seen.setdefault(t, None)
    triples = np.asarray(list(seen), dtype=np.int64).reshape(-1, 3)
    n = len(triples)
    n_train = int(round(split[0] * n))
    n_valid = int(round(split[1] * n))
    return KnowledgeGraph(
        num_entities=num_entities,
        num_relations=num_relations,
        train=triples[:n_train],
        valid=triples[n_train:n_train + n_valid],
        test=triples[n_train + n_valid:],
        schema=Schema(
            num_entities=num_entities,
            num_relations=num_relations,
            num_classes=num_classes,
            entity_classes=entity_classes,
            rel_domain=rel_domain,
            rel_range=rel_range,
        ),
    )
