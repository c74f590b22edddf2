"""Identifier spaces, triples, schema and the semantic-validity predicate.

Everything here is immutable after construction. Entities, relations and
classes are dense integer ids; names live alongside for file round-trips.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Mapping, NamedTuple

import numpy as np

from semkge.tools.errors import usage_error

Side = Literal["head", "tail"]
SIDES: tuple[Side, Side] = ("head", "tail")
SPLITS = ("train", "valid", "test")


class Triple(NamedTuple):
    head: int
    rel: int
    tail: int


def as_triple_array(triples: object) -> np.ndarray:
    """Coerce a sequence of triples (or an array) to an ``(n, 3)`` int64 array."""
    arr = np.asarray(triples, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 3), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise usage_error(f"expected (n, 3) triples, got shape {arr.shape}")
    return arr


def check_side(side: str) -> Side:
    if side not in SIDES:
        raise usage_error(f"side must be 'head' or 'tail', got {side!r}")
    return side  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class Schema:
    """Entity types plus relation domain/range constraints.

    A relation missing from ``rel_domain`` (resp. ``rel_range``) has no declared
    head (resp. tail) constraint. Class hierarchies are taken as given: no
    subclass closure is computed.
    """

    num_entities: int
    num_relations: int
    num_classes: int
    entity_classes: Mapping[int, frozenset[int]] = field(default_factory=dict)
    rel_domain: Mapping[int, frozenset[int]] = field(default_factory=dict)
    rel_range: Mapping[int, frozenset[int]] = field(default_factory=dict)
    class_names: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for label, mapping, bound in (
            ("entity", self.entity_classes, self.num_entities),
            ("relation domain", self.rel_domain, self.num_relations),
            ("relation range", self.rel_range, self.num_relations),
        ):
            for key, classes in mapping.items():
                if not 0 <= key < bound:
                    raise usage_error(f"{label} id {key} out of bounds [0, {bound})")
                for c in classes:
                    if not 0 <= c < self.num_classes:
                        raise usage_error(f"class id {c} out of bounds [0, {self.num_classes})")

    def types(self, entity: int) -> frozenset[int]:
        return self.entity_classes.get(entity, frozenset())

    def domain(self, rel: int) -> frozenset[int] | None:
        return self.rel_domain.get(rel)

    def range(self, rel: int) -> frozenset[int] | None:
        return self.rel_range.get(rel)

    def constraint(self, rel: int, side: Side) -> frozenset[int] | None:
        return self.domain(rel) if side == "head" else self.range(rel)

    def is_declared(self, rel: int) -> bool:
        return rel in self.rel_domain and rel in self.rel_range

    def check_triple(self, t: Triple) -> None:
        h, r, tail = t
        if not 0 <= h < self.num_entities or not 0 <= tail < self.num_entities:
            raise usage_error(f"entity id out of bounds in {tuple(t)} (|E|={self.num_entities})")
        if not 0 <= r < self.num_relations:
            raise usage_error(f"relation id out of bounds in {tuple(t)} (|R|={self.num_relations})")

    @cached_property
    def membership(self) -> np.ndarray:
        """Boolean ``|E| x |C|`` entity-class incidence matrix."""
        m = np.zeros((self.num_entities, self.num_classes), dtype=bool)
        for e, classes in self.entity_classes.items():
            if classes:
                m[e, sorted(classes)] = True
        return m


def _side_satisfied(schema: Schema, entity: int, rel: int, side: Side) -> bool:
    expected = schema.constraint(rel, side)
    if expected is None:
        return True
    return not schema.types(entity).isdisjoint(expected)


def is_sem_valid(t: Triple, s: Schema) -> bool:
    """True iff type(h) meets domain(r) and type(t) meets range(r).

    An undeclared domain or range counts as satisfied; an untyped entity fails
    any declared constraint.
    """
    s.check_triple(t)
    h, r, tail = t
    return _side_satisfied(s, h, r, "head") and _side_satisfied(s, tail, r, "tail")


def _completion_index(triples: np.ndarray) -> tuple[dict[tuple[int, int], np.ndarray], dict[tuple[int, int], np.ndarray]]:
    tails: dict[tuple[int, int], list[int]] = {}
    heads: dict[tuple[int, int], list[int]] = {}
    for h, r, t in triples.tolist():
        tails.setdefault((h, r), []).append(t)
        heads.setdefault((r, t), []).append(h)
    return (
        {k: np.unique(np.asarray(v, dtype=np.int64)) for k, v in tails.items()},
        {k: np.unique(np.asarray(v, dtype=np.int64)) for k, v in heads.items()},
    )


_EMPTY = np.zeros(0, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """Integer-id triple store with train/valid/test splits and a schema."""

    num_entities: int
    num_relations: int
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    schema: Schema
    entity_names: tuple[str, ...] = ()
    relation_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name in SPLITS:
            arr = as_triple_array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            if len(arr):
                ents = arr[:, [0, 2]]
                if ents.min() < 0 or ents.max() >= self.num_entities:
                    raise usage_error(f"{name} split has an entity id outside [0, {self.num_entities})")
                if arr[:, 1].min() < 0 or arr[:, 1].max() >= self.num_relations:
                    raise usage_error(f"{name} split has a relation id outside [0, {self.num_relations})")
        if self.schema.num_entities != self.num_entities or self.schema.num_relations != self.num_relations:
            raise usage_error("schema vocabulary sizes do not match the knowledge graph")
        sets = {name: {tuple(x) for x in getattr(self, name).tolist()} for name in SPLITS}
        for a, b in (("train", "valid"), ("train", "test"), ("valid", "test")):
            overlap = sets[a] & sets[b]
            if overlap:
                raise usage_error(
                    f"{a} and {b} splits share {len(overlap)} triple(s), e.g. {sorted(overlap)[0]}",
                    "Deduplicate the split files",
                )

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise usage_error(f"unknown split {name!r}; expected one of {SPLITS}")
        return getattr(self, name)

    @cached_property
    def all_true(self) -> frozenset[tuple[int, int, int]]:
        return frozenset(
            tuple(x) for name in SPLITS for x in getattr(self, name).tolist()
        )

    @cached_property
    def _true_index(self):
        return _completion_index(np.concatenate([self.train, self.valid, self.test]))

    @cached_property
    def _train_index(self):
        return _completion_index(self.train)

    def known(self, r: int, fixed: int, side: Side, *, train_only: bool = False) -> np.ndarray:
        """Entities completing ``(fixed, r, ?)`` (side=tail) or ``(?, r, fixed)`` (side=head)."""
        tails, heads = self._train_index if train_only else self._true_index
        if side == "tail":
            return tails.get((fixed, r), _EMPTY)
        return heads.get((r, fixed), _EMPTY)

    @cached_property
    def _candidate_masks(self) -> dict[Side, np.ndarray]:
        membership = self.schema.membership
        masks: dict[Side, np.ndarray] = {}
        for side in SIDES:
            m = np.ones((self.num_relations, self.num_entities), dtype=bool)
            for r in range(self.num_relations):
                expected = self.schema.constraint(r, side)
                if expected is not None:
                    m[r] = membership[:, sorted(expected)].any(axis=1) if expected else False
            m.setflags(write=False)
            masks[side] = m
        return masks

    def candidate_mask(self, r: int, side: Side) -> np.ndarray:
        """Boolean ``|E|`` mask of semantically valid entities for one side of ``r``."""
        if not 0 <= r < self.num_relations:
            raise usage_error(f"relation id {r} out of bounds [0, {self.num_relations})")
        return self._candidate_masks[check_side(side)][r]

    @cached_property
    def _candidate_ids(self) -> dict[tuple[int, Side], tuple[np.ndarray, np.ndarray]]:
        out = {}
        for side in SIDES:
            for r in range(self.num_relations):
                mask = self._candidate_masks[side][r]
                out[(r, side)] = (np.flatnonzero(mask), np.flatnonzero(~mask))
        return out

    def candidate_ids(self, r: int, side: Side) -> tuple[np.ndarray, np.ndarray]:
        """``(valid_ids, invalid_ids)`` for one side of ``r``, ascending."""
        self.candidate_mask(r, side)
        return self._candidate_ids[(r, side)]


def sem_valid_candidates(r: int, side: Side, kg: KnowledgeGraph) -> frozenset[int]:
    """Entities that satisfy ``r``'s domain (side=head) or range (side=tail)."""
    return frozenset(np.flatnonzero(kg.candidate_mask(r, side)).tolist())
