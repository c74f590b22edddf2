"""Scoring functions and analytic gradients over dense numpy embedding tables.

Scores are oriented so that higher means more plausible for every model:
translational models return the negated L2 distance.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from semkge.tools.errors import usage_error
from semkge.tools.kg import Side, as_triple_array, check_side

Partial = tuple[str, np.ndarray, np.ndarray]

# unit rows closer than this to length 1 are left untouched
UNIT_TOLERANCE = 1e-12


@dataclass(eq=False)
class ModelParams:
    kind: str
    dim: int
    tables: dict[str, np.ndarray]

    @property
    def num_entities(self) -> int:
        return self.tables["entity"].shape[0]

    @property
    def num_relations(self) -> int:
        return self.tables["relation"].shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(self.kind, self.dim, {k: v.copy() for k, v in self.tables.items()})

    def is_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.tables.values())

    def equals(self, other: "ModelParams") -> bool:
        return (
            self.kind == other.kind
            and self.dim == other.dim
            and self.tables.keys() == other.tables.keys()
            and all(np.array_equal(v, other.tables[k]) for k, v in self.tables.items())
        )


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1, keepdims=True)


def _unit(v: np.ndarray) -> np.ndarray:
    n = _norm(v)[..., None]
    return v / np.where(n == 0.0, 1.0, n)


class ScoringModel(ABC):
    kind: ClassVar[str]
    # (table name, "entity" | "relation") in checkpoint order
    table_spec: ClassVar[tuple[tuple[str, str], ...]]
    default_loss: ClassVar[str]

    def shapes(self, num_entities: int, num_relations: int, dim: int) -> dict[str, tuple[int, int]]:
        rows = {"entity": num_entities, "relation": num_relations}
        return {name: (rows[owner], dim) for name, owner in self.table_spec}

    @abstractmethod
    def score_rows(self, tables: dict[str, np.ndarray], h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def partials(self, tables: dict[str, np.ndarray], h: np.ndarray, r: np.ndarray, t: np.ndarray) -> list[Partial]:
        """Per-triple partial derivatives of the score, as (table, row ids, rows)."""

    def project(self, params: ModelParams, rows: dict[str, np.ndarray]) -> None:
        """Re-impose parameter constraints on the given rows after an update."""


class TransE(ScoringModel):
    kind = "transe"
    table_spec = (("entity", "entity"), ("relation", "relation"))
    default_loss = "phl"

    def score_rows(self, tables, h, r, t):
        e, rel = tables["entity"], tables["relation"]
        return -_norm(e[h] + rel[r] - e[t])

    def partials(self, tables, h, r, t):
        e, rel = tables["entity"], tables["relation"]
        g = -_unit(e[h] + rel[r] - e[t])
        return [("entity", h, g), ("relation", r, g), ("entity", t, -g)]


class TransH(ScoringModel):
    kind = "transh"
    table_spec = (("entity", "entity"), ("relation", "relation"), ("normal", "relation"))
    default_loss = "phl"

    def score_rows(self, tables, h, r, t):
        e, d, w = tables["entity"], tables["relation"], tables["normal"]
        u = e[h] - e[t]
        wr = w[r]
        return -_norm(u - _dot(wr, u) * wr + d[r])

    def partials(self, tables, h, r, t):
        e, d, w = tables["entity"], tables["relation"], tables["normal"]
        u = e[h] - e[t]
        wr = w[r]
        wu = _dot(wr, u)
        g = -_unit(u - wu * wr + d[r])
        gw = _dot(g, wr)
        gu = g - gw * wr
        return [
            ("entity", h, gu),
            ("entity", t, -gu),
            ("relation", r, g),
            ("normal", r, -gw * u - wu * g),
        ]

    def project(self, params, rows):
        idx = rows.get("normal")
        if idx is not None and len(idx):
            w = params.tables["normal"]
            idx = np.asarray(idx)
            moved = idx[np.abs(_norm(w[idx]) - 1.0) > UNIT_TOLERANCE]
            w[moved] = _unit(w[moved])


class DistMult(ScoringModel):
    kind = "distmult"
    table_spec = (("entity", "entity"), ("relation", "relation"))
    default_loss = "phl"

    def score_rows(self, tables, h, r, t):
        e, rel = tables["entity"], tables["relation"]
        return np.sum(e[h] * rel[r] * e[t], axis=-1)

    def partials(self, tables, h, r, t):
        e, rel = tables["entity"], tables["relation"]
        eh, er, et = e[h], rel[r], e[t]
        return [("entity", h, er * et), ("relation", r, eh * et), ("entity", t, eh * er)]


class ComplEx(ScoringModel):
    kind = "complex"
    table_spec = (
        ("entity", "entity"),
        ("entity_im", "entity"),
        ("relation", "relation"),
        ("relation_im", "relation"),
    )
    default_loss = "pll"

    def _gather(self, tables, h, r, t):
        re, im = tables["entity"], tables["entity_im"]
        return re[h], im[h], tables["relation"][r], tables["relation_im"][r], re[t], im[t]

    def score_rows(self, tables, h, r, t):
        hr, hi, rr, ri, tr, ti = self._gather(tables, h, r, t)
        return np.sum(hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr, axis=-1)

    def partials(self, tables, h, r, t):
        hr, hi, rr, ri, tr, ti = self._gather(tables, h, r, t)
        return [
            ("entity", h, rr * tr + ri * ti),
            ("entity_im", h, rr * ti - ri * tr),
            ("relation", r, hr * tr + hi * ti),
            ("relation_im", r, hr * ti - hi * tr),
            ("entity", t, hr * rr - hi * ri),
            ("entity_im", t, hi * rr + hr * ri),
        ]


class SimplE(ScoringModel):
    kind = "simple"
    # "entity" holds the head-role vectors, "entity_tail" the tail-role vectors.
    table_spec = (
        ("entity", "entity"),
        ("entity_tail", "entity"),
        ("relation", "relation"),
        ("relation_inv", "relation"),
    )
    default_loss = "pll"

    def _gather(self, tables, h, r, t):
        head, tail = tables["entity"], tables["entity_tail"]
        return head[h], tail[t], tables["relation"][r], tail[h], tables["relation_inv"][r], head[t]

    def score_rows(self, tables, h, r, t):
        hh, tt, fw, ht, inv, th = self._gather(tables, h, r, t)
        return 0.5 * (np.sum(hh * fw * tt, axis=-1) + np.sum(ht * inv * th, axis=-1))

    def partials(self, tables, h, r, t):
        hh, tt, fw, ht, inv, th = self._gather(tables, h, r, t)
        return [
            ("entity", h, 0.5 * fw * tt),
            ("entity_tail", t, 0.5 * hh * fw),
            ("relation", r, 0.5 * hh * tt),
            ("entity_tail", h, 0.5 * inv * th),
            ("entity", t, 0.5 * ht * inv),
            ("relation_inv", r, 0.5 * ht * th),
        ]


MODELS: dict[str, ScoringModel] = {m.kind: m for m in (TransE(), TransH(), DistMult(), ComplEx(), SimplE())}


def get_model(kind: str) -> ScoringModel:
    model = MODELS.get(kind)
    if model is None:
        raise usage_error(f"unknown model kind {kind!r}", f"Use one of: {', '.join(MODELS)}")
    return model


def init(kind: str, num_entities: int, num_relations: int, dim: int, seed: int) -> ModelParams:
    """Xavier-uniform tables in ``±sqrt(6 / 2d)``, drawn in declared table order."""
    if dim <= 0:
        raise usage_error(f"embedding dimension must be positive, got {dim}")
    model = get_model(kind)
    rng = np.random.default_rng(seed)
    bound = np.sqrt(6.0 / (2 * dim))
    tables = {
        name: rng.uniform(-bound, bound, size=shape)
        for name, shape in model.shapes(num_entities, num_relations, dim).items()
    }
    params = ModelParams(kind, dim, tables)
    model.project(params, {name: np.arange(shape[0]) for name, shape in model.shapes(num_entities, num_relations, dim).items()})
    return params


def _check(params: ModelParams, batch: np.ndarray) -> None:
    model = get_model(params.kind)
    expected = model.shapes(params.num_entities, params.num_relations, params.dim)
    for name, shape in expected.items():
        table = params.tables.get(name)
        if table is None or table.shape != shape:
            got = None if table is None else table.shape
            raise usage_error(f"{params.kind} table {name!r} has shape {got}, expected {shape}")
    if len(batch):
        if batch[:, [0, 2]].min() < 0 or batch[:, [0, 2]].max() >= params.num_entities:
            raise usage_error(f"entity id out of bounds for |E|={params.num_entities}")
        if batch[:, 1].min() < 0 or batch[:, 1].max() >= params.num_relations:
            raise usage_error(f"relation id out of bounds for |R|={params.num_relations}")


def score(params: ModelParams, batch: object) -> np.ndarray:
    batch = as_triple_array(batch)
    _check(params, batch)
    return get_model(params.kind).score_rows(params.tables, batch[:, 0], batch[:, 1], batch[:, 2])


def sparse_grad(params: ModelParams, batch: object, upstream: object) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """
    Gradient of ``sum_i upstream_i * score(t_i)`` restricted to touched rows.

    Returns ``{table: (unique row ids, summed row gradients)}``. Accumulation
    order is fixed by the batch order, so results are bit-reproducible.
    """
    batch = as_triple_array(batch)
    _check(params, batch)
    weights = np.asarray(upstream, dtype=np.float64)
    if weights.shape != (len(batch),):
        raise usage_error(f"upstream has shape {weights.shape}, expected ({len(batch)},)")
    model = get_model(params.kind)
    grouped: dict[str, tuple[list[np.ndarray], list[np.ndarray]]] = {}
    for name, idx, rows in model.partials(params.tables, batch[:, 0], batch[:, 1], batch[:, 2]):
        ids, vals = grouped.setdefault(name, ([], []))
        ids.append(idx)
        vals.append(weights[:, None] * rows)

    out: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for name, _ in model.table_spec:
        if name not in grouped:
            out[name] = (np.zeros(0, dtype=np.int64), np.zeros((0, params.dim)))
            continue
        ids, vals = grouped[name]
        uniq, inverse = np.unique(np.concatenate(ids), return_inverse=True)
        acc = np.zeros((len(uniq), params.dim))
        np.add.at(acc, inverse, np.concatenate(vals))
        out[name] = (uniq, acc)
    return out


def grad(params: ModelParams, batch: object, upstream: object) -> dict[str, np.ndarray]:
    """Dense gradient tables, same shapes as ``params.tables``; untouched rows are zero."""
    dense = {name: np.zeros_like(table) for name, table in params.tables.items()}
    for name, (ids, rows) in sparse_grad(params, batch, upstream).items():
        dense[name][ids] = rows
    return dense


def _completions(num_entities: int, r: int, fixed: int, side: Side) -> np.ndarray:
    candidates = np.arange(num_entities, dtype=np.int64)
    batch = np.empty((num_entities, 3), dtype=np.int64)
    batch[:, 1] = r
    if side == "tail":
        batch[:, 0], batch[:, 2] = fixed, candidates
    else:
        batch[:, 0], batch[:, 2] = candidates, fixed
    return batch


def score_all(params: ModelParams, r: int, fixed: int, side: Side) -> np.ndarray:
    """Scores of ``(fixed, r, e)`` (side=tail) or ``(e, r, fixed)`` (side=head) for every entity ``e``."""
    return score(params, _completions(params.num_entities, r, fixed, check_side(side)))


def score_all_grad(
    params: ModelParams, r: int, fixed: int, side: Side, upstream: np.ndarray
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Sparse gradient of ``sum_e upstream_e * score_all(...)[e]``."""
    return sparse_grad(params, _completions(params.num_entities, r, fixed, check_side(side)), upstream)
