"""Dataset tools (load/filter/stats/write).

Triple files are ``head<TAB>relation<TAB>tail``; schema files are
``entity<TAB>class`` and ``relation<TAB>class``. No headers, UTF-8, labels
are opaque strings. Ids are assigned in first-appearance order over the
train, valid and test files.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from semkge.tools.errors import config_error, io_error, parse_error
from semkge.tools.kg import SIDES, KnowledgeGraph, Schema, Triple

logger = logging.getLogger(__name__)

DEFAULT_MIN_CANDIDATES = 10


@dataclass
class Vocab:
    names: list[str] = field(default_factory=list)
    ids: dict[str, int] = field(default_factory=dict)

    def add(self, name: str) -> int:
        idx = self.ids.get(name)
        if idx is None:
            idx = len(self.names)
            self.ids[name] = idx
            self.names.append(name)
        return idx

    def get(self, name: str) -> int | None:
        return self.ids.get(name)

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class DatasetPaths:
    train: Path
    valid: Path
    test: Path
    entity_types: Path
    domains: Path
    ranges: Path

    def missing(self) -> list[Path]:
        return [p for p in asdict(self).values() if not Path(p).exists()]


@dataclass(frozen=True)
class DatasetStats:
    num_entities: int
    num_relations: int
    num_train: int
    num_valid: int
    num_test: int

    def to_json(self) -> dict[str, int]:
        return {
            "entities": self.num_entities,
            "relations": self.num_relations,
            "train": self.num_train,
            "valid": self.num_valid,
            "test": self.num_test,
        }

    def format_table(self, name: str = "dataset") -> str:
        header = f"{'Dataset':<14}{'|E|':>10}{'|R|':>8}{'|T_train|':>12}{'|T_valid|':>12}{'|T_test|':>12}"
        row = (
            f"{name:<14}{self.num_entities:>10,}{self.num_relations:>8,}"
            f"{self.num_train:>12,}{self.num_valid:>12,}{self.num_test:>12,}"
        )
        return f"{header}\n{row}"


def _read_rows(path: Path, arity: int) -> list[tuple[int, list[str]]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise io_error(str(path), str(e)) from e
    rows: list[tuple[int, list[str]]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        fields = raw.split("\t")
        if len(fields) != arity or any(not f for f in fields):
            raise parse_error(str(path), line_no, f"expected {arity} tab-separated fields, got {raw!r}")
        rows.append((line_no, fields))
    return rows


def load_triples(path: Path, entities: Vocab, relations: Vocab) -> list[Triple]:
    out: list[Triple] = []
    for _, (h, r, t) in _read_rows(path, 3):
        out.append(Triple(entities.add(h), relations.add(r), entities.add(t)))
    return out


def load_schema(
    entity_types_path: Path,
    domains_path: Path,
    ranges_path: Path,
    entities: Vocab,
    relations: Vocab,
    classes: Vocab | None = None,
) -> Schema:
    """
    Read entity types and relation domains/ranges into a Schema.

    Multiple lines per key accumulate into a set. Keys never seen in a triple
    file are skipped and recorded in ``Schema.warnings``.
    """
    classes = classes if classes is not None else Vocab()
    warnings: list[str] = []

    entity_classes: dict[int, set[int]] = {}
    for line_no, (name, cls) in _read_rows(entity_types_path, 2):
        e = entities.get(name)
        if e is None:
            warnings.append(f"{entity_types_path}:{line_no}: unknown entity {name!r}")
            continue
        entity_classes.setdefault(e, set()).add(classes.add(cls))

    constraints: list[dict[int, set[int]]] = []
    for path in (domains_path, ranges_path):
        by_rel: dict[int, set[int]] = {}
        for line_no, (name, cls) in _read_rows(path, 2):
            r = relations.get(name)
            if r is None:
                warnings.append(f"{path}:{line_no}: unknown relation {name!r}")
                continue
            by_rel.setdefault(r, set()).add(classes.add(cls))
        constraints.append(by_rel)

    if warnings:
        logger.warning("Schema files reference %d unknown key(s); first: %s", len(warnings), warnings[0])

    return Schema(
        num_entities=len(entities),
        num_relations=len(relations),
        num_classes=len(classes),
        entity_classes={e: frozenset(c) for e, c in entity_classes.items()},
        rel_domain={r: frozenset(c) for r, c in constraints[0].items()},
        rel_range={r: frozenset(c) for r, c in constraints[1].items()},
        class_names=tuple(classes.names),
        warnings=tuple(warnings),
    )


def load_dataset(paths: DatasetPaths) -> KnowledgeGraph:
    entities, relations = Vocab(), Vocab()
    splits = {
        name: load_triples(getattr(paths, name), entities, relations)
        for name in ("train", "valid", "test")
    }
    schema = load_schema(paths.entity_types, paths.domains, paths.ranges, entities, relations)
    kg = KnowledgeGraph(
        num_entities=len(entities),
        num_relations=len(relations),
        train=splits["train"],
        valid=splits["valid"],
        test=splits["test"],
        schema=schema,
        entity_names=tuple(entities.names),
        relation_names=tuple(relations.names),
    )
    logger.info("Loaded %s", stats(kg).to_json())
    return kg


def _declared(schema: Schema) -> np.ndarray:
    return np.array([schema.is_declared(r) for r in range(schema.num_relations)], dtype=bool)


def _active_entities(train: np.ndarray, num_entities: int) -> np.ndarray:
    active = np.zeros(num_entities, dtype=bool)
    active[train[:, 0]] = True
    active[train[:, 2]] = True
    return active


def filter_dataset(kg: KnowledgeGraph, *, min_candidates: int = DEFAULT_MIN_CANDIDATES) -> KnowledgeGraph:
    """
    Keep only triples usable for semantic training and Sem@K evaluation.

    Train triples need a relation with declared domain and range, plus another
    semantically valid head and tail besides their own. Valid/test triples need
    a declared relation seen in train, entities seen in train, and more than
    ``min_candidates`` valid entities on both sides. Candidate counts are taken
    over the entities that remain in train, so the train conditions are
    re-checked until nothing is removed. Entities and relations are re-indexed
    in first-appearance order over the filtered train split.
    """
    masks = {side: np.stack([kg.candidate_mask(r, side) for r in range(kg.num_relations)])
             if kg.num_relations else np.zeros((0, kg.num_entities), dtype=bool)
             for side in SIDES}
    declared = _declared(kg.schema)

    train = kg.train
    iterations = 0
    while True:
        iterations += 1
        active = _active_entities(train, kg.num_entities)
        valid_head = masks["head"] & active
        valid_tail = masks["tail"] & active
        n_head = valid_head.sum(axis=1)
        n_tail = valid_tail.sum(axis=1)
        h, r, t = train[:, 0], train[:, 1], train[:, 2]
        keep = (
            declared[r]
            & (n_head[r] - valid_head[r, h] >= 1)
            & (n_tail[r] - valid_tail[r, t] >= 1)
        )
        if keep.all():
            break
        train = train[keep]
        logger.debug("Filter pass %d removed %d train triple(s)", iterations, int((~keep).sum()))

    if len(train) == 0:
        raise config_error(
            "filtering removed every train triple",
            "Check that relations have declared domains/ranges and entities are typed",
        )

    active = _active_entities(train, kg.num_entities)
    n_head = (masks["head"] & active).sum(axis=1)
    n_tail = (masks["tail"] & active).sum(axis=1)
    train_rels = np.zeros(kg.num_relations, dtype=bool)
    train_rels[train[:, 1]] = True

    def keep_eval(split: np.ndarray) -> np.ndarray:
        h, r, t = split[:, 0], split[:, 1], split[:, 2]
        ok = (
            declared[r]
            & train_rels[r]
            & active[h]
            & active[t]
            & (n_head[r] > min_candidates)
            & (n_tail[r] > min_candidates)
        )
        return split[ok]

    valid, test = keep_eval(kg.valid), keep_eval(kg.test)
    logger.info(
        "Filter converged after %d pass(es): train %d -> %d, valid %d -> %d, test %d -> %d",
        iterations, len(kg.train), len(train), len(kg.valid), len(valid), len(kg.test), len(test),
    )
    return _reindex(kg, train, valid, test)


def _reindex(kg: KnowledgeGraph, train: np.ndarray, valid: np.ndarray, test: np.ndarray) -> KnowledgeGraph:
    ent_map: dict[int, int] = {}
    rel_map: dict[int, int] = {}
    for h, r, t in train.tolist():
        ent_map.setdefault(h, len(ent_map))
        rel_map.setdefault(r, len(rel_map))
        ent_map.setdefault(t, len(ent_map))

    def remap(split: np.ndarray) -> list[Triple]:
        return [Triple(ent_map[h], rel_map[r], ent_map[t]) for h, r, t in split.tolist()]

    s = kg.schema
    schema = Schema(
        num_entities=len(ent_map),
        num_relations=len(rel_map),
        num_classes=s.num_classes,
        entity_classes={ent_map[e]: c for e, c in s.entity_classes.items() if e in ent_map},
        rel_domain={rel_map[r]: c for r, c in s.rel_domain.items() if r in rel_map},
        rel_range={rel_map[r]: c for r, c in s.rel_range.items() if r in rel_map},
        class_names=s.class_names,
        warnings=s.warnings,
    )

    def names(old: tuple[str, ...], mapping: dict[int, int]) -> tuple[str, ...]:
        if not old:
            return ()
        out = [""] * len(mapping)
        for o, n in mapping.items():
            out[n] = old[o]
        return tuple(out)

    return KnowledgeGraph(
        num_entities=len(ent_map),
        num_relations=len(rel_map),
        train=remap(train),
        valid=remap(valid),
        test=remap(test),
        schema=schema,
        entity_names=names(kg.entity_names, ent_map),
        relation_names=names(kg.relation_names, rel_map),
    )


def stats(kg: KnowledgeGraph) -> DatasetStats:
    return DatasetStats(
        num_entities=kg.num_entities,
        num_relations=kg.num_relations,
        num_train=len(kg.train),
        num_valid=len(kg.valid),
        num_test=len(kg.test),
    )


def write_dataset(kg: KnowledgeGraph, out_dir: Path) -> DatasetPaths:
    """Write the six TSV files; output is a deterministic function of the KG."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ent = kg.entity_names or tuple(str(i) for i in range(kg.num_entities))
    rel = kg.relation_names or tuple(str(i) for i in range(kg.num_relations))
    cls = kg.schema.class_names or tuple(str(i) for i in range(kg.schema.num_classes))

    paths = DatasetPaths(
        train=out_dir / "train.tsv",
        valid=out_dir / "valid.tsv",
        test=out_dir / "test.tsv",
        entity_types=out_dir / "entity_types.tsv",
        domains=out_dir / "domains.tsv",
        ranges=out_dir / "ranges.tsv",
    )

    def write(path: Path, lines: list[str]) -> None:
        try:
            path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
        except OSError as e:
            raise io_error(str(path), str(e)) from e

    for name in ("train", "valid", "test"):
        write(getattr(paths, name), [f"{ent[h]}\t{rel[r]}\t{ent[t]}" for h, r, t in kg.split(name).tolist()])

    s = kg.schema
    write(paths.entity_types, [
        f"{ent[e]}\t{c}"
        for e in sorted(s.entity_classes)
        for c in sorted(cls[i] for i in s.entity_classes[e])
    ])
    for path, mapping in ((paths.domains, s.rel_domain), (paths.ranges, s.rel_range)):
        write(path, [f"{rel[r]}\t{c}" for r in sorted(mapping) for c in sorted(cls[i] for i in mapping[r])])
    return paths
