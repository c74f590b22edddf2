"""Relation buckets by size of the semantically valid candidate set.

B1/B2/B3 group relations with narrow, intermediate and large sets of valid
heads (resp. tails). Intervals are closed and may leave gaps; relations in a
gap are "unbucketed".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from semkge.tools.errors import config_error, io_error
from semkge.tools.kg import SIDES, KnowledgeGraph, Side

BUCKETS = ("B1", "B2", "B3")
UNBUCKETED = "unbucketed"
ALL_BUCKETS = (*BUCKETS, UNBUCKETED)

DATA_DIR = Path(__file__).resolve().parents[3] / "data" / "buckets"


@dataclass(frozen=True)
class BucketSpec:
    intervals: dict[Side, dict[str, tuple[int, int]]]
    name: str = ""

    def __post_init__(self) -> None:
        for side in SIDES:
            ranges = self.intervals.get(side, {})
            for bucket, (lo, hi) in ranges.items():
                if bucket not in BUCKETS:
                    raise config_error(f"unknown bucket {bucket!r} on {side} side", f"Use {', '.join(BUCKETS)}")
                if lo > hi:
                    raise config_error(f"{side} {bucket} interval [{lo}, {hi}] is empty")
            ordered = sorted(ranges.items(), key=lambda kv: kv[1])
            for (b1, (_, hi1)), (b2, (lo2, _)) in zip(ordered, ordered[1:]):
                if lo2 <= hi1:
                    raise config_error(f"{side} intervals {b1} and {b2} overlap", "Make the bucket intervals disjoint")

    def bucket_of(self, side: Side, count: int) -> str:
        for bucket, (lo, hi) in self.intervals.get(side, {}).items():
            if lo <= count <= hi:
                return bucket
        return UNBUCKETED

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "BucketSpec":
        try:
            intervals = {
                side: {b: (int(lo), int(hi)) for b, (lo, hi) in data.get(side, {}).items()}
                for side in SIDES
            }
        except (TypeError, ValueError) as e:
            raise config_error(f"bucket intervals must be [low, high] integer pairs: {e}") from e
        return cls(intervals=intervals, name=str(data.get("name", "")))

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            **{side: {b: list(iv) for b, iv in self.intervals.get(side, {}).items()} for side in SIDES},
        }


def shipped_bucket_specs() -> list[str]:
    return sorted(p.stem for p in DATA_DIR.glob("*.json"))


def load_bucket_spec(path_or_name: str | Path) -> BucketSpec:
    """Load a spec from a JSON file, or by name from the shipped cut-offs."""
    path = Path(path_or_name)
    if not path.exists():
        path = DATA_DIR / f"{path_or_name}.json"
    if not path.exists():
        raise config_error(
            f"bucket spec {path_or_name!r} not found",
            f"Pass a JSON file or one of: {', '.join(shipped_bucket_specs())}",
        )
    try:
        with path.open("r", encoding="utf-8") as f:
            return BucketSpec.from_json(json.load(f))
    except (OSError, json.JSONDecodeError) as e:
        raise io_error(str(path), str(e)) from e


def bucket_assign(kg: KnowledgeGraph, spec: BucketSpec) -> dict[tuple[int, Side], str]:
    out: dict[tuple[int, Side], str] = {}
    for r in range(kg.num_relations):
        for side in SIDES:
            out[(r, side)] = spec.bucket_of(side, int(kg.candidate_mask(r, side).sum()))
    return out


def bucket_summary(kg: KnowledgeGraph, spec: BucketSpec) -> dict[str, dict[str, dict[str, int | None]]]:
    """Relations per (bucket, side) with the observed candidate-count range."""
    counts: dict[tuple[str, Side], list[int]] = {}
    for r in range(kg.num_relations):
        for side in SIDES:
            n = int(kg.candidate_mask(r, side).sum())
            counts.setdefault((spec.bucket_of(side, n), side), []).append(n)
    return {
        bucket: {
            side: {
                "relations": len(counts.get((bucket, side), [])),
                "min": min(counts[(bucket, side)]) if counts.get((bucket, side)) else None,
                "max": max(counts[(bucket, side)]) if counts.get((bucket, side)) else None,
            }
            for side in SIDES
        }
        for bucket in ALL_BUCKETS
    }
