"""Training logs, evaluation reports and rank dumps (JSON / JSON-lines)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

from semkge.tools.errors import io_error, parse_error
from semkge.tools.evaluation import RankResult


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_header(path: Path, header: dict[str, Any]) -> None:
    """Start a fresh JSON-lines log whose first line is ``{"header": ...}``."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            f.write(_dumps({"header": header}) + "\n")
    except OSError as e:
        raise io_error(str(path), str(e)) from e


def append_record(path: Path, record: dict[str, Any]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as f:
            f.write(_dumps(record) + "\n")
    except OSError as e:
        raise io_error(str(path), str(e)) from e


def _read_lines(path: Path) -> list[dict[str, Any]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise io_error(str(path), str(e)) from e
    rows = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise parse_error(str(path), line_no, f"not a JSON object ({e.msg})") from e
    return rows


def load_log(path: Path) -> tuple[dict[str, Any] | None, list[dict[str, Any]]]:
    """Return ``(header, records)``; a missing file is an empty log."""
    if not path.exists():
        return None, []
    rows = _read_lines(path)
    header = None
    if rows and "header" in rows[0]:
        header = rows.pop(0)["header"]
    return header, rows


def write_report(path: Path, data: dict[str, Any]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise io_error(str(path), str(e)) from e


def load_report(path: Path) -> dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise io_error(str(path), str(e)) from e


def write_ranks(path: Path, results: Iterable[RankResult]) -> int:
    n = 0
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            for res in results:
                f.write(_dumps(res.to_json()) + "\n")
                n += 1
    except OSError as e:
        raise io_error(str(path), str(e)) from e
    return n


def load_ranks(path: Path) -> list[RankResult]:
    return [RankResult.from_json(row) for row in _read_lines(path)]
