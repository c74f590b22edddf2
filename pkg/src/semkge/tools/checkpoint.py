"""Versioned binary checkpoints.

Layout (little-endian):
    magic "SEMKGE01" | u16 kind length, kind | u64 |E|, |R|, d
    | f64 parameter tables in the model's declared order | u64 epoch
    | u8 has-optimizer [| u64 step | f64 first moments | f64 second moments]
    | u64 trailer length, JSON trailer (config, history, optimizer settings)
    | u32 CRC32 of everything before it
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from semkge.tools.errors import checkpoint_error, checkpoint_mismatch, io_error
from semkge.tools.models import ModelParams, get_model
from semkge.tools.optim import Adam

logger = logging.getLogger(__name__)

MAGIC = b"SEMKGE01"


@dataclass(eq=False)
class Checkpoint:
    config: dict[str, Any]
    epoch: int
    params: ModelParams
    history: list[dict[str, Any]] = field(default_factory=list)
    optimizer: Adam | None = None

    def best_record(self) -> dict[str, Any] | None:
        for record in self.history:
            if record.get("epoch") == self.epoch:
                return record
        return None


def _tables_bytes(tables: dict[str, np.ndarray], names: list[str]) -> bytes:
    return b"".join(np.ascontiguousarray(tables[n], dtype="<f8").tobytes() for n in names)


def to_bytes(ckpt: Checkpoint) -> bytes:
    params = ckpt.params
    model = get_model(params.kind)
    names = [name for name, _ in model.table_spec]
    kind = params.kind.encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<H", len(kind)),
        kind,
        struct.pack("<QQQ", params.num_entities, params.num_relations, params.dim),
        _tables_bytes(params.tables, names),
        struct.pack("<Q", ckpt.epoch),
    ]
    opt = ckpt.optimizer
    if opt is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts += [
            struct.pack("<BQ", 1, opt.step_count),
            _tables_bytes(opt.m, names),
            _tables_bytes(opt.v, names),
        ]
    trailer = {"config": ckpt.config, "history": ckpt.history}
    if opt is not None:
        trailer["optimizer"] = {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps}
    blob = json.dumps(trailer, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts += [struct.pack("<Q", len(blob)), blob]
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(ckpt: Checkpoint, path: Path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(to_bytes(ckpt))
    except OSError as e:
        raise io_error(str(path), str(e)) from e
    logger.info("Saved checkpoint (epoch %d) to %s", ckpt.epoch, path)


class _Reader:
    def __init__(self, data: bytes, path: str) -> None:
        self.data, self.pos, self.path = data, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise checkpoint_error(self.path, f"truncated at byte {len(self.data)} (needed {self.pos + n})")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def tables(self, shapes: dict[str, tuple[int, int]]) -> dict[str, np.ndarray]:
        out = {}
        for name, shape in shapes.items():
            raw = self.take(8 * shape[0] * shape[1])
            out[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
        return out


def from_bytes(data: bytes, path: str = "<bytes>", *, expect_kind: str | None = None) -> Checkpoint:
    if len(data) < len(MAGIC) + 4:
        raise checkpoint_error(path, "file too short to be a checkpoint")
    if data[:len(MAGIC)] != MAGIC:
        raise checkpoint_error(path, f"bad magic/version {data[:len(MAGIC)]!r}, expected {MAGIC!r}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise checkpoint_error(path, "checksum mismatch (truncated or corrupted)")

    reader = _Reader(body, path)
    reader.take(len(MAGIC))
    (kind_len,) = reader.unpack("<H")
    kind = reader.take(kind_len).decode("utf-8")
    if expect_kind is not None and kind != expect_kind:
        raise checkpoint_mismatch(f"checkpoint holds a {kind} model, expected {expect_kind}")
    num_entities, num_relations, dim = reader.unpack("<QQQ")
    shapes = get_model(kind).shapes(num_entities, num_relations, dim)
    params = ModelParams(kind, dim, reader.tables(shapes))
    (epoch,) = reader.unpack("<Q")

    (has_opt,) = reader.unpack("<B")
    opt_state = None
    if has_opt:
        (step_count,) = reader.unpack("<Q")
        m, v = reader.tables(shapes), reader.tables(shapes)
        opt_state = (step_count, m, v)
    (blob_len,) = reader.unpack("<Q")
    try:
        trailer = json.loads(reader.take(blob_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise checkpoint_error(path, f"unreadable trailer: {e}") from e
    if reader.pos != len(body):
        raise checkpoint_error(path, f"{len(body) - reader.pos} unexpected trailing byte(s)")

    optimizer = None
    if opt_state is not None:
        settings = trailer.get("optimizer", {})
        optimizer = Adam(
            lr=settings.get("lr", 0.0),
            beta1=settings.get("beta1", 0.9),
            beta2=settings.get("beta2", 0.999),
            eps=settings.get("eps", 1e-8),
            step_count=opt_state[0],
            m=opt_state[1],
            v=opt_state[2],
        )
    return Checkpoint(trailer.get("config", {}), epoch, params, trailer.get("history", []), optimizer)


def load_checkpoint(path: Path, *, expect_kind: str | None = None) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise io_error(str(path), str(e)) from e
    return from_bytes(data, str(path), expect_kind=expect_kind)
