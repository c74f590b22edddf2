"""Training loop, best-checkpoint retention and grid search.

Per epoch (1-indexed) the train split is shuffled with a generator keyed by
``(seed, epoch)``. PHL and PLL score each positive together with its paired
valid and invalid negatives; BCEL builds 1-N rows for both ``(h, r, ?)`` and
``(?, r, t)``. Updates are sparse Adam steps with optional L1/L2 on the rows a
batch touches.
"""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from semkge.tools import runlog
from semkge.tools.checkpoint import Checkpoint
from semkge.tools.errors import SemKgeError, checkpoint_mismatch, config_error, divergence, usage_error
from semkge.tools.evaluation import MODES, evaluate
from semkge.tools.kg import KnowledgeGraph
from semkge.tools.losses import LossSpec, bcel, bcel_targets, classify_negatives, phl, pll
from semkge.tools.models import ModelParams, get_model, init, score, score_all, score_all_grad, sparse_grad
from semkge.tools.optim import REGULARIZERS, Adam, SparseGrads, merge, regularize
from semkge.tools.sampler import RELABEL, SHUFFLE, EpochNegatives, epoch_negatives, keyed_rng

logger = logging.getLogger(__name__)

DEFAULT_MAX_EPOCHS = 400
VALIDATION_KS = (1, 3, 10)


@dataclass(frozen=True)
class TrainConfig:
    model: str
    loss: LossSpec
    batch_size: int = 128
    dim: int = 50
    lr: float = 1e-3
    regularizer: str = "none"
    reg_weight: float = 0.0
    max_epochs: int = DEFAULT_MAX_EPOCHS
    seed: int = 0
    eval_every: int = 10
    eval_mode: str = "filtered"
    threads: int = 1

    def __post_init__(self) -> None:
        get_model(self.model)
        if self.batch_size < 1:
            raise usage_error(f"batch size must be >= 1, got {self.batch_size}")
        if self.dim < 1:
            raise usage_error(f"embedding dimension must be >= 1, got {self.dim}")
        if not self.lr >= 0:
            raise usage_error(f"learning rate must be >= 0, got {self.lr}")
        if self.regularizer not in REGULARIZERS:
            raise usage_error(f"regularizer must be one of {REGULARIZERS}, got {self.regularizer!r}")
        if not self.reg_weight >= 0:
            raise usage_error(f"regularization weight must be >= 0, got {self.reg_weight}")
        if self.max_epochs < 1:
            raise usage_error(f"max epochs must be >= 1, got {self.max_epochs}")
        if self.eval_every < 0:
            raise usage_error(f"eval_every must be >= 0, got {self.eval_every}")
        if self.eval_mode not in MODES:
            raise usage_error(f"eval mode must be one of {MODES}, got {self.eval_mode!r}")
        if self.threads < 1:
            raise usage_error(f"threads must be >= 1, got {self.threads}")

    def to_json(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["loss"] = self.loss.to_json()
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "TrainConfig":
        values = dict(data)
        values["loss"] = LossSpec(**values["loss"])
        return cls(**values)


def config_hash(cfg: TrainConfig) -> str:
    blob = json.dumps(cfg.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _phl_pll_batch(
    cfg: TrainConfig,
    params: ModelParams,
    kg: KnowledgeGraph,
    idx: np.ndarray,
    negs: EpochNegatives,
    rng: np.random.Generator,
) -> tuple[float, SparseGrads]:
    pos, valid, invalid = kg.train[idx], negs.valid[idx], negs.invalid[idx]
    n = len(idx)
    batch = np.concatenate([pos, valid, invalid])
    s = score(params, batch)
    flags = classify_negatives(batch[n:], kg.schema)
    if cfg.loss.family == "phl":
        out = phl(cfg.loss, s[:n], np.stack([s[n:2 * n], s[2 * n:]], axis=1), flags.reshape(2, n).T)
        upstream = np.concatenate([out.pos_weights, out.neg_weights[:, 0], out.neg_weights[:, 1]])
        return out.value, sparse_grad(params, batch, upstream)
    labels = np.concatenate([np.ones(n), -np.ones(2 * n)])
    validity = np.concatenate([np.zeros(n, dtype=bool), flags])
    out = pll(cfg.loss, s, labels, validity, rng)
    return out.value, sparse_grad(params, batch, out.weights)


def bcel_rows(kg: KnowledgeGraph, positives: np.ndarray) -> list[tuple[int, int, str]]:
    """``(rel, fixed entity, predicted side)`` for both directions of every positive."""
    rows = []
    for h, r, t in positives.tolist():
        rows.append((r, h, "tail"))
        rows.append((r, t, "head"))
    return rows


def _bcel_batch(
    cfg: TrainConfig,
    params: ModelParams,
    kg: KnowledgeGraph,
    idx: np.ndarray,
    rng: np.random.Generator,
) -> tuple[float, SparseGrads]:
    rows = bcel_rows(kg, kg.train[idx])
    scores = np.stack([score_all(params, r, fixed, side) for r, fixed, side in rows])
    targets = []
    for r, fixed, side in rows:
        positives = np.zeros(kg.num_entities, dtype=bool)
        positives[kg.known(r, fixed, side, train_only=True)] = True
        fixed_side = "head" if side == "tail" else "tail"
        validity = kg.candidate_mask(r, side) & bool(kg.candidate_mask(r, fixed_side)[fixed])
        targets.append(bcel_targets(cfg.loss, positives, validity, rng))
    out = bcel(cfg.loss, scores, np.stack(targets))
    parts = [
        score_all_grad(params, r, fixed, side, out.weights[i])
        for i, (r, fixed, side) in enumerate(rows)
    ]
    return out.value, merge(parts)


def _validate(params: ModelParams, kg: KnowledgeGraph, cfg: TrainConfig) -> dict[str, float]:
    report = evaluate(params, kg, "valid", cfg.eval_mode, ks=VALIDATION_KS, threads=cfg.threads)
    return {
        "val_mrr": report.overall.mrr,
        "val_hits10": report.overall.hits[10],
        "val_sem10": report.overall.sem[10],
    }


def train(
    cfg: TrainConfig,
    kg: KnowledgeGraph,
    *,
    log_path: Path | None = None,
    resume: Checkpoint | None = None,
) -> Checkpoint:
    """
    Train ``cfg`` on ``kg.train`` and return the best-validation-MRR checkpoint.

    With ``eval_every = 0`` nothing is validated and the final epoch is kept.
    ``resume`` continues from a checkpoint's epoch with its optimizer state;
    the result matches an uninterrupted run.
    """
    model = get_model(cfg.model)
    if resume is not None:
        if resume.params.kind != cfg.model:
            raise checkpoint_mismatch(f"cannot resume a {resume.params.kind} checkpoint as {cfg.model}")
        if (resume.params.num_entities, resume.params.num_relations) != (kg.num_entities, kg.num_relations):
            raise checkpoint_mismatch(
                f"checkpoint has |E|={resume.params.num_entities}, |R|={resume.params.num_relations}; "
                f"dataset has |E|={kg.num_entities}, |R|={kg.num_relations}"
            )
        if resume.optimizer is None:
            raise checkpoint_mismatch("checkpoint holds no optimizer state to resume from")
        params = resume.params.copy()
        opt = resume.optimizer.copy()
        start = resume.epoch + 1
        history = [dict(r) for r in resume.history if r.get("epoch", 0) <= resume.epoch]
        record = resume.best_record() or {}
        best_mrr = record.get("val_mrr")
        best = Checkpoint(cfg.to_json(), resume.epoch, params.copy(), list(history), opt.copy())
    else:
        params = init(cfg.model, kg.num_entities, kg.num_relations, cfg.dim, cfg.seed)
        opt = Adam.for_params(params, cfg.lr)
        start, history, best_mrr, best = 1, [], None, None
        if log_path is not None:
            runlog.write_header(log_path, {"config": cfg.to_json(), "loss": cfg.loss.name})

    n = len(kg.train)
    logger.info(
        "Training %s with %s: %d triples, epochs %d..%d, batch %d",
        cfg.model, cfg.loss.name, n, start, cfg.max_epochs, cfg.batch_size,
    )
    for epoch in range(start, cfg.max_epochs + 1):
        order = keyed_rng(cfg.seed, SHUFFLE, epoch).permutation(n)
        negs = epoch_negatives(kg, epoch, cfg.seed) if cfg.loss.family != "bcel" else None
        losses = []
        for b, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            rng = keyed_rng(cfg.loss.seed, RELABEL, epoch, b)
            if negs is None:
                value, grads = _bcel_batch(cfg, params, kg, idx, rng)
            else:
                value, grads = _phl_pll_batch(cfg, params, kg, idx, negs, rng)
            penalty, grads = regularize(params, grads, cfg.regularizer, cfg.reg_weight)
            total = value + penalty
            if not math.isfinite(total):
                raise divergence(epoch, b, f"{cfg.loss.name} loss {value!r}, penalty {penalty!r}")
            opt.step(params, grads)
            touched = {name: ids for name, (ids, _) in grads.items()}
            model.project(params, touched)
            if not all(np.isfinite(params.tables[name][ids]).all() for name, ids in touched.items()):
                raise divergence(epoch, b, "parameters became non-finite after the update")
            losses.append(total)
        train_loss = math.fsum(losses)
        logger.debug("Epoch %d: train loss %.6f", epoch, train_loss)

        last = epoch == cfg.max_epochs
        if cfg.eval_every > 0 and (epoch % cfg.eval_every == 0 or last):
            record = {"epoch": epoch, "train_loss": train_loss, **_validate(params, kg, cfg)}
        elif cfg.eval_every == 0 and last:
            record = {"epoch": epoch, "train_loss": train_loss, "val_mrr": None, "val_hits10": None, "val_sem10": None}
        else:
            continue
        history.append(record)
        if log_path is not None:
            runlog.append_record(log_path, record)
        if record["val_mrr"] is not None:
            logger.info(
                "Epoch %d: loss %.6f, val MRR %.4f, Hits@10 %.4f, Sem@10 %.4f",
                epoch, train_loss, record["val_mrr"], record["val_hits10"], record["val_sem10"],
            )
        if record["val_mrr"] is None:
            best = Checkpoint(cfg.to_json(), epoch, params.copy(), [], opt.copy())
        elif best_mrr is None or record["val_mrr"] > best_mrr:
            best_mrr = record["val_mrr"]
            best = Checkpoint(cfg.to_json(), epoch, params.copy(), [], opt.copy())

    if best is None:
        # resumed at or past max_epochs
        best = Checkpoint(cfg.to_json(), start - 1, params.copy(), [], opt.copy())
    best.history = history
    return best


@dataclass(frozen=True)
class GridResult:
    index: int
    config: TrainConfig
    val_mrr: float | None
    val_sem10: float | None
    error: str | None = None
    checkpoint: Checkpoint | None = field(default=None, repr=False, compare=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)


def grid_search(
    grid: Sequence[TrainConfig],
    kg: KnowledgeGraph,
    *,
    on_result: Callable[[GridResult], None] | None = None,
) -> list[GridResult]:
    """
    Train every config and rank by validation MRR, best first.

    Ties keep grid order. A config that fails is recorded with its error and
    ranked last; the sweep continues.
    """
    if not grid:
        raise config_error("grid is empty", "Give at least one value for every grid axis")
    results = []
    for i, cfg in enumerate(grid):
        try:
            ckpt = train(cfg, kg)
            report = evaluate(ckpt.params, kg, "valid", cfg.eval_mode, ks=VALIDATION_KS, threads=cfg.threads)
            result = GridResult(i, cfg, report.overall.mrr, report.overall.sem[10], checkpoint=ckpt)
        except SemKgeError as e:
            logger.warning("Grid cell %d (%s) failed: %s", i, config_hash(cfg), e)
            result = GridResult(i, cfg, None, None, error=str(e))
        results.append(result)
        if on_result is not None:
            on_result(result)
    return sorted(results, key=lambda r: (r.val_mrr is None, -(r.val_mrr or 0.0), r.index))


LOSS_AXES = ("family", "variant", "margin", "epsilon")
CONFIG_AXES = tuple(f.name for f in dataclasses.fields(TrainConfig) if f.name != "loss")


def expand_grid(base: TrainConfig, axes: Mapping[str, Sequence[Any]]) -> list[TrainConfig]:
    """Cartesian product of ``axes`` over ``base``; the last axis varies fastest."""
    for name in axes:
        if name not in CONFIG_AXES and name not in LOSS_AXES:
            raise config_error(
                f"unknown grid axis {name!r}",
                f"Use one of: {', '.join(CONFIG_AXES + LOSS_AXES)}",
            )
    names = list(axes)
    grid = []
    for values in itertools.product(*(axes[n] for n in names)):
        cfg_changes = {n: v for n, v in zip(names, values) if n in CONFIG_AXES}
        loss_changes = {n: v for n, v in zip(names, values) if n in LOSS_AXES}
        loss = dataclasses.replace(base.loss, **loss_changes) if loss_changes else base.loss
        grid.append(dataclasses.replace(base, loss=loss, **cfg_changes))
    return grid


SEARCH_SPACE: dict[str, list[Any]] = {
    "batch_size": [128, 256, 512, 1024, 2048],
    "dim": [50, 100, 150, 200],
    "regularizer": ["none", "l1", "l2"],
    "reg_weight": [1e-2, 1e-3, 1e-4, 1e-5],
    "lr": [1e-2, 5e-3, 1e-3, 5e-4, 1e-4],
}
MARGINS = [1.0, 2.0, 3.0, 5.0, 10.0, 20.0]
EPSILONS = {
    "phl": [0.01, 0.1, 0.25, 0.5, 0.75],
    "pll": [0.05, 0.10, 0.15, 0.25],
    "bcel": [1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
}


def default_grid(family: str, variant: str = "vanilla") -> dict[str, list[Any]]:
    """The published hyperparameter search space for one loss."""
    spec = LossSpec(family, variant, epsilon=EPSILONS.get(str(family).lower(), [0.1])[0])
    axes = {k: list(v) for k, v in SEARCH_SPACE.items()}
    if spec.family == "phl":
        axes["margin"] = list(MARGINS)
    if spec.is_semantic:
        axes["epsilon"] = list(EPSILONS[spec.family])
    return axes
