import math

import numpy as np
import pytest

from semkge.tools.checkpoint import from_bytes, to_bytes
from semkge.tools.errors import SemKgeError
from semkge.tools.losses import LossSpec, phl
from semkge.tools.models import init, score, sparse_grad
from semkge.tools.runlog import load_log
from semkge.tools.sampler import epoch_negatives
from semkge.tools.trainer import TrainConfig, train


def _cfg(**changes) -> TrainConfig:
    values = dict(
        model="transe",
        loss=LossSpec("phl", margin=1.0),
        batch_size=512,
        dim=8,
        lr=1e-2,
        max_epochs=2,
        seed=3,
        eval_every=1,
    )
    values.update(changes)
    return TrainConfig(**values)


@pytest.mark.parametrize("model", ["transe", "transh", "distmult", "complex", "simple"])
def test_zero_learning_rate_keeps_initial_parameters(blocks, model):
    cfg = _cfg(model=model, lr=0.0, eval_every=0)
    ckpt = train(cfg, blocks)
    assert ckpt.params.equals(init(model, blocks.num_entities, blocks.num_relations, 8, 3))


def test_single_step_matches_hand_computation(president):
    lr = 0.05
    cfg = _cfg(lr=lr, max_epochs=1, eval_every=0, batch_size=2, dim=4)
    ckpt = train(cfg, president)

    params = init("transe", 7, 1, 4, 3)
    negs = epoch_negatives(president, 1, 3)
    expected_loss = 0.0
    total = {name: np.zeros_like(t) for name, t in params.tables.items()}
    for i, pos in enumerate(president.train.tolist()):
        batch = np.array([pos, negs.valid[i], negs.invalid[i]])
        s = score(params, batch)
        out = phl(cfg.loss, s[:1], s[None, 1:])
        expected_loss += out.value
        upstream = np.concatenate([out.pos_weights, out.neg_weights[0]])
        for name, (ids, rows) in sparse_grad(params, batch, upstream).items():
            total[name][ids] += rows
    for name, g in total.items():
        touched = np.abs(g).sum(axis=1) > 0
        step = np.where(touched[:, None], lr * g / (np.abs(g) + 1e-8), 0.0)
        np.testing.assert_allclose(ckpt.params.tables[name], params.tables[name] - step, rtol=1e-9, atol=1e-12)
    assert ckpt.history[0]["train_loss"] == pytest.approx(expected_loss, rel=1e-12)


def test_same_seed_same_run(blocks):
    a = train(_cfg(), blocks)
    b = train(_cfg(), blocks)
    assert a.params.equals(b.params)
    assert a.history == b.history


def test_seed_changes_the_run(blocks):
    a = train(_cfg(eval_every=0), blocks)
    b = train(_cfg(eval_every=0, seed=4), blocks)
    assert not a.params.equals(b.params)


def test_resume_matches_uninterrupted_run(blocks, tmp_path):
    full = train(_cfg(max_epochs=4, eval_every=2), blocks)
    half = train(_cfg(max_epochs=2, eval_every=2), blocks)
    half = from_bytes(to_bytes(half))
    resumed = train(_cfg(max_epochs=4, eval_every=2), blocks, resume=half)
    assert resumed.epoch == full.epoch
    assert resumed.params.equals(full.params)
    assert resumed.history == full.history


def test_resume_rejects_other_dataset(blocks, president):
    ckpt = train(_cfg(max_epochs=1, eval_every=0), blocks)
    with pytest.raises(SemKgeError) as e:
        train(_cfg(max_epochs=2, eval_every=0), president, resume=ckpt)
    assert e.value.code == 1
    with pytest.raises(SemKgeError):
        train(_cfg(model="distmult", max_epochs=2, eval_every=0), blocks, resume=ckpt)


def test_history_and_log(blocks, tmp_path):
    log = tmp_path / "train_log.jsonl"
    ckpt = train(_cfg(max_epochs=3, eval_every=2), blocks, log_path=log)
    assert [r["epoch"] for r in ckpt.history] == [2, 3]
    for record in ckpt.history:
        assert set(record) == {"epoch", "train_loss", "val_mrr", "val_hits10", "val_sem10"}
        assert 0.0 < record["val_mrr"] <= 1.0
    best = max(ckpt.history, key=lambda r: r["val_mrr"])
    assert ckpt.epoch == best["epoch"]
    header, records = load_log(log)
    assert header["loss"] == "PHL"
    assert header["config"]["loss"]["margin"] == 1.0
    assert records == ckpt.history


def test_no_validation_keeps_last_epoch(blocks):
    ckpt = train(_cfg(max_epochs=2, eval_every=0), blocks)
    assert ckpt.epoch == 2
    assert len(ckpt.history) == 1
    assert ckpt.history[0]["val_mrr"] is None
    assert math.isfinite(ckpt.history[0]["train_loss"])


@pytest.mark.parametrize(
    "model,loss",
    [
        ("distmult", LossSpec("bcel")),
        ("complex", LossSpec("bcel", "S", epsilon=0.01)),
        ("simple", LossSpec("bcel", "S'", epsilon=0.1)),
        ("distmult", LossSpec("pll", "S", epsilon=0.1)),
        ("complex", LossSpec("pll", "S'", epsilon=-0.1)),
        ("transh", LossSpec("phl", "S", margin=2.0, epsilon=0.25)),
    ],
)
def test_every_family_trains(blocks, model, loss):
    cfg = _cfg(model=model, loss=loss, max_epochs=2, eval_every=2, regularizer="l2", reg_weight=1e-4)
    ckpt = train(cfg, blocks)
    assert ckpt.params.is_finite()
    assert len(ckpt.history) == 1
    assert math.isfinite(ckpt.history[0]["train_loss"])
    if model == "transh":
        assert np.allclose(np.linalg.norm(ckpt.params.tables["normal"], axis=1), 1.0)


def test_runaway_updates_raise_divergence(blocks):
    cfg = _cfg(model="distmult", lr=1e300, batch_size=64, regularizer="l2", reg_weight=1e-3, eval_every=0)
    with pytest.raises(SemKgeError) as e:
        train(cfg, blocks)
    assert e.value.code == 2
    assert e.value.context.startswith("epoch 1, batch ")


def test_config_validation():
    with pytest.raises(SemKgeError):
        _cfg(model="rescal")
    with pytest.raises(SemKgeError):
        _cfg(batch_size=0)
    with pytest.raises(SemKgeError):
        _cfg(regularizer="l3")
    with pytest.raises(SemKgeError):
        _cfg(eval_mode="fuzzy")
    cfg = _cfg(loss=LossSpec("phl", "S", margin=2.0, epsilon=0.25))
    assert TrainConfig.from_json(cfg.to_json()) == cfg
