import numpy as np
import pytest

from semkge.tools.losses import LossSpec, bcel, bcel_targets, phl, pll
from semkge.tools.models import MODELS, ModelParams, grad, init, score, score_all, score_all_grad, sparse_grad

H = 1e-5


def _numeric(params: ModelParams, objective) -> dict[str, np.ndarray]:
    out = {}
    for name, table in params.tables.items():
        g = np.zeros_like(table)
        for idx in np.ndindex(table.shape):
            old = table[idx]
            table[idx] = old + H
            up = objective(params)
            table[idx] = old - H
            down = objective(params)
            table[idx] = old
            g[idx] = (up - down) / (2 * H)
        out[name] = g
    return out


def _assert_close(analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray]) -> None:
    for name in numeric:
        np.testing.assert_allclose(analytic[name], numeric[name], rtol=1e-4, atol=1e-6, err_msg=name)


def _batch(rng: np.random.Generator, n: int, num_entities: int, num_relations: int) -> np.ndarray:
    batch = np.stack([
        rng.integers(num_entities, size=n),
        rng.integers(num_relations, size=n),
        rng.integers(num_entities, size=n),
    ], axis=1)
    batch[-1] = batch[0]  # repeated rows must accumulate
    return batch


@pytest.mark.parametrize("kind", sorted(MODELS))
def test_score_gradient_matches_finite_differences(kind):
    rng = np.random.default_rng(11)
    params = init(kind, 5, 2, 6, seed=1)
    batch = _batch(rng, 7, 5, 2)
    upstream = rng.normal(size=len(batch))
    numeric = _numeric(params, lambda p: float(np.dot(upstream, score(p, batch))))
    _assert_close(grad(params, batch, upstream), numeric)


@pytest.mark.parametrize("kind", sorted(MODELS))
def test_sparse_gradient_touches_only_batch_rows(kind):
    params = init(kind, 8, 3, 4, seed=2)
    batch = np.array([[0, 1, 2], [0, 1, 2], [5, 0, 2]])
    sparse = sparse_grad(params, batch, np.ones(3))
    assert set(sparse["entity"][0].tolist()) <= {0, 2, 5}
    dense = grad(params, batch, np.ones(3))
    untouched = [e for e in range(8) if e not in (0, 2, 5)]
    for name, table in dense.items():
        if table.shape[0] == 8:
            assert not table[untouched].any()


@pytest.mark.parametrize("kind", sorted(MODELS))
@pytest.mark.parametrize("variant,epsilon", [("vanilla", None), ("S", 0.25)])
def test_phl_composed_gradient(kind, variant, epsilon):
    rng = np.random.default_rng(5)
    spec = LossSpec("phl", variant, margin=2.0, epsilon=epsilon)
    params = init(kind, 6, 2, 5, seed=4)
    pos = _batch(rng, 4, 6, 2)
    neg = _batch(rng, 8, 6, 2)
    flags = rng.random((4, 2)) < 0.5

    def objective(p):
        return phl(spec, score(p, pos), score(p, neg).reshape(4, 2), flags).value

    out = phl(spec, score(params, pos), score(params, neg).reshape(4, 2), flags)
    batch = np.concatenate([pos, neg])
    upstream = np.concatenate([out.pos_weights, out.neg_weights.reshape(-1)])
    _assert_close(grad(params, batch, upstream), _numeric(params, objective))


@pytest.mark.parametrize("kind", sorted(MODELS))
@pytest.mark.parametrize("variant,epsilon", [("vanilla", None), ("S", 0.5), ("S'", 0.3)])
def test_pll_composed_gradient(kind, variant, epsilon):
    rng = np.random.default_rng(6)
    spec = LossSpec("pll", variant, epsilon=epsilon)
    params = init(kind, 6, 2, 5, seed=4)
    batch = _batch(rng, 9, 6, 2)
    labels = np.where(np.arange(9) < 3, 1.0, -1.0)
    flags = rng.random(9) < 0.6

    def objective(p):
        return pll(spec, score(p, batch), labels, flags, np.random.default_rng(0)).value

    out = pll(spec, score(params, batch), labels, flags, np.random.default_rng(0))
    _assert_close(grad(params, batch, out.weights), _numeric(params, objective))


@pytest.mark.parametrize("kind", sorted(MODELS))
@pytest.mark.parametrize("variant,epsilon", [("vanilla", None), ("S", 0.1), ("S'", 0.5)])
def test_bcel_composed_gradient(kind, variant, epsilon):
    spec = LossSpec("bcel", variant, epsilon=epsilon)
    params = init(kind, 5, 2, 4, seed=9)
    positives = np.array([False, True, False, False, True])
    validity = np.array([True, True, True, False, False])
    targets = bcel_targets(spec, positives, validity, np.random.default_rng(1))

    def objective(p):
        return bcel(spec, score_all(p, 1, 3, "tail"), targets).value

    out = bcel(spec, score_all(params, 1, 3, "tail"), targets)
    dense = {name: np.zeros_like(t) for name, t in params.tables.items()}
    for name, (ids, rows) in score_all_grad(params, 1, 3, "tail", out.weights).items():
        dense[name][ids] = rows
    _assert_close(dense, _numeric(params, objective))
