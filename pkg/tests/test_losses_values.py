import math

import numpy as np
import pytest
from scipy.special import logit

from semkge.tools.errors import SemKgeError
from semkge.tools.losses import LossSpec, bcel, bcel_targets, classify_negatives, phl, pll
from semkge.tools.kg import Triple, is_sem_valid
from tests.kgs import ADIDAS, FRANCE, OBAMA, PRESIDENT_OF


def test_phl_inactive_hinge():
    out = phl(LossSpec("phl", margin=1.0), [2.0], [[0.5]])
    assert out.value == 0.0
    assert out.neg_weights.tolist() == [[0.0]]


def test_phl_active_hinge():
    out = phl(LossSpec("phl", margin=1.0), [0.2], [[0.5]])
    assert out.value == pytest.approx(1.3, abs=1e-10)
    assert out.neg_weights.tolist() == [[1.0]]
    assert out.pos_weights.tolist() == [-1.0]


def test_phl_semantic_margins():
    spec = LossSpec("phl", "S", margin=2.0, epsilon=0.25)
    valid = phl(spec, [1.0], [[0.8]], [[True]])
    invalid = phl(spec, [1.0], [[0.8]], [[False]])
    assert valid.value == pytest.approx(0.3, abs=1e-10)
    assert invalid.value == pytest.approx(1.8, abs=1e-10)


def test_phl_pairs_one_positive_with_two_negatives():
    spec = LossSpec("phl", "S", margin=2.0, epsilon=0.25)
    out = phl(spec, [1.0], [[0.8, 0.8]], [[True, False]])
    assert out.value == pytest.approx(2.1, abs=1e-10)
    assert out.pos_weights.tolist() == [-2.0]


def test_phl_misaligned_batches():
    with pytest.raises(SemKgeError) as e:
        phl(LossSpec("phl"), [1.0, 2.0], [[0.5]])
    assert e.value.code == 1


def test_bcel_two_entity_row():
    out = bcel(LossSpec("bcel"), logit([0.9, 0.2]), [1.0, 0.0])
    assert out.value == pytest.approx(-(math.log(0.9) + math.log(0.8)) / 2, abs=1e-10)
    assert out.value == pytest.approx(0.1643, abs=1e-4)


def test_bcel_soft_label_term():
    spec = LossSpec("bcel", "S", epsilon=0.1)
    targets = bcel_targets(spec, [False], [True])
    assert targets.tolist() == [0.1]
    out = bcel(spec, [0.0], targets)
    assert out.value == pytest.approx(-math.log(0.5), abs=1e-12)


def test_bcel_clamp_keeps_loss_finite():
    out = bcel(LossSpec("bcel"), [-1e4, 1e4], [1.0, 0.0])
    assert math.isfinite(out.value)
    assert out.value == pytest.approx(-math.log(1e-7), rel=1e-6)
    assert out.weights.tolist() == [0.0, 0.0]


def test_bcel_rejects_labels_outside_unit_interval():
    with pytest.raises(SemKgeError):
        bcel(LossSpec("bcel"), [0.0, 0.0], [1.5, 0.0])


def test_pll_values():
    spec = LossSpec("pll")
    assert pll(spec, [0.0, 0.0], [1.0, -1.0]).value == pytest.approx(2 * math.log(2), abs=1e-12)
    assert pll(spec, [3.0], [1.0]).value == pytest.approx(math.log1p(math.exp(-3)), abs=1e-12)
    assert pll(spec, [3.0], [1.0]).value == pytest.approx(0.0486, abs=1e-4)


def test_pll_rejects_non_binary_labels():
    with pytest.raises(SemKgeError):
        pll(LossSpec("pll"), [0.0], [0.5])


def test_pll_s_extremes():
    flags = [True, True, False]
    labels = [-1.0, -1.0, -1.0]
    none = pll(LossSpec("pll", "S", epsilon=0.0), [0.1, 0.2, 0.3], labels, flags, np.random.default_rng(0))
    every = pll(LossSpec("pll", "S", epsilon=1.0), [0.1, 0.2, 0.3], labels, flags, np.random.default_rng(0))
    assert none.labels.tolist() == [-1.0, -1.0, -1.0]
    assert every.labels.tolist() == [1.0, 1.0, -1.0]


def test_pll_s_prime_soft_label():
    out = pll(LossSpec("pll", "S'", epsilon=-0.1), [0.0, 0.0], [-1.0, -1.0], [True, False])
    assert out.labels.tolist() == [-0.1, -1.0]


def test_classify_negatives_examples(president):
    flags = classify_negatives([(ADIDAS, PRESIDENT_OF, FRANCE), (OBAMA, PRESIDENT_OF, FRANCE)], president.schema)
    assert flags.tolist() == [False, True]
    assert classify_negatives(np.zeros((0, 3), dtype=np.int64), president.schema).tolist() == []


def test_classify_negatives_delegates(president):
    rng = np.random.default_rng(0)
    batch = rng.integers(7, size=(50, 3))
    batch[:, 1] = PRESIDENT_OF
    expected = [is_sem_valid(Triple(*t), president.schema) for t in batch.tolist()]
    assert classify_negatives(batch, president.schema).tolist() == expected


@pytest.mark.parametrize(
    "family,variant,epsilon",
    [
        ("phl", "S", 0.0),
        ("phl", "S", 1.5),
        ("phl", "S", None),
        ("phl", "S'", 0.5),
        ("bcel", "S", 1.0),
        ("bcel", "S'", 1.1),
        ("pll", "S", -0.1),
        ("pll", "S'", 1.0),
        ("pll", "S'", -1.0),
    ],
)
def test_epsilon_outside_bounds_is_usage_error(family, variant, epsilon):
    with pytest.raises(SemKgeError) as e:
        LossSpec(family, variant, epsilon=epsilon)
    assert e.value.code == 1


def test_spec_normalizes_names():
    spec = LossSpec("PHL", "s", margin=2.0, epsilon=0.25)
    assert spec.family == "phl" and spec.variant == "S"
    assert spec.name == "PHL-S"
    assert LossSpec("pll", "S'", epsilon=0.1).name == "PLL-S'"
    with pytest.raises(SemKgeError):
        LossSpec("phl", margin=0.0)
