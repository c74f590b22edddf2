import numpy as np
import pytest

from semkge.tools.errors import SemKgeError
from semkge.tools.models import MODELS, ModelParams, get_model, init, score, score_all


def test_transe_is_negated_distance():
    params = ModelParams("transe", 2, {
        "entity": np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]),
        "relation": np.array([[1.0, 0.0]]),
    })
    s = score(params, [(0, 0, 1), (0, 0, 2)])
    assert s[0] == 0.0
    assert s[1] == pytest.approx(-np.sqrt(5.0), abs=1e-12)


def test_transh_projects_onto_hyperplane():
    params = ModelParams("transh", 2, {
        "entity": np.array([[1.0, 0.0], [0.0, 0.0]]),
        "relation": np.array([[0.0, 1.0]]),
        "normal": np.array([[1.0, 0.0]]),
    })
    # h - t lies along the normal, so only the translation is left
    assert score(params, [(0, 0, 1)])[0] == pytest.approx(-1.0, abs=1e-12)


def test_distmult_trilinear_product():
    params = ModelParams("distmult", 2, {
        "entity": np.array([[1.0, 2.0], [3.0, 4.0]]),
        "relation": np.array([[2.0, 1.0]]),
    })
    assert score(params, [(0, 0, 1)])[0] == 14.0
    assert score(params, [(1, 0, 0)])[0] == 14.0


def test_complex_real_part_of_hermitian_product():
    params = ModelParams("complex", 1, {
        "entity": np.array([[1.0], [1.0]]),
        "entity_im": np.array([[2.0], [1.0]]),
        "relation": np.array([[3.0]]),
        "relation_im": np.array([[0.0]]),
    })
    h, r, t = 1 + 2j, 3 + 0j, 1 + 1j
    assert score(params, [(0, 0, 1)])[0] == pytest.approx((h * r * np.conj(t)).real, abs=1e-12)


def test_simple_averages_forward_and_inverse():
    params = ModelParams("simple", 1, {
        "entity": np.array([[2.0], [5.0]]),
        "entity_tail": np.array([[3.0], [7.0]]),
        "relation": np.array([[1.0]]),
        "relation_inv": np.array([[10.0]]),
    })
    # 0.5 * (head[0]*r*tail[1] + tail[0]*r_inv*head[1])
    assert score(params, [(0, 0, 1)])[0] == pytest.approx(0.5 * (2 * 1 * 7 + 3 * 10 * 5))


@pytest.mark.parametrize("kind", sorted(MODELS))
def test_score_all_matches_single_scores(kind):
    params = init(kind, 6, 2, 4, seed=3)
    tails = score_all(params, 1, 2, "tail")
    heads = score_all(params, 1, 2, "head")
    for e in range(6):
        assert tails[e] == pytest.approx(score(params, [(2, 1, e)])[0], abs=1e-12)
        assert heads[e] == pytest.approx(score(params, [(e, 1, 2)])[0], abs=1e-12)


@pytest.mark.parametrize("kind", sorted(MODELS))
def test_init_is_seeded_and_bounded(kind):
    a = init(kind, 10, 3, 8, seed=7)
    b = init(kind, 10, 3, 8, seed=7)
    c = init(kind, 10, 3, 8, seed=8)
    assert a.equals(b)
    assert not a.equals(c)
    bound = np.sqrt(6.0 / 16)
    for name, table in a.tables.items():
        assert table.shape == get_model(kind).shapes(10, 3, 8)[name]
        if name != "normal":
            assert np.abs(table).max() <= bound


def test_transh_normals_start_unit_length():
    params = init("transh", 5, 4, 6, seed=0)
    assert np.allclose(np.linalg.norm(params.tables["normal"], axis=1), 1.0)


def test_transh_projection_leaves_unit_normals_bit_identical():
    model = get_model("transh")
    params = init("transh", 5, 4, 6, seed=0)
    before = params.tables["normal"].copy()
    model.project(params, {"normal": np.arange(4)})
    assert np.array_equal(params.tables["normal"], before)
    params.tables["normal"][1] *= 3.0
    model.project(params, {"normal": np.array([1, 2])})
    assert np.linalg.norm(params.tables["normal"][1]) == pytest.approx(1.0)
    assert np.array_equal(params.tables["normal"][[0, 2, 3]], before[[0, 2, 3]])


def test_unknown_kind_and_bad_ids_are_usage_errors():
    with pytest.raises(SemKgeError) as e:
        get_model("rescal")
    assert e.value.code == 1
    params = init("transe", 3, 1, 2, seed=0)
    with pytest.raises(SemKgeError):
        score(params, [(0, 0, 3)])
    with pytest.raises(SemKgeError):
        score(params, [(0, 1, 2)])
