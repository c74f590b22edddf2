import numpy as np
import pytest
from hypothesis import given, settings

from semkge.tools.errors import SemKgeError
from semkge.tools.kg import KnowledgeGraph, Schema, Triple, is_sem_valid, sem_valid_candidates
from tests.kgs import ADIDAS, CHRISTMAS, FRANCE, GERMANY, MACRON, OBAMA, PRESIDENT_OF, USA, small_kgs


def test_worked_examples(president):
    s = president.schema
    assert is_sem_valid(Triple(MACRON, PRESIDENT_OF, FRANCE), s)
    assert is_sem_valid(Triple(OBAMA, PRESIDENT_OF, FRANCE), s)
    assert is_sem_valid(Triple(MACRON, PRESIDENT_OF, GERMANY), s)
    assert not is_sem_valid(Triple(ADIDAS, PRESIDENT_OF, FRANCE), s)
    assert not is_sem_valid(Triple(MACRON, PRESIDENT_OF, CHRISTMAS), s)


def test_undeclared_side_counts_as_satisfied():
    s = Schema(
        num_entities=2,
        num_relations=1,
        num_classes=2,
        entity_classes={0: frozenset({0}), 1: frozenset({1})},
        rel_domain={0: frozenset({0})},
    )
    assert is_sem_valid(Triple(0, 0, 1), s)
    assert is_sem_valid(Triple(0, 0, 0), s)
    assert not is_sem_valid(Triple(1, 0, 0), s)
    assert not s.is_declared(0)


def test_untyped_entity_fails_declared_constraint():
    s = Schema(
        num_entities=2,
        num_relations=1,
        num_classes=1,
        entity_classes={0: frozenset({0})},
        rel_domain={0: frozenset({0})},
        rel_range={0: frozenset({0})},
    )
    assert not is_sem_valid(Triple(0, 0, 1), s)


def test_out_of_bounds_triple_is_usage_error(president):
    with pytest.raises(SemKgeError) as e:
        is_sem_valid(Triple(99, PRESIDENT_OF, FRANCE), president.schema)
    assert e.value.code == 1


def test_candidates_split_entities_by_side(president):
    assert sem_valid_candidates(PRESIDENT_OF, "head", president) == {MACRON, OBAMA}
    assert sem_valid_candidates(PRESIDENT_OF, "tail", president) == {FRANCE, GERMANY, USA}
    valid_ids, invalid_ids = president.candidate_ids(PRESIDENT_OF, "tail")
    assert sorted(valid_ids.tolist() + invalid_ids.tolist()) == list(range(7))
    assert set(valid_ids.tolist()).isdisjoint(invalid_ids.tolist())


def test_known_completions(president):
    assert president.known(PRESIDENT_OF, MACRON, "tail").tolist() == [FRANCE]
    assert president.known(PRESIDENT_OF, USA, "head").tolist() == [OBAMA]
    assert president.known(PRESIDENT_OF, GERMANY, "head").tolist() == []
    assert (MACRON, PRESIDENT_OF, FRANCE) in president.all_true


def test_overlapping_splits_are_rejected(president):
    with pytest.raises(SemKgeError) as e:
        KnowledgeGraph(
            num_entities=7,
            num_relations=1,
            train=[(MACRON, PRESIDENT_OF, FRANCE)],
            valid=[],
            test=[(MACRON, PRESIDENT_OF, FRANCE)],
            schema=president.schema,
        )
    assert e.value.code == 1
    assert "share" in e.value.context


def test_bad_side_is_rejected(president):
    with pytest.raises(SemKgeError):
        president.candidate_mask(PRESIDENT_OF, "middle")


@settings(max_examples=50, deadline=None)
@given(small_kgs(max_entities=15, undeclared=True))
def test_candidate_masks_agree_with_validity(kg):
    for r in range(kg.num_relations):
        heads = kg.candidate_mask(r, "head")
        tails = kg.candidate_mask(r, "tail")
        for h in range(kg.num_entities):
            for t in range(kg.num_entities):
                assert is_sem_valid(Triple(h, r, t), kg.schema) == bool(heads[h] and tails[t])
        assert sem_valid_candidates(r, "head", kg) == set(np.flatnonzero(heads).tolist())
