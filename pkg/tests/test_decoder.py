import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from parselab.decoder import (
    all_arborescences,
    assign_labels,
    brute_force_mst,
    chu_liu_edmonds,
    tree_score,
)
from parselab.treebank import is_projective, validate_heads


def scores_from(arcs, n, fill=-100.0):
    """Score matrix from {(head, dep): score}; everything else gets ``fill``."""
    s = np.full((n + 1, n), fill)
    for (h, d), v in arcs.items():
        s[h, d - 1] = v
    return s


def test_single_token():
    assert list(chu_liu_edmonds(np.array([[-3.0], [7.0]]))) == [0]


def test_two_cycle_broken():
    s = scores_from({(0, 1): 1, (0, 2): 0, (1, 2): 5, (2, 1): 5}, 2)
    heads = chu_liu_edmonds(s)
    assert list(heads) == [0, 1]
    assert tree_score(s, heads) == 6
    assert list(brute_force_mst(s)) == [0, 1]


def test_ties_pick_lowest_heads():
    assert list(chu_liu_edmonds(np.zeros((3, 2)))) == [0, 1]
    assert list(brute_force_mst(np.zeros((3, 2)))) == [0, 1]
    assert list(chu_liu_edmonds(np.zeros((3, 2)), single_root=False)) == [0, 0]


def test_non_projective_optimum():
    # arc 3 -> 1 crosses the root arc into token 2
    s = scores_from({(0, 2): 10, (2, 3): 10, (3, 1): 10}, 3)
    heads = chu_liu_edmonds(s)
    assert list(heads) == [3, 0, 2]
    assert list(brute_force_mst(s)) == [3, 0, 2]
    assert not is_projective(list(heads))


def test_arborescence_counts():
    for n in range(1, 7):
        assert len(all_arborescences(n, True)) == n ** (n - 1)
        assert len(all_arborescences(n, False)) == (n + 1) ** (n - 1)


def test_enumeration_is_sorted_and_valid():
    trees = all_arborescences(4, False)
    as_tuples = [tuple(t) for t in trees]
    assert as_tuples == sorted(as_tuples)
    assert all(validate_heads(t).is_tree for t in as_tuples)
    with pytest.raises(ValueError):
        trees[0, 0] = 1


@pytest.mark.parametrize("single_root", [True, False])
def test_matches_oracle_on_random_integers(single_root):
    rng = np.random.default_rng(11)
    for n in range(2, 7):
        for _ in range(120):
            s = rng.integers(-4, 5, size=(n + 1, n)).astype(float)
            heads = chu_liu_edmonds(s, single_root=single_root)
            oracle = brute_force_mst(s, single_root=single_root)
            assert tree_score(s, heads) == tree_score(s, oracle)
            # with exact tie-breaking the trees are identical too
            assert list(heads) == list(oracle)
            r = validate_heads(list(heads))
            assert r.is_tree
            if single_root:
                assert r.roots == 1


def test_real_scores_match_oracle():
    rng = np.random.default_rng(5)
    for n in range(2, 8):
        for _ in range(30):
            s = rng.normal(size=(n + 1, n))
            assert math.isclose(tree_score(s, chu_liu_edmonds(s)), tree_score(s, brute_force_mst(s)),
                                abs_tol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6).flatmap(lambda n: arrays(np.int64, (n + 1, n), elements=st.integers(-5, 5))),
       st.integers(1, 6), st.integers(-7, 7))
def test_column_shift_invariance(s, col, c):
    s = s.astype(float)
    n = s.shape[1]
    d = (col - 1) % n
    shifted = s.copy()
    shifted[:, d] += c
    a, b = chu_liu_edmonds(s), chu_liu_edmonds(shifted)
    assert list(a) == list(b)
    assert tree_score(shifted, b) == tree_score(s, a) + c


def test_bad_inputs():
    with pytest.raises(ValueError):
        chu_liu_edmonds(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        chu_liu_edmonds(np.zeros((1, 0)))
    with pytest.raises(ValueError):
        chu_liu_edmonds(np.array([[np.nan], [0.0]]))
    with pytest.raises(ValueError):
        all_arborescences(9)


def test_labels():
    assert list(assign_labels(np.zeros((3, 4)))) == [0, 0, 0]
    assert list(assign_labels(np.eye(3)[[2, 0, 1]])) == [2, 0, 1]
    rng = np.random.default_rng(0)
    for n in range(1, 7):
        table = rng.integers(0, 3, size=(n, 4)).astype(float)
        expect = [max(range(4), key=lambda k: (table[i, k], -k)) for i in range(n)]
        assert list(assign_labels(table, heads=[0] * n)) == expect
    with pytest.raises(ValueError):
        assign_labels(np.zeros((2, 2)), heads=[0])
