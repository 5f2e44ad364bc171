import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parselab.metrics import EvalScore, evaluate, mattr, relative_error_rate, zscore
from parselab.synthetic import synthetic_treebank

from gradcheck import sentence


def _ten_tokens():
    rows = [(f"w{i}", "PUNCT" if i == 9 else "NOUN", 0 if i == 0 else i, "dep") for i in range(10)]
    return sentence(rows)


def test_perfect_and_label_blind():
    gold = synthetic_treebank(5, seed=1)
    assert evaluate(gold, [(s.heads, s.deprels) for s in gold]) == EvalScore(100.0, 100.0, sum(map(len, gold)))
    wrong = evaluate(gold, [(s.heads, ["x"] * len(s)) for s in gold])
    assert (wrong.uas, wrong.las) == (100.0, 0.0)


def test_hand_count_80_70():
    gold = _ten_tokens()
    heads = list(gold.heads)
    rels = list(gold.deprels)
    heads[1] = heads[2] = 5  # two wrong heads
    rels[3] = "other"  # one right head, wrong label
    score = evaluate([gold], [(heads, rels)])
    assert (score.uas, score.las, score.token_count) == (80.0, 70.0, 10)


def test_punct_flag():
    gold = _ten_tokens()
    heads = list(gold.heads)
    heads[9] = 3  # only the PUNCT token is wrong
    assert evaluate([gold], [(heads, gold.deprels)], punct="include").uas == 90.0
    excluded = evaluate([gold], [(heads, gold.deprels)], punct="exclude")
    assert (excluded.uas, excluded.token_count) == (100.0, 9)


def test_evaluate_errors():
    gold = synthetic_treebank(2, seed=0)
    with pytest.raises(ValueError):
        evaluate(gold, [])
    with pytest.raises(ValueError):
        evaluate(gold[:1], [([0], ["root"])])
    with pytest.raises(ValueError):
        evaluate(gold, [(s.heads, s.deprels) for s in gold], punct="drop")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 999), st.data())
def test_las_never_exceeds_uas(seed, data):
    gold = synthetic_treebank(3, seed=seed)
    preds = []
    for s in gold:
        n = len(s)
        heads = data.draw(st.lists(st.integers(0, n), min_size=n, max_size=n))
        rels = data.draw(st.lists(st.sampled_from(["det", "nsubj", "obj", "root"]), min_size=n, max_size=n))
        preds.append((heads, rels))
    score = evaluate(gold, preds)
    assert 0 <= score.las <= score.uas <= 100


def test_rer_published_anchors():
    assert relative_error_rate(93.51, 95.81) == pytest.approx(-0.354, abs=5e-4)
    assert relative_error_rate(70.38, 61.08) == pytest.approx(0.314, abs=5e-4)
    assert relative_error_rate(80.0, 80.0) == 0.0
    with pytest.raises(ValueError):
        relative_error_rate(100.0, 90.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 99.99), st.floats(0, 100))
def test_rer_sign_law(base, comp):
    r = relative_error_rate(base, comp)
    assert (r > 0) == (comp < base)
    assert (r == 0) == (comp == base)


def test_mattr_hand_examples():
    assert mattr(list("abcdefg"), 3).value == 1.0
    assert mattr(list("aaaa"), 2).value == 0.5
    assert mattr(list("ababab"), 3).value == pytest.approx(2 / 3)
    short = mattr(list("aab"), 10, "xx")
    assert (short.value, short.token_count, short.language) == (2 / 3, 3, "xx")


def _mattr_enumerated(tokens, w):
    if len(tokens) < w:
        return len(set(tokens)) / len(tokens)
    ratios = [len(set(tokens[i:i + w])) / w for i in range(len(tokens) - w + 1)]
    return sum(ratios) / len(ratios)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.sampled_from("abcdeABC"), min_size=1, max_size=50), st.integers(1, 20))
def test_mattr_matches_enumeration(tokens, w):
    assert mattr(tokens, w).value == pytest.approx(_mattr_enumerated(tokens, w), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=50), st.integers(1, 12), st.permutations(range(7)))
def test_mattr_relabel_invariant(ids, w, perm):
    a = mattr([f"t{i}" for i in ids], w).value
    b = mattr([f"u{perm[i]}" for i in ids], w).value
    assert a == pytest.approx(b, abs=1e-15)


@pytest.mark.parametrize("k,w", [(1, 5), (3, 5), (5, 5), (4, 10), (7, 3)])
def test_mattr_uniform_repetition_bound(k, w):
    tokens = [str(i % k) for i in range(50)]
    assert mattr(tokens, w).value <= min(1.0, k / w) + 1e-12


def test_mattr_errors():
    with pytest.raises(ValueError):
        mattr([], 5)
    with pytest.raises(ValueError):
        mattr(["a"], 0)


def test_mattr_is_case_sensitive():
    assert mattr(["The", "the"], 2).value == 1.0


def test_zscore_two_points():
    zs = zscore([-1.0, 1.0])
    assert [round(s.z, 3) for s in zs] == [-0.707, 0.707]


def test_zscore_published_xhosa(published_languages):
    langs = sorted(published_languages)
    zs = dict(zip(langs, zscore([float(published_languages[l]["mattr"]) for l in langs])))
    assert zs["xho"].z == pytest.approx(2.381, abs=0.02)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30), st.floats(0.1, 10), st.floats(-100, 100))
def test_zscore_moments_and_affine_invariance(xs, a, b):
    x = np.asarray(xs)
    if x.std(ddof=1) < 1e-6 * max(1.0, np.abs(x).max()):
        with pytest.raises(ValueError):
            zscore([0.0, 0.0])
        return
    z = np.array([s.z for s in zscore(x)])
    assert abs(z.mean()) < 1e-12
    assert abs(z.std(ddof=1) - 1) < 1e-12
    z2 = np.array([s.z for s in zscore(a * x + b)])
    np.testing.assert_allclose(z2, z, atol=1e-8)


def test_zscore_errors():
    with pytest.raises(ValueError):
        zscore([1.0])
    with pytest.raises(ValueError):
        zscore([2.0, 2.0, 2.0])
