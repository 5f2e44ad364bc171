import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parselab.embeddings import (
    EmbeddingTable,
    Vocabulary,
    build_vocab,
    load_embeddings,
    lookup,
    read_embeddings,
    synthetic_embeddings,
)
from parselab.synthetic import synthetic_treebank

from gradcheck import sentence


def test_two_line_file():
    t = load_embeddings("na 0.1 0.2 0.3\nuku 1 2 3\n")
    assert t.dim == 3 and len(t) == 2
    np.testing.assert_array_equal(t.entries["uku"], [1.0, 2.0, 3.0])


def test_header_dimension_mismatch():
    body = "1000 300\nword " + " ".join(["0.5"] * 299) + "\n"
    with pytest.raises(ValueError, match="word"):
        load_embeddings(body)
    with pytest.raises(ValueError, match="header dimension"):
        load_embeddings("2 3\na 1 2 3\n", expected_dim=4)


def test_duplicate_keeps_first():
    t = load_embeddings(io.StringIO("2 2\nna 1 1\nna 9 9\n"))
    assert len(t) == 1
    np.testing.assert_array_equal(t.entries["na"], [1.0, 1.0])


def test_empty_and_non_numeric():
    with pytest.raises(ValueError):
        load_embeddings("")
    with pytest.raises(ValueError, match="non-numeric"):
        load_embeddings("a 1 x\n")


def test_file_round_trip(tmp_path):
    t = synthetic_embeddings(["a", "b", "The"], 4, seed=1)
    path = tmp_path / "v.txt"
    path.write_text(t.serialize())
    again = read_embeddings(path, expected_dim=4)
    assert again.digest() == t.digest()
    assert load_embeddings(t.serialize(header=False)).digest() == t.digest()


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.text("abcxyz", min_size=1, max_size=5),
                       st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3),
                       min_size=1, max_size=8))
def test_serialize_round_trip_property(entries):
    t = EmbeddingTable(3, {k: np.array(v) for k, v in entries.items()})
    again = load_embeddings(t.serialize())
    assert again.entries.keys() == t.entries.keys()
    for k in t.entries:
        np.testing.assert_allclose(again.entries[k], t.entries[k], rtol=0, atol=0)


def test_vocab_min_frequency():
    train = [sentence([("a", "NOUN", 0, "root")]), sentence([("a", "NOUN", 2, "dep"), ("b", "VERB", 0, "root")]),
             sentence([("a", "NOUN", 0, "root")])]
    v = build_vocab(train, min_frequency=2)
    assert "a" in v.word_index and "b" not in v.word_index
    assert v.word_id("b") == Vocabulary.UNK_ID
    v1 = build_vocab(train, min_frequency=1)
    assert {"a", "b"} <= set(v1.word_index)
    assert set(v1.char_index) >= {"a", "b"}


def test_pos_index_sizes():
    train = [sentence([("x", "NOUN", 2, "dep"), ("y", "VERB", 0, "root")])]
    assert len(build_vocab(train).pos_index) == 2
    assert len(build_vocab(train, pos_padding=True).pos_index) == 3
    v = build_vocab(train)
    assert v.pos_id("ADJ") == 2  # shared unseen row


def test_vocab_deterministic_and_serializable():
    train = synthetic_treebank(50, seed=4)
    a, b = build_vocab(train), build_vocab(train)
    assert a == b and a.digest() == b.digest()
    assert Vocabulary.from_dict(a.to_dict()) == a
    assert a.labels[0] == next(iter(a.label_index))


def test_lookup_fallback_order():
    table = EmbeddingTable(2, {"the": np.array([1.0, 2.0]), "The": np.array([3.0, 4.0]), "cat": np.array([5.0, 6.0])},
                           unk_vector=np.array([-1.0, -1.0]))
    vocab = build_vocab([sentence([("The", "DET", 2, "det"), ("cat", "NOUN", 0, "root")])], min_frequency=1)
    np.testing.assert_array_equal(lookup(vocab, table, "The")[2], [3.0, 4.0])
    np.testing.assert_array_equal(lookup(vocab, table, "CAT")[2], [5.0, 6.0])
    np.testing.assert_array_equal(lookup(vocab, table, "Ndiyahamba")[2], [-1.0, -1.0])
    wid, cids, _ = lookup(vocab, table, "Ndiyahamba")
    assert wid == Vocabulary.UNK_ID
    assert len(cids) == len("Ndiyahamba")


def test_lookup_the_falls_back_to_lowercase():
    table = EmbeddingTable(2, {"the": np.array([1.0, 2.0])})
    vocab = build_vocab([sentence([("x", "X", 0, "root")])], min_frequency=1)
    np.testing.assert_array_equal(lookup(vocab, table, "The")[2], [1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.text(min_size=0, max_size=12))
def test_lookup_ids_in_bounds(token):
    train = synthetic_treebank(20, seed=0)
    vocab = build_vocab(train, min_frequency=1)
    table = synthetic_embeddings(["road", "the"], 3)
    wid, cids, vec = lookup(vocab, table, token)
    assert 0 < wid < len(vocab.word_index)
    assert all(0 < c < len(vocab.char_index) for c in cids)
    is_unk = table.resolve(token) is None
    assert is_unk == (token not in table and token.lower() not in table)
    assert vec.shape == (3,)


def test_bad_table_shapes():
    with pytest.raises(ValueError):
        EmbeddingTable(2, {"a": np.zeros(3)})
    with pytest.raises(ValueError):
        EmbeddingTable(0, {})
