"""Static word vectors and vocabularies."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .treebank import DepSentence

PAD = "<pad>"
UNK = "<unk>"


@dataclass
class EmbeddingTable:
    dim: int
    entries: dict[str, np.ndarray]
    unk_vector: np.ndarray = None

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("embedding dimension must be positive")
        if self.unk_vector is None:
            self.unk_vector = np.zeros(self.dim)
        for tok, vec in self.entries.items():
            if vec.shape != (self.dim,):
                raise ValueError(f"vector for {tok!r} has shape {vec.shape}, expected ({self.dim},)")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def resolve(self, token: str) -> str | None:
        """Key of the table entry used for ``token``: verbatim, then lowercased."""
        if token in self.entries:
            return token
        low = token.lower()
        if low in self.entries:
            return low
        return None

    def matrix(self, keys: Sequence[str]) -> np.ndarray:
        return np.stack([self.entries[k] for k in keys]) if keys else np.zeros((0, self.dim))

    def digest(self) -> str:
        h = hashlib.sha256(f"{self.dim}\n".encode())
        for tok in sorted(self.entries):
            h.update(tok.encode() + b"\t" + self.entries[tok].tobytes())
        h.update(np.asarray(self.unk_vector, dtype=float).tobytes())
        return h.hexdigest()

    def serialize(self, header: bool = True) -> str:
        lines = [f"{len(self.entries)} {self.dim}"] if header else []
        for tok, vec in self.entries.items():
            lines.append(tok + " " + " ".join(repr(float(v)) for v in vec))
        return "\n".join(lines) + "\n"


def load_embeddings(stream: str | TextIO | Iterable[str], expected_dim: int | None = None) -> EmbeddingTable:
    """Read vectors in the word2vec/fastText text format.

    The optional "count dim" header is checked against ``expected_dim``.
    Duplicate tokens keep their first vector.
    """
    if isinstance(stream, str):
        stream = stream.splitlines()
    entries: dict[str, np.ndarray] = {}
    dim = expected_dim
    first = True
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.rstrip(" ").split(" ")
        if first:
            first = False
            if len(parts) == 2 and all(p.isdigit() for p in parts):
                hdim = int(parts[1])
                if expected_dim is not None and hdim != expected_dim:
                    raise ValueError(f"header dimension {hdim} != expected {expected_dim}")
                dim = hdim
                continue
        token, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim:
            raise ValueError(f"line {lineno}: token {token!r} has {len(values)} values, expected {dim}")
        if token in entries:
            continue
        try:
            entries[token] = np.array([float(v) for v in values])
        except ValueError:
            raise ValueError(f"line {lineno}: token {token!r} has a non-numeric value") from None
    if not entries:
        raise ValueError("embedding stream contains no vectors")
    return EmbeddingTable(dim=dim, entries=entries)


def read_embeddings(path, expected_dim: int | None = None) -> EmbeddingTable:
    with open(path, encoding="utf-8") as f:
        return load_embeddings(f, expected_dim)


@dataclass
class Vocabulary:
    word_index: dict[str, int]
    char_index: dict[str, int]
    pos_index: dict[str, int]
    label_index: dict[str, int]
    min_frequency: int = 2

    PAD_ID = 0
    UNK_ID = 1

    @property
    def labels(self) -> list[str]:
        return sorted(self.label_index, key=self.label_index.get)

    def word_id(self, form: str) -> int:
        return self.word_index.get(form, self.UNK_ID)

    def char_ids(self, form: str) -> list[int]:
        return [self.char_index.get(c, self.UNK_ID) for c in form] or [self.UNK_ID]

    def pos_id(self, upos: str) -> int:
        # unseen tags share one extra row past the end of the index
        return self.pos_index.get(upos, len(self.pos_index))

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in ("word_index", "char_index", "pos_index", "label_index"):
            for key, idx in sorted(getattr(self, name).items(), key=lambda kv: kv[1]):
                h.update(f"{name}\t{idx}\t{key}\n".encode())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "word_index": self.word_index,
            "char_index": self.char_index,
            "pos_index": self.pos_index,
            "label_index": self.label_index,
            "min_frequency": self.min_frequency,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(
            word_index=dict(d["word_index"]),
            char_index=dict(d["char_index"]),
            pos_index=dict(d["pos_index"]),
            label_index=dict(d["label_index"]),
            min_frequency=d["min_frequency"],
        )


def _index(counts: Counter, min_frequency: int, reserved: Sequence[str]) -> dict[str, int]:
    index = {tok: i for i, tok in enumerate(reserved)}
    # first-occurrence order keeps ids stable for a given training split
    for tok, c in counts.items():
        if c >= min_frequency and tok not in index:
            index[tok] = len(index)
    return index


def build_vocab(train: Sequence[DepSentence], min_frequency: int = 2, pos_padding: bool = False) -> Vocabulary:
    if not train:
        raise ValueError("cannot build a vocabulary from an empty training split")
    words: Counter = Counter()
    chars: Counter = Counter()
    tags: Counter = Counter()
    labels: Counter = Counter()
    for sent in train:
        for tok in sent.tokens:
            words[tok.form] += 1
            chars.update(tok.form)
            tags[tok.upos] += 1
            labels[tok.deprel] += 1
    return Vocabulary(
        word_index=_index(words, min_frequency, (PAD, UNK)),
        char_index=_index(chars, 1, (PAD, UNK)),
        pos_index=_index(tags, 1, (PAD,) if pos_padding else ()),
        label_index=_index(labels, 1, ()),
        min_frequency=min_frequency,
    )


def lookup(vocab: Vocabulary, table: EmbeddingTable, token: str) -> tuple[int, list[int], np.ndarray]:
    """Word id, character ids and static vector for ``token``.

    The static vector falls back from the verbatim form to its lowercase,
    then to the table's UNK vector.
    """
    key = table.resolve(token)
    vec = table.entries[key] if key is not None else table.unk_vector
    return vocab.word_id(token), vocab.char_ids(token), vec


def synthetic_embeddings(words: Iterable[str], dim: int, seed: int = 0) -> EmbeddingTable:
    """Random vectors for a word list; stands in for a real vector file."""
    rng = np.random.default_rng(seed)
    entries = {}
    for w in words:
        if w not in entries:
            entries[w] = np.round(rng.normal(0.0, 1.0, dim), 6)
    return EmbeddingTable(dim=dim, entries=entries)
