"""CoNLL-U reading, tree validation, splitting and subsampling."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO


class ConlluError(ValueError):
    """Malformed CoNLL-U input."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


@dataclass(frozen=True)
class DepToken:
    id: int
    form: str
    upos: str
    head: int
    deprel: str
    lemma: str = "_"
    xpos: str = "_"
    feats: str = "_"
    deps: str = "_"
    misc: str = "_"


@dataclass(frozen=True)
class DepSentence:
    tokens: tuple[DepToken, ...]
    sent_id: str | None = None
    language: str = ""
    comments: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def heads(self) -> list[int]:
        return [t.head for t in self.tokens]

    @property
    def deprels(self) -> list[str]:
        return [t.deprel for t in self.tokens]

    @property
    def upos(self) -> list[str]:
        return [t.upos for t in self.tokens]

    def with_predictions(self, heads: Sequence[int], deprels: Sequence[str]) -> "DepSentence":
        if len(heads) != len(self.tokens) or len(deprels) != len(self.tokens):
            raise ValueError("prediction length does not match sentence length")
        tokens = tuple(
            DepToken(
                id=t.id, form=t.form, upos=t.upos, head=int(h), deprel=r,
                lemma=t.lemma, xpos=t.xpos, feats=t.feats, deps=t.deps, misc=t.misc,
            )
            for t, h, r in zip(self.tokens, heads, deprels)
        )
        return DepSentence(tokens, self.sent_id, self.language, self.comments)


@dataclass
class TreebankSplit:
    train: list[DepSentence]
    dev: list[DepSentence]
    test: list[DepSentence]

    @property
    def counts(self) -> dict[str, int]:
        return {"train": len(self.train), "dev": len(self.dev), "test": len(self.test)}


@dataclass(frozen=True)
class TreeReport:
    roots: int
    acyclic: bool
    projective: bool
    heads_in_range: bool = True

    @property
    def is_tree(self) -> bool:
        return self.heads_in_range and self.acyclic and self.roots >= 1


def _parse_block(lines: list[tuple[int, str]], language: str) -> DepSentence:
    tokens = []
    comments = []
    sent_id = None
    for lineno, line in lines:
        if line.startswith("#"):
            comments.append(line)
            body = line[1:].strip()
            if body.startswith("sent_id"):
                key, _, value = body.partition("=")
                if key.strip() == "sent_id":
                    sent_id = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"expected 10 tab-separated columns, got {len(cols)}", lineno)
        tid = cols[0]
        # multiword ranges and empty nodes are not syntactic words
        if "-" in tid or "." in tid:
            continue
        try:
            idx = int(tid)
        except ValueError:
            raise ConlluError(f"non-integer token id {tid!r}", lineno) from None
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluError(f"non-integer HEAD {cols[6]!r}", lineno) from None
        tokens.append(
            DepToken(
                id=idx, form=cols[1], lemma=cols[2], upos=cols[3], xpos=cols[4],
                feats=cols[5], head=head, deprel=cols[7], deps=cols[8], misc=cols[9],
            )
        )
    for expected, tok in enumerate(tokens, start=1):
        if tok.id != expected:
            raise ConlluError(f"token ids not sequential (expected {expected}, got {tok.id})", lines[0][0])
    return DepSentence(tuple(tokens), sent_id, language, tuple(comments))


def parse_conllu(text: str | TextIO | Iterable[str], language: str = "") -> list[DepSentence]:
    """Parse CoNLL-U text into sentences.

    Multiword-token range lines and empty nodes are skipped. Raises
    ConlluError naming the line on a wrong column count or a non-integer HEAD.
    """
    if isinstance(text, str):
        text = text.splitlines()
    sentences = []
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if block:
                sent = _parse_block(block, language)
                if sent.tokens:
                    sentences.append(sent)
                block = []
            continue
        block.append((lineno, line))
    if block:
        sent = _parse_block(block, language)
        if sent.tokens:
            sentences.append(sent)
    return sentences


def read_conllu(path, language: str = "") -> list[DepSentence]:
    with open(path, encoding="utf-8") as f:
        return parse_conllu(f, language)


def serialize_conllu(sentences: Iterable[DepSentence]) -> str:
    out = []
    for sent in sentences:
        comments = list(sent.comments)
        if sent.sent_id is not None and not any(
            c[1:].strip().split("=")[0].strip() == "sent_id" for c in comments
        ):
            comments.insert(0, f"# sent_id = {sent.sent_id}")
        out.extend(comments)
        for t in sent.tokens:
            out.append("\t".join([
                str(t.id), t.form, t.lemma, t.upos, t.xpos, t.feats,
                str(t.head), t.deprel or "_", t.deps, t.misc,
            ]))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


def write_conllu(path, sentences: Iterable[DepSentence]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_conllu(sentences))


def _has_cycle(heads: Sequence[int]) -> bool:
    n = len(heads)
    state = [0] * (n + 1)  # 0 unvisited, 1 on current path, 2 done
    state[0] = 2
    for start in range(1, n + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if state[node] == 1:
            return True
        for p in path:
            state[p] = 2
    return False


def is_projective(heads: Sequence[int]) -> bool:
    """No two arcs cross when drawn above the sentence (root arcs included)."""
    arcs = [(min(h, d), max(h, d)) for d, h in enumerate(heads, start=1)]
    arcs.sort()
    for (a1, b1), (a2, b2) in itertools.combinations(arcs, 2):
        if a1 < a2 < b1 < b2 or a2 < a1 < b2 < b1:
            return False
    return True


def validate_heads(heads: Sequence[int]) -> TreeReport:
    n = len(heads)
    in_range = all(0 <= h <= n and h != d for d, h in enumerate(heads, start=1))
    roots = sum(1 for h in heads if h == 0)
    if not in_range:
        return TreeReport(roots=roots, acyclic=False, projective=False, heads_in_range=False)
    acyclic = not _has_cycle(heads)
    return TreeReport(roots=roots, acyclic=acyclic, projective=acyclic and is_projective(heads))


def validate_tree(sentence: DepSentence) -> TreeReport:
    return validate_heads(sentence.heads)


def split_treebank(
    sentences: Sequence[DepSentence],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> TreebankSplit:
    """Shuffle with ``seed`` and cut into train/dev/test.

    Dev and test sizes are ``floor(ratio * n)``; every remaining sentence goes
    to train. Each split keeps its sentences in original corpus order.
    """
    n = len(sentences)
    if n == 0:
        raise ValueError("cannot split an empty treebank")
    if n < 3:
        raise ValueError("need at least 3 sentences to split")
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n_dev = int(ratios[1] * n + 1e-9)
    n_test = int(ratios[2] * n + 1e-9)
    order = list(range(n))
    random.Random(seed).shuffle(order)
    dev_idx = sorted(order[:n_dev])
    test_idx = sorted(order[n_dev:n_dev + n_test])
    train_idx = sorted(order[n_dev + n_test:])
    return TreebankSplit(
        train=[sentences[i] for i in train_idx],
        dev=[sentences[i] for i in dev_idx],
        test=[sentences[i] for i in test_idx],
    )


def subsample(sentences: Sequence[DepSentence], n: int, seed: int = 0) -> list[DepSentence]:
    """Uniform sample of ``n`` sentences without replacement, in corpus order."""
    if n < 0 or n > len(sentences):
        raise ValueError(f"cannot subsample {n} from {len(sentences)} sentences")
    keep = sorted(random.Random(seed).sample(range(len(sentences)), n))
    return [sentences[i] for i in keep]
