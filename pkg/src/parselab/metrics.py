"""Attachment scores, relative error rate, MATTR and z-scores."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .treebank import DepSentence

PUNCT_TAGS = frozenset({"PUNCT"})


@dataclass(frozen=True)
class EvalScore:
    uas: float
    las: float
    token_count: int

    def __post_init__(self):
        if not (0.0 <= self.las <= self.uas <= 100.0):
            raise ValueError(f"inconsistent scores: uas={self.uas}, las={self.las}")

    def metric(self, name: str) -> float:
        return {"UAS": self.uas, "LAS": self.las}[name.upper()]


@dataclass(frozen=True)
class RerRecord:
    language: str
    comparison_model: str
    metric: str
    value: float


@dataclass(frozen=True)
class MattrScore:
    language: str
    token_count: int
    window: int
    value: float


@dataclass(frozen=True)
class StandardizedScore:
    raw: float
    z: float


def evaluate(
    gold: Sequence[DepSentence],
    predicted: Sequence[tuple[Sequence[int], Sequence[str]]],
    punct: str = "include",
) -> EvalScore:
    """Micro-averaged UAS/LAS over all pooled tokens.

    With ``punct="exclude"`` tokens whose gold UPOS is PUNCT are skipped.
    """
    if punct not in ("include", "exclude"):
        raise ValueError("punct must be 'include' or 'exclude'")
    if len(gold) != len(predicted):
        raise ValueError(f"{len(gold)} gold sentences but {len(predicted)} predictions")
    total = heads_ok = both_ok = 0
    for i, (sent, (heads, rels)) in enumerate(zip(gold, predicted)):
        if len(heads) != len(sent) or len(rels) != len(sent):
            raise ValueError(f"sentence {i}: prediction length differs from gold ({len(sent)} tokens)")
        for tok, h, r in zip(sent.tokens, heads, rels):
            if punct == "exclude" and tok.upos in PUNCT_TAGS:
                continue
            total += 1
            if int(h) == tok.head:
                heads_ok += 1
                if r == tok.deprel:
                    both_ok += 1
    if total == 0:
        raise ValueError("no tokens to evaluate")
    return EvalScore(uas=100.0 * heads_ok / total, las=100.0 * both_ok / total, token_count=total)


def relative_error_rate(baseline: float, comparison: float) -> float:
    """Share of the baseline's remaining error added by the comparison model.

    Positive when the comparison model scores below the baseline.
    """
    if not baseline < 100.0:
        raise ValueError("relative error rate undefined for a baseline of 100")
    return (baseline - comparison) / (100.0 - baseline)


def mattr(tokens: Sequence[str], window: int = 500, language: str = "") -> MattrScore:
    """Moving-average type-token ratio with stride-1 windows.

    Texts shorter than the window are scored as a single whole-text window.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    n = len(tokens)
    if n == 0:
        raise ValueError("MATTR needs at least one token")
    if n < window:
        return MattrScore(language, n, window, len(set(tokens)) / n)
    counts = Counter(tokens[:window])
    distinct = len(counts)
    total = distinct
    for i in range(window, n):
        out, inc = tokens[i - window], tokens[i]
        if out != inc:
            counts[out] -= 1
            if counts[out] == 0:
                del counts[out]
                distinct -= 1
            if counts[inc] == 0:
                distinct += 1
            counts[inc] += 1
        total += distinct
    n_windows = n - window + 1
    return MattrScore(language, n, window, total / (n_windows * window))


def zscore(values: Sequence[float]) -> list[StandardizedScore]:
    """Standardize with the sample (n-1) standard deviation."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values")
    sd = x.std(ddof=1)
    if not sd > 0 or not math.isfinite(sd):
        raise ValueError("values have zero variance")
    z = (x - x.mean()) / sd
    return [StandardizedScore(float(r), float(v)) for r, v in zip(x, z)]
