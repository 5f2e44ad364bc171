"""Gradient-descent training with exponential LR decay and early stopping."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..embeddings import EmbeddingTable, Vocabulary
from ..metrics import evaluate
from ..treebank import DepSentence, TreebankSplit
from .model import (
    Hyperparams,
    ParserParams,
    batch_loss,
    featurize,
    group_by_length,
    init_params,
    predict,
    zero_grads,
)

log = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class RunResult:
    seed: int
    uas: float
    las: float
    best_epoch: int
    language: str = ""
    epochs_run: int = 0

    def __post_init__(self):
        if not 0.0 <= self.las <= self.uas <= 100.0:
            raise ValueError(f"inconsistent scores uas={self.uas} las={self.las}")


def learning_rate_at(hp: Hyperparams, step: int) -> float:
    return hp.learning_rate * hp.decay_rate ** (step / hp.decay_steps)


def make_batches(sentences: Sequence[DepSentence], batch_size: int, rng: np.random.Generator) -> list[list[int]]:
    """Length buckets cut into chunks of at most ``batch_size``, in shuffled order."""
    batches = []
    for _, idx in group_by_length(sentences).items():
        idx = list(idx)
        rng.shuffle(idx)
        for k in range(0, len(idx), batch_size):
            batches.append(idx[k:k + batch_size])
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def train_epoch(params: ParserParams, train: Sequence[DepSentence], vocab: Vocabulary,
                table: EmbeddingTable | None, hp: Hyperparams, rng: np.random.Generator, step: int) -> tuple[int, float]:
    total_loss = 0.0
    for idx in make_batches(train, hp.batch_size, rng):
        sents = [train[i] for i in idx]
        fb = featurize(sents, vocab, table)
        grads = zero_grads(params)
        loss = batch_loss(params, fb, fb.word_ids.size, grads, rng, hp.dropout)
        if not math.isfinite(loss):
            raise DivergenceError(f"non-finite loss {loss} at step {step} (lr {learning_rate_at(hp, step):.4g})")
        lr = learning_rate_at(hp, step)
        for k, g in grads.items():
            params.tensors[k] -= lr * g
        step += 1
        total_loss += loss * fb.word_ids.size
    if not params.all_finite():
        raise DivergenceError(f"parameters became non-finite by step {step}")
    return step, total_loss / max(1, sum(len(s) for s in train))


def train(config: Hyperparams, split: TreebankSplit, vocab: Vocabulary, table: EmbeddingTable | None,
          language: str = "", single_root: bool = True, punct: str = "include",
          eval_set: str = "test") -> tuple[ParserParams, RunResult]:
    """Train from ``config.seed``; keep the parameters with the best dev LAS.

    The returned RunResult scores the best parameters on ``eval_set``
    ("test" or "dev"). Training stops once dev LAS has not improved for
    more than ``patience`` epochs.
    """
    if not split.train or not split.dev:
        raise ValueError("training needs non-empty train and dev splits")
    rng = np.random.default_rng(config.seed)
    table_unk = table.unk_vector if table is not None else None
    params = init_params(config, vocab, table.dim if table is not None else 0, rng, table_unk)
    best = params.copy()
    best_las, best_uas, best_epoch = -1.0, -1.0, 0
    step = 0
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        step, mean_loss = train_epoch(params, split.train, vocab, table, config, rng, step)
        dev = evaluate(split.dev, predict(split.dev, params, vocab, table, single_root), punct=punct)
        log.debug("epoch %d loss %.4f dev uas %.2f las %.2f", epoch, mean_loss, dev.uas, dev.las)
        if dev.las > best_las:
            best_las, best_uas, best_epoch = dev.las, dev.uas, epoch
            best = params.copy()
        elif epoch - best_epoch > config.patience:
            break
    target = split.test if eval_set == "test" and split.test else split.dev
    score = evaluate(target, predict(target, best, vocab, table, single_root), punct=punct)
    return best, RunResult(seed=config.seed, uas=score.uas, las=score.las, best_epoch=best_epoch,
                           language=language, epochs_run=epoch)


def grid_search(grid: dict[str, Sequence], base: Hyperparams, split: TreebankSplit, vocab: Vocabulary,
                table: EmbeddingTable | None, budget_fraction: float = 0.25, expected_runs: int | None = None,
                single_root: bool = True, punct: str = "include"):
    """Try every (learning_rate, decay_rate, decay_steps) combination once.

    Each run uses ``base.seed``, ``budget_fraction`` of the epoch budget and
    half the patience. The best dev LAS wins; ties keep the earlier cell.
    Returns (best Hyperparams, list of (Hyperparams, dev RunResult)).
    """
    keys = ("learning_rate", "decay_rate", "decay_steps")
    values = [list(grid.get(k, [getattr(base, k)])) for k in keys]
    if any(len(v) == 0 for v in values):
        raise ValueError("grid has an empty axis")
    cells = list(itertools.product(*values))
    if expected_runs is not None and len(cells) != expected_runs:
        raise ValueError(f"grid has {len(cells)} cells, expected {expected_runs}")
    max_epochs = max(1, int(round(base.max_epochs * budget_fraction)))
    patience = min(base.patience // 2, max_epochs)
    if len(cells) == 1:
        return base.replace(**dict(zip(keys, cells[0]))), []
    trials = []
    best_hp, best_las = None, -math.inf
    for cell in cells:
        hp = base.replace(max_epochs=max_epochs, patience=patience, **dict(zip(keys, cell)))
        try:
            _, res = train(hp, split, vocab, table, single_root=single_root, punct=punct, eval_set="dev")
        except DivergenceError as exc:
            log.warning("grid cell %s diverged: %s", cell, exc)
            continue
        trials.append((hp, res))
        if res.las > best_las:
            best_las = res.las
            best_hp = base.replace(**dict(zip(keys, cell)))
    if best_hp is None:
        raise DivergenceError("every grid cell diverged")
    return best_hp, trials
