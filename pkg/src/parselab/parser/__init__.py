from .checkpoint import load_checkpoint, save_checkpoint
from .model import (
    Hyperparams,
    ParserParams,
    encode,
    init_params,
    loss_and_gradients,
    predict,
    score_arcs,
    score_labels,
)
from .training import DivergenceError, RunResult, grid_search, learning_rate_at, train

__all__ = [
    "DivergenceError",
    "Hyperparams",
    "ParserParams",
    "RunResult",
    "encode",
    "grid_search",
    "init_params",
    "learning_rate_at",
    "load_checkpoint",
    "loss_and_gradients",
    "predict",
    "save_checkpoint",
    "score_arcs",
    "score_labels",
    "train",
]
