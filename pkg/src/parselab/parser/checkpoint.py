"""Versioned checkpoint files: one .npz holding every tensor plus JSON metadata."""

from __future__ import annotations

import io
import json

import numpy as np

from ..embeddings import Vocabulary
from .model import Hyperparams, ParserParams

FORMAT_VERSION = 1
_META = "__meta__"


def save_checkpoint(path, params: ParserParams, hp: Hyperparams, vocab: Vocabulary,
                    table_digest: str | None = None) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "hyperparams": hp.to_dict(),
        "vocab": vocab.to_dict(),
        "vocab_digest": vocab.digest(),
        "table_digest": table_digest,
        "static_dim": params.static_dim,
        "n_labels": params.n_labels,
        "tensor_order": params.names(),
    }
    arrays = {f"t_{k}": v for k, v in params.tensors.items()}
    arrays[_META] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path):
    """Return (ParserParams, Hyperparams, Vocabulary, metadata dict)."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(bytes(data[_META]).decode())
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
        tensors = {k: data[f"t_{k}"].copy() for k in meta["tensor_order"]}
    vocab = Vocabulary.from_dict(meta["vocab"])
    if vocab.digest() != meta["vocab_digest"]:
        raise ValueError("checkpoint vocabulary does not match its recorded digest")
    params = ParserParams(tensors, meta["static_dim"], meta["n_labels"])
    return params, Hyperparams(**meta["hyperparams"]), vocab, meta
