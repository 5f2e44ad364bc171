"""Biaffine BiLSTM parser with hand-written backpropagation.

Everything runs in float64 numpy. A batch holds sentences of one length so
all tensors are dense (B, n, ...) arrays without padding masks.

Token input = [word embedding ; static vector ; char-CNN feature ; POS embedding].
The static vector is frozen; tokens missing from the table use the trainable
``static_unk`` row instead.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..decoder import chu_liu_edmonds
from ..embeddings import EmbeddingTable, Vocabulary
from ..treebank import DepSentence

CHAR_WINDOW = 3


@dataclass
class Hyperparams:
    learning_rate: float = 0.1
    decay_rate: float = 0.75
    decay_steps: int = 5000
    max_epochs: int = 1000
    patience: int = 100
    word_dim: int = 32
    char_dim: int = 16
    char_filters: int = 16
    pos_dim: int = 8
    hidden: int = 64
    layers: int = 1
    arc_dim: int = 64
    label_dim: int = 32
    dropout: float = 0.0
    batch_size: int = 16
    min_frequency: int = 2
    init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if not 0 < self.decay_rate <= 1:
            raise ValueError("decay_rate must lie in (0, 1]")
        if self.decay_steps <= 0:
            raise ValueError("decay_steps must be positive")
        if self.patience < 0 or self.max_epochs < 1:
            raise ValueError("need max_epochs >= 1 and patience >= 0")
        for name in ("word_dim", "char_dim", "char_filters", "pos_dim", "hidden",
                     "layers", "arc_dim", "label_dim", "batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "Hyperparams":
        d = self.to_dict()
        d.update(changes)
        return Hyperparams(**d)


@dataclass
class ParserParams:
    """Learnable tensors, keyed by name."""

    tensors: dict[str, np.ndarray]
    static_dim: int
    n_labels: int

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def copy(self) -> "ParserParams":
        return ParserParams({k: v.copy() for k, v in self.tensors.items()}, self.static_dim, self.n_labels)

    @property
    def hidden(self) -> int:
        return self.tensors["lstm0f_Wh"].shape[0]

    @property
    def layers(self) -> int:
        return sum(1 for k in self.tensors if k.endswith("f_Wh"))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.tensors.values())


def init_params(hp: Hyperparams, vocab: Vocabulary, static_dim: int, rng: np.random.Generator,
                unk_vector: np.ndarray | None = None) -> ParserParams:
    s = hp.init_scale

    def mat(fan_in, *shape):
        return rng.normal(0.0, s / np.sqrt(fan_in), shape)

    t: dict[str, np.ndarray] = {}
    t["word_emb"] = rng.normal(0.0, 0.5 * s, (len(vocab.word_index), hp.word_dim))
    t["word_emb"][Vocabulary.PAD_ID] = 0.0
    t["static_unk"] = (np.array(unk_vector, dtype=float).copy() if unk_vector is not None
                       else np.zeros(static_dim))
    t["char_emb"] = rng.normal(0.0, 0.5 * s, (len(vocab.char_index), hp.char_dim))
    t["char_emb"][Vocabulary.PAD_ID] = 0.0
    t["char_W"] = mat(CHAR_WINDOW * hp.char_dim, CHAR_WINDOW * hp.char_dim, hp.char_filters)
    t["char_b"] = np.zeros(hp.char_filters)
    t["pos_emb"] = rng.normal(0.0, 0.5 * s, (len(vocab.pos_index) + 1, hp.pos_dim))
    d_in = hp.word_dim + static_dim + hp.char_filters + hp.pos_dim
    H = hp.hidden
    for layer in range(hp.layers):
        for direction in "fb":
            k = f"lstm{layer}{direction}"
            t[k + "_Wx"] = mat(d_in, d_in, 4 * H)
            t[k + "_Wh"] = mat(H, H, 4 * H)
            b = np.zeros(4 * H)
            b[H:2 * H] = 1.0  # forget gate
            t[k + "_b"] = b
        d_in = 2 * H
    t["root"] = rng.normal(0.0, 0.5 * s, 2 * H)
    for k, dim in (("arc_head", hp.arc_dim), ("arc_dep", hp.arc_dim),
                   ("lab_head", hp.label_dim), ("lab_dep", hp.label_dim)):
        t[k + "_W"] = mat(2 * H, 2 * H, dim)
        t[k + "_b"] = np.zeros(dim)
    t["arc_U"] = mat(hp.arc_dim, hp.arc_dim, hp.arc_dim)
    t["arc_u"] = np.zeros(hp.arc_dim)
    t["arc_b"] = np.zeros(1)
    R = len(vocab.label_index)
    t["lab_U"] = mat(hp.label_dim, R, hp.label_dim, hp.label_dim)
    t["lab_W"] = mat(2 * hp.label_dim, R, 2 * hp.label_dim)
    t["lab_b"] = np.zeros(R)
    return ParserParams(t, static_dim, R)


@dataclass
class Batch:
    """Featurized sentences of equal length n."""

    sentences: list[DepSentence]
    word_ids: np.ndarray      # (B, n)
    static: np.ndarray        # (B, n, ds), zeros where out of table
    oov: np.ndarray           # (B, n) bool
    char_ids: np.ndarray      # (B*n, Lmax + 2) padded with PAD on both sides
    char_lens: np.ndarray     # (B*n,)
    pos_ids: np.ndarray       # (B, n)
    heads: np.ndarray         # (B, n) gold heads
    labels: np.ndarray        # (B, n) gold label ids, -1 if unknown

    @property
    def shape(self) -> tuple[int, int]:
        return self.word_ids.shape


def featurize(sentences: Sequence[DepSentence], vocab: Vocabulary, table: EmbeddingTable | None) -> Batch:
    n = len(sentences[0])
    if n == 0 or any(len(s) != n for s in sentences):
        raise ValueError("a batch needs non-empty sentences of equal length")
    B = len(sentences)
    ds = table.dim if table is not None else 0
    word_ids = np.zeros((B, n), dtype=np.int64)
    static = np.zeros((B, n, ds))
    oov = np.zeros((B, n), dtype=bool)
    pos_ids = np.zeros((B, n), dtype=np.int64)
    heads = np.zeros((B, n), dtype=np.int64)
    labels = np.full((B, n), -1, dtype=np.int64)
    chars = []
    for b, sent in enumerate(sentences):
        for i, tok in enumerate(sent.tokens):
            word_ids[b, i] = vocab.word_id(tok.form)
            if table is not None:
                key = table.resolve(tok.form)
                if key is None:
                    oov[b, i] = True
                else:
                    static[b, i] = table.entries[key]
            chars.append(vocab.char_ids(tok.form))
            pos_ids[b, i] = vocab.pos_id(tok.upos)
            heads[b, i] = tok.head
            labels[b, i] = vocab.label_index.get(tok.deprel, -1)
    lmax = max(len(c) for c in chars)
    char_ids = np.zeros((B * n, lmax + 2), dtype=np.int64)
    for k, c in enumerate(chars):
        char_ids[k, 1:1 + len(c)] = c
    char_lens = np.array([len(c) for c in chars], dtype=np.int64)
    return Batch(list(sentences), word_ids, static, oov, char_ids, char_lens, pos_ids, heads, labels)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(x, axis):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _dropout_mask(rng, shape, p):
    if rng is None or p <= 0:
        return None
    return (rng.random(shape) >= p) / (1.0 - p)


# ---------------------------------------------------------------- encoder

def _char_forward(params, batch):
    E = params["char_emb"].copy()
    E[Vocabulary.PAD_ID] = 0.0  # padding never contributes
    ids = batch.char_ids
    L = ids.shape[1] - 2
    X = np.concatenate([E[ids[:, j:j + L]] for j in range(CHAR_WINDOW)], axis=2)  # (W, L, 3dc)
    pre = X @ params["char_W"] + params["char_b"]
    pos = np.arange(L)[None, :, None]
    pre = np.where(pos < batch.char_lens[:, None, None], pre, -np.inf)
    arg = pre.argmax(axis=1)  # (W, F)
    m = np.take_along_axis(pre, arg[:, None, :], axis=1)[:, 0, :]
    out = np.tanh(m)
    return out, (X, arg, out)


def _char_backward(params, batch, cache, dout, grads):
    X, arg, out = cache
    dm = dout * (1.0 - out**2)  # (W, F)
    Wn, L, K = X.shape
    F = dm.shape[1]
    # gradient lands only at the argmax window per filter
    Xsel = X[np.arange(Wn)[:, None], arg]  # (W, F, K)
    grads["char_W"] += np.einsum("wfk,wf->kf", Xsel, dm)
    grads["char_b"] += dm.sum(axis=0)
    dX = np.zeros_like(X)
    contrib = dm[:, :, None] * params["char_W"].T[None, :, :]  # (W, F, K)
    np.add.at(dX, (np.repeat(np.arange(Wn), F), arg.ravel()), contrib.reshape(Wn * F, K))
    dc = params["char_emb"].shape[1]
    ids = batch.char_ids
    dE = grads["char_emb"]
    for j in range(CHAR_WINDOW):
        np.add.at(dE, ids[:, j:j + L].ravel(), dX[:, :, j * dc:(j + 1) * dc].reshape(-1, dc))
    dE[0] = 0.0


def _lstm_dir(x, Wx, Wh, b, reverse):
    B, n, _ = x.shape
    H = Wh.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hs = np.zeros((B, n, H))
    steps = []
    xW = x @ Wx + b
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        z = xW[:, t] + h @ Wh
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        o = _sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[:, t] = h
        steps.append((t, i, f, o, g, c_prev, h_prev, tc))
    return hs, steps


def _lstm_dir_backward(x, Wx, Wh, steps, dhs):
    B, n, _ = x.shape
    H = Wh.shape[0]
    dz_all = np.zeros((B, n, 4 * H))
    dWh = np.zeros_like(Wh)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t, i, f, o, g, c_prev, h_prev, tc in reversed(steps):
        dh = dhs[:, t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc**2) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g**2)], axis=1)
        dz_all[:, t] = dz
        dWh += h_prev.T @ dz
        dh_next = dz @ Wh.T
        dc_next = dc * f
    dWx = np.einsum("bti,btj->ij", x, dz_all)
    db = dz_all.sum(axis=(0, 1))
    dx = dz_all @ Wx.T
    return dx, dWx, dWh, db


def encode_batch(params: ParserParams, batch: Batch, rng=None, dropout: float = 0.0):
    """Context vectors (B, n+1, 2H); row 0 is the learned root context."""
    B, n = batch.shape
    wv = params["word_emb"][batch.word_ids]
    sv = np.where(batch.oov[..., None], params["static_unk"], batch.static)
    cf, char_cache = _char_forward(params, batch)
    cf = cf.reshape(B, n, -1)
    pv = params["pos_emb"][batch.pos_ids]
    x = np.concatenate([wv, sv, cf, pv], axis=2)
    in_mask = _dropout_mask(rng, x.shape, dropout)
    if in_mask is not None:
        x = x * in_mask
    layer_caches = []
    inp = x
    for layer in range(params.layers):
        k = f"lstm{layer}"
        hf, sf = _lstm_dir(inp, params[k + "f_Wx"], params[k + "f_Wh"], params[k + "f_b"], False)
        hb, sb = _lstm_dir(inp, params[k + "b_Wx"], params[k + "b_Wh"], params[k + "b_b"], True)
        layer_caches.append((inp, sf, sb))
        inp = np.concatenate([hf, hb], axis=2)
    root = np.broadcast_to(params["root"], (B, 1, params["root"].shape[0]))
    C = np.concatenate([root, inp], axis=1)
    out_mask = _dropout_mask(rng, C.shape, dropout)
    if out_mask is not None:
        C = C * out_mask
    cache = dict(char=char_cache, in_mask=in_mask, out_mask=out_mask, layers=layer_caches,
                 dims=(wv.shape[2], sv.shape[2], cf.shape[2], pv.shape[2]))
    return C, cache


def encode_backward(params: ParserParams, batch: Batch, cache, dC, grads):
    B, n = batch.shape
    if cache["out_mask"] is not None:
        dC = dC * cache["out_mask"]
    grads["root"] += dC[:, 0].sum(axis=0)
    dinp = dC[:, 1:]
    H = params.hidden
    for layer in reversed(range(params.layers)):
        k = f"lstm{layer}"
        inp, sf, sb = cache["layers"][layer]
        dxf, dWx, dWh, db = _lstm_dir_backward(inp, params[k + "f_Wx"], params[k + "f_Wh"], sf, dinp[..., :H])
        grads[k + "f_Wx"] += dWx
        grads[k + "f_Wh"] += dWh
        grads[k + "f_b"] += db
        dxb, dWx, dWh, db = _lstm_dir_backward(inp, params[k + "b_Wx"], params[k + "b_Wh"], sb, dinp[..., H:])
        grads[k + "b_Wx"] += dWx
        grads[k + "b_Wh"] += dWh
        grads[k + "b_b"] += db
        dinp = dxf + dxb
    dx = dinp
    if cache["in_mask"] is not None:
        dx = dx * cache["in_mask"]
    dw, ds, dc, dp = cache["dims"]
    o = 0
    np.add.at(grads["word_emb"], batch.word_ids.ravel(), dx[..., o:o + dw].reshape(-1, dw))
    grads["word_emb"][Vocabulary.PAD_ID] = 0.0
    o += dw
    if ds:
        grads["static_unk"] += (dx[..., o:o + ds] * batch.oov[..., None]).sum(axis=(0, 1))
    o += ds
    _char_backward(params, batch, cache["char"], dx[..., o:o + dc].reshape(B * n, dc), grads)
    o += dc
    np.add.at(grads["pos_emb"], batch.pos_ids.ravel(), dx[..., o:o + dp].reshape(-1, dp))


# ---------------------------------------------------------------- scorers

def _mlp(C, W, b):
    return np.tanh(C @ W + b)


def biaffine(head, dep, U, u, b):
    """S[..., h, d] = head[h]·U·dep[d] + head[h]·u + b."""
    M = head @ U
    return M @ np.swapaxes(dep, -1, -2) + (head @ u)[..., :, None] + b, M


def score_arcs_batch(params: ParserParams, C):
    """Arc scores (B, n+1, n): S[b, h, d-1] for head h, dependent d."""
    AH = _mlp(C, params["arc_head_W"], params["arc_head_b"])
    AD = _mlp(C[:, 1:], params["arc_dep_W"], params["arc_dep_b"])
    S, M = biaffine(AH, AD, params["arc_U"], params["arc_u"], params["arc_b"][0])
    return S, (AH, AD, M)


def score_arcs_backward(params, C, cache, dS, grads):
    AH, AD, M = cache
    dM = dS @ AD
    dAD = dS.transpose(0, 2, 1) @ M
    dAH = dM @ params["arc_U"].T + dS.sum(axis=2)[:, :, None] * params["arc_u"]
    grads["arc_U"] += np.einsum("bha,bhc->ac", AH, dM)
    grads["arc_u"] += np.einsum("bh,bha->a", dS.sum(axis=2), AH)
    grads["arc_b"] += dS.sum()
    dC = np.zeros_like(C)
    dpre = dAH * (1.0 - AH**2)
    grads["arc_head_W"] += np.einsum("bhi,bhj->ij", C, dpre)
    grads["arc_head_b"] += dpre.sum(axis=(0, 1))
    dC += dpre @ params["arc_head_W"].T
    dpre = dAD * (1.0 - AD**2)
    grads["arc_dep_W"] += np.einsum("bhi,bhj->ij", C[:, 1:], dpre)
    grads["arc_dep_b"] += dpre.sum(axis=(0, 1))
    dC[:, 1:] += dpre @ params["arc_dep_W"].T
    return dC


def score_labels_batch(params: ParserParams, C, heads):
    """Label scores (B, n, R) for each dependent attached to ``heads``."""
    B, n1, _ = C.shape
    n = n1 - 1
    heads = np.asarray(heads)
    if heads.shape != (B, n) or heads.min() < 0 or heads.max() > n:
        raise ValueError("head index out of range")
    LH = _mlp(C, params["lab_head_W"], params["lab_head_b"])
    LD = _mlp(C[:, 1:], params["lab_dep_W"], params["lab_dep_b"])
    LHg = LH[np.arange(B)[:, None], heads]
    bil = np.einsum("bdi,rij,bdj->bdr", LHg, params["lab_U"], LD)
    cat = np.concatenate([LHg, LD], axis=2)
    L = bil + cat @ params["lab_W"].T + params["lab_b"]
    return L, (LH, LD, LHg, cat, heads)


def score_labels_backward(params, C, cache, dL, grads):
    LH, LD, LHg, cat, heads = cache
    B, n, Lb = LD.shape
    U = params["lab_U"]
    grads["lab_U"] += np.einsum("bdr,bdi,bdj->rij", dL, LHg, LD)
    grads["lab_W"] += np.einsum("bdr,bdk->rk", dL, cat)
    grads["lab_b"] += dL.sum(axis=(0, 1))
    dcat = dL @ params["lab_W"]
    dLHg = np.einsum("bdr,rij,bdj->bdi", dL, U, LD) + dcat[..., :Lb]
    dLD = np.einsum("bdr,rij,bdi->bdj", dL, U, LHg) + dcat[..., Lb:]
    dLH = np.zeros_like(LH)
    np.add.at(dLH, (np.repeat(np.arange(B), n), heads.ravel()), dLHg.reshape(-1, Lb))
    dC = np.zeros_like(C)
    dpre = dLH * (1.0 - LH**2)
    grads["lab_head_W"] += np.einsum("bhi,bhj->ij", C, dpre)
    grads["lab_head_b"] += dpre.sum(axis=(0, 1))
    dC += dpre @ params["lab_head_W"].T
    dpre = dLD * (1.0 - LD**2)
    grads["lab_dep_W"] += np.einsum("bhi,bhj->ij", C[:, 1:], dpre)
    grads["lab_dep_b"] += dpre.sum(axis=(0, 1))
    dC[:, 1:] += dpre @ params["lab_dep_W"].T
    return dC


# ---------------------------------------------------------------- loss

def batch_loss(params: ParserParams, batch: Batch, total_tokens: int, grads=None, rng=None, dropout=0.0):
    """Summed arc + label cross-entropy divided by ``total_tokens``.

    Accumulates gradients into ``grads`` when given.
    """
    B, n = batch.shape
    C, enc_cache = encode_batch(params, batch, rng, dropout)
    S, arc_cache = score_arcs_batch(params, C)
    P = _softmax(S, axis=1)
    bi = np.arange(B)[:, None]
    di = np.arange(n)[None, :]
    gold_p = P[bi, batch.heads, di]
    arc_loss = -np.log(np.maximum(gold_p, 1e-300)).sum()

    Lsc, lab_cache = score_labels_batch(params, C, batch.heads)
    Q = _softmax(Lsc, axis=2)
    known = batch.labels >= 0
    lab_idx = np.where(known, batch.labels, 0)
    gold_q = Q[bi, di, lab_idx]
    lab_loss = -(np.log(np.maximum(gold_q, 1e-300)) * known).sum()
    loss = (arc_loss + lab_loss) / total_tokens

    if grads is not None:
        dS = P.copy()
        dS[bi, batch.heads, di] -= 1.0
        dS /= total_tokens
        dC = score_arcs_backward(params, C, arc_cache, dS, grads)
        dL = Q.copy()
        dL[bi, di, lab_idx] -= 1.0
        dL *= known[..., None] / total_tokens
        dC += score_labels_backward(params, C, lab_cache, dL, grads)
        encode_backward(params, batch, enc_cache, dC, grads)
    return loss


def group_by_length(sentences: Sequence[DepSentence]) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for i, s in enumerate(sentences):
        groups.setdefault(len(s), []).append(i)
    return dict(sorted(groups.items()))


def zero_grads(params: ParserParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


def loss_and_gradients(batch: Sequence[DepSentence], params: ParserParams, vocab: Vocabulary,
                       table: EmbeddingTable | None, rng=None, dropout: float = 0.0):
    """Mean per-token (arc + label) cross-entropy and its gradient for every tensor."""
    if not batch:
        raise ValueError("empty batch")
    total = sum(len(s) for s in batch)
    grads = zero_grads(params)
    loss = 0.0
    for _, idx in group_by_length(batch).items():
        fb = featurize([batch[i] for i in idx], vocab, table)
        loss += batch_loss(params, fb, total, grads, rng, dropout)
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite loss {loss}")
    return float(loss), grads


# ---------------------------------------------------------------- single-sentence API

def encode(sentence: DepSentence, params: ParserParams, vocab: Vocabulary, table: EmbeddingTable | None):
    C, _ = encode_batch(params, featurize([sentence], vocab, table))
    return C[0]


def score_arcs(contexts: np.ndarray, params: ParserParams) -> np.ndarray:
    S, _ = score_arcs_batch(params, contexts[None])
    return S[0]


def score_labels(contexts: np.ndarray, params: ParserParams, heads) -> np.ndarray:
    L, _ = score_labels_batch(params, contexts[None], np.asarray(heads)[None])
    return L[0]


def predict(sentences: Sequence[DepSentence], params: ParserParams, vocab: Vocabulary,
            table: EmbeddingTable | None, single_root: bool = True):
    """Decoded (heads, deprels) for each sentence, in input order."""
    labels = vocab.labels
    out: list = [None] * len(sentences)
    for _, idx in group_by_length(sentences).items():
        fb = featurize([sentences[i] for i in idx], vocab, table)
        C, _ = encode_batch(params, fb)
        S, _ = score_arcs_batch(params, C)
        heads = np.stack([chu_liu_edmonds(S[b], single_root=single_root) for b in range(len(idx))])
        L, _ = score_labels_batch(params, C, heads)
        lab = L.argmax(axis=2)
        for b, i in enumerate(idx):
            out[i] = (heads[b].tolist(), [labels[r] for r in lab[b]])
    return out
