"""Parameters and the layers shared by the stance models."""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from . import tensor as T
from .tensor import ShapeMismatch, Tensor


class Parameter(Tensor):
    __slots__ = ("name", "trainable", "decay_exempt")

    def __init__(self, name: str, data, trainable: bool = True, decay_exempt: bool = False):
        super().__init__(data, requires_grad=trainable)
        self.name = name
        self.trainable = trainable
        self.decay_exempt = decay_exempt

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def truncated_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal samples redrawn until within two standard deviations."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


class ParamStore(dict):
    """Ordered name -> Parameter mapping with creation helpers."""

    def __init__(self, rng: np.random.Generator, init_std: float = 0.02):
        super().__init__()
        self.rng = rng
        self.init_std = init_std

    def _add(self, p: Parameter) -> Parameter:
        if p.name in self:
            raise ValueError(f"duplicate parameter name {p.name!r}")
        self[p.name] = p
        return p

    def weight(self, name, shape) -> Parameter:
        return self._add(Parameter(name, truncated_normal(self.rng, shape, self.init_std)))

    def bias(self, name, n) -> Parameter:
        return self._add(Parameter(name, np.zeros(n), decay_exempt=True))

    def gain(self, name, n) -> Parameter:
        return self._add(Parameter(name, np.ones(n), decay_exempt=True))

    def dense(self, prefix, n_in, n_out):
        self.weight(f"{prefix}.weight", (n_in, n_out))
        self.bias(f"{prefix}.bias", n_out)

    def norm(self, prefix, n):
        self.gain(f"{prefix}.gain", n)
        self.bias(f"{prefix}.bias", n)


def dense(x: Tensor, params: dict, prefix: str) -> Tensor:
    return T.matmul(x, params[f"{prefix}.weight"]) + params[f"{prefix}.bias"]


def norm(x: Tensor, params: dict, prefix: str, eps: float = 1e-12) -> Tensor:
    return T.layer_norm(x, params[f"{prefix}.gain"], params[f"{prefix}.bias"], eps)


def embedding_sum(token_ids, segment_ids, position_ids, tok_table: Tensor, seg_table: Tensor,
                  pos_table: Tensor) -> Tensor:
    """E_t[tok] + E_s[seg] + E_p[pos], row-wise."""
    tok, seg, pos = (np.asarray(a) for a in (token_ids, segment_ids, position_ids))
    if not (tok.shape == seg.shape == pos.shape):
        raise ShapeMismatch("token, segment and position ids must share a shape")
    return T.take(tok_table, tok) + T.take(seg_table, seg) + T.take(pos_table, pos)


def multi_head_attention(x: Tensor, params: dict, prefix: str, heads: int,
                         pad_mask: Optional[np.ndarray] = None) -> tuple[Tensor, list[np.ndarray], Tensor]:
    """Self-attention over ``x`` of shape (..., L, d).

    Returns the projected output and, per head, the raw scores
    ``QK^T / sqrt(d_k)`` before masking and softmax. ``pad_mask`` is True at
    padding positions (shape (..., L)); those columns get zero weight.
    """
    d = x.shape[-1]
    if d % heads:
        raise ShapeMismatch(f"hidden size {d} not divisible by {heads} heads")
    dk = d // heads
    L = x.shape[-2]
    lead = x.shape[:-2]

    def split(t: Tensor) -> Tensor:
        t = T.reshape(t, lead + (L, heads, dk))
        return T.swapaxes(t, -2, -3)  # (..., heads, L, dk)

    q = split(dense(x, params, f"{prefix}.query"))
    k = split(dense(x, params, f"{prefix}.key"))
    v = split(dense(x, params, f"{prefix}.value"))
    scores = T.scale(T.matmul(q, T.swapaxes(k, -1, -2)), 1.0 / math.sqrt(dk))
    mask = None
    if pad_mask is not None:
        mask = np.asarray(pad_mask, dtype=bool)[..., None, None, :]
    probs = T.softmax(scores, mask)
    ctx = T.matmul(probs, v)  # (..., heads, L, dk)
    ctx = T.reshape(T.swapaxes(ctx, -2, -3), lead + (L, d))
    out = dense(ctx, params, f"{prefix}.output")
    raw = [scores.data[..., h, :, :] for h in range(heads)]
    return out, raw, probs


def init_transformer_layer(store: ParamStore, prefix: str, d: int, ff: int) -> None:
    for name in ("query", "key", "value", "output"):
        store.dense(f"{prefix}.attention.{name}", d, d)
    store.norm(f"{prefix}.attention_norm", d)
    store.dense(f"{prefix}.ff_in", d, ff)
    store.dense(f"{prefix}.ff_out", ff, d)
    store.norm(f"{prefix}.ff_norm", d)


def transformer_layer(x: Tensor, params: dict, prefix: str, heads: int,
                      pad_mask: Optional[np.ndarray] = None, record: Optional[list] = None,
                      dropout: float = 0.0, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Post-norm encoder layer: attention and GELU feed-forward, each with residual + layer norm.

    Dropout, when active, hits each sublayer output before the residual sum.
    """
    att, raw, probs = multi_head_attention(x, params, f"{prefix}.attention", heads, pad_mask)
    if record is not None:
        record.append((raw, probs.data))
    h = norm(x + T.dropout(att, dropout, rng), params, f"{prefix}.attention_norm")
    ff = dense(T.gelu(dense(h, params, f"{prefix}.ff_in")), params, f"{prefix}.ff_out")
    return norm(h + T.dropout(ff, dropout, rng), params, f"{prefix}.ff_norm")


def init_lstm(store: ParamStore, prefix: str, d_in: int, hidden: int) -> None:
    store.weight(f"{prefix}.w_input", (d_in, 4 * hidden))
    store.weight(f"{prefix}.w_hidden", (hidden, 4 * hidden))
    store.bias(f"{prefix}.bias", 4 * hidden)


def lstm(x: Tensor, params: dict, prefix: str) -> Tensor:
    """Unidirectional LSTM over (B, L, d), zero initial state, gate order i, f, g, o."""
    wi, wh, b = (params[f"{prefix}.{n}"] for n in ("w_input", "w_hidden", "bias"))
    if x.shape[-1] != wi.shape[0]:
        raise ShapeMismatch(f"lstm input width {x.shape[-1]} != {wi.shape[0]}")
    hidden = wh.shape[0]
    B, L = x.shape[0], x.shape[1]
    xw = T.matmul(x, wi) + b  # (B, L, 4h)
    h = Tensor(np.zeros((B, hidden)))
    c = Tensor(np.zeros((B, hidden)))
    outs = []
    for t in range(L):
        z = xw[:, t, :] + T.matmul(h, wh)
        i = T.sigmoid(z[:, :hidden])
        f = T.sigmoid(z[:, hidden:2 * hidden])
        g = T.tanh(z[:, 2 * hidden:3 * hidden])
        o = T.sigmoid(z[:, 3 * hidden:])
        c = f * c + i * g
        h = o * T.tanh(c)
        outs.append(h)
    return T.stack(outs, axis=1)


def bilstm(x: Tensor, params: dict, prefix: str, lengths: Optional[np.ndarray] = None) -> Tensor:
    """Forward and backward LSTM states concatenated: (B, L, d) -> (B, L, 2h).

    With ``lengths`` each sequence is reversed within its own length so trailing
    padding never reaches the real positions of the backward pass.
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = T.reshape(x, (1,) + x.shape)
    B, L = x.shape[0], x.shape[1]
    if lengths is None:
        lengths = np.full(B, L)
    lengths = np.asarray(lengths)
    steps = np.arange(L)[None, :]
    rev = np.where(steps < lengths[:, None], lengths[:, None] - 1 - steps, steps)
    fw = lstm(x, params, f"{prefix}.forward")
    bw = T.gather_time(lstm(T.gather_time(x, rev), params, f"{prefix}.backward"), rev)
    out = T.concat([fw, bw], axis=-1)
    if squeeze:
        out = T.reshape(out, out.shape[1:])
    return out
