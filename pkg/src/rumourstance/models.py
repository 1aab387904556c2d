"""Stance classifiers as plain networks over the autograd core.

Each network exposes ``params`` (ordered name -> Parameter), ``config`` (JSON
serialisable), ``kind`` and ``scores(inputs)`` returning pre-softmax class
scores of shape (B, 4).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .nn import checkpoint
from .nn import tensor as T
from .nn.layers import (ParamStore, bilstm, dense, embedding_sum, init_lstm,
                        init_transformer_layer, norm, transformer_layer)
from .nn.tensor import ShapeMismatch, Tensor
from .textprep import EncodedExample

N_CLASSES = 4


class ConfigMismatch(ValueError):
    pass


@dataclass
class Batch:
    token_ids: np.ndarray
    segment_ids: np.ndarray
    position_ids: np.ndarray
    pad_mask: np.ndarray
    lengths: np.ndarray


def collate(examples: Sequence[EncodedExample], pad_to: Optional[int] = None) -> Batch:
    """Right-pad a list of examples into id matrices; ``pad_mask`` is True on padding."""
    lengths = np.array([len(e.token_ids) for e in examples], dtype=np.int64)
    L = int(max(lengths.max(initial=1), pad_to or 0))
    B = len(examples)
    tok = np.zeros((B, L), dtype=np.int64)
    seg = np.zeros((B, L), dtype=np.int64)
    pos = np.tile(np.arange(L), (B, 1))
    for i, e in enumerate(examples):
        n = len(e.token_ids)
        tok[i, :n] = e.token_ids
        seg[i, :n] = e.segment_ids
        pos[i, :n] = e.position_ids
    mask = np.arange(L)[None, :] >= lengths[:, None]
    return Batch(tok, seg, pos, mask, lengths)


@dataclass
class ClassifierOutput:
    scores: np.ndarray
    probs: np.ndarray
    attention: Optional[list] = None


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class MicroBertConfig:
    vocab_size: int
    layers: int = 2
    hidden: int = 64
    heads: int = 4
    ff: int = 256
    max_len: int = 200
    classes: int = N_CLASSES
    init_std: float = 0.02
    dropout: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigMismatch(f"dropout {self.dropout} outside [0, 1)")
        if self.hidden % self.heads:
            raise ConfigMismatch(f"hidden {self.hidden} not divisible by heads {self.heads}")


# bert-large-uncased dimensions, kept for reference; far too large for the numpy core
FULL_SCALE_PRESET = dict(layers=24, hidden=1024, heads=16, ff=4096, vocab_size=30522, max_len=200)


class MicroBert:
    """Embedding sum, N post-norm encoder layers, [CLS] -> dense(tanh) -> dense(4).

    Also carries a tied-embedding masked-token head and a next-sentence head
    used only by pre-training. Dropout is applied only while ``dropout_rng`` is
    set, which the training loops do.
    """

    kind = "micro_bert"

    def __init__(self, config: MicroBertConfig, seed: int = 0):
        self.cfg = config
        c = config
        store = ParamStore(np.random.default_rng(seed), c.init_std)
        store.weight("embeddings.token", (c.vocab_size, c.hidden))
        store.weight("embeddings.segment", (2, c.hidden))
        store.weight("embeddings.position", (c.max_len, c.hidden))
        for i in range(c.layers):
            init_transformer_layer(store, f"encoder.{i}", c.hidden, c.ff)
        store.dense("pooler", c.hidden, c.hidden)
        store.dense("classifier", c.hidden, c.classes)
        store.dense("mlm.transform", c.hidden, c.hidden)
        store.norm("mlm.norm", c.hidden)
        store.bias("mlm.bias", c.vocab_size)
        store.dense("nsp", c.hidden, 2)
        self.params = store
        self.dropout_rng: Optional[np.random.Generator] = None

    @property
    def config(self) -> dict:
        return asdict(self.cfg)

    def encode(self, batch: Batch, record: Optional[list] = None) -> Tensor:
        if batch.token_ids.shape[1] > self.cfg.max_len:
            raise ConfigMismatch(f"sequence length {batch.token_ids.shape[1]} exceeds max_len {self.cfg.max_len}")
        if batch.token_ids.size and batch.token_ids.max() >= self.cfg.vocab_size:
            raise ConfigMismatch("token id outside the model vocabulary")
        p = self.params
        x = embedding_sum(batch.token_ids, batch.segment_ids, batch.position_ids,
                          p["embeddings.token"], p["embeddings.segment"], p["embeddings.position"])
        rate, rng = self.cfg.dropout, self.dropout_rng
        x = T.dropout(x, rate, rng)
        for i in range(self.cfg.layers):
            x = transformer_layer(x, p, f"encoder.{i}", self.cfg.heads, batch.pad_mask, record, rate, rng)
        return x

    def pooled(self, hidden: Tensor) -> Tensor:
        pooled = T.tanh(dense(hidden[:, 0, :], self.params, "pooler"))
        return T.dropout(pooled, self.cfg.dropout, self.dropout_rng)

    def scores(self, batch: Batch, record: Optional[list] = None) -> Tensor:
        return dense(self.pooled(self.encode(batch, record)), self.params, "classifier")

    def mlm_logits(self, hidden: Tensor) -> Tensor:
        p = self.params
        h = norm(T.gelu(dense(hidden, p, "mlm.transform")), p, "mlm.norm")
        return T.matmul(h, T.transpose(p["embeddings.token"])) + p["mlm.bias"]

    def nsp_logits(self, hidden: Tensor) -> Tensor:
        return dense(self.pooled(hidden), self.params, "nsp")


@dataclass
class FeaturesNNConfig:
    n_features: int
    hidden: int = 50
    classes: int = N_CLASSES
    init_std: float = 0.1


class FeaturesNN:
    """Standardized handcrafted features -> dense(relu) -> dense(4)."""

    kind = "features_nn"

    def __init__(self, config: FeaturesNNConfig, seed: int = 0):
        self.cfg = config
        store = ParamStore(np.random.default_rng(seed), config.init_std)
        store.dense("hidden", config.n_features, config.hidden)
        store.dense("output", config.hidden, config.classes)
        store._add(_frozen("scaler.mean", np.zeros(config.n_features)))
        store._add(_frozen("scaler.scale", np.ones(config.n_features)))
        self.params = store

    @property
    def config(self) -> dict:
        return asdict(self.cfg)

    def set_scaler(self, mean: np.ndarray, scale: np.ndarray) -> None:
        self.params["scaler.mean"].data = np.asarray(mean, dtype=np.float64)
        self.params["scaler.scale"].data = np.asarray(scale, dtype=np.float64)

    def scores(self, features) -> Tensor:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.cfg.n_features:
            raise ShapeMismatch(f"expected {self.cfg.n_features} features, got {x.shape[1]}")
        p = self.params
        x = (x - p["scaler.mean"].data) / p["scaler.scale"].data
        return dense(T.relu(dense(Tensor(x), p, "hidden")), p, "output")


def _frozen(name, data):
    from .nn.layers import Parameter
    return Parameter(name, data, trainable=False, decay_exempt=True)


@dataclass
class BiLSTMSelfAttConfig:
    vocab_size: int
    embed: int = 64
    hidden: int = 64
    att_hidden: int = 64
    hops: int = 4
    max_len: int = 200
    classes: int = N_CLASSES
    init_std: float = 0.1


class BiLSTMSelfAtt:
    """Token embeddings -> BiLSTM -> structured self-attention (r hops) -> dense(4).

    No orthogonality penalty on the attention rows.
    """

    kind = "bilstm_selfatt"

    def __init__(self, config: BiLSTMSelfAttConfig, seed: int = 0):
        self.cfg = config
        c = config
        store = ParamStore(np.random.default_rng(seed), c.init_std)
        store.weight("embeddings.token", (c.vocab_size, c.embed))
        init_lstm(store, "bilstm.forward", c.embed, c.hidden)
        init_lstm(store, "bilstm.backward", c.embed, c.hidden)
        store.weight("attention.w1", (2 * c.hidden, c.att_hidden))
        store.weight("attention.w2", (c.att_hidden, c.hops))
        store.dense("classifier", c.hops * 2 * c.hidden, c.classes)
        self.params = store

    @property
    def config(self) -> dict:
        return asdict(self.cfg)

    def attend(self, batch: Batch) -> tuple[Tensor, Tensor]:
        if batch.token_ids.shape[1] > self.cfg.max_len:
            raise ConfigMismatch(f"sequence length {batch.token_ids.shape[1]} exceeds max_len {self.cfg.max_len}")
        if batch.token_ids.size and batch.token_ids.max() >= self.cfg.vocab_size:
            raise ConfigMismatch("token id outside the model vocabulary")
        p = self.params
        x = T.take(p["embeddings.token"], batch.token_ids)
        h = bilstm(x, p, "bilstm", batch.lengths)  # (B, L, 2h)
        s = T.matmul(T.tanh(T.matmul(h, p["attention.w1"])), p["attention.w2"])  # (B, L, r)
        att = T.softmax(T.swapaxes(s, 1, 2), batch.pad_mask[:, None, :])  # (B, r, L)
        return att, T.matmul(att, h)

    def scores(self, batch: Batch) -> Tensor:
        _, m = self.attend(batch)
        flat = T.reshape(m, (m.shape[0], -1))
        return dense(flat, self.params, "classifier")


NETWORKS = {cls.kind: (cls, cfg) for cls, cfg in (
    (MicroBert, MicroBertConfig), (FeaturesNN, FeaturesNNConfig), (BiLSTMSelfAtt, BiLSTMSelfAttConfig))}


def build_network(kind: str, config: dict, seed: int = 0):
    config = {k: v for k, v in config.items() if not k.startswith("_")}
    try:
        cls, cfg_cls = NETWORKS[kind]
    except KeyError:
        raise ConfigMismatch(f"unknown model kind {kind!r}") from None
    return cls(cfg_cls(**config), seed)


def save_network(net, path, extra: Optional[dict] = None) -> None:
    """``extra`` entries are stored in the header under ``_``-prefixed keys."""
    config = dict(net.config)
    config.update({f"_{k}": v for k, v in (extra or {}).items()})
    checkpoint.save(path, net.kind, config, {n: p.data for n, p in net.params.items()})


def checkpoint_extras(path) -> dict:
    _, config, _ = checkpoint.load(path)
    return {k[1:]: v for k, v in config.items() if k.startswith("_")}


def load_network(path):
    kind, config, arrays = checkpoint.load(path)
    net = build_network(kind, config)
    load_arrays(net, arrays)
    return net


def load_arrays(net, arrays: dict[str, np.ndarray], strict: bool = True) -> None:
    for name, arr in arrays.items():
        if name not in net.params:
            if strict:
                raise ConfigMismatch(f"checkpoint parameter {name!r} not in model")
            continue
        if net.params[name].shape != arr.shape:
            raise ConfigMismatch(f"parameter {name!r}: shape {arr.shape} != {net.params[name].shape}")
        net.params[name].data = np.array(arr, dtype=np.float64)


def network_inputs(net, X):
    """Features stay arrays; encoded examples become a padded batch."""
    if net.kind == FeaturesNN.kind:
        return X
    return collate(X)


def predict_outputs(net, X, batch_size: int = 64, attention: bool = False) -> list[ClassifierOutput]:
    outs = []
    for start in range(0, len(X), batch_size):
        chunk = X[start:start + batch_size]
        record = [] if attention and net.kind == MicroBert.kind else None
        if record is not None:
            scores = net.scores(collate(chunk), record).data
        else:
            scores = net.scores(network_inputs(net, chunk)).data
        probs = softmax_rows(scores)
        for i in range(len(scores)):
            att = None
            if record is not None:
                n = len(chunk[i].token_ids)
                att = [[(raw[h][i, :n, :n], prob[i, h, :n, :n]) for h in range(len(raw))]
                       for raw, prob in record]
            outs.append(ClassifierOutput(scores[i].copy(), probs[i], att))
    return outs
