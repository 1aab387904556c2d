"""Weighted-loss training, evaluation, prediction files and toy pre-training."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .metrics import Metrics, argmax_low
from .models import (FeaturesNN, MicroBert, build_network, collate, network_inputs,
                     predict_outputs, save_network)
from .nn import tensor as T
from .nn.optim import AdamState, adam_step, zero_grad
from .nn.tensor import Tensor
from .textprep import CLS, MASK, SEP, SPECIALS, EncodedExample, EncoderConfig, Vocab, encode_pair
from .threads import StanceLabel

log = logging.getLogger(__name__)


class EmptyClass(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


class CorpusTooSmall(ValueError):
    pass


@dataclass
class TrainConfig:
    lr: float = 3e-4
    lr_interval: tuple[float, float] = (1e-6, 2e-6)
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    max_len: int = 200
    class_weighting: str = "flat_prior"
    weight_decay: float = 0.01

    def __post_init__(self):
        lo, hi = self.lr_interval
        if lo > hi:
            raise ValueError("lr_interval low bound exceeds high bound")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.class_weighting not in ("flat_prior", "none"):
            raise ValueError(f"unknown class weighting {self.class_weighting!r}")


def class_weights(counts) -> np.ndarray:
    """Flat-prior weights w_c = T / (4 n_c), so every class carries total weight T/4."""
    if isinstance(counts, Mapping):
        counts = [counts[lab] for lab in StanceLabel]
    n = np.asarray(counts, dtype=np.float64)
    if n.shape != (len(StanceLabel),):
        raise ValueError("need one count per stance class")
    if (n <= 0).any():
        raise EmptyClass("every class needs at least one training example")
    return n.sum() / (len(n) * n)


def weighted_ce(scores, gold, weights=None):
    """Mean over the batch of w_gold * -log softmax(scores)[gold].

    Accepts a score Tensor (returns a differentiable Tensor) or a plain array
    (returns a float).
    """
    gold = np.asarray(gold, dtype=np.int64)
    w = np.ones(scores.shape[-1]) if weights is None else np.asarray(weights, dtype=np.float64)
    rows = np.arange(len(gold))
    if isinstance(scores, Tensor):
        logp = T.log_softmax(scores)
        picked = logp[rows, gold]
        return T.scale(T.tsum(T.mul(picked, -w[gold])), 1.0 / len(gold))
    s = np.asarray(scores, dtype=np.float64)
    m = s.max(axis=-1, keepdims=True)
    logp = s - (m + np.log(np.exp(s - m).sum(axis=-1, keepdims=True)))
    return float(np.mean(-w[gold] * logp[rows, gold]))


def length_ordered_batches(lengths: Sequence[int], ids: Sequence[str], batch_size: int) -> list[list[int]]:
    """Indices sorted by (length, id) ascending, cut into consecutive batches."""
    order = sorted(range(len(lengths)), key=lambda i: (lengths[i], ids[i]))
    return [order[i:i + batch_size] for i in range(0, len(order), batch_size)]


def _lengths(X) -> list[int]:
    if isinstance(X, np.ndarray):
        return [0] * len(X)
    return [len(e.token_ids) for e in X]


def _subset(X, idx):
    if isinstance(X, np.ndarray):
        return X[idx]
    return [X[i] for i in idx]


@contextmanager
def dropout_active(net, rng: np.random.Generator):
    """Enable dropout on networks that support it for the duration of a step."""
    if not hasattr(net, "dropout_rng"):
        yield
        return
    net.dropout_rng = rng
    try:
        yield
    finally:
        net.dropout_rng = None


def fit_network(net, X, y, cfg: TrainConfig, ids: Optional[Sequence[str]] = None,
                X_dev=None, y_dev=None,
                on_epoch: Optional[Callable[[int, object, dict], bool]] = None) -> list[dict]:
    """Train ``net`` in place; returns per-epoch history.

    With a dev set the parameters of the best dev macro-F1 epoch are restored at
    the end. ``on_epoch`` returning True stops training early.
    """
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise EmptyDataset("no training examples")
    if ids is None:
        ids = [f"{i:09d}" for i in range(len(y))]
    if cfg.class_weighting == "flat_prior":
        weights = class_weights(np.bincount(y, minlength=len(StanceLabel)))
    else:
        weights = np.ones(len(StanceLabel))
    if isinstance(net, FeaturesNN):
        Xa = np.asarray(X, dtype=np.float64)
        sd = Xa.std(axis=0)
        net.set_scaler(Xa.mean(axis=0), np.where(sd > 0, sd, 1.0))

    params = list(net.params.values())
    state = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    batches = length_ordered_batches(_lengths(X), ids, cfg.batch_size)
    history = []
    best = (-1.0, None, -1)
    drop_rng = np.random.default_rng([cfg.seed, 1])
    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        for idx in batches:
            with dropout_active(net, drop_rng):
                scores = net.scores(network_inputs(net, _subset(X, idx)))
            loss = weighted_ce(scores, y[idx], weights)
            T.backward(loss)
            adam_step(params, state)
            zero_grad(params)
            total += float(loss.data) * len(idx)
        rec = {"epoch": epoch, "loss": total / len(y)}
        if X_dev is not None:
            pred = argmax_low(np.stack([o.scores for o in predict_outputs(net, X_dev)]))
            rec["dev_macro_f1"] = Metrics.compute(y_dev, pred).macro_f1
            if rec["dev_macro_f1"] > best[0]:
                best = (rec["dev_macro_f1"], {n: p.data.copy() for n, p in net.params.items()}, epoch)
        history.append(rec)
        log.debug("epoch %d %s", epoch, rec)
        if on_epoch is not None and on_epoch(epoch, net, rec):
            break
    if best[1] is not None:
        for n, arr in best[1].items():
            net.params[n].data = arr
        history.append({"best_epoch": best[2], "dev_macro_f1": best[0]})
    return history


@dataclass
class PredictionMatrix:
    ids: list[str]
    probs: np.ndarray
    scores: np.ndarray
    gold: Optional[np.ndarray] = None

    def labels(self) -> np.ndarray:
        return argmax_low(self.probs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "predicted_label", "p_S", "p_D", "p_Q", "p_C", "s_S", "s_D", "s_Q", "s_C"])
        for i, pid in enumerate(self.ids):
            lab = StanceLabel(int(argmax_low(self.probs[i]))).lower
            w.writerow([pid, lab, *(repr(float(v)) for v in self.probs[i]),
                        *(repr(float(v)) for v in self.scores[i])])
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def load(cls, path, gold: Optional[Mapping[str, int]] = None) -> "PredictionMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        ids = [r["id"] for r in rows]
        probs = np.array([[float(r[f"p_{c}"]) for c in "SDQC"] for r in rows]).reshape(-1, 4)
        scores = np.array([[float(r[f"s_{c}"]) for c in "SDQC"] for r in rows]).reshape(-1, 4)
        g = None if gold is None else np.array([int(gold[i]) for i in ids], dtype=np.int64)
        return cls(ids, probs, scores, g)


def write_gold(path, ids: Sequence[str], labels: Sequence[int]) -> None:
    lines = ["id,label"] + [f"{i},{StanceLabel(int(l)).lower}" for i, l in zip(ids, labels)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_gold(path) -> dict[str, int]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {r["id"]: int(StanceLabel.parse(r["label"])) for r in csv.DictReader(fh)}


def write_metrics(path, metrics: Metrics) -> None:
    Path(path).write_text(json.dumps(metrics.to_dict(), indent=1) + "\n", encoding="utf-8")


def write_answers(path, ids: Sequence[str], labels: Sequence[int]) -> None:
    """Scorer answer file: {example id: lowercase label}."""
    answers = {i: StanceLabel(int(l)).lower for i, l in zip(ids, labels)}
    Path(path).write_text(json.dumps(answers, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def evaluate(net, X, y=None, ids: Optional[Sequence[str]] = None) -> tuple[Optional[Metrics], PredictionMatrix]:
    """Full-split inference in the given order; metrics only when gold labels exist."""
    outs = predict_outputs(net, X)
    if ids is None:
        ids = [getattr(e, "example_id", "") or str(i) for i, e in enumerate(X)]
    probs = np.stack([o.probs for o in outs]) if outs else np.zeros((0, 4))
    scores = np.stack([o.scores for o in outs]) if outs else np.zeros((0, 4))
    gold = None if y is None else np.asarray(y, dtype=np.int64)
    pm = PredictionMatrix(list(ids), probs, scores, gold)
    metrics = None if gold is None else Metrics.compute(gold, pm.labels())
    return metrics, pm


@dataclass
class CheckpointMeta:
    path: str
    kind: str
    dev_macro_f1: float
    lr: float
    seed: int
    epoch: int

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CheckpointMeta":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def filter_checkpoints(metas: Sequence[CheckpointMeta], threshold: float) -> list[CheckpointMeta]:
    """Keep checkpoints whose dev macro F1, in percent, reaches ``threshold`` (inclusive)."""
    return [m for m in metas if 100.0 * m.dev_macro_f1 >= threshold - 1e-9]


def train(kind: str, model_config: dict, X, y, cfg: TrainConfig, out_dir,
          X_dev=None, y_dev=None, ids=None, dev_ids=None, init: Optional[Mapping[str, np.ndarray]] = None,
          extra: Optional[dict] = None) -> CheckpointMeta:
    """Train one model and write ``model.ckpt``, ``meta.json`` and, with a dev set,
    ``metrics_dev.json`` / ``predictions_dev.csv`` to ``out_dir``."""
    from .models import load_arrays

    if len(y) == 0:
        raise EmptyDataset("no training examples")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    net = build_network(kind, model_config, cfg.seed)
    if init is not None:
        load_arrays(net, init)
    history = fit_network(net, X, y, cfg, ids, X_dev, y_dev)
    ckpt = out / "model.ckpt"
    save_network(net, ckpt, extra)
    dev_f1, epoch = float("nan"), history[-1].get("epoch", cfg.epochs)
    if X_dev is not None:
        metrics, pm = evaluate(net, X_dev, y_dev, dev_ids)
        dev_f1, epoch = metrics.macro_f1, history[-1]["best_epoch"]
        write_metrics(out / "metrics_dev.json", metrics)
        pm.save(out / "predictions_dev.csv")
    meta = CheckpointMeta(str(ckpt.name), kind, dev_f1, cfg.lr, cfg.seed, epoch)
    meta.save(out / "meta.json")
    return meta


# pre-training ------------------------------------------------------------------

MASK_FRACTION = 0.15


def n_masked(n_candidates: int) -> int:
    """15% of the maskable positions, rounded half up, at least one."""
    if n_candidates <= 0:
        return 0
    return max(1, math.floor(MASK_FRACTION * n_candidates + 0.5))


@dataclass
class PretrainBatch:
    examples: list[EncodedExample]
    mlm_positions: list[np.ndarray]
    mlm_labels: list[np.ndarray]
    not_next: np.ndarray


def mlm_nsp_batch(sentences: Sequence[Sequence[int]], vocab: Vocab, seed, batch_size: int = 32,
                  max_len: int = 128) -> PretrainBatch:
    """Sample sentence pairs and apply masking.

    The second sentence is swapped for a random non-successor with probability
    0.5 (``not_next`` = 1). Of the selected positions 80% become [MASK], 10% a
    random non-special token and 10% stay unchanged.
    """
    if len(sentences) < 2:
        raise CorpusTooSmall("need at least two sentences")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = len(sentences)
    cfg = EncoderConfig(max_len=max_len)
    cls_id, sep_id, mask_id = vocab.id(CLS), vocab.id(SEP), vocab.id(MASK)
    first_regular = len(SPECIALS)
    examples, positions, labels = [], [], []
    not_next = np.zeros(batch_size, dtype=np.int64)
    for b in range(batch_size):
        i = int(rng.integers(n - 1))
        if rng.random() < 0.5:
            j = i + 1
        else:
            j = int(rng.integers(n - 1))
            if j >= i + 1:
                j += 1  # skip the true successor
            not_next[b] = 1
        ex = encode_pair(list(sentences[i]), list(sentences[j]), cfg, cls_id, sep_id)
        cand = np.array([k for k, t in enumerate(ex.token_ids) if t not in (cls_id, sep_id)], dtype=np.int64)
        pos = np.sort(rng.choice(cand, size=n_masked(len(cand)), replace=False)) if len(cand) else cand
        tokens = list(ex.token_ids)
        lab = np.array([tokens[p] for p in pos], dtype=np.int64)
        for p in pos:
            r = rng.random()
            if r < 0.8:
                tokens[p] = mask_id
            elif r < 0.9:
                tokens[p] = int(rng.integers(first_regular, len(vocab)))
        ex.token_ids = tokens
        examples.append(ex)
        positions.append(pos)
        labels.append(lab)
    return PretrainBatch(examples, positions, labels, not_next)


def pretrain_loss(net: MicroBert, batch: PretrainBatch) -> Tensor:
    """Masked-token cross-entropy plus next-sentence cross-entropy on [CLS]."""
    hidden = net.encode(collate(batch.examples))
    rows = np.concatenate([np.full(len(p), b) for b, p in enumerate(batch.mlm_positions)]).astype(np.int64)
    cols = np.concatenate(batch.mlm_positions).astype(np.int64)
    labels = np.concatenate(batch.mlm_labels).astype(np.int64)
    loss = weighted_ce(net.nsp_logits(hidden), batch.not_next)
    if len(rows):
        loss = loss + weighted_ce(net.mlm_logits(hidden[rows, cols, :]), labels)
    return loss


def pretrain(net: MicroBert, sentences: Sequence[Sequence[int]], vocab: Vocab, steps: int = 500,
             batch_size: int = 16, lr: float = 1e-3, seed: int = 0, max_len: int = 64,
             weight_decay: float = 0.01) -> list[float]:
    """Toy-scale MLM + NSP training; returns the per-step loss."""
    if len(sentences) == 0:
        raise EmptyDataset("empty pre-training corpus")
    if net.kind != MicroBert.kind:
        raise ValueError("pre-training needs a micro_bert network")
    rng = np.random.default_rng(seed)
    params = list(net.params.values())
    state = AdamState(lr=lr, weight_decay=weight_decay)
    losses = []
    for _ in range(steps):
        batch = mlm_nsp_batch(sentences, vocab, rng, batch_size, min(max_len, net.cfg.max_len))
        with dropout_active(net, rng):
            loss = pretrain_loss(net, batch)
        T.backward(loss)
        adam_step(params, state)
        zero_grad(params)
        losses.append(float(loss.data))
    return losses
