"""scikit-learn style wrappers around the stance networks.

Text models take lists of ``EncodedExample`` (labels default to the examples'
own labels); the feature model takes the matrix produced by ``FeatureExtractor``.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .metrics import argmax_low
from .models import (BiLSTMSelfAtt, BiLSTMSelfAttConfig, FeaturesNN, FeaturesNNConfig, MicroBert,
                     MicroBertConfig, N_CLASSES, load_arrays, predict_outputs)
from .nn import checkpoint
from .training import TrainConfig, fit_network


def _labels(X, y):
    if y is not None:
        return np.asarray(y, dtype=np.int64)
    if any(getattr(e, "label", None) is None for e in X):
        raise ValueError("y not given and some examples carry no label")
    return np.array([int(e.label) for e in X], dtype=np.int64)


def _ids(X):
    ids = [getattr(e, "example_id", "") for e in X]
    return ids if all(ids) else None


class _StanceClassifier(ClassifierMixin, BaseEstimator):
    def _train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, batch_size=self.batch_size, epochs=self.epochs, seed=self.seed,
                           class_weighting=self.class_weighting, weight_decay=self.weight_decay)

    def _validate(self, X):
        return X

    def fit(self, X, y=None, eval_set: Optional[tuple] = None):
        """Train from scratch; ``eval_set=(X_dev, y_dev)`` keeps the best dev-F1 epoch."""
        self.__dict__.pop("n_features_in_", None)
        X = self._validate(X)
        y = _labels(X, y) if not isinstance(X, np.ndarray) else np.asarray(y, dtype=np.int64)
        self.classes_ = np.arange(N_CLASSES)
        self.network_ = self._build(X)
        X_dev = y_dev = None
        if eval_set is not None:
            X_dev = self._validate(eval_set[0])
            y_dev = eval_set[1] if eval_set[1] is not None else _labels(X_dev, None)
        ids = None if isinstance(X, np.ndarray) else _ids(X)
        self.history_ = fit_network(self.network_, X, y, self._train_config(), ids, X_dev, y_dev)
        return self

    def _outputs(self, X):
        check_is_fitted(self, "network_")
        return predict_outputs(self.network_, self._validate(X))

    def decision_function(self, X) -> np.ndarray:
        """Pre-softmax class scores."""
        outs = self._outputs(X)
        return np.stack([o.scores for o in outs]) if outs else np.zeros((0, N_CLASSES))

    def predict_proba(self, X) -> np.ndarray:
        outs = self._outputs(X)
        return np.stack([o.probs for o in outs]) if outs else np.zeros((0, N_CLASSES))

    def predict(self, X) -> np.ndarray:
        return argmax_low(self.predict_proba(X))


class MicroBertClassifier(_StanceClassifier):
    """Small BERT-style pair classifier trained with flat-prior weighted cross-entropy.

    ``vocab_size=None`` infers the size from the largest token id seen in ``fit``.
    ``init_checkpoint`` starts from a pre-trained micro_bert checkpoint.
    """

    def __init__(self, vocab_size: Optional[int] = None, layers: int = 2, hidden: int = 64, heads: int = 4,
                 ff: int = 256, max_len: int = 200, lr: float = 3e-4, batch_size: int = 32, epochs: int = 10,
                 weight_decay: float = 0.01, class_weighting: str = "flat_prior", seed: int = 0,
                 init_checkpoint: Optional[str] = None, dropout: float = 0.0):
        self.vocab_size = vocab_size
        self.layers = layers
        self.hidden = hidden
        self.heads = heads
        self.ff = ff
        self.max_len = max_len
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.weight_decay = weight_decay
        self.class_weighting = class_weighting
        self.seed = seed
        self.init_checkpoint = init_checkpoint
        self.dropout = dropout

    def _build(self, X):
        vocab_size = self.vocab_size or 1 + max(max(e.token_ids) for e in X)
        net = MicroBert(MicroBertConfig(vocab_size, self.layers, self.hidden, self.heads, self.ff,
                                        self.max_len, dropout=self.dropout), self.seed)
        if self.init_checkpoint:
            _, _, arrays = checkpoint.load(self.init_checkpoint)
            load_arrays(net, arrays)
        return net

    def attention(self, X):
        """Per example: per layer, per head, (raw scores, softmax weights)."""
        check_is_fitted(self, "network_")
        return [o.attention for o in predict_outputs(self.network_, X, attention=True)]


class BiLSTMSelfAttClassifier(_StanceClassifier):
    def __init__(self, vocab_size: Optional[int] = None, embed: int = 64, hidden: int = 64,
                 att_hidden: int = 64, hops: int = 4, max_len: int = 200, lr: float = 1e-3,
                 batch_size: int = 32, epochs: int = 10, weight_decay: float = 0.01,
                 class_weighting: str = "flat_prior", seed: int = 0):
        self.vocab_size = vocab_size
        self.embed = embed
        self.hidden = hidden
        self.att_hidden = att_hidden
        self.hops = hops
        self.max_len = max_len
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.weight_decay = weight_decay
        self.class_weighting = class_weighting
        self.seed = seed

    def _build(self, X):
        vocab_size = self.vocab_size or 1 + max(max(e.token_ids) for e in X)
        return BiLSTMSelfAtt(BiLSTMSelfAttConfig(vocab_size, self.embed, self.hidden, self.att_hidden,
                                                 self.hops, self.max_len), self.seed)


class FeaturesNNClassifier(_StanceClassifier):
    """Two-layer ReLU network over standardized handcrafted features."""

    def __init__(self, hidden: int = 50, lr: float = 1e-3, batch_size: int = 32, epochs: int = 50,
                 weight_decay: float = 0.01, class_weighting: str = "flat_prior", seed: int = 0):
        self.hidden = hidden
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.weight_decay = weight_decay
        self.class_weighting = class_weighting
        self.seed = seed

    def _validate(self, X):
        X = check_array(X, dtype=np.float64)
        if hasattr(self, "n_features_in_") and X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, model expects {self.n_features_in_}")
        return X

    def _build(self, X):
        self.n_features_in_ = X.shape[1]
        return FeaturesNN(FeaturesNNConfig(X.shape[1], self.hidden), self.seed)
