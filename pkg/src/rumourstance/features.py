"""Handcrafted post features for the feature-based baseline.

Column order: is_source, token_count, has_url, has_image, count_question,
count_exclaim, count_period, cos_to_source, cos_to_rest, negation_count,
swear_count, then the k averaged word-vector components. Cosines are
similarities (1 = same direction), not distances.
"""
from __future__ import annotations

import hashlib
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .textprep import EOS, URL_TOKEN, normalize
from .threads import Post, Thread

SCALAR_FEATURES = (
    "is_source", "token_count", "has_url", "has_image", "count_question", "count_exclaim",
    "count_period", "cos_to_source", "cos_to_rest", "negation_count", "swear_count",
)


class PostNotInThread(KeyError):
    pass


class WordVectors:
    """Token vectors of a fixed dimension with a deterministic hashed fallback."""

    def __init__(self, dim: int = 50, vectors: Optional[dict[str, np.ndarray]] = None):
        self.dim = dim
        self._vectors = {}
        for tok, vec in (vectors or {}).items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dim,):
                raise ValueError(f"vector for {tok!r} has shape {vec.shape}, expected ({dim},)")
            self._vectors[tok] = vec
        self._cache: dict[str, np.ndarray] = {}

    def __getitem__(self, token: str) -> np.ndarray:
        vec = self._vectors.get(token)
        if vec is not None:
            return vec
        vec = self._cache.get(token)
        if vec is None:
            seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "little")
            vec = np.random.default_rng(seed).standard_normal(self.dim)
            vec /= np.linalg.norm(vec)
            self._cache[token] = vec
        return vec

    def average(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros(self.dim)
        return np.mean([self[t] for t in tokens], axis=0)

    @classmethod
    def load(cls, path) -> "WordVectors":
        vectors = {}
        dim = None
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            parts = line.split()
            if not parts:
                continue
            vec = np.array([float(v) for v in parts[1:]])
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} values")
            vectors[parts[0]] = vec
        if dim is None:
            raise ValueError(f"{path}: no vectors")
        return cls(dim, vectors)


def load_lexicon(path) -> frozenset[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(w.strip().lower() for w in lines if w.strip())


def default_lexicons() -> tuple[frozenset[str], frozenset[str]]:
    data = resources.files("rumourstance") / "data"
    return (frozenset(data.joinpath("negation.txt").read_text(encoding="utf-8").split()),
            frozenset(data.joinpath("swear.txt").read_text(encoding="utf-8").split()))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _words(text: str) -> list[str]:
    return [t for t in normalize(text).split() if t != EOS]


def extract_features(target: Post, thread: Thread, wv: WordVectors,
                     lexicons: Optional[tuple[Iterable[str], Iterable[str]]] = None) -> np.ndarray:
    if thread.posts.get(target.id) != target:
        raise PostNotInThread(target.id)
    negation, swear = default_lexicons() if lexicons is None else (set(lexicons[0]), set(lexicons[1]))
    words = _words(target.text)
    vec = wv.average(words)
    root_vec = vec if target.id == thread.root_id else wv.average(_words(thread.root.text))
    rest = [w for pid, p in thread.posts.items() if pid != target.id for w in _words(p.text)]
    scalars = [
        float(target.id == thread.root_id),
        len(words),
        float(URL_TOKEN in words),
        float(target.media_flag),
        words.count("?"),
        words.count("!"),
        words.count("."),
        cosine(vec, root_vec),
        cosine(vec, wv.average(rest)),
        sum(w in negation for w in words),
        sum(w in swear for w in words),
    ]
    return np.concatenate([np.asarray(scalars, dtype=np.float64), vec])


class FeatureExtractor(TransformerMixin, BaseEstimator):
    """Maps (post, thread) pairs to the fixed-width feature matrix."""

    def __init__(self, word_vectors: Optional[WordVectors] = None, dim: int = 50,
                 negation: Optional[frozenset] = None, swear: Optional[frozenset] = None):
        self.word_vectors = word_vectors
        self.dim = dim
        self.negation = negation
        self.swear = swear

    def fit(self, X=None, y=None):
        self.wv_ = self.word_vectors if self.word_vectors is not None else WordVectors(self.dim)
        neg, sw = default_lexicons()
        self.lexicons_ = (self.negation if self.negation is not None else neg,
                          self.swear if self.swear is not None else sw)
        self.n_features_out_ = len(SCALAR_FEATURES) + self.wv_.dim
        return self

    def transform(self, X: Sequence[tuple[Post, Thread]]) -> np.ndarray:
        if not hasattr(self, "wv_"):
            self.fit()
        rows = [extract_features(p, t, self.wv_, self.lexicons_) for p, t in X]
        if not rows:
            return np.zeros((0, self.n_features_out_))
        return np.vstack(rows)

    def get_feature_names_out(self, input_features=None):
        dim = self.wv_.dim if hasattr(self, "wv_") else self.dim
        return np.array(list(SCALAR_FEATURES) + [f"wordvec_{i}" for i in range(dim)], dtype=object)
