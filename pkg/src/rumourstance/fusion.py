"""Ensemble fusion over stored per-model predictions.

Four strategies, all scored by dev macro F1 of the fused argmax:

* ``top_n``        greedy forward selection, averaging class probabilities
* ``exc_n``        backward elimination from the full pool
* ``top_n_scores`` greedy forward selection, averaging pre-softmax scores
* ``opt_f1``       ``top_n`` members, then simplex weights tuned with Powell

"Improves" always means strictly greater F1 (by more than 1e-12).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .metrics import argmax_low, macro_f1_from_confusion
from .models import softmax_rows
from .powell import powell_minimize
from .training import PredictionMatrix, read_gold

EPS = 1e-12
MODES = ("top_n", "exc_n", "top_n_scores", "opt_f1")


class FusionError(ValueError):
    pass


class EmptyPredictionSet(FusionError):
    pass


class MissingModel(FusionError):
    pass


class ExampleOrderMismatch(FusionError):
    pass


def fast_macro_f1(gold: np.ndarray, pred: np.ndarray) -> float:
    return macro_f1_from_confusion(np.bincount(gold * 4 + pred, minlength=16).reshape(4, 4))


@dataclass
class PredictionSet:
    model_ids: list[str]
    matrices: list[PredictionMatrix]
    gold: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.model_ids:
            raise EmptyPredictionSet("prediction set holds no models")
        if len(set(self.model_ids)) != len(self.model_ids):
            raise FusionError("duplicate model ids")
        ref = self.matrices[0].ids
        for mid, m in zip(self.model_ids, self.matrices):
            if list(m.ids) != list(ref):
                raise ExampleOrderMismatch(f"model {mid!r} predicts a different example list or order")
        self.probs = np.stack([m.probs for m in self.matrices])
        self.scores = np.stack([m.scores for m in self.matrices])
        if self.gold is not None:
            self.gold = np.asarray(self.gold, dtype=np.int64)

    @property
    def example_ids(self) -> list[str]:
        return list(self.matrices[0].ids)

    def __len__(self) -> int:
        return len(self.model_ids)

    def subset(self, ids: Sequence[str]) -> "PredictionSet":
        missing = [i for i in ids if i not in self.model_ids]
        if missing:
            raise MissingModel(f"models not in prediction set: {missing}")
        idx = [self.model_ids.index(i) for i in ids]
        return PredictionSet(list(ids), [self.matrices[i] for i in idx], self.gold)

    def single_f1(self) -> dict[str, float]:
        self._need_gold()
        return {m: fast_macro_f1(self.gold, argmax_low(self.probs[i])) for i, m in enumerate(self.model_ids)}

    def _need_gold(self):
        if self.gold is None:
            raise FusionError("gold labels required for fitting a fusion")

    @classmethod
    def load_dir(cls, path, gold_file: str = "gold.csv") -> "PredictionSet":
        """One ``<model id>.csv`` prediction file per model plus an optional gold file."""
        path = Path(path)
        files = sorted(p for p in path.glob("*.csv") if p.name != gold_file)
        if not files:
            raise EmptyPredictionSet(f"no prediction files in {path}")
        gold_map = read_gold(path / gold_file) if (path / gold_file).exists() else None
        mats = [PredictionMatrix.load(f, gold_map) for f in files]
        return cls([f.stem for f in files], mats, mats[0].gold)

    def save_dir(self, path, gold_file: str = "gold.csv") -> None:
        from .training import write_gold
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        for mid, m in zip(self.model_ids, self.matrices):
            m.save(path / f"{mid}.csv")
        if self.gold is not None:
            write_gold(path / gold_file, self.example_ids, self.gold)


@dataclass
class FusionResult:
    mode: str
    selected: list[str]
    dev_macro_f1: float
    seed: Optional[int] = None
    weights: Optional[list[float]] = None
    trace: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FusionResult":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def combine(stack: np.ndarray, members: Sequence[int], weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Plain or weighted mean of member rows (stack has shape models x n x 4)."""
    sel = stack[list(members)]
    if weights is None:
        return sel.sum(axis=0) / len(members)
    w = np.asarray(weights, dtype=np.float64)
    return np.tensordot(w, sel, axes=1)


def _f1_of(preds: PredictionSet, stack: np.ndarray, members, weights=None) -> float:
    return fast_macro_f1(preds.gold, argmax_low(combine(stack, members, weights)))


def _greedy_forward(preds: PredictionSet, seed: int, stack: np.ndarray) -> tuple[list[int], list[float]]:
    rng = np.random.default_rng(seed)
    first = int(rng.integers(len(preds)))
    selected = [first]
    cur = _f1_of(preds, stack, selected)
    trace = [cur]
    remaining = [i for i in range(len(preds)) if i != first]
    while remaining:
        added = False
        for i in rng.permutation(remaining):
            cand = _f1_of(preds, stack, selected + [int(i)])
            if cand > cur + EPS:
                selected.append(int(i))
                cur = cand
                trace.append(cur)
                added = True
        remaining = [i for i in remaining if i not in selected]
        if not added:
            break
    return selected, trace


def fuse_top_n(preds: PredictionSet, seed: int = 0) -> FusionResult:
    """Seeded random start, then shuffled passes adding any model that raises probability-average F1."""
    preds._need_gold()
    selected, trace = _greedy_forward(preds, seed, preds.probs)
    ids = [preds.model_ids[i] for i in selected]
    res = FusionResult("top_n", ids, 0.0, seed, None, trace)
    res.dev_macro_f1 = _applied_f1(res, preds)
    return res


def fuse_top_n_scores(preds: PredictionSet, seed: int = 0) -> FusionResult:
    """As ``fuse_top_n`` but members' pre-softmax scores are averaged."""
    preds._need_gold()
    selected, trace = _greedy_forward(preds, seed, preds.scores)
    ids = [preds.model_ids[i] for i in selected]
    res = FusionResult("top_n_scores", ids, 0.0, seed, None, trace)
    res.dev_macro_f1 = _applied_f1(res, preds)
    return res


def fuse_exc_n(preds: PredictionSet, seed: Optional[int] = None) -> FusionResult:
    """Start from every model; repeatedly drop the model whose removal raises F1 the most."""
    preds._need_gold()
    members = list(range(len(preds)))
    cur = _f1_of(preds, preds.probs, members)
    trace = [cur]
    while len(members) > 1:
        best_f1, best_pos = -1.0, None
        for pos in range(len(members)):
            f1 = _f1_of(preds, preds.probs, members[:pos] + members[pos + 1:])
            if f1 > best_f1:  # strict, so ties keep the lowest model index
                best_f1, best_pos = f1, pos
        if best_f1 > cur + EPS:
            del members[best_pos]
            cur = best_f1
            trace.append(cur)
        else:
            break
    res = FusionResult("exc_n", [preds.model_ids[i] for i in members], 0.0, seed, None, trace)
    res.dev_macro_f1 = _applied_f1(res, preds)
    return res


def simplex_weights(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


def argmax_breakpoints(probs: np.ndarray, z: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Steps t at which argmax(softmax(z + t d) . probs) can change on some example.

    Returns midpoints between consecutive crossings plus one point beyond each
    end, so every constant piece of the fused labelling gets one
    representative. Solved in closed form when ``d`` takes at most two distinct
    values; otherwise returns an empty array and the caller falls back to
    sampling.
    """
    vals = np.unique(d)
    if len(vals) != 2:
        return np.empty(0)
    lo, hi = vals
    e = np.exp(z - z.max())[:, None, None]
    A = (e * probs)[d == hi].sum(axis=0)  # (n, 4), scaled by exp(t * hi)
    B = (e * probs)[d == lo].sum(axis=0)  # scaled by exp(t * lo)
    ts = []
    for c, c2 in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
        da = A[:, c] - A[:, c2]
        db = B[:, c2] - B[:, c]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = db / da
        ok = (da != 0) & (r > 0)
        t = np.log(r[ok]) / (hi - lo)
        # keep crossings where the pair are the top two classes at that step
        u = np.exp(t * (hi - lo))[:, None]
        fused = u * A[ok] + B[ok]
        top = fused.max(axis=1)
        pair = np.maximum(fused[:, c], fused[:, c2])
        ts.append(t[pair >= top * (1 - 1e-12)])
    ts = np.unique(np.concatenate(ts))
    if len(ts) == 0:
        return ts
    mids = (ts[1:] + ts[:-1]) / 2
    return np.concatenate([[ts[0] - 1.0], mids, [ts[-1] + 1.0]])


def fuse_opt_f1(preds: PredictionSet, seed: int = 0, max_iter: int = 50, samples: int = 64,
                step: float = 4.0) -> FusionResult:
    """Weights on the ``top_n`` members maximizing dev F1 of the weighted probability average.

    Weights are the exponential normalization of unconstrained variables,
    started uniform and optimized with Powell's method. Line searches also try
    one step inside every constant piece of the fused labelling when those
    pieces can be found in closed form.
    """
    top = fuse_top_n(preds, seed)
    members = [preds.model_ids.index(m) for m in top.selected]
    if len(members) == 1:
        res = FusionResult("opt_f1", top.selected, 0.0, seed, [1.0], list(top.trace))
        res.dev_macro_f1 = _applied_f1(res, preds)
        return res

    def objective(z):
        return -_f1_of(preds, preds.probs, members, simplex_weights(z))

    sel = preds.probs[members]
    opt = powell_minimize(objective, np.zeros(len(members)), ftol=EPS, max_iter=max_iter,
                          step=step, samples=samples,
                          candidates=lambda x, d: argmax_breakpoints(sel, x, d))
    weights = simplex_weights(opt.x)
    res = FusionResult("opt_f1", top.selected, 0.0, seed, [float(w) for w in weights],
                       list(top.trace) + [-v for v in opt.history])
    res.dev_macro_f1 = _applied_f1(res, preds)
    return res


FUSERS = {"top_n": fuse_top_n, "exc_n": fuse_exc_n, "top_n_scores": fuse_top_n_scores, "opt_f1": fuse_opt_f1}


def fit_fusion(preds: PredictionSet, mode: str, seed: int = 0) -> FusionResult:
    if mode not in FUSERS:
        raise FusionError(f"unknown fusion mode {mode!r}; choose from {MODES}")
    return FUSERS[mode](preds, seed)


def apply_fusion(fr: FusionResult, preds: PredictionSet) -> tuple[np.ndarray, PredictionMatrix]:
    """Fused labels and matrix for a (possibly new) split, using the stored members and weights."""
    sub = preds.subset(fr.selected)
    members = list(range(len(sub)))
    if fr.mode == "top_n_scores":
        scores = combine(sub.scores, members)
        probs = softmax_rows(scores)
        labels = argmax_low(scores)
    else:
        weights = fr.weights if fr.mode == "opt_f1" else None
        probs = combine(sub.probs, members, weights)
        scores = combine(sub.scores, members, weights)
        labels = argmax_low(probs)
    return labels, PredictionMatrix(sub.example_ids, probs, scores, sub.gold)


def _applied_f1(fr: FusionResult, preds: PredictionSet) -> float:
    labels, _ = apply_fusion(fr, preds)
    return fast_macro_f1(preds.gold, labels)


class FusionEnsemble(BaseEstimator):
    """Estimator facade: ``fit`` selects members on dev predictions, ``predict`` applies them."""

    def __init__(self, mode: str = "top_n", seed: int = 0):
        self.mode = mode
        self.seed = seed

    def fit(self, X: PredictionSet, y=None):
        if y is not None:
            X = PredictionSet(X.model_ids, X.matrices, y)
        self.result_ = fit_fusion(X, self.mode, self.seed)
        return self

    def predict(self, X: PredictionSet) -> np.ndarray:
        return apply_fusion(self.result_, X)[0]

    def predict_proba(self, X: PredictionSet) -> np.ndarray:
        return apply_fusion(self.result_, X)[1].probs

    def score(self, X: PredictionSet, y=None) -> float:
        gold = X.gold if y is None else np.asarray(y)
        return fast_macro_f1(gold, self.predict(X))
