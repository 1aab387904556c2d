"""Shared test utilities: finite-difference oracle and synthetic data."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from rumourstance.nn import tensor as T


def gradcheck(loss_fn, params, n_coords, seed=0, h=1e-5, floor=1e-6):
    """Compare backward() against central differences at random coordinates.

    Returns the list of relative errors |a - n| / max(|a|, |n|, floor).
    """
    for p in params:
        p.grad = None
    loss = loss_fn()
    T.backward(loss)
    analytic = {id(p): (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for p in params}
    rng = np.random.default_rng(seed)
    sizes = np.array([p.data.size for p in params], dtype=float)
    errors = []
    for _ in range(n_coords):
        p = params[rng.choice(len(params), p=sizes / sizes.sum())]
        k = int(rng.integers(p.data.size))
        flat = p.data.reshape(-1)
        old = flat[k]
        flat[k] = old + h
        fp = float(loss_fn().data)
        flat[k] = old - h
        fm = float(loss_fn().data)
        flat[k] = old
        num = (fp - fm) / (2 * h)
        a = analytic[id(p)].reshape(-1)[k]
        errors.append(abs(a - num) / max(abs(a), abs(num), floor))
    for p in params:
        p.grad = None
    return errors


WORDS = "the a storm city news people report video today police road fire after photo".split()
CUES = {0: "confirmed true", 1: "fake hoax", 2: "really why", 3: "lol wow"}


def synthetic_threads(n_threads=8, replies=7, seed=0, prefix="t"):
    """Threads whose post labels are signalled by cue words (separable)."""
    rng = np.random.default_rng(seed)
    threads = []
    k = 0
    for t in range(n_threads):
        posts = []
        for j in range(replies + 1):
            lab = int(rng.integers(4)) if j else k % 4
            k += 1
            text = " ".join(rng.choice(WORDS, 4)) + " " + CUES[lab] + " " + " ".join(rng.choice(WORDS, 2)) + "."
            parent = None if j == 0 else posts[int(rng.integers(len(posts)))]["id"]
            posts.append({"id": f"{prefix}{t}_{j}", "parent_id": parent, "text": text,
                          "label": ["support", "deny", "query", "comment"][lab], "media": bool(j % 3 == 0)})
        threads.append({"thread_id": f"{prefix}{t}", "platform": "twitter" if t % 2 else "reddit",
                        "posts": posts})
    return threads


def write_dataset(root, splits=(("train", 8), ("dev", 3), ("test", 3)), replies=7, seed=0):
    """Write thread files and a manifest; returns the manifest path."""
    root = Path(root)
    (root / "threads").mkdir(parents=True, exist_ok=True)
    lines = []
    for s_i, (split, n) in enumerate(splits):
        for th in synthetic_threads(n, replies, seed + 101 * s_i, prefix=f"{split}"):
            path = root / "threads" / f"{th['thread_id']}.json"
            path.write_text(json.dumps(th), encoding="utf-8")
            lines.append(f"threads/{path.name}\t{split}")
    manifest = root / "manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


RELEASE_COUNTS = {"train": (925, 378, 395, 3519), "dev": (102, 82, 120, 1181), "test": (157, 101, 93, 1476)}


def write_release_shaped(root, per_thread=40):
    """Threads whose per-split label counts equal those of the official release."""
    root = Path(root)
    (root / "threads").mkdir(parents=True, exist_ok=True)
    lines = []
    names = ["support", "deny", "query", "comment"]
    for split, counts in RELEASE_COUNTS.items():
        labels = [names[c] for c, n in enumerate(counts) for _ in range(n)]
        rng = np.random.default_rng(len(labels))
        rng.shuffle(labels)
        for t, start in enumerate(range(0, len(labels), per_thread)):
            chunk = labels[start:start + per_thread]
            posts = [{"id": f"{split}{t}_{j}", "parent_id": None if j == 0 else f"{split}{t}_{(j - 1) // 2}",
                      "text": f"post {j}", "label": lab, "media": False} for j, lab in enumerate(chunk)]
            path = root / "threads" / f"{split}{t}.json"
            path.write_text(json.dumps({"thread_id": f"{split}{t}", "platform": "twitter", "posts": posts}))
            lines.append(f"threads/{path.name}\t{split}")
    manifest = root / "manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def separable_triples(n=64, seed=0):
    """Stance triples whose label is carried by a single cue word in the target."""
    from rumourstance.threads import StanceLabel, StanceTriple
    rng = np.random.default_rng(seed)
    cue = {0: "true", 1: "fake", 2: "really", 3: "lol"}
    out = []
    for i in range(n):
        lab = i % 4
        target = " ".join(rng.choice(WORDS, 5)) + " " + cue[lab] + " " + " ".join(rng.choice(WORDS, 3))
        source = " ".join(rng.choice(WORDS, 8))
        out.append(StanceTriple(source, "", target, f"t{i:03d}", StanceLabel(lab)))
    return out


def epochs_to_accuracy(net, X, y, cfg, target=0.95):
    """Train until train accuracy reaches ``target``; returns the epoch or None."""
    from rumourstance.training import evaluate, fit_network
    y = np.asarray(y)
    hit = []

    def on_epoch(epoch, model, rec):
        _, pm = evaluate(model, X, y)
        if (pm.labels() == y).mean() >= target:
            hit.append(epoch)
            return True
        return False
    fit_network(net, X, y, cfg, on_epoch=on_epoch)
    return hit[0] if hit else None


def toy_pool(n_models=8, n=200, seed=0):
    """Seeded PredictionSet of noisy classifiers of varying quality."""
    from rumourstance.fusion import PredictionSet
    from rumourstance.models import softmax_rows
    from rumourstance.training import PredictionMatrix
    rng = np.random.default_rng(seed)
    gold = rng.choice(4, size=n, p=[0.2, 0.1, 0.1, 0.6])
    ids = [f"e{i:04d}" for i in range(n)]
    mats = []
    for m in range(n_models):
        strength = 0.6 + 1.6 * rng.random()
        scores = rng.normal(0, 1, (n, 4)) + strength * np.eye(4)[gold] + 0.5 * rng.normal(0, 1, 4)
        mats.append(PredictionMatrix(ids, softmax_rows(scores), scores, gold))
    return PredictionSet([f"m{m}" for m in range(n_models)], mats, gold)
