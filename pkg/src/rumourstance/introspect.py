"""Attention capture, per-head summary statistics and PGM heatmaps."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .models import MicroBert, collate
from .textprep import EncodedExample, Vocab


class WrongModelKind(TypeError):
    pass


@dataclass
class AttentionRecord:
    layer: int
    head: int
    raw: np.ndarray        # QK^T / sqrt(d_k), before masking and softmax
    softmaxed: np.ndarray
    tokens: list[str]
    boundary: int           # index of the first [SEP]; positions <= boundary are segment 0
    segment_ids: Optional[np.ndarray] = None
    pad_mask: Optional[np.ndarray] = None

    def to_dict(self, window: int = 1) -> dict:
        return {"layer": self.layer, "head": self.head, **head_stats(self, window)}


def capture(net, example: EncodedExample, vocab: Optional[Vocab] = None) -> list[AttentionRecord]:
    """Run one example through a micro_bert network and keep every layer/head attention matrix."""
    if not isinstance(net, MicroBert):
        raise WrongModelKind(f"attention capture needs a micro_bert model, got {getattr(net, 'kind', net)!r}")
    record: list = []
    net.scores(collate([example]), record)
    tokens = [vocab.token(t) if vocab is not None else str(t) for t in example.token_ids]
    seg = np.asarray(example.segment_ids)
    boundary = int(np.argmax(seg == 1)) - 1 if (seg == 1).any() else len(seg) - 1
    out = []
    for layer, (raw, probs) in enumerate(record):
        for head in range(len(raw)):
            out.append(AttentionRecord(layer, head, raw[head][0].copy(), probs[0, head].copy(),
                                       tokens, boundary, seg.copy()))
    return out


def head_stats(rec: AttentionRecord, window: int = 1) -> dict:
    """Mean per-row attention mass inside the row's segment, on the diagonal, and within ``window``.

    Padding rows and columns are ignored.
    """
    P = np.asarray(rec.softmaxed, dtype=np.float64)
    L = P.shape[0]
    keep = np.ones(L, dtype=bool) if rec.pad_mask is None else ~np.asarray(rec.pad_mask, dtype=bool)
    if rec.segment_ids is not None:
        seg = np.asarray(rec.segment_ids)
    else:
        seg = (np.arange(L) > rec.boundary).astype(int)
    rows = np.flatnonzero(keep)
    P = P[np.ix_(rows, rows)]
    seg = seg[rows]
    dist = np.abs(rows[:, None] - rows[None, :])
    same = seg[:, None] == seg[None, :]
    return {
        "intra_segment_mass": float((P * same).sum(axis=1).mean()),
        "diagonal_mass": float(np.diag(P).mean()),
        "local_mass": float((P * (dist <= window)).sum(axis=1).mean()),
        "window": window,
    }


def local_mass(rec: AttentionRecord, window: int) -> float:
    return head_stats(rec, window)["local_mass"]


def to_pixels(matrix) -> np.ndarray:
    """Min-max scale to 0..255; a constant matrix maps to mid-gray 128."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or not np.isfinite(m).all():
        raise ValueError("heatmap needs a finite 2-d matrix")
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.full(m.shape, 128, dtype=np.uint8)
    return np.rint((m - lo) / (hi - lo) * 255.0).astype(np.uint8)


def export_heatmap(matrix, path) -> Path:
    """Write a binary P5 portable graymap (maxval 255)."""
    px = to_pixels(matrix)
    h, w = px.shape
    path = Path(path)
    try:
        path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + px.tobytes())
    except OSError as exc:
        raise IOError(f"cannot write heatmap {path}: {exc}") from exc
    return path


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval > 255:
        raise ValueError("only 8-bit graymaps are supported")
    pos += 1
    return np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
