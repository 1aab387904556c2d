"""Text normalization, WordPiece tokenization and pair encoding."""
from __future__ import annotations

import re
import struct
import zlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .threads import StanceLabel, StanceTriple

PAD, UNK, CLS, SEP, MASK, EOS = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[EOS]"
URL_TOKEN, MENTION_TOKEN = "$URL$", "$mention$"
SPECIALS = (PAD, UNK, CLS, SEP, MASK, EOS, URL_TOKEN, MENTION_TOKEN)
CONT = "##"
MAX_WORD_CHARS = 100

_URL_RE = re.compile(
    r"(?:https?://|www\.)[^\s]*[^\s.,!?;:)\]'\"]"
    r"|\b[a-z0-9-]+(?:\.[a-z0-9-]+)*\.(?:com|org|net|co|ly|io|gl|me|uk|us|be|it|info)\b(?:/[^\s]*[^\s.,!?;:)\]'\"])?",
    re.IGNORECASE,
)
_MENTION_RE = re.compile(r"(?<!\w)@\w+")
_SPECIAL_PATTERN = "|".join(re.escape(s) for s in SPECIALS)
# periods between word characters stay inside the word ("3.5", "u.s")
_PIECE_RE = re.compile(rf"({_SPECIAL_PATTERN})|(\w+(?:\.\w+)*)|(\S)")
_LOWER_PIECE_RE = re.compile(r"\w+(?:\.\w+)*|\S")
_TERMINAL = frozenset(".!?…")


def normalize(text: str) -> str:
    """Replace URLs/mentions, lowercase, split punctuation and close sentences with [EOS].

    A sentence ends after a run of ``. ! ? …`` marks. Periods inside a word
    ("3.5", "u.s") do not end a sentence; URL and mention tokens are replaced
    before splitting so they are never cut.
    """
    text = _URL_RE.sub(f" {URL_TOKEN} ", text)
    text = _MENTION_RE.sub(f" {MENTION_TOKEN} ", text)
    out: list[str] = []
    pending_eos = False
    for chunk in text.split():
        for m in _PIECE_RE.finditer(chunk):
            special = m.group(1)
            # lowercasing can change character classes, so split again afterwards
            pieces = [special] if special else _LOWER_PIECE_RE.findall(m.group(0).lower())
            for piece in pieces:
                if pending_eos and piece != EOS and piece not in _TERMINAL:
                    out.append(EOS)
                pending_eos = piece in _TERMINAL
                out.append(piece)
    if out and out[-1] != EOS:
        out.append(EOS)
    return " ".join(out)


class VocabError(ValueError):
    pass


class CorpusEmpty(VocabError):
    pass


class Vocab:
    """Immutable token <-> id mapping. Special tokens always occupy the first ids."""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tokens[: len(SPECIALS)] != list(SPECIALS):
            missing = [s for s in SPECIALS if s not in tokens]
            if missing:
                raise VocabError(f"vocab lacks special tokens {missing}")
            if tokens[0] != PAD:
                raise VocabError("[PAD] must have id 0")
        index = {}
        for i, tok in enumerate(tokens):
            if not tok or any(ch.isspace() for ch in tok):
                raise VocabError(f"invalid vocab token {tok!r} at line {i}")
            if tok in index:
                raise VocabError(f"duplicate vocab token {tok!r}")
            index[tok] = i
        self._tokens = tuple(tokens)
        self._index = index

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._tokens == other._tokens

    def __hash__(self):
        return hash(self._tokens)

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def id(self, token: str) -> int:
        return self._index.get(token, self._index[UNK])

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    def checksum(self) -> int:
        return zlib.crc32("\n".join(self._tokens).encode("utf-8"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self._tokens), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)


def wordpiece_tokenize(text: str, vocab: Vocab) -> list[str]:
    """Greedy longest-match-first WordPiece over whitespace-delimited words."""
    out: list[str] = []
    for word in text.split():
        if word in SPECIALS and word in vocab:
            out.append(word)
            continue
        if len(word) > MAX_WORD_CHARS:
            out.append(UNK)
            continue
        pieces = []
        start = 0
        while start < len(word):
            end = len(word)
            found = None
            while start < end:
                cand = word[start:end]
                if start > 0:
                    cand = CONT + cand
                if cand in vocab:
                    found = cand
                    break
                end -= 1
            if found is None:
                pieces = [UNK]
                break
            pieces.append(found)
            start = end
        out.extend(pieces)
    return out


def detokenize(pieces: Sequence[str]) -> list[str]:
    """Glue continuation pieces back into words."""
    words: list[str] = []
    for p in pieces:
        if p.startswith(CONT) and words:
            words[-1] += p[len(CONT):]
        else:
            words.append(p)
    return words


def _split_word(word: str) -> tuple[str, ...]:
    return (word[0],) + tuple(CONT + ch for ch in word[1:])


def _merge(a: str, b: str) -> str:
    return a + b[len(CONT):]


def train_vocab(corpus: Iterable[str], size: int = 2000) -> Vocab:
    """Build a WordPiece vocabulary by repeated most-frequent pair merges.

    Every character seen gets both its initial and ``##`` form, so corpus text
    never tokenizes to [UNK]. Ties between pairs break lexicographically.
    """
    word_freq: Counter[str] = Counter()
    for line in corpus:
        for w in line.split():
            if w not in SPECIALS and len(w) <= MAX_WORD_CHARS:
                word_freq[w] += 1
    if not word_freq:
        raise CorpusEmpty("no words to build a vocabulary from")

    chars = sorted({ch for w in word_freq for ch in w})
    base = [ch for ch in chars] + [CONT + ch for ch in chars]
    tokens = list(SPECIALS) + [t for t in base if t not in SPECIALS]
    if size < len(tokens):
        raise VocabError(f"size {size} below the {len(tokens)} specials and characters required")
    known = set(tokens)

    splits = {w: _split_word(w) for w in word_freq}
    while len(tokens) < size:
        pairs: Counter[tuple[str, str]] = Counter()
        for w, seq in splits.items():
            f = word_freq[w]
            for a, b in zip(seq, seq[1:]):
                pairs[(a, b)] += f
        if not pairs:
            break
        best_count = max(pairs.values())
        a, b = min(p for p, c in pairs.items() if c == best_count)
        merged = _merge(a, b)
        if merged not in known:
            tokens.append(merged)
            known.add(merged)
        for w, seq in splits.items():
            if len(seq) < 2:
                continue
            new = []
            i = 0
            while i < len(seq):
                if i + 1 < len(seq) and seq[i] == a and seq[i + 1] == b:
                    new.append(merged)
                    i += 2
                else:
                    new.append(seq[i])
                    i += 1
            splits[w] = tuple(new)
    return Vocab(tokens)


@dataclass(frozen=True)
class EncoderConfig:
    max_len: int = 200
    include_source: bool = True
    include_previous: bool = True

    def __post_init__(self):
        if self.max_len < 8:
            raise ValueError("max_len must be at least 8")


@dataclass
class EncodedExample:
    token_ids: list[int]
    segment_ids: list[int]
    position_ids: list[int]
    label: Optional[StanceLabel] = None
    doc1_len: int = 0
    doc2_len: int = 0
    example_id: str = ""

    def __len__(self) -> int:
        return len(self.token_ids)


def truncation_lengths(n1: int, n2: int, max_len: int) -> tuple[int, int]:
    """Document lengths after the head-keeping truncation heuristic."""
    cap = (max_len - 3) // 2
    if n1 + n2 + 3 <= max_len:
        return n1, n2
    n1 = min(n1, max(cap, max_len - 3 - n2))
    if n1 + n2 + 3 > max_len:
        n2 = min(n2, cap)
    return n1, n2


def encode_pair(doc1: Sequence[int], doc2: Sequence[int], cfg: EncoderConfig,
                cls_id: int = 2, sep_id: int = 3, label=None, example_id: str = "") -> EncodedExample:
    n1, n2 = truncation_lengths(len(doc1), len(doc2), cfg.max_len)
    d1, d2 = list(doc1[:n1]), list(doc2[:n2])
    tokens = [cls_id] + d1 + [sep_id] + d2 + [sep_id]
    segments = [0] * (n1 + 2) + [1] * (n2 + 1)
    return EncodedExample(tokens, segments, list(range(len(tokens))), label, n1, n2, example_id)


def build_example(triple: StanceTriple, vocab: Vocab, cfg: EncoderConfig) -> EncodedExample:
    doc1: list[str] = []
    if cfg.include_source:
        doc1 += wordpiece_tokenize(normalize(triple.source_text), vocab)
    if cfg.include_previous:
        doc1 += wordpiece_tokenize(normalize(triple.previous_text), vocab)
    doc2 = wordpiece_tokenize(normalize(triple.target_text), vocab)
    return encode_pair(vocab.ids(doc1), vocab.ids(doc2), cfg, vocab.id(CLS), vocab.id(SEP),
                       triple.label, triple.target_id)


class PairEncoder(TransformerMixin, BaseEstimator):
    """Turns stance triples into encoded [CLS] doc1 [SEP] doc2 [SEP] examples.

    ``fit`` trains a WordPiece vocabulary on the normalized triple texts unless a
    vocabulary is supplied.
    """

    def __init__(self, vocab: Optional[Vocab] = None, vocab_size: int = 2000, max_len: int = 200,
                 include_source: bool = True, include_previous: bool = True):
        self.vocab = vocab
        self.vocab_size = vocab_size
        self.max_len = max_len
        self.include_source = include_source
        self.include_previous = include_previous

    def fit(self, X: Sequence[StanceTriple], y=None):
        if self.vocab is not None:
            self.vocab_ = self.vocab
        else:
            # every post appears as a target exactly once
            self.vocab_ = train_vocab((normalize(t.target_text) for t in X), self.vocab_size)
        self.config_ = EncoderConfig(self.max_len, self.include_source, self.include_previous)
        return self

    def transform(self, X: Sequence[StanceTriple]) -> list[EncodedExample]:
        check_is_fitted(self, "vocab_")
        return [build_example(t, self.vocab_, self.config_) for t in X]


def write_cache(path: str | Path, examples: Sequence[EncodedExample], max_len: int, vocab: Vocab) -> None:
    """Binary cache: header (l, vocab crc32) then one int32 record per example."""
    buf = [struct.pack("<iI", max_len, vocab.checksum())]
    for ex in examples:
        n = len(ex.token_ids)
        label = -1 if ex.label is None else int(ex.label)
        rec = [n, ex.doc1_len, ex.doc2_len, *ex.token_ids, *ex.segment_ids, *ex.position_ids, label]
        buf.append(np.asarray(rec, dtype="<i4").tobytes())
    Path(path).write_bytes(b"".join(buf))


def read_cache(path: str | Path, vocab: Optional[Vocab] = None) -> tuple[int, list[EncodedExample]]:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise VocabError(f"{path}: truncated cache header")
    max_len, checksum = struct.unpack_from("<iI", raw, 0)
    if vocab is not None and vocab.checksum() != checksum:
        raise VocabError(f"{path}: cache was built with a different vocabulary")
    ints = np.frombuffer(raw, dtype="<i4", offset=8)
    out = []
    i = 0
    while i < len(ints):
        n, n1, n2 = (int(v) for v in ints[i:i + 3])
        i += 3
        tok = ints[i:i + n].tolist(); i += n
        seg = ints[i:i + n].tolist(); i += n
        pos = ints[i:i + n].tolist(); i += n
        lab = int(ints[i]); i += 1
        out.append(EncodedExample(tok, seg, pos, None if lab < 0 else StanceLabel(lab), n1, n2))
    return max_len, out
