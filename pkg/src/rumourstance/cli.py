"""Command-line entry point.

Every subcommand accepts ``--config FILE`` with flat ``key=value`` lines (keys
are flag names with dashes or underscores). Command-line flags override the
file, which overrides built-in defaults. Commands that write an output
directory also write ``config.txt`` there, the effective configuration, which
can be fed back through ``--config`` to repeat the run.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .features import FeatureExtractor, WordVectors, load_lexicon
from .fusion import MODES, FusionError, FusionResult, PredictionSet, apply_fusion, fit_fusion
from .introspect import capture, export_heatmap
from .metrics import Metrics
from .models import (BiLSTMSelfAttConfig, FeaturesNNConfig, MicroBert, MicroBertConfig,
                     build_network, checkpoint_extras, load_network, save_network)
from .nn.checkpoint import CheckpointError
from .textprep import (EOS, EncoderConfig, Vocab, VocabError, build_example, normalize, train_vocab,
                       wordpiece_tokenize, write_cache)
from .threads import SPLITS, Post, StanceTriple, Thread, ThreadError, format_stats_table, linearize, load_dataset, split_stats
from .training import (CheckpointMeta, EmptyDataset, PredictionMatrix, TrainConfig, evaluate, pretrain,
                       train, write_answers, write_gold, write_metrics)

log = logging.getLogger("rumourstance")

MODEL_KINDS = ("micro_bert", "features_nn", "bilstm_selfatt")


class UsageError(Exception):
    pass


# data helpers -------------------------------------------------------------------

@dataclass
class SplitData:
    triples: list[StanceTriple]
    posts: list[tuple[Post, Thread]]

    @property
    def ids(self) -> list[str]:
        return [t.target_id for t in self.triples]

    @property
    def labels(self) -> Optional[np.ndarray]:
        if any(t.label is None for t in self.triples):
            return None
        return np.array([int(t.label) for t in self.triples], dtype=np.int64)


def load_splits(manifest) -> dict[str, SplitData]:
    out = {s: SplitData([], []) for s in SPLITS}
    for thread, split in load_dataset(manifest):
        for triple in linearize(thread):
            out[split].triples.append(triple)
            out[split].posts.append((thread.posts[triple.target_id], thread))
    return out


def encoder_config(args) -> EncoderConfig:
    return EncoderConfig(args.max_len, args.include_source, args.include_previous)


def model_inputs(kind: str, data: SplitData, vocab: Optional[Vocab], enc: EncoderConfig, features=None):
    if kind == "features_nn":
        return features.transform(data.posts)
    return [build_example(t, vocab, enc) for t in data.triples]


def feature_extractor(args) -> FeatureExtractor:
    wv = WordVectors.load(args.word_vectors) if args.word_vectors else None
    neg = load_lexicon(args.negation) if args.negation else None
    swear = load_lexicon(args.swear) if args.swear else None
    return FeatureExtractor(wv, args.wordvec_dim, neg, swear).fit()


def require_vocab(args, kind: str = "micro_bert") -> Optional[Vocab]:
    if kind == "features_nn":
        return None
    if not args.vocab:
        raise UsageError("--vocab is required")
    return Vocab.load(args.vocab)


def model_config(args, kind: str, vocab: Optional[Vocab], n_features: int = 0) -> dict:
    if kind == "micro_bert":
        cfg = MicroBertConfig(len(vocab), args.layers, args.hidden, args.heads, args.ff, args.max_len,
                              dropout=args.dropout)
    elif kind == "bilstm_selfatt":
        cfg = BiLSTMSelfAttConfig(len(vocab), args.embed, args.lstm_hidden, args.att_hidden, args.hops, args.max_len)
    else:
        cfg = FeaturesNNConfig(n_features, args.features_hidden)
    return dict(cfg.__dict__)


def write_snapshot(args, out_dir) -> None:
    skip = {"config", "func"}
    lines = []
    for key in sorted(vars(args)):
        if key in skip:
            continue
        val = getattr(args, key)
        if isinstance(val, (list, tuple)):
            val = ",".join(str(v) for v in val)
        lines.append(f"{key}={'' if val is None else val}")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    (Path(out_dir) / "config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_config_file(path) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values


# commands -------------------------------------------------------------------------

def cmd_ingest(args) -> None:
    splits = load_splits(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for split, data in splits.items():
        with open(out / f"{split}.jsonl", "w", encoding="utf-8") as fh:
            for t in data.triples:
                fh.write(json.dumps({
                    "id": t.target_id, "source": t.source_text, "previous": t.previous_text,
                    "target": t.target_text, "label": None if t.label is None else t.label.lower,
                }, ensure_ascii=False) + "\n")
        empty = sum(1 for t in data.triples if not t.target_text)
        print(f"{split}: {len(data.triples)} posts, {empty} empty")
    write_snapshot(args, out)


def cmd_stats(args) -> None:
    table = format_stats_table(split_stats(load_dataset(args.manifest)))
    print(table)
    if args.out:
        Path(args.out).write_text(table + "\n", encoding="utf-8")


def cmd_build_vocab(args) -> None:
    splits = load_splits(args.manifest)
    corpus = [normalize(t.target_text) for t in splits["train"].triples]
    vocab = train_vocab(corpus, args.size)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    vocab.save(args.out)
    print(f"wrote {len(vocab)} tokens to {args.out}")


def cmd_encode(args) -> None:
    vocab = require_vocab(args)
    enc = encoder_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for split, data in load_splits(args.manifest).items():
        examples = [build_example(t, vocab, enc) for t in data.triples]
        write_cache(out / f"{split}.bin", examples, enc.max_len, vocab)
        (out / f"{split}.ids").write_text("".join(i + "\n" for i in data.ids), encoding="utf-8")
        print(f"{split}: {len(examples)} examples")
    write_snapshot(args, out)


def pretraining_sentences(splits: dict[str, SplitData], vocab: Vocab) -> list[list[int]]:
    sentences = []
    for t in splits["train"].triples:
        for sent in normalize(t.target_text).split(EOS):
            toks = wordpiece_tokenize(sent.strip() + " " + EOS, vocab) if sent.strip() else []
            if toks:
                sentences.append(vocab.ids(toks))
    return sentences


def cmd_pretrain(args) -> None:
    vocab = require_vocab(args)
    splits = load_splits(args.manifest)
    sentences = pretraining_sentences(splits, vocab)
    if not sentences:
        raise EmptyDataset("no sentences in the training split")
    net = MicroBert(MicroBertConfig(len(vocab), args.layers, args.hidden, args.heads, args.ff, args.max_len,
                                    dropout=args.dropout), args.seed)
    losses = pretrain(net, sentences, vocab, args.steps, args.batch_size, args.lr, args.seed,
                      min(args.max_len, 128))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_network(net, out / "model.ckpt", {"encoder": encoder_config(args).__dict__})
    (out / "losses.txt").write_text("".join(f"{v!r}\n" for v in losses), encoding="utf-8")
    CheckpointMeta("model.ckpt", "micro_bert", float("nan"), args.lr, args.seed, 0).save(out / "meta.json")
    write_snapshot(args, out)
    print(f"pretrained {args.steps} steps, final loss {losses[-1]:.4f}")


def _train_one(args, splits, vocab, features, lr: float, seed: int, out_dir: Path) -> CheckpointMeta:
    kind = args.model
    enc = encoder_config(args)
    train_data, dev_data = splits["train"], splits["dev"]
    X = model_inputs(kind, train_data, vocab, enc, features)
    y = train_data.labels
    if y is None:
        raise ThreadError("training split has unlabelled posts")
    X_dev = y_dev = None
    if dev_data.triples and dev_data.labels is not None:
        X_dev, y_dev = model_inputs(kind, dev_data, vocab, enc, features), dev_data.labels
    n_features = X.shape[1] if kind == "features_nn" else 0
    cfg = TrainConfig(lr=lr, lr_interval=tuple(args.lr_interval), batch_size=args.batch_size,
                      epochs=args.epochs, seed=seed, max_len=args.max_len,
                      class_weighting=args.class_weighting, weight_decay=args.weight_decay)
    init = None
    if args.init:
        from .nn import checkpoint
        _, _, init = checkpoint.load(args.init)
    meta = train(kind, model_config(args, kind, vocab, n_features), X, y, cfg, out_dir, X_dev, y_dev,
                 train_data.ids, dev_data.ids, init, {"encoder": enc.__dict__})
    net = load_network(out_dir / "model.ckpt")
    for split in ("dev", "test"):
        data = splits[split]
        if not data.triples:
            continue
        metrics, pm = evaluate(net, model_inputs(kind, data, vocab, enc, features), data.labels, data.ids)
        pm.save(out_dir / f"predictions_{split}.csv")
        if metrics is not None:
            write_metrics(out_dir / f"metrics_{split}.json", metrics)
    return meta


def cmd_train(args) -> None:
    if args.replicas < 1:
        raise UsageError("--replicas must be at least 1")
    vocab = require_vocab(args, args.model)
    splits = load_splits(args.manifest)
    features = feature_extractor(args) if args.model == "features_nn" else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(args, out)
    if args.replicas == 1:
        meta = _train_one(args, splits, vocab, features, args.lr, args.seed, out)
        print(f"dev macro F1 {meta.dev_macro_f1:.4f} (epoch {meta.epoch})")
        return

    rng = np.random.default_rng(args.seed)
    lo, hi = args.lr_interval
    runs = [(f"replica_{r:03d}", float(rng.uniform(lo, hi)), args.seed + r) for r in range(args.replicas)]
    metas = []
    for name, lr, seed in runs:
        meta = _train_one(args, splits, vocab, features, lr, seed, out / name)
        metas.append((name, meta))
        print(f"{name}: lr={lr:.3g} seed={seed} dev macro F1 {meta.dev_macro_f1:.4f}")
    for split in ("dev", "test"):
        data = splits[split]
        if not data.triples:
            continue
        pdir = out / f"{split}_predictions"
        pdir.mkdir(exist_ok=True)
        for name, _ in metas:
            (pdir / f"{name}.csv").write_bytes((out / name / f"predictions_{split}.csv").read_bytes())
        if data.labels is not None:
            write_gold(pdir / "gold.csv", data.ids, data.labels)


def _load_model_and_data(args):
    net = load_network(args.checkpoint)
    extras = checkpoint_extras(args.checkpoint)
    enc = EncoderConfig(**extras["encoder"]) if "encoder" in extras else encoder_config(args)
    vocab = require_vocab(args, net.kind)
    features = feature_extractor(args) if net.kind == "features_nn" else None
    data = load_splits(args.manifest)[args.split]
    if not data.triples:
        raise EmptyDataset(f"split {args.split!r} is empty")
    return net, model_inputs(net.kind, data, vocab, enc, features), data, vocab


def cmd_eval(args) -> None:
    net, X, data, _ = _load_model_and_data(args)
    metrics, pm = evaluate(net, X, data.labels, data.ids)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pm.save(out / f"predictions_{args.split}.csv")
    if metrics is not None:
        write_metrics(out / f"metrics_{args.split}.json", metrics)
        print(json.dumps({k: v for k, v in metrics.to_dict().items() if k != "confusion"}))
    write_snapshot(args, out)


def cmd_ensemble(args) -> None:
    dev = PredictionSet.load_dir(args.dev_dir)
    if dev.gold is None:
        raise FusionError(f"{args.dev_dir} has no gold.csv")
    if args.min_dev_f1 > 0:
        keep = [m for m, f in dev.single_f1().items() if 100.0 * f >= args.min_dev_f1 - 1e-9]
        if not keep:
            raise FusionError(f"no model reaches {args.min_dev_f1} dev macro F1")
        dev = dev.subset(keep)
    result = fit_fusion(dev, args.mode, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.save(out / "fusion.json")
    _, fused_dev = apply_fusion(result, dev)
    fused_dev.save(out / "predictions_dev.csv")
    print(f"{args.mode}: {len(result.selected)} models, dev macro F1 {result.dev_macro_f1:.4f}")
    if args.test_dir:
        test = PredictionSet.load_dir(args.test_dir)
        labels, fused = apply_fusion(result, test)
        fused.save(out / "predictions_test.csv")
        write_answers(out / "answers_test.json", fused.ids, labels)
        if test.gold is not None:
            metrics = Metrics.compute(test.gold, labels)
            write_metrics(out / "metrics_test.json", metrics)
            print(f"test macro F1 {metrics.macro_f1:.4f}, accuracy {metrics.accuracy:.4f}")
    write_snapshot(args, out)


def cmd_predict(args) -> None:
    if args.fusion:
        if not args.pred_dir:
            raise UsageError("--fusion needs --pred-dir")
        labels, pm = apply_fusion(FusionResult.load(args.fusion), PredictionSet.load_dir(args.pred_dir))
        ids = pm.ids
    else:
        if not args.checkpoint or not args.manifest:
            raise UsageError("predict needs --checkpoint and --manifest, or --fusion and --pred-dir")
        net, X, data, _ = _load_model_and_data(args)
        _, pm = evaluate(net, X, None, data.ids)
        labels, ids = pm.labels(), pm.ids
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_answers(args.out, ids, labels)
    print(f"wrote {len(ids)} answers to {args.out}")


def cmd_introspect(args) -> None:
    net, X, data, vocab = _load_model_and_data(args)
    if not isinstance(net, MicroBert):
        raise UsageError("introspect needs a micro_bert checkpoint")
    idx = data.ids.index(args.example_id) if args.example_id else 0
    records = capture(net, X[idx], vocab)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats = []
    for rec in records:
        matrix = rec.raw if args.raw else rec.softmaxed
        export_heatmap(matrix, out / f"layer{rec.layer}_head{rec.head}.pgm")
        stats.append(rec.to_dict(args.window))
    (out / "tokens.txt").write_text("\n".join(records[0].tokens) + "\n", encoding="utf-8")
    (out / "head_stats.json").write_text(json.dumps(stats, indent=1) + "\n", encoding="utf-8")
    write_snapshot(args, out)
    print(f"example {data.ids[idx]}: {len(records)} heads written to {out}")


# parser ---------------------------------------------------------------------------

def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _interval(text) -> tuple[float, float]:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    parts = str(text).split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected LOW,HIGH")
    return float(parts[0]), float(parts[1])


def _add_data(p, vocab=True):
    p.add_argument("--manifest", help="split manifest (path<TAB>split per line)")
    if vocab:
        p.add_argument("--vocab", help="vocabulary file, one token per line")


def _add_encoder(p):
    p.add_argument("--max-len", type=int, default=200, help="maximum encoded length l (default: 200)")
    p.add_argument("--include-source", type=_bool, default=True,
                   help="put the source post into document 1 (default: true)")
    p.add_argument("--include-previous", type=_bool, default=True,
                   help="put the previous post into document 1 (default: true)")


def _add_micro(p):
    p.add_argument("--layers", type=int, default=2, help="encoder layers N (default: 2)")
    p.add_argument("--hidden", type=int, default=64, help="hidden size d (default: 64)")
    p.add_argument("--heads", type=int, default=4, help="attention heads (default: 4)")
    p.add_argument("--ff", type=int, default=256, help="feed-forward width (default: 256)")
    p.add_argument("--dropout", type=float, default=0.0, help="dropout rate while training (default: 0)")


def _add_features(p):
    p.add_argument("--word-vectors", help="word-vector text file (token v1 .. vk per line)")
    p.add_argument("--wordvec-dim", type=int, default=50,
                   help="dimension of hashed fallback vectors when no file is given (default: 50)")
    p.add_argument("--negation", help="negation lexicon (default: bundled list)")
    p.add_argument("--swear", help="swear-word lexicon (default: bundled list)")


def _add_model_source(p):
    p.add_argument("--checkpoint", help="model checkpoint")
    _add_data(p)
    p.add_argument("--split", choices=SPLITS, default="test", help="split to run on (default: test)")
    _add_encoder(p)
    _add_features(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rumourstance", description="Rumour stance classification toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help):
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--config", help="key=value file; flags given on the command line win")
        p.set_defaults(func=func)
        return p

    p = command("ingest", cmd_ingest, "validate threads and write linearized triples per split")
    _add_data(p, vocab=False)
    p.add_argument("--out", required=False, help="output directory")

    p = command("stats", cmd_stats, "print per-split class counts")
    _add_data(p, vocab=False)
    p.add_argument("--out", help="also write the table to this file")

    p = command("build-vocab", cmd_build_vocab, "train a WordPiece vocabulary on the training split")
    _add_data(p, vocab=False)
    p.add_argument("--size", type=int, default=2000, help="vocabulary size (default: 2000)")
    p.add_argument("--out", help="vocabulary file to write")

    p = command("encode", cmd_encode, "write binary encoded-example caches per split")
    _add_data(p)
    _add_encoder(p)
    p.add_argument("--out", help="output directory")

    p = command("pretrain", cmd_pretrain, "toy masked-LM + next-sentence pre-training")
    _add_data(p)
    _add_encoder(p)
    _add_micro(p)
    p.add_argument("--steps", type=int, default=500, help="optimizer steps (default: 500)")
    p.add_argument("--batch-size", type=int, default=16, help="pairs per step (default: 16)")
    p.add_argument("--lr", type=float, default=1e-3, help="learning rate (default: 1e-3)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--out", help="output directory")

    p = command("train", cmd_train, "train one model or --replicas models")
    _add_data(p)
    _add_encoder(p)
    _add_micro(p)
    _add_features(p)
    p.add_argument("--model", choices=MODEL_KINDS, default="micro_bert", help="model kind (default: micro_bert)")
    p.add_argument("--embed", type=int, default=64, help="BiLSTM token embedding size (default: 64)")
    p.add_argument("--lstm-hidden", type=int, default=64, help="BiLSTM hidden size per direction (default: 64)")
    p.add_argument("--att-hidden", type=int, default=64, help="self-attention hidden size (default: 64)")
    p.add_argument("--hops", type=int, default=4, help="self-attention rows r (default: 4)")
    p.add_argument("--features-hidden", type=int, default=50, help="FeaturesNN hidden width (default: 50)")
    p.add_argument("--lr", type=float, default=3e-4, help="learning rate for a single run (default: 3e-4)")
    p.add_argument("--lr-interval", type=_interval, default=(1e-6, 2e-6),
                   help="LOW,HIGH range sampled per replica (default: 1e-6,2e-6)")
    p.add_argument("--replicas", type=int, default=1, help="models to train with sampled lr/seed (default: 1)")
    p.add_argument("--batch-size", type=int, default=32, help="batch size (default: 32)")
    p.add_argument("--epochs", type=int, default=10, help="epochs (default: 10)")
    p.add_argument("--weight-decay", type=float, default=0.01, help="decoupled weight decay (default: 0.01)")
    p.add_argument("--class-weighting", choices=("flat_prior", "none"), default="flat_prior",
                   help="loss class weights (default: flat_prior)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--init", help="initialize from a pre-trained checkpoint")
    p.add_argument("--out", help="output directory")

    p = command("eval", cmd_eval, "evaluate a checkpoint on one split")
    _add_model_source(p)
    p.add_argument("--out", help="output directory")

    p = command("ensemble", cmd_ensemble, "fit a fusion on dev predictions and apply it to test")
    p.add_argument("--dev-dir", help="directory of dev prediction files plus gold.csv")
    p.add_argument("--test-dir", help="directory of test prediction files (optional gold.csv)")
    p.add_argument("--mode", choices=MODES, default="top_n", help="fusion strategy (default: top_n)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--min-dev-f1", type=float, default=0.0,
                   help="drop models below this dev macro F1, in percent (default: 0)")
    p.add_argument("--out", help="output directory")

    p = command("predict", cmd_predict, "write a scorer answer file")
    _add_model_source(p)
    p.add_argument("--fusion", help="fusion.json from the ensemble command")
    p.add_argument("--pred-dir", help="prediction files the fusion is applied to")
    p.add_argument("--out", help="answer file to write")

    p = command("introspect", cmd_introspect, "export attention heatmaps and head statistics")
    _add_model_source(p)
    p.add_argument("--example-id", help="post id to inspect (default: first in split)")
    p.add_argument("--raw", type=_bool, default=False,
                   help="plot raw QK^T/sqrt(d_k) scores instead of softmax weights (default: false)")
    p.add_argument("--window", type=int, default=1, help="local-mass window (default: 1)")
    p.add_argument("--out", help="output directory")
    return parser


REQUIRED = {
    "ingest": ("manifest", "out"), "stats": ("manifest",), "build-vocab": ("manifest", "out"),
    "encode": ("manifest", "vocab", "out"), "pretrain": ("manifest", "vocab", "out"),
    "train": ("manifest", "out"), "eval": ("checkpoint", "manifest", "out"),
    "ensemble": ("dev_dir", "out"), "predict": ("out",),
    "introspect": ("checkpoint", "manifest", "vocab", "out"),
}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            values = read_config_file(args.config)
        except (OSError, UsageError) as exc:
            parser.error(str(exc))
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known - {"command", "verbose"})
        if unknown:
            parser.error(f"unknown keys in {args.config}: {', '.join(unknown)}")
        sub.set_defaults(**{k: v for k, v in values.items() if k in known and k != "config"})
        args = parser.parse_args(argv)
        for action in sub._actions:
            val = getattr(args, action.dest, None)
            if isinstance(val, str) and action.type is not None and action.dest in values:
                setattr(args, action.dest, action.type(val))
            if val == "" and action.dest in values:
                setattr(args, action.dest, None)
    missing = [k for k in REQUIRED.get(args.command, ()) if not getattr(args, k, None)]
    if missing:
        parser.error(f"{args.command}: missing required option(s): "
                     + ", ".join("--" + m.replace("_", "-") for m in missing))
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ThreadError, VocabError, CheckpointError, FusionError, EmptyDataset, ValueError, KeyError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
