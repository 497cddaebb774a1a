"""Command-line interface.

Exit codes: 0 on success, 1 for usage or configuration problems, 2 for
errors raised while running a command.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import RunConfig, load_run_config
from .corpus import Corpus, Span, load_corpus, load_embeddings, write_nested
from .errors import ConfigError, SpanNCAError
from .evaluator import compare_heads, format_table, gold_of, size_ablation, span_f1, write_records
from .inference import (
    SupportIndex,
    decode_corpus,
    dump_features,
    explain,
    predict_corpus,
    render_explanation,
    write_predictions,
)
from .model import SpanModel, model_digest
from .synthetic import generate, write_synthetic
from .trainer import train

logger = logging.getLogger("spannca")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers


def _run_config(args) -> RunConfig:
    cfg = load_run_config(args.config, args.set or (), args.seed)
    if getattr(args, "out", None):
        cfg = replace(cfg, output_dir=Path(args.out).resolve())
    return cfg


def _corpus(cfg: RunConfig, key: str, split: str):
    return load_corpus(cfg.path(key), cfg.format, split)


def _input_corpus(cfg: RunConfig, args, default_key: str = "test"):
    if getattr(args, "input", None):
        p = Path(args.input)
        if not p.is_file():
            raise ConfigError("--input", f"file not found: {p}")
        return load_corpus(p, cfg.format, default_key)
    return _corpus(cfg, default_key, default_key)


def _embeddings(cfg: RunConfig):
    return load_embeddings(cfg.path("embeddings"), cfg.encoder.word_dim)


def _load_model(cfg: RunConfig, args, embeddings) -> SpanModel:
    path = Path(args.checkpoint) if getattr(args, "checkpoint", None) else cfg.checkpoint_path
    if not path.is_file():
        raise ConfigError("checkpoint", f"file not found: {path}")
    return SpanModel.load(path, embeddings, model_digest(cfg.train.head, cfg.encoder))


def _support_index(cfg: RunConfig, model: SpanModel, k: int | None = None) -> SupportIndex:
    return SupportIndex(model, _corpus(cfg, "train", "train"), k or cfg.train.k)


def _write_tsv(path: Path, rows: list[dict], columns: list[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, delimiter="\t", lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([f"{r[c]:.2f}" if isinstance(r[c], float) else
                        ",".join(f"{x:.2f}" for x in r[c]) if isinstance(r[c], list) else r[c] for c in columns])
    return path


def _parse_fractions(text: str) -> tuple[float, ...]:
    try:
        fracs = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"--fractions must be comma-separated numbers, got {text!r}") from None
    if not fracs or any(not 0 < f <= 1 for f in fracs):
        raise UsageError("--fractions must be in (0, 1]")
    return fracs


def _parse_heads(text: str) -> tuple[str, ...]:
    heads = tuple(h.strip() for h in text.split(",") if h.strip())
    bad = [h for h in heads if h not in ("classifier", "instance")]
    if not heads or bad:
        raise UsageError(f"--heads takes classifier and/or instance, got {text!r}")
    return heads


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    cfg = _run_config(args)
    train_c, dev_c = _corpus(cfg, "train", "train"), _corpus(cfg, "dev", "dev")
    emb = _embeddings(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    cfg.echo(out)
    report, _ = train(cfg.train, cfg.encoder, train_c, dev_c, emb, cfg.checkpoint_path, out / "report.jsonl")
    summary = {"best_epoch": report.best_epoch, "best_dev_f1": report.best_f1, "checkpoint": str(cfg.checkpoint_path)}
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True) + "\n", encoding="utf-8")
    if not args.no_plot and report.epochs:
        from .plotting import plot_training

        plot_training(report, out / "training_curve.png", f"{cfg.train.head} head")
    print(f"best epoch {report.best_epoch}  dev F1 {report.best_f1:.2f}  checkpoint {cfg.checkpoint_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _run_config(args)
    emb = _embeddings(cfg)
    model = _load_model(cfg, args, emb)
    corpus = _input_corpus(cfg, args)
    index = _support_index(cfg, model, args.k) if model.head == "instance" else None
    preds = predict_corpus(model, corpus, index)
    decoded = decode_corpus(preds, model.labels, cfg.train.decode_mode(cfg.encoder))
    out = Path(args.output) if args.output else cfg.output_dir / "predictions.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    # a nested corpus file, so the output can be scored with eval --gold/--pred
    write_nested(Corpus(tuple(replace(s, gold_spans=tuple(decoded[s.id])) for s in corpus), corpus.split), out)
    if args.span_output:
        write_predictions(args.span_output, preds, model.labels, full=args.full)
    cfg.echo(out.parent)
    print(f"wrote {sum(len(v) for v in decoded.values())} spans for {len(decoded)} sentences to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.gold or args.pred:
        if not (args.gold and args.pred):
            raise UsageError("--gold and --pred must be given together")
        gold_c = load_corpus(args.gold, args.format, "test")
        pred_c = load_corpus(args.pred, args.format, "test")
        metrics = span_f1(gold_of(gold_c), gold_of(pred_c))
    else:
        cfg = _run_config(args)
        emb = _embeddings(cfg)
        model = _load_model(cfg, args, emb)
        corpus = _input_corpus(cfg, args)
        index = _support_index(cfg, model, args.k) if model.head == "instance" else None
        preds = decode_corpus(predict_corpus(model, corpus, index), model.labels, cfg.train.decode_mode(cfg.encoder))
        metrics = span_f1(gold_of(corpus), preds)
    print(metrics)
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(metrics.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def _parse_span(text: str) -> Span:
    try:
        a, b = (int(x) for x in text.replace(":", ",").split(","))
    except ValueError:
        raise UsageError(f"--span must look like A,B (1-based, inclusive), got {text!r}") from None
    return Span(a, b)


def cmd_explain(args) -> int:
    cfg = _run_config(args)
    emb = _embeddings(cfg)
    model = _load_model(cfg, args, emb)
    corpus = _input_corpus(cfg, args)
    if not 0 <= args.sentence < len(corpus):
        raise UsageError(f"--sentence must be in 0..{len(corpus) - 1}")
    sentence = corpus.sentences[args.sentence]
    span = _parse_span(args.span)
    support = _support_index(cfg, model, args.k).support_for(sentence)
    expl = explain(model, sentence, span, support, args.top_k)
    print(render_explanation(expl, model.labels), end="")
    if args.output:
        rec = {
            "sentence": expl.sentence_id,
            "span": [span.a, span.b],
            "text": expl.text,
            "predicted": expl.predicted,
            "distribution": {model.labels.name(i): float(p) for i, p in enumerate(expl.distribution)},
            "neighbors": [
                {"rank": n.rank, "sentence": n.sentence_id, "span": [n.span.a, n.span.b], "label": n.label,
                 "probability": n.probability, "score": n.score, "context": n.context}
                for n in expl.neighbors
            ],
        }
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(json.dumps(rec, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


_ABLATION_COLUMNS = ["head", "fraction", "train_sentences", "f1_mean", "f1_std", "f1_runs"]


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    fractions, heads = _parse_fractions(args.fractions), _parse_heads(args.heads)
    train_c, dev_c = _corpus(cfg, "train", "train"), _corpus(cfg, "dev", "dev")
    emb = _embeddings(cfg)
    rows = size_ablation(train_c, dev_c, emb, cfg.train, cfg.encoder, fractions, args.runs, heads)
    out = cfg.output_dir
    cfg.echo(out)
    _write_tsv(out / "ablation.tsv", rows, _ABLATION_COLUMNS)
    write_records(out / "ablation.jsonl", rows)
    if not args.no_plot:
        from .plotting import plot_ablation

        plot_ablation(rows, out / "ablation.png")
    print(format_table(rows, _ABLATION_COLUMNS), end="")
    return EXIT_OK


_COMPARE_COLUMNS = ["dataset", "head", "runs", "f1_mean", "f1_std", "f1_runs"]


def cmd_compare(args) -> int:
    cfg = _run_config(args)
    heads = _parse_heads(args.heads)
    train_c, dev_c, test_c = (_corpus(cfg, k, k) for k in ("train", "dev", "test"))
    emb = _embeddings(cfg)
    results = compare_heads(train_c, dev_c, test_c, emb, cfg.train, cfg.encoder, args.runs, args.dataset, heads)
    rows = [r.row() for r in results]
    out = cfg.output_dir
    cfg.echo(out)
    _write_tsv(out / "compare.tsv", rows, _COMPARE_COLUMNS)
    write_records(out / "compare.jsonl", rows)
    if not args.no_plot:
        from .plotting import plot_comparison

        plot_comparison(results, out / "compare.png")
    print(format_table(rows, _COMPARE_COLUMNS), end="")
    return EXIT_OK


def cmd_dump_features(args) -> int:
    cfg = _run_config(args)
    emb = _embeddings(cfg)
    model = _load_model(cfg, args, emb)
    corpus = _input_corpus(cfg, args, args.split)
    out = Path(args.output) if args.output else cfg.output_dir / f"features.{args.split}.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    n = dump_features(model, corpus, out)
    print(f"wrote {n} span vectors to {out}")
    return EXIT_OK


_STARTER = """\
[data]
task = {task}
train = {train}
dev = {dev}
test = {test}
embeddings = embeddings.txt

[encoder]
word_dim = {dim}
char_dim = 16
char_filters = 16
lstm_hidden = 32
span_dim = 32

[train]
epochs = 40
seed = 0

[output]
dir = run
"""


def cmd_gen_synthetic(args) -> int:
    if min(args.train, args.dev, args.test) < 1:
        raise UsageError("--train, --dev and --test must be positive")
    if not 0 <= args.unseen_rate <= 1:
        raise UsageError("--unseen-rate must be in [0, 1]")
    data = generate(args.kind, args.train, args.dev, args.test, args.seed, args.dim, args.unseen_rate)
    paths = write_synthetic(data, args.out)
    names = {k: Path(v).name for k, v in paths.items()}
    task = "flat-ner" if args.kind == "flat" else "nested-ner"
    cfg_path = Path(args.out) / "config.ini"
    cfg_path.write_text(_STARTER.format(task=task, dim=args.dim, **names), encoding="utf-8")
    print(f"wrote {args.kind} corpus ({args.train}/{args.dev}/{args.test} sentences) and {cfg_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_config_flags(p):
    p.add_argument("--config", "-c", metavar="FILE", help="INI run configuration ([data], [encoder], [train], [output])")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override one config value, e.g. train.epochs=20 (repeatable)")
    p.add_argument("--seed", type=int, help="override train.seed")
    p.add_argument("--out", metavar="DIR", help="run directory for outputs and the default checkpoint (overrides output.dir)")


def _add_model_flags(p, with_input=True):
    p.add_argument("--checkpoint", metavar="FILE", help="model checkpoint (default: output.checkpoint or <output.dir>/model.ckpt)")
    if with_input:
        p.add_argument("--input", metavar="FILE", help="corpus to process (default: data.test)")
    p.add_argument("--k", type=int, help="support sentences retrieved per query for the instance head (default: train.k)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spannca", description="Instance-based and classifier-based span models for NER and chunking.")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress (per-epoch metrics) to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("train", help="train one head; keep the best-dev checkpoint")
    _add_config_flags(p)
    p.add_argument("--no-plot", action="store_true", help="skip the training-curve figure")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label every sentence of a corpus and write decoded spans")
    _add_config_flags(p)
    _add_model_flags(p)
    p.add_argument("--output", "-o", metavar="FILE", help="decoded spans as JSON lines (default: <output.dir>/predictions.jsonl)")
    p.add_argument("--span-output", metavar="FILE", help="also write one record (argmax label, probability) per enumerated span")
    p.add_argument("--full", action="store_true", help="with --span-output: add the full label distribution to each record")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="span-level precision, recall and F1")
    _add_config_flags(p)
    _add_model_flags(p)
    p.add_argument("--gold", metavar="FILE", help="gold corpus; with --pred, score two files without a model")
    p.add_argument("--pred", metavar="FILE", help="predicted corpus in the same format as --gold")
    p.add_argument("--format", choices=("auto", "bio", "nested"), default="auto", help="format of --gold/--pred files")
    p.add_argument("--output", "-o", metavar="FILE", help="write metrics as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="show the nearest training spans behind one prediction")
    _add_config_flags(p)
    _add_model_flags(p)
    p.add_argument("--sentence", type=int, required=True, help="0-based sentence index within the input corpus")
    p.add_argument("--span", required=True, metavar="A,B", help="query span, 1-based inclusive token indices")
    p.add_argument("--top-k", type=int, default=5, help="number of neighbors to print (default: 5)")
    p.add_argument("--output", "-o", metavar="FILE", help="also write the explanation as JSON")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("ablate", help="dev F1 for both heads across training-set fractions")
    _add_config_flags(p)
    p.add_argument("--fractions", default="1,0.5,0.25,0.125", help="comma-separated fractions in (0, 1] (default: 1,0.5,0.25,0.125)")
    p.add_argument("--runs", type=int, default=1, help="seeds per cell, seed..seed+runs-1 (default: 1)")
    p.add_argument("--heads", default="classifier,instance", help="comma-separated heads (default: classifier,instance)")
    p.add_argument("--no-plot", action="store_true", help="skip the ablation figure")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("compare", help="test F1 of both heads over several seeds")
    _add_config_flags(p)
    p.add_argument("--runs", type=int, default=3, help="seeds per head (default: 3)")
    p.add_argument("--heads", default="classifier,instance", help="comma-separated heads (default: classifier,instance)")
    p.add_argument("--dataset", default="data", help="dataset name for the report rows (default: data)")
    p.add_argument("--no-plot", action="store_true", help="skip the comparison figure")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dump-features", help="write span representations of gold spans")
    _add_config_flags(p)
    _add_model_flags(p)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test", help="config split to dump when --input is absent (default: test)")
    p.add_argument("--output", "-o", metavar="FILE", help="JSON lines output (default: <output.dir>/features.<split>.jsonl)")
    p.set_defaults(func=cmd_dump_features)

    p = sub.add_parser("gen-synthetic", help="write a synthetic corpus, word vectors and a starter config")
    p.add_argument("--kind", choices=("flat", "nested"), default="flat", help="flat (BIO) or nested (JSON lines) entities")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--train", type=int, default=200, help="training sentences (default: 200)")
    p.add_argument("--dev", type=int, default=100, help="development sentences (default: 100)")
    p.add_argument("--test", type=int, default=100, help="test sentences (default: 100)")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default: 0)")
    p.add_argument("--dim", type=int, default=50, help="word vector dimension (default: 50)")
    p.add_argument("--unseen-rate", type=float, default=0.3, help="share of dev/test sentences using held-out names (default: 0.3)")
    p.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"spannca {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SpanNCAError, OSError, ValueError, RuntimeError) as e:
        print(f"spannca {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
