"""Training loop shared by the classifier and instance heads."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numcore as nc
from .corpus import CharVocab, Corpus, EmbeddingTable, LabelSet, enumerate_spans
from .encoder import EncoderConfig
from .errors import DivergedLoss, EmptySupport
from .evaluator import Metrics, gold_of, span_f1
from .heads import PROB_FLOOR, classifier_loss, classifier_scores, nca_loss, sample_support
from .inference import SupportIndex, decode_corpus, predict_corpus
from .model import SpanModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    head: str = "instance"
    k: int = 50
    batch_size: int = 8
    epochs: int = 100
    eta0: float = 0.001
    rho: float = 0.05
    clip: float = 5.0
    dropout: float = 0.3
    seed: int = 0
    train_fraction: float = 1.0
    prob_floor: float = PROB_FLOOR
    decoder: str = "auto"

    def __post_init__(self):
        if self.head not in ("classifier", "instance"):
            raise ValueError(f"head must be classifier or instance, got {self.head!r}")
        for name in ("k", "batch_size", "eta0", "clip", "prob_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"TrainConfig.{name} must be positive")
        if self.epochs < 0 or self.rho < 0:
            raise ValueError("epochs and rho must be non-negative")
        if not 0 < self.train_fraction <= 1:
            raise ValueError("train_fraction must be in (0, 1]")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.decoder not in ("auto", "flat", "nested"):
            raise ValueError("decoder must be auto, flat or nested")

    def decode_mode(self, encoder_config: EncoderConfig) -> str:
        return encoder_config.mode if self.decoder == "auto" else self.decoder


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    best_epoch: int | None = None
    best_f1: float = 0.0
    checkpoint: str | None = None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.epochs)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_jsonl())

    @property
    def losses(self) -> list[float]:
        return [rec["loss"] for rec in self.epochs]


def subsample_training(corpus: Corpus, fraction: float, seed: int) -> Corpus:
    """Uniform sentence subsample without replacement, original order kept."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1:
        return corpus
    n = max(1, int(round(fraction * len(corpus))))
    rng = np.random.default_rng([seed, 7919])
    keep = np.sort(rng.choice(len(corpus), size=n, replace=False))
    return Corpus(tuple(corpus.sentences[i] for i in keep), corpus.split)


def make_batches(sentences, batch_size: int, rng) -> list[list[int]]:
    """Length-bucketed batches of sentence indices in shuffled order."""
    lengths = np.array([len(s) for s in sentences])
    order = np.lexsort((rng.random(len(sentences)), lengths))
    batches = [order[i : i + batch_size].tolist() for i in range(0, len(order), batch_size)]
    return [batches[i] for i in rng.permutation(len(batches))]


def evaluate(model: SpanModel, corpus: Corpus, train: Corpus, k: int = 50, decoder: str = "auto") -> Metrics:
    """Span F1 using the test-time inference path (nearest-sentence support)."""
    mode = model.config.mode if decoder == "auto" else decoder
    index = SupportIndex(model, train, k) if model.head == "instance" else None
    preds = predict_corpus(model, corpus, index)
    return span_f1(gold_of(corpus), decode_corpus(preds, model.labels, mode))


def _gold_ids(sentences, labels: LabelSet, max_width: int):
    spans, gold = [], []
    for s in sentences:
        sp = enumerate_spans(s, max_width)
        m = s.gold_label_map()
        spans.append(sp)
        gold.append(np.array([labels.id(m[x]) if x in m else labels.null_id for x in sp], dtype=np.intp))
    return spans, gold


def build_model(config: TrainConfig, encoder_config: EncoderConfig, train: Corpus, dev: Corpus,
                embeddings: EmbeddingTable, rng) -> SpanModel:
    labels = LabelSet.from_corpora(train, dev)
    return SpanModel(config.head, encoder_config, labels, CharVocab.build(train), embeddings, rng, config.dropout)


def train(
    config: TrainConfig,
    encoder_config: EncoderConfig,
    train_corpus: Corpus,
    dev_corpus: Corpus,
    embeddings: EmbeddingTable,
    checkpoint_path=None,
    report_path=None,
) -> tuple[TrainReport, SpanModel]:
    """Fit one head; keep the parameters with the best dev F1.

    Returns the report and the model holding the best parameters.
    """
    if len(train_corpus) == 0 or len(dev_corpus) == 0:
        raise ValueError("train and dev corpora must be non-empty")
    train_corpus = subsample_training(train_corpus, config.train_fraction, config.seed)
    if config.head == "instance" and len(train_corpus) <= config.batch_size:
        # every batch would swallow the whole training set and leave no support
        raise EmptySupport(
            f"instance head needs more training sentences ({len(train_corpus)}) than batch_size ({config.batch_size})"
        )
    init_ss, shuffle_ss, drop_ss, support_ss = np.random.SeedSequence(config.seed).spawn(4)
    model = build_model(config, encoder_config, train_corpus, dev_corpus, embeddings, np.random.default_rng(init_ss))
    shuffle_rng = np.random.default_rng(shuffle_ss)
    drop_rng = np.random.default_rng(drop_ss)
    support_rng = np.random.default_rng(support_ss)

    params = model.parameters()
    state = nc.AdamState()
    sentences = train_corpus.sentences
    L = encoder_config.max_span_width
    spans, gold = _gold_ids(sentences, model.labels, L)
    decoder = config.decode_mode(encoder_config)

    report = TrainReport()
    best_state = model.state_arrays()
    for epoch in range(config.epochs):
        lr = nc.lr_schedule(epoch, config.eta0, config.rho)
        total = 0.0
        for batch in make_batches(sentences, config.batch_size, shuffle_rng):
            for p in params:
                p.zero_grad()
            batch_sents = [sentences[i] for i in batch]
            batch_spans = [spans[i] for i in batch]
            batch_gold = np.concatenate([gold[i] for i in batch])
            if config.head == "instance":
                batch_ids = {s.id for s in batch_sents}
                support = sample_support(train_corpus, config.k, batch_ids, support_rng, model.labels, L)
                assert batch_ids.isdisjoint(support.sentence_ids)
                reprs = model.span_reprs(
                    batch_sents + list(support.sentences),
                    batch_spans + support.spans_per_sentence,
                    train=True,
                    rng=drop_rng,
                )
                nq = len(batch_gold)
                loss = nca_loss(reprs[:nq], batch_gold, reprs[nq:], support.labels, config.prob_floor)
            else:
                reprs = model.span_reprs(batch_sents, batch_spans, train=True, rng=drop_rng)
                loss = classifier_loss(classifier_scores(reprs, model.label_weights), batch_gold)
            value = float(loss.value)
            if not math.isfinite(value):
                raise DivergedLoss(f"loss became {value} at epoch {epoch}, batch {batch}")
            nc.backward(loss)
            nc.clip_global_norm([p.grad for p in params], config.clip)
            nc.adam_step(params, state, lr)
            total += value
        metrics = evaluate(model, dev_corpus, train_corpus, config.k, decoder)
        rec = {"epoch": epoch, "loss": total, "lr": lr, **{f"dev_{k}": v for k, v in metrics.to_dict().items()}}
        report.epochs.append(rec)
        logger.info("epoch %d loss %.4f lr %.6f dev %s", epoch, total, lr, metrics)
        if report.best_epoch is None or metrics.f1 > report.best_f1:
            report.best_epoch, report.best_f1 = epoch, metrics.f1
            best_state = model.state_arrays()

    model.load_arrays(best_state)
    if checkpoint_path is not None:
        model.save(checkpoint_path, {"train_config": asdict(config)})
        report.checkpoint = str(checkpoint_path)
    if report_path is not None:
        report.write(report_path)
    return report, model
