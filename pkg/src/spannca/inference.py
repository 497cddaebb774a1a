"""Test-time support retrieval, span prediction, decoding and explanations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus, EmbeddingTable, LabeledSpan, Sentence, Span, enumerate_spans, sentence_vector
from .errors import EmptySupport, SpanOutOfRange
from .heads import SupportSet, classifier_scores, marginal_label_probs, neighbor_probs, softmax_np
from .model import SpanModel

CONTEXT_WINDOW = 5


@dataclass(frozen=True)
class Prediction:
    sentence_id: int
    span: Span
    distribution: np.ndarray
    label: int

    @property
    def probability(self) -> float:
        return float(self.distribution[self.label])


# ---------------------------------------------------------------------------
# Retrieval


def cosine_scores(query: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Cosine of ``query`` against each row; zero-norm vectors score 0."""
    qn = np.linalg.norm(query)
    mn = np.linalg.norm(matrix, axis=1)
    denom = qn * mn
    dots = matrix @ query
    return np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)


def rank_by_cosine(query: np.ndarray, matrix: np.ndarray, ids: Sequence[int]) -> np.ndarray:
    """Row order by descending cosine, ties broken by smaller sentence id."""
    cos = cosine_scores(query, matrix)
    return np.lexsort((np.asarray(ids), -cos))


def retrieve_support_knn(
    query: Sentence,
    train: Corpus,
    k: int,
    table: EmbeddingTable,
    labels,
    max_width: int = 6,
) -> SupportSet:
    """The k training sentences closest to ``query`` by averaged-embedding cosine."""
    if len(train) == 0:
        raise EmptySupport("training corpus is empty")
    vectors = np.stack([sentence_vector(s, table) for s in train])
    order = rank_by_cosine(sentence_vector(query, table), vectors, [s.id for s in train])[:k]
    return SupportSet.from_sentences([train.sentences[i] for i in order], labels, max_width, train.split)


def encode_span_reprs(model: SpanModel, sentences: Sequence[Sentence], batch_size: int = 32):
    """Eval-mode span representations, one (n_spans, d) array per sentence."""
    out = []
    for start in range(0, len(sentences), batch_size):
        chunk = sentences[start : start + batch_size]
        spans = [enumerate_spans(s, model.max_width) for s in chunk]
        reprs = model.span_reprs(chunk, spans).value
        offset = 0
        for sp in spans:
            out.append(reprs[offset : offset + len(sp)])
            offset += len(sp)
    return out


class SupportIndex:
    """Nearest-sentence support retrieval with cached training span reprs.

    The cache must be refreshed (``refresh()``) whenever model weights change.
    """

    def __init__(self, model: SpanModel, train: Corpus, k: int = 50):
        self.model = model
        self.train = train
        self.k = k
        table = model.encoder.embeddings
        self.ids = np.array([s.id for s in train])
        self.vectors = np.stack([sentence_vector(s, table) for s in train]) if len(train) else None
        self._reprs = None
        self._support_sets: dict[int, SupportSet] = {}

    def refresh(self) -> None:
        self._reprs = None

    def _train_reprs(self):
        if self._reprs is None:
            self._reprs = encode_span_reprs(self.model, self.train.sentences)
        return self._reprs

    def neighbors(self, sentence: Sentence) -> np.ndarray:
        """Row indices of the k nearest training sentences."""
        if self.vectors is None:
            raise EmptySupport("training corpus is empty")
        q = sentence_vector(sentence, self.model.encoder.embeddings)
        return rank_by_cosine(q, self.vectors, self.ids)[: self.k]

    def support_for(self, sentence: Sentence) -> SupportSet:
        rows = self.neighbors(sentence)
        reprs = self._train_reprs()
        support = SupportSet.from_sentences(
            [self.train.sentences[i] for i in rows], self.model.labels, self.model.max_width, self.train.split
        )
        support.reprs = np.concatenate([reprs[i] for i in rows], axis=0)
        return support


def attach_reprs(model: SpanModel, support: SupportSet) -> SupportSet:
    if support.reprs is None:
        if not support.entries:
            raise EmptySupport("support set is empty")
        support.reprs = model.span_reprs(support.sentences, support.spans_per_sentence).value
    return support


# ---------------------------------------------------------------------------
# Prediction


def _distributions(model: SpanModel, reprs: np.ndarray, support: SupportSet | None) -> np.ndarray:
    if model.head == "classifier":
        return softmax_np(classifier_scores(reprs, model.label_weights.value).value, axis=1)
    if support is None or len(support) == 0:
        raise EmptySupport("instance head needs a non-empty support set")
    attach_reprs(model, support)
    probs = neighbor_probs(reprs, support.reprs)
    return marginal_label_probs(probs, support.labels, len(model.labels))


def _to_predictions(sentence, spans, dists):
    return [
        Prediction(sentence.id, s, d, int(np.argmax(d))) for s, d in zip(spans, dists)
    ]


def predict_sentence(model: SpanModel, sentence: Sentence, support: SupportSet | None = None) -> list[Prediction]:
    """One Prediction per enumerated span of ``sentence``."""
    spans = enumerate_spans(sentence, model.max_width)
    reprs = model.span_reprs([sentence], [spans]).value
    return _to_predictions(sentence, spans, _distributions(model, reprs, support))


def predict_corpus(model: SpanModel, corpus: Corpus, index: SupportIndex | None = None) -> dict[int, list[Prediction]]:
    """Batched predictions for every sentence, keyed by sentence id."""
    if model.head == "instance" and index is None:
        raise EmptySupport("instance head needs a SupportIndex over the training corpus")
    reprs = encode_span_reprs(model, corpus.sentences)
    out = {}
    for sent, r in zip(corpus.sentences, reprs):
        support = index.support_for(sent) if model.head == "instance" else None
        spans = enumerate_spans(sent, model.max_width)
        out[sent.id] = _to_predictions(sent, spans, _distributions(model, r, support))
    return out


# ---------------------------------------------------------------------------
# Decoding


def decode_flat(predictions: Sequence[Prediction], labels) -> list[LabeledSpan]:
    """Greedy non-overlapping selection by argmax probability."""
    cands = [p for p in predictions if p.label != labels.null_id]
    cands.sort(key=lambda p: (-p.probability, p.span))
    chosen: list[Prediction] = []
    for p in cands:
        if not any(p.span.overlaps(q.span) for q in chosen):
            chosen.append(p)
    return sorted(LabeledSpan(p.span, labels.name(p.label)) for p in chosen)


def decode_nested(predictions: Sequence[Prediction], labels) -> list[LabeledSpan]:
    """Every non-NULL argmax span; nesting and crossing are allowed."""
    return sorted(LabeledSpan(p.span, labels.name(p.label)) for p in predictions if p.label != labels.null_id)


def decode(predictions, labels, mode: str) -> list[LabeledSpan]:
    return decode_flat(predictions, labels) if mode == "flat" else decode_nested(predictions, labels)


def decode_corpus(preds: dict, labels, mode: str) -> dict[int, list[LabeledSpan]]:
    return {sid: decode(p, labels, mode) for sid, p in preds.items()}


def write_predictions(path, preds: dict, labels, full: bool = False) -> None:
    """One JSON record per span: sentence id, span, label, probability."""
    with open(path, "w", encoding="utf-8") as f:
        for sid in sorted(preds):
            for p in preds[sid]:
                rec = {"sentence": sid, "a": p.span.a, "b": p.span.b, "label": labels.name(p.label), "prob": p.probability}
                if full:
                    rec["distribution"] = {labels.name(i): float(v) for i, v in enumerate(p.distribution)}
                f.write(json.dumps(rec) + "\n")


# ---------------------------------------------------------------------------
# Explanations


def context_window(sentence: Sentence, span: Span, width: int = CONTEXT_WINDOW) -> str:
    """``... left [span] right ...`` with ``width`` tokens on each side."""
    lo = max(0, span.a - 1 - width)
    hi = min(len(sentence), span.b + width)
    left = " ".join(sentence.tokens[lo : span.a - 1])
    right = " ".join(sentence.tokens[span.b : hi])
    parts = ["..." if lo > 0 else "", left, f"[{sentence.text(span)}]", right, "..." if hi < len(sentence) else ""]
    return " ".join(p for p in parts if p)


@dataclass
class Neighbor:
    rank: int
    sentence_id: int
    span: Span
    label: str
    score: float
    probability: float
    context: str
    split: str = "train"


@dataclass
class Explanation:
    sentence_id: int
    span: Span
    text: str
    context: str
    predicted: str
    distribution: np.ndarray
    neighbors: list[Neighbor]
    ranking_probs: np.ndarray = field(repr=False)
    ranking_labels: np.ndarray = field(repr=False)

    def label_mass(self, n_labels: int) -> np.ndarray:
        """Full neighbor ranking regrouped by label."""
        return marginal_label_probs(self.ranking_probs, self.ranking_labels, n_labels)


def explain(model: SpanModel, sentence: Sentence, span: Span, support: SupportSet, top_k: int = 5) -> Explanation:
    """Rank support spans by neighbor probability for one query span.

    For the instance head the distribution is the prediction itself; for the
    classifier head neighbors use the same inner-product metric while the
    distribution comes from the label weights.
    """
    if not 1 <= span.a <= span.b <= len(sentence):
        raise SpanOutOfRange(f"span ({span.a},{span.b}) outside 1..{len(sentence)}")
    if support is None or len(support) == 0:
        raise EmptySupport("explanations need a non-empty support set")
    attach_reprs(model, support)
    h = model.span_reprs([sentence], [[span]]).value
    scores = (h @ support.reprs.T)[0]
    probs = neighbor_probs(h[0], support.reprs)
    dist = _distributions(model, h, support)[0]
    order = np.lexsort((np.arange(len(probs)), -probs))
    by_id = {s.id: s for s in support.sentences}
    neighbors = []
    for rank, j in enumerate(order[:top_k], start=1):
        e = support.entries[j]
        neighbors.append(
            Neighbor(
                rank,
                e.sentence_id,
                e.span,
                model.labels.name(e.label),
                float(scores[j]),
                float(probs[j]),
                context_window(by_id[e.sentence_id], e.span),
                e.split,
            )
        )
    return Explanation(
        sentence.id,
        span,
        sentence.text(span),
        context_window(sentence, span),
        model.labels.name(int(np.argmax(dist))),
        dist,
        neighbors,
        probs[order],
        support.labels[order],
    )


def render_explanation(expl: Explanation, labels) -> str:
    lines = [
        f"query     : {expl.context}",
        f"sentence  : {expl.sentence_id}",
        f"span      : ({expl.span.a},{expl.span.b}) {expl.text}",
        f"predicted : {expl.predicted}",
        "distribution: " + " ".join(f"{labels.name(i)}={p:.4f}" for i, p in enumerate(expl.distribution)),
        "rank  label  prob    score     source  context",
    ]
    for n in expl.neighbors:
        lines.append(
            f"{n.rank:<5} {n.label:<6} {n.probability:.4f}  {n.score:>8.3f}  {n.sentence_id:>6}  {n.context}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Feature dump


def dump_features(model: SpanModel, corpus: Corpus, path) -> int:
    """Write one record per gold span: provenance, label and h_s. Returns the count."""
    sentences = [s for s in corpus if s.gold_spans]
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for start in range(0, len(sentences), 32):
            chunk = sentences[start : start + 32]
            spans = [[ls.span for ls in s.gold_spans] for s in chunk]
            reprs = model.span_reprs(chunk, spans).value
            row = 0
            for s in chunk:
                for ls in s.gold_spans:
                    rec = {
                        "sentence": s.id,
                        "split": corpus.split,
                        "a": ls.a,
                        "b": ls.b,
                        "text": s.text(ls.span),
                        "label": ls.label,
                        "vector": [float(v) for v in reprs[row]],
                    }
                    f.write(json.dumps(rec) + "\n")
                    row += 1
                    n += 1
    return n
