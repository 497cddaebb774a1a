"""Classification heads over span representations.

The classifier head scores each non-NULL label with a weight vector and pins
the NULL score at 0.  The instance head labels a span by a softmax over inner
products with support spans, summed per label.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from . import numcore as nc
from .corpus import Corpus, LabelSet, Sentence, Span, enumerate_spans
from .errors import EmptySupport, ShapeMismatch

PROB_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Classifier head


def classifier_scores(h, weight) -> nc.Tensor:
    """(N, |Y|) scores: column 0 (NULL) is 0, column y is w_y . h_s."""
    h, weight = nc.as_tensor(h), nc.as_tensor(weight)
    single = h.value.ndim == 1
    if single:
        h = nc.reshape(h, (1, -1))
    if h.shape[1] != weight.shape[1]:
        raise ShapeMismatch(f"span dim {h.shape[1]} vs label weights {weight.shape}")
    scores = nc.concat([nc.Tensor(np.zeros((h.shape[0], 1))), h @ nc.transpose(weight)], axis=1)
    return nc.reshape(scores, (-1,)) if single else scores


def classifier_loss(scores, gold) -> nc.Tensor:
    """Summed negative log-likelihood of the gold label ids."""
    return nc.neg(nc.sum(nc.pick(nc.log_softmax(scores, axis=1), gold)))


def softmax_np(scores: np.ndarray, axis=-1) -> np.ndarray:
    e = np.exp(scores - scores.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# Support sets


@dataclass(frozen=True)
class SupportEntry:
    sentence_id: int
    span: Span
    label: int
    split: str = "train"


@lru_cache(maxsize=None)
def span_labels(sentence: Sentence, labels: LabelSet, max_width: int) -> tuple[tuple[Span, ...], np.ndarray]:
    """Enumerated spans of a sentence with their gold label ids (NULL default)."""
    spans = tuple(enumerate_spans(sentence, max_width))
    gold = sentence.gold_label_map()
    ids = np.array([labels.id(gold[s]) if s in gold else labels.null_id for s in spans], dtype=np.intp)
    ids.flags.writeable = False
    return spans, ids


@dataclass
class SupportSet:
    """Candidate neighbor spans with provenance.

    Spans are grouped per source sentence; ``labels`` and the rows of
    ``reprs`` follow the flattened sentence-major order of ``entries``.
    """

    sentences: tuple[Sentence, ...]
    spans_per_sentence: list
    labels: np.ndarray
    split: str = "train"
    reprs: np.ndarray | None = None

    @property
    def sentence_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.sentences)

    @cached_property
    def entries(self) -> list[SupportEntry]:
        out = []
        flat = iter(self.labels.tolist())
        for sent, spans in zip(self.sentences, self.spans_per_sentence):
            out.extend(SupportEntry(sent.id, s, next(flat), self.split) for s in spans)
        return out

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_sentences(cls, sentences: Sequence[Sentence], labels: LabelSet, max_width: int, split="train"):
        spans, ids = [], []
        for sent in sentences:
            sp, lab = span_labels(sent, labels, max_width)
            spans.append(list(sp))
            ids.append(lab)
        flat = np.concatenate(ids) if ids else np.zeros(0, dtype=np.intp)
        return cls(tuple(sentences), spans, flat, split)


def sample_support(
    corpus: Corpus,
    k: int,
    exclude,
    rng,
    labels: LabelSet,
    max_width: int = 6,
) -> SupportSet:
    """Uniformly draw min(k, eligible) sentences without replacement."""
    exclude = set(exclude)
    eligible = [s for s in corpus if s.id not in exclude]
    if not eligible:
        raise EmptySupport("no training sentence is eligible for the support set")
    n = min(k, len(eligible))
    picks = rng.choice(len(eligible), size=n, replace=False)
    return SupportSet.from_sentences([eligible[i] for i in picks], labels, max_width, corpus.split)


# ---------------------------------------------------------------------------
# Instance head


def neighbor_log_probs(h_query, h_support) -> nc.Tensor:
    """log P(s_j | s_i) for every query row i and support row j."""
    h_query, h_support = nc.as_tensor(h_query), nc.as_tensor(h_support)
    if h_support.shape[0] == 0:
        raise EmptySupport("support set is empty")
    return nc.log_softmax(h_query @ nc.transpose(h_support), axis=1)


def neighbor_probs(h_query, h_support) -> np.ndarray:
    """Softmax of inner products; a 1-D query gives a 1-D result."""
    q = np.asarray(h_query, dtype=np.float64)
    s = np.asarray(h_support, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] == 0:
        raise EmptySupport("support set is empty")
    single = q.ndim == 1
    scores = np.atleast_2d(q) @ s.T
    probs = softmax_np(scores, axis=1)
    return probs[0] if single else probs


def marginal_label_probs(probs, support_labels, n_labels: int) -> np.ndarray:
    """Sum neighbor probabilities by the label of each support span."""
    probs = np.asarray(probs, dtype=np.float64)
    support_labels = np.asarray(support_labels, dtype=np.intp)
    if probs.shape[-1] != len(support_labels):
        raise ShapeMismatch(f"{probs.shape[-1]} probabilities for {len(support_labels)} support spans")
    onehot = np.zeros((len(support_labels), n_labels))
    onehot[np.arange(len(support_labels)), support_labels] = 1.0
    return probs @ onehot


def nca_loss(h_query, gold, h_support, support_labels, floor: float = PROB_FLOOR) -> nc.Tensor:
    """-sum_i log max(P(y_i | s_i), floor), computed in log space."""
    h_query, h_support = nc.as_tensor(h_query), nc.as_tensor(h_support)
    if h_support.shape[0] == 0:
        raise EmptySupport("support set is empty")
    gold = np.asarray(gold, dtype=np.intp)
    support_labels = np.asarray(support_labels, dtype=np.intp)
    scores = h_query @ nc.transpose(h_support)
    same = gold[:, None] == support_labels[None, :]
    log_p = nc.masked_logsumexp(scores, same) - nc.reshape(nc.logsumexp(scores, axis=1), (-1,))
    return nc.neg(nc.sum(nc.clamp_min(log_p, np.log(floor))))


def predict_label(dist) -> int:
    """Argmax over labels; ties go to the smallest label id."""
    return int(np.argmax(np.asarray(dist)))
