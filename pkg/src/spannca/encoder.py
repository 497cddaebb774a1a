"""Token encoder (frozen word vectors + char-CNN), stacked BiLSTM, and
LSTM-minus span features projected to span representations."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import numcore as nc
from .corpus import CharVocab, EmbeddingTable, Sentence, Span
from .errors import ShapeMismatch


@dataclass(frozen=True)
class EncoderConfig:
    word_dim: int = 100
    char_dim: int = 30
    char_filters: int = 30
    char_window: int = 3
    lstm_layers: int = 2
    lstm_hidden: int = 100
    span_dim: int = 256
    max_span_width: int = 6
    mode: str = "flat"

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name != "mode" and value <= 0:
                raise ValueError(f"EncoderConfig.{name} must be positive")
        if self.mode not in ("flat", "nested"):
            raise ValueError("EncoderConfig.mode must be 'flat' or 'nested'")

    @property
    def feature_parts(self) -> int:
        return 2 if self.mode == "flat" else 4

    @property
    def feature_dim(self) -> int:
        return self.feature_parts * self.lstm_hidden


@dataclass
class ContextStates:
    """Top-layer BiLSTM states for a padded batch.

    ``forward`` and ``backward`` are (B, T_max, H) tensors; positions past a
    sentence's length hold padding values that are never read.  The virtual
    boundary states h_0 (forward) and h_{T+1} (backward) are zero.
    """

    forward: nc.Tensor
    backward: nc.Tensor
    lengths: tuple[int, ...]

    @property
    def hidden(self) -> int:
        return self.forward.shape[2]


@dataclass(frozen=True)
class SpanRefs:
    """Flat arrays addressing spans inside a batch: sentence slot, a, b (1-based)."""

    sent: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def build(cls, spans_per_sentence: Sequence[Sequence[Span]]) -> "SpanRefs":
        sent, a, b = [], [], []
        for i, spans in enumerate(spans_per_sentence):
            for s in spans:
                sent.append(i)
                a.append(s.a)
                b.append(s.b)
        as_arr = lambda x: np.asarray(x, dtype=np.intp)  # noqa: E731
        return cls(as_arr(sent), as_arr(a), as_arr(b))

    def __len__(self) -> int:
        return len(self.sent)


class Encoder:
    """Owns the encoder parameters and the frozen token resources."""

    def __init__(
        self,
        config: EncoderConfig,
        char_vocab: CharVocab,
        embeddings: EmbeddingTable,
        rng,
        dropout: float = 0.0,
    ):
        if embeddings.dim != config.word_dim:
            raise ShapeMismatch(f"embedding dim {embeddings.dim} != word_dim {config.word_dim}")
        self.config = config
        self.char_vocab = char_vocab
        self.embeddings = embeddings
        self.dropout = dropout
        self._word_cache: dict[tuple[str, ...], np.ndarray] = {}
        self._char_cache: dict[tuple[str, ...], list[list[int]]] = {}
        c = config
        H = c.lstm_hidden
        p = {}
        p["char_emb"] = nc.init_glorot((len(char_vocab), c.char_dim), rng)
        p["char_conv_w"] = nc.init_glorot((c.char_window * c.char_dim, c.char_filters), rng)
        p["char_conv_b"] = np.zeros(c.char_filters)
        in_dim = c.word_dim + c.char_filters
        for layer in range(c.lstm_layers):
            for d in ("fw", "bw"):
                key = f"lstm{layer}_{d}"
                p[f"{key}_wx"] = np.concatenate(
                    [nc.init_orthonormal((in_dim, H), rng) for _ in range(4)], axis=1
                )
                p[f"{key}_wh"] = np.concatenate(
                    [nc.init_orthonormal((H, H), rng) for _ in range(4)], axis=1
                )
                p[f"{key}_b"] = np.zeros(4 * H)
            in_dim = 2 * H
        p["span_proj"] = nc.init_glorot((c.span_dim, c.feature_dim), rng)
        self.params = {name: nc.Parameter(v, name=name) for name, v in p.items()}

    def parameters(self) -> list[nc.Parameter]:
        return list(self.params.values())

    # -- token inputs -----------------------------------------------------

    def word_matrix(self, tokens: tuple[str, ...]) -> np.ndarray:
        m = self._word_cache.get(tokens)
        if m is None:
            m = self._word_cache[tokens] = self.embeddings.sentence_matrix(tokens)
        return m

    def _char_batch(self, sentences, T):
        """Char ids (B*T, P) with boundary padding, plus the pool mask."""
        window = self.config.char_window
        left = (window - 1) // 2
        words = []
        for s in sentences:
            ids = self._char_cache.get(s.tokens)
            if ids is None:
                ids = self._char_cache[s.tokens] = self.char_vocab.char_ids(s)
            words.extend(ids + [[] for _ in range(T - len(ids))])
        maxlen = max(1, max(len(w) for w in words))
        P = maxlen + window - 1
        chars = np.full((len(words), P), CharVocab.PAD, dtype=np.intp)
        valid = np.zeros((len(words), maxlen), dtype=bool)
        for i, w in enumerate(words):
            chars[i, left : left + len(w)] = w
            valid[i, : max(1, len(w))] = True
        return chars, valid

    def token_encodings(self, sentences: Sequence[Sentence]) -> nc.Tensor:
        """(B, T_max, word_dim + char_filters): frozen word vector ++ char-CNN."""
        c = self.config
        B = len(sentences)
        T = max(len(s) for s in sentences)
        words = np.zeros((B, T, c.word_dim))
        for i, s in enumerate(sentences):
            words[i, : len(s)] = self.word_matrix(s.tokens)
        chars, valid = self._char_batch(sentences, T)
        emb = nc.take_rows(self.params["char_emb"], chars.ravel())
        emb = nc.reshape(emb, chars.shape + (c.char_dim,))
        char_feat = nc.conv1d_maxpool(emb, self.params["char_conv_w"], self.params["char_conv_b"], valid)
        char_feat = nc.reshape(char_feat, (B, T, c.char_filters))
        return nc.concat([nc.Tensor(words), char_feat], axis=2)

    # -- recurrent layers -------------------------------------------------

    @staticmethod
    def _reverse_index(lengths, T):
        """Row permutation of a flattened (B*T) batch reversing each sentence in place."""
        idx = np.arange(len(lengths) * T)
        for i, n in enumerate(lengths):
            idx[i * T : i * T + n] = i * T + np.arange(n - 1, -1, -1)
        return idx

    def encode(self, sentences: Sequence[Sentence], train: bool = False, rng=None) -> ContextStates:
        c = self.config
        lengths = tuple(len(s) for s in sentences)
        B, T = len(sentences), max(lengths)
        rev = self._reverse_index(lengths, T)
        x = self.token_encodings(sentences)
        fw = bw = None
        for layer in range(c.lstm_layers):
            x = nc.dropout(x, self.dropout, train, rng)
            flat = nc.reshape(x, (B * T, x.shape[2]))
            outs = []
            for d in ("fw", "bw"):
                key = f"lstm{layer}_{d}"
                inp = flat if d == "fw" else nc.take_rows(flat, rev)
                proj = inp @ self.params[f"{key}_wx"] + self.params[f"{key}_b"]
                h = nc.lstm_recurrence(nc.reshape(proj, (B, T, 4 * c.lstm_hidden)), self.params[f"{key}_wh"])
                if d == "bw":
                    h = nc.reshape(
                        nc.take_rows(nc.reshape(h, (B * T, c.lstm_hidden)), rev),
                        (B, T, c.lstm_hidden),
                    )
                outs.append(h)
            fw, bw = outs
            x = nc.concat([fw, bw], axis=2)
        return ContextStates(fw, bw, lengths)

    # -- spans ------------------------------------------------------------

    def span_features(self, states: ContextStates, refs: SpanRefs) -> nc.Tensor:
        return span_features(states, refs, self.config.mode)

    def project(self, features: nc.Tensor) -> nc.Tensor:
        return project(features, self.params["span_proj"])

    def span_reprs(self, sentences, spans_per_sentence, train=False, rng=None) -> nc.Tensor:
        states = self.encode(sentences, train, rng)
        refs = SpanRefs.build(spans_per_sentence)
        return self.project(self.span_features(states, refs))


def _flat_with_zero_row(t: nc.Tensor) -> nc.Tensor:
    B, T, H = t.shape
    return nc.concat([nc.reshape(t, (B * T, H)), nc.Tensor(np.zeros((1, H)))], axis=0)


def span_features(states: ContextStates, refs: SpanRefs, mode: str = "flat") -> nc.Tensor:
    """LSTM-minus features for every span in ``refs``: (N, 2H) flat, (N, 4H) nested."""
    B, T, _ = states.forward.shape
    lengths = np.asarray(states.lengths, dtype=np.intp)
    if len(refs) and (
        np.any(refs.a < 1) or np.any(refs.b < refs.a) or np.any(refs.b > lengths[refs.sent])
    ):
        raise ShapeMismatch("span outside its sentence")
    zero = B * T
    base = refs.sent * T
    fwd = _flat_with_zero_row(states.forward)
    bwd = _flat_with_zero_row(states.backward)
    f_b = nc.take_rows(fwd, base + refs.b - 1)
    f_a1 = nc.take_rows(fwd, np.where(refs.a == 1, zero, base + refs.a - 2))
    b_a = nc.take_rows(bwd, base + refs.a - 1)
    b_b1 = nc.take_rows(bwd, np.where(refs.b == lengths[refs.sent], zero, base + refs.b))
    parts = [f_b - f_a1, b_a - b_b1]
    if mode == "nested":
        f_a = nc.take_rows(fwd, base + refs.a - 1)
        b_b = nc.take_rows(bwd, base + refs.b - 1)
        parts += [f_a + f_b, b_a + b_b]
    elif mode != "flat":
        raise ValueError(f"unknown mode {mode!r}")
    return nc.concat(parts, axis=1)


def project(features, weight) -> nc.Tensor:
    """h_s = W h_lstm, row-wise for a (N, F) batch or a single (F,) vector."""
    features, weight = nc.as_tensor(features), nc.as_tensor(weight)
    if features.shape[-1] != weight.shape[1]:
        raise ShapeMismatch(f"projection {weight.shape} cannot take features {features.shape}")
    if features.value.ndim == 1:
        return nc.reshape(nc.reshape(features, (1, -1)) @ nc.transpose(weight), (weight.shape[0],))
    return features @ nc.transpose(weight)


# -- single-sentence conveniences ------------------------------------------


def encode_tokens(sentence: Sentence, encoder: Encoder, train: bool = False, rng=None) -> ContextStates:
    return encoder.encode([sentence], train, rng)


def span_features_flat(states: ContextStates, span: Span) -> nc.Tensor:
    refs = SpanRefs(np.array([0]), np.array([span.a]), np.array([span.b]))
    return nc.reshape(span_features(states, refs, "flat"), (-1,))


def span_features_nested(states: ContextStates, span: Span) -> nc.Tensor:
    refs = SpanRefs(np.array([0]), np.array([span.a]), np.array([span.b]))
    return nc.reshape(span_features(states, refs, "nested"), (-1,))


def states_from_arrays(forward, backward) -> ContextStates:
    """Wrap fixed (T, H) state arrays of one sentence as ContextStates."""
    forward = np.asarray(forward, dtype=np.float64)
    backward = np.asarray(backward, dtype=np.float64)
    return ContextStates(nc.Tensor(forward[None]), nc.Tensor(backward[None]), (forward.shape[0],))
