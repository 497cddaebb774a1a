"""Corpus ingestion: BIO and nested-span readers, span enumeration,
character vocabularies, and frozen word embeddings.

Span indices are 1-based and inclusive throughout, so ``Span(1, 2)`` covers
the first two tokens of a sentence.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimMismatch,
    DuplicateSpan,
    InvalidTag,
    InvalidTransition,
    MalformedLine,
    SpanOutOfRange,
    CorpusError,
)

logger = logging.getLogger(__name__)

NULL = "NULL"
DOCSTART = "-DOCSTART-"
_TAG_RE = re.compile(r"^(O|([BI])-(.+))$")


@dataclass(frozen=True, order=True)
class Span:
    a: int
    b: int

    @property
    def width(self) -> int:
        return self.b - self.a + 1

    def overlaps(self, other: "Span") -> bool:
        return self.a <= other.b and other.a <= self.b

    def contains(self, other: "Span") -> bool:
        """True when ``other`` lies inside this span and is not equal to it."""
        return self.a <= other.a and other.b <= self.b and self != other


@dataclass(frozen=True, order=True)
class LabeledSpan:
    span: Span
    label: str

    @property
    def a(self) -> int:
        return self.span.a

    @property
    def b(self) -> int:
        return self.span.b

    @classmethod
    def of(cls, a: int, b: int, label: str) -> "LabeledSpan":
        return cls(Span(a, b), label)

    def as_tuple(self) -> tuple[int, int, str]:
        return (self.span.a, self.span.b, self.label)


@dataclass(frozen=True)
class Sentence:
    id: int
    tokens: tuple[str, ...]
    gold_spans: tuple[LabeledSpan, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "gold_spans", tuple(sorted(self.gold_spans)))
        if not self.tokens:
            raise CorpusError(f"sentence {self.id} has no tokens")
        seen: dict[Span, str] = {}
        for ls in self.gold_spans:
            if not 1 <= ls.a <= ls.b <= len(self.tokens):
                raise SpanOutOfRange(
                    f"sentence {self.id}: span ({ls.a},{ls.b}) outside 1..{len(self.tokens)}"
                )
            if seen.get(ls.span, ls.label) != ls.label:
                raise CorpusError(
                    f"sentence {self.id}: span ({ls.a},{ls.b}) has labels "
                    f"{seen[ls.span]} and {ls.label}"
                )
            seen[ls.span] = ls.label

    def __len__(self) -> int:
        return len(self.tokens)

    def text(self, span: Span) -> str:
        return " ".join(self.tokens[span.a - 1 : span.b])

    def gold_label_map(self) -> dict[Span, str]:
        return {ls.span: ls.label for ls in self.gold_spans}


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]
    split: str = "train"

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if self.split not in ("train", "dev", "test"):
            raise CorpusError(f"unknown split {self.split!r}")
        ids = [s.id for s in self.sentences]
        if len(set(ids)) != len(ids):
            raise CorpusError("sentence ids must be unique within a corpus")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def by_id(self) -> dict[int, Sentence]:
        return {s.id: s for s in self.sentences}

    def labels(self) -> set[str]:
        return {ls.label for s in self.sentences for ls in s.gold_spans}

    def with_split(self, split: str) -> "Corpus":
        return Corpus(self.sentences, split)


@dataclass(frozen=True)
class LabelSet:
    """Dense label ids with NULL pinned to id 0."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels or labels[0] != NULL or labels.count(NULL) != 1:
            raise CorpusError("LabelSet must start with a single NULL label")
        if len(set(labels)) != len(labels):
            raise CorpusError("duplicate label names")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_corpora(cls, *corpora: Corpus) -> "LabelSet":
        names = set()
        for corpus in corpora:
            names |= corpus.labels()
        names.discard(NULL)
        return cls((NULL,) + tuple(sorted(names)))

    @property
    def null_id(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self.labels)

    def id(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise CorpusError(f"unknown label {name!r}") from None

    def name(self, idx: int) -> str:
        return self.labels[idx]


# ---------------------------------------------------------------------------
# BIO tags


def _split_tag(tag: str) -> tuple[str, str | None]:
    m = _TAG_RE.match(tag)
    if m is None:
        raise InvalidTag(f"tag {tag!r} does not match O / B-X / I-X")
    if m.group(1) == "O":
        return "O", None
    return m.group(2), m.group(3)


def detect_scheme(tag_sequences: Iterable[Sequence[str]]) -> str:
    """Return ``"iob1"`` if any I-X opens an entity, else ``"iob2"``."""
    for tags in tag_sequences:
        prev_type = None
        for tag in tags:
            prefix, etype = _split_tag(tag)
            if prefix == "I" and etype != prev_type:
                return "iob1"
            prev_type = etype
    return "iob2"


def spans_from_tags(tags: Sequence[str], scheme: str = "auto") -> list[LabeledSpan]:
    """Segment a tag sequence into maximal labeled spans.

    ``iob2`` is strict: an I-X that does not continue an X entity raises
    InvalidTransition. ``iob1`` and ``auto`` let such an I-X open a new entity.
    """
    if scheme not in ("iob1", "iob2", "auto"):
        raise ValueError(f"unknown scheme {scheme!r}")
    spans = []
    start, cur = None, None
    for i, tag in enumerate(tags, start=1):
        prefix, etype = _split_tag(tag)
        continues = prefix == "I" and etype == cur
        if prefix == "I" and not continues and scheme == "iob2":
            raise InvalidTransition(f"I-{etype} at position {i} does not continue an entity")
        if cur is not None and not continues:
            spans.append(LabeledSpan.of(start, i - 1, cur))
            cur = None
        if prefix != "O" and not continues:
            start, cur = i, etype
    if cur is not None:
        spans.append(LabeledSpan.of(start, len(tags), cur))
    return sorted(spans)


def tags_from_spans(spans: Iterable[LabeledSpan], length: int) -> list[str]:
    """Render non-overlapping spans as IOB2 tags."""
    tags = ["O"] * length
    for ls in spans:
        if any(t != "O" for t in tags[ls.a - 1 : ls.b]):
            raise CorpusError("tags_from_spans requires non-overlapping spans")
        tags[ls.a - 1] = f"B-{ls.label}"
        for i in range(ls.a, ls.b):
            tags[i] = f"I-{ls.label}"
    return tags


def _read_bio_blocks(path):
    blocks, tokens, tags = [], [], []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                if tokens:
                    blocks.append((tokens, tags))
                    tokens, tags = [], []
                continue
            cols = line.split()
            if cols[0] == DOCSTART:
                continue
            if len(cols) < 2:
                raise MalformedLine(f"{path}:{lineno}: expected at least 2 columns, got {len(cols)}")
            tokens.append(cols[0])
            tags.append(cols[-1])
    if tokens:
        blocks.append((tokens, tags))
    return blocks


def parse_bio(path, scheme: str = "auto", split: str = "train") -> Corpus:
    """Read a CoNLL-style column file (token first, tag last)."""
    blocks = _read_bio_blocks(path)
    if scheme == "auto":
        scheme = detect_scheme(tags for _, tags in blocks)
    sentences = [
        Sentence(i, tuple(tokens), tuple(spans_from_tags(tags, scheme)))
        for i, (tokens, tags) in enumerate(blocks)
    ]
    return Corpus(tuple(sentences), split)


def write_bio(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sent in corpus:
            for tok, tag in zip(sent.tokens, tags_from_spans(sent.gold_spans, len(sent))):
                f.write(f"{tok} {tag}\n")
            f.write("\n")


# ---------------------------------------------------------------------------
# Nested span records: {"id": int, "tokens": [...], "spans": [[a, b, label], ...]}


def parse_nested(path, split: str = "train") -> Corpus:
    sentences = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                tokens = rec["tokens"]
                triples = rec.get("spans", [])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise MalformedLine(f"{path}:{lineno}: {exc}") from None
            T = len(tokens)
            seen = set()
            spans = []
            for triple in triples:
                if len(triple) != 3:
                    raise MalformedLine(f"{path}:{lineno}: span triple {triple!r}")
                a, b, label = int(triple[0]), int(triple[1]), str(triple[2])
                if not 1 <= a <= b <= T:
                    raise SpanOutOfRange(f"{path}:{lineno}: span ({a},{b}) outside 1..{T}")
                if (a, b, label) in seen:
                    raise DuplicateSpan(f"{path}:{lineno}: duplicate span ({a},{b},{label})")
                seen.add((a, b, label))
                spans.append(LabeledSpan.of(a, b, label))
            sentences.append(Sentence(int(rec.get("id", len(sentences))), tuple(tokens), tuple(spans)))
    return Corpus(tuple(sentences), split)


def write_nested(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sent in corpus:
            rec = {
                "id": sent.id,
                "tokens": list(sent.tokens),
                "spans": [list(ls.as_tuple()) for ls in sent.gold_spans],
            }
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_corpus(path, fmt: str = "auto", split: str = "train") -> Corpus:
    """Dispatch on format; ``auto`` picks nested for ``.jsonl``/``.json`` files."""
    if fmt == "auto":
        fmt = "nested" if Path(path).suffix in (".jsonl", ".json") else "bio"
    if fmt == "nested":
        return parse_nested(path, split)
    if fmt == "bio":
        return parse_bio(path, split=split)
    raise ValueError(f"unknown corpus format {fmt!r}")


# ---------------------------------------------------------------------------
# Spans


def enumerate_span_pairs(length: int, max_width: int) -> list[Span]:
    if max_width < 1:
        raise ValueError("max_width must be >= 1")
    return [
        Span(a, b)
        for a in range(1, length + 1)
        for b in range(a, min(length, a + max_width - 1) + 1)
    ]


def enumerate_spans(sentence: Sentence, max_width: int) -> list[Span]:
    """All spans (a, b) with b - a < max_width, in lexicographic order."""
    return enumerate_span_pairs(len(sentence), max_width)


def span_count(length: int, max_width: int) -> int:
    w = min(length, max_width)
    return length * w - w * (w - 1) // 2


# ---------------------------------------------------------------------------
# Characters and embeddings


@dataclass(frozen=True)
class CharVocab:
    """Character ids built from the training split; 0 is padding, 1 unknown."""

    chars: tuple[str, ...]
    PAD = 0
    UNK = 1

    @classmethod
    def build(cls, corpus: Corpus) -> "CharVocab":
        chars = sorted({c for s in corpus for tok in s.tokens for c in tok})
        return cls(tuple(chars))

    def __len__(self) -> int:
        return len(self.chars) + 2

    def _index(self):
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {c: i + 2 for i, c in enumerate(self.chars)}
            object.__setattr__(self, "_idx", idx)
        return idx

    def encode(self, token: str) -> list[int]:
        idx = self._index()
        return [idx.get(c, self.UNK) for c in token]

    def char_ids(self, sentence: Sentence) -> list[list[int]]:
        return [self.encode(tok) for tok in sentence.tokens]


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable word vectors with an exact / lowercase / unk lookup chain."""

    dim: int
    words: dict
    matrix: np.ndarray
    unk_vector: np.ndarray
    duplicates: int = 0

    def __post_init__(self):
        self.matrix.flags.writeable = False
        self.unk_vector.flags.writeable = False

    def __contains__(self, word) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)

    def lookup(self, word: str) -> np.ndarray:
        i = self.words.get(word)
        if i is None:
            i = self.words.get(word.lower())
        return self.unk_vector if i is None else self.matrix[i]

    def sentence_matrix(self, tokens: Sequence[str]) -> np.ndarray:
        return np.stack([self.lookup(w) for w in tokens])

    @classmethod
    def from_dict(cls, vectors: dict, dim: int, seed: int = 0) -> "EmbeddingTable":
        words = {w: i for i, w in enumerate(vectors)}
        matrix = np.array([vectors[w] for w in words], dtype=np.float64).reshape(len(words), dim)
        return cls(dim, words, matrix, make_unk_vector(dim, seed))


def make_unk_vector(dim: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.5 / dim, 0.5 / dim, size=dim)


def load_embeddings(path, expected_dim: int, seed: int = 0) -> EmbeddingTable:
    """Parse a GloVe-style text file: ``word v1 ... vD`` per line."""
    words: dict[str, int] = {}
    rows: list[np.ndarray] = []
    duplicates = 0
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            parts = raw.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != expected_dim:
                raise DimMismatch(
                    f"{path}:{lineno}: expected {expected_dim} values, got {len(values)}"
                )
            vec = np.array(values, dtype=np.float64)
            if word in words:
                duplicates += 1
                rows[words[word]] = vec
            else:
                words[word] = len(rows)
                rows.append(vec)
    if duplicates:
        logger.warning("%s: %d duplicate words, last occurrence kept", path, duplicates)
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), expected_dim)
    return EmbeddingTable(expected_dim, words, matrix, make_unk_vector(expected_dim, seed), duplicates)


def write_embeddings(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for word, i in table.words.items():
            f.write(word + " " + " ".join(repr(float(v)) for v in table.matrix[i]) + "\n")


def sentence_vector(sentence: Sentence, table: EmbeddingTable) -> np.ndarray:
    """Average of the token embeddings, unk_vector standing in for OOV words.

    Columns are sorted before summing so that sentences holding the same
    bag of words get bit-identical vectors and tie exactly under cosine.
    """
    return np.sort(table.sentence_matrix(sentence.tokens), axis=0).mean(axis=0)
