"""Hermetic synthetic NER corpora.

Sentences come from a small template grammar whose slots are filled from
generated entity lexicons.  Word vectors are generated alongside: lexicon
words sit near a per-type centroid, everything else is random, which mimics
the coarse type structure of pretrained embeddings.  A share of dev/test
mentions uses names never seen in training.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, EmbeddingTable, LabeledSpan, Sentence, make_unk_vector, write_bio, write_embeddings, write_nested

TEMPLATES = [
    "{PER} visited {LOC} on Monday .",
    "{PER} joined {ORG} last year .",
    "{ORG} opened an office in {LOC} .",
    "talks between {ORG} and {ORG} ended without a deal .",
    "{PER} and {PER} met in {LOC} .",
    "officials in {LOC} praised {PER} .",
    "shares of {ORG} fell sharply on Friday .",
    "{PER} , a spokesman for {ORG} , declined to comment .",
    "The weather in {LOC} was cold .",
    "Yesterday {PER} said the plan was finished .",
    "{LOC} beat {LOC} 2 - 1 in the final .",
    "it was raining all day in the north .",
    "The market closed higher on Tuesday .",
    "{ORG} reported profits of 3 million dollars .",
    "{PER} flew from {LOC} to {LOC} .",
    "according to {ORG} , the project failed .",
    "police in {LOC} arrested {PER} on Sunday .",
    "{PER} will coach {ORG} next season .",
    "Analysts said the outlook remains weak .",
    "{ORG} signed {PER} for two years .",
]

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "gr", "kl"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]
_LOC_SUFFIX = ["ia", "land", "burg", "stan", "ville"]
_FIRST_SUFFIX = ["a", "o", "el", "an"]
_PER_SUFFIX = ["son", "ez", "ski", "er", "ini"]
_ORG_HEADS = ["Corp", "Group", "Industries", "Holdings", "Bank"]
_ORG_NESTED_LOC = ["University of {LOC}", "{LOC} Airlines", "Bank of {LOC}"]
_ORG_NESTED_PER = ["{PER} Foundation", "{PER} Institute"]


@dataclass
class SyntheticData:
    train: Corpus
    dev: Corpus
    test: Corpus
    embeddings: EmbeddingTable
    kind: str


class _Lexicon:
    def __init__(self, rng, n_first=60, n_last=80, n_loc=70, n_org=50, held_out=0.3):
        used = set()

        def word(syllables, suffix=""):
            while True:
                w = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syllables)) + suffix
                w = w.capitalize()
                if w not in used:
                    used.add(w)
                    return w

        self.first = [word(1, str(rng.choice(_FIRST_SUFFIX))) for _ in range(n_first)]
        self.last = [word(2, str(rng.choice(_PER_SUFFIX))) for _ in range(n_last)]
        self.loc = [word(int(rng.integers(1, 3)), str(rng.choice(_LOC_SUFFIX))) for _ in range(n_loc)]
        self.org = [word(2) for _ in range(n_org)]
        cut = lambda xs: int(len(xs) * (1 - held_out))  # noqa: E731
        self.seen = {k: v[: cut(v)] for k, v in self._pools().items()}
        self.unseen = {k: v[cut(v) :] for k, v in self._pools().items()}

    def _pools(self):
        return {"first": self.first, "last": self.last, "loc": self.loc, "org": self.org}

    def typed_words(self):
        return {"PER": self.first + self.last, "LOC": self.loc, "ORG": self.org + _ORG_HEADS}


def _mention(etype, rng, pools, nested):
    """Return (tokens, inner spans relative to the mention as (a, b, label))."""
    pick = lambda key: str(rng.choice(pools[key]))  # noqa: E731
    if etype == "PER":
        if rng.random() < 0.7:
            return [pick("first"), pick("last")], []
        return [pick("last")], []
    if etype == "LOC":
        return [pick("loc")], []
    if nested and rng.random() < 0.6:
        if rng.random() < 0.6:
            pattern = str(rng.choice(_ORG_NESTED_LOC))
            inner_type, inner = "LOC", _mention("LOC", rng, pools, False)[0]
        else:
            pattern = str(rng.choice(_ORG_NESTED_PER))
            inner_type, inner = "PER", _mention("PER", rng, pools, False)[0]
        tokens = []
        inner_span = None
        for piece in pattern.split():
            if piece.startswith("{"):
                inner_span = (len(tokens) + 1, len(tokens) + len(inner), inner_type)
                tokens.extend(inner)
            else:
                tokens.append(piece)
        return tokens, [inner_span]
    if rng.random() < 0.5:
        return [pick("org"), str(rng.choice(_ORG_HEADS))], []
    return [pick("org")], []


def _sentence(sid, rng, pools, nested) -> Sentence:
    template = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
    tokens, spans = [], []
    for piece in template.split():
        if piece.startswith("{"):
            etype = piece[1:-1]
            mention, inner = _mention(etype, rng, pools, nested)
            start = len(tokens) + 1
            tokens.extend(mention)
            spans.append(LabeledSpan.of(start, len(tokens), etype))
            spans.extend(LabeledSpan.of(start + a - 1, start + b - 1, lab) for a, b, lab in inner)
        else:
            tokens.append(piece)
    return Sentence(sid, tuple(tokens), tuple(spans))


def _embeddings(lex: _Lexicon, corpora, dim: int, rng) -> EmbeddingTable:
    vocab = sorted({t for c in corpora for s in c for t in s.tokens} | {w for ws in lex.typed_words().values() for w in ws})
    centroids = {t: rng.normal(0, 1, dim) for t in ("PER", "LOC", "ORG")}
    typed = {w: t for t, ws in lex.typed_words().items() for w in ws}
    vectors = {}
    for w in vocab:
        noise = rng.normal(0, 1, dim)
        v = centroids[typed[w]] + 0.8 * noise if w in typed else noise
        vectors[w] = v / np.sqrt(dim)
    words = {w: i for i, w in enumerate(vocab)}
    matrix = np.array([vectors[w] for w in vocab])
    return EmbeddingTable(dim, words, matrix, make_unk_vector(dim))


def generate(kind: str = "flat", n_train: int = 200, n_dev: int = 100, n_test: int = 100,
             seed: int = 0, dim: int = 50, unseen_rate: float = 0.3) -> SyntheticData:
    """Build train/dev/test corpora plus matching word vectors."""
    if kind not in ("flat", "nested"):
        raise ValueError("kind must be flat or nested")
    rng = np.random.default_rng(seed)
    lex = _Lexicon(rng)
    nested = kind == "nested"

    def corpus(n, split, allow_unseen):
        sents = []
        for i in range(n):
            pools = lex.unseen if allow_unseen and rng.random() < unseen_rate else lex.seen
            sents.append(_sentence(i, rng, pools, nested))
        return Corpus(tuple(sents), split)

    train = corpus(n_train, "train", False)
    dev = corpus(n_dev, "dev", True)
    test = corpus(n_test, "test", True)
    return SyntheticData(train, dev, test, _embeddings(lex, (train, dev, test), dim, rng), kind)


def write_synthetic(data: SyntheticData, out_dir) -> dict[str, Path]:
    """Write corpora (BIO for flat, JSON lines for nested) and embeddings."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for split in ("train", "dev", "test"):
        corpus = getattr(data, split)
        if data.kind == "flat":
            p = out / f"{split}.bio"
            write_bio(corpus, p)
        else:
            p = out / f"{split}.jsonl"
            write_nested(corpus, p)
        paths[split] = p
    paths["embeddings"] = out / "embeddings.txt"
    write_embeddings(data.embeddings, paths["embeddings"])
    return paths
