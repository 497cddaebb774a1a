import numpy as np
import pytest

from spannca.corpus import Corpus, EmbeddingTable, LabeledSpan, Sentence, make_unk_vector
from spannca.encoder import EncoderConfig

TINY_RAW = [
    ("Ann Lee visited Paris .", [(1, 2, "PER"), (4, 4, "LOC")]),
    ("Acme Corp hired Bob", [(1, 2, "ORG"), (4, 4, "PER")]),
    ("Rome is warm", [(1, 1, "LOC")]),
    ("Bob met Ann in Oslo", [(1, 1, "PER"), (3, 3, "PER"), (5, 5, "LOC")]),
    ("it rained", []),
    ("Acme sued Zed Inc", [(1, 1, "ORG"), (3, 4, "ORG")]),
]


def make_sentence(sid, text, spans=()):
    return Sentence(sid, tuple(text.split()), tuple(LabeledSpan.of(a, b, lab) for a, b, lab in spans))


def random_table(words, dim, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    words = sorted(set(words))
    return EmbeddingTable(dim, {w: i for i, w in enumerate(words)}, rng.normal(0, scale, (len(words), dim)),
                          make_unk_vector(dim))


@pytest.fixture
def tiny_corpus():
    return Corpus(tuple(make_sentence(i, t, sp) for i, (t, sp) in enumerate(TINY_RAW)), "train")


@pytest.fixture
def tiny_embeddings(tiny_corpus):
    return random_table([w for s in tiny_corpus for w in s.tokens], 8, seed=5)


@pytest.fixture
def tiny_encoder_config():
    return EncoderConfig(word_dim=8, char_dim=4, char_filters=4, lstm_hidden=8, span_dim=8)


@pytest.fixture(scope="session")
def small_encoder_config():
    return EncoderConfig(word_dim=50, char_dim=16, char_filters=16, lstm_hidden=32, span_dim=32)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; the summary prints them all."""

    def record(number, ok, detail):
        status = "N/A " if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {number:>2}: {status}  {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
