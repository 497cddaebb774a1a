import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spannca.corpus import Corpus, LabeledSpan
from spannca.errors import MisalignedCorpora
from spannca.evaluator import Metrics, compare_heads, format_table, gold_of, size_ablation, span_f1, write_records
from spannca.trainer import TrainConfig


def ls(a, b, label):
    return LabeledSpan.of(a, b, label)


def test_perfect_match():
    g = {0: [ls(1, 2, "PER")], 1: [ls(3, 3, "LOC"), ls(1, 1, "ORG")]}
    m = span_f1(g, g)
    assert (m.tp, m.fp, m.fn) == (3, 0, 0) and m.f1 == 100.0


def test_half_right():
    g = {0: [ls(1, 1, "PER"), ls(3, 3, "LOC")]}
    p = {0: [ls(1, 1, "PER"), ls(3, 3, "ORG")]}
    m = span_f1(g, p)
    assert m.precision == m.recall == m.f1 == 50.0


def test_asymmetric_precision_recall():
    g = {0: [ls(1, 1, "PER")], 1: [ls(2, 3, "LOC"), ls(5, 5, "ORG"), ls(6, 6, "ORG")]}
    p = {0: [ls(1, 1, "PER"), ls(2, 2, "PER")], 1: [ls(2, 3, "LOC")]}
    m = span_f1(g, p)
    assert m.precision == pytest.approx(200 / 3)
    assert m.recall == 50.0
    assert m.f1 == pytest.approx(2 * (200 / 3) * 50 / (200 / 3 + 50))


def test_empty_and_misaligned():
    assert span_f1({0: []}, {0: []}).f1 == 0.0
    assert span_f1({0: [ls(1, 1, "PER")]}, {0: []}).precision == 0.0
    with pytest.raises(MisalignedCorpora):
        span_f1({0: []}, {1: []})


spans = st.builds(
    lambda a, w, lab: ls(a, a + w, lab),
    st.integers(1, 6), st.integers(0, 3), st.sampled_from(["PER", "LOC", "ORG"]),
)
docs = st.dictionaries(st.integers(0, 5), st.lists(spans, max_size=6, unique=True), min_size=1)


@settings(max_examples=200, deadline=None)
@given(docs, st.data())
def test_span_f1_matches_set_oracle(gold, data):
    pred = {sid: data.draw(st.lists(spans, max_size=6, unique=True)) for sid in gold}
    G = {(sid, x.a, x.b, x.label) for sid, v in gold.items() for x in v}
    P = {(sid, x.a, x.b, x.label) for sid, v in pred.items() for x in v}
    m = span_f1(gold, pred)
    assert (m.tp, m.fp, m.fn) == (len(G & P), len(P - G), len(G - P))
    prec = 100 * len(G & P) / len(P) if P else 0.0
    rec = 100 * len(G & P) / len(G) if G else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    assert (m.precision, m.recall, m.f1) == (prec, rec, f1)
    # swapping roles swaps precision and recall
    r = span_f1(pred, gold)
    assert (r.precision, r.recall) == (m.recall, m.precision)
    # order within a sentence is irrelevant
    assert span_f1({k: v[::-1] for k, v in gold.items()}, pred) == m


def test_metrics_round_trip():
    m = Metrics(7, 3, 2)
    assert Metrics.from_dict(json.loads(m.to_json())) == m
    assert str(m) == "P=70.00 R=77.78 F1=73.68"


def test_gold_of(tiny_corpus):
    g = gold_of(tiny_corpus)
    assert len(g) == 6 and g[4] == [] and span_f1(g, g).f1 == 100.0


def test_format_table_and_records(tmp_path):
    rows = [{"head": "instance", "f1": 91.234, "runs": [1.0, 2.5]}, {"head": "classifier", "f1": 5.0, "runs": []}]
    text = format_table(rows, ["head", "f1", "runs"])
    assert text.splitlines() == [
        "head        f1     runs",
        "----------  -----  ---------",
        "instance    91.23  1.00,2.50",
        "classifier  5.00",
    ]
    write_records(tmp_path / "r.jsonl", rows)
    assert [json.loads(x) for x in (tmp_path / "r.jsonl").read_text().splitlines()] == rows


@pytest.fixture
def cheap(tiny_corpus, tiny_embeddings, tiny_encoder_config):
    dev = Corpus(tiny_corpus.sentences[:3], "dev")
    return tiny_corpus, dev, tiny_embeddings, TrainConfig(epochs=2, k=3, batch_size=2), tiny_encoder_config


def test_compare_heads_shape(cheap):
    train, dev, emb, tc, ec = cheap
    res = compare_heads(train, dev, dev, emb, tc, ec, runs=2, dataset="tiny")
    assert [r.head for r in res] == ["classifier", "instance"]
    for r in res:
        assert len(r.f1s) == 2 and all(0 <= f <= 100 for f in r.f1s)
        row = r.row()
        assert row["dataset"] == "tiny" and row["runs"] == 2
        assert row["f1_mean"] == pytest.approx(np.mean(r.f1s))
    with pytest.raises(ValueError):
        compare_heads(train, dev, dev, emb, tc, ec, runs=0)


def test_size_ablation_shape(cheap):
    train, dev, emb, tc, ec = cheap
    rows = size_ablation(train, dev, emb, tc, ec, fractions=(1.0, 0.5), heads=("instance",))
    assert [(r["head"], r["fraction"], r["train_sentences"]) for r in rows] == [("instance", 1.0, 6), ("instance", 0.5, 3)]
    with pytest.raises(ValueError):
        size_ablation(train, dev, emb, tc, ec, fractions=(0.0,))

