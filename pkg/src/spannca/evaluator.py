"""Span-level precision/recall/F1 and the head-comparison and
training-size ablation harnesses."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from statistics import mean, stdev

from .errors import MisalignedCorpora


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        n = self.tp + self.fp
        return 100.0 * self.tp / n if n else 0.0

    @property
    def recall(self) -> float:
        n = self.tp + self.fn
        return 100.0 * self.tp / n if n else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(int(d["tp"]), int(d["fp"]), int(d["fn"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __str__(self):
        return f"P={self.precision:.2f} R={self.recall:.2f} F1={self.f1:.2f}"


def span_f1(gold: dict, pred: dict) -> Metrics:
    """Micro-averaged exact match on (sentence id, a, b, label).

    ``gold`` and ``pred`` map sentence ids to labeled span lists and must
    cover the same sentences.
    """
    if set(gold) != set(pred):
        missing = sorted(set(gold) ^ set(pred))[:5]
        raise MisalignedCorpora(f"gold and prediction sentence ids differ, e.g. {missing}")
    tp = fp = fn = 0
    for sid, gspans in gold.items():
        g = {(ls.a, ls.b, ls.label) for ls in gspans}
        p = {(ls.a, ls.b, ls.label) for ls in pred[sid]}
        tp += len(g & p)
        fp += len(p - g)
        fn += len(g - p)
    return Metrics(tp, fp, fn)


def gold_of(corpus) -> dict:
    return {s.id: list(s.gold_spans) for s in corpus}


# ---------------------------------------------------------------------------
# Harnesses


@dataclass
class HeadResult:
    head: str
    dataset: str
    f1s: list

    @property
    def mean(self) -> float:
        return mean(self.f1s)

    @property
    def std(self) -> float:
        return stdev(self.f1s) if len(self.f1s) > 1 else 0.0

    def row(self) -> dict:
        return {"dataset": self.dataset, "head": self.head, "runs": len(self.f1s),
                "f1_mean": self.mean, "f1_std": self.std, "f1_runs": list(self.f1s)}


def compare_heads(train, dev, test, embeddings, train_config, encoder_config, runs: int = 1,
                  dataset: str = "data", heads=("classifier", "instance")) -> list[HeadResult]:
    """Train each head ``runs`` times with seeds seed..seed+runs-1; score on test."""
    from .trainer import evaluate, train as train_model

    if runs < 1:
        raise ValueError("runs must be >= 1")
    results = []
    for head in heads:
        f1s = []
        for r in range(runs):
            cfg = replace(train_config, head=head, seed=train_config.seed + r)
            _, model = train_model(cfg, encoder_config, train, dev, embeddings)
            f1s.append(evaluate(model, test, train, cfg.k).f1)
        results.append(HeadResult(head, dataset, f1s))
    return results


def size_ablation(train, dev, embeddings, train_config, encoder_config,
                  fractions=(1.0, 0.5, 0.25, 0.125), runs: int = 1,
                  heads=("classifier", "instance")) -> list[dict]:
    """Dev F1 per (head, fraction), mean over ``runs`` seeds."""
    from .trainer import subsample_training, train as train_model

    for f in fractions:
        if not 0 < f <= 1:
            raise ValueError(f"fraction {f} outside (0, 1]")
    rows = []
    for head in heads:
        for frac in fractions:
            f1s = []
            for r in range(runs):
                cfg = replace(train_config, head=head, seed=train_config.seed + r, train_fraction=frac)
                report, _ = train_model(cfg, encoder_config, train, dev, embeddings)
                f1s.append(report.best_f1)
            rows.append({"head": head, "fraction": frac, "train_sentences": len(subsample_training(train, frac, train_config.seed)),
                         "f1_mean": mean(f1s), "f1_std": stdev(f1s) if len(f1s) > 1 else 0.0,
                         "f1_runs": f1s})
    return rows


def format_table(rows: list[dict], columns: list[str]) -> str:
    """Aligned text table; floats render with 2 decimals."""
    def cell(v):
        if isinstance(v, float):
            return f"{v:.2f}"
        if isinstance(v, list):
            return ",".join(cell(x) for x in v)
        return str(v)

    body = [[cell(r[c]) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def write_records(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True) + "\n")

