"""Matplotlib figures for ablation curves, head comparisons and training
curves.  Everything renders off-screen to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_HEAD_STYLE = {"classifier": dict(marker="s", linestyle="--"), "instance": dict(marker="o", linestyle="-")}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def plot_ablation(rows, path, title="F1 by training-set fraction") -> Path:
    """One line per head: mean dev F1 against training fraction (log2 axis)."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for head in sorted({r["head"] for r in rows}):
        pts = sorted((r["fraction"], r["f1_mean"], r.get("f1_std", 0.0)) for r in rows if r["head"] == head)
        xs, ys, es = zip(*pts)
        ax.errorbar(xs, ys, yerr=es, capsize=3, label=head, **_HEAD_STYLE.get(head, {}))
    ax.set_xscale("log", base=2)
    fracs = sorted({r["fraction"] for r in rows})
    ax.set_xticks(fracs)
    ax.set_xticklabels([_fraction_label(f) for f in fracs])
    ax.set_xlabel("fraction of training sentences")
    ax.set_ylabel("dev F1")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def _fraction_label(f: float) -> str:
    if f == 1:
        return "1"
    inv = 1 / f
    return f"1/{int(round(inv))}" if abs(inv - round(inv)) < 1e-9 else f"{f:g}"


def plot_comparison(results, path, title="Test F1 by head") -> Path:
    """Bar chart of mean test F1 with standard-deviation whiskers."""
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    names = [f"{r.head}\n{r.dataset}" for r in results]
    means = [r.mean for r in results]
    ax.bar(range(len(results)), means, yerr=[r.std for r in results], capsize=4,
           color=["#7f7f7f" if r.head == "classifier" else "#1f77b4" for r in results])
    for i, m in enumerate(means):
        ax.text(i, m, f"{m:.2f}", ha="center", va="bottom", fontsize=8)
    ax.set_xticks(range(len(results)))
    ax.set_xticklabels(names)
    ax.set_ylabel("test F1")
    ax.set_ylim(0, 105)
    ax.set_title(title)
    return _save(fig, path)


def plot_training(report, path, title="Training curve") -> Path:
    """Summed epoch loss (left axis) and dev F1 (right axis)."""
    epochs = [r["epoch"] for r in report.epochs]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot(epochs, report.losses, color="#d62728", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("train loss")
    if report.losses and min(report.losses) > 0:
        ax.set_yscale("log")
    ax2 = ax.twinx()
    ax2.plot(epochs, [r["dev_f1"] for r in report.epochs], color="#1f77b4", label="dev F1")
    if report.best_epoch is not None:
        ax2.axvline(report.best_epoch, color="#1f77b4", linestyle=":", alpha=0.6)
    ax2.set_ylabel("dev F1")
    ax2.set_ylim(0, 105)
    ax.set_title(title)
    return _save(fig, path)
