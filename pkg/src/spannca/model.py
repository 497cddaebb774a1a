"""A span model: encoder plus one head, with checkpoint save/load."""

from __future__ import annotations

from dataclasses import asdict

import numpy as np

from . import numcore as nc
from .corpus import CharVocab, EmbeddingTable, LabelSet
from .encoder import Encoder, EncoderConfig

HEADS = ("classifier", "instance")


def model_digest(head: str, encoder_config: EncoderConfig) -> str:
    return nc.config_digest({"head": head, "encoder": asdict(encoder_config)})


class SpanModel:
    def __init__(
        self,
        head: str,
        encoder_config: EncoderConfig,
        labels: LabelSet,
        char_vocab: CharVocab,
        embeddings: EmbeddingTable,
        rng,
        dropout: float = 0.0,
    ):
        if head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {head!r}")
        self.head = head
        self.labels = labels
        self.encoder = Encoder(encoder_config, char_vocab, embeddings, rng, dropout)
        self.label_weights = None
        if head == "classifier":
            w = nc.init_glorot((len(labels) - 1, encoder_config.span_dim), rng)
            self.label_weights = nc.Parameter(w, name="label_weights")

    @property
    def config(self) -> EncoderConfig:
        return self.encoder.config

    @property
    def max_width(self) -> int:
        return self.encoder.config.max_span_width

    def parameters(self) -> list[nc.Parameter]:
        params = self.encoder.parameters()
        if self.label_weights is not None:
            params.append(self.label_weights)
        return params

    def named_parameters(self) -> dict[str, nc.Parameter]:
        return {p.name: p for p in self.parameters()}

    def span_reprs(self, sentences, spans_per_sentence, train=False, rng=None) -> nc.Tensor:
        return self.encoder.span_reprs(sentences, spans_per_sentence, train, rng)

    # -- persistence ------------------------------------------------------

    def digest(self) -> str:
        return model_digest(self.head, self.config)

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.named_parameters().items()}

    def load_arrays(self, arrays) -> None:
        params = self.named_parameters()
        if set(arrays) != set(params):
            raise ValueError(f"parameter names differ: {sorted(set(arrays) ^ set(params))}")
        for name, value in arrays.items():
            if params[name].value.shape != value.shape:
                raise ValueError(f"{name}: shape {value.shape} != {params[name].value.shape}")
            params[name].value[...] = value

    def meta(self) -> dict:
        return {
            "head": self.head,
            "encoder": asdict(self.config),
            "labels": list(self.labels.labels),
            "chars": list(self.encoder.char_vocab.chars),
            "dropout": self.encoder.dropout,
        }

    def save(self, path, extra_meta=None) -> None:
        meta = self.meta()
        if extra_meta:
            meta.update(extra_meta)
        nc.save_checkpoint(path, self.state_arrays(), self.digest(), meta)

    @classmethod
    def load(cls, path, embeddings: EmbeddingTable, expected_digest: str | None = None) -> "SpanModel":
        arrays, _, meta = nc.read_checkpoint(path, expected_digest)
        model = cls(
            meta["head"],
            EncoderConfig(**meta["encoder"]),
            LabelSet(tuple(meta["labels"])),
            CharVocab(tuple(meta["chars"])),
            embeddings,
            np.random.default_rng(0),
            meta.get("dropout", 0.0),
        )
        model.load_arrays(arrays)
        return model
