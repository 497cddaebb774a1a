"""Run configuration: an INI file with [data], [encoder], [train] and
[output] sections, plus ``section.key=value`` overrides.

Relative paths resolve against the directory of the config file.  The task
decides the span-feature mode and the decoder; they are not set directly.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .encoder import EncoderConfig
from .errors import ConfigError
from .trainer import TrainConfig

TASKS = {
    # task: (feature mode, decoder)
    "flat-ner": ("flat", "flat"),
    "nested-ner": ("nested", "nested"),
    "chunking": ("nested", "flat"),
}
DATA_KEYS = ("train", "dev", "test", "embeddings", "format", "task")
PATH_KEYS = ("train", "dev", "test", "embeddings")
FORMATS = ("auto", "bio", "nested")
OUTPUT_KEYS = ("dir", "checkpoint")
_ENCODER_KEYS = tuple(f.name for f in fields(EncoderConfig) if f.name != "mode")
_TRAIN_KEYS = tuple(f.name for f in fields(TrainConfig) if f.name != "decoder")
SECTIONS = {"data": DATA_KEYS, "encoder": _ENCODER_KEYS, "train": _TRAIN_KEYS, "output": OUTPUT_KEYS}


@dataclass(frozen=True)
class RunConfig:
    task: str = "flat-ner"
    format: str = "auto"
    paths: dict = field(default_factory=dict)
    encoder: EncoderConfig = EncoderConfig()
    train: TrainConfig = TrainConfig()
    output_dir: Path = Path("run")
    checkpoint: Path | None = None

    @property
    def checkpoint_path(self) -> Path:
        return self.checkpoint if self.checkpoint is not None else self.output_dir / "model.ckpt"

    def path(self, key: str) -> Path:
        """A data path that must be configured and exist on disk."""
        p = self.paths.get(key)
        if p is None:
            raise ConfigError(f"data.{key}", "required but not set")
        if not p.is_file():
            raise ConfigError(f"data.{key}", f"file not found: {p}")
        return p

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["data"] = {"task": self.task, "format": self.format, **{k: str(v) for k, v in sorted(self.paths.items())}}
        enc = dataclasses.asdict(self.encoder)
        cp["encoder"] = {k: str(enc[k]) for k in _ENCODER_KEYS}
        tr = dataclasses.asdict(self.train)
        cp["train"] = {k: repr(tr[k]) if isinstance(tr[k], float) else str(tr[k]) for k in _TRAIN_KEYS}
        cp["output"] = {"dir": str(self.output_dir), "checkpoint": str(self.checkpoint_path)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def echo(self, directory=None) -> Path:
        """Write the resolved config next to the outputs it produced."""
        out = Path(directory) if directory is not None else self.output_dir
        out.mkdir(parents=True, exist_ok=True)
        target = out / "resolved_config.ini"
        target.write_text(self.to_ini(), encoding="utf-8")
        return target


def _coerce(section: str, key: str, raw: str, kind):
    name = f"{section}.{key}"
    raw = raw.strip()
    try:
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(name, f"expected {kind if isinstance(kind, str) else kind.__name__}, got {raw!r}") from None
    return raw


def _field_types(cls) -> dict:
    return {f.name: f.type for f in fields(cls)}


def parse_override(text: str) -> tuple[str, str, str]:
    """Split ``section.key=value``."""
    if "=" not in text:
        raise ConfigError(text, "override must look like section.key=value")
    lhs, value = text.split("=", 1)
    if "." not in lhs:
        raise ConfigError(lhs, "override key must be section.key")
    section, key = lhs.strip().split(".", 1)
    return section, key, value


def build_run_config(sections: dict, base_dir=None) -> RunConfig:
    """Validate raw string sections and assemble a RunConfig."""
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    for name, values in sections.items():
        if name not in SECTIONS:
            raise ConfigError(name, f"unknown section (expected one of {sorted(SECTIONS)})")
        for key in values:
            if key not in SECTIONS[name]:
                raise ConfigError(f"{name}.{key}", "unknown key")

    data = sections.get("data", {})
    task = data.get("task", "flat-ner").strip()
    if task not in TASKS:
        raise ConfigError("data.task", f"must be one of {sorted(TASKS)}, got {task!r}")
    fmt = data.get("format", "auto").strip()
    if fmt not in FORMATS:
        raise ConfigError("data.format", f"must be one of {FORMATS}, got {fmt!r}")
    paths = {k: (base / data[k].strip()).resolve() for k in PATH_KEYS if data.get(k, "").strip()}
    mode, decoder = TASKS[task]

    enc_types = _field_types(EncoderConfig)
    enc_kw = {k: _coerce("encoder", k, v, enc_types[k]) for k, v in sections.get("encoder", {}).items()}
    try:
        encoder = EncoderConfig(**enc_kw, mode=mode)
    except ValueError as e:
        raise ConfigError("encoder", str(e)) from None

    tr_types = _field_types(TrainConfig)
    tr_kw = {k: _coerce("train", k, v, tr_types[k]) for k, v in sections.get("train", {}).items()}
    try:
        train = TrainConfig(**tr_kw, decoder=decoder)
    except ValueError as e:
        raise ConfigError("train", str(e)) from None

    out = sections.get("output", {})
    output_dir = (base / out.get("dir", "run").strip()).resolve()
    ckpt = out.get("checkpoint", "").strip()
    checkpoint = (base / ckpt).resolve() if ckpt else None
    return RunConfig(task, fmt, paths, encoder, train, output_dir, checkpoint)


def load_run_config(path=None, overrides=(), seed: int | None = None) -> RunConfig:
    """Read an INI file (optional), apply overrides, then the seed."""
    sections: dict[str, dict[str, str]] = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}")
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError("config", f"cannot parse {path}: {e}") from None
        sections = {s: dict(cp[s]) for s in cp.sections()}
        base = path.parent
    for text in overrides:
        section, key, value = parse_override(text)
        sections.setdefault(section, {})[key] = value
    cfg = build_run_config(sections, base)
    if seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=seed))
    return cfg
