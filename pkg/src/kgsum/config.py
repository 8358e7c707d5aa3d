"""Pipeline configuration: INI files with one section per module, plus dataset profiles."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .cloze import RECALL_THRESHOLD, QaConfig
from .data import DEFAULT_TRUNCATE_LEN
from .features import DOCGRAPH, VARIANTS
from .kg import DEFAULT_MIN_NODES
from .model import ModelConfig
from .training import RewardConfig, TrainingConfig


def _f(default, section: str, help: str = ""):
    return field(default=default, metadata={"section": section, "help": help})


# Dataset profiles only choose truncation length and ROUGE mixture weights.
PROFILES: dict[str, dict[str, Any]] = {
    "nyt": {"truncate_len": 1024, "rouge1_weight": 0.0, "rouge2_weight": 0.75},
    "cnndm": {"truncate_len": 512, "rouge1_weight": 0.33, "rouge2_weight": 0.33},
}


@dataclass
class PipelineConfig:
    profile: str = _f("", "data", "dataset profile: nyt or cnndm")
    train_path: str = _f("", "data", "training corpus (JSON lines)")
    valid_path: str = _f("", "data", "validation corpus")
    test_path: str = _f("", "data", "test corpus")
    truncate_len: int = _f(DEFAULT_TRUNCATE_LEN, "data", "tokens kept per document")
    vocab_size: int = _f(50000, "data", "generation vocabulary size")
    min_nodes: int = _f(DEFAULT_MIN_NODES, "graph", "drop document-graph components smaller than this")

    variant: str = _f(DOCGRAPH, "model", "nograph | docgraph | seggraph")
    embed_dim: int = _f(128, "model")
    hidden_dim: int = _f(256, "model", "document encoder size (both directions)")
    decoder_dim: int = _f(256, "model")
    num_heads: int = _f(4, "model")
    head_dim: int = _f(72, "model")
    num_layers: int = _f(2, "model")

    lr_ml: float = _f(1e-3, "training")
    lr_rl: float = _f(1e-4, "training")
    grad_clip: float = _f(2.0, "training")
    batch_size: int = _f(32, "training")
    epochs: int = _f(20, "training")
    rl_epochs: int = _f(5, "training")
    rl_patience: int = _f(2, "training")
    max_steps: int = _f(0, "training", "stop after this many updates (0 = no limit)")
    seed: int = _f(0, "training", "the single seed all randomness derives from")

    rouge1_weight: float = _f(0.0, "reward")
    rouge2_weight: float = _f(0.75, "reward")
    cloze_weight: float = _f(0.05, "reward")

    recall_threshold: float = _f(RECALL_THRESHOLD, "cloze", "ROUGE-L recall for extra context sentences")
    fluency_k: float = _f(0.1, "cloze", "add-k smoothing of the bigram fluency model")

    qa_epochs: int = _f(10, "qa")
    qa_lr: float = _f(5e-3, "qa")
    qa_batch_size: int = _f(16, "qa")
    qa_embed_dim: int = _f(32, "qa")
    qa_hidden_dim: int = _f(32, "qa")
    qa_buckets: int = _f(4096, "qa")
    qa_heldout: float = _f(0.2, "qa")

    beam_size: int = _f(1, "decode", "1 = greedy")
    max_len: int = _f(120, "decode")
    min_len: int = _f(10, "decode")

    output_dir: str = _f("runs", "output")

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")
        if self.profile and self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; expected one of {', '.join(PROFILES)}")
        for name in ("truncate_len", "vocab_size", "embed_dim", "hidden_dim", "decoder_dim", "num_heads",
                     "head_dim", "num_layers", "beam_size", "max_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.hidden_dim % 2:
            raise ValueError("hidden_dim must be even (two LSTM directions)")
        self.training()
        self.reward()

    # -- views onto the module configs --------------------------------------
    def model(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size, variant=self.variant, embed_dim=self.embed_dim, hidden_dim=self.hidden_dim,
            decoder_dim=self.decoder_dim, num_heads=self.num_heads, head_dim=self.head_dim,
            num_layers=self.num_layers,
        )

    def training(self) -> TrainingConfig:
        return TrainingConfig(
            lr_ml=self.lr_ml, lr_rl=self.lr_rl, grad_clip=self.grad_clip, batch_size=self.batch_size,
            epochs=self.epochs, rl_epochs=self.rl_epochs, rl_patience=self.rl_patience, seed=self.seed,
            max_steps=self.max_steps or None, max_len=self.max_len, min_len=self.min_len,
        )

    def reward(self) -> RewardConfig:
        return RewardConfig(self.rouge1_weight, self.rouge2_weight, self.cloze_weight)

    def qa(self) -> QaConfig:
        return QaConfig(
            buckets=self.qa_buckets, embed_dim=self.qa_embed_dim, hidden_dim=self.qa_hidden_dim, lr=self.qa_lr,
            epochs=self.qa_epochs, batch_size=self.qa_batch_size, seed=self.seed, heldout_fraction=self.qa_heldout,
        )

    # -- files ---------------------------------------------------------------
    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for f in fields(self):
            sec = f.metadata["section"]
            if not parser.has_section(sec):
                parser.add_section(sec)
            parser.set(sec, f.name, str(getattr(self, f.name)))
        lines = []
        for sec in parser.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in parser.items(sec))
            lines.append("")
        return "\n".join(lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_ini(), encoding="utf-8")

    def as_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(name: str, value: Any) -> Any:
    kind = FIELD_TYPES[name]
    if isinstance(value, str):
        value = value.strip()
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value
    return kind(value)


FIELD_TYPES: dict[str, type] = {
    f.name: {"int": int, "float": float, "str": str}[f.type if isinstance(f.type, str) else f.type.__name__]
    for f in fields(PipelineConfig)
}
SECTIONS: dict[str, str] = {f.name: f.metadata["section"] for f in fields(PipelineConfig)}


def read_ini(path: str | Path) -> dict[str, Any]:
    """Flat ``{key: value}`` from an INI file; unknown keys or sections are errors."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    out = {}
    for sec in parser.sections():
        for key, value in parser.items(sec):
            if key not in SECTIONS:
                raise ValueError(f"{path}: unknown key {key!r} in section [{sec}]")
            if SECTIONS[key] != sec:
                raise ValueError(f"{path}: key {key!r} belongs in section [{SECTIONS[key]}], not [{sec}]")
            out[key] = _coerce(key, value)
    return out


def build_config(file_values: dict[str, Any] | None = None, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Defaults, then the profile, then the config file, then explicit overrides."""
    file_values = dict(file_values or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    profile = overrides.get("profile", file_values.get("profile", ""))
    values: dict[str, Any] = {}
    if profile:
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r}; expected one of {', '.join(PROFILES)}")
        values.update(PROFILES[profile])
    values.update(file_values)
    values.update({k: _coerce(k, v) for k, v in overrides.items()})
    values["profile"] = profile
    return PipelineConfig(**values)


def load_config(path: str | Path | None = None, **overrides) -> PipelineConfig:
    return build_config(read_ini(path) if path else {}, overrides)
