"""Run configuration: defaults, ``key = value`` files, environment, command-line flags.

Precedence, lowest first: defaults, config file, ``CELETRIP_<KEY>`` environment
variables, explicit flags.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields, replace
from datetime import date
from pathlib import Path
from typing import Any, Mapping

from celetrip.model import ModelConfig
from celetrip.train_eval import DEFAULT_SPLIT_DATE, TrainConfig

ENV_PREFIX = "CELETRIP_"


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class RunConfig:
    # model
    hidden_dim: int = 128
    F: int = 128
    blocks: int = 2
    trip_layers: int = 2
    epsilon: float = 0.5
    window: int = 15
    Q: int = 7
    use_oriented_pooling: bool = True
    use_entity: bool = True
    use_event: bool = True
    pool_gate: bool = False
    # training
    lr: float = 0.001
    epochs: int = 200
    patience: int = 10
    seed: int = 0
    threshold: float = 0.5
    pos_weight: float = 1.0
    split_date: date = DEFAULT_SPLIT_DATE
    val_frac: float = 0.1
    # features
    word_dim: int = 100
    max_features: int = 1000
    cbow_epochs: int = 5
    containment: str = "article"
    # resources
    corpus: str | None = None
    gazetteer: str | None = None
    lexicon: str | None = None
    kb_triples: str | None = None
    kb_entities: str | None = None
    kb_relations: str | None = None
    kb_labels: str | None = None
    word_vectors: str | None = None
    ground_truth: str | None = None
    instances: str | None = None
    out: str | None = None

    def validate(self) -> "RunConfig":
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon", f"must lie in (0, 1), got {self.epsilon}")
        if self.Q < 0:
            raise ConfigError("Q", f"must be >= 0, got {self.Q}")
        for name in ("hidden_dim", "F", "blocks", "trip_layers", "window", "epochs", "word_dim", "max_features"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if self.patience < 0:
            raise ConfigError("patience", f"must be >= 0, got {self.patience}")
        if self.lr <= 0:
            raise ConfigError("lr", f"must be positive, got {self.lr}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold", f"must lie in [0, 1], got {self.threshold}")
        if not 0.0 <= self.val_frac < 1.0:
            raise ConfigError("val_frac", f"must lie in [0, 1), got {self.val_frac}")
        if self.pos_weight <= 0:
            raise ConfigError("pos_weight", f"must be positive, got {self.pos_weight}")
        if self.containment not in ("article", "pool"):
            raise ConfigError("containment", f"must be 'article' or 'pool', got {self.containment!r}")
        return self

    def require_paths(self, *names: str) -> None:
        """Every named path must be set and exist."""
        for name in names:
            value = getattr(self, name)
            if not value:
                raise ConfigError(name, "required path not given")
            if not Path(value).exists():
                raise ConfigError(name, f"no such file: {value}")

    def model_config(self, word_dim: int, article_dim: int, kb_dim: int) -> ModelConfig:
        return ModelConfig(word_dim=word_dim, article_dim=article_dim, kb_dim=kb_dim, hidden_dim=self.hidden_dim,
                           trip_dim=self.F, blocks=self.blocks, trip_layers=self.trip_layers,
                           epsilon=self.epsilon, q=self.Q, use_oriented_pooling=self.use_oriented_pooling,
                           use_entity=self.use_entity, use_event=self.use_event, pool_gate=self.pool_gate)

    def train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, epochs=self.epochs, patience=self.patience, seed=self.seed,
                           threshold=self.threshold, pos_weight=self.pos_weight)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_LOWER = {name.lower(): name for name in _FIELDS}


def _coerce(name: str, raw: Any) -> Any:
    default = getattr(RunConfig, name)
    if raw is None or not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, date):
            return date.fromisoformat(text)
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r}") from None
    return text or None


def _canonical(key: str) -> str:
    name = _LOWER.get(key.strip().lower().replace("-", "_"))
    if name is None:
        raise ConfigError(key, "unknown configuration key")
    return name


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse ``key = value`` lines (``#`` comments allowed, no sections needed)."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + Path(path).read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise ConfigError("config", f"{path}: {exc.message if hasattr(exc, 'message') else exc}") from None
    out = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            name = _canonical(key)
            out[name] = _coerce(name, value)
    return out


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    out = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = _LOWER.get(key[len(ENV_PREFIX):].lower())
        if name is not None:
            out[name] = _coerce(name, value)
    return out


def resolve_config(config_path: str | Path | None = None, flags: Mapping[str, Any] | None = None,
                   environ: Mapping[str, str] | None = None) -> RunConfig:
    values: dict[str, Any] = {}
    if config_path:
        values.update(read_config_file(config_path))
    values.update(env_overrides(environ))
    for key, value in (flags or {}).items():
        if value is not None:
            name = _canonical(key)
            values[name] = _coerce(name, value)
    return replace(RunConfig(), **values).validate()
