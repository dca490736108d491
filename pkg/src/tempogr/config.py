"""Engine configuration: one key-value file plus command-line overrides."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from tempogr.errors import ConfigError
from tempogr.prompting import PromptConfig, PromptVariant
from tempogr.scoring import ScoringConfig
from tempogr.transition import DecayParams

# tuning grids the defaults are drawn from
GRIDS = {
    "epsilon": (1e-3, 1e-2, 1e-1, 1.0),
    "k": (1, 3, 5, 10),
    "L": (1, 2, 3, 4, 5, 7),
    "N": (7, 30, 180, 360),
    "tau": (128.0, 256.0, 512.0, 1024.0, 2048.0),
    "lam": tuple(round(0.1 * i, 1) for i in range(11)),
}
C_RANGE = (0.8, 1.0)


@dataclass
class EngineConfig:
    events: str = "events.jsonl"
    metadata: str = "metadata.jsonl"
    artifact_dir: str = "artifacts"
    stopwords: str = ""

    k_core: int = 5
    max_seq_len: int = 20
    n_keywords: int = 5
    exclude_self: bool = False

    tau: float = 128.0
    c: float = 0.9
    user_tau: float = 0.0  # 0 reuses tau
    user_c: float = -1.0  # negative reuses c
    k: int = 1
    L: int = 2
    epsilon: float = 0.01
    delta_pop: float = 1e-3
    delta_floor: float = 1e-9

    variant: str = PromptVariant.TARGET_RELATIVE_ABSOLUTE.value
    most_recent_first: bool = True
    B: int = 20
    exact: bool = False
    lam: float = 0.1
    N: int = 7
    trend_include_valid: bool = False
    interval_boundaries: str = ""  # "b1,b2" in days; empty -> tertiles
    seed: int = 0
    threads: int = 1
    allow_out_of_grid: bool = False

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], base: "EngineConfig | None" = None) -> "EngineConfig":
        cfg = dataclasses.replace(base) if base is not None else cls()
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, _coerce(key, raw, getattr(cls(), key)))
        return cfg

    @classmethod
    def from_file(cls, path, base: "EngineConfig | None" = None) -> "EngineConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            parser.read_string("[engine]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_mapping(dict(parser["engine"]), base)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {str(value).lower() if isinstance(value, bool) else value}")
        return "\n".join(lines) + "\n"

    # derived views

    @property
    def decay(self) -> DecayParams:
        return DecayParams(self.tau, self.c)

    @property
    def user_decay(self) -> DecayParams | None:
        if self.user_tau <= 0 and self.user_c < 0:
            return None
        return DecayParams(self.user_tau if self.user_tau > 0 else self.tau, self.user_c if self.user_c >= 0 else self.c)

    @property
    def prompt_variant(self) -> PromptVariant:
        return PromptVariant.parse(self.variant)

    def prompt_config(self) -> PromptConfig:
        return PromptConfig(self.prompt_variant, self.max_seq_len, self.k, self.L, self.most_recent_first, self.decay)

    def scoring_config(self) -> ScoringConfig:
        return ScoringConfig(self.epsilon, self.L, self.delta_pop, self.delta_floor, self.decay, self.user_decay)

    @property
    def boundaries(self) -> tuple[int, int] | None:
        if not self.interval_boundaries.strip():
            return None
        try:
            b1, b2 = (int(x) for x in self.interval_boundaries.split(","))
        except ValueError:
            raise ConfigError(f"interval_boundaries must be 'b1,b2', got {self.interval_boundaries!r}") from None
        return b1, b2

    def out_of_grid(self) -> list[str]:
        off = [name for name, grid in GRIDS.items() if not any(abs(getattr(self, name) - g) < 1e-12 for g in grid)]
        if not C_RANGE[0] <= self.c <= C_RANGE[1]:
            off.append("c")
        return off

    def validate(self) -> "EngineConfig":
        try:
            self.decay
            self.user_decay
            self.prompt_variant
            self.scoring_config()
            b = self.boundaries
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if b is not None and not b[0] < b[1]:
            raise ConfigError("interval_boundaries need b1 < b2")
        for name in ("k_core", "max_seq_len", "n_keywords", "k", "L", "B", "N", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        off = self.out_of_grid()
        if off and not self.allow_out_of_grid:
            raise ConfigError(
                f"out-of-grid hyperparameters: {', '.join(off)} (set allow_out_of_grid = true to accept)"
            )
        return self

    def hyperparameters(self) -> dict:
        skip = {"events", "metadata", "artifact_dir", "threads"}
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in skip}


def _coerce(key: str, raw: Any, default: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def digest(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]
