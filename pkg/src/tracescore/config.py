"""TOML-backed configuration with flag-level overrides applied by the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .rewards import RewardWeights
from .scoring import ScorerConfig


@dataclass(frozen=True)
class SimConfig:
    group_size: int = 8
    steps: int = 200
    lr: float = 8.0
    clip: float = 0.2
    temperature: float = 0.9
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.lr <= 0 or self.clip <= 0 or self.temperature <= 0:
            raise ValueError("lr, clip, and temperature must be positive")


@dataclass(frozen=True)
class VerifyConfig:
    min_steps: int = 3
    max_steps: int = 4

    def __post_init__(self) -> None:
        if not 0 <= self.min_steps <= self.max_steps:
            raise ValueError("need 0 <= min_steps <= max_steps")


@dataclass(frozen=True)
class CliConfig:
    weights: RewardWeights = field(default_factory=RewardWeights)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    jobs: int = 1


_SECTIONS = {
    "weights": RewardWeights,
    "scorer": ScorerConfig,
    "simulator": SimConfig,
    "verify": VerifyConfig,
}
_SECTION_ATTR = {"weights": "weights", "scorer": "scorer", "simulator": "sim", "verify": "verify"}


def load_config(path: str | Path | None) -> CliConfig:
    """Build the effective config from an optional TOML file.

    Unknown sections or keys are errors: a silently ignored typo in a
    weights file would change results without a trace.
    """
    if path is None:
        return CliConfig()
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    config = CliConfig()
    for section, payload in data.items():
        cls = _SECTIONS.get(section)
        if cls is None:
            raise ValueError(f"unknown config section [{section}]")
        if not isinstance(payload, dict):
            raise ValueError(f"config section [{section}] must be a table")
        allowed = {f.name for f in fields(cls)}
        unknown = set(payload) - allowed
        if unknown:
            raise ValueError(
                f"unknown keys in [{section}]: {sorted(unknown)}"
            )
        config = replace(config, **{_SECTION_ATTR[section]: cls(**payload)})
    return config


def describe(config: CliConfig) -> dict[str, str]:
    """Flatten the effective config into report-header metadata."""
    out: dict[str, str] = {}
    for section, attr in _SECTION_ATTR.items():
        value: Any = getattr(config, attr)
        for f in fields(value):
            out[f"{section}.{f.name}"] = str(getattr(value, f.name))
    return out
