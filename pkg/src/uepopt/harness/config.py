"""
Experiment configuration.

A config file is TOML or JSON with the keys of ExperimentConfig. Unknown
keys are rejected so a misspelt sweep does not silently run the defaults.
Relative paths inside the file are resolved against the file's directory.
"""

import json
import sys
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from uepopt.core.errors import ConfigError
from uepopt.core.importance import ImportanceProfile, ProfileKind, load_profile, synthetic_profile
from uepopt.core.solver import DEFAULT_DISCARD_PENALTY, Strategy

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_N_FEATURES = 8
DEFAULT_SPREAD_DB = 5.0


class WeightSource(BaseModel):
    """Where importance weights come from: a file, or a synthetic family."""

    model_config = ConfigDict(extra="forbid")

    file: Optional[str] = None
    kind: Optional[ProfileKind] = None
    parameter: Optional[float] = None
    seed: int = 0

    @model_validator(mode="after")
    def _one_source(self) -> "WeightSource":
        if (self.file is None) == (self.kind is None):
            raise ValueError("give exactly one of 'file' or 'kind'")
        return self

    def resolve(self, n_features: int) -> ImportanceProfile:
        if self.file is not None:
            profile = load_profile(self.file)
            if profile.n_features != n_features:
                raise ConfigError(
                    f"weight file has {profile.n_features} weights, n_features is {n_features}",
                    ["weights.file", "n_features"],
                )
            return profile
        return synthetic_profile(self.kind, n_features, self.parameter, self.seed)


class ExperimentConfig(BaseModel):
    """A sweep over SNR, power and rate budgets for a set of strategies."""

    model_config = ConfigDict(extra="forbid")

    n_features: int = Field(DEFAULT_N_FEATURES, ge=1)
    weights: WeightSource = Field(default_factory=lambda: WeightSource(kind="isfr_paper_like"))
    gamma_avg_db: list[float] = Field(..., min_length=1)
    spread_db: float = Field(DEFAULT_SPREAD_DB, ge=0)
    spread_domain: Literal["db", "linear"] = "db"
    p_max: list[float] = Field(..., min_length=1)
    m_min: list[float] = Field(..., min_length=1)
    d_t: float = Field(DEFAULT_DISCARD_PENALTY, ge=0)
    strategies: list[Strategy] = Field(default_factory=lambda: [Strategy.JCFMP], min_length=1)
    trials: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    early_stop: bool = True
    empirical_bits: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)
    output: Optional[str] = None
    json_mirror: bool = False

    @field_validator("strategies", mode="before")
    @classmethod
    def _parse_strategies(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            return [Strategy.parse(v) if isinstance(v, str) else v for v in value]
        return value

    @field_validator("p_max")
    @classmethod
    def _positive_power(cls, value: list[float]) -> list[float]:
        if any(p <= 0 for p in value):
            raise ValueError("every p_max must be positive")
        return value

    @field_validator("m_min")
    @classmethod
    def _rate_range(cls, value: list[float]) -> list[float]:
        if any(not 2.0 <= m <= 6.0 for m in value):
            raise ValueError("every m_min must lie in [2, 6]")
        return value

    @property
    def grid(self) -> list[tuple[float, float, float]]:
        """Sweep points (gamma_avg_db, p_max, m_min) in a fixed order."""
        return [(g, p, m) for g in self.gamma_avg_db for p in self.p_max for m in self.m_min]


def _error_fields(exc: ValidationError) -> list[str]:
    return [".".join(str(part) for part in err["loc"]) for err in exc.errors()]


def config_from_dict(data: dict[str, Any], base_dir: Optional[Path] = None) -> ExperimentConfig:
    """
    Validate a config mapping.

    Raises:
        ConfigError: Listing every offending field.
    """
    data = dict(data)
    if base_dir is not None:
        weights = data.get("weights")
        if isinstance(weights, dict) and weights.get("file"):
            weights = dict(weights)
            weights["file"] = str((base_dir / Path(weights["file"]).expanduser()).resolve())
            data["weights"] = weights
        if data.get("output"):
            data["output"] = str(base_dir / Path(data["output"]).expanduser())
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        fields = _error_fields(exc)
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
            for err in exc.errors()
        )
        raise ConfigError(f"invalid experiment config: {details}", fields) from None


def load_config(path: str | Path) -> ExperimentConfig:
    """
    Load an ExperimentConfig from a .toml or .json file.

    Raises:
        ConfigError: On an unreadable file, unknown format or invalid fields.
    """
    path = Path(path).expanduser()
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        elif path.suffix.lower() == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        else:
            raise ConfigError(f"unsupported config format {path.suffix!r}; use .toml or .json")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a table of settings")
    return config_from_dict(data, path.parent)
