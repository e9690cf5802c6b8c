"""Experiment configuration files (YAML or JSON) with an explicit schema version."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .levy_measure import LevyTriplet
from .schwartz import from_id

SCHEMA_VERSION = 1

Kind = Literal["simulate", "pair", "fubini", "growth", "dichotomy", "charfn", "bump-probe", "dyadic"]


class ConfigError(ValueError):
    pass


class TripletConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: float = 0.0
    sigma: float = 0.0
    nu: dict = Field(default_factory=lambda: {"family": "atomic", "atoms": []})

    @field_validator("sigma")
    @classmethod
    def _sigma(cls, v):
        if v < 0:
            raise ValueError("sigma must be >= 0")
        return v

    @model_validator(mode="after")
    def _measure(self):
        self.build()
        return self

    def build(self) -> LevyTriplet:
        return LevyTriplet.from_dict({"gamma": self.gamma, "sigma": self.sigma, "nu": self.nu})


class ExperimentConfig(BaseModel):
    """One experiment; every output is a function of this object alone."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = SCHEMA_VERSION
    kind: Kind
    triplet: TripletConfig = Field(default_factory=TripletConfig)
    d: int = Field(1, ge=1, le=4)
    horizon: float = Field(10.0, gt=0)
    grid_dt: Optional[float] = Field(None, gt=0)
    eps: float = Field(2.0 ** -10, gt=0, le=1)
    phi: list[str] = Field(default_factory=lambda: ["mollifier"])
    seed: int = Field(0, ge=0, lt=2 ** 64)
    seeds: int = Field(1, ge=1)
    alpha: Optional[float] = Field(None, gt=0)
    checkpoints: Optional[list[float]] = None
    horizons: tuple[float, float] = (1e2, 1e4)
    n_range: tuple[int, int] = (4, 50)
    n_mc: int = Field(100_000, ge=1000)
    blocks: Optional[list[list[int]]] = None
    out: Optional[str] = None

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v}; this build reads {SCHEMA_VERSION}")
        return v

    @model_validator(mode="after")
    def _phis(self):
        for name in self.phi:
            try:
                from_id(name, self.d)
            except ValueError as exc:
                raise ValueError(f"phi: {exc}") from None
        if self.n_range[0] < 1 or self.n_range[1] < self.n_range[0]:
            raise ValueError("n_range must be 1 <= lo <= hi")
        return self

    def build_triplet(self) -> LevyTriplet:
        return self.triplet.build()

    def test_functions(self):
        return [(name, from_id(name, self.d)) for name in self.phi]


def _format_errors(exc) -> str:
    lines = []
    for e in exc.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data) -> ExperimentConfig:
    from pydantic import ValidationError
    if not data:
        raise ConfigError("empty configuration")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text) if text.strip() else None
    else:
        data = yaml.safe_load(text)
    return parse_config(data)
