"""Strict JSON run configuration for the command-line front end."""

from __future__ import annotations

import json
import math
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import elastic
from .geometry import ConformalMetric, InwardBoundaryPoint, flat, gaussian_bump, polynomial_metric
from .tensor_algebra import (
    MixedTensorField,
    boundary_vanishing,
    d_prime,
    lambda_op,
    polynomial_field,
    random_polynomial_field,
)
from .transforms import FanGrid

__all__ = [
    "ConfigError",
    "RunConfig",
    "MetricConfig",
    "PolynomialFieldConfig",
    "KernelFieldConfig",
    "RandomFieldConfig",
    "GridConfig",
    "OutputConfig",
    "MediumConfig",
    "EntryConfig",
    "load_config",
    "parse_config",
    "build_metric",
    "build_field",
    "build_medium",
]

MAX_TOTAL_ORDER = 8


class ConfigError(ValueError):
    """A config file that cannot be parsed or validated; ``str`` is the diagnostic."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MetricConfig(_Strict):
    preset: Literal["flat", "gaussian_bump", "polynomial"] = "flat"
    amplitude: float = 0.05
    center: List[float] = Field(default_factory=lambda: [0.0, 0.0], min_length=2, max_length=2)
    width: float = Field(1.0, gt=0)
    coefficients: List[List[float]] = Field(default_factory=lambda: [[0.0]])


def _check_key(key: str, k: int, l: int):
    try:
        h, a = (int(s) for s in key.split(","))
    except ValueError:
        raise ValueError(f"component key {key!r} is not of the form 'h,a'") from None
    if not (0 <= h <= k and 0 <= a <= l):
        raise ValueError(f"component {key!r} out of range for orders ({k}, {l})")
    return h, a


class _Orders(_Strict):
    k: int = Field(ge=0)
    l: int = Field(ge=0)

    @model_validator(mode="after")
    def _total(self):
        if self.k + self.l > MAX_TOTAL_ORDER:
            raise ValueError(f"k + l must be at most {MAX_TOTAL_ORDER}")
        return self


class PolynomialFieldConfig(_Orders):
    """Coefficients per canonical component ``"h,a"``: ``c[i][j]`` multiplies ``x1^i x2^j``."""

    type: Literal["polynomial"] = "polynomial"
    coefficients: Dict[str, List[List[float]]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _keys(self):
        for key in self.coefficients:
            _check_key(key, self.k, self.l)
        return self


class KernelFieldConfig(_Orders):
    """``d'u + lambda w`` with ``u = (1 - |x|^2) p``; missing ``p``/``w`` are drawn at random."""

    type: Literal["kernel"] = "kernel"
    u: Optional[Dict[str, List[List[float]]]] = None
    w: Optional[Dict[str, List[List[float]]]] = None
    degree: int = Field(2, ge=0, le=6)

    @model_validator(mode="after")
    def _orders(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("kernel fields need k, l >= 1")
        for key in self.u or {}:
            _check_key(key, self.k - 1, self.l)
        for key in self.w or {}:
            _check_key(key, self.k - 1, self.l - 1)
        return self


class RandomFieldConfig(_Orders):
    type: Literal["random"] = "random"
    degree: int = Field(2, ge=0, le=6)


FieldConfig = Union[PolynomialFieldConfig, KernelFieldConfig, RandomFieldConfig]


class GridConfig(_Strict):
    n_beta: int = Field(16, ge=1)
    n_phi: int = Field(16, ge=1)
    phi_max: float = Field(1.4, ge=0)

    @field_validator("phi_max")
    @classmethod
    def _below_right_angle(cls, v):
        if not v < math.pi / 2:
            raise ValueError("phi_max must be below pi/2")
        return v


class OutputConfig(_Strict):
    path: str = "sinogram.csv"
    format: Literal["csv"] = "csv"


class EntryConfig(_Strict):
    beta: float = math.pi
    phi: float = 0.0


class MediumConfig(_Strict):
    preset: Literal["isotropic", "constant_c_flat", "c1111", "random_smooth"] = "random_smooth"
    seed: Optional[int] = None
    eps: float = 0.05
    omega0_list: List[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3], min_length=3)
    entry: Optional[EntryConfig] = None


class RunConfig(_Strict):
    """Everything a command needs; unknown keys are rejected."""

    metric: MetricConfig = Field(default_factory=MetricConfig)
    field: Optional[FieldConfig] = Field(None, discriminator="type")
    kind: Literal["mixed", "geodesic"] = "mixed"
    grid: GridConfig = Field(default_factory=GridConfig)
    step: float = Field(1e-3, gt=0, le=0.1)
    seed: int = 0
    output: OutputConfig = Field(default_factory=OutputConfig)
    medium: Optional[MediumConfig] = None

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "\n".join(lines)


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_errors(e)) from None


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    try:
        return parse_config(text)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None


def build_metric(cfg: MetricConfig) -> ConformalMetric:
    if cfg.preset == "flat":
        return flat()
    if cfg.preset == "gaussian_bump":
        return gaussian_bump(cfg.amplitude, cfg.center, cfg.width)
    return polynomial_metric(cfg.coefficients)


def _coefficients(entries, k, l):
    d1 = max([len(c) for c in entries.values()] + [1])
    d2 = max([len(r) for c in entries.values() for r in c] + [1])
    out = np.zeros((k + 1, l + 1, d1, d2))
    for key, rows in entries.items():
        h, a = _check_key(key, k, l)
        for i, row in enumerate(rows):
            out[h, a, i, : len(row)] = row
    return out


def build_field(cfg: RunConfig) -> MixedTensorField:
    if cfg.field is None:
        raise ConfigError("field: a field section is required for this command")
    metric = build_metric(cfg.metric)
    f = cfg.field
    if isinstance(f, PolynomialFieldConfig):
        return polynomial_field(_coefficients(f.coefficients, f.k, f.l), metric, "config")
    if isinstance(f, RandomFieldConfig):
        return random_polynomial_field(f.k, f.l, f.degree, 1, cfg.seed, metric)[0]
    if f.u is not None:
        p = polynomial_field(_coefficients(f.u, f.k - 1, f.l), metric)
    else:
        p = random_polynomial_field(f.k - 1, f.l, f.degree, 1, cfg.seed, metric)[0]
    if f.w is not None:
        w = polynomial_field(_coefficients(f.w, f.k - 1, f.l - 1), metric)
    else:
        w = random_polynomial_field(f.k - 1, f.l - 1, f.degree, 1, cfg.seed + 1, metric)[0]
    return d_prime(boundary_vanishing(p)) + lambda_op(w)


def build_grid(cfg: RunConfig) -> FanGrid:
    return FanGrid(cfg.grid.n_beta, cfg.grid.n_phi, cfg.grid.phi_max)


def build_medium(cfg: MediumConfig) -> "elastic.ElasticMedium":
    if cfg.preset == "random_smooth":
        return elastic.random_smooth_medium(0 if cfg.seed is None else cfg.seed, cfg.eps)
    return elastic.PRESETS[cfg.preset]()


def build_entry(cfg: MediumConfig) -> InwardBoundaryPoint:
    if cfg.entry is not None:
        return InwardBoundaryPoint(cfg.entry.beta, cfg.entry.phi)
    if cfg.preset == "random_smooth":
        return InwardBoundaryPoint(0.3, 0.4)
    return InwardBoundaryPoint(math.pi, 0.0)
