"""Invertible normalizing transforms fitted on the training split."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.special import expit

from ..errors import DomainError, FitError
from .records import SubjectRecord
from .schema import CohortSchema, VariableSpec


@dataclass
class Normalizers:
    """Fitted per-variable parameters, keyed by variable name."""

    params: dict[str, dict] = field(default_factory=dict)

    def __getitem__(self, name: str) -> dict:
        return self.params[name]

    def to_dict(self) -> dict:
        return {k: dict(v) for k, v in self.params.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizers":
        return cls({k: dict(v) for k, v in d.items()})


def _observed_values(records: Iterable[SubjectRecord], spec: VariableSpec) -> np.ndarray:
    vals = []
    for rec in records:
        if spec.longitudinal:
            vals.extend(row.get(spec.name) for row in rec.visits.values())
        else:
            vals.append(rec.static_values.get(spec.name))
    return np.array([v for v in vals if v is not None], dtype=float)


def fit_normalizers(records: list[SubjectRecord], schema: CohortSchema) -> Normalizers:
    if not records:
        raise FitError("cannot fit normalizers on an empty training split")
    params = {}
    for spec in schema.variables:
        if spec.transform == "standardize":
            x = _observed_values(records, spec)
            if x.size == 0:
                raise FitError(f"{spec.name}: no observed training values")
            std = float(x.std())
            if not std > 0:
                raise FitError(f"{spec.name}: zero variance in the training split")
            params[spec.name] = {"transform": "standardize", "mean": float(x.mean()), "std": std}
        elif spec.transform == "scale_by_reciprocal_max":
            params[spec.name] = {"transform": "scale_by_reciprocal_max", "scale": 1.0 / spec.max}
        elif spec.transform == "logit_range":
            params[spec.name] = {"transform": "logit_range", "lo": float(spec.lo),
                                 "hi": float(spec.hi), "delta": float(spec.delta)}
        else:
            params[spec.name] = {"transform": "none"}
    return Normalizers(params)


def transform(value, spec: VariableSpec, normalizers: Normalizers, direction: str = "forward"):
    """Map a value between its natural scale and the model scale.

    The logit transform uses the interval buffered by ``delta`` on both
    sides, ``log((x - (lo - delta)) / ((hi + delta) - x))``, so it is finite
    on the whole closed domain. Inverses clamp to the variable's domain;
    ordinal inverses round to the integer grid.
    """
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', not {direction!r}")
    p = normalizers[spec.name]
    kind = p["transform"]
    forward = direction == "forward"
    if kind == "none":
        return value
    if kind == "scale_by_reciprocal_max":
        if forward:
            return float(value) * p["scale"]
        level = int(math.floor(float(value) * spec.max + 0.5))
        return min(max(level, 0), spec.max)
    if kind == "standardize":
        if forward:
            return (float(value) - p["mean"]) / p["std"]
        return min(max(float(value) * p["std"] + p["mean"], spec.lo), spec.hi)
    lo, hi = p["lo"] - p["delta"], p["hi"] + p["delta"]
    if forward:
        x = float(value)
        if not lo < x < hi:
            raise DomainError(f"{spec.name}: {x} outside the buffered interval ({lo}, {hi})")
        return math.log((x - lo) / (hi - x))
    x = lo + (hi - lo) * float(expit(float(value)))
    return min(max(x, spec.lo), spec.hi)


def decode_value(y: float, spec: VariableSpec, normalizers: Normalizers):
    """Turn a model-scale value for a non-categorical unit into a natural value.

    Unlike ``transform(..., "inverse")`` this also rounds continuous
    variables flagged ``integer`` (PASAT) and snaps binary units.
    """
    if spec.kind == "binary":
        return int(y >= 0.5)
    x = transform(y, spec, normalizers, "inverse")
    if spec.kind == "continuous" and spec.integer:
        x = float(min(max(math.floor(x + 0.5), spec.lo), spec.hi))
    return x


def forward_array(x: np.ndarray, spec: VariableSpec, normalizers: Normalizers) -> np.ndarray:
    """Vectorized forward transform; NaN passes through."""
    p = normalizers[spec.name]
    kind = p["transform"]
    x = np.asarray(x, dtype=float)
    if kind == "none":
        return x.copy()
    if kind == "scale_by_reciprocal_max":
        return x * p["scale"]
    if kind == "standardize":
        return (x - p["mean"]) / p["std"]
    lo, hi = p["lo"] - p["delta"], p["hi"] + p["delta"]
    ok = np.isnan(x) | ((x > lo) & (x < hi))
    if not np.all(ok):
        raise DomainError(f"{spec.name}: values outside the buffered interval ({lo}, {hi})")
    with np.errstate(invalid="ignore"):
        return np.log((x - lo) / (hi - x))


def decode_array(y: np.ndarray, spec: VariableSpec, normalizers: Normalizers) -> np.ndarray:
    """Vectorized ``decode_value`` for non-categorical variables."""
    p = normalizers[spec.name]
    kind = p["transform"]
    y = np.asarray(y, dtype=float)
    if spec.kind == "binary":
        return (y >= 0.5).astype(float)
    if kind == "scale_by_reciprocal_max":
        return np.clip(np.floor(y * spec.max + 0.5), 0, spec.max)
    if kind == "standardize":
        x = y * p["std"] + p["mean"]
    else:
        lo, hi = p["lo"] - p["delta"], p["hi"] + p["delta"]
        x = lo + (hi - lo) * expit(y)
    x = np.clip(x, spec.lo, spec.hi)
    if spec.integer:
        x = np.clip(np.floor(x + 0.5), spec.lo, spec.hi)
    return x
