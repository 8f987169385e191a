"""Encoding records into visible vectors, triplet construction and splitting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .normalize import Normalizers, decode_array, transform
from .records import SubjectRecord
from .schema import CohortSchema


class Encoder:
    """Map visit rows and static covariates to model-scale unit vectors."""

    def __init__(self, schema: CohortSchema, normalizers: Normalizers):
        self.schema = schema
        self.normalizers = normalizers
        self.long = schema.longitudinal
        self.static = schema.static
        self.n_block = sum(s.n_units for s in self.long)
        self.n_static = sum(s.n_units for s in self.static)
        self.indicator = schema.baseline_indicator

    def _encode(self, specs, values: dict, size: int):
        vec = np.zeros(size)
        mask = np.zeros(size, dtype=bool)
        i = 0
        for spec in specs:
            v = values.get(spec.name)
            n = spec.n_units
            if v is not None:
                if spec.kind == "categorical":
                    vec[i + spec.labels.index(v)] = 1.0
                else:
                    vec[i] = transform(v, spec, self.normalizers, "forward")
                mask[i:i + n] = True
            i += n
        return vec, mask

    def encode_visit(self, row: dict | None, month: int):
        row = dict(row or {})
        if self.indicator is not None:
            row[self.indicator] = int(month == 0)
        return self._encode(self.long, row, self.n_block)

    def encode_static(self, static: dict):
        return self._encode(self.static, static, self.n_static)

    def _decode(self, specs, V: np.ndarray) -> dict[str, np.ndarray]:
        out = {}
        i = 0
        for spec in specs:
            n = spec.n_units
            if spec.kind == "categorical":
                out[spec.name] = np.argmax(V[..., i:i + n], axis=-1).astype(float)
            else:
                out[spec.name] = decode_array(V[..., i], spec, self.normalizers)
            i += n
        return out

    def decode_visits(self, V: np.ndarray) -> dict[str, np.ndarray]:
        """Natural-scale values for a (..., n_block) array; categoricals as label index."""
        return self._decode(self.long, V)

    def decode_static(self, V: np.ndarray) -> dict[str, np.ndarray]:
        return self._decode(self.static, V)

    def indicator_slice(self) -> slice | None:
        if self.indicator is None:
            return None
        i = 0
        for spec in self.long:
            if spec.name == self.indicator:
                return slice(i, i + 1)
            i += spec.n_units
        return None


@dataclass
class Triplet:
    visible: np.ndarray
    mask: np.ndarray
    subject_id: str
    base_month: int


def build_triplets(records: list[SubjectRecord], schema: CohortSchema, normalizers: Normalizers,
                   lag: int = 2) -> list[Triplet]:
    """One sample per run of ``lag + 1`` consecutive visits of each subject.

    Blocks are ordered newest first and the static block is appended once.
    Samples whose newest visit has no measured longitudinal value are
    dropped.
    """
    enc = Encoder(schema, normalizers)
    step = schema.visit_interval_months
    out = []
    for rec in records:
        s_vec, s_mask = enc.encode_static(rec.static_values)
        n_visits = rec.last_month // step + 1
        if n_visits < lag + 1:
            continue
        blocks = [enc.encode_visit(rec.visits.get(t * step), t * step) for t in range(n_visits)]
        for t in range(n_visits - lag):
            newest = (t + lag) * step
            if not rec.has_longitudinal_data(newest, schema):
                continue
            idx = range(t + lag, t - 1, -1)
            visible = np.concatenate([blocks[j][0] for j in idx] + [s_vec])
            mask = np.concatenate([blocks[j][1] for j in idx] + [s_mask])
            out.append(Triplet(visible, mask, rec.subject_id, t * step))
    return out


def stack_triplets(triplets: list[Triplet]) -> tuple[np.ndarray, np.ndarray]:
    if not triplets:
        return np.zeros((0, 0)), np.zeros((0, 0), dtype=bool)
    return (np.stack([t.visible for t in triplets]), np.stack([t.mask for t in triplets]))


def split_counts(n: int, fractions) -> tuple[int, int, int]:
    """Validation and test sizes are floored; the remainder goes to training."""
    fr = [float(f) for f in fractions]
    if len(fr) != 3 or any(f <= 0 for f in fr):
        raise ConfigError(f"split fractions must be three positive numbers, got {fractions}")
    if abs(sum(fr) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {sum(fr)}")
    n_val = math.floor(fr[1] * n + 1e-9)
    n_test = math.floor(fr[2] * n + 1e-9)
    return n - n_val - n_test, n_val, n_test


def split_dataset(records: list[SubjectRecord], fractions=(0.5, 0.2, 0.3), seed: int = 0):
    """Partition subjects into (train, validation, test), deterministic under ``seed``."""
    ordered = sorted(records, key=lambda r: r.subject_id)
    n_train, n_val, _ = split_counts(len(ordered), fractions)
    perm = np.random.default_rng(seed).permutation(len(ordered))
    shuffled = [ordered[i] for i in perm]
    train = shuffled[:n_train]
    val = shuffled[n_train:n_train + n_val]
    test = shuffled[n_train + n_val:]
    key = lambda r: r.subject_id
    return sorted(train, key=key), sorted(val, key=key), sorted(test, key=key)
