"""Visible-unit layout: k+1 identical time blocks followed by one static block.

Block 0 holds the newest visit ``x_{t+k}`` and block ``k`` the oldest
``x_t``, matching the concatenation ``x_{t+k} + ... + x_t + x_static``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

BERNOULLI, ONEHOT, GAUSSIAN = 0, 1, 2
_KIND_CODES = {"bernoulli": BERNOULLI, "onehot": ONEHOT, "gaussian": GAUSSIAN}


@dataclass(frozen=True)
class Unit:
    variable: str
    kind: str
    label: str | None = None

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ConfigError(f"visible unit kind must be one of {list(_KIND_CODES)}, got {self.kind!r}")


def _units_for(specs) -> tuple[Unit, ...]:
    units = []
    for spec in specs:
        if spec.kind == "categorical":
            units += [Unit(spec.name, "onehot", lab) for lab in spec.labels]
        else:
            units.append(Unit(spec.name, spec.unit_kind))
    return tuple(units)


@dataclass(frozen=True)
class BlockLayout:
    lag: int
    block_units: tuple[Unit, ...]
    static_units: tuple[Unit, ...] = ()
    kinds: np.ndarray = field(init=False, repr=False, compare=False)
    onehot_groups: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.lag < 0:
            raise ConfigError("lag must be non-negative")
        object.__setattr__(self, "block_units", tuple(self.block_units))
        object.__setattr__(self, "static_units", tuple(self.static_units))
        units = self.units
        object.__setattr__(self, "kinds", np.array([_KIND_CODES[u.kind] for u in units], dtype=np.int8))
        groups = []
        i = 0
        while i < len(units):
            if units[i].kind == "onehot":
                j = i
                while j < len(units) and units[j].kind == "onehot" and units[j].variable == units[i].variable:
                    j += 1
                groups.append(np.arange(i, j))
                i = j
            else:
                i += 1
        object.__setattr__(self, "onehot_groups", tuple(groups))

    @classmethod
    def from_schema(cls, schema, lag: int = 2) -> "BlockLayout":
        return cls(lag, _units_for(schema.longitudinal), _units_for(schema.static))

    @property
    def n_block(self) -> int:
        return len(self.block_units)

    @property
    def n_static(self) -> int:
        return len(self.static_units)

    @property
    def n_blocks(self) -> int:
        return self.lag + 1

    @property
    def n_visible(self) -> int:
        return self.n_blocks * self.n_block + self.n_static

    @property
    def units(self) -> tuple[Unit, ...]:
        return self.block_units * self.n_blocks + self.static_units

    def block_slice(self, i: int) -> slice:
        if not 0 <= i <= self.lag:
            raise IndexError(f"block {i} out of range 0..{self.lag}")
        return slice(i * self.n_block, (i + 1) * self.n_block)

    @property
    def static_slice(self) -> slice:
        start = self.n_blocks * self.n_block
        return slice(start, start + self.n_static)

    def variable_slice(self, name: str, block: int | None) -> slice:
        """Units of ``name`` in time block ``block`` (``None`` = static block)."""
        units = self.static_units if block is None else self.block_units
        offset = self.static_slice.start if block is None else self.block_slice(block).start
        idx = [i for i, u in enumerate(units) if u.variable == name]
        if not idx:
            raise KeyError(name)
        return slice(offset + idx[0], offset + idx[-1] + 1)

    def block_mask(self, blocks=(), static: bool = False) -> np.ndarray:
        mask = np.zeros(self.n_visible, dtype=bool)
        for b in blocks:
            mask[self.block_slice(b)] = True
        if static:
            mask[self.static_slice] = True
        return mask

    def to_dict(self) -> dict:
        enc = lambda us: [[u.variable, u.kind, u.label] for u in us]
        return {"lag": self.lag, "block_units": enc(self.block_units), "static_units": enc(self.static_units)}

    @classmethod
    def from_dict(cls, d: dict) -> "BlockLayout":
        dec = lambda us: tuple(Unit(v, k, lab) for v, k, lab in us)
        return cls(int(d["lag"]), dec(d["block_units"]), dec(d["static_units"]))

    @classmethod
    def flat(cls, kinds) -> "BlockLayout":
        """A single-block layout with anonymous units, handy for toy models.

        Entries are ``"bernoulli"``, ``"gaussian"`` or ``("onehot", n_labels)``.
        """
        units = []
        for i, k in enumerate(kinds):
            if isinstance(k, tuple):
                units += [Unit(f"u{i}", "onehot", str(j)) for j in range(k[1])]
            else:
                units.append(Unit(f"u{i}", k))
        return cls(0, tuple(units), ())
