"""Run configuration: YAML sections, hyperparameter grids and per-cell seeds.

A config file is a mapping with these optional sections::

    data:        {tidy: cohort.csv, schema: schema.yaml}  or  {synth: {...SynthConfig fields}}
    split:       {fractions: [0.5, 0.2, 0.3], seed: 0}
    hyperparams: {...Hyperparams fields}                    base values for every cell
    grid:        {field: [values, ...]}                    Cartesian product over these
    sampling:    {n_steps: 100, n_anneal: 50, sigma_beta: 0.0}
    selection:   {K: 10, tau: null, clinical: null}
    generate:    {K: 100, n_subjects: 100, tau: null, split: test, chunk_size: 8}
    evaluate:    {K: 100, n_sims: 100, ties: le, k_clinical: 10, split: test}

Grid keys name ``Hyperparams`` fields; ``sampling.<field>`` keys vary the
generation schedule instead.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..errors import ConfigError
from ..sampling import AnnealSchedule
from ..training import Hyperparams

SECTIONS = ("data", "split", "hyperparams", "grid", "sampling", "selection", "generate", "evaluate")

_SELECTION_DEFAULTS = {"K": 10, "tau": None, "clinical": None}
_GENERATE_DEFAULTS = {"K": 100, "n_subjects": 100, "tau": None, "split": "test", "chunk_size": 8}
_EVALUATE_DEFAULTS = {"K": 100, "n_sims": 100, "ties": "le", "k_clinical": 10, "split": "test", "tau": None}


def _section(raw: dict, name: str, defaults: dict) -> dict:
    given = raw.get(name) or {}
    if not isinstance(given, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return {**defaults, **given}


@dataclass
class RunConfig:
    data: dict = field(default_factory=dict)
    split_fractions: tuple[float, float, float] = (0.5, 0.2, 0.3)
    split_seed: int = 0
    hyperparams: dict = field(default_factory=dict)
    grid: dict[str, list] = field(default_factory=dict)
    sampling: dict = field(default_factory=dict)
    selection: dict = field(default_factory=lambda: dict(_SELECTION_DEFAULTS))
    generate: dict = field(default_factory=lambda: dict(_GENERATE_DEFAULTS))
    evaluate: dict = field(default_factory=lambda: dict(_EVALUATE_DEFAULTS))
    source: Path | None = None

    @classmethod
    def from_dict(cls, raw: dict | None, source: Path | None = None) -> "RunConfig":
        raw = raw or {}
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(raw) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        split = _section(raw, "split", {"fractions": [0.5, 0.2, 0.3], "seed": 0})
        fr = tuple(float(f) for f in split["fractions"])
        grid = raw.get("grid") or {}
        if not isinstance(grid, dict):
            raise ConfigError("grid must map names to lists of values")
        for k, v in grid.items():
            if not isinstance(v, list) or not v:
                raise ConfigError(f"grid entry {k!r} must be a non-empty list")
        cfg = cls(
            data=dict(raw.get("data") or {}),
            split_fractions=fr,
            split_seed=int(split["seed"]),
            hyperparams=dict(raw.get("hyperparams") or {}),
            grid={str(k): list(v) for k, v in grid.items()},
            sampling=dict(raw.get("sampling") or {}),
            selection=_section(raw, "selection", _SELECTION_DEFAULTS),
            generate=_section(raw, "generate", _GENERATE_DEFAULTS),
            evaluate=_section(raw, "evaluate", _EVALUATE_DEFAULTS),
            source=source,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        unknown = set(self.data) - {"tidy", "schema", "synth"}
        if unknown:
            raise ConfigError(f"unknown keys in 'data': {sorted(unknown)}")
        hp_fields = {f.name for f in fields(Hyperparams)}
        sched_fields = {f.name for f in fields(AnnealSchedule)}
        for key in self.grid:
            if key.startswith("sampling."):
                if key[9:] not in sched_fields:
                    raise ConfigError(f"unknown sampling grid key {key!r}")
            elif key not in hp_fields:
                raise ConfigError(f"unknown grid key {key!r}")
        Hyperparams.from_dict(self.hyperparams)
        self.schedule()
        if self.evaluate["ties"] not in ("le", "mid", "randomized"):
            raise ConfigError(f"unknown tie mode {self.evaluate['ties']!r}")

    def resolve(self, path) -> Path:
        """Paths in the config are relative to the config file."""
        p = Path(path)
        if not p.is_absolute() and self.source is not None:
            p = self.source.parent / p
        return p

    def schedule(self, overrides: dict | None = None) -> AnnealSchedule:
        d = {**self.sampling, **(overrides or {})}
        unknown = set(d) - {f.name for f in fields(AnnealSchedule)}
        if unknown:
            raise ConfigError(f"unknown sampling keys {sorted(unknown)}")
        return AnnealSchedule(**d)

    def cells(self) -> list[dict]:
        return expand_grid(self.grid)

    def cell_settings(self, cell: dict) -> tuple[Hyperparams, AnnealSchedule]:
        hp = {**self.hyperparams, **{k: v for k, v in cell.items() if not k.startswith("sampling.")}}
        sched = {k[9:]: v for k, v in cell.items() if k.startswith("sampling.")}
        return Hyperparams.from_dict(hp), self.schedule(sched)


def expand_grid(grid: dict[str, list]) -> list[dict]:
    """Cartesian product of the grid lists, last key varying fastest."""
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def cell_seed(master: int, index: int) -> int:
    """Seed for sweep cell ``index``; independent of execution order."""
    return int(np.random.SeedSequence(master, spawn_key=(index,)).generate_state(1)[0])


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig.from_dict({})
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    return RunConfig.from_dict(raw, source=p)


def full_grid() -> dict[str, list]:
    text = resources.files("crbm_twins").joinpath("data/full_grid.yaml").read_text()
    return yaml.safe_load(text)["grid"]
