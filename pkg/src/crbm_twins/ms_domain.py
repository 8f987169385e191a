"""MS-specific derived quantities: ambulation score, total EDSS, and outcomes.

EDSS values live on the half-point grid 0, 0.5, ..., 10. Below 5.0 the
total score is driven by the Kurtzke functional-system (KFSS) grades; from
5.0 upward it is determined by ambulation, which is modeled through the
ordinal ambulation score ``2 * (EDSS - 4.5)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .cohort.schema import KFSS_COMPONENTS
from .errors import ConfigError, DomainError

KFSS_NAMES = tuple(name for name, _ in KFSS_COMPONENTS)
KFSS_MAX = dict(KFSS_COMPONENTS)
AMBULATION_MAX = 11
AMBULATION_CUTOFF = 4.5

# (window length in months, latest window start in months)
CDW_VARIANTS = {"a": (6, 12), "b": (3, 24), "c": (6, 24)}


def _check_halfpoint(edss) -> float:
    x = float(edss)
    if not math.isfinite(x) or not 0.0 <= x <= 10.0 or 2 * x != round(2 * x):
        raise DomainError(f"EDSS {edss!r} is not on the half-point grid 0..10")
    return x


def ambulation_from_edss(edss) -> int:
    """Ambulation score implied by a total EDSS score."""
    x = _check_halfpoint(edss)
    if x <= AMBULATION_CUTOFF:
        return 0
    return int(round(2 * (x - AMBULATION_CUTOFF)))


@dataclass(frozen=True)
class EdssRuleTable:
    """Ordered KFSS-pattern rules for EDSS <= 4.5 (see ``data/edss_rules.yaml``)."""

    rules: tuple[tuple[float, tuple[dict[int, int], ...]], ...]

    def score(self, grades: Sequence[int]) -> float:
        grades = np.asarray(grades, dtype=int)
        for edss, conditions in self.rules:
            for cond in conditions:
                if all(np.count_nonzero(grades >= g) >= n for g, n in cond.items()):
                    return edss
        return 0.0

    @classmethod
    def from_dict(cls, d: Mapping) -> "EdssRuleTable":
        rules = []
        try:
            for rule in d["rules"]:
                edss = _check_halfpoint(rule["edss"])
                if edss > AMBULATION_CUTOFF:
                    raise ConfigError(f"rule EDSS {edss} exceeds {AMBULATION_CUTOFF}")
                conds = tuple({int(g): int(n) for g, n in c.items()} for c in rule["any_of"])
                rules.append((edss, conds))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ConfigError(f"malformed EDSS rule table: {exc}") from None
        return cls(tuple(rules))


def load_rule_table(path=None) -> EdssRuleTable:
    if path is None:
        text = resources.files("crbm_twins").joinpath("data/edss_rules.yaml").read_text()
    else:
        text = Path(path).read_text()
    return EdssRuleTable.from_dict(yaml.safe_load(text))


_DEFAULT_RULES: EdssRuleTable | None = None


def default_rule_table() -> EdssRuleTable:
    global _DEFAULT_RULES
    if _DEFAULT_RULES is None:
        _DEFAULT_RULES = load_rule_table()
    return _DEFAULT_RULES


def edss_total(kfss, ambulation, rule_table: EdssRuleTable | None = None) -> float | None:
    """Total EDSS from the seven KFSS grades and the ambulation score.

    ``kfss`` is either a mapping keyed by component name or a sequence in
    ``KFSS_NAMES`` order. Returns ``None`` when any input is missing, which
    marks the score as non-computable.
    """
    if ambulation is None or (isinstance(ambulation, float) and math.isnan(ambulation)):
        return None
    amb = int(round(float(ambulation)))
    if not 0 <= amb <= AMBULATION_MAX:
        raise DomainError(f"ambulation score {ambulation!r} not in 0..{AMBULATION_MAX}")
    if amb > 0:
        return AMBULATION_CUTOFF + amb / 2
    if isinstance(kfss, Mapping):
        grades = [kfss.get(name) for name in KFSS_NAMES]
    else:
        grades = list(kfss)
    if len(grades) != len(KFSS_NAMES):
        raise DomainError(f"expected {len(KFSS_NAMES)} KFSS components, got {len(grades)}")
    if any(g is None or (isinstance(g, float) and math.isnan(g)) for g in grades):
        return None
    grades = [int(round(float(g))) for g in grades]
    for name, g in zip(KFSS_NAMES, grades):
        if not 0 <= g <= KFSS_MAX[name]:
            raise DomainError(f"{name} grade {g} not in 0..{KFSS_MAX[name]}")
    return (rule_table or default_rule_table()).score(grades)


@dataclass(frozen=True)
class EdssTrajectory:
    """Per-visit EDSS on a month grid; NaN marks a missing or non-computable visit."""

    months: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        months = np.asarray(self.months, dtype=int)
        values = np.asarray(self.values, dtype=float)
        if months.shape != values.shape:
            raise DomainError("months and values must have the same shape")
        ok = ~np.isnan(values)
        if np.any((values[ok] < 0) | (values[ok] > 10) | (2 * values[ok] != np.round(2 * values[ok]))):
            raise DomainError("EDSS values must lie on the half-point grid 0..10")
        order = np.argsort(months)
        object.__setattr__(self, "months", months[order])
        object.__setattr__(self, "values", values[order])

    @classmethod
    def from_mapping(cls, by_month: Mapping[int, float | None]) -> "EdssTrajectory":
        months = sorted(by_month)
        vals = [np.nan if by_month[m] is None else float(by_month[m]) for m in months]
        return cls(np.array(months, dtype=int), np.array(vals, dtype=float))

    def at(self, month: int) -> float | None:
        hit = np.nonzero(self.months == month)[0]
        if hit.size == 0 or np.isnan(self.values[hit[0]]):
            return None
        return float(self.values[hit[0]])


def edss_change_18m(traj: EdssTrajectory) -> float | None:
    start, end = traj.at(0), traj.at(18)
    if start is None or end is None:
        return None
    return end - start


@dataclass(frozen=True)
class CdwLabel:
    variant: str
    value: bool | None
    computable: bool


def cdw_threshold(baseline_edss: float) -> float:
    return 0.5 if baseline_edss > 6.0 else 1.0


def cdw_label(traj: EdssTrajectory, variant: str, interval: int = 3) -> CdwLabel:
    """Confirmed disability worsening label on a regular visit grid.

    A confirmation window of the variant's length must start at a
    post-baseline visit no later than the variant's horizon. A window
    confirms worsening when every visit in it is observed and meets the
    threshold; it refutes worsening when any observed visit falls short;
    otherwise it is undecided. The label is true if some window confirms,
    false if every window refutes, and non-computable otherwise.
    """
    if variant not in CDW_VARIANTS:
        raise ConfigError(f"unknown CDW variant {variant!r}")
    length, horizon = CDW_VARIANTS[variant]
    base = traj.at(0)
    if base is None:
        return CdwLabel(variant, None, False)
    need = cdw_threshold(base) - 1e-9
    undecided = False
    for start in range(interval, horizon + 1, interval):
        status = True
        for month in range(start, start + length + 1, interval):
            v = traj.at(month)
            if v is None:
                status = None
            elif v - base < need:
                status = False
                break
        if status is True:
            return CdwLabel(variant, True, True)
        if status is None:
            undecided = True
    if undecided:
        return CdwLabel(variant, None, False)
    return CdwLabel(variant, False, True)


def edss_validation_report(rows, rule_table: EdssRuleTable | None = None) -> dict:
    """Compare reported EDSS against the score recomputed from KFSS grades.

    ``rows`` yields ``(reported_edss, kfss_grades)`` pairs; only rows with a
    reported score at or below 4.5 and complete grades are compared.
    """
    compared = []
    for reported, grades in rows:
        if reported is None:
            continue
        reported = _check_halfpoint(reported)
        if reported > AMBULATION_CUTOFF:
            continue
        recomputed = edss_total(grades, 0, rule_table)
        if recomputed is None:
            continue
        compared.append((reported, recomputed))
    n = len(compared)
    disagree = sum(1 for r, c in compared if r != c)
    return {
        "n_compared": n,
        "n_disagree": disagree,
        "disagreement_fraction": disagree / n if n else float("nan"),
        "pairs": compared,
    }


def edss_array(kfss: np.ndarray, ambulation: np.ndarray, rule_table: EdssRuleTable | None = None) -> np.ndarray:
    """Vectorized ``edss_total``: ``kfss`` has the seven grades on its last axis.

    NaN inputs give NaN; values are rounded to the nearest grade first.
    """
    kfss = np.asarray(kfss, dtype=float)
    amb = np.asarray(ambulation, dtype=float)
    table = rule_table or default_rule_table()
    grades = np.round(kfss)
    out = np.zeros(amb.shape)
    assigned = np.zeros(amb.shape, dtype=bool)
    for edss, conditions in table.rules:
        hit = np.zeros(amb.shape, dtype=bool)
        for cond in conditions:
            ok = np.ones(amb.shape, dtype=bool)
            for g, n in cond.items():
                ok &= (grades >= g).sum(axis=-1) >= n
            hit |= ok
        new = hit & ~assigned
        out[new] = edss
        assigned |= hit
    a = np.round(amb)
    out = np.where(a > 0, AMBULATION_CUTOFF + a / 2, out)
    missing = np.isnan(amb) | ((a <= 0) & np.isnan(kfss).any(axis=-1))
    return np.where(missing, np.nan, out)


def cdw_array(edss: np.ndarray, variant: str, interval: int = 3) -> np.ndarray:
    """Vectorized ``cdw_label`` over the last axis (visits 0, interval, ...).

    Returns 1.0 / 0.0 labels and NaN where non-computable.
    """
    if variant not in CDW_VARIANTS:
        raise ConfigError(f"unknown CDW variant {variant!r}")
    length, horizon = CDW_VARIANTS[variant]
    edss = np.asarray(edss, dtype=float)
    T = edss.shape[-1]
    base = edss[..., 0]
    need = np.where(base > 6.0, 0.5, 1.0)[..., None] - 1e-9
    confirmed = np.zeros(base.shape, dtype=bool)
    undecided = np.zeros(base.shape, dtype=bool)
    for start in range(interval, horizon + 1, interval):
        idx = [m // interval for m in range(start, start + length + 1, interval)]
        inside = [i for i in idx if i < T]
        vals = edss[..., inside]
        observed = ~np.isnan(vals)
        meets = observed & (vals - base[..., None] >= need)
        fails = (observed & ~meets).any(axis=-1)
        complete = len(inside) == len(idx)
        all_meet = meets.all(axis=-1) & complete
        confirmed |= all_meet
        undecided |= ~fails & ~all_meet
    out = np.where(confirmed, 1.0, np.where(undecided, np.nan, 0.0))
    return np.where(np.isnan(base), np.nan, out)
