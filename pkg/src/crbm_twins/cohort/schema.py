"""Variable and cohort schemas."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ConfigError, SchemaError, ValidationError

KINDS = ("binary", "ordinal", "categorical", "continuous")
TRANSFORMS = ("none", "scale_by_reciprocal_max", "standardize", "logit_range")

# Which transforms each kind may use.
_ALLOWED = {
    "binary": {"none"},
    "categorical": {"none"},
    "ordinal": {"scale_by_reciprocal_max"},
    "continuous": {"standardize", "logit_range"},
}


@dataclass(frozen=True)
class VariableSpec:
    """One modeled variable: its kind, domain and normalizing transform.

    ``integer`` marks continuous variables whose model output is rounded
    when decoded (PASAT). ``baseline_indicator`` marks the derived binary
    covariate that is 1 at month 0 and 0 afterwards.
    """

    name: str
    kind: str
    longitudinal: bool
    transform: str = "none"
    max: int | None = None
    labels: tuple[str, ...] = ()
    lo: float | None = None
    hi: float | None = None
    delta: float = 0.5
    integer: bool = False
    baseline_indicator: bool = False

    def __post_init__(self):
        if not self.name or not self.name.replace("_", "").isalnum():
            raise ConfigError(f"invalid variable name {self.name!r}")
        if self.kind not in KINDS:
            raise ConfigError(f"{self.name}: unknown kind {self.kind!r}")
        if self.transform not in TRANSFORMS:
            raise ConfigError(f"{self.name}: unknown transform {self.transform!r}")
        if self.transform not in _ALLOWED[self.kind]:
            raise ConfigError(
                f"{self.name}: transform {self.transform!r} is incompatible with kind {self.kind!r}"
            )
        if self.kind == "ordinal" and (self.max is None or int(self.max) < 1):
            raise ConfigError(f"{self.name}: ordinal max must be >= 1")
        if self.kind == "categorical":
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
            if len(self.labels) < 2 or len(set(self.labels)) != len(self.labels):
                raise ConfigError(f"{self.name}: categorical needs >= 2 distinct labels")
        if self.kind == "continuous":
            if self.lo is None or self.hi is None or not float(self.lo) < float(self.hi):
                raise ConfigError(f"{self.name}: continuous requires lo < hi")
            if self.delta <= 0:
                raise ConfigError(f"{self.name}: delta must be positive")
        if self.baseline_indicator and not (self.kind == "binary" and self.longitudinal):
            raise ConfigError(f"{self.name}: baseline indicator must be binary and longitudinal")

    @property
    def n_units(self) -> int:
        return len(self.labels) if self.kind == "categorical" else 1

    @property
    def unit_kind(self) -> str:
        return {"binary": "bernoulli", "categorical": "onehot"}.get(self.kind, "gaussian")

    def coerce(self, value, subject_id=None, month=None):
        """Parse and validate a raw value; ``None`` stays missing."""
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return None
        if isinstance(value, str):
            value = value.strip()
            if value == "":
                return None
        where = dict(subject_id=subject_id, variable=self.name, month=month)
        if self.kind == "categorical":
            label = str(value)
            if label not in self.labels:
                raise ValidationError(f"label {label!r} not in {list(self.labels)}", **where)
            return label
        try:
            x = float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"non-numeric value {value!r}", **where) from None
        if not math.isfinite(x):
            raise ValidationError(f"non-finite value {value!r}", **where)
        if self.kind == "binary":
            if x not in (0.0, 1.0):
                raise ValidationError(f"binary value {value!r} not in {{0, 1}}", **where)
            return int(x)
        if self.kind == "ordinal":
            if x != round(x) or not 0 <= x <= self.max:
                raise ValidationError(f"ordinal value {value!r} not in 0..{self.max}", **where)
            return int(x)
        if not self.lo <= x <= self.hi:
            raise ValidationError(f"value {value!r} outside [{self.lo}, {self.hi}]", **where)
        return x

    def contains(self, value) -> bool:
        try:
            return self.coerce(value) is not None
        except ValidationError:
            return False

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "longitudinal": self.longitudinal,
             "transform": self.transform}
        if self.kind == "ordinal":
            d["max"] = int(self.max)
        if self.kind == "categorical":
            d["labels"] = list(self.labels)
        if self.kind == "continuous":
            d.update(lo=float(self.lo), hi=float(self.hi))
            if self.transform == "logit_range":
                d["delta"] = float(self.delta)
            if self.integer:
                d["integer"] = True
        if self.baseline_indicator:
            d["baseline_indicator"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VariableSpec":
        d = dict(d)
        if "labels" in d:
            d["labels"] = tuple(d["labels"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown variable fields {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class CohortSchema:
    variables: tuple[VariableSpec, ...]
    visit_interval_months: int = 3
    max_visits: int = 20
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ConfigError("variable names must be unique")
        if sum(v.baseline_indicator for v in self.variables) > 1:
            raise ConfigError("at most one baseline indicator variable is permitted")
        if self.visit_interval_months < 1 or self.max_visits < 1:
            raise ConfigError("visit interval and max_visits must be positive")
        object.__setattr__(self, "_index", {v.name: v for v in self.variables})

    def __getitem__(self, name: str) -> VariableSpec:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"unknown variable {name!r}") from None

    def __contains__(self, name) -> bool:
        return name in self._index

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def longitudinal(self) -> list[VariableSpec]:
        return [v for v in self.variables if v.longitudinal]

    @property
    def static(self) -> list[VariableSpec]:
        return [v for v in self.variables if not v.longitudinal]

    @property
    def observed_longitudinal(self) -> list[VariableSpec]:
        """Longitudinal variables that are measured, i.e. not derived from time."""
        return [v for v in self.variables if v.longitudinal and not v.baseline_indicator]

    @property
    def baseline_indicator(self) -> str | None:
        for v in self.variables:
            if v.baseline_indicator:
                return v.name
        return None

    def to_dict(self) -> dict:
        return {
            "visit_interval_months": self.visit_interval_months,
            "max_visits": self.max_visits,
            "variables": [v.to_dict() for v in self.variables],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CohortSchema":
        try:
            variables = [VariableSpec.from_dict(v) for v in d["variables"]]
        except KeyError as exc:
            raise ConfigError(f"schema is missing {exc}") from None
        return cls(
            variables=tuple(variables),
            visit_interval_months=int(d.get("visit_interval_months", 3)),
            max_visits=int(d.get("max_visits", 20)),
        )

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_schema(path) -> CohortSchema:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"schema file not found: {path}")
    with open(path) as fh:
        return CohortSchema.from_dict(yaml.safe_load(fh))


def save_schema(schema: CohortSchema, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(schema.to_dict(), fh, sort_keys=False)


KFSS_COMPONENTS = (
    ("kfss_bowel_bladder", 6),
    ("kfss_brain_stem", 5),
    ("kfss_cerebellar", 5),
    ("kfss_mental", 5),
    ("kfss_pyramidal", 6),
    ("kfss_sensory", 6),
    ("kfss_visual", 6),
)
MS_TYPES = ("RRMS", "SPMS", "PPMS")


def ms_schema(max_visits: int = 20) -> CohortSchema:
    """The 20 covariates plus the baseline indicator used for the MS cohort."""
    V = VariableSpec
    variables = [
        V("age", "continuous", False, "standardize", lo=18, hi=72),
        V("sex", "binary", False),
        V("race", "binary", False),
        V("region", "categorical", False, labels=("europe", "north_america", "other")),
        V("ms_type", "categorical", False, labels=MS_TYPES),
        V("relapses_1y", "ordinal", False, "scale_by_reciprocal_max", max=7),
        V("relapses_2y", "ordinal", False, "scale_by_reciprocal_max", max=14),
        V("baseline", "binary", True, baseline_indicator=True),
        V("relapse", "binary", True),
    ]
    variables += [V(name, "ordinal", True, "scale_by_reciprocal_max", max=m) for name, m in KFSS_COMPONENTS]
    variables += [
        V("ambulation", "ordinal", True, "scale_by_reciprocal_max", max=11),
        V("t25fw", "continuous", True, "logit_range", lo=2, hi=300),
        V("nhpt_dominant", "continuous", True, "logit_range", lo=10, hi=260),
        V("nhpt_nondominant", "continuous", True, "logit_range", lo=10, hi=260),
        V("pasat", "continuous", True, "logit_range", lo=0, hi=60, integer=True),
    ]
    return CohortSchema(tuple(variables), visit_interval_months=3, max_visits=max_visits)
