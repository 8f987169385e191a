"""Subject records, tidy CSV I/O and 90-day visit binning."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..errors import DataError, SchemaError, ValidationError
from .schema import CohortSchema

DAYS_PER_MONTH = 30
# Extra source column accepted by load_tidy: the ambulation score is derived from it.
EDSS_COLUMN = "edss"


@dataclass
class SubjectRecord:
    subject_id: str
    static_values: dict[str, Any] = field(default_factory=dict)
    visits: dict[int, dict[str, Any]] = field(default_factory=dict)

    @property
    def months(self) -> list[int]:
        return sorted(self.visits)

    @property
    def last_month(self) -> int:
        return max(self.visits) if self.visits else 0

    def value(self, name: str, month: int | None = None):
        if month is None:
            return self.static_values.get(name)
        return self.visits.get(month, {}).get(name)

    def has_longitudinal_data(self, month: int, schema: CohortSchema) -> bool:
        row = self.visits.get(month, {})
        return any(row.get(v.name) is not None for v in schema.observed_longitudinal)


def validate_record(record: SubjectRecord, schema: CohortSchema) -> SubjectRecord:
    """Coerce every value through its VariableSpec; raises ValidationError."""
    sid = record.subject_id
    static = {}
    for name, value in record.static_values.items():
        spec = schema[name]
        if spec.longitudinal:
            raise SchemaError(f"{name} is longitudinal but was given as static")
        static[name] = spec.coerce(value, sid)
    visits = {}
    step = schema.visit_interval_months
    indicator = schema.baseline_indicator
    for month, row in record.visits.items():
        if month < 0 or month % step:
            raise ValidationError(f"month {month} is not a non-negative multiple of {step}", sid, month=month)
        clean = {}
        for name, value in row.items():
            spec = schema[name]
            if not spec.longitudinal:
                raise SchemaError(f"{name} is static but was given per visit")
            clean[name] = spec.coerce(value, sid, month)
        if indicator is not None:
            expected = int(month == 0)
            if clean.get(indicator) not in (None, expected):
                raise ValidationError(f"baseline indicator must be {expected}", sid, indicator, month)
            clean[indicator] = expected
        visits[int(month)] = clean
    return SubjectRecord(str(sid), static, dict(sorted(visits.items())))


def observation_mask(record: SubjectRecord, schema: CohortSchema, n_visits: int | None = None) -> np.ndarray:
    """Indicator I[t, a] over the regular visit grid for longitudinal variables."""
    step = schema.visit_interval_months
    if n_visits is None:
        n_visits = record.last_month // step + 1
    lon = schema.longitudinal
    mask = np.zeros((n_visits, len(lon)), dtype=bool)
    for t in range(n_visits):
        row = record.visits.get(t * step)
        if row is None:
            continue
        for a, spec in enumerate(lon):
            mask[t, a] = row.get(spec.name) is not None
    return mask


def load_tidy(path, schema: CohortSchema) -> list[SubjectRecord]:
    """Read a comma-separated tidy file: one row per (subject, visit month).

    Columns are ``subject_id``, ``visit_month`` and one column per schema
    variable; an empty cell is a missing value. Static variables may be
    repeated on every row but must agree. If the schema has an
    ``ambulation`` variable, an ``edss`` column may be supplied instead and
    the ambulation score is derived from it.
    """
    from ..ms_domain import ambulation_from_edss
    from ..errors import DomainError

    path = Path(path)
    if not path.exists():
        raise DataError(f"tidy file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("subject_id", "visit_month"):
            if col not in header:
                raise SchemaError(f"missing required column {col!r}")
        derive_amb = EDSS_COLUMN in header and EDSS_COLUMN not in schema and "ambulation" in schema
        unknown = [c for c in header if c not in ("subject_id", "visit_month") and c not in schema
                   and not (c == EDSS_COLUMN and derive_amb)]
        if unknown:
            raise SchemaError(f"unknown columns {unknown}")
        step = schema.visit_interval_months
        raw: dict[str, SubjectRecord] = {}
        for lineno, row in enumerate(reader, start=2):
            sid = row["subject_id"].strip()
            if not sid:
                raise ValidationError(f"empty subject_id on line {lineno}")
            try:
                month = int(float(row["visit_month"]))
            except ValueError:
                raise ValidationError(f"bad visit_month {row['visit_month']!r}", sid) from None
            if month < 0 or month % step:
                raise ValidationError(f"visit month must be a non-negative multiple of {step}", sid, month=month)
            rec = raw.setdefault(sid, SubjectRecord(sid))
            if month in rec.visits:
                raise ValidationError("duplicate visit row", sid, month=month)
            visit = {}
            for col in header:
                if col in ("subject_id", "visit_month"):
                    continue
                if col == EDSS_COLUMN and derive_amb:
                    cell = row[col].strip()
                    if cell == "" or row.get("ambulation", "").strip() != "":
                        continue
                    try:
                        visit["ambulation"] = ambulation_from_edss(float(cell))
                    except (DomainError, ValueError):
                        raise ValidationError(f"EDSS {cell!r} outside the half-point grid 0..10",
                                              sid, EDSS_COLUMN, month) from None
                    continue
                spec = schema[col]
                value = spec.coerce(row[col], sid, month)
                if spec.longitudinal:
                    visit[col] = value
                elif value is not None:
                    prev = rec.static_values.get(col)
                    if prev is not None and prev != value:
                        raise ValidationError(f"static value changes ({prev!r} -> {value!r})", sid, col, month)
                    rec.static_values[col] = value
            rec.visits[month] = visit
    return [validate_record(r, schema) for r in raw.values()]


def write_tidy(records: Iterable[SubjectRecord], schema: CohortSchema, path, extra=None) -> None:
    """Write records in the same dialect ``load_tidy`` reads.

    ``extra`` optionally maps column name -> function(record, month) for
    additional leading columns (used for twin indices).
    """
    extra = extra or {}
    cols = ["subject_id", *extra, "visit_month", *schema.names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for rec in records:
            for month in rec.months:
                row = [rec.subject_id, *(fn(rec, month) for fn in extra.values()), month]
                for spec in schema.variables:
                    v = rec.visits[month].get(spec.name) if spec.longitudinal else rec.static_values.get(spec.name)
                    row.append(_fmt(v))
                writer.writerow(row)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        # repr round-trips exactly; integral floats are written without ".0"
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    return str(v)


def _window_month(day: float, interval: int) -> int:
    width = interval * DAYS_PER_MONTH
    return interval * int(math.floor((day + width / 2) / width))


def _resolve(spec, values: list):
    """Collapse all measurements of one variable inside one window."""
    if spec.kind == "categorical":
        counts = {lab: values.count(lab) for lab in spec.labels}
        best = max(counts.values())
        # ties go to the later label
        return [lab for lab in spec.labels if counts[lab] == best][-1]
    mean = float(np.mean(values))
    if spec.kind in ("binary", "ordinal"):
        return int(math.floor(mean + 0.5))
    return mean


def bin_visits(raw: Iterable[tuple], schema: CohortSchema) -> list[SubjectRecord]:
    """Group (subject, day, variable, value) measurements into visit windows.

    Windows are centred on multiples of the visit interval (90 days for a
    3-month grid) and span half an interval on either side; values falling
    in the same window are averaged. Static variables ignore the day.
    """
    per_subject: dict[str, dict] = defaultdict(lambda: {"static": defaultdict(list), "visits": defaultdict(lambda: defaultdict(list))})
    step = schema.visit_interval_months
    for sid, day, name, value in raw:
        sid = str(sid)
        if day < 0:
            raise DataError(f"negative visit day {day} for subject {sid}")
        spec = schema[name]
        value = spec.coerce(value, sid)
        if value is None:
            continue
        entry = per_subject[sid]
        if spec.longitudinal:
            entry["visits"][_window_month(day, step)][name].append(value)
        else:
            entry["static"][name].append(value)
    records = []
    for sid, entry in per_subject.items():
        static = {}
        for name, vals in entry["static"].items():
            if len(set(vals)) > 1:
                raise ValidationError(f"conflicting static values {sorted(set(map(str, vals)))}", sid, name)
            static[name] = vals[0]
        visits = {}
        months = sorted(entry["visits"])
        if months:
            for month in range(0, months[-1] + 1, step):
                cells = entry["visits"].get(month, {})
                visits[month] = {spec.name: _resolve(spec, cells[spec.name]) if cells.get(spec.name) else None
                                 for spec in schema.longitudinal}
        else:
            visits[0] = {spec.name: None for spec in schema.longitudinal}
        records.append(validate_record(SubjectRecord(sid, static, visits), schema))
    return records


def records_to_raw(records: Iterable[SubjectRecord], schema: CohortSchema) -> list[tuple]:
    """Flatten binned records back into measurement tuples (day = month * 30)."""
    out = []
    indicator = schema.baseline_indicator
    for rec in records:
        for name, value in rec.static_values.items():
            if value is not None:
                out.append((rec.subject_id, 0, name, value))
        for month, row in rec.visits.items():
            for name, value in row.items():
                if value is not None and name != indicator:
                    out.append((rec.subject_id, month * DAYS_PER_MONTH, name, value))
    return out
