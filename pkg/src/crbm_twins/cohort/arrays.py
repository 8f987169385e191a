"""Dense (subject, visit, variable) views of a cohort for the metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .records import SubjectRecord
from .schema import CohortSchema


def _numeric(spec, v) -> float:
    if v is None:
        return np.nan
    if spec.kind == "categorical":
        return float(spec.labels.index(v))
    return float(v)


@dataclass
class CohortArrays:
    """Natural-scale values with NaN for missing cells.

    Categorical values are stored as label indices.
    """

    subject_ids: list[str]
    variables: list[str]
    values: np.ndarray      # (n, T, A)
    mask: np.ndarray        # (n, T, A) bool
    n_visits: np.ndarray    # (n,) follow-up length in visits
    static: dict[str, np.ndarray]

    def var_index(self, name: str) -> int:
        return self.variables.index(name)

    def subset(self, rows) -> "CohortArrays":
        rows = np.asarray(rows)
        return CohortArrays([self.subject_ids[i] for i in rows], list(self.variables), self.values[rows],
                            self.mask[rows], self.n_visits[rows], {k: v[rows] for k, v in self.static.items()})


def cohort_arrays(records: list[SubjectRecord], schema: CohortSchema, n_visits: int | None = None,
                  variables: list[str] | None = None) -> CohortArrays:
    """Stack records on a common visit grid (longer follow-up is truncated)."""
    step = schema.visit_interval_months
    if variables is None:
        variables = [s.name for s in schema.observed_longitudinal]
    specs = [schema[v] for v in variables]
    durations = np.array([r.last_month // step + 1 for r in records], dtype=int)
    if n_visits is None:
        n_visits = int(durations.max()) if len(records) else 0
    values = np.full((len(records), n_visits, len(specs)), np.nan)
    for i, rec in enumerate(records):
        for month, row in rec.visits.items():
            t = month // step
            if t >= n_visits:
                continue
            for a, spec in enumerate(specs):
                values[i, t, a] = _numeric(spec, row.get(spec.name))
    static = {s.name: np.array([_numeric(s, r.static_values.get(s.name)) for r in records])
              for s in schema.static}
    return CohortArrays([r.subject_id for r in records], list(variables), values, ~np.isnan(values),
                        np.minimum(durations, n_visits), static)
