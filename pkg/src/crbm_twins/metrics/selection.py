"""Metric reports, rank matrices and two-step minimax model selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError


@dataclass
class MetricReport:
    r2: dict[int, float] = field(default_factory=dict)
    relapse_auc: dict[int, float] = field(default_factory=dict)
    t_edss: float = float("nan")
    t_cdw: dict[str, float] = field(default_factory=dict)
    status: str = "ok"

    def metrics(self) -> dict[str, tuple[float, bool]]:
        """Metric name -> (value, higher_is_better)."""
        out = {f"r2_{lag}": (v, True) for lag, v in sorted(self.r2.items())}
        out.update({f"relapse_auc_{m}": (v, True) for m, v in sorted(self.relapse_auc.items())})
        out["t_edss"] = (self.t_edss, False)
        out.update({f"t_cdw_{k}": (v, False) for k, v in sorted(self.t_cdw.items())})
        return out

    def to_dict(self) -> dict:
        return {"status": self.status, **{k: v for k, (v, _) in self.metrics().items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        r = cls(status=d.get("status", "ok"))
        for k, v in d.items():
            v = float("nan") if v is None else v
            if k.startswith("r2_"):
                r.r2[int(k[3:])] = v
            elif k.startswith("relapse_auc_"):
                r.relapse_auc[int(k[12:])] = v
            elif k == "t_edss":
                r.t_edss = v
            elif k.startswith("t_cdw_"):
                r.t_cdw[k[6:]] = v
        return r

    @classmethod
    def failed(cls) -> "MetricReport":
        return cls(status="failed")


def is_clinical(metric: str) -> bool:
    return metric.startswith(("relapse_auc", "t_edss", "t_cdw"))


def rank_matrix(reports: list[MetricReport]) -> tuple[list[str], np.ndarray]:
    """Per-metric ranks (1 = best), one row per report.

    Each column is a permutation of 1..N: ties go to the lower model index,
    and failed models or undefined values rank after every defined value.
    Metrics undefined for every model are dropped.
    """
    names: list[str] = []
    better: dict[str, bool] = {}
    for r in reports:
        for k, (_, hib) in r.metrics().items():
            if k not in better:
                names.append(k)
                better[k] = hib
    cols = []
    kept = []
    N = len(reports)
    for k in names:
        vals = np.full(N, np.nan)
        for i, r in enumerate(reports):
            if r.status == "ok":
                vals[i] = r.metrics().get(k, (np.nan, True))[0]
        if not np.isfinite(vals).any():
            continue
        key = -vals if better[k] else vals
        undefined = ~np.isfinite(key)
        order = np.lexsort((np.arange(N), np.where(undefined, 0.0, key), undefined))
        ranks = np.empty(N, dtype=int)
        ranks[order] = np.arange(1, N + 1)
        cols.append(ranks)
        kept.append(k)
    M = np.stack(cols, axis=1) if cols else np.zeros((N, 0), dtype=int)
    return kept, M


def minimax_select(M: np.ndarray, metric_names: list[str], clinical: list[str] | None = None) -> int:
    """Index of the selected model.

    Step 1 keeps the ceil(N/4) models with the smallest worst rank over all
    metrics; step 2 returns the kept model with the smallest worst rank over
    the clinical metrics. Ties go to the lower index.
    """
    N = M.shape[0]
    if N == 0:
        raise ConfigError("no models to select from")
    if clinical is None:
        clinical = [m for m in metric_names if is_clinical(m)]
    J = [metric_names.index(m) for m in clinical if m in metric_names]
    if not J:
        raise ConfigError("the clinical metric subset is empty")
    max_rank = M.max(axis=1)
    n_keep = max(1, math.ceil(N / 4))
    kept = np.lexsort((np.arange(N), max_rank))[:n_keep]
    sub = M[np.ix_(kept, J)].max(axis=1)
    best = np.lexsort((kept, sub))[0]
    return int(kept[best])
