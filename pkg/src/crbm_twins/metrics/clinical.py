"""Clinical model-selection metrics: relapse AUC, EDSS change and CDW agreement."""
from __future__ import annotations

import numpy as np

from ..ms_domain import KFSS_NAMES, cdw_array, edss_array
from .stats import auc, t_statistic

RELAPSE_MONTHS = (3, 6, 9, 12, 15, 18)


def edss_from_arrays(X: np.ndarray, variables: list[str]) -> np.ndarray:
    """Total EDSS over the leading axes of a (..., n_vars) natural-scale array."""
    idx = [variables.index(nm) for nm in KFSS_NAMES]
    return edss_array(X[..., idx], X[..., variables.index("ambulation")])


def truncate_to_duration(twins: np.ndarray, n_visits: np.ndarray) -> np.ndarray:
    """NaN-out twin visits beyond each subject's own last visit. twins: (n, K, T, ...)."""
    T = twins.shape[2]
    keep = np.arange(T)[None, :] < np.asarray(n_visits)[:, None]
    shape = (twins.shape[0], 1, T) + (1,) * (twins.ndim - 3)
    return np.where(keep.reshape(shape), twins, np.nan)


def relapse_auc(data_relapse: np.ndarray, twin_relapse: np.ndarray, visit: int) -> float:
    """AUC of twin relapse fractions at ``visit`` against observed relapses there.

    data_relapse: (n, T) with NaN missing; twin_relapse: (n, K, T).
    """
    y = data_relapse[:, visit]
    tw = twin_relapse[:, :, visit]
    counts = np.isfinite(tw).sum(axis=1)
    score = np.where(counts > 0, np.nansum(tw, axis=1) / np.maximum(counts, 1), np.nan)
    ok = np.isfinite(y) & np.isfinite(score)
    return auc(score[ok], y[ok] > 0.5)


def edss_change(edss: np.ndarray, month: int = 18, interval: int = 3) -> np.ndarray:
    j = month // interval
    if edss.shape[-1] <= j:
        return np.full(edss.shape[:-1], np.nan)
    return edss[..., j] - edss[..., 0]


def t_edss(data_edss: np.ndarray, twin_edss: np.ndarray, interval: int = 3) -> float:
    """data_edss: (n, T); twin_edss: (n, K, T)."""
    return t_statistic(edss_change(data_edss, 18, interval), edss_change(twin_edss, 18, interval))


def t_cdw(data_edss: np.ndarray, twin_edss: np.ndarray, variant: str, population=None,
          interval: int = 3) -> float:
    """t statistic on CDW labels; ``population`` optionally restricts subjects."""
    d = cdw_array(data_edss, variant, interval)
    tw = cdw_array(twin_edss, variant, interval)
    if population is not None:
        pop = np.asarray(population, dtype=bool)
        d, tw = d[pop], tw[pop]
    return t_statistic(d, tw)
