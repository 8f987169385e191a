"""Missing-data-aware moments, autocovariances and regression summaries.

Cohort arrays have shape (n_subjects, n_visits, n_variables) with NaN at
unobserved cells and a boolean mask of observed cells. Twin arrays add a
K axis after the subject axis; ``pool_twins`` flattens them so every twin
inherits its subject's observation mask.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def pool_twins(twins: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(n, K, T, A) twins and (n, T, A) data mask -> (n*K, T, A) values and mask."""
    n, K = twins.shape[:2]
    return twins.reshape(n * K, *twins.shape[2:]), np.repeat(mask, K, axis=0)


def lag_autocov(X: np.ndarray, mask: np.ndarray, lag: int, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Lag-``lag`` autocovariance matrix and the joint observation counts.

    ``C[a, b]`` pairs variable ``a`` at visit ``t`` with ``b`` at ``t + lag``
    over visits ``t >= start``; the means inside the covariance are taken
    over the same jointly observed pairs. Entries without joint
    observations are NaN.
    """
    if lag < 0:
        raise ValueError("lag must be non-negative")
    T = X.shape[1]
    if start + lag >= T:
        A = X.shape[2]
        return np.full((A, A), np.nan), np.zeros((A, A))
    Ia = mask[:, start:T - lag].astype(float)
    Ib = mask[:, start + lag:].astype(float)
    Xa = np.where(mask[:, start:T - lag], X[:, start:T - lag], 0.0)
    Xb = np.where(mask[:, start + lag:], X[:, start + lag:], 0.0)
    N = np.einsum("nta,ntb->ab", Ia, Ib)
    with np.errstate(invalid="ignore", divide="ignore"):
        ma = np.einsum("nta,ntb->ab", Xa, Ib) / N
        mb = np.einsum("nta,ntb->ab", Ia, Xb) / N
        C = np.einsum("nta,ntb->ab", Xa, Xb) / N - ma * mb
    C[N == 0] = np.nan
    return C, N


def autocov_r2(C_data: np.ndarray, C_twin: np.ndarray) -> float:
    """1 - SSE / SST over the upper triangle a <= b, SST about the mean twin entry."""
    iu = np.triu_indices(C_data.shape[0])
    d, t = C_data[iu], C_twin[iu]
    ok = np.isfinite(d) & np.isfinite(t)
    d, t = d[ok], t[ok]
    if d.size == 0:
        return float("nan")
    sst = np.sum((t - t.mean()) ** 2)
    if sst == 0:
        return float("nan")
    return float(1 - np.sum((d - t) ** 2) / sst)


def autocorrelation(C: np.ndarray, C0: np.ndarray) -> np.ndarray:
    """Normalize a lag covariance by the equal-time variances of both variables."""
    var = np.diag(C0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return C / np.sqrt(np.outer(var, var))


def weighted_ls(y: np.ndarray, x: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    """(alpha, beta, R^2) minimizing sum w (y - alpha - beta x)^2 over finite entries."""
    y, x, w = (np.ravel(np.asarray(a, dtype=float)) for a in (y, x, w))
    ok = np.isfinite(y) & np.isfinite(x) & np.isfinite(w) & (w > 0)
    y, x, w = y[ok], x[ok], w[ok]
    sw = w.sum()
    if sw == 0:
        return float("nan"), float("nan"), float("nan")
    xm, ym = (w @ x) / sw, (w @ y) / sw
    sxx = w @ (x - xm) ** 2
    if sxx == 0:
        return float("nan"), float("nan"), float("nan")
    beta = (w @ ((x - xm) * (y - ym))) / sxx
    alpha = ym - beta * xm
    syy = w @ (y - ym) ** 2
    r2 = 1 - (w @ (y - alpha - beta * x) ** 2) / syy if syy > 0 else float("nan")
    return float(alpha), float(beta), float(r2)


def theil_sen(x, y) -> tuple[float, float]:
    """Median pairwise slope and median residual intercept; NaN when undefined."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    i, j = np.triu_indices(len(x), k=1)
    dx = x[j] - x[i]
    keep = dx != 0
    if not keep.any():
        return float("nan"), float("nan")
    slope = float(np.median((y[j] - y[i])[keep] / dx[keep]))
    return slope, float(np.median(y - slope * x))


def moments_per_visit(X: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Observed-cell mean and (population) std per visit and variable."""
    n = mask.sum(axis=0)
    Xz = np.where(mask, X, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = Xz.sum(axis=0) / n
        var = (np.where(mask, (X - mu) ** 2, 0.0)).sum(axis=0) / n
    mu[n == 0] = np.nan
    var[n == 0] = np.nan
    return mu, np.sqrt(var)


def auc(scores, labels) -> float:
    """Rank-based ROC AUC with half credit for ties; NaN for a single class."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    n1, n0 = int(y.sum()), int((~y).sum())
    if n1 == 0 or n0 == 0:
        return float("nan")
    r = rankdata(s)
    return float((r[y].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def t_statistic(data, twins) -> float:
    """|mean_i(d_i - mean_k twin_ik)| / sd(d) * sqrt(n), population sd.

    Subjects with a missing data value, or without any defined twin value,
    are excluded.
    """
    d = np.asarray(data, dtype=float)
    tw = np.asarray(twins, dtype=float)
    with np.errstate(invalid="ignore"):
        counts = np.isfinite(tw).sum(axis=1)
        tmean = np.where(counts > 0, np.nansum(tw, axis=1) / np.maximum(counts, 1), np.nan)
    ok = np.isfinite(d) & np.isfinite(tmean)
    d, tmean = d[ok], tmean[ok]
    n = d.size
    if n == 0:
        return float("nan")
    sd = d.std()
    if sd == 0:
        return float("nan")
    return float(abs(np.mean(d - tmean)) / sd * np.sqrt(n))
