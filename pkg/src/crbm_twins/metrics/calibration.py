"""Probability-integral calibration of observed values against twin samples."""
from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import kstwo

TIE_MODES = ("le", "mid", "randomized")


def phi_values(data: np.ndarray, twins: np.ndarray, mask: np.ndarray, ties: str = "le",
               rng: np.random.Generator | None = None) -> np.ndarray:
    """phi = Phi^{-1}(p) with p = 1 - frac_k(x_data <= x_twin_k), clipped to [1/2K, 1 - 1/2K].

    data, mask: (n, T, A); twins: (n, K, T, A). ``ties="mid"`` gives half
    credit to equal twin values and ``"randomized"`` a uniform fraction,
    which makes p uniform for discrete variables under a correct model.
    """
    if ties not in TIE_MODES:
        raise ValueError(f"ties must be one of {TIE_MODES}")
    K = twins.shape[1]
    x = data[:, None]
    below = (twins < x).mean(axis=1)
    if ties == "le":
        p = below
    else:
        equal = (twins == x).mean(axis=1)
        u = 0.5 if ties == "mid" else rng.random(below.shape)
        p = below + u * equal
    p = np.clip(p, 1 / (2 * K), 1 - 1 / (2 * K))
    return np.where(mask, ndtri(p), np.nan)


def ks_normal_distance(mean: float, var: float) -> float:
    """sup_x |Phi((x - mean)/s) - Phi(x)| for s = sqrt(var), evaluated at the stationary points."""
    s = np.sqrt(var)
    if s == 1.0:
        cands = [mean / 2]
    else:
        a, b, c = s * s - 1, 2 * mean, -mean * mean - 2 * s * s * np.log(s)
        disc = b * b - 4 * a * c
        cands = [] if disc < 0 else [(-b + sg * np.sqrt(disc)) / (2 * a) for sg in (1, -1)]
    d = [abs(ndtr((x - mean) / s) - ndtr(x)) for x in cands]
    d += [0.0]
    return float(max(d))


def phi_calibration(phi: np.ndarray, alpha: float = 0.05, n_tests: int | None = None) -> list[dict]:
    """Per (visit, variable) mean/variance of phi with a Bonferroni KS screen.

    phi: (n, T, A) with NaN where unobserved. ``n_tests`` defaults to the
    number of (visit, variable) cells.
    """
    _, T, A = phi.shape
    n_tests = T * A if n_tests is None else n_tests
    threshold = alpha / n_tests
    rows = []
    for t in range(T):
        for a in range(A):
            v = phi[:, t, a]
            v = v[np.isfinite(v)]
            n = v.size
            if n == 0:
                rows.append({"visit": t, "variable": a, "n": 0, "mean": np.nan, "var": np.nan,
                             "ks": np.nan, "p_value": np.nan, "significant": False})
                continue
            m, var = float(v.mean()), float(v.var())
            D = ks_normal_distance(m, var) if var > 0 else 0.5 + 0.5 * abs(2 * ndtr(m) - 1)
            p = float(kstwo.sf(D, n))
            rows.append({"visit": t, "variable": a, "n": n, "mean": m, "var": var, "ks": D,
                         "p_value": p, "significant": bool(p < threshold)})
    return rows
