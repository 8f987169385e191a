"""Brute-force reference computations used by the tests.

Everything here works from definitions (explicit sums over states, naive
loops) and deliberately avoids the vectorized code paths it checks.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from crbm_twins.crbm import BlockLayout, CrbmParams, energy


def toy_params(n_visible: int, n_hidden: int, seed: int, scale: float = 0.8) -> CrbmParams:
    rng = np.random.default_rng(seed)
    layout = BlockLayout.flat(["bernoulli"] * n_visible)
    return CrbmParams(layout, scale * rng.standard_normal((n_visible, n_hidden)),
                      0.5 * rng.standard_normal(n_visible), np.zeros(n_visible),
                      0.5 * rng.standard_normal(n_hidden), np.zeros(n_hidden), hidden="bernoulli")


def binary_states(n: int) -> np.ndarray:
    return np.array(list(itertools.product([0.0, 1.0], repeat=n)))


def joint_enumeration(params: CrbmParams) -> tuple[np.ndarray, np.ndarray]:
    """(visible states, p(v)) by summing exp(-U(v, h)) over every (v, h) pair."""
    V = binary_states(params.n_visible)
    H = binary_states(params.n_hidden)
    weights = np.zeros(len(V))
    for i, v in enumerate(V):
        weights[i] = sum(math.exp(-energy(v, h, params)) for h in H)
    return V, weights / weights.sum()


def log_likelihood(params: CrbmParams, data: np.ndarray) -> float:
    """Mean log p(v) of fully observed rows, by joint enumeration."""
    V, p = joint_enumeration(params)
    index = {tuple(v): i for i, v in enumerate(V)}
    return float(np.mean([math.log(p[index[tuple(row)]]) for row in data]))


def autocov_loops(X, mask, lag, start=0):
    n, T, A = X.shape
    C = np.full((A, A), np.nan)
    for a in range(A):
        for b in range(A):
            pairs = [(X[i, t, a], X[i, t + lag, b]) for i in range(n) for t in range(start, T - lag)
                     if mask[i, t, a] and mask[i, t + lag, b]]
            if pairs:
                ma = sum(p[0] for p in pairs) / len(pairs)
                mb = sum(p[1] for p in pairs) / len(pairs)
                C[a, b] = sum((p[0] - ma) * (p[1] - mb) for p in pairs) / len(pairs)
    return C


def auc_pairs(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def theil_sen_pairs(x, y):
    slopes = []
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            if x[j] != x[i]:
                slopes.append((y[j] - y[i]) / (x[j] - x[i]))
    slope = float(np.median(slopes))
    return slope, float(np.median([yi - slope * xi for xi, yi in zip(x, y)]))


def weighted_ls_normal_equations(y, x, w):
    """Solve the 2x2 weighted normal equations directly."""
    X = np.column_stack([np.ones(len(x)), x])
    Wm = np.diag(w)
    coef = np.linalg.solve(X.T @ Wm @ X, X.T @ Wm @ y)
    resid = y - X @ coef
    ybar = np.sum(w * y) / np.sum(w)
    return coef[0], coef[1], 1 - np.sum(w * resid**2) / np.sum(w * (y - ybar) ** 2)


def t_stat_direct(d, tw):
    n = len(d)
    diff = sum(d[i] - sum(tw[i]) / len(tw[i]) for i in range(n)) / n
    mean = sum(d) / n
    sd = math.sqrt(sum((x - mean) ** 2 for x in d) / n)
    return abs(diff) / sd * math.sqrt(n)


def minimax_trace(M, clinical_cols):
    """Literal two-step procedure with Python sorting."""
    N = len(M)
    worst = [(max(row), i) for i, row in enumerate(M)]
    keep = [i for _, i in sorted(worst)[: math.ceil(N / 4)]]
    second = [(max(M[i][j] for j in clinical_cols), i) for i in keep]
    return min(second)[1]
