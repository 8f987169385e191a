"""Cross-validated logistic-regression classifiers separating data from twins."""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import roc_auc_score
from sklearn.model_selection import GroupKFold
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

MIN_SUBJECTS = 10


def _impute(values: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-mean imputation of data values; returns (imputed data, fill values)."""
    counts = mask.sum(axis=0)
    fill = np.where(counts > 0, np.where(mask, values, 0.0).sum(axis=0) / np.maximum(counts, 1), 0.0)
    return np.where(mask, values, fill), fill


def visit_features(data: np.ndarray, mask: np.ndarray, twin: np.ndarray, visit: int, diff: bool):
    """Feature rows for data and twin at one visit (or visit difference).

    Missing data cells get their visit's observed mean, and the same value
    overwrites the twin's cell so that missingness carries no signal.
    """
    def at(t):
        d, fill = _impute(data[:, t], mask[:, t])
        tw = np.where(mask[:, t], twin[:, t], fill)
        return d, tw
    d1, t1 = at(visit)
    if not diff:
        return d1, t1
    d0, t0 = at(visit - 1)
    return d1 - d0, t1 - t0


def cv_auc(X: np.ndarray, y: np.ndarray, seed: int, n_folds: int = 5, groups: np.ndarray | None = None) -> float:
    """Mean held-out AUC over folds; rows sharing a group stay in the same fold.

    Keeping a subject and its twin together avoids the downward bias that
    arises when a row's near-duplicate sits in the training fold with the
    opposite label.
    """
    if groups is None:
        groups = np.arange(len(y))
    folds = GroupKFold(n_splits=n_folds, shuffle=True, random_state=seed)
    aucs = []
    for tr, te in folds.split(X, y, groups):
        clf = make_pipeline(StandardScaler(), LogisticRegression(C=1e6, max_iter=2000))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            clf.fit(X[tr], y[tr])
        aucs.append(roc_auc_score(y[te], clf.predict_proba(X[te])[:, 1]))
    return float(np.mean(aucs))


def adversary_auc(data: np.ndarray, mask: np.ndarray, twins: np.ndarray, visit: int, n_sims: int = 100,
                  diff: bool = False, seed: int = 0, present: np.ndarray | None = None):
    """Mean and std over simulations of the 5-fold CV AUC at one visit.

    data, mask: (n, T, A); twins: (n, K, T, A), simulation ``s`` uses twin
    ``s mod K`` of every subject. ``present`` marks subjects that have the
    visit (default: any observed variable there). Returns ``None`` when fewer
    than ``MIN_SUBJECTS`` subjects qualify or the visit is the baseline.
    """
    if visit < 1:
        return None
    if present is None:
        present = mask[:, visit].any(axis=1)
        if diff:
            present &= mask[:, visit - 1].any(axis=1)
    idx = np.flatnonzero(present)
    if idx.size < MIN_SUBJECTS:
        return None
    d, m = data[idx], mask[idx]
    seeds = np.random.SeedSequence(seed).generate_state(n_sims)
    aucs = []
    for s in range(n_sims):
        tw = twins[idx, s % twins.shape[1]]
        fd, ft = visit_features(d, m, tw, visit, diff)
        X = np.vstack([fd, ft])
        y = np.r_[np.ones(len(fd)), np.zeros(len(ft))]
        groups = np.r_[np.arange(len(fd)), np.arange(len(ft))]
        aucs.append(cv_auc(X, y, int(seeds[s]), groups=groups))
    return float(np.mean(aucs)), float(np.std(aucs))
