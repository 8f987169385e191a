"""Exact computations for small discrete models by enumerating visible states."""
from __future__ import annotations

import itertools

import numpy as np
from scipy.special import logsumexp

from .layout import BERNOULLI, GAUSSIAN, BlockLayout
from .model import CrbmParams, free_energy, free_energy_grad

MAX_ENUMERATED_STATES = 1 << 20


def enumerate_states(layout: BlockLayout) -> np.ndarray:
    """Every valid visible configuration of a layout without Gaussian units."""
    kinds = layout.kinds
    if np.any(kinds == GAUSSIAN):
        raise ValueError("cannot enumerate a layout with Gaussian units")
    factors = []   # list of (indices, options) per independent factor
    grouped = set()
    for g in layout.onehot_groups:
        factors.append((g, np.eye(len(g))))
        grouped.update(g.tolist())
    for i in np.flatnonzero(kinds == BERNOULLI):
        factors.append((np.array([i]), np.array([[0.0], [1.0]])))
    n_states = int(np.prod([len(opts) for _, opts in factors]))
    if n_states > MAX_ENUMERATED_STATES:
        raise ValueError(f"{n_states} visible states is too many to enumerate")
    out = np.zeros((n_states, layout.n_visible))
    for s, combo in enumerate(itertools.product(*[range(len(o)) for _, o in factors])):
        for (idx, opts), c in zip(factors, combo):
            out[s, idx] = opts[c]
    return out


def exact_log_probs(params: CrbmParams, states: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(states, log p(state)) for every visible state."""
    if states is None:
        states = enumerate_states(params.layout)
    negf = -free_energy(states, params)
    return states, negf - logsumexp(negf)


def exact_model_moments(params: CrbmParams) -> dict[str, np.ndarray]:
    """Model expectation of dF/dtheta, summed exactly over visible states."""
    states, logp = exact_log_probs(params)
    return free_energy_grad(states, params, weights=np.exp(logp))
