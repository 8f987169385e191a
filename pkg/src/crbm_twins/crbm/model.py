"""Energy, conditionals and free energy of the CRBM.

Energy of a visible/hidden configuration::

    U(v, h) = sum_i a_i(v_i) - sum_{i,mu} W[i,mu] (v_i / sigma_i^2) (h_mu / eps_mu^2) + sum_mu b_mu(h_mu)

with visible bias functions ``a_i(x) = -bias_i x`` for Bernoulli and
one-hot units and ``(x - bias_i)^2 / (2 sigma_i^2)`` for Gaussian units.
ReLU hidden units have ``b(h) = (h - theta)^2 / (2 eps^2)`` on ``h >= 0``,
so their conditional is a Gaussian with location ``theta + sum_i W v / sigma^2``
and scale ``eps`` truncated to ``h >= 0``. Bernoulli hidden units
(``b(h) = -theta h``, ``eps = 1``) exist for exactly solvable test models.

The coupling enters with a minus sign so that positive weights raise the
hidden location; this is the usual RBM convention and equivalent to the
plus-sign form with ``W -> -W``.

Scales are stored as logarithms. Discrete visible units have ``sigma = 1``
and Bernoulli hidden units ``eps = 1`` regardless of the stored value.
All functions accept single states (1-D) or batches (2-D, one row per
state) and an inverse temperature ``beta`` (scalar or one per row).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_ndtr, logsumexp, ndtri_exp

from .layout import BERNOULLI, GAUSSIAN, ONEHOT, BlockLayout

PARAM_NAMES = ("W", "vbias", "vlogscale", "hbias", "hlogscale")
HIDDEN_KINDS = ("relu", "bernoulli")
_HALF_LOG_2PI = 0.5 * np.log(2 * np.pi)


@dataclass
class CrbmParams:
    layout: BlockLayout
    W: np.ndarray
    vbias: np.ndarray
    vlogscale: np.ndarray
    hbias: np.ndarray
    hlogscale: np.ndarray
    hidden: str = "relu"
    _gauss: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.hidden not in HIDDEN_KINDS:
            raise ValueError(f"hidden kind must be one of {HIDDEN_KINDS}")
        nv, nh = self.layout.n_visible, self.W.shape[1] if self.W.ndim == 2 else -1
        shapes = {"W": (nv, nh), "vbias": (nv,), "vlogscale": (nv,), "hbias": (nh,), "hlogscale": (nh,)}
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, layout requires {shape}")
            setattr(self, name, arr)
        self._gauss = self.layout.kinds == GAUSSIAN

    @property
    def n_visible(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    @property
    def vvar(self) -> np.ndarray:
        """sigma^2 per visible unit (1 for discrete units)."""
        return np.where(self._gauss, np.exp(2 * self.vlogscale), 1.0)

    @property
    def hvar(self) -> np.ndarray:
        """eps^2 per hidden unit (1 for Bernoulli hidden units)."""
        if self.hidden == "bernoulli":
            return np.ones(self.n_hidden)
        return np.exp(2 * self.hlogscale)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def with_arrays(self, arrays: dict[str, np.ndarray]) -> "CrbmParams":
        merged = {**self.arrays(), **arrays}
        return CrbmParams(self.layout, **{k: np.array(v, dtype=float) for k, v in merged.items()},
                          hidden=self.hidden)

    def copy(self) -> "CrbmParams":
        return self.with_arrays({})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays().values())


def init_params(layout: BlockLayout, n_hidden: int, rng: np.random.Generator, data=None,
                weight_scale: float = 0.01, hidden: str = "relu") -> CrbmParams:
    """Small random weights; biases matched to data marginals when given.

    ``data`` is an optional ``(V, mask)`` pair of visible vectors and
    observation masks. Scales start at 1.
    """
    nv = layout.n_visible
    W = weight_scale * rng.standard_normal((nv, n_hidden))
    vbias = np.zeros(nv)
    if data is not None:
        V, M = data
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(M.sum(0) > 0, (V * M).sum(0) / np.maximum(M.sum(0), 1), 0.0)
        kinds = layout.kinds
        p = np.clip(mean, 1e-3, 1 - 1e-3)
        vbias = np.where(kinds == GAUSSIAN, mean, 0.0)
        vbias = np.where(kinds == BERNOULLI, np.log(p / (1 - p)), vbias)
        for g in layout.onehot_groups:
            q = np.clip(mean[g], 1e-3, None)
            vbias[g] = np.log(q / q.sum())
    return CrbmParams(layout, W, vbias, np.zeros(nv), np.zeros(n_hidden), np.zeros(n_hidden), hidden=hidden)


def _as_batch(x: np.ndarray, size: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.ndim != 2 or x.shape[1] != size:
        raise ValueError(f"{what} state has shape {x.shape}, expected (..., {size})")
    return x, single


def _beta_col(beta) -> np.ndarray | float:
    b = np.asarray(beta, dtype=float)
    return b[:, None] if b.ndim == 1 else float(b)


def hidden_input(v: np.ndarray, params: CrbmParams) -> np.ndarray:
    """sum_i W[i, mu] v_i / sigma_i^2, shape (n, n_hidden)."""
    return (v / params.vvar) @ params.W


def visible_field(h: np.ndarray, params: CrbmParams) -> np.ndarray:
    """sum_mu W[i, mu] h_mu / eps_mu^2, shape (n, n_visible)."""
    return (h / params.hvar) @ params.W.T


def energy(v, h, params: CrbmParams) -> np.ndarray | float:
    v, single = _as_batch(v, params.n_visible, "visible")
    h, _ = _as_batch(h, params.n_hidden, "hidden")
    g = params._gauss
    a = np.where(g, (v - params.vbias) ** 2 / (2 * params.vvar), -params.vbias * v).sum(axis=1)
    coupling = np.einsum("ni,ni->n", hidden_input(v, params), h / params.hvar)
    if params.hidden == "relu":
        if np.any(h < 0):
            raise ValueError("ReLU hidden states must be non-negative")
        b = ((h - params.hbias) ** 2 / (2 * params.hvar)).sum(axis=1)
    else:
        b = -(params.hbias * h).sum(axis=1)
    out = a - coupling + b
    return float(out[0]) if single else out


def _mills(z: np.ndarray) -> np.ndarray:
    """phi(z) / Phi(z), stable for large negative z."""
    return np.exp(-0.5 * z * z - _HALF_LOG_2PI - log_ndtr(z))


def _relu_stats(v: np.ndarray, params: CrbmParams):
    mu = params.hbias + hidden_input(v, params)
    eps = np.exp(params.hlogscale)
    z = mu / eps
    lam = _mills(z)
    return mu, eps, z, lam


def cond_hidden(v, params: CrbmParams, mode: str = "sample", rng: np.random.Generator | None = None,
                beta=1.0) -> np.ndarray:
    """Sample ``h ~ p_beta(h | v)`` or return its mean (``mode="mean"``)."""
    v, single = _as_batch(v, params.n_visible, "visible")
    b = _beta_col(beta)
    loc = params.hbias + hidden_input(v, params)
    if params.hidden == "bernoulli":
        p = expit(b * loc)
        out = p if mode == "mean" else (rng.random(p.shape) < p).astype(float)
    else:
        scale = np.exp(params.hlogscale) / np.sqrt(b)
        z = loc / scale
        if mode == "mean":
            out = loc + scale * _mills(z)
        else:
            # y ~ N(0,1) truncated to y >= -z, via the inverse CDF in log space
            u = rng.random(loc.shape)
            y = -ndtri_exp(np.log(u) + log_ndtr(z))
            out = np.maximum(loc + scale * y, 0.0)
    if mode not in ("sample", "mean"):
        raise ValueError(f"mode must be 'sample' or 'mean', not {mode!r}")
    return out[0] if single else out


def cond_visible(h, params: CrbmParams, clamp_mask=None, clamp_values=None, mode: str = "sample",
                 rng: np.random.Generator | None = None, beta=1.0) -> np.ndarray:
    """Sample ``v ~ p_beta(v | h)`` (or its mean); clamped entries pass through."""
    if mode not in ("sample", "mean"):
        raise ValueError(f"mode must be 'sample' or 'mean', not {mode!r}")
    h, single = _as_batch(h, params.n_hidden, "hidden")
    b = _beta_col(beta)
    field_ = visible_field(h, params)
    kinds = params.layout.kinds
    n = h.shape[0]
    out = np.empty((n, params.n_visible))

    g = kinds == GAUSSIAN
    if g.any():
        mean = params.vbias[g] + field_[:, g]
        if mode == "mean":
            out[:, g] = mean
        else:
            sd = np.exp(params.vlogscale[g]) / np.sqrt(b)
            out[:, g] = mean + sd * rng.standard_normal(mean.shape)
    bern = kinds == BERNOULLI
    if bern.any():
        p = expit(b * (params.vbias[bern] + field_[:, bern]))
        out[:, bern] = p if mode == "mean" else (rng.random(p.shape) < p)
    for grp in params.layout.onehot_groups:
        logits = b * (params.vbias[grp] + field_[:, grp])
        p = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        if mode == "mean":
            out[:, grp] = p
        else:
            u = rng.random((n, 1))
            choice = np.minimum((np.cumsum(p, axis=1) < u).sum(axis=1), len(grp) - 1)
            out[:, grp] = 0.0
            out[np.arange(n), grp[choice]] = 1.0

    if clamp_mask is not None:
        mask = np.broadcast_to(np.asarray(clamp_mask, dtype=bool), out.shape)
        values = np.broadcast_to(np.asarray(clamp_values, dtype=float), out.shape)
        out = np.where(mask, values, out)
    return out[0] if single else out


def free_energy(v, params: CrbmParams) -> np.ndarray | float:
    """``-log integral dh exp(-U(v, h))`` (exact; log Z is not subtracted)."""
    v, single = _as_batch(v, params.n_visible, "visible")
    g = params._gauss
    a = np.where(g, (v - params.vbias) ** 2 / (2 * params.vvar), -params.vbias * v).sum(axis=1)
    if params.hidden == "bernoulli":
        hterm = np.logaddexp(0.0, params.hbias + hidden_input(v, params)).sum(axis=1)
    else:
        mu, eps, z, _ = _relu_stats(v, params)
        theta = params.hbias
        hterm = ((mu**2 - theta**2) / (2 * eps**2) + params.hlogscale + _HALF_LOG_2PI + log_ndtr(z)).sum(axis=1)
    out = a - hterm
    return float(out[0]) if single else out


def hidden_mean(v, params: CrbmParams) -> np.ndarray:
    return cond_hidden(v, params, mode="mean")


def free_energy_grad(v, params: CrbmParams, weights=None) -> dict[str, np.ndarray]:
    """Weighted sum over rows of dF(v_n)/dtheta; default weights are 1/n."""
    v, _ = _as_batch(v, params.n_visible, "visible")
    n = v.shape[0]
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    g = params._gauss
    vvar = params.vvar
    hvar = params.hvar
    if params.hidden == "bernoulli":
        hbar = expit(params.hbias + hidden_input(v, params))
        d_hbias = -(w @ hbar)
        d_hlog = np.zeros(params.n_hidden)
    else:
        mu, eps, z, lam = _relu_stats(v, params)
        hbar = mu + eps * lam
        theta = params.hbias
        d_hbias = -(w @ (hbar - theta)) / hvar
        d_hlog = w @ ((mu**2 - theta**2) / hvar + z * lam - 1.0)
    hs = hbar / hvar                       # (n, nh)
    vs = v / vvar                          # (n, nv)
    d_W = -(vs * w[:, None]).T @ hs
    d_vbias = np.where(g, -(w @ (v - params.vbias)) / vvar, -(w @ v))
    coupling = np.einsum("ni,ni->ni", vs, hs @ params.W.T)   # x_j/sigma_j^2 * sum_mu W h/eps^2
    d_vlog = np.where(g, w @ (-(v - params.vbias) ** 2 / vvar + 2 * coupling), 0.0)
    return {"W": d_W, "vbias": d_vbias, "vlogscale": d_vlog, "hbias": d_hbias, "hlogscale": d_hlog}
