"""Minibatch training of a CRBM on (possibly incomplete) visible vectors.

Each update combines the composite-likelihood gradient (data moments of
dF/dtheta minus model moments from persistent driven chains), the
adversarial gradient ``Cov_model(T(h), dF/dtheta)`` with ``T = 2q - 1`` from
a random-forest critic fitted on the previous minibatch, and an l2 penalty
on the weights::

    grad = gamma (pos - neg) + (1 - gamma) adv + l2 W,   gamma = 1 - adversary_weight
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ..crbm.layout import GAUSSIAN, BlockLayout
from ..crbm.model import PARAM_NAMES, CrbmParams, cond_hidden, cond_visible, free_energy, free_energy_grad, init_params
from ..errors import ConfigError, TrainingDiverged
from ..sampling import BetaProcess, GibbsChain, gibbs_step, random_visible
from .adam import Adam, linear_decay
from .critic import Critic, critic_fit


@dataclass
class Hyperparams:
    n_hidden: int = 27
    n_epochs: int = 100
    batch_size: int = 500
    initial_learning_rate: float = 0.005
    sigma_beta: float = 0.15
    l2_penalty: float = 1e-4
    adversary_weight: float = 0.3
    mc_steps: int = 10
    optimizer: str = "adam"
    fill_sweeps: int = 5
    beta_autocorr: float = 0.9
    critic_trees: int = 50
    critic_depth: int = 8
    lr_final_fraction: float = 0.1
    weight_scale: float = 0.01
    logscale_bound: float = 3.0
    max_coupling: float = 0.95
    hidden: str = "relu"

    def __post_init__(self):
        for name in ("n_hidden", "n_epochs", "batch_size", "mc_steps", "critic_trees", "critic_depth"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
            setattr(self, name, int(getattr(self, name)))
        if not self.initial_learning_rate > 0:
            raise ConfigError("initial_learning_rate must be positive")
        if self.sigma_beta < 0 or self.l2_penalty < 0 or self.fill_sweeps < 0:
            raise ConfigError("sigma_beta, l2_penalty and fill_sweeps must be non-negative")
        if not 0 <= self.adversary_weight <= 1:
            raise ConfigError("adversary_weight must lie in [0, 1]")
        if not 0 <= self.beta_autocorr < 1:
            raise ConfigError("beta_autocorr must lie in [0, 1)")
        if self.optimizer.lower() != "adam":
            raise ConfigError(f"unsupported optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)


def fill_missing(V: np.ndarray, M: np.ndarray, params: CrbmParams, rng: np.random.Generator,
                 sweeps: int) -> np.ndarray:
    """Sample unobserved entries with observed ones clamped (beta = 1)."""
    if M.all():
        return V.copy()
    init = random_visible(params, V.shape[0], rng)
    v = np.where(M, V, init)
    for _ in range(sweeps):
        h = cond_hidden(v, params, rng=rng)
        v = cond_visible(h, params, M, V, rng=rng)
    return v


def positive_phase(V: np.ndarray, M: np.ndarray, params: CrbmParams, rng: np.random.Generator,
                   sweeps: int = 5):
    """(hidden means, data moments of dF/dtheta) with missing entries filled by Gibbs."""
    if V.shape[0] == 0:
        raise ValueError("positive phase needs a non-empty batch")
    filled = fill_missing(V, M, params, rng, sweeps)
    return cond_hidden(filled, params, mode="mean"), free_energy_grad(filled, params)


def negative_phase(chain: GibbsChain, params: CrbmParams, mc_steps: int, rng: np.random.Generator):
    """Advance persistent chains ``mc_steps`` driven sweeps; (hidden means, model moments, visibles)."""
    for _ in range(mc_steps):
        gibbs_step(chain, params, rng)
    return cond_hidden(chain.v, params, mode="mean"), free_energy_grad(chain.v, params), chain.v


def adversarial_gradient(model_v: np.ndarray, model_hidden: np.ndarray, critic: Critic | None,
                         params: CrbmParams) -> dict[str, np.ndarray]:
    """Gradient of A = -E_model[2q - 1]: the model covariance of T with dF/dtheta."""
    if critic is None:
        return {k: np.zeros_like(getattr(params, k)) for k in PARAM_NAMES}
    T = critic.score(model_hidden)
    w = (T - T.mean()) / len(T)
    return free_energy_grad(model_v, params, weights=w)


@dataclass
class TrainResult:
    params: CrbmParams
    log: list[dict]
    hyperparams: Hyperparams


def cone_gain(A: np.ndarray, iters: int = 100) -> tuple[float, np.ndarray]:
    """Approximate ``max |A y|`` over unit ``y >= 0`` by projected power iteration.

    Returns the best gain found and its maximizer. Starts from the all-ones
    direction, the positive and negative parts of the leading right singular
    vector, and the largest column.
    """
    G = A.T @ A
    _, _, Vt = np.linalg.svd(A, full_matrices=False)
    starts = [np.ones(A.shape[1]), np.maximum(Vt[0], 0), np.maximum(-Vt[0], 0),
              np.eye(A.shape[1])[np.argmax((A * A).sum(0))]]
    best, best_y = -1.0, starts[0]
    for y in starts:
        if not y.any():
            continue
        y = y / np.linalg.norm(y)
        for _ in range(iters):
            z = np.maximum(G @ y, 0)
            nz = np.linalg.norm(z)
            if nz == 0:
                break
            z /= nz
            if np.abs(z - y).max() < 1e-10:
                y = z
                break
            y = z
        gain = float(np.linalg.norm(A @ y))
        if gain > best:
            best, best_y = gain, y
    return best, best_y


def project_coupling(params: CrbmParams, bound: float, max_rounds: int = 20) -> CrbmParams:
    """Shrink the scaled Gaussian-to-ReLU coupling until its cone gain is at most ``bound``.

    With Gaussian visible and ReLU hidden units the joint density is
    normalizable iff ``|A y| < |y|`` for every ``y >= 0``, where
    ``A = diag(1/sigma) W diag(1/eps)`` over Gaussian rows; otherwise Gibbs
    chains run off to infinity. Each round removes the excess gain along the
    worst nonnegative hidden direction found, leaving other directions intact.
    """
    g = params.layout.kinds == GAUSSIAN
    if not g.any():
        return params
    sig = np.exp(params.vlogscale[g])[:, None]
    eps = np.exp(params.hlogscale)[None, :]
    A = params.W[g] / (sig * eps)
    changed = False
    for _ in range(max_rounds):
        gain, y = cone_gain(A)
        if gain <= bound:
            break
        A = A - (1 - bound / gain) * np.outer(A @ y, y)
        changed = True
    if not changed:
        return params
    W = params.W.copy()
    W[g] = A * sig * eps
    return params.with_arrays({"W": W})


def _column_fill(V: np.ndarray, M: np.ndarray) -> np.ndarray:
    counts = M.sum(0)
    mean = np.where(counts > 0, (V * M).sum(0) / np.maximum(counts, 1), 0.0)
    return np.where(M, V, mean)


def _diverged(params: CrbmParams) -> bool:
    return not params.is_finite()


def train(V: np.ndarray, M: np.ndarray, layout: BlockLayout, hp: Hyperparams, seed: int,
          valid: tuple[np.ndarray, np.ndarray] | None = None, log_path=None,
          init: CrbmParams | None = None, gradient_hook=None) -> TrainResult:
    """Fit a CRBM to visible vectors ``V`` with observation mask ``M``.

    Raises ``TrainingDiverged`` when parameters become non-finite.
    ``gradient_hook(step, grads)`` is called with each total gradient.
    """
    V = np.asarray(V, dtype=float)
    M = np.asarray(M, dtype=bool)
    if V.ndim != 2 or V.shape[1] != layout.n_visible or V.shape != M.shape:
        raise ConfigError(f"training data shape {V.shape} does not match layout ({layout.n_visible} units)")
    n = V.shape[0]
    if n == 0:
        raise ConfigError("no training samples")
    rng = np.random.default_rng(seed)
    V = np.where(M, V, 0.0)
    params = init if init is not None else init_params(layout, hp.n_hidden, rng, data=(V, M),
                                                       weight_scale=hp.weight_scale, hidden=hp.hidden)
    gamma = 1.0 - hp.adversary_weight
    bs = min(hp.batch_size, n)
    n_batches = int(np.ceil(n / bs))
    total = hp.n_epochs * n_batches
    opt = Adam()
    chain = GibbsChain(random_visible(params, bs, rng),
                       beta=BetaProcess.stationary(hp.sigma_beta, hp.beta_autocorr, bs, rng))
    gaussian = layout.kinds == GAUSSIAN
    mon_train = _column_fill(V[: min(n, 1000)], M[: min(n, 1000)])
    mon_valid = _column_fill(*valid) if valid is not None and len(valid[0]) else None
    log: list[dict] = []
    prev = None
    critic = None
    step = 0
    fh = open(log_path, "w") if log_path is not None else None
    try:
        for epoch in range(hp.n_epochs):
            order = rng.permutation(n)
            gnorms, betas = [], []
            for b in range(n_batches):
                idx = order[b * bs:(b + 1) * bs]
                pos_h, pos = positive_phase(V[idx], M[idx], params, rng, hp.fill_sweeps)
                betas.append(chain.beta.state.copy())
                neg_h, neg, neg_v = negative_phase(chain, params, hp.mc_steps, rng)
                if hp.adversary_weight > 0 and prev is not None:
                    critic = critic_fit(prev[0], prev[1], rng, hp.critic_trees, hp.critic_depth)
                    adv = adversarial_gradient(neg_v, neg_h, critic, params)
                else:
                    adv = None
                grads = {}
                for k in PARAM_NAMES:
                    g = gamma * (pos[k] - neg[k])
                    if adv is not None:
                        g = g + (1 - gamma) * adv[k]
                    grads[k] = g
                grads["W"] = grads["W"] + hp.l2_penalty * params.W
                if params.hidden == "bernoulli":
                    grads["hlogscale"] = np.zeros_like(grads["hlogscale"])
                grads["vlogscale"] = np.where(gaussian, grads["vlogscale"], 0.0)
                if gradient_hook is not None:
                    gradient_hook(step, grads)
                lr = linear_decay(hp.initial_learning_rate, step, total, hp.lr_final_fraction)
                new = opt.step(params.arrays(), grads, lr)
                lb = hp.logscale_bound
                new["vlogscale"] = np.clip(new["vlogscale"], -lb, lb)
                new["hlogscale"] = np.clip(new["hlogscale"], -lb, lb)
                params = params.with_arrays(new)
                if params.hidden == "relu" and np.all(np.isfinite(params.W)):
                    params = project_coupling(params, hp.max_coupling)
                if _diverged(params) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                    raise TrainingDiverged(f"non-finite parameters at epoch {epoch}, minibatch {b}")
                gnorms.append(float(np.sqrt(sum(float((g * g).sum()) for g in grads.values()))))
                prev = (pos_h, neg_h) if hp.adversary_weight > 0 else None
                step += 1
            rec = {"epoch": epoch, "grad_norm": float(np.mean(gnorms)),
                   "beta_mean": float(np.mean(np.concatenate(betas))),
                   "beta_std": float(np.std(np.concatenate(betas))),
                   "reconstruction_error": reconstruction_error(mon_train, params)}
            ftrain = float(np.mean(free_energy(mon_train, params)))
            rec["free_energy_train"] = ftrain
            if mon_valid is not None:
                rec["free_energy_gap"] = float(np.mean(free_energy(mon_valid, params))) - ftrain
            if not np.isfinite(rec["reconstruction_error"]) or not np.isfinite(ftrain):
                raise TrainingDiverged(f"non-finite objective proxies at epoch {epoch}")
            log.append(rec)
            if fh is not None:
                fh.write(json.dumps(rec) + "\n")
                fh.flush()
    finally:
        if fh is not None:
            fh.close()
    return TrainResult(params, log, hp)


def reconstruction_error(V: np.ndarray, params: CrbmParams) -> float:
    """Mean squared difference between rows and their mean-field reconstruction."""
    h = cond_hidden(V, params, mode="mean")
    R = cond_visible(h, params, mode="mean")
    return float(np.mean((R - V) ** 2))


def free_energy_gap(train_v: np.ndarray, valid_v: np.ndarray, params: CrbmParams) -> float:
    return float(np.mean(free_energy(valid_v, params)) - np.mean(free_energy(train_v, params)))
