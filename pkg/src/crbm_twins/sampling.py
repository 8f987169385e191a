"""Driven block Gibbs sampling and generation of digital subjects and twins.

Inverse temperatures follow an autoregressive gamma process with stationary
law Gamma(shape 1/s^2, scale s^2) (mean 1, std s). A transition draws
``z ~ Poisson(phi beta / ((1 - phi) s^2))`` and then
``beta' ~ Gamma(1/s^2 + z, (1 - phi) s^2)``, which keeps the stationary law
and has lag-1 autocorrelation ``phi``.

Generation works on model-scale visible vectors. Visit ``t`` is produced
by a Gibbs run whose oldest blocks are clamped to the most recent known
visits (plus static covariates) and whose newer blocks are free; the
block holding visit ``t`` is retained. With lag 2 the first future visit
is drawn with both future blocks free, and every later visit with the two
previous visits clamped.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cohort.records import SubjectRecord
from .cohort.triplets import Encoder
from .crbm.model import CrbmParams, cond_hidden, cond_visible
from .errors import ConfigError, DataError


# below this the gamma law is numerically a point mass at 1
_SIGMA_FLOOR = 1e-6


def beta_stationary(sigma: float, size, rng: np.random.Generator) -> np.ndarray:
    if sigma <= _SIGMA_FLOOR:
        return np.ones(size)
    s2 = sigma * sigma
    return rng.gamma(1.0 / s2, s2, size)


def beta_next(beta: np.ndarray, sigma: float, autocorr: float, rng: np.random.Generator) -> np.ndarray:
    """One transition of the autoregressive gamma process (vectorized over chains)."""
    beta = np.asarray(beta, dtype=float)
    if sigma <= _SIGMA_FLOOR:
        return np.ones_like(beta)
    if not 0 <= autocorr < 1:
        raise ConfigError(f"autocorrelation must be in [0, 1), got {autocorr}")
    s2 = sigma * sigma
    scale = (1 - autocorr) * s2
    z = rng.poisson(autocorr * beta / scale) if autocorr > 0 else 0
    return rng.gamma(1.0 / s2 + z, scale, beta.shape)


@dataclass
class BetaProcess:
    sigma_beta: float = 0.0
    autocorr: float = 0.0
    state: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self):
        if self.sigma_beta < 0:
            raise ConfigError("sigma_beta must be non-negative")
        if not 0 <= self.autocorr < 1:
            raise ConfigError(f"autocorrelation must be in [0, 1), got {self.autocorr}")
        self.state = np.atleast_1d(np.asarray(self.state, dtype=float))

    @classmethod
    def stationary(cls, sigma_beta: float, autocorr: float, n: int, rng: np.random.Generator) -> "BetaProcess":
        return cls(sigma_beta, autocorr, beta_stationary(sigma_beta, n, rng))

    def step(self, rng: np.random.Generator, sigma_beta: float | None = None) -> np.ndarray:
        if sigma_beta is not None:
            self.sigma_beta = sigma_beta
        self.state = beta_next(self.state, self.sigma_beta, self.autocorr, rng)
        return self.state


@dataclass(frozen=True)
class AnnealSchedule:
    """``n_steps`` sweeps; sigma_beta held, then taken linearly to 0 over the last ``n_anneal``."""

    n_steps: int = 100
    n_anneal: int = 50
    sigma_beta: float = 0.0

    def __post_init__(self):
        if self.n_steps < 1 or not 0 <= self.n_anneal <= self.n_steps:
            raise ConfigError("schedule needs n_steps >= 1 and 0 <= n_anneal <= n_steps")
        if self.sigma_beta < 0:
            raise ConfigError("sigma_beta must be non-negative")

    def sigmas(self) -> np.ndarray:
        out = np.full(self.n_steps, float(self.sigma_beta))
        if self.n_anneal:
            out[self.n_steps - self.n_anneal:] = np.linspace(self.sigma_beta, 0.0, self.n_anneal)
        else:
            out[-1] = 0.0
        return out


@dataclass
class GibbsChain:
    """A batch of chains (one per row) sharing a clamp pattern shape."""

    v: np.ndarray
    h: np.ndarray | None = None
    clamp_mask: np.ndarray | None = None
    clamp_values: np.ndarray | None = None
    beta: BetaProcess = field(default_factory=BetaProcess)

    def __post_init__(self):
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float)).copy()
        if self.clamp_mask is not None:
            self.clamp_mask = np.broadcast_to(np.asarray(self.clamp_mask, dtype=bool), self.v.shape)
            self.clamp_values = np.broadcast_to(np.asarray(self.clamp_values, dtype=float), self.v.shape)
            self.v = np.where(self.clamp_mask, self.clamp_values, self.v)
        if self.beta.state.shape != (self.v.shape[0],):
            self.beta.state = np.resize(self.beta.state, self.v.shape[0])


def gibbs_step(chain: GibbsChain, params: CrbmParams, rng: np.random.Generator,
               sigma_beta: float | None = None) -> GibbsChain:
    """h ~ p_beta(h | v), then v ~ p_beta(v | h) with clamps; then advance beta."""
    b = chain.beta.state
    chain.h = cond_hidden(chain.v, params, rng=rng, beta=b)
    chain.v = cond_visible(chain.h, params, chain.clamp_mask, chain.clamp_values, rng=rng, beta=b)
    chain.beta.step(rng, sigma_beta)
    return chain


def run_schedule(chain: GibbsChain, params: CrbmParams, schedule: AnnealSchedule,
                 rng: np.random.Generator) -> GibbsChain:
    sig = schedule.sigmas()
    chain.beta.state = beta_stationary(sig[0], chain.v.shape[0], rng)
    chain.beta.sigma_beta = sig[0]
    for s in range(schedule.n_steps):
        nxt = sig[s + 1] if s + 1 < schedule.n_steps else 0.0
        gibbs_step(chain, params, rng, sigma_beta=nxt)
    return chain


def random_visible(params: CrbmParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Initial states: Gaussian units at their location, discrete units drawn from their biases."""
    zeros = np.zeros((n, params.n_hidden))
    return cond_visible(zeros, params, rng=rng)


def _visit_window(t: int, lag: int) -> tuple[int, list[int]]:
    """First visit index in the window that produces visit ``t`` and the free blocks."""
    s = max(0, t - lag)
    target_block = lag - (t - s)
    return s, list(range(target_block + 1))


@dataclass
class Generator:
    """Generation context: model, encoder geometry and baseline-indicator units."""

    params: CrbmParams
    indicator: slice | None = None     # indicator units within a block, if any

    @property
    def layout(self):
        return self.params.layout

    def _indicator_clamp(self, mask: np.ndarray, values: np.ndarray, first_visit: int) -> None:
        if self.indicator is None:
            return
        lag = self.layout.lag
        for b in range(lag + 1):
            sl = self.layout.block_slice(b)
            idx = np.arange(sl.start, sl.stop)[self.indicator]
            mask[:, idx] = True
            values[:, idx] = float(first_visit + (lag - b) == 0)

    def sample_baselines(self, n: int, schedule: AnnealSchedule, rng: np.random.Generator):
        """Joint samples of all blocks; returns (baseline block, static block)."""
        lay = self.layout
        v0 = random_visible(self.params, n, rng)
        mask = np.zeros_like(v0, dtype=bool)
        values = np.zeros_like(v0)
        self._indicator_clamp(mask, values, 0)
        chain = run_schedule(GibbsChain(v0, clamp_mask=mask, clamp_values=values), self.params, schedule, rng)
        return chain.v[:, lay.block_slice(lay.lag)].copy(), chain.v[:, lay.static_slice].copy()

    def extend(self, baseline: np.ndarray, baseline_mask: np.ndarray, static: np.ndarray,
               static_mask: np.ndarray, n_visits: int, schedule: AnnealSchedule,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Trajectories of ``n_visits`` visits from baselines (rows are chains).

        Unobserved baseline/static entries are sampled in the first window and
        then kept fixed. Returns (visits (n, n_visits, n_block), static).
        """
        lay = self.layout
        lag, nb = lay.lag, lay.n_block
        n = baseline.shape[0]
        visits = np.zeros((n, n_visits, nb))
        visits[:, 0] = baseline
        static = static.copy()
        known_base = baseline_mask.copy()
        known_static = static_mask.copy()
        init = random_visible(self.params, n, rng)
        for t in range(1, n_visits):
            s, free = _visit_window(t, lag)
            v = np.empty((n, lay.n_visible))
            mask = np.zeros((n, lay.n_visible), dtype=bool)
            for j in range(s, t):
                sl = lay.block_slice(lag - (j - s))
                v[:, sl] = visits[:, j]
                mask[:, sl] = known_base if j == 0 else True
            for b in free:
                v[:, lay.block_slice(b)] = visits[:, t - 1]
            if s == 0:
                # unknown baseline entries start from the model's bias draw
                sl0 = lay.block_slice(lag)
                v[:, sl0] = np.where(known_base, visits[:, 0], init[:, sl0])
            ss = lay.static_slice
            v[:, ss] = np.where(known_static, static, init[:, ss])
            mask[:, ss] = known_static
            values = v.copy()
            self._indicator_clamp(mask, values, s)
            chain = run_schedule(GibbsChain(v, clamp_mask=mask, clamp_values=values), self.params, schedule, rng)
            target = lay.block_slice(lag - (t - s))
            visits[:, t] = chain.v[:, target]
            if t == 1:
                visits[:, 0] = chain.v[:, lay.block_slice(lag)]
                static = chain.v[:, lay.static_slice].copy()
                known_base = np.ones_like(known_base)
                known_static = np.ones_like(known_static)
        return visits, static


def _check_tau(tau: int, interval: int) -> int:
    if tau < 0 or tau % interval:
        raise ConfigError(f"trajectory length {tau} months is not a non-negative multiple of {interval}")
    return tau // interval + 1


def generate_digital_subjects(params: CrbmParams, n: int, tau: int, schedule: AnnealSchedule,
                              rng: np.random.Generator, indicator: slice | None = None,
                              interval: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """``n`` trajectories of length ``tau`` months from the model's joint distribution.

    Returns model-scale arrays (n, n_visits, n_block) and (n, n_static).
    """
    n_visits = _check_tau(tau, interval)
    gen = Generator(params, indicator)
    base, static = gen.sample_baselines(n, schedule, rng)
    if n_visits == 1:
        return base[:, None, :], static
    ones_b = np.ones(base.shape, dtype=bool)
    ones_s = np.ones(static.shape, dtype=bool)
    return gen.extend(base, ones_b, static, ones_s, n_visits, schedule, rng)


def generate_digital_subject(params: CrbmParams, tau: int, schedule: AnnealSchedule,
                             rng: np.random.Generator, indicator: slice | None = None, interval: int = 3):
    visits, static = generate_digital_subjects(params, 1, tau, schedule, rng, indicator, interval)
    return visits[0], static[0]


@dataclass
class TwinSet:
    """K generated trajectories per subject, on the model scale.

    ``visits`` has shape (n_subjects, K, n_visits, n_block) and ``static``
    (n_subjects, K, n_static). ``baseline_mask`` marks the observed baseline
    entries that were clamped.
    """

    subject_ids: list[str]
    visits: np.ndarray
    static: np.ndarray
    baseline_mask: np.ndarray
    interval: int = 3

    @property
    def n_subjects(self) -> int:
        return self.visits.shape[0]

    @property
    def K(self) -> int:
        return self.visits.shape[1]

    @property
    def n_visits(self) -> int:
        return self.visits.shape[2]

    def decode(self, encoder: Encoder, variables=None) -> tuple[list[str], np.ndarray]:
        """Natural-scale values (n, K, n_visits, n_vars) for the requested variables."""
        dec = encoder.decode_visits(self.visits)
        names = [s.name for s in encoder.schema.observed_longitudinal] if variables is None else list(variables)
        return names, np.stack([dec[nm] for nm in names], axis=-1)

    def decode_static(self, encoder: Encoder) -> dict[str, np.ndarray]:
        return encoder.decode_static(self.static)


def _twin_chunk(args):
    params, indicator, base, bmask, stat, smask, K, n_visits, schedule, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    rep = lambda a: np.repeat(a, K, axis=0)
    visits, static = Generator(params, indicator).extend(rep(base), rep(bmask), rep(stat), rep(smask),
                                                         n_visits, schedule, rng)
    n = base.shape[0]
    return visits.reshape(n, K, n_visits, -1), static.reshape(n, K, -1)


def generate_digital_twins(params: CrbmParams, encoder: Encoder, subjects: list[SubjectRecord], tau: int,
                           K: int, schedule: AnnealSchedule, seed: int, chunk_size: int = 8,
                           jobs: int = 1) -> TwinSet:
    """``K`` twins per subject with the observed baseline and static values clamped.

    Subjects are processed in fixed-size chunks, each with its own child
    seed, so the output does not depend on ``jobs``.
    """
    if K < 1:
        raise ConfigError("K must be at least 1")
    n_visits = _check_tau(tau, encoder.schema.visit_interval_months)
    base, bmask, stat, smask = [], [], [], []
    for rec in subjects:
        row = rec.visits.get(0)
        if row is None or not rec.has_longitudinal_data(0, encoder.schema):
            raise DataError(f"subject {rec.subject_id}: baseline visit has no observed data")
        b, bm = encoder.encode_visit(row, 0)
        s, sm = encoder.encode_static(rec.static_values)
        base.append(b), bmask.append(bm), stat.append(s), smask.append(sm)
    base, bmask, stat, smask = map(np.array, (base, bmask, stat, smask))
    ind = encoder.indicator_slice()
    if ind is not None:
        bmask[:, ind] = True
    n = len(subjects)
    starts = list(range(0, n, chunk_size))
    seeds = np.random.SeedSequence(seed).spawn(len(starts))
    tasks = [(params, ind, base[i:i + chunk_size], bmask[i:i + chunk_size], stat[i:i + chunk_size],
              smask[i:i + chunk_size], K, n_visits, schedule, sq) for i, sq in zip(starts, seeds)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            parts = list(pool.map(_twin_chunk, tasks))
    else:
        parts = [_twin_chunk(t) for t in tasks]
    nb = params.layout.n_block
    visits = np.concatenate([p[0] for p in parts]) if parts else np.zeros((0, K, n_visits, nb))
    static = np.concatenate([p[1] for p in parts]) if parts else np.zeros((0, K, params.layout.n_static))
    return TwinSet([r.subject_id for r in subjects], visits, static, bmask, encoder.schema.visit_interval_months)
