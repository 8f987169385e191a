"""Synthetic ground-truth cohorts with known generating parameters.

Each subject carries ``n_factors`` independent latent AR(2) processes
started from their stationary law. Observed variables are driven by one
factor plus static covariate effects:

* continuous variables are Gaussian on the model (transformed) scale,
* ordinal variables use a cumulative-logit link with increasing cutpoints,
* binary variables use a logistic link.

Measurements are conditionally independent given the latent state, so a
subject's future can be re-simulated exactly from the stored state at
baseline (``simulate_twins``), which gives an oracle for indistinguishability
checks.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from ..errors import ConfigError
from .normalize import Normalizers, decode_array
from .records import SubjectRecord, validate_record
from .schema import KFSS_COMPONENTS, MS_TYPES, CohortSchema, ms_schema

_STATIC_EFFECTS = ("age", "sex", "SPMS", "PPMS")


@dataclass
class SynthVariable:
    name: str
    factor: int = 0
    loading: float = 0.0
    intercept: float = 0.0
    noise: float = 0.0
    cut_first: float = 0.0
    cut_step: float = 1.0
    effects: dict[str, float] = field(default_factory=dict)

    def cutpoints(self, n_levels: int) -> np.ndarray:
        return self.cut_first + self.cut_step * np.arange(n_levels)


def _default_variables() -> list[SynthVariable]:
    S = SynthVariable
    prog = {"SPMS": 0.8, "PPMS": 1.0, "age": 0.3}
    kfss = {
        "kfss_bowel_bladder": (0, 0.6, 0.2, 1.8),
        "kfss_brain_stem": (0, 0.5, 0.6, 1.8),
        "kfss_cerebellar": (0, 0.7, -0.4, 1.6),
        "kfss_mental": (1, 0.6, 0.7, 1.8),
        "kfss_pyramidal": (0, 0.8, -1.4, 1.6),
        "kfss_sensory": (0, 0.6, -0.4, 1.7),
        "kfss_visual": (1, 0.4, 0.4, 1.7),
    }
    out = [S("relapse", 0, 0.3, -3.0, effects={"SPMS": -0.5, "PPMS": -1.0})]
    for name, (f, load, first, step) in kfss.items():
        out.append(S(name, f, load, 0.0, cut_first=first, cut_step=step, effects=dict(prog)))
    out += [
        S("ambulation", 0, 0.9, 0.0, cut_first=2.6, cut_step=0.6, effects={"SPMS": 1.4, "PPMS": 1.6, "age": 0.3}),
        S("t25fw", 0, 0.3, -4.1, noise=0.25, effects={"SPMS": 0.5, "PPMS": 0.6, "age": 0.1}),
        S("nhpt_dominant", 0, 0.2, -2.9, noise=0.15, effects={"SPMS": 0.3, "PPMS": 0.3, "age": 0.05}),
        S("pasat", 1, -0.35, 1.3, noise=0.3, effects={"SPMS": -0.3, "PPMS": -0.3, "age": -0.1}),
    ]
    return out


@dataclass
class SynthConfig:
    n_subjects: int = 2000
    min_visits: int = 12
    max_visits: int = 12
    ar: tuple[float, float] = (0.5, 0.3)
    noise: float = 1.0
    n_factors: int = 2
    missing_rate: float = 0.1
    # variables that go missing together at a visit (one clinical exam)
    missing_groups: list[list[str]] = field(
        default_factory=lambda: [[n for n, _ in KFSS_COMPONENTS] + ["ambulation"]])
    ms_type_probs: tuple[float, float, float] = (0.65, 0.2, 0.15)
    female_prob: float = 0.67
    age_mean: float = 42.0
    age_sd: float = 10.0
    variables: list[SynthVariable] = field(default_factory=_default_variables)

    def __post_init__(self):
        self.ar = tuple(float(a) for a in self.ar)
        self.ms_type_probs = tuple(float(p) for p in self.ms_type_probs)
        self.variables = [v if isinstance(v, SynthVariable) else SynthVariable(**v) for v in self.variables]
        if not 1 <= self.min_visits <= self.max_visits:
            raise ConfigError("need 1 <= min_visits <= max_visits")
        if not 0 <= self.missing_rate < 1:
            raise ConfigError("missing_rate must be in [0, 1)")
        if ar2_stationary_variance(*self.ar, 1.0) <= 0:
            raise ConfigError(f"AR coefficients {self.ar} are not stationary")
        if abs(sum(self.ms_type_probs) - 1) > 1e-9:
            raise ConfigError("ms_type_probs must sum to 1")
        for v in self.variables:
            if not 0 <= v.factor < self.n_factors:
                raise ConfigError(f"{v.name}: factor {v.factor} out of range")
            bad = set(v.effects) - set(_STATIC_EFFECTS)
            if bad:
                raise ConfigError(f"{v.name}: unknown static effects {sorted(bad)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ar"] = list(self.ar)
        d["ms_type_probs"] = list(self.ms_type_probs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synth fields {sorted(unknown)}")
        return cls(**d)


def ar2_stationary_variance(phi1: float, phi2: float, noise: float = 1.0) -> float:
    """Stationary variance of x_t = phi1 x_{t-1} + phi2 x_{t-2} + noise * e_t.

    Returns -inf for non-stationary coefficients.
    """
    if not (abs(phi2) < 1 and phi1 + phi2 < 1 and phi2 - phi1 < 1):
        return float("-inf")
    return noise**2 * (1 - phi2) / ((1 + phi2) * ((1 - phi2) ** 2 - phi1**2))


def synth_schema(config: SynthConfig) -> CohortSchema:
    full = ms_schema(max_visits=config.max_visits)
    names = {"age", "sex", "ms_type", "baseline"} | {v.name for v in config.variables}
    return CohortSchema(tuple(v for v in full.variables if v.name in names),
                        visit_interval_months=3, max_visits=config.max_visits)


@dataclass
class SynthTruth:
    """Generated records plus the hidden state needed to re-simulate them."""

    config: SynthConfig
    schema: CohortSchema
    records: list[SubjectRecord]
    latent: np.ndarray          # (n, n_factors, max_visits + 1); index 0 is t = -1
    statics: np.ndarray         # (n, 4): standardized age, sex, is_SPMS, is_PPMS
    n_visits: np.ndarray        # (n,)

    def index(self) -> dict[str, int]:
        return {r.subject_id: i for i, r in enumerate(self.records)}


def _simulate_latent(cfg: SynthConfig, start: np.ndarray, n_steps: int, rng) -> np.ndarray:
    """Continue AR(2) paths; ``start`` is (..., 2) holding (z_{t-1}, z_t)."""
    phi1, phi2 = cfg.ar
    out = np.empty(start.shape[:-1] + (n_steps,))
    prev2, prev1 = start[..., 0], start[..., 1]
    for t in range(n_steps):
        z = phi1 * prev1 + phi2 * prev2 + cfg.noise * rng.standard_normal(prev1.shape)
        out[..., t] = z
        prev2, prev1 = prev1, z
    return out


def _linear_predictor(var: SynthVariable, latent: np.ndarray, statics: np.ndarray) -> np.ndarray:
    """``latent`` is (n, [K,] T); statics (n, 4) broadcast over trailing axes."""
    eff = sum(var.effects.get(k, 0.0) * statics[:, j] for j, k in enumerate(_STATIC_EFFECTS))
    eff = np.asarray(eff, dtype=float).reshape((-1,) + (1,) * (latent.ndim - 1))
    return var.intercept + var.loading * latent + eff


def _observe(var: SynthVariable, spec, eta: np.ndarray, rng, normalizers: Normalizers) -> np.ndarray:
    """Natural-scale draws for one variable given its linear predictor."""
    if spec.kind == "binary":
        return (rng.random(eta.shape) < expit(eta)).astype(float)
    if spec.kind == "ordinal":
        cuts = var.cutpoints(spec.max)
        probs = expit(eta[..., None] - cuts)      # P(Y >= k), k = 1..max
        return np.sum(rng.random(eta.shape)[..., None] < probs, axis=-1).astype(float)
    y = eta + var.noise * rng.standard_normal(eta.shape)
    return decode_array(y, spec, normalizers)


def _fixed_normalizers(schema: CohortSchema) -> Normalizers:
    # decoding only needs the schema-determined transforms
    params = {}
    for spec in schema.variables:
        if spec.transform == "logit_range":
            params[spec.name] = {"transform": "logit_range", "lo": float(spec.lo), "hi": float(spec.hi),
                                 "delta": float(spec.delta)}
        elif spec.transform == "scale_by_reciprocal_max":
            params[spec.name] = {"transform": "scale_by_reciprocal_max", "scale": 1.0 / spec.max}
        else:
            params[spec.name] = {"transform": spec.transform}
    return Normalizers(params)


def synth_cohort(config: SynthConfig, seed: int = 0) -> SynthTruth:
    cfg = config
    schema = synth_schema(cfg)
    norm = _fixed_normalizers(schema)
    rng = np.random.default_rng(seed)
    n, T, F = cfg.n_subjects, cfg.max_visits, cfg.n_factors

    ms_idx = rng.choice(3, size=n, p=cfg.ms_type_probs)
    age_z = rng.standard_normal(n)
    sex = (rng.random(n) < cfg.female_prob).astype(float)
    statics = np.column_stack([age_z, sex, ms_idx == 1, ms_idx == 2]).astype(float)
    n_visits = rng.integers(cfg.min_visits, cfg.max_visits + 1, size=n)

    g0 = ar2_stationary_variance(*cfg.ar, cfg.noise)
    g1 = cfg.ar[0] * g0 / (1 - cfg.ar[1])
    chol = np.linalg.cholesky(np.array([[g0, g1], [g1, g0]]))
    start = rng.standard_normal((n, F, 2)) @ chol.T      # (z_{-1}, z_0)
    latent = np.concatenate([start, _simulate_latent(cfg, start, T - 1, rng)], axis=-1)

    values = {}
    for var in cfg.variables:
        spec = schema[var.name]
        eta = _linear_predictor(var, latent[:, var.factor, 1:], statics)
        values[var.name] = _observe(var, spec, eta, rng, norm)

    # missingness: one draw per (subject, visit, missing unit)
    groups = [list(g) for g in cfg.missing_groups if all(x in values for x in g)]
    grouped = {x for g in groups for x in g}
    units = groups + [[v.name] for v in cfg.variables if v.name not in grouped]
    miss = {}
    for unit in units:
        drop = rng.random((n, T)) < cfg.missing_rate
        for name in unit:
            miss[name] = drop
    static_drop = rng.random((n, 3)) < cfg.missing_rate

    ages = np.clip(cfg.age_mean + cfg.age_sd * age_z, 18, 72)
    records = []
    for i in range(n):
        static = {"age": float(ages[i]), "sex": int(sex[i]), "ms_type": MS_TYPES[ms_idx[i]]}
        for j, name in enumerate(("age", "sex", "ms_type")):
            if static_drop[i, j]:
                static[name] = None
        visits = {}
        for t in range(n_visits[i]):
            visits[3 * t] = {name: (None if miss[name][i, t] else _py(values[name][i, t], schema[name]))
                             for name in values}
        records.append(validate_record(SubjectRecord(f"S{i:05d}", static, visits), schema))
    return SynthTruth(cfg, schema, records, latent, statics, n_visits)


def _py(x: float, spec):
    return int(x) if spec.kind in ("binary", "ordinal") else float(x)


def simulate_twins(truth: SynthTruth, indices, K: int, n_visits: int, seed: int = 0) -> dict[str, np.ndarray]:
    """Fresh trajectories from the generator sharing each subject's baseline.

    Returns natural-scale arrays of shape (n, K, n_visits) per variable. The
    baseline visit copies the subject's recorded values (NaN where the
    subject's baseline value is missing is replaced by a fresh draw).
    """
    cfg = truth.config
    norm = _fixed_normalizers(truth.schema)
    rng = np.random.default_rng(seed)
    idx = np.asarray(indices, dtype=int)
    start = truth.latent[idx][:, :, :2]                        # (n, F, 2)
    start = np.broadcast_to(start[:, None], (len(idx), K) + start.shape[1:]).copy()
    future = _simulate_latent(cfg, start, n_visits - 1, rng)   # (n, K, F, T-1)
    z0 = start[..., 1:2]
    latent = np.concatenate([z0, future], axis=-1)
    out = {}
    for var in cfg.variables:
        spec = truth.schema[var.name]
        eta = _linear_predictor(var, latent[:, :, var.factor, :], truth.statics[idx])
        vals = _observe(var, spec, eta, rng, norm)
        for row, i in enumerate(idx):
            base = truth.records[i].value(var.name, 0)
            if base is not None:
                vals[row, :, 0] = base
        out[var.name] = vals
    return out


def _gauss_hermite(n: int = 80):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / w.sum()


def expected_baseline_mean(config: SynthConfig, name: str) -> float:
    """Population mean of a variable at any visit (the process is stationary).

    Computed by Gauss-Hermite quadrature over the Gaussian part of the
    linear predictor, summed over the discrete static covariates.
    """
    cfg = config
    var = next((v for v in cfg.variables if v.name == name), None)
    if var is None:
        raise KeyError(name)
    spec = synth_schema(cfg)[name]
    g0 = ar2_stationary_variance(*cfg.ar, cfg.noise)
    sd = np.sqrt(var.loading**2 * g0 + var.effects.get("age", 0.0) ** 2
                 + (var.noise**2 if spec.kind == "continuous" else 0.0))
    nodes, weights = _gauss_hermite()
    norm = _fixed_normalizers(synth_schema(cfg))
    total = 0.0
    for ms, p_ms in enumerate(cfg.ms_type_probs):
        for sex, p_sex in ((0.0, 1 - cfg.female_prob), (1.0, cfg.female_prob)):
            shift = (var.intercept + var.effects.get("sex", 0.0) * sex
                     + var.effects.get("SPMS", 0.0) * (ms == 1) + var.effects.get("PPMS", 0.0) * (ms == 2))
            eta = shift + sd * nodes
            if spec.kind == "binary":
                g = expit(eta)
            elif spec.kind == "ordinal":
                g = expit(eta[:, None] - var.cutpoints(spec.max)).sum(axis=1)
            else:
                if spec.integer:
                    raise ValueError(f"{name}: rounded variables have no closed-form mean")
                g = decode_array(eta, spec, norm)
            total += p_ms * p_sex * float(np.dot(weights, g))
    return total
