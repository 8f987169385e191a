"""Assembling model-selection metrics and goodness-of-fit tables for a twin set."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..cohort.arrays import CohortArrays
from ..cohort.schema import MS_TYPES
from ..ms_domain import KFSS_NAMES
from .adversary import adversary_auc
from .calibration import phi_calibration, phi_values
from .clinical import RELAPSE_MONTHS, edss_from_arrays, relapse_auc, t_cdw, t_edss, truncate_to_duration
from .selection import MetricReport
from .stats import autocorrelation, autocov_r2, lag_autocov, moments_per_visit, pool_twins, theil_sen, weighted_ls

LAGS = (0, 1, 2, 3)


def _has_edss(variables: list[str]) -> bool:
    return all(v in variables for v in KFSS_NAMES) and "ambulation" in variables


def ppms_population(data: CohortArrays) -> np.ndarray | None:
    ms = data.static.get("ms_type")
    return None if ms is None else ms == MS_TYPES.index("PPMS")


def selection_metrics(data: CohortArrays, twins: np.ndarray, interval: int = 3, k_clinical: int = 10,
                      start: int = 1) -> MetricReport:
    """Autocovariance R^2 per lag and the clinical metrics for one model.

    twins: (n, K, T, A) natural-scale values aligned with ``data``.
    """
    X, M = data.values, data.mask
    Xt, Mt = pool_twins(twins, M)
    rep = MetricReport()
    for lag in LAGS:
        Cd, _ = lag_autocov(X, M, lag, start)
        Ct, _ = lag_autocov(Xt, Mt, lag, start)
        rep.r2[lag] = autocov_r2(Cd, Ct)
    tw = truncate_to_duration(twins[:, :k_clinical], data.n_visits)
    if "relapse" in data.variables:
        a = data.var_index("relapse")
        for month in RELAPSE_MONTHS:
            v = month // interval
            if v < X.shape[1]:
                rep.relapse_auc[month] = relapse_auc(X[:, :, a], tw[..., a], v)
    if _has_edss(data.variables):
        ed = edss_from_arrays(X, data.variables)
        et = edss_from_arrays(tw, data.variables)
        rep.t_edss = t_edss(ed, et, interval)
        ppms = ppms_population(data)
        for variant in "abc":
            pop = ppms if variant == "a" else None
            rep.t_cdw[variant] = t_cdw(ed, et, variant, pop, interval)
    return rep


def moments_table(data: CohortArrays, twins: np.ndarray, start: int = 1) -> list[dict]:
    mu_d, sd_d = moments_per_visit(data.values, data.mask)
    Xt, Mt = pool_twins(twins, data.mask)
    mu_t, sd_t = moments_per_visit(Xt, Mt)
    rows = []
    for t in range(start, data.values.shape[1]):
        for a, name in enumerate(data.variables):
            rows.append({"variable": name, "visit": t, "mean_data": mu_d[t, a], "mean_twin": mu_t[t, a],
                         "sd_data": sd_d[t, a], "sd_twin": sd_t[t, a]})
    return rows


def moment_fits(rows: list[dict]) -> dict:
    """Theil-Sen fits of data moments on twin moments."""
    out = {}
    for stat in ("mean", "sd"):
        x = np.array([r[f"{stat}_twin"] for r in rows], dtype=float)
        y = np.array([r[f"{stat}_data"] for r in rows], dtype=float)
        slope, intercept = theil_sen(x, y)
        out[stat] = {"slope": slope, "intercept": intercept}
    return out


def autocorrelation_fits(data: CohortArrays, twins: np.ndarray, start: int = 1) -> tuple[list[dict], list[dict]]:
    """Per-lag weighted regression of data autocorrelations on twin autocorrelations."""
    X, M = data.values, data.mask
    Xt, Mt = pool_twins(twins, M)
    C0d, _ = lag_autocov(X, M, 0, start)
    C0t, _ = lag_autocov(Xt, Mt, 0, start)
    fits, entries = [], []
    for lag in LAGS:
        Cd, f = lag_autocov(X, M, lag, start)
        Ct, _ = lag_autocov(Xt, Mt, lag, start)
        rd, rt = autocorrelation(Cd, C0d), autocorrelation(Ct, C0t)
        alpha, beta, r2 = weighted_ls(rd, rt, f)
        fits.append({"lag": lag, "alpha": alpha, "beta": beta, "r2": r2, "autocov_r2": autocov_r2(Cd, Ct)})
        for a, na in enumerate(data.variables):
            for b, nb in enumerate(data.variables):
                entries.append({"lag": lag, "a": na, "b": nb, "cov_data": Cd[a, b], "cov_twin": Ct[a, b],
                                "corr_data": rd[a, b], "corr_twin": rt[a, b], "weight": f[a, b]})
    return fits, entries


def phi_table(data: CohortArrays, twins: np.ndarray, start: int = 1, ties: str = "le", seed: int = 0,
              n_tests: int | None = None) -> list[dict]:
    rng = np.random.default_rng(seed)
    phi = phi_values(data.values[:, start:], twins[:, :, start:], data.mask[:, start:], ties, rng)
    rows = phi_calibration(phi, n_tests=n_tests)
    for r in rows:
        r["variable"] = data.variables[r["variable"]]
        r["visit"] += start
    return rows


def adversary_table(data: CohortArrays, twins: np.ndarray, n_sims: int = 100, seed: int = 0) -> list[dict]:
    rows = []
    for diff in (False, True):
        for t in range(1, data.values.shape[1]):
            res = adversary_auc(data.values, data.mask, twins, t, n_sims, diff, seed + t)
            rows.append({"visit": t, "mode": "difference" if diff else "visit",
                         "auc_mean": res[0] if res else np.nan, "auc_std": res[1] if res else np.nan,
                         "note": "" if res else "skipped: too few subjects"})
    return rows


def evaluate(data: CohortArrays, twins: np.ndarray, interval: int = 3, n_sims: int = 100, seed: int = 0,
             ties: str = "le", k_clinical: int = 10) -> dict:
    """Every goodness-of-fit table plus the model-selection report."""
    moments = moments_table(data, twins)
    fits, entries = autocorrelation_fits(data, twins)
    return {
        "metrics": selection_metrics(data, twins, interval, k_clinical),
        "moments": moments,
        "moment_fits": moment_fits(moments),
        "autocorrelation_fits": fits,
        "autocorrelation_entries": entries,
        "phi": phi_table(data, twins, ties=ties, seed=seed),
        "adversary": adversary_table(data, twins, n_sims, seed),
    }


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return None if not math.isfinite(float(x)) else float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_table(rows: list[dict], path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in _clean(r).items()})


def read_table(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_report(report: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("moments", "autocorrelation_fits", "autocorrelation_entries", "phi", "adversary"):
        write_table(report[name], out / f"{name}.csv")
    summary = {"metrics": report["metrics"].to_dict(), "moment_fits": report["moment_fits"],
               "autocorrelation_fits": report["autocorrelation_fits"],
               "phi_significant_fraction": float(np.mean([r["significant"] for r in report["phi"]]))
               if report["phi"] else None}
    (out / "summary.json").write_text(json.dumps(_clean(summary), indent=2, sort_keys=True))
