"""Resumable hyperparameter sweeps with one atomically committed JSON file per cell."""
from __future__ import annotations

import csv
import json
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..crbm import save_model
from ..errors import ConfigError, RunFailure
from ..metrics import MetricReport, minimax_select, rank_matrix, selection_metrics
from .config import RunConfig, cell_seed
from .pipeline import Prepared, bundle_for, fit_model, load_prepared, twins_and_data, write_json

STATUSES = ("pending", "running", "ok", "failed")


@dataclass
class CellState:
    index: int
    cell: dict
    seed: int
    status: str = "pending"
    metrics: dict = field(default_factory=dict)
    error: str = ""
    checkpoint: str = ""

    @property
    def done(self) -> bool:
        return self.status in ("ok", "failed")

    def report(self) -> MetricReport:
        if self.status != "ok":
            return MetricReport.failed()
        return MetricReport.from_dict(self.metrics)


class SweepState:
    """Cell files live in ``<root>/cells/cell_<index>.json``."""

    def __init__(self, root):
        self.root = Path(root)
        self.cell_dir = self.root / "cells"

    def path(self, index: int) -> Path:
        return self.cell_dir / f"cell_{index:05d}.json"

    def exists(self) -> bool:
        return self.cell_dir.exists() and any(self.cell_dir.glob("cell_*.json"))

    def load(self, index: int) -> CellState | None:
        p = self.path(index)
        if not p.exists():
            return None
        return CellState(**json.loads(p.read_text()))

    def save(self, state: CellState) -> None:
        if state.status not in STATUSES:
            raise ValueError(f"bad cell status {state.status!r}")
        self.cell_dir.mkdir(parents=True, exist_ok=True)
        write_json(self.path(state.index), _clean(asdict(state)))


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def evaluate_cell(prep: Prepared, cfg: RunConfig, state: CellState, root: Path) -> CellState:
    """Train on the training split and score twins of the validation subjects."""
    hp, schedule = cfg.cell_settings(state.cell)
    stem = root / "cells" / f"cell_{state.index:05d}"
    result = fit_model(prep, hp, state.seed, ("train",), log_path=stem.with_suffix(".log.jsonl"))
    ckpt = stem.with_suffix(".crbm")
    save_model(ckpt, bundle_for(prep, result, {"cell": state.cell, "seed": state.seed, "trained_on": ["train"]}))
    sel = cfg.selection
    _, data, tw = twins_and_data(result.params, prep.schema, prep.normalizers, prep.splits["valid"], int(sel["K"]),
                                 schedule, state.seed + 1, sel["tau"])
    rep = selection_metrics(data, tw, prep.schema.visit_interval_months, k_clinical=min(10, int(sel["K"])))
    state.metrics = rep.to_dict()
    state.checkpoint = ckpt.name
    state.status = "ok"
    return state


def _run_cell(args) -> CellState:
    data_dir, cfg, state, root = args
    sweep = SweepState(root)
    state.status = "running"
    sweep.save(state)
    try:
        prep = load_prepared(data_dir)
        state = evaluate_cell(prep, cfg, state, Path(root))
    except Exception as exc:            # recorded, not fatal: a sweep must survive one bad cell
        state.status = "failed"
        state.error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        state.metrics = MetricReport.failed().to_dict()
    sweep.save(state)
    return state


def run_sweep(cfg: RunConfig, data_dir, root, seed: int, resume: bool = False, jobs: int = 1,
              model_path=None) -> dict:
    """Run every grid cell, select one by minimax ranking and fit the final model.

    Completed cells are never recomputed on resume. The final model is
    written to ``model_path`` (default ``<root>/model.crbm``). Returns the
    selection summary also written to ``<root>/selection.json``.
    """
    root = Path(root)
    sweep = SweepState(root)
    cells = cfg.cells()
    if not cells:
        raise ConfigError("the sweep grid is empty")
    if sweep.exists() and not resume:
        raise ConfigError(f"sweep state already exists in {root}; pass --resume to continue it")
    states, todo = [], []
    for i, cell in enumerate(cells):
        prev = sweep.load(i) if resume else None
        if prev is not None and prev.cell != cell:
            raise ConfigError(f"cell {i} in {root} was run with a different grid")
        st = prev if prev is not None else CellState(i, cell, cell_seed(seed, i))
        states.append(st)
        if not st.done:
            todo.append(st)
    tasks = [(str(data_dir), cfg, st, str(root)) for st in todo]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            finished = list(pool.map(_run_cell, tasks))
    else:
        finished = [_run_cell(t) for t in tasks]
    for st in finished:
        states[st.index] = st
    if all(st.status == "failed" for st in states):
        errors = "; ".join(f"cell {st.index}: {st.error}" for st in states[:5])
        raise RunFailure(f"all {len(states)} sweep cells failed ({errors})")

    reports = [st.report() for st in states]
    names, M = rank_matrix(reports)
    clinical = cfg.selection["clinical"]
    best = minimax_select(M, names, clinical)
    rows = [{"cell": st.index, "status": st.status, **{n: int(M[st.index, j]) for j, n in enumerate(names)}}
            for st in states]
    _write_ranks(root / "rank_matrix.csv", names, rows)
    hp, schedule = cfg.cell_settings(states[best].cell)
    summary = {"selected": best, "cell": states[best].cell, "hyperparams": hp.to_dict(),
               "sampling": asdict(schedule), "n_cells": len(states),
               "n_failed": sum(st.status == "failed" for st in states), "metrics": names}
    write_json(root / "selection.json", summary)
    prep = load_prepared(data_dir)
    fseed = cell_seed(seed, len(cells))
    result = fit_model(prep, hp, fseed, ("train", "valid"), log_path=root / "final.log.jsonl")
    path = Path(model_path) if model_path is not None else root / "model.crbm"
    save_model(path, bundle_for(prep, result, {"cell": states[best].cell, "seed": fseed,
                                               "sampling": asdict(schedule), "trained_on": ["train", "valid"]}))
    summary["model"] = str(path)
    write_json(root / "selection.json", summary)
    return summary


def _write_ranks(path: Path, names: list[str], rows: list[dict]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["cell", "status", *names], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    tmp.replace(path)
