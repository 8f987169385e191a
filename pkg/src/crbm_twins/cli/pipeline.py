"""On-disk artifacts shared by the commands and the steps that produce them."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..cohort import (CohortSchema, Encoder, Normalizers, SubjectRecord, SynthConfig, build_triplets, cohort_arrays,
                      fit_normalizers, load_schema, load_tidy, ms_schema, save_schema, split_dataset, stack_triplets,
                      synth_cohort, write_tidy)
from ..crbm import BlockLayout, ModelBundle, load_model
from ..crbm.io import model_hash
from ..errors import CompatibilityError, ConfigError, DataError
from ..sampling import AnnealSchedule, TwinSet, generate_digital_twins
from ..training import Hyperparams, TrainResult, train
from .config import RunConfig

SPLITS = ("train", "valid", "test")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_source(cfg: RunConfig, seed: int) -> tuple[CohortSchema, list[SubjectRecord]]:
    """Records named by the config's ``data`` section (tidy file or synthetic cohort)."""
    data = cfg.data
    if "synth" in data:
        truth = synth_cohort(SynthConfig.from_dict(data["synth"] or {}), seed)
        return truth.schema, truth.records
    if "tidy" not in data:
        raise ConfigError("config 'data' needs either 'tidy' or 'synth'")
    if "schema" in data:
        schema_path = cfg.resolve(data["schema"])
        if not schema_path.exists():
            raise ConfigError(f"schema file not found: {schema_path}")
        schema = load_schema(schema_path)
    else:
        schema = ms_schema()
    return schema, load_tidy(cfg.resolve(data["tidy"]), schema)


@dataclass
class Prepared:
    """A split cohort with fitted normalizers, as written by ``prepare``."""

    schema: CohortSchema
    normalizers: Normalizers
    splits: dict[str, list[SubjectRecord]]
    manifest: dict

    @property
    def encoder(self) -> Encoder:
        return Encoder(self.schema, self.normalizers)

    @property
    def layout(self) -> BlockLayout:
        return BlockLayout.from_schema(self.schema)

    def triplets(self, *names: str) -> tuple[np.ndarray, np.ndarray]:
        recs = [r for n in names for r in self.splits[n]]
        V, M = stack_triplets(build_triplets(recs, self.schema, self.normalizers))
        if V.size == 0:
            raise DataError(f"no training triplets in split(s) {names}")
        return V, M


def prepare(schema: CohortSchema, records: list[SubjectRecord], cfg: RunConfig, out_dir) -> Prepared:
    """Split subjects, fit normalizers on the training split and write everything to ``out_dir``."""
    if not records:
        raise DataError("the cohort has no subjects")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_r, valid_r, test_r = split_dataset(records, cfg.split_fractions, cfg.split_seed)
    norm = fit_normalizers(train_r, schema)
    splits = dict(zip(SPLITS, (train_r, valid_r, test_r)))
    save_schema(schema, out / "schema.yaml")
    write_json(out / "normalizers.json", norm.to_dict())
    manifest = {"schema_hash": schema.hash(), "split_fractions": list(cfg.split_fractions),
                "split_seed": cfg.split_seed, "subjects": {}, "triplets": {}, "files": {}}
    for name, recs in splits.items():
        write_tidy(recs, schema, out / f"{name}.csv")
        manifest["subjects"][name] = len(recs)
        manifest["triplets"][name] = len(build_triplets(recs, schema, norm))
    for name in ("schema.yaml", "normalizers.json", *(f"{s}.csv" for s in SPLITS)):
        manifest["files"][name] = sha256_file(out / name)
    write_json(out / "manifest.json", manifest)
    return Prepared(schema, norm, splits, manifest)


def load_prepared(data_dir) -> Prepared:
    d = Path(data_dir)
    if not (d / "manifest.json").exists():
        raise ConfigError(f"no prepared data in {d}; run 'prepare' first")
    schema = load_schema(d / "schema.yaml")
    norm = Normalizers.from_dict(json.loads((d / "normalizers.json").read_text()))
    manifest = json.loads((d / "manifest.json").read_text())
    if manifest["schema_hash"] != schema.hash():
        raise DataError(f"{d}/schema.yaml does not match the manifest")
    splits = {s: load_tidy(d / f"{s}.csv", schema) for s in SPLITS}
    return Prepared(schema, norm, splits, manifest)


def fit_model(prep: Prepared, hp: Hyperparams, seed: int, splits=("train",), log_path=None) -> TrainResult:
    V, M = prep.triplets(*splits)
    valid = prep.triplets("valid") if "valid" not in splits and prep.splits["valid"] else None
    return train(V, M, prep.layout, hp, seed, valid=valid, log_path=log_path)


def bundle_for(prep: Prepared, result: TrainResult, meta: dict) -> ModelBundle:
    return ModelBundle(result.params, prep.schema, prep.normalizers,
                       {"hyperparams": result.hyperparams.to_dict(), "version": __version__, **meta})


def check_compatible(bundle: ModelBundle, schema: CohortSchema) -> None:
    if bundle.schema_hash != schema.hash():
        raise CompatibilityError(f"model schema hash {str(bundle.schema_hash)[:12]} does not match "
                                 f"data schema hash {schema.hash()[:12]}")


def load_bundle(path) -> ModelBundle:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"model file not found: {p}")
    bundle = load_model(p)
    if bundle.schema is None or bundle.normalizers is None:
        raise DataError(f"{p} carries no schema or normalizers")
    return bundle


def with_baseline(records: list[SubjectRecord], schema: CohortSchema) -> list[SubjectRecord]:
    return [r for r in records if 0 in r.visits and r.has_longitudinal_data(0, schema)]


def horizon(records: list[SubjectRecord], schema: CohortSchema, tau=None) -> int:
    """Twin length in months: ``tau`` or the longest follow-up among ``records``."""
    if tau is not None:
        return int(tau)
    return max((r.last_month for r in records), default=0)


def twins_and_data(params, schema: CohortSchema, normalizers: Normalizers, records, K: int,
                   schedule: AnnealSchedule, seed: int, tau=None, chunk_size: int = 8, jobs: int = 1):
    """Generate twins for ``records`` and return (TwinSet, data arrays, decoded twins)."""
    enc = Encoder(schema, normalizers)
    subjects = with_baseline(records, schema)
    if not subjects:
        raise DataError("no subject has an observed baseline visit")
    months = horizon(subjects, schema, tau)
    ts = generate_digital_twins(params, enc, subjects, months, K, schedule, seed, chunk_size, jobs)
    data = cohort_arrays(subjects, schema, n_visits=ts.n_visits)
    _, tw = ts.decode(enc, data.variables)
    return ts, data, tw


def _py_value(spec, x: float):
    if not np.isfinite(x):
        return None
    if spec.kind == "categorical":
        return spec.labels[int(x)]
    if spec.kind in ("binary", "ordinal") or spec.integer:
        return int(round(x))
    return float(x)


def twin_records(ts: TwinSet, encoder: Encoder) -> list[tuple[int, SubjectRecord]]:
    """Natural-scale records, one per (subject, twin), in subject-then-twin order."""
    schema = encoder.schema
    dec = encoder.decode_visits(ts.visits)
    stat = encoder.decode_static(ts.static)
    step = ts.interval
    out = []
    for i, sid in enumerate(ts.subject_ids):
        for k in range(ts.K):
            static = {s.name: _py_value(s, stat[s.name][i, k]) for s in schema.static}
            visits = {t * step: {s.name: _py_value(s, dec[s.name][i, k, t]) for s in schema.longitudinal}
                      for t in range(ts.n_visits)}
            out.append((k, SubjectRecord(sid, static, visits)))
    return out


def write_generated(path, pairs: list[tuple[int, SubjectRecord]], schema: CohortSchema, provenance: dict,
                    twin_column: bool = True) -> None:
    """Tidy CSV of generated trajectories plus a ``.provenance.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    index = {id(rec): k for k, rec in pairs}
    extra = {"twin": lambda rec, month: index[id(rec)]} if twin_column else None
    write_tidy([rec for _, rec in pairs], schema, tmp, extra=extra)
    os.replace(tmp, path)
    write_json(Path(str(path) + ".provenance.json"),
               {**provenance, "rows_sha256": sha256_file(path), "version": __version__})


def provenance(model_path, bundle: ModelBundle, seed: int, **extra) -> dict:
    return {"model": str(model_path), "model_sha256": model_hash(model_path), "schema_hash": bundle.schema_hash,
            "seed": seed, **extra}
