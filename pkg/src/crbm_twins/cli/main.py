"""``crbm-twins`` command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 run failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..cohort import Encoder, save_schema, write_tidy
from ..crbm import save_model
from ..errors import ConfigError, DataError, ModelFormatError, RunFailure
from ..metrics import evaluate, write_report
from ..sampling import TwinSet, generate_digital_subjects
from ..training import Hyperparams
from .config import RunConfig, load_config
from .pipeline import (bundle_for, check_compatible, fit_model, load_bundle, load_prepared, load_source, prepare,
                       provenance, twin_records, twins_and_data, write_generated, write_json)
from .sweep import run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUN = 0, 1, 2, 3


def _data_dir(out: Path) -> Path:
    return out / "data"


def _model_path(args) -> Path:
    return Path(args.model) if args.model else args.out / "model.crbm"


def cmd_synth(args, cfg: RunConfig) -> None:
    if "synth" not in cfg.data:
        cfg.data["synth"] = {}
    schema, records = load_source(RunConfig(data={"synth": cfg.data["synth"]}), args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    write_tidy(records, schema, args.out / "cohort.csv")
    save_schema(schema, args.out / "schema.yaml")
    print(f"wrote {len(records)} subjects to {args.out / 'cohort.csv'}")


def cmd_prepare(args, cfg: RunConfig) -> None:
    schema, records = load_source(cfg, args.seed)
    prep = prepare(schema, records, cfg, _data_dir(args.out))
    counts = prep.manifest["subjects"]
    print("split " + "/".join(str(counts[s]) for s in ("train", "valid", "test")) + f" -> {_data_dir(args.out)}")


def cmd_sweep(args, cfg: RunConfig) -> None:
    summary = run_sweep(cfg, _data_dir(args.out), args.out / "sweep", args.seed, args.resume, args.jobs,
                        model_path=args.out / "model.crbm")
    print(f"selected cell {summary['selected']} of {summary['n_cells']} ({summary['n_failed']} failed); "
          f"final model {summary['model']}")


def cmd_train(args, cfg: RunConfig) -> None:
    prep = load_prepared(_data_dir(args.out))
    hp = Hyperparams.from_dict(cfg.hyperparams)
    splits = ("train", "valid")
    result = fit_model(prep, hp, args.seed, splits, log_path=args.out / "train.log.jsonl")
    path = args.out / "model.crbm"
    save_model(path, bundle_for(prep, result, {"seed": args.seed, "sampling": asdict(cfg.schedule()),
                                               "trained_on": list(splits)}))
    print(f"trained model written to {path}")


def _schedule(cfg: RunConfig, bundle):
    return cfg.schedule(bundle.meta.get("sampling") if not cfg.sampling else None)


def cmd_generate(args, cfg: RunConfig) -> None:
    path = _model_path(args)
    bundle = load_bundle(path)
    enc = Encoder(bundle.schema, bundle.normalizers)
    schedule = _schedule(cfg, bundle)
    gen = cfg.generate
    out = args.out / f"{args.mode}.csv"
    if args.mode == "twins":
        prep = load_prepared(_data_dir(args.out))
        check_compatible(bundle, prep.schema)
        ts, _, _ = twins_and_data(bundle.params, prep.schema, prep.normalizers, prep.splits[gen["split"]],
                                  int(gen["K"]), schedule, args.seed, gen["tau"], int(gen["chunk_size"]), args.jobs)
        pairs = twin_records(ts, enc)
        extra = {"mode": "twins", "K": int(gen["K"]), "split": gen["split"], "n_subjects": ts.n_subjects}
    else:
        n = int(gen["n_subjects"])
        step = enc.schema.visit_interval_months
        tau = int(gen["tau"]) if gen["tau"] is not None else (bundle.schema.max_visits - 1) * step
        visits, static = generate_digital_subjects(bundle.params, n, tau, schedule, np.random.default_rng(args.seed),
                                                   enc.indicator_slice(), step)
        ts = TwinSet([f"D{i:06d}" for i in range(n)], visits[:, None], static[:, None],
                     np.zeros((n, visits.shape[-1]), dtype=bool), step)
        pairs = twin_records(ts, enc)
        extra = {"mode": "subjects", "n_subjects": n, "tau": tau}
    write_generated(out, pairs, bundle.schema, provenance(path, bundle, args.seed, sampling=asdict(schedule), **extra),
                    twin_column=args.mode == "twins")
    print(f"wrote {len(pairs)} trajectories to {out}")


def cmd_evaluate(args, cfg: RunConfig) -> None:
    path = _model_path(args)
    bundle = load_bundle(path)
    prep = load_prepared(_data_dir(args.out))
    check_compatible(bundle, prep.schema)
    ev = cfg.evaluate
    schedule = _schedule(cfg, bundle)
    _, data, tw = twins_and_data(bundle.params, prep.schema, prep.normalizers, prep.splits[ev["split"]], int(ev["K"]),
                                 schedule, args.seed, ev["tau"], jobs=args.jobs)
    report = evaluate(data, tw, prep.schema.visit_interval_months, int(ev["n_sims"]), args.seed, ev["ties"],
                      int(ev["k_clinical"]))
    out = args.out / "report"
    write_report(report, out)
    write_json(out / "provenance.json", provenance(path, bundle, args.seed, split=ev["split"], K=int(ev["K"]),
                                                   sampling=asdict(schedule)))
    print(f"report written to {out}")


COMMANDS = {"synth": cmd_synth, "prepare": cmd_prepare, "sweep": cmd_sweep, "train": cmd_train,
            "generate": cmd_generate, "evaluate": cmd_evaluate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crbm-twins", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, default=Path("run"), help="workspace directory")
        p.add_argument("--resume", action="store_true", help="continue an interrupted sweep")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        if name in ("generate", "evaluate"):
            p.add_argument("--model", default=None, help="model file (default <out>/model.crbm)")
        if name == "generate":
            p.add_argument("--mode", choices=("twins", "subjects"), default="twins")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = load_config(args.config)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ModelFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RunFailure as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
