"""Command-line entry point: ``wearrhythm <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import artifacts
from .config import RunConfig, apply_overrides, build_dataclass, load_config
from .errors import ConfigInvalid, InputMissing, PipelineError
from .evaluation import (AXES, EvalConfig, FeatureSelection, Standardizer, apply_axis,
                         cross_validate, design_arrays, fit_model, logistic_predict, sweep_rows)
from .features import SENSOR_FEATURES
from .ingest import parse_streams, select_labeled_days
from .network import predict_proba
from .pipeline import RHYTHM_FEATURES, FeatureConfig, day_series_for, featurize_day
from .preprocess import window_starts
from .seeding import derive_seed
from .selection import select_top_k
from .synth import generate, write_cohort
from .training import load_model, save_model

log = logging.getLogger("wearrhythm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigInvalid(message)


# ---------------------------------------------------------------- config


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    sets = list(getattr(args, "set", None) or [])
    if getattr(args, "seed", None) is not None:
        sets.append(f"seed={args.seed}")
    if getattr(args, "features", None):
        sets.append(f"eval.features={json.dumps(args.features)}")
    if getattr(args, "overlap", None) is not None:
        sets.append(f"features.window.overlap_fraction={args.overlap}")
    if getattr(args, "heads", None) is not None:
        sets.append(f"network.heads={args.heads}")
    if getattr(args, "period", None) is not None:
        sets.append(f"eval.period={args.period}")
    if getattr(args, "global_ranking", False):
        sets.append("eval.global_ranking=true")
    cfg = apply_overrides(cfg, sets)
    if cfg.eval.period not in cfg.features.periods:
        cfg = replace(cfg, features=replace(cfg.features,
                                            periods=tuple(sorted({*cfg.features.periods, cfg.eval.period}))))
    return cfg


def _out(args, cfg: RunConfig, default: str) -> Path:
    out = Path(args.out or cfg.out_dir or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- loading


def _require_dir(path, cfg: RunConfig) -> Path:
    path = path or cfg.data_dir
    if path is None:
        raise InputMissing("--input is required")
    p = Path(path)
    if not p.exists():
        raise InputMissing(f"input not found: {p}")
    return p


def _parse_raw(data_dir: Path):
    paths = [data_dir / f"{n}.csv" for n in ("heart_rate", "steps", "labels")]
    for p in paths:
        if not p.exists():
            raise InputMissing(f"missing {p.name} in {data_dir}")
    return parse_streams(*paths)


def _raw_days(data_dir: Path, cfg: RunConfig):
    result = _parse_raw(data_dir)
    streams = result.streams
    days = []
    for ref in select_labeled_days(list(streams.values()), derive_seed(cfg.seed, "ingest")):
        try:
            days.append(day_series_for(streams[ref.subject_id], ref, cfg.features.sma_minutes))
        except PipelineError as exc:
            log.warning("dropping %s: %s", ref.subject_id, exc)
    return days


def load_days(path: Path, cfg: RunConfig):
    """Day series from a raw data dir (CSV streams) or a preprocess output dir."""
    if (path / "heart_rate.csv").exists():
        return _raw_days(path, cfg)
    files = artifacts.day_files(path)
    if not files:
        raise InputMissing(f"{path}: neither raw streams nor day_*.csv files found")
    return [artifacts.read_day(f) for f in files]


def _featurize_all(days, fcfg: FeatureConfig, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(featurize_day, days, [fcfg] * len(days)))
    return [featurize_day(d, fcfg) for d in days]


def load_samples(path: Path, cfg: RunConfig, jobs: int = 1):
    """Samples from a featurize output dir, or computed from days otherwise."""
    pairs = artifacts.sample_files(path) if path.is_dir() else []
    if pairs and not (path / "heart_rate.csv").exists():
        samples = [artifacts.read_sample(f, r) for f, r in pairs]
        missing = [p for p in cfg.features.periods if p not in samples[0].rhythm]
        if missing:
            raise ConfigInvalid(f"feature files lack period(s) {missing}; re-run featurize")
        return samples
    return _featurize_all(load_days(path, cfg), cfg.features, jobs)


def _labeled(samples):
    keep = [s for s in samples if s.label in (0, 1)]
    if len(keep) < len(samples):
        log.warning("ignoring %d unlabeled samples", len(samples) - len(keep))
    return keep


# ---------------------------------------------------------------- subcommands


def cmd_synth(args, cfg: RunConfig):
    out = _out(args, cfg, "cohort")
    spec = replace(cfg.synth, seed=derive_seed(cfg.seed, "synth") % (2 ** 63)) \
        if args.seed is not None else cfg.synth
    streams, truth = generate(spec)
    write_cohort(out, streams, truth, cfg.provenance())
    print(json.dumps({"subjects": len(streams), "out": str(out)}))


def cmd_ingest(args, cfg: RunConfig):
    data = _require_dir(args.input, cfg)
    out = _out(args, cfg, "ingested")
    result = _parse_raw(data)
    refs = select_labeled_days(list(result.streams.values()), derive_seed(cfg.seed, "ingest"))
    artifacts.write_table(out / "labeled_days.csv", {"provenance": cfg.provenance()},
                          ("subject_id", "day", "label"),
                          ([r.subject_id, r.day.isoformat(), int(r.label)] for r in refs))
    artifacts.write_json(out / "diagnostics.json", {
        "provenance": cfg.provenance(),
        "subjects": sorted(result.streams),
        "diagnostics": [vars(d) for d in result.diagnostics],
    })
    print(json.dumps({"subjects": len(result.streams), "labeled_days": len(refs),
                      "errors": len(result.errors())}))


def cmd_preprocess(args, cfg: RunConfig):
    data = _require_dir(args.input, cfg)
    out = _out(args, cfg, "days")
    days = _raw_days(data, cfg)
    for d in days:
        artifacts.write_day(out, d, cfg.provenance())
    print(json.dumps({"days": len(days), "out": str(out)}))


def cmd_featurize(args, cfg: RunConfig):
    src = _require_dir(args.input, cfg)
    out = _out(args, cfg, "features")
    days = load_days(src, cfg)
    samples = _featurize_all(days, cfg.features, args.jobs)
    for d, s in zip(days, samples):
        starts = window_starts(len(d.rhr), cfg.features.window)
        artifacts.write_sample(out, s, starts, cfg.provenance())
    print(json.dumps({"samples": len(samples), "out": str(out)}))


def cmd_select(args, cfg: RunConfig):
    src = _require_dir(args.input, cfg)
    out = _out(args, cfg, "selection")
    samples = _labeled(load_samples(src, cfg, args.jobs))
    win = np.vstack([s.sensor for s in samples])
    win_y = np.concatenate([np.full(s.sensor.shape[0], s.label) for s in samples])
    sr = select_top_k(win, win_y, cfg.eval.k_sensor, SENSOR_FEATURES, cfg.eval.mi_bins)
    rm = np.vstack([s.rhythm[cfg.eval.period] for s in samples])
    rr = select_top_k(rm, [s.label for s in samples], cfg.eval.k_rhythm, RHYTHM_FEATURES,
                      cfg.eval.mi_bins)
    rows = [("sensor", f, v, r) for f, v, r in sr.rows()] + \
           [("rhythm", f, v, r) for f, v, r in rr.rows()]
    artifacts.write_table(out / "ranking.csv", {"provenance": cfg.provenance()},
                          ("kind", "feature", "mi", "rank"), rows)
    print(json.dumps({"sensor": sr.selected, "rhythm": rr.selected}))


def cmd_train(args, cfg: RunConfig):
    src = _require_dir(args.input, cfg)
    out = _out(args, cfg, "model")
    samples = _labeled(load_samples(src, cfg, args.jobs))
    model = fit_model(samples, list(range(len(samples))), cfg.eval, cfg.network, cfg.train,
                      derive_seed(cfg.seed, "train-all"))
    net = model.net or cfg.network
    save_model(out / "model.npz", model.params, net,
               kind=model.kind,
               provenance=cfg.provenance(),
               sensor_features=model.selection.sensor,
               rhythm_features=model.selection.rhythm,
               period=cfg.eval.period,
               subseq_len=cfg.eval.subseq_len,
               threshold=cfg.eval.threshold,
               features=cfg.to_dict()["features"],
               sensor_mean=model.sensor_scaler.mean, sensor_std=model.sensor_scaler.std,
               rhythm_mean=model.rhythm_scaler.mean, rhythm_std=model.rhythm_scaler.std)
    if model.train_log is not None:
        (out / "train_log.csv").write_text(
            "# " + json.dumps({"provenance": cfg.provenance()}, sort_keys=True) + "\n"
            + model.train_log.to_csv())
    print(json.dumps({"model": str(out / "model.npz"), "samples": len(samples),
                      "best_epoch": getattr(model.train_log, "best_epoch", None)}))


def _metric_table(report) -> str:
    names = ("sensitivity", "specificity", "auc_roc", "f_beta", "precision", "recall")
    lines = ["fold  " + "  ".join(f"{n:>11}" for n in names)]

    def fmt(v):
        return f"{'n/a':>11}" if v is None else f"{v:11.4f}"

    for f in report.folds:
        d = f.report.to_dict()
        lines.append(f"{f.fold:<4}  " + "  ".join(fmt(d[n]) for n in names))
    agg = report.aggregate
    lines.append("mean  " + "  ".join(fmt(agg[n]["mean"]) for n in names))
    lines.append("std   " + "  ".join(fmt(agg[n]["std"]) for n in names))
    return "\n".join(lines)


def cmd_evaluate(args, cfg: RunConfig):
    src = _require_dir(args.input, cfg)
    out = _out(args, cfg, "evaluation")
    samples = _labeled(load_samples(src, cfg, args.jobs))
    report = cross_validate(samples, cfg.seed, cfg.eval, cfg.network, cfg.train, args.jobs)
    summary = {"provenance": cfg.provenance(), "n_samples": len(samples), **report.summary()}
    artifacts.write_json(out / "summary.json", summary)
    for f in report.folds:
        if f.model.train_log is not None:
            (out / f"train_log_fold{f.fold}.csv").write_text(f.model.train_log.to_csv())
    print(_metric_table(report))


def cmd_sweep(args, cfg: RunConfig):
    src = _require_dir(args.input, cfg)
    out = _out(args, cfg, "sweep")
    axis = args.axis
    values = AXES[axis] if not args.values else tuple(json.loads(f"[{args.values}]"))
    if axis == "period":
        cfg = replace(cfg, features=replace(cfg.features, periods=tuple(sorted(set(values)))))
    days = load_days(src, cfg) if axis == "overlap" else None
    base = None if axis == "overlap" else _labeled(load_samples(src, cfg, args.jobs))
    rows = []
    for v in values:
        ecfg, ncfg = apply_axis(axis, v, cfg.eval, cfg.network)
        if axis == "overlap":
            fcfg = replace(cfg.features, window=replace(cfg.features.window, overlap_fraction=float(v)))
            samples = _labeled(_featurize_all(days, fcfg, args.jobs))
        else:
            samples = base
        report = cross_validate(samples, cfg.seed, ecfg, ncfg, cfg.train, args.jobs)
        rows.append(sweep_rows(axis, v, report))
        log.info("%s=%s done", axis, v)
    cols = list(rows[0])
    artifacts.write_table(out / f"report_{axis}.csv", {"provenance": cfg.provenance()}, cols,
                          ([r[c] for c in cols] for r in rows))
    print(json.dumps({"report": str(out / f"report_{axis}.csv"), "points": len(rows)}))


def cmd_predict(args, cfg: RunConfig):
    if not args.model or not Path(args.model).exists():
        raise InputMissing(f"model not found: {args.model}")
    if not args.input or not Path(args.input).exists():
        raise InputMissing(f"day file not found: {args.input}")
    params, net, extra = load_model(args.model)
    fcfg = build_dataclass(FeatureConfig, extra["features"], "features")
    day = artifacts.read_day(args.input)
    sample = featurize_day(day, fcfg)
    ecfg = EvalConfig(period=int(extra["period"]), subseq_len=extra.get("subseq_len"))
    sel = FeatureSelection(list(extra["sensor_features"]), list(extra["rhythm_features"]))
    s, r, _ = design_arrays([sample], [0], sel, ecfg)
    s = Standardizer(extra["sensor_mean"], extra["sensor_std"], extra["sensor_std"] == 1.0).transform(s)
    r = Standardizer(extra["rhythm_mean"], extra["rhythm_std"], extra["rhythm_std"] == 1.0).transform(r)
    if extra.get("kind") == "logistic":
        prob = float(logistic_predict(params, s, r)[0])
    else:
        prob = float(predict_proba(params, net, s, r)[0])
    threshold = float(extra.get("threshold", 0.5))
    print(json.dumps({"subject_id": day.subject_id, "day": day.day, "probability": prob,
                      "label": "infected" if prob >= threshold else "healthy",
                      "threshold": threshold}))


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic cohort"),
    "ingest": (cmd_ingest, "validate raw CSV streams and pick labeled days"),
    "preprocess": (cmd_preprocess, "write smoothed minute-level day series"),
    "featurize": (cmd_featurize, "window features and rhythm vectors per day"),
    "select": (cmd_select, "rank features by mutual information"),
    "train": (cmd_train, "fit one model on every labeled sample"),
    "evaluate": (cmd_evaluate, "subject-wise cross-validation"),
    "sweep": (cmd_sweep, "cross-validate along one experiment axis"),
    "predict": (cmd_predict, "score one day-series file"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--out", help="output directory")
    common.add_argument("--input", help="input file or directory")
    common.add_argument("--features", choices=("mi", "paper-top10"))
    common.add_argument("--overlap", type=float, choices=(0.0, 0.25, 0.5))
    common.add_argument("--heads", type=int)
    common.add_argument("--period", type=int, choices=(24, 48, 96))
    common.add_argument("--global-ranking", action="store_true",
                        help="rank MI features on all samples before splitting (leaks)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config entry, e.g. network.heads=4")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="wearrhythm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "sweep":
            p.add_argument("--axis", required=True, choices=sorted(AXES))
            p.add_argument("--values", help="comma-separated subset of grid values")
        if name == "predict":
            p.add_argument("--model", required=True, help="model.npz from the train command")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        level = logging.WARNING - 10 * min(args.verbose, 2)
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        COMMANDS[args.command][0](args, cfg)
        return 0
    except PipelineError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2 if isinstance(exc, (ConfigInvalid, InputMissing)) else 1
    except (ValueError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
