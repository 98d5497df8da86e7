"""Command line frontend: ``swellcp {train,calibrate,predict,evaluate,eda,simulate}``.

Exit codes: 0 success, 2 schema error, 3 config error, 4 state error
(e.g. predicting from an uncalibrated model), 1 anything else.
Every command appends an entry to a JSON run manifest.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .conformal import UnboundedIntervalWarning, calibrate_model, interval_log, interval_physical
from .config import PipelineConfig
from .data import FeatureSchema, SplitIndices, encode, filter_nonnegative, load_csv, split, write_csv
from .errors import ConfigError, StateError, SwellCPError
from .evaluation import VARIANTS, compare_variants_on_split, eda_summary
from .forest import fit_forest, predict_mean
from .model_io import ModelFile, atomic_write_text, dump_json, sha256_file
from .synth import DESK_PIPELINE, GeneratorConfig, coverage_trial, generate

CONFIG_ENV = "SWELLCP_CONFIG"


def _load_config(path, **overrides):
    path = path or os.environ.get(CONFIG_ENV)
    cfg = PipelineConfig.from_json(path) if path else PipelineConfig()
    try:
        return cfg.updated(**overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _schema(cfg):
    return FeatureSchema.with_column_map(cfg.column_map) if cfg.column_map else FeatureSchema()


def _load_filtered(path, cfg):
    ds = load_csv(path, _schema(cfg))
    return filter_nonnegative(ds)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x)) if isinstance(x, float) else str(x)


class Manifest:
    """Run manifest: one JSON file accumulating an entry per command."""

    def __init__(self, path):
        self.path = Path(path)
        self.started = time.time()

    def record(self, command, config, outputs, provenance=None, extra=None):
        if self.path.exists():
            try:
                doc = json.loads(self.path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                doc = {}
        else:
            doc = {}
        doc.setdefault("artifact_version", __version__)
        doc.setdefault("runs", [])
        entry = {
            "command": command,
            "config": config,
            "provenance": provenance,
            "outputs": {k: str(v) for k, v in outputs.items()},
            "timing": {"started_unix": self.started, "elapsed_s": time.time() - self.started},
        }
        if extra:
            entry.update(extra)
        doc["runs"].append(entry)
        dump_json(doc, self.path, indent=2)


def _manifest_for(args, default):
    return Manifest(args.manifest or default)


def cmd_train(args):
    cfg = _load_config(
        args.config, seed=args.seed, n_trees=args.n_trees, n_jobs=args.n_jobs,
        log_target=False if args.no_log else None,
    )
    ds = _load_filtered(args.data, cfg)
    sp = split(ds, cfg.fractions, cfg.seed)
    X, y = encode(ds)
    tr = np.asarray(sp.train, dtype=np.int64)
    t = cfg.transform
    if cfg.log_target:
        forest = fit_forest(X[tr], t.forward(y[tr]), cfg.hyperparams, cfg.seed, "log", cfg.n_jobs)
    else:
        forest = fit_forest(X[tr], y[tr], cfg.hyperparams, cfg.seed, "raw", cfg.n_jobs)
    data = {
        "source": str(args.data),
        "sha256": sha256_file(args.data),
        "n_loaded": ds.provenance["n_loaded"],
        "n_after_filter": len(ds),
        "filters": ds.provenance["filters"],
    }
    config_echo = {k: v for k, v in cfg.as_dict().items() if k != "n_jobs"}
    model = ModelFile(forest, t, config_echo, sp.as_dict(), data)
    model.save(args.out)
    _manifest_for(args, f"{args.out}.manifest.json").record(
        "train", cfg.as_dict(), {"model": args.out}, data, {"split_sizes": list(sp.sizes)}
    )
    print(f"trained {forest.hyperparams.n_trees} trees on {sp.sizes[0]} rows; "
          f"split sizes {sp.sizes}; model written to {args.out}")
    return 0


def _check_same_data(model, path):
    digest = sha256_file(path)
    if digest != model.data["sha256"]:
        raise StateError(f"{path} differs from the file the model was trained on")


def _model_config(model, **overrides):
    return PipelineConfig.from_dict(model.config).updated(**overrides)


def cmd_calibrate(args):
    model = ModelFile.load(args.model)
    _check_same_data(model, args.data)
    cfg = _model_config(model, alpha=args.alpha)
    ds = _load_filtered(args.data, cfg)
    sp = SplitIndices.from_dict(model.split)
    if not sp.calibration:
        raise StateError("model has an empty calibration subset")
    if model.forest.target_space != "log":
        raise StateError("conformal calibration needs a model trained on log targets (drop --no-log)")
    X, y = encode(ds)
    ca = np.asarray(sp.calibration, dtype=np.int64)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UnboundedIntervalWarning)
        cal = calibrate_model(model.forest, X[ca], y[ca], cfg.alpha, model.transform)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    model.calibrator = cal
    model.config = {**model.config, "alpha": cfg.alpha}
    out = args.out or args.model
    model.save(out)
    _manifest_for(args, f"{out}.manifest.json").record(
        "calibrate", model.config, {"model": out},
        extra={"calibrator": {k: v for k, v in cal.as_dict().items() if k != "scores"}, "rank": cal.rank},
    )
    q = "inf" if not cal.bounded else f"{cal.q_alpha:.6g}"
    print(f"calibrated on {cal.n_cal} rows at alpha={cal.alpha}: rank {cal.rank}, q_alpha={q}")
    return 0


def cmd_predict(args):
    model = ModelFile.load(args.model)
    if model.calibrator is None:
        raise StateError("model is not calibrated; run 'calibrate' first")
    cfg = _model_config(model)
    ds = load_csv(args.input, _schema(cfg), require_target=False)
    X, _ = encode(ds)
    y_log = predict_mean(model.forest, X) if len(ds) else np.zeros(0)
    iv_log = interval_log(y_log, model.calibrator)
    iv = interval_physical(iv_log, model.transform)
    header = ["row", "point", "lower", "upper", "point_log", "lower_log", "upper_log", "unbounded"]
    rows = []
    for i in range(len(ds)):
        lower = float(iv.lower[i])
        if args.clamp_lower_zero:
            lower = max(0.0, lower)
        rows.append([
            i, _fmt(float(iv.point[i])), _fmt(lower), _fmt(float(iv.upper[i])),
            _fmt(float(iv_log.point[i])), _fmt(float(iv_log.lower[i])), _fmt(float(iv_log.upper[i])),
            _fmt(not model.calibrator.bounded),
        ])
    atomic_write_text(args.out, _csv_text(header, rows))
    _manifest_for(args, f"{args.out}.manifest.json").record(
        "predict", {"model": args.model, "clamp_lower_zero": args.clamp_lower_zero},
        {"predictions": args.out}, {"source": str(args.input), "n_rows": len(ds)},
    )
    print(f"wrote {len(rows)} predictions to {args.out}")
    return 0


def cmd_evaluate(args):
    model = ModelFile.load(args.model)
    if model.calibrator is None:
        raise StateError("model is not calibrated; run 'calibrate' first")
    _check_same_data(model, args.data)
    cfg = _model_config(model, alpha=model.calibrator.alpha, n_jobs=args.n_jobs)
    ds = _load_filtered(args.data, cfg)
    sp = SplitIndices.from_dict(model.split)
    prefit = {"log_model": model.forest} if model.forest.target_space == "log" else {"raw_model": model.forest}
    results = compare_variants_on_split(ds, sp, cfg, **prefit)

    out_dir = Path(args.out_dir)
    report = {
        "alpha": cfg.alpha,
        "target_coverage": 1.0 - cfg.alpha,
        "split_sizes": list(sp.sizes),
        "heuristic_k": results["standard_rf"].report.interval_params["k"],
        "variants": {v: results[v].report.as_dict() for v in VARIANTS},
    }
    dump_json(report, out_dir / "report.json", indent=2)
    header = ["variant", "index", "y_true", "y_point", "lower", "upper", "covered", "width", "unbounded"]
    rows = []
    for v in VARIANTS:
        for r in results[v].records:
            d = r.as_row()
            rows.append([v] + [_fmt(d[k]) if k != "index" else d[k] for k in header[1:]])
    atomic_write_text(out_dir / "predictions.csv", _csv_text(header, rows))
    _manifest_for(args, out_dir / "run_manifest.json").record(
        "evaluate", {k: v for k, v in cfg.as_dict().items() if k != "n_jobs"},
        {"report": out_dir / "report.json", "predictions": out_dir / "predictions.csv"},
        model.data,
    )
    for v in VARIANTS:
        rep = results[v].report
        width = "unbounded" if math.isinf(rep.avg_width) else f"{rep.avg_width:.3f}"
        print(f"{v:12s} coverage={100 * rep.coverage:6.2f}%  avg_width={width}  "
              f"mae={rep.mae:.3f}  r2={'n/a' if rep.r2 is None else f'{rep.r2:.3f}'}")
    return 0


def cmd_eda(args):
    cfg = _load_config(args.config, hist_bin_width=args.bin_width)
    ds = _load_filtered(args.data, cfg)
    if len(ds) < 2:
        raise ConfigError("EDA needs at least 2 samples after filtering")
    summary = eda_summary(ds, cfg.hist_bin_width)
    summary["provenance"] = {"source": str(args.data), "filters": ds.provenance["filters"]}
    out_dir = Path(args.out_dir)
    dump_json(summary, out_dir / "eda.json", indent=2)
    hist = summary["target_histogram"]
    atomic_write_text(
        out_dir / "histogram.csv",
        _csv_text(["lower", "upper", "count"], [[_fmt(h["lower"]), _fmt(h["upper"]), h["count"]] for h in hist]),
    )
    names = summary["correlation"]["names"]
    matrix = summary["correlation"]["matrix"]
    atomic_write_text(
        out_dir / "correlation.csv",
        _csv_text([""] + names, [[n] + ["" if v is None else _fmt(v) for v in row] for n, row in zip(names, matrix)]),
    )
    _manifest_for(args, out_dir / "run_manifest.json").record(
        "eda", {"hist_bin_width": cfg.hist_bin_width},
        {"eda": out_dir / "eda.json", "histogram": out_dir / "histogram.csv",
         "correlation": out_dir / "correlation.csv"},
        summary["provenance"],
    )
    print(f"EDA over {len(ds)} samples written to {out_dir}")
    return 0


def _gen_config(path, **overrides):
    if path:
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read generator config {path}: {exc}") from exc
    else:
        d = {}
    d.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return GeneratorConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_simulate(args):
    gen = _gen_config(
        args.gen_config, seed=args.seed, n_samples=args.n_samples,
        shift_dose_range=tuple(args.shift_range) if args.shift_range else None,
    )
    if args.config:
        pipe = PipelineConfig.from_json(args.config)
    else:
        pipe = DESK_PIPELINE
    pipe = pipe.updated(n_trees=args.n_trees)
    alpha = args.alpha if args.alpha is not None else pipe.alpha
    if args.write_synth:
        write_csv(generate(gen), args.write_synth)
    result = coverage_trial(gen, pipe, alpha, args.reps, shift=args.shift, n_jobs=args.n_jobs)
    dump_json(result, args.out, indent=2)
    _manifest_for(args, f"{args.out}.manifest.json").record(
        "simulate", {"generator": gen.as_dict(), "pipeline": result["pipeline"], "alpha": alpha,
                     "repetitions": args.reps, "shift": args.shift},
        {"coverage_trial": args.out, **({"synth": args.write_synth} if args.write_synth else {})},
    )
    cp = result["variants"]["log_cp"]
    lo, hi = result["guarantee_band"]
    label = "shifted test doses" if args.shift else "exchangeable"
    print(f"[{label}] log_cp mean coverage {cp['mean']:.4f} over {args.reps} repetitions "
          f"(band [{lo:.4f}, {hi:.4f}], n_cal={result['n_cal']})")
    for v in ("standard_rf", "log_rf"):
        print(f"  {v} mean coverage {result['variants'][v]['mean']:.4f}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="swellcp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help=f"JSON config (default: ${CONFIG_ENV} if set)")
        sp.add_argument("--manifest", help="run manifest path (appended to)")

    sp = sub.add_parser("train", help="fit the forest on the training split")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help="model file to write")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n-trees", type=int)
    sp.add_argument("--n-jobs", type=int)
    sp.add_argument("--no-log", action="store_true", help="fit on raw swelling instead of ln(y + offset)")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("calibrate", help="compute conformal threshold on the calibration split")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--out", help="write here instead of updating --model in place")
    common(sp, config=False)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("predict", help="interval predictions for new rows")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--clamp-lower-zero", action="store_true", help="display lower bounds clipped at 0")
    common(sp, config=False)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="compare standard RF, log RF and log CP on the test split")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--n-jobs", type=int)
    common(sp, config=False)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("eda", help="summary statistics, class counts, correlations, histogram")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--bin-width", type=float)
    common(sp)
    sp.set_defaults(func=cmd_eda)

    sp = sub.add_parser("simulate", help="Monte-Carlo coverage check on synthetic data")
    sp.add_argument("--gen-config", help="generator config JSON")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--reps", type=int, default=200)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n-samples", type=int)
    sp.add_argument("--n-trees", type=int)
    sp.add_argument("--n-jobs", type=int, default=1)
    sp.add_argument("--shift", action="store_true", help="draw test doses from the shifted range")
    sp.add_argument("--shift-range", type=float, nargs=2, metavar=("LOW", "HIGH"))
    sp.add_argument("--write-synth", help="also write one generated dataset as CSV")
    sp.add_argument("--out", default="coverage_trial.json")
    common(sp)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SwellCPError as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": 1}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
