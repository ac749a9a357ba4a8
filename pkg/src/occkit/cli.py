"""``occ`` command-line interface.

Exit codes: 0 success, 1 input/output failure, 2 invalid arguments or data,
3 solver stopped before convergence (outputs are still written).

Every subcommand accepts ``--config FILE`` (JSON object keyed by flag
destination, for example ``{"nu": 0.1, "kernel": "rbf"}``); flags given on
the command line override the file. ``OCC_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    BenchmarkSuite,
    GridSpec,
    Protocol,
    load_image_folder,
    planted_images,
    run_noise_sweep,
    run_uci_suite,
    summarize,
    write_noise_summary,
    write_runs,
    write_summary,
    grid_search,
)
from .core import ScalerParams, apply_scaler, fit_scaler, load_dataset
from .evaluation import ConfusionCounts, evaluate, metrics
from .exceptions import OCCError, SolverDidNotConverge
from .kernels import KernelSpec
from .models import MODEL_KINDS, decision_function, load_model, save_model, train_model
from .solver import SolverConfig
from .uci import REGISTRY

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2, 3

log = logging.getLogger("occkit")


class UsageError(Exception):
    """Invalid flag combination detected after parsing."""


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _gamma(text):
    if str(text) == "scale":
        return "scale"
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gamma must be 'scale' or a number, got {text!r}") from None
    return v


def _common(p):
    p.add_argument("--config", type=Path, help="JSON file of flag defaults; flags override it")
    p.add_argument("--seed", type=int, default=42, help="master seed (default 42)")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker cap for parallel steps")


def _data_flags(p, required=True):
    p.add_argument("--data", type=Path, required=required, help="CSV or libsvm file")
    p.add_argument("--label-column", default=None, help="CSV label column name")
    p.add_argument("--target-label", default="1", help="label value marking the target class")
    p.add_argument("--no-header", action="store_true", help="CSV has no header row")


def _model_flags(p):
    p.add_argument("--kind", choices=MODEL_KINDS, default="pb_ocsvm")
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--C", type=float, default=None, help="SVDD trade-off (default 1/(nu N))")
    p.add_argument("--kernel", choices=("rbf", "linear", "polynomial"), default="rbf")
    p.add_argument("--gamma", type=_gamma, default="scale")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--coef0", type=float, default=1.0)
    p.add_argument("--dual-form", choices=("rederived", "paper"), default="rederived")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--scaler", choices=("minmax", "zscore", "none"), default="none")


def _protocol_flags(p):
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--scaler", choices=("minmax", "zscore", "none"), default="minmax")
    p.add_argument("--test-includes-train", type=_bool, default=False, metavar="{true,false}")
    p.add_argument("--selection", choices=("test", "validation"), default="test")
    p.add_argument("--tol", type=float, default=1e-6)


def _grid_flags(p):
    p.add_argument("--nu", type=float, nargs="+", default=list(GridSpec().nu))
    p.add_argument("--tau", type=float, nargs="+", default=list(GridSpec().tau))
    p.add_argument("--kernels", nargs="+", default=["rbf"], choices=("rbf", "linear", "polynomial"))
    p.add_argument("--gamma-exp", type=int, nargs="+", default=list(GridSpec().gamma_exponents),
                   help="rbf widths scale * 2**k")
    p.add_argument("--degrees", type=int, nargs="+", default=[2, 3])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="occ", description="One-class classification toolkit.")
    ap.add_argument("--version", action="version", version=f"occkit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="image preprocessing pipeline")
    _common(p)
    p.add_argument("--input", type=Path, required=True, help="image file or directory")
    p.add_argument("--output", type=Path, default=None, help="output file or directory")
    p.add_argument("--pipeline", type=Path, default=None, help="pipeline JSON (dotted keys)")
    p.add_argument("--stage", choices=("mask", "inpaint", "resize", "tv", "ace", "noise"),
                   default="noise", help="last stage to run")
    p.add_argument("--band-pass", action="store_true", help="mask only th_min <= i <= th_max")
    p.add_argument("--bits", type=int, choices=(8, 16), default=8)

    p = sub.add_parser("train", help="train a one-class model")
    _common(p)
    _data_flags(p)
    _model_flags(p)

    p = sub.add_parser("predict", help="score samples with a trained model")
    _common(p)
    p.add_argument("--model", type=Path, required=True)
    _data_flags(p)
    p.add_argument("--output", type=Path, default=None, help="predictions CSV")

    p = sub.add_parser("eval", help="metrics from a model, a scores file, or counts")
    _common(p)
    p.add_argument("--model", type=Path, default=None)
    _data_flags(p, required=False)
    p.add_argument("--scores", type=Path, default=None, help="predictions CSV from 'occ predict'")
    p.add_argument("--counts", type=int, nargs=4, metavar=("TP", "TN", "FP", "FN"), default=None)
    p.add_argument("--ci-n", type=int, default=None, help="N inside the confidence interval")

    p = sub.add_parser("gridsearch", help="grid search on one labelled dataset")
    _common(p)
    _data_flags(p)
    p.add_argument("--kind", choices=MODEL_KINDS, default="pb_ocsvm")
    _grid_flags(p)
    _protocol_flags(p)

    p = sub.add_parser("benchmark", help="UCI suite or noise sweep")
    _common(p)
    p.add_argument("--suite", choices=("uci", "noise"), default="uci")
    p.add_argument("--datasets", nargs="*", default=list(REGISTRY))
    p.add_argument("--data-dir", type=Path, default=None)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--kinds", nargs="+", choices=MODEL_KINDS, default=["ocsvm", "pb_ocsvm"])
    p.add_argument("--images-dir", type=Path, default=None,
                   help="noise suite: folder with target/ and outlier/ images (synthetic if absent)")
    p.add_argument("--noise-kinds", nargs="+", default=["gaussian", "laplacian", "uniform"])
    p.add_argument("--scales", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.2])
    _grid_flags(p)
    _protocol_flags(p)
    return ap


def parse(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise FileNotFoundError(f"cannot read config {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        bad = sorted(k.replace("-", "_") for k in cfg if k.replace("-", "_") not in known)
        if bad:
            raise UsageError(f"unknown config keys: {', '.join(bad)}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = ap.parse_args(argv)
        for key in ("data", "model", "scores", "input", "output", "pipeline", "data_dir", "images_dir", "out_dir"):
            v = getattr(args, key, None)
            if isinstance(v, str):
                setattr(args, key, Path(v))
    return args


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _load(args, path=None):
    path = path or args.data
    if not Path(path).exists():
        raise FileNotFoundError(f"data file not found: {path}")
    return load_dataset(path, label_column=args.label_column, target_label=args.target_label,
                        header=not args.no_header)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _solver(args):
    return SolverConfig(tolerance=args.tol, max_iterations=getattr(args, "max_iter", None))


def _protocol(args):
    return Protocol(args.train_fraction, args.scaler, args.test_includes_train, args.selection, _solver(args))


def _grid(args):
    return GridSpec(tuple(args.nu), tuple(args.tau), tuple(args.kernels), tuple(args.gamma_exp),
                    tuple(args.degrees))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    from .imageprep import PipelineConfig, load_image, run_pipeline, save_image, write_histograms

    if not args.input.exists():
        raise FileNotFoundError(f"input not found: {args.input}")
    cfg = PipelineConfig.from_file(args.pipeline) if args.pipeline else PipelineConfig()
    if args.band_pass:
        cfg = PipelineConfig.from_mapping(dict(cfg.to_dict(), **{"mask.band_pass": True}))
    if cfg.noise_kind is not None and args.seed != 42 and cfg.noise_seed == 42:
        cfg = PipelineConfig.from_mapping(dict(cfg.to_dict(), **{"noise.seed": args.seed}))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    if args.input.is_dir():
        files = sorted(f for f in args.input.iterdir() if f.suffix.lower() in (".png", ".pgm", ".pnm"))
        out_dir = args.output or args.out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        targets = [(f, out_dir / (f.stem + ".png")) for f in files]
    else:
        targets = [(args.input, args.output or args.out_dir / "processed.png")]
    for src, dst in targets:
        hist = {}
        out = run_pipeline(load_image(src), cfg, args.stage, histograms=hist)
        save_image(out, dst, bits=args.bits)
        hname = "histogram.csv" if len(targets) == 1 else f"{src.stem}.histogram.csv"
        write_histograms(hist, args.out_dir / hname)
        print(f"{src} -> {dst} ({out.height}x{out.width})")
    _write_json(args.out_dir / "preprocess.json",
                {"seed": args.seed, "stage": args.stage, "pipeline": cfg.to_dict(),
                 "inputs": [str(s) for s, _ in targets]})
    return EXIT_OK


def cmd_train(args) -> int:
    ds = _load(args)
    train = ds.targets() if ds.has_labels else ds
    scaler = fit_scaler(train.X, args.scaler)
    X = apply_scaler(train.X, scaler)
    gamma = None if args.gamma == "scale" else args.gamma
    kernel = KernelSpec(args.kernel, gamma, args.degree, args.coef0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SolverDidNotConverge)
        model = train_model(args.kind, X, nu=args.nu, tau=args.tau, kernel=kernel,
                            solver=_solver(args), C=args.C, dual_form=args.dual_form)
    model.params["scaler"] = scaler.to_dict()
    model.params["seed"] = args.seed
    args.out_dir.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out_dir / "model.json")
    diag = dict(model.diagnostics, seed=args.seed, kind=model.kind, rho=model.rho)
    _write_json(args.out_dir / "diagnostics.json", diag)
    print(f"seed={args.seed} kind={model.kind} n_support={model.n_support} "
          f"kkt_residual={model.diagnostics['kkt_residual']:.3g} "
          f"dual_objective={model.diagnostics['dual_objective']:.10g}")
    if any(issubclass(w.category, SolverDidNotConverge) for w in caught):
        print("warning: solver hit the iteration cap; model written but flagged", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _model_scores(model, X):
    sc = model.params.get("scaler")
    if sc:
        X = apply_scaler(X, ScalerParams.from_dict(sc))
    return decision_function(model, X)


def cmd_predict(args) -> int:
    if not args.model.exists():
        raise FileNotFoundError(f"model not found: {args.model}")
    model = load_model(args.model)
    ds = _load(args)
    scores = _model_scores(model, ds.X)
    out = args.output or args.out_dir / "predictions.csv"
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "score", "label"])
        for i, s in enumerate(scores):
            w.writerow([i, repr(float(s)), "target" if s >= 0 else "outlier"])
    print(f"seed={args.seed} wrote {len(scores)} predictions to {out}")
    return EXIT_OK


def _read_scores(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "score" not in rows[0]:
        raise UsageError(f"{path} has no 'score' column")
    return np.array([float(r["score"]) for r in rows])


def cmd_eval(args) -> int:
    modes = sum(x is not None for x in (args.model, args.scores, args.counts))
    if modes != 1:
        raise UsageError("give exactly one of --model, --scores or --counts")
    if args.counts is not None:
        report = metrics(ConfusionCounts(*args.counts), args.ci_n)
    else:
        if args.data is None:
            raise UsageError("--data with labels is required with --model or --scores")
        ds = _load(args)
        if not ds.has_labels:
            raise UsageError("evaluation data needs a label column (--label-column)")
        if args.model is not None:
            if not args.model.exists():
                raise FileNotFoundError(f"model not found: {args.model}")
            scores = _model_scores(load_model(args.model), ds.X)
        else:
            if not args.scores.exists():
                raise FileNotFoundError(f"scores file not found: {args.scores}")
            scores = _read_scores(args.scores)
            if scores.shape[0] != ds.n_samples:
                raise UsageError(f"{scores.shape[0]} scores for {ds.n_samples} samples")
        report = evaluate(ds.labels, scores, args.ci_n)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(args.out_dir / "metrics.json", dict(report.to_dict(), seed=args.seed))
    (args.out_dir / "metrics.csv").write_text(report.to_csv(), encoding="utf-8")
    print(json.dumps(dict(report.to_dict(), seed=args.seed)))
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    ds = _load(args)
    if not ds.has_labels:
        raise UsageError("grid search needs labelled data (--label-column)")
    best, records = grid_search(ds, _grid(args), _protocol(args), args.kind, args.seed, args.jobs)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_runs(records, args.out_dir / "runs.csv")
    if best is None:
        print("every grid cell failed; see runs.csv", file=sys.stderr)
        return EXIT_INVALID
    _write_json(args.out_dir / "best.json", best.row())
    print(f"seed={args.seed} best auc={best.auc:.4f} params={json.dumps(best.params, sort_keys=True)}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    protocol = _protocol(args)
    if args.suite == "uci":
        suite = BenchmarkSuite(tuple(args.datasets), tuple(args.kinds), _grid(args), protocol,
                               args.repetitions, args.seed,
                               str(args.data_dir) if args.data_dir else None)
        skipped = []
        records = run_uci_suite(suite, n_jobs=args.jobs, skipped=skipped)
        for name in skipped:
            print(f"warning: dataset {name} not found, skipped", file=sys.stderr)
        if not records:
            print("warning: no datasets were run", file=sys.stderr)
        write_runs(records, args.out_dir / "runs.csv")
        rows = summarize(records)
        write_summary(rows, args.out_dir / "summary.csv", args.out_dir / "summary.md", protocol, args.seed)
        for row in rows:
            print(f"{row['dataset']:<20} {row['kind']:<9} auc={row['auc_mean']} ref={row['reference_auc']}")
        return EXIT_OK
    if args.images_dir is not None:
        images, labels = load_image_folder(args.images_dir)
    else:
        images, labels = planted_images(seed=args.seed)
    cell = {"nu": args.nu[0], "tau": args.tau[0] if len(args.tau) == 1 else 0.5,
            "kernel": args.kernels[0], "hyper": float(args.gamma_exp[0]) if len(args.gamma_exp) == 1 else 0.0}
    records = run_noise_sweep(images, labels, tuple(args.noise_kinds), tuple(args.scales),
                              tuple(args.kinds), cell, Protocol(args.train_fraction, "none",
                                                               args.test_includes_train),
                              args.seed)
    write_runs(records, args.out_dir / "runs.csv")
    write_noise_summary(records, args.out_dir / "summary.csv")
    for r in records:
        print(f"{r.params['noise_kind']:<10} {r.params['noise_scale']:<5} {r.kind:<9} auc={r.auc}")
    return EXIT_OK


COMMANDS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "gridsearch": cmd_gridsearch,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("OCC_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = parse(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INVALID
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, OCCError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
