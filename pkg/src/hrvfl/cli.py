"""Command-line entry point: ``hrvfl {train,eval,bench,noise-sweep,loss-curve}``.

Errors are reported as a single JSON object on stderr with exit code 1.
The number of worker processes for ``bench``/``noise-sweep`` comes from
the ``HRVFL_THREADS`` environment variable (default 1).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, replace

import numpy as np

from . import bench
from .data import fit_minmax, load_csv
from .errors import HRVFLError
from .feature_map import FeatureMapConfig
from .loss import HLossParams, hloss_grads, hloss_values
from .model import ModelConfig, accuracy, fit, load_model, predict, save_model
from .optimizer import NAGConfig
from .seeding import derive_seed


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _label_column(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--label-column", type=_label_column, default=-1, help="index or header name (default: last)")
    p.add_argument("--header", action="store_true", help="first row is a header")
    p.add_argument("--delimiter", default=",")


def _add_nag_args(p):
    d = NAGConfig()
    p.add_argument("--lr", type=float, default=d.initial_lr, help="initial learning rate")
    p.add_argument("--momentum", type=float, default=d.momentum)
    p.add_argument("--decay", type=float, default=d.decay, help="learning-rate decay factor")
    p.add_argument("--max-iters", type=int, default=d.max_iters)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--batch-size", type=int, default=None, help="mini-batch size (default: full batch)")
    p.add_argument("--warm-start", action="store_true", help="start from the ridge solution")
    p.add_argument("--step-scaling", action="store_true",
                   help="divide the learning rate by a curvature bound of the objective")


def _nag_from(args, seed=0) -> NAGConfig:
    return NAGConfig(args.momentum, args.lr, args.decay, args.max_iters, args.tol, args.batch_size, seed)


def _load(args):
    return load_csv(args.data, args.label_column, args.header, args.delimiter)


def cmd_train(args) -> dict:
    ds = _load(args)
    stats = None if args.no_normalize else fit_minmax(ds.X)
    X = ds.X if stats is None else stats.transform(ds.X)
    cfg = ModelConfig(
        C=args.C,
        loss="hloss" if args.model == "hrvfl" else "squared",
        hloss=HLossParams(args.lam, args.a, args.eps),
        feature=FeatureMapConfig(args.hidden, args.activation, args.weight_scale, args.seed),
        direct_links=args.model != "rvfl_wodl",
        nag=_nag_from(args, derive_seed(args.seed, "batches")),
        warm_start=args.warm_start,
        step_scaling=args.step_scaling,
    )
    model = fit(X, ds.y, cfg)
    model = replace(model, classes=ds.classes, scaler=stats)
    save_model(model, args.out)
    labels = np.asarray(ds.classes)[(ds.y > 0).astype(int)]
    return {
        "model": args.out,
        "train_accuracy": accuracy(model, ds.X, labels),
        "report": None if model.report is None else asdict(model.report),
    }


def cmd_eval(args) -> dict:
    model = load_model(args.model)
    ds = _load(args)
    labels = np.asarray(ds.classes)[(ds.y > 0).astype(int)]
    if set(map(str, ds.classes)) != set(map(str, model.classes)):
        raise HRVFLError(f"label sets differ: data {ds.classes}, model {model.classes}")
    pred = predict(model, ds.X)
    acc = float(np.mean(pred.astype(str) == labels.astype(str)))
    return {"data": args.data, "n": ds.n, "accuracy": acc}


def _finish(rows, out) -> dict:
    best = [r for r in rows if r.best]
    sys.stdout.write(bench.render_table(rows))
    return {
        "output": out,
        "rows": len(rows),
        "errors": sum(r.error is not None for r in rows),
        "best": [{"dataset": r.dataset, "model": r.model, "noise_rate": r.noise_rate, "mean": r.mean,
                  "std": r.std, "params": r.params} for r in best],
    }


def cmd_bench(args) -> dict:
    spec = bench.load_spec(args.config)
    if args.out:
        spec = replace(spec, output=args.out)
    return _finish(bench.run_experiment(spec), spec.output)


def cmd_noise_sweep(args) -> dict:
    ref = bench.DatasetRef(args.name or args.data.rsplit("/", 1)[-1].rsplit(".", 1)[0], args.data,
                           args.label_column, args.header, args.delimiter)
    d = bench.Grid()
    grid = bench.Grid(
        C=args.C_grid or d.C, lam=args.lam_grid or d.lam, a=args.a_grid or d.a, eps=args.eps_grid or d.eps,
        hidden=args.hidden_grid or d.hidden, activation=tuple(args.activation_grid.split(",")) if args.activation_grid else d.activation,
    )
    spec = bench.ExperimentSpec(
        datasets=(ref,),
        models=tuple(args.models.split(",")),
        grid=grid,
        folds=args.folds,
        noise_rates=args.rates,
        seed=args.seed,
        output=args.out,
        nag=_nag_from(args),
        weight_scale=args.weight_scale,
        warm_start=args.warm_start,
        step_scaling=args.step_scaling,
    )
    return _finish(bench.run_experiment(spec), args.out)


def cmd_loss_curve(args) -> None:
    p = HLossParams(args.lam, args.a, args.eps)
    x = np.linspace(args.xmin, args.xmax, args.num)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        cols = (x, hloss_values(x, p.lam, p.a, p.eps), hloss_grads(x, p.lam, p.a, p.eps))
        # repr keeps every sample exact on reload
        lines = [",".join(map(repr, row)) for row in zip(*(c.tolist() for c in cols))]
        out.write("x,loss,grad\n")
        out.write("".join(line + "\n" for line in lines))
    finally:
        if out is not sys.stdout:
            out.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hrvfl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit one model and save it as JSON")
    _add_data_args(p)
    p.add_argument("--model", choices=bench.MODEL_FAMILIES, default="hrvfl")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--hidden", type=int, default=100)
    p.add_argument("--activation", default="sigmoid")
    p.add_argument("--weight-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-normalize", action="store_true", help="skip min-max scaling")
    _add_nag_args(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a saved model on a CSV file")
    _add_data_args(p)
    p.add_argument("--model", required=True, help="model file from `train`")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the output directory")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("noise-sweep", help="cross-validate one dataset across label-noise rates")
    _add_data_args(p)
    p.add_argument("--name", help="dataset name (default: file stem)")
    p.add_argument("--rates", type=_floats, default=bench.SWEEP_NOISE_RATES)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--models", default=",".join(bench.MODEL_FAMILIES))
    p.add_argument("--C-grid", type=_floats)
    p.add_argument("--lam-grid", type=_floats)
    p.add_argument("--a-grid", type=_floats)
    p.add_argument("--eps-grid", type=_floats)
    p.add_argument("--hidden-grid", type=_ints)
    p.add_argument("--activation-grid")
    p.add_argument("--weight-scale", type=float, default=1.0)
    _add_nag_args(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_noise_sweep)

    p = sub.add_parser("loss-curve", help="emit x, loss, gradient samples as CSV")
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--xmin", type=float, default=-5.0)
    p.add_argument("--xmax", type=float, default=5.0)
    p.add_argument("--num", type=int, default=1001)
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.set_defaults(func=cmd_loss_curve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except (HRVFLError, OSError, ValueError, KeyError, TypeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    if result is not None:
        sys.stdout.write(json.dumps(result, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
