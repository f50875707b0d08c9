"""Command line: ``mklkit {gen,train,predict,experiment,report}``.

Exit codes: 0 success, 2 invalid input, 3 solver non-convergence, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from ..datagen import SyntheticSpec, generate, write_instance
from ..errors import MKLError, NonConvergenceError, ValidationError
from ..kernels import (GramMatrix, GramSet, default_distance_scale, kernel_from_distance,
                       read_index_pairs, read_labels, read_matrix, repair_psd, write_labels)
from ..serialize import dumps_bundle, loads_bundle
from .config import ExperimentConfig, dump_config, load_config, parse_overrides
from .experiments import EXPERIMENTS
from .metrics import accuracy, confusion_csv, confusion_matrix
from .multiclass import METHODS, OvoModel, decision, fit_binary, ovo_fit, ovo_predict
from ..linf import sign_labels

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGENCE, EXIT_IO = 0, 2, 3, 4


def _kernel_files(args, prefix: str) -> list[Path]:
    if args.kernels:
        return [Path(p) for p in args.kernels]
    if not args.data:
        raise ValidationError("give --kernels or --data")
    files = sorted(Path(args.data).glob(f"{prefix}*.*"),
                   key=lambda p: int(p.stem.rsplit("_", 1)[1]))
    files = [p for p in files if p.suffix in (".csv", ".kmx")]
    if not files:
        raise ValidationError(f"no {prefix}<k> files in {args.data}")
    return files


def _labels_file(args, default: str) -> Path:
    if args.labels:
        return Path(args.labels)
    if args.data:
        return Path(args.data) / default
    raise ValidationError("give --labels or --data")


def cmd_gen(args) -> int:
    spec = SyntheticSpec(l=args.l, m=args.m, n=args.n, tau=args.tau, p=args.p,
                         seed=args.seed, delta=args.delta)
    out = write_instance(generate(spec), args.out, binary=args.binary)
    print(f"wrote {spec.l} kernels (rho={spec.rho:g}) to {out}")
    return EXIT_OK


def _converged(model) -> bool:
    return getattr(model, "converged", True)


def cmd_train(args) -> int:
    mats = np.stack([read_matrix(p) for p in _kernel_files(args, "kernel_")])
    labels = read_labels(_labels_file(args, "train_labels.txt"))
    if mats.shape[1:] != (labels.size, labels.size):
        raise ValidationError("kernel matrices must be m x m with m = number of labels")
    mu = None
    if args.distances:
        mu = np.array([default_distance_scale(D) for D in mats])
        mats = np.stack([kernel_from_distance(D, s) for D, s in zip(mats, mu)])
    mats = np.stack([repair_psd(GramMatrix(0.5 * (K + K.T))).entries for K in mats])
    scales = np.ones(mats.shape[0])
    if args.normalize:
        scales = labels.size / np.einsum("kii->k", mats)
        mats = mats * scales[:, None, None]
    grouping = read_index_pairs(args.grouping) if args.grouping else None
    g = GramSet(list(mats), labels, descriptor_of=grouping)
    opts = dict(max_iter=args.max_iter, obj_tol=args.obj_tol, max_rounds=args.max_rounds)
    classes = np.unique(labels)
    if set(classes.tolist()) <= {-1, 1}:
        model = fit_binary(g, args.method, args.C, **opts)
        models, indices = {None: model}, None
        classes = np.array([-1, 1])
    else:
        ovo = ovo_fit(g, args.method, args.C, **opts)
        models, indices = ovo.models, ovo.indices
    Path(args.out).write_text(dumps_bundle(models, classes, scales, mu, indices))
    bad = [k for k, m in models.items() if not _converged(m)]
    print(f"trained {len(models)} {args.method} model(s) on {labels.size} points -> {args.out}")
    if bad:
        print(f"warning: {len(bad)} model(s) hit max_iter before converging", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = loads_bundle(Path(args.model).read_text())
    S = np.stack([read_matrix(p) for p in _kernel_files(args, "test_kernel_")])
    if bundle["distance_scales"] is not None:
        S = np.stack([kernel_from_distance(D, s) for D, s in zip(S, bundle["distance_scales"])])
    if bundle["scales"] is not None:
        S = S * bundle["scales"][:, None, None]
    models = bundle["models"]
    if None in models:
        pred = sign_labels(decision(models[None], S)).astype(int)
    else:
        ovo = OvoModel(np.array(bundle["classes"]), models, bundle["indices"])
        pred = ovo_predict(ovo, S)
    if args.out:
        write_labels(args.out, pred)
    else:
        for v in pred:
            print(int(v))
    truth_path = args.truth or (Path(args.data) / "test_labels.txt" if args.data else None)
    if truth_path and Path(truth_path).exists():
        truth = read_labels(truth_path)
        if truth.size != pred.size:
            raise ValidationError("truth labels do not match the number of test points")
        print(f"accuracy {accuracy(truth, pred):.4f}", file=sys.stderr)
        if args.confusion:
            classes, M = confusion_matrix(truth, pred, np.array(bundle["classes"]))
            Path(args.confusion).write_text(confusion_csv(classes, M))
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {f.name: getattr(args, f"cfg_{f.name}") for f in fields(ExperimentConfig)
                 if getattr(args, f"cfg_{f.name}", None) is not None}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value
    return parse_overrides(overrides, cfg)


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    result = EXPERIMENTS[args.kind](cfg)
    out = Path(args.out)
    paths = result.write(out)
    (out / f"{result.name}_config.ini").write_text(dump_config(cfg))
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_report(args) -> int:
    for path in args.inputs:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            continue
        print(f"== {path}")
        shown = [[_short(v) for v in row] for row in rows]
        widths = [max(len(r[i]) for r in shown if i < len(r)) for i in range(len(shown[0]))]
        for r in shown:
            print("  ".join(v.rjust(w) for v, w in zip(r, widths)))
    return EXIT_OK


def _short(v: str) -> str:
    try:
        f = float(v)
    except ValueError:
        return v
    return v if v.lstrip("-").isdigit() else f"{f:.4g}"


def _show(v) -> str:
    return ", ".join(map(str, v)) if isinstance(v, tuple) else str(v)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mklkit", description="Multiple kernel learning toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a synthetic redundancy instance")
    for name, default, typ in (("l", 10, int), ("m", 150, int), ("n", 20, int), ("tau", 4, int),
                               ("p", 10, int), ("seed", 0, int), ("delta", 1.5, float)):
        gen.add_argument(f"--{name}", type=typ, default=default)
    gen.add_argument("--out", required=True)
    gen.add_argument("--binary", action="store_true", help="write training grams as .kmx")
    gen.set_defaults(func=cmd_gen)

    train = sub.add_parser("train", help="fit a model on precomputed gram matrices")
    train.add_argument("--data", help="directory with kernel_<k> files and train_labels.txt")
    train.add_argument("--kernels", nargs="+", help="gram (or distance) matrix files")
    train.add_argument("--labels")
    train.add_argument("--grouping", help="kernel_index,descriptor_index CSV (ckl)")
    train.add_argument("--method", choices=METHODS, default="linf")
    train.add_argument("--C", type=float, default=1.0)
    train.add_argument("--distances", action="store_true",
                       help="inputs are distances; use exp(-d/mu), mu = mean distance")
    train.add_argument("--normalize", action="store_true", help="scale kernels to unit mean diagonal")
    train.add_argument("--max-iter", type=int, default=100)
    train.add_argument("--obj-tol", type=float, default=1e-5)
    train.add_argument("--max-rounds", type=int, default=10)
    train.add_argument("--out", required=True)
    train.set_defaults(func=cmd_train)

    pred = sub.add_parser("predict", help="label test points from train-by-test kernel slices")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", help="directory with test_kernel_<k> files")
    pred.add_argument("--kernels", nargs="+", help="train-by-test slice files, kernel order")
    pred.add_argument("--truth", help="test labels; prints accuracy")
    pred.add_argument("--confusion", help="write the confusion matrix CSV here")
    pred.add_argument("--out", help="write predicted labels here instead of stdout")
    pred.set_defaults(func=cmd_predict)

    exp = sub.add_parser("experiment", help="run a seeded experiment and write CSVs")
    exp.add_argument("kind", choices=sorted(EXPERIMENTS))
    exp.add_argument("--config", help="flat key = value file with section headers")
    exp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    exp.add_argument("--out", required=True)
    for f in fields(ExperimentConfig):
        flag = f"--{f.name.replace('_', '-')}"
        names = [flag] if flag == flag.lower() else [flag, flag.lower()]
        exp.add_argument(*names, dest=f"cfg_{f.name}", metavar="VALUE",
                         help=f"config key {f.name} (default {_show(f.default)})")
    exp.set_defaults(func=cmd_experiment)

    rep = sub.add_parser("report", help="print CSV outputs as aligned tables")
    rep.add_argument("inputs", nargs="+")
    rep.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MKLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
