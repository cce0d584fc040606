"""``asdcd train | predict | bench``.

Exit status: 0 success, 2 bad arguments, 3 unreadable or inconsistent
input data, 4 numeric failure during training.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

import numpy as np

from .bench import run_bench
from .data import ParseError, load_dataset
from .diagnostics import backward_error, predict, predict_accuracy, recompute_w, write_trace_csv
from .loss import LossSpec, NumericError
from .modelio import ModelFile, ModelFormatError, load_model, save_model
from .solver import VARIANTS, SolverConfig, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

LOSS_CHOICES = ("hinge", "sqhinge", "squared_hinge", "logistic")


class CliError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _load(path, d=None, *, loss=None, normalize=False):
    try:
        return load_dataset(path, d, loss=loss, normalize=normalize)
    except ParseError as exc:
        raise CliError(EXIT_DATA, f"{path}: {exc}") from None
    except OSError as exc:
        raise CliError(EXIT_DATA, f"cannot read {path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise CliError(EXIT_DATA, f"{path}: {exc}") from None


def _spec(args) -> LossSpec:
    try:
        return LossSpec(args.loss, args.C)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None


def _csv_list(kind):
    def parse(text: str):
        try:
            return [kind(tok) for tok in text.split(",") if tok]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None

    return parse


def cmd_train(args) -> int:
    spec = _spec(args)
    try:
        config = SolverConfig(
            variant=args.variant,
            threads=args.threads,
            max_epochs=args.epochs,
            gap_tolerance=args.tol,
            gap_normalized=not args.gap_absolute,
            seed=args.seed,
            shrinking=args.shrink,
            normalize_rows=args.normalize,
            trace_every=args.trace_every,
        )
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    data = _load(args.data, args.dim, loss=spec.kind)
    if data.n == 0:
        raise CliError(EXIT_DATA, f"{args.data}: no training examples")
    test = _load(args.test, data.d, loss=spec.kind) if args.test else None
    model, trace = train(data, spec, config, test=test)

    save_model(ModelFile.from_model(model, include_alpha=not args.no_alpha), args.model_out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            write_trace_csv(trace, fh)

    last = trace[-1]
    print(f"variant      {model.variant} x{model.threads}")
    print(f"epochs       {model.epochs} ({'converged' if model.converged else 'epoch limit'})")
    print(f"primal(bar)  {last.primal_obj:.10g}")
    print(f"primal(hat)  {last.primal_obj_hat:.10g}")
    print(f"dual         {last.dual_obj:.10g}")
    print(f"gap          {last.duality_gap:.3e}")
    if test is not None:
        print(f"test acc     {last.test_accuracy_hat:.4f} (hat) {last.test_accuracy_bar:.4f} (bar)")
    if model.variant == "wild":
        be = backward_error(model, data.normalized() if args.normalize else data)
        print(f"eps_rel      {be.eps_rel:.3e}")
    print(f"seconds      {model.train_seconds:.4f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        mf = load_model(args.model)
    except OSError as exc:
        raise CliError(EXIT_DATA, f"cannot read {args.model}: {exc.strerror or exc}") from None
    except ModelFormatError as exc:
        raise CliError(EXIT_DATA, f"{args.model}: {exc}") from None

    if args.use == "bar":
        if mf.alpha is None:
            raise CliError(EXIT_USAGE, "--use bar needs a model saved with its alpha block")
        if not args.train_data:
            raise CliError(EXIT_USAGE, "--use bar needs --train-data to rebuild w from alpha")

    data = _load(args.data, normalize=mf.normalize_rows)
    if data.d > mf.d:
        raise CliError(EXIT_DATA, f"{args.data} has {data.d} features, model has {mf.d}")
    data = data.with_dim(mf.d)

    w = mf.w
    if args.use == "bar":
        train_data = _load(args.train_data, normalize=mf.normalize_rows)
        if train_data.d > mf.d:
            raise CliError(EXIT_DATA, f"{args.train_data} has {train_data.d} features, model has {mf.d}")
        if train_data.n != len(mf.alpha):
            raise CliError(EXIT_DATA, f"{args.train_data} has {train_data.n} rows, model alpha has {len(mf.alpha)}")
        w = recompute_w(mf.alpha, train_data.with_dim(mf.d))

    if args.out:
        labels = predict(w, data) if data.n else np.zeros(0)
        with open(args.out, "w") as fh:
            fh.writelines("+1\n" if v > 0 else "-1\n" for v in labels)
    print(f"accuracy {predict_accuracy(w, data):.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    spec = _spec(args)
    bad = [v for v in args.variants if v not in VARIANTS]
    if bad or not args.variants:
        raise CliError(EXIT_USAGE, f"variants must be drawn from {', '.join(VARIANTS)}")
    if not args.threads_list or min(args.threads_list) < 1:
        raise CliError(EXIT_USAGE, "thread counts must be >= 1")
    if args.epochs < 1:
        raise CliError(EXIT_USAGE, "--epochs must be >= 1")
    data = _load(args.data, loss=spec.kind, normalize=args.normalize)
    if data.n == 0:
        raise CliError(EXIT_DATA, f"{args.data}: no training examples")
    test = _load(args.test, data.d, loss=spec.kind, normalize=args.normalize) if args.test else None
    if test is not None and test.d > data.d:
        data = data.with_dim(test.d)
    report = run_bench(
        data, spec, variants=args.variants, threads_list=args.threads_list,
        epochs=args.epochs, seed=args.seed, test=test,
    )
    with open(args.out, "w", newline="") as fh:
        report.write_csv(fh)
    print(report.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asdcd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def problem_flags(p):
        p.add_argument("--data", required=True, help="LIBSVM training file (gzip ok)")
        p.add_argument("--loss", choices=LOSS_CHOICES, default="hinge")
        p.add_argument("--C", type=float, default=1.0, help="loss weight (default 1)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--test", help="LIBSVM file for held-out accuracy")
        p.add_argument("--normalize", action="store_true", help="scale every row to unit norm")

    p = sub.add_parser("train", help="fit a model")
    problem_flags(p)
    p.add_argument("--variant", choices=VARIANTS, default="serial")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--epochs", type=int, default=1000, help="epoch limit")
    p.add_argument("--tol", type=float, default=1e-6, help="duality gap tolerance, divided by n*C unless --gap-absolute")
    p.add_argument("--gap-absolute", action="store_true", help="compare the raw duality gap against --tol")
    p.add_argument("--shrink", action="store_true")
    p.add_argument("--dim", type=int, help="feature dimension, at least the largest index in --data")
    p.add_argument("--trace", help="write per-epoch trace CSV here")
    p.add_argument("--trace-every", type=int, default=1, help="epochs between trace points")
    p.add_argument("--model-out", required=True)
    p.add_argument("--no-alpha", action="store_true", help="omit the dual vector from the model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a LIBSVM file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--use", choices=("hat", "bar"), default="hat",
                   help="hat: stored w; bar: w rebuilt from alpha and --train-data")
    p.add_argument("--train-data", help="training file the model was fit on (for --use bar)")
    p.add_argument("--out", help="write one predicted label per line")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="fixed-epoch speedup grid")
    problem_flags(p)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--threads-list", type=_csv_list(int), default=[1, 2, 4, 8])
    p.add_argument("--variants", type=_csv_list(str), default=list(VARIANTS))
    p.add_argument("--out", required=True, help="CSV report path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"asdcd: error: {exc}", file=sys.stderr)
        return exc.status
    except NumericError as exc:
        print(f"asdcd: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
