"""Fixed-budget speedup grid over variants and thread counts.

Every run starts from ``alpha = 0`` with shrinking off and performs exactly
``epochs`` epochs; only the sweeps are timed. Speedup is measured against a
single serial run, which also supplies the ``serial`` rows of the grid.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import astuple, dataclass, fields
from typing import IO, Callable, Iterable, Optional, Sequence

from .data import Dataset
from .diagnostics import backward_error, predict_accuracy
from .loss import LossSpec
from .solver import SolverConfig, train

__all__ = ["BenchRow", "BenchReport", "run_bench", "BENCH_HEADER"]


@dataclass(frozen=True)
class BenchRow:
    variant: str
    threads: int
    seconds: float
    epochs: int
    gap: float
    accuracy: float
    speedup: float
    eps_rel: float
    kkt_hat: float
    kkt_bar: float


BENCH_HEADER = [f.name for f in fields(BenchRow)]


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    return "" if math.isnan(v) else repr(float(v))


@dataclass
class BenchReport:
    rows: list[BenchRow]

    def write_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BENCH_HEADER)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in astuple(row)])

    @classmethod
    def read_csv(cls, fh: IO[str]) -> "BenchReport":
        reader = csv.reader(fh)
        header = next(reader)
        if header != BENCH_HEADER:
            raise ValueError(f"unexpected bench header {header}")
        rows = []
        for rec in reader:
            if len(rec) != len(BENCH_HEADER):
                raise ValueError(f"bench row has {len(rec)} columns, expected {len(BENCH_HEADER)}")
            nums = [float(v) if v else math.nan for v in rec[2:]]
            rows.append(BenchRow(rec[0], int(rec[1]), nums[0], int(nums[1]), *nums[2:]))
        return cls(rows)

    def table(self) -> str:
        head = f"{'variant':<8} {'threads':>7} {'seconds':>10} {'speedup':>8} {'gap':>10} {'accuracy':>9} {'eps_rel':>10}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r.variant:<8} {r.threads:>7d} {r.seconds:>10.4f} {r.speedup:>7.2f}x "
                f"{r.gap:>10.3e} {r.accuracy:>9.4f} {r.eps_rel:>10.2e}"
            )
        return "\n".join(lines)


def _row(variant, threads, model, trace, dataset, test, speedup) -> BenchRow:
    report = backward_error(model, dataset)
    acc = predict_accuracy(model.w, test if test is not None else dataset)
    return BenchRow(
        variant, threads, model.train_seconds, model.epochs, trace[-1].duality_gap, acc, speedup,
        report.eps_rel, report.kkt_residual_hat, report.kkt_residual_bar,
    )


def run_bench(
    dataset: Dataset,
    spec: LossSpec,
    *,
    variants: Sequence[str],
    threads_list: Iterable[int],
    epochs: int = 100,
    seed: int = 0,
    test: Optional[Dataset] = None,
    clock: Callable[[], float] = time.perf_counter,
) -> BenchReport:
    """One row per ``(variant, threads)`` pair, in the order given.

    ``serial`` always runs on one thread whatever the requested count.
    """
    threads_list = list(threads_list)

    def run(variant, threads):
        cfg = SolverConfig(
            variant=variant, threads=threads, max_epochs=epochs, gap_tolerance=0.0,
            seed=seed, shrinking=False, trace_every=max(epochs, 1),
        )
        return train(dataset, spec, cfg, clock=clock)

    # load the compiled kernels before anything is timed
    train(dataset, spec, SolverConfig(max_epochs=1, gap_tolerance=0.0), clock=lambda: 0.0)
    ref_model, ref_trace = run("serial", 1)
    ref_seconds = ref_model.train_seconds
    rows = []
    for variant in variants:
        for threads in threads_list:
            if variant == "serial":
                rows.append(_row(variant, threads, ref_model, ref_trace, dataset, test, 1.0))
                continue
            model, trace = run(variant, threads)
            secs = model.train_seconds
            speedup = ref_seconds / secs if secs > 0 else math.nan
            rows.append(_row(variant, threads, model, trace, dataset, test, speedup))
    return BenchReport(rows)
