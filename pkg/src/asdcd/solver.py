"""Serial and asynchronous parallel dual coordinate descent.

Every variant runs the same compiled sweep (``kernels.sweep``); they differ
only in how many threads run it concurrently and how writes to the shared
primal vector are protected:

============  =======  ==========================================
variant       threads  shared ``w`` discipline
============  =======  ==========================================
``serial``    1        plain
``lock``      p        per-feature locks over the row's support
``atomic``    p        unsynchronized reads, atomic scatter adds
``wild``      p        plain reads and writes, lost updates allowed
============  =======  ==========================================

Work is organised in epochs: each thread sweeps its own block of dual
indices in a fresh permutation, then all threads meet at a barrier. Runs of
``trace_every`` epochs execute without returning to Python; traces and the
stopping test are evaluated between runs.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .data import Dataset, IndexPartition, partition_indices
from .diagnostics import TraceRecord, trace_record
from .loss import LossSpec, NumericError

__all__ = [
    "VARIANTS",
    "SolverConfig",
    "Model",
    "ActiveSet",
    "SolverState",
    "init_state",
    "epoch_serial",
    "epoch_parallel",
    "shrink_pass",
    "train",
]

VARIANTS = ("serial", "lock", "atomic", "wild")
_MODE = {"serial": kernels.PLAIN, "wild": kernels.PLAIN, "atomic": kernels.ATOMIC, "lock": kernels.LOCKED}

EpochCallback = Callable[[int, float, np.ndarray, np.ndarray], None]


@dataclass(frozen=True)
class SolverConfig:
    variant: str = "serial"
    threads: int = 1
    max_epochs: int = 1000
    # 0 disables the gap test (fixed epoch budget)
    gap_tolerance: float = 1e-6
    # compare gap / (n * C) rather than the raw gap against the tolerance
    gap_normalized: bool = True
    seed: int = 0
    shrinking: bool = False
    normalize_rows: bool = False
    trace_every: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.variant == "serial" and self.threads != 1:
            raise ValueError("the serial variant runs with exactly one thread")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if not self.gap_tolerance >= 0:
            raise ValueError("gap_tolerance must be >= 0")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass(frozen=True)
class Model:
    alpha: np.ndarray
    w: np.ndarray
    spec: LossSpec
    variant: str
    threads: int = 1
    epochs: int = 0
    converged: bool = False
    train_seconds: float = 0.0
    normalize_rows: bool = False

    def __post_init__(self):
        for arr in (self.alpha, self.w):
            arr.flags.writeable = False

    @property
    def d(self) -> int:
        return len(self.w)


@dataclass
class ActiveSet:
    """Per-thread blocks of dual indices, of which a prefix is still swept.

    Thread ``t`` owns ``order[offsets[t]:offsets[t + 1]]``; the first
    ``sizes[t]`` entries are active and the rest were shrunk. The sweep
    kernel permutes the active prefix in place every epoch and moves shrunk
    indices behind it. ``thresholds`` holds the projected-gradient bounds
    used for the next shrinking decision and the projected-gradient spread
    at which shrunk indices are brought back.
    """

    order: np.ndarray
    offsets: np.ndarray
    sizes: np.ndarray
    thresholds: np.ndarray = field(
        default_factory=lambda: np.array([math.inf, -math.inf, kernels.REACTIVATE_TOL])
    )

    @classmethod
    def from_partition(cls, partition: IndexPartition) -> "ActiveSet":
        lengths = np.array([len(b) for b in partition.blocks], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        order = np.concatenate(partition.blocks).astype(np.int64) if len(lengths) else np.zeros(0, np.int64)
        return cls(order, offsets, lengths.copy())

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.order[self.offsets[t]:self.offsets[t] + self.sizes[t]] for t in range(len(self.sizes))]

    @property
    def full(self) -> list[np.ndarray]:
        return [self.order[self.offsets[t]:self.offsets[t + 1]] for t in range(len(self.sizes))]

    @property
    def size(self) -> int:
        return int(self.sizes.sum())

    @property
    def n_shrunk(self) -> int:
        return int(self.offsets[-1]) - self.size

    def reactivate(self) -> None:
        self.sizes[:] = np.diff(self.offsets)
        self.thresholds[:2] = [math.inf, -math.inf]


@dataclass
class SolverState:
    dataset: Dataset
    spec: LossSpec
    config: SolverConfig
    alpha: np.ndarray
    w: np.ndarray
    locks: np.ndarray
    active: ActiveSet
    shrink: bool
    pg_stats: np.ndarray
    status: np.ndarray
    barrier: np.ndarray

    @property
    def mode(self) -> int:
        return _MODE[self.config.variant]

    @property
    def threads(self) -> int:
        return self.config.threads


def init_state(dataset: Dataset, spec: LossSpec, config: SolverConfig) -> SolverState:
    """``alpha = 0`` and ``w = 0``, so ``w == sum_i alpha_i x_i`` holds from the start."""
    p = config.threads
    return SolverState(
        dataset=dataset,
        spec=spec,
        config=config,
        alpha=np.zeros(dataset.n),
        w=np.zeros(dataset.d),
        locks=np.zeros(dataset.d if config.variant == "lock" else 1, dtype=np.int64),
        active=ActiveSet.from_partition(partition_indices(dataset.n, p, config.seed)),
        shrink=config.shrinking and spec.shrinkable,
        pg_stats=np.zeros((2, p, 2)),
        status=np.zeros((2, p), dtype=np.int64),
        barrier=np.zeros(2, dtype=np.int64),
    )


def _worker(state: SolverState, tid: int, first_epoch: int, n_epochs: int) -> None:
    ds = state.dataset
    act = state.active
    kernels.run_epochs(
        tid, state.threads, first_epoch, n_epochs, state.config.seed,
        state.mode, state.spec.code, state.spec.C,
        ds.indptr, ds.indices, ds.values, ds.norm_sq,
        state.alpha, state.w, state.locks,
        act.order, act.offsets, act.sizes, state.shrink, act.thresholds,
        state.pg_stats, state.barrier, state.status,
    )


def _check(state: SolverState) -> None:
    if np.any(state.status != kernels.OK):
        raise NumericError("coordinate subproblem solve failed")


def epoch_serial(state: SolverState, first_epoch: int, n_epochs: int = 1) -> None:
    """Sweep every active index on the calling thread, ``n_epochs`` times."""
    if state.threads != 1:
        raise ValueError("epoch_serial needs a single-thread state")
    _worker(state, 0, first_epoch, n_epochs)
    _check(state)


def epoch_parallel(state: SolverState, first_epoch: int, pool: ThreadPoolExecutor, n_epochs: int = 1) -> None:
    """All workers sweep their own blocks concurrently, meeting after each epoch.

    ``pool`` must have at least ``threads`` workers, since every worker blocks
    at the epoch barrier until all have arrived.
    """
    state.barrier[:] = 0
    futures = [pool.submit(_worker, state, t, first_epoch, n_epochs) for t in range(state.threads)]
    for f in futures:
        f.result()
    _check(state)


def shrink_pass(state: SolverState) -> ActiveSet:
    """Drop the indices that fail the shrinking test from every thread's active prefix.

    Sweeps apply the same test on the fly; this standalone pass runs it
    against the current ``w`` without touching ``alpha``.
    """
    act = state.active
    if not state.shrink:
        return act
    ds = state.dataset
    for t in range(state.threads):
        blk = act.order[act.offsets[t]:act.offsets[t + 1]]
        act.sizes[t] = kernels.shrink_block(
            state.spec.code, state.spec.C, ds.indptr, ds.indices, ds.values,
            state.alpha, state.w, blk, act.sizes[t], act.thresholds[0], act.thresholds[1],
        )
    return act


def train(
    dataset: Dataset,
    spec: LossSpec,
    config: SolverConfig = SolverConfig(),
    *,
    test: Optional[Dataset] = None,
    callback: Optional[EpochCallback] = None,
    clock: Callable[[], float] = time.perf_counter,
) -> tuple[Model, list[TraceRecord]]:
    """Run dual coordinate descent and return the model and its trace.

    Only the sweeps are timed with ``clock``; trace evaluation between epochs
    is excluded. ``callback(epoch, seconds, alpha, w)`` is called at every
    trace point with read-only views that are only valid during the call.
    Training stops when the gap of ``(w_bar, alpha)`` drops to the tolerance
    or after ``max_epochs``.
    """
    if dataset.n == 0:
        raise ValueError("cannot train on an empty dataset")
    if config.normalize_rows:
        dataset = dataset.normalized()
        test = test.normalized() if test is not None else None
    if test is not None and test.d > dataset.d:
        dataset = dataset.with_dim(test.d)
    if test is not None and test.d < dataset.d:
        test = test.with_dim(dataset.d)

    state = init_state(dataset, spec, config)
    tol = config.gap_tolerance * (dataset.n * spec.C if config.gap_normalized else 1.0)
    elapsed = 0.0
    converged = False
    epoch = 0

    def checkpoint() -> TraceRecord:
        if not (np.isfinite(state.w).all() and np.isfinite(state.alpha).all()):
            raise NumericError(f"iterates became non-finite by epoch {epoch}")
        with np.errstate(over="ignore", invalid="ignore"):
            rec = trace_record(epoch, elapsed, state.alpha, state.w, dataset, spec, test)
        if math.isnan(rec.duality_gap):
            raise NumericError(f"duality gap is nan at epoch {epoch} (objective overflow)")
        if callback is not None:
            callback(epoch, elapsed, _readonly(state.alpha), _readonly(state.w))
        return rec

    trace = [checkpoint()]
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        while epoch < config.max_epochs:
            chunk = min(config.trace_every - epoch % config.trace_every, config.max_epochs - epoch)
            start = clock()
            if pool is None:
                epoch_serial(state, epoch, chunk)
            else:
                epoch_parallel(state, epoch, pool, chunk)
            elapsed += clock() - start
            epoch += chunk
            rec = checkpoint()
            trace.append(rec)
            if tol > 0 and rec.duality_gap <= tol:
                if state.active.n_shrunk:
                    # one full pass with everything reactivated before stopping
                    state.active.reactivate()
                    continue
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()

    model = Model(
        alpha=state.alpha.copy(),
        w=state.w.copy(),
        spec=spec,
        variant=config.variant,
        threads=config.threads,
        epochs=epoch,
        converged=converged,
        train_seconds=elapsed,
        normalize_rows=config.normalize_rows,
    )
    return model, trace


def _readonly(arr: np.ndarray) -> np.ndarray:
    view = arr.view()
    view.flags.writeable = False
    return view
