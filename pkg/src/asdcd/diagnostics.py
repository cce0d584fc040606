"""Objectives, duality gap, optimality residuals and backward-error reports.

Everything here reads snapshots of ``alpha`` and ``w`` taken between
epochs. The primal vector recomputed from the duals (``w_bar``) is always
accumulated in ascending row order so repeated evaluations agree bitwise.
"""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass
from typing import IO, Iterable

import numpy as np
from numba import njit

from .data import Dataset
from .kernels import accumulate_w, row_dots
from .loss import LossSpec, conjugate_loss, primal_loss, projected_gradient, prox_scalar

__all__ = [
    "TraceRecord",
    "BackwardErrorReport",
    "recompute_w",
    "margins",
    "primal_objective",
    "dual_objective",
    "duality_gap",
    "perturbed_primal_objective",
    "fixed_point_operator",
    "kkt_residual",
    "backward_error",
    "predict",
    "predict_accuracy",
    "bound_M",
    "trace_record",
    "write_trace_csv",
    "read_trace_csv",
    "TRACE_HEADER",
]


def recompute_w(alpha, dataset: Dataset) -> np.ndarray:
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    return accumulate_w(dataset.indptr, dataset.indices, dataset.values, alpha, dataset.d)


def margins(w, dataset: Dataset) -> np.ndarray:
    """Folded margins ``x_i @ w``."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    if len(w) != dataset.d:
        raise ValueError(f"w has length {len(w)}, dataset has d={dataset.d}")
    return row_dots(dataset.indptr, dataset.indices, dataset.values, w)


def primal_objective(w, dataset: Dataset, spec: LossSpec) -> float:
    w = np.asarray(w, dtype=np.float64)
    return float(0.5 * np.dot(w, w) + np.sum(primal_loss(spec, margins(w, dataset))))


def perturbed_primal_objective(w, eps, dataset: Dataset, spec: LossSpec) -> float:
    """``0.5 ||w + eps||^2 + sum_i l_i(x_i @ w)``; the problem ``w_hat`` solves exactly."""
    shifted = np.asarray(w) + np.asarray(eps)
    return float(0.5 * np.dot(shifted, shifted) + np.sum(primal_loss(spec, margins(w, dataset))))


def _dual_from(w_bar, alpha, spec) -> float:
    conj = conjugate_loss(spec, alpha)
    return float(0.5 * np.dot(w_bar, w_bar) + np.sum(conj))


def dual_objective(alpha, dataset: Dataset, spec: LossSpec) -> float:
    """Dual objective with ``sum_i alpha_i x_i`` recomputed from scratch."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if not np.all(spec.feasible(alpha)):
        return math.inf
    return _dual_from(recompute_w(alpha, dataset), alpha, spec)


def duality_gap(alpha, dataset: Dataset, spec: LossSpec) -> float:
    w_bar = recompute_w(alpha, dataset)
    return primal_objective(w_bar, dataset, spec) + dual_objective(alpha, dataset, spec)


@njit(cache=True)
def _prox_all(code, C, s, ns):
    out = np.empty_like(s)
    for t in range(s.shape[0]):
        out[t] = prox_scalar(code, C, s[t], ns[t])
    return out


def fixed_point_operator(alpha, dataset: Dataset, spec: LossSpec) -> np.ndarray:
    """Each coordinate exactly minimized with the others held at ``alpha``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    wx = margins(recompute_w(alpha, dataset), dataset)
    s = alpha - wx / dataset.norm_sq
    return _prox_all(spec.code, spec.C, s, dataset.norm_sq)


@njit(cache=True)
def _pg_all(code, C, wx, alpha):
    out = np.empty_like(wx)
    for i in range(wx.shape[0]):
        out[i] = projected_gradient(code, C, wx[i], alpha[i])
    return out


def kkt_residual(w, alpha, dataset: Dataset, spec: LossSpec) -> float:
    """Largest violation of ``-w @ x_i in d l_i^*(-alpha_i)`` over all ``i``.

    This is the infinity norm of the dual projected gradient evaluated with
    the supplied ``w`` in place of ``sum_i alpha_i x_i``.
    """
    if dataset.n == 0:
        return 0.0
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    pg = _pg_all(spec.code, spec.C, margins(w, dataset), alpha)
    return float(np.max(np.abs(pg)))


@dataclass(frozen=True)
class BackwardErrorReport:
    epsilon: np.ndarray
    w_bar: np.ndarray
    eps_norm: float
    eps_rel: float
    kkt_residual_hat: float
    kkt_residual_bar: float
    # gap of the perturbed primal/dual pair that (w_hat, alpha_hat) solve exactly
    perturbed_gap: float

    def summary(self) -> dict:
        return {
            "eps_norm": self.eps_norm,
            "eps_rel": self.eps_rel,
            "kkt_hat": self.kkt_residual_hat,
            "kkt_bar": self.kkt_residual_bar,
            "perturbed_gap": self.perturbed_gap,
        }


def backward_error(model, dataset: Dataset, spec: LossSpec | None = None) -> BackwardErrorReport:
    """Compare the maintained ``w_hat`` against ``w_bar = sum_i alpha_i x_i``.

    ``model`` needs ``alpha`` and ``w`` attributes (and ``spec`` unless
    given explicitly).
    """
    spec = spec or model.spec
    alpha = np.asarray(model.alpha, dtype=np.float64)
    w_hat = np.asarray(model.w, dtype=np.float64)
    w_bar = recompute_w(alpha, dataset)
    eps = w_bar - w_hat
    eps_norm = float(np.linalg.norm(eps))
    pert = float(
        np.dot(w_hat, w_bar)
        + np.sum(primal_loss(spec, margins(w_hat, dataset)))
        + np.sum(conjugate_loss(spec, alpha))
    )
    return BackwardErrorReport(
        epsilon=eps,
        w_bar=w_bar,
        eps_norm=eps_norm,
        eps_rel=eps_norm / (1.0 + float(np.linalg.norm(w_hat))),
        kkt_residual_hat=kkt_residual(w_hat, alpha, dataset, spec),
        kkt_residual_bar=kkt_residual(w_bar, alpha, dataset, spec),
        perturbed_gap=pert,
    )


def predict(w, dataset: Dataset) -> np.ndarray:
    """Predicted labels on raw (unfolded) features; a zero score predicts +1."""
    raw = dataset.labels * margins(w, dataset)
    return np.where(raw >= 0.0, 1.0, -1.0)


def predict_accuracy(w, dataset: Dataset) -> float:
    if dataset.n == 0:
        return math.nan
    return float(np.mean(predict(w, dataset) == dataset.labels))


def bound_M(dataset: Dataset) -> float:
    """Upper bound on ``max_i max_S || sum_{t in S} Xbar[:, t] X[i, t] ||``.

    ``Xbar`` has rows ``x_i / ||x_i||^2``. By the triangle inequality the
    subset maximum is at most ``sum_t |X[i, t]| ||Xbar[:, t]||``, which is
    what is returned.
    """
    if dataset.n == 0:
        raise ValueError("bound_M needs a nonempty dataset")
    row_of = np.repeat(np.arange(dataset.n), np.diff(dataset.indptr))
    xbar = dataset.values / dataset.norm_sq[row_of]
    col_sq = np.bincount(dataset.indices, weights=xbar * xbar, minlength=dataset.d)
    contrib = np.abs(dataset.values) * np.sqrt(col_sq[dataset.indices])
    per_row = np.bincount(row_of, weights=contrib, minlength=dataset.n)
    return float(per_row.max())


@dataclass(frozen=True)
class TraceRecord:
    epoch: int
    wall_seconds: float
    primal_obj: float
    primal_obj_hat: float
    dual_obj: float
    duality_gap: float
    test_accuracy_hat: float = math.nan
    test_accuracy_bar: float = math.nan


TRACE_HEADER = ["epoch", "seconds", "primal_bar", "primal_hat", "dual", "gap", "acc_hat", "acc_bar"]


def trace_record(epoch, seconds, alpha, w_hat, dataset: Dataset, spec: LossSpec, test: Dataset | None = None):
    w_bar = recompute_w(alpha, dataset)
    p_bar = primal_objective(w_bar, dataset, spec)
    p_hat = primal_objective(w_hat, dataset, spec)
    dual = _dual_from(w_bar, alpha, spec)
    acc_hat = acc_bar = math.nan
    if test is not None:
        acc_hat = predict_accuracy(w_hat, test)
        acc_bar = predict_accuracy(w_bar, test)
    return TraceRecord(epoch, seconds, p_bar, p_hat, dual, p_bar + dual, acc_hat, acc_bar)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(v)
    return "" if math.isnan(v) else repr(float(v))


def write_trace_csv(records: Iterable[TraceRecord], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for rec in records:
        writer.writerow([_fmt(v) for v in astuple(rec)])


def read_trace_csv(fh: IO[str]) -> list[TraceRecord]:
    reader = csv.reader(fh)
    header = next(reader)
    if header != TRACE_HEADER:
        raise ValueError(f"unexpected trace header {header}")
    out = []
    for row in reader:
        if len(row) != len(TRACE_HEADER):
            raise ValueError(f"trace row has {len(row)} columns, expected {len(TRACE_HEADER)}")
        vals = [int(row[0])] + [float(v) if v else math.nan for v in row[1:]]
        out.append(TraceRecord(*vals))
    return out

