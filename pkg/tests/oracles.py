"""Reference computations that share no code with the package under test."""
from __future__ import annotations

import itertools
import math

import numpy as np


def read_libsvm_dense(path):
    """Tiny independent LIBSVM reader returning dense ``(X, y)`` with labels folded in."""
    rows, labels, d = [], [], 0
    with open(path) as fh:
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            labels.append(float(tok[0]))
            feats = {int(k) - 1: float(v) for k, v in (t.split(":") for t in tok[1:])}
            d = max(d, max(feats) + 1)
            rows.append(feats)
    X = np.zeros((len(rows), d))
    for i, feats in enumerate(rows):
        for j, v in feats.items():
            X[i, j] = v
    y = np.array(labels)
    return X * y[:, None], y


def primal(X, w, kind, C):
    z = X @ w
    h = np.maximum(1.0 - z, 0.0)
    loss = C * h if kind == "hinge" else C * h * h
    return 0.5 * w @ w + loss.sum()


def dual(X, alpha, kind, C):
    v = X.T @ alpha
    extra = 0.0 if kind == "hinge" else (alpha @ alpha) / (4.0 * C)
    return 0.5 * v @ v - alpha.sum() + extra


def dual_change(X, alpha0, alpha1, kind, C):
    """``dual(alpha1) - dual(alpha0)`` without cancelling two O(|D|) values.

    Written in terms of ``da = alpha1 - alpha0``, so the rounding error scales
    with the step rather than with the objective; float64 evaluation of the
    two duals separately cannot resolve sub-ulp decreases near the optimum.
    """
    da = alpha1 - alpha0
    v0, dv = X.T @ alpha0, X.T @ da
    change = math.fsum(dv * (v0 + 0.5 * dv)) - math.fsum(da)
    if kind != "hinge":
        change += math.fsum(da * (alpha0 + 0.5 * da)) / (2.0 * C)
    return change


def projected_gradient_dual(X, kind, C, gap_tol=1e-10, max_iter=500_000):
    """Accelerated projected gradient with restarts on the box-constrained dual.

    Returns ``(alpha, primal_value, gap)``.
    """
    n = X.shape[0]
    K = X @ X.T
    ridge = 0.0 if kind == "hinge" else 1.0 / (2.0 * C)
    L = np.linalg.eigvalsh(K)[-1] + ridge
    hi = C if kind == "hinge" else np.inf

    def grad(a):
        return K @ a - 1.0 + ridge * a

    alpha = np.zeros(n)
    y = alpha.copy()
    t = 1.0
    gap = np.inf
    for it in range(max_iter):
        nxt = np.clip(y - grad(y) / L, 0.0, hi)
        if (y - nxt) @ (nxt - alpha) > 0.0:
            # gradient-based momentum restart
            t = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = nxt + ((t - 1.0) / t_next) * (nxt - alpha)
        alpha, t = nxt, t_next
        if it % 50 == 0:
            p = primal(X, X.T @ alpha, kind, C)
            gap = p + dual(X, alpha, kind, C)
            if gap <= gap_tol:
                break
    p = primal(X, X.T @ alpha, kind, C)
    return alpha, p, p + dual(X, alpha, kind, C)


def exact_M(X):
    """``max_i max_S || sum_{t in S} Xbar[:, t] X[i, t] ||`` by enumerating every feature subset."""
    n, d = X.shape
    Xbar = X / np.sum(X * X, axis=1, keepdims=True)
    best = 0.0
    for r in range(1, d + 1):
        for S in itertools.combinations(range(d), r):
            S = list(S)
            for i in range(n):
                best = max(best, float(np.linalg.norm(Xbar[:, S] @ X[i, S])))
    return best


def grid_argmin(f, lo, hi, step):
    """Minimizer of ``f`` over the grid ``lo, lo + step, ..., hi`` (``hi`` included)."""
    grid = np.arange(lo, hi + 0.5 * step, step)
    grid = np.append(grid[grid <= hi], hi)
    vals = np.asarray(f(grid))
    k = int(np.argmin(vals))
    return float(grid[k]), float(vals[k])
