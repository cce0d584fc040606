"""Seeded synthetic binary classification problems.

``toy_problem`` produces the small fixed datasets used for correctness
checks; ``race_heavy_problem`` produces dense rows that all share a hot
feature, so concurrent scatter updates collide on every coordinate.
"""
from __future__ import annotations

import numpy as np

from .data import Dataset, fold_labels

__all__ = ["TOY_SHAPES", "toy_problem", "race_heavy_problem", "from_dense"]

# name -> (n, d, density, label noise, margin); a margin makes the set separable
TOY_SHAPES = {
    "toy40": (40, 5, 1.0, 0.0, 0.25),
    "toy200": (200, 20, 0.5, 0.1, None),
    "toy500": (500, 50, 0.2, 0.0, 0.5),
}


def from_dense(X: np.ndarray, y: np.ndarray, d: int | None = None) -> Dataset:
    rows = []
    for x in X:
        nz = np.flatnonzero(x)
        rows.append((nz.astype(np.int64), x[nz].astype(np.float64)))
    return fold_labels(rows, y, d if d is not None else X.shape[1])


def _sparse_features(rng, n, d, density):
    X = rng.normal(size=(n, d))
    mask = rng.random((n, d)) < density
    # keep at least one nonzero per row
    mask[np.arange(n), rng.integers(0, d, size=n)] = True
    return np.where(mask, X, 0.0)


def toy_problem(name: str, seed: int = 0) -> Dataset:
    """One of the :data:`TOY_SHAPES` datasets, deterministic in ``seed``."""
    n, d, density, noise, margin = TOY_SHAPES[name]
    rng = np.random.default_rng([seed, n, d])
    w_true = rng.normal(size=d)
    if margin is not None:
        # keep only rows clear of the separating hyperplane by margin * std(score)
        X = _sparse_features(rng, 4 * n, d, density)
        score = X @ w_true
        keep = np.flatnonzero(np.abs(score) >= margin * np.std(score))[:n]
        if len(keep) < n:
            raise RuntimeError("margin filter kept too few rows")
        X, score = X[keep], score[keep]
    else:
        X = _sparse_features(rng, n, d, density)
        score = X @ w_true
    y = np.where(score >= 0.0, 1.0, -1.0)
    flip = rng.random(n) < noise
    y[flip] = -y[flip]
    # round through text precision so the committed files reproduce exactly
    X = np.round(X, 6)
    return from_dense(X, y)


def race_heavy_problem(n: int = 2000, d: int = 50, n_test: int = 2000, seed: int = 0,
                       noise: float = 0.05) -> tuple[Dataset, Dataset]:
    """Dense train and test sets drawn around one shared true weight vector.

    Feature 0 is a constant 1 in every row, so every update touches it.
    """
    rng = np.random.default_rng([seed, n, d])
    w_true = rng.normal(size=d)

    def draw(m):
        X = rng.normal(size=(m, d))
        X[:, 0] = 1.0
        y = np.where(X @ w_true >= 0.0, 1.0, -1.0)
        flip = rng.random(m) < noise
        y[flip] = -y[flip]
        return from_dense(X, y, d)

    return draw(n), draw(n_test)
