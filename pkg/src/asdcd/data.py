"""LIBSVM-format input, label folding and per-thread index partitioning.

Rows are stored in CSR form (``indptr``, ``indices``, ``values``) with the
label already multiplied into the features, i.e. ``x_i = y_i * raw_x_i``.
"""
from __future__ import annotations

import gzip
import io
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ParseError",
    "SparseExample",
    "Dataset",
    "IndexPartition",
    "parse_libsvm",
    "fold_labels",
    "partition_indices",
    "load_dataset",
]


class ParseError(ValueError):
    """Malformed LIBSVM input. ``lineno`` is 1-based."""

    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


@dataclass(frozen=True)
class SparseExample:
    indices: np.ndarray
    values: np.ndarray
    norm_sq: float

    def __len__(self) -> int:
        return len(self.indices)

    def dot(self, w: np.ndarray) -> float:
        return float(np.dot(w[self.indices], self.values))


RawRow = tuple[np.ndarray, np.ndarray]


class Dataset:
    """Folded training matrix ``X`` (row-major sparse) plus the original labels.

    The arrays are made read-only on construction; the dataset is shared
    between worker threads without copying.
    """

    def __init__(self, indptr, indices, values, labels, d: int):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.labels = np.ascontiguousarray(labels, dtype=np.float64)
        self.d = int(d)
        if self.indptr.ndim != 1 or len(self.indptr) != len(self.labels) + 1:
            raise ValueError("indptr must have n + 1 entries")
        if len(self.indices) and self.indices.max() >= self.d:
            raise ValueError(f"feature index {self.indices.max()} out of range for d={self.d}")
        with np.errstate(over="ignore"):
            sq = np.square(self.values)
            self.norm_sq = np.add.reduceat(sq, self.indptr[:-1]) if len(sq) else np.zeros(self.n)
        # reduceat misbehaves on empty segments; those are rejected upstream anyway
        self.norm_sq = np.ascontiguousarray(self.norm_sq, dtype=np.float64)
        bad = np.flatnonzero(~(np.isfinite(self.norm_sq) & (self.norm_sq > 0.0)))
        if len(bad):
            i = bad[0]
            raise ValueError(f"row {i} has squared norm {float(self.norm_sq[i])!r}, outside float64 range")
        for arr in (self.indptr, self.indices, self.values, self.labels, self.norm_sq):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def row(self, i: int) -> SparseExample:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseExample(self.indices[lo:hi], self.values[lo:hi], float(self.norm_sq[i]))

    @property
    def rows(self) -> list[SparseExample]:
        return [self.row(i) for i in range(self.n)]

    def with_dim(self, d: int) -> "Dataset":
        """Same rows with the feature dimension raised to ``d``."""
        if d < self.d:
            raise ValueError(f"cannot shrink dimension from {self.d} to {d}")
        return Dataset(self.indptr, self.indices, self.values, self.labels, d)

    def normalized(self) -> "Dataset":
        """Copy with every row scaled to unit Euclidean norm."""
        scale = np.repeat(np.sqrt(self.norm_sq), np.diff(self.indptr))
        return Dataset(self.indptr, self.indices, self.values / scale, self.labels, self.d)

    def to_scipy(self):
        from scipy.sparse import csr_matrix

        return csr_matrix((self.values, self.indices, self.indptr), shape=(self.n, self.d))

    def to_libsvm(self) -> str:
        """Serialize back to LIBSVM text with the labels unfolded."""
        out = io.StringIO()
        for i in range(self.n):
            y = self.labels[i]
            lo, hi = self.indptr[i], self.indptr[i + 1]
            feats = " ".join(
                f"{j + 1}:{float(v * y)!r}" for j, v in zip(self.indices[lo:hi], self.values[lo:hi])
            )
            out.write(f"{_format_label(y)} {feats}\n")
        return out.getvalue()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.d == other.d and all(
            np.array_equal(a, b)
            for a, b in [
                (self.indptr, other.indptr),
                (self.indices, other.indices),
                (self.values, other.values),
                (self.labels, other.labels),
                (self.norm_sq, other.norm_sq),
            ]
        )

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, d={self.d}, nnz={self.nnz})"


def _format_label(y: float) -> str:
    if y == 1.0:
        return "+1"
    if y == -1.0:
        return "-1"
    return repr(float(y))


@dataclass(frozen=True)
class IndexPartition:
    blocks: list[np.ndarray]
    seed: int

    def __len__(self) -> int:
        return len(self.blocks)


def _lines(text) -> Iterable[str]:
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    if isinstance(text, str):
        return text.splitlines()
    return (line.decode("utf-8") if isinstance(line, bytes) else line for line in text)


def parse_libsvm(text) -> tuple[list[RawRow], np.ndarray, int]:
    """Parse LIBSVM text into raw (unfolded) rows with 0-based indices.

    ``text`` may be ``str``, ``bytes`` or an iterable of lines. Returns
    ``(rows, labels, d)`` with ``d = 1 + max index`` (0 for empty input).
    Explicit zero values are dropped.
    """
    rows: list[RawRow] = []
    labels: list[float] = []
    d = 0
    for lineno, line in enumerate(_lines(text), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(lineno, f"bad label {tokens[0]!r}") from None
        idx: list[int] = []
        val: list[float] = []
        prev = 0
        for tok in tokens[1:]:
            key, sep, raw = tok.partition(":")
            if not sep:
                raise ParseError(lineno, f"malformed token {tok!r}")
            try:
                j = int(key)
            except ValueError:
                raise ParseError(lineno, f"bad feature index {key!r}") from None
            try:
                v = float(raw)
            except ValueError:
                raise ParseError(lineno, f"non-numeric value {raw!r}") from None
            if j < 1:
                raise ParseError(lineno, f"feature index {j} must be >= 1")
            if j <= prev:
                raise ParseError(lineno, f"feature indices not strictly increasing at {j}")
            if not np.isfinite(v):
                raise ParseError(lineno, f"non-finite value {raw!r}")
            prev = j
            if v != 0.0:
                idx.append(j - 1)
                val.append(v)
        d = max(d, prev)
        rows.append((np.array(idx, dtype=np.int64), np.array(val, dtype=np.float64)))
        labels.append(label)
    return rows, np.array(labels, dtype=np.float64), d


def fold_labels(
    rows: Sequence[RawRow],
    labels,
    d: int | None = None,
    *,
    loss: str | None = None,
    normalize: bool = False,
) -> Dataset:
    """Build a :class:`Dataset` with ``x_i = y_i * raw_x_i``.

    All supported losses are binary classifiers, so every label must be
    +1 or -1. Rows that are empty (after dropping zeros) are rejected.
    With ``normalize`` each row is scaled to unit Euclidean norm first.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if len(rows) != len(labels):
        raise ValueError("rows and labels differ in length")
    bad = np.flatnonzero((labels != 1.0) & (labels != -1.0))
    if len(bad):
        what = f" for {loss} loss" if loss else ""
        raise ValueError(f"label {labels[bad[0]]!r} of row {bad[0]} is not +1/-1{what}")
    inferred = max((int(r[0][-1]) + 1 for r in rows if len(r[0])), default=0)
    if d is None:
        d = inferred
    elif d < inferred:
        raise ValueError(f"d={d} is smaller than the largest feature index {inferred}")
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, (idx, _) in enumerate(rows):
        if len(idx) == 0:
            raise ValueError(f"row {i} has no nonzero feature")
        indptr[i + 1] = indptr[i] + len(idx)
    if rows:
        indices = np.concatenate([r[0] for r in rows])
        values = np.concatenate([r[1] for r in rows])
    else:
        indices = np.zeros(0, dtype=np.int64)
        values = np.zeros(0, dtype=np.float64)
    values = values * np.repeat(labels, np.diff(indptr))
    ds = Dataset(indptr, indices, values, labels, d)
    return ds.normalized() if normalize else ds


def partition_indices(n: int, p: int, seed: int = 0) -> IndexPartition:
    """Split a random permutation of ``range(n)`` into ``p`` contiguous blocks."""
    if p < 1:
        raise ValueError(f"thread count must be >= 1, got {p}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return IndexPartition([b.astype(np.int64) for b in np.array_split(perm, p)], seed)


def read_text(path: str | os.PathLike) -> bytes:
    """File contents, gunzipped when the file carries the gzip magic."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def load_dataset(path, d: int | None = None, *, loss: str | None = None, normalize: bool = False) -> Dataset:
    rows, labels, inferred = parse_libsvm(read_text(path))
    return fold_labels(rows, labels, max(d or 0, inferred), loss=loss, normalize=normalize)
