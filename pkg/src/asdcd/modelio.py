"""Plain-text model files.

Layout::

    asdcd-model 1
    loss hinge
    C 1
    d 5
    variant serial
    normalize 0
    w dense 5            (or ``w sparse <nnz>`` followed by ``idx:val`` lines, 1-based)
    0.123...
    ...
    alpha 40             (optional block)
    ...

Floats are written with 17 significant digits, so a load reproduces every
value bit for bit and save -> load -> save is byte-stable.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import IO, Optional

import numpy as np

from .loss import LossSpec

__all__ = ["MAGIC", "ModelFile", "ModelFormatError", "save_model", "load_model"]

MAGIC = "asdcd-model 1"


class ModelFormatError(ValueError):
    pass


def _f(x: float) -> str:
    return "%.17g" % x


@dataclass(frozen=True)
class ModelFile:
    spec: LossSpec
    w: np.ndarray
    variant: str
    normalize_rows: bool = False
    alpha: Optional[np.ndarray] = None

    @property
    def d(self) -> int:
        return len(self.w)

    @classmethod
    def from_model(cls, model, include_alpha: bool = True) -> "ModelFile":
        return cls(
            spec=model.spec,
            w=np.array(model.w, dtype=np.float64),
            variant=model.variant,
            normalize_rows=model.normalize_rows,
            alpha=np.array(model.alpha, dtype=np.float64) if include_alpha else None,
        )

    def write(self, fh: IO[str]) -> None:
        fh.write(f"{MAGIC}\n")
        fh.write(f"loss {self.spec.kind}\n")
        fh.write(f"C {_f(self.spec.C)}\n")
        fh.write(f"d {self.d}\n")
        fh.write(f"variant {self.variant}\n")
        fh.write(f"normalize {int(self.normalize_rows)}\n")
        nz = np.flatnonzero(self.w)
        if 2 * len(nz) < self.d:
            fh.write(f"w sparse {len(nz)}\n")
            fh.writelines(f"{j + 1}:{_f(self.w[j])}\n" for j in nz)
        else:
            fh.write(f"w dense {self.d}\n")
            fh.writelines(f"{_f(v)}\n" for v in self.w)
        if self.alpha is not None:
            fh.write(f"alpha {len(self.alpha)}\n")
            fh.writelines(f"{_f(v)}\n" for v in self.alpha)

    @classmethod
    def read(cls, fh: IO[str]) -> "ModelFile":
        lines = iter(fh.read().splitlines())
        lineno = 0

        def nxt() -> str:
            nonlocal lineno
            lineno += 1
            try:
                return next(lines)
            except StopIteration:
                raise ModelFormatError(f"unexpected end of model file at line {lineno}") from None

        def field(name: str) -> str:
            key, _, value = nxt().partition(" ")
            if key != name:
                raise ModelFormatError(f"line {lineno}: expected {name!r}, got {key!r}")
            return value

        if nxt() != MAGIC:
            raise ModelFormatError("not a model file (bad magic line)")
        try:
            kind = field("loss")
            C = float(field("C"))
            d = int(field("d"))
            variant = field("variant")
            normalize = field("normalize") == "1"
            layout, _, count = field("w").partition(" ")
            count = int(count)
            w = np.zeros(d)
            if layout == "dense":
                if count != d:
                    raise ModelFormatError(f"dense w has {count} entries, expected {d}")
                for j in range(d):
                    w[j] = float(nxt())
            elif layout == "sparse":
                for _ in range(count):
                    key, _, val = nxt().partition(":")
                    w[int(key) - 1] = float(val)
            else:
                raise ModelFormatError(f"unknown w layout {layout!r}")
            alpha = None
            rest = next(lines, None)
            if rest is not None:
                lineno += 1
                key, _, count = rest.partition(" ")
                if key != "alpha":
                    raise ModelFormatError(f"line {lineno}: unexpected {key!r}")
                alpha = np.array([float(nxt()) for _ in range(int(count))])
        except ValueError as exc:
            if isinstance(exc, ModelFormatError):
                raise
            raise ModelFormatError(f"line {lineno}: {exc}") from None
        return cls(LossSpec(kind, C), w, variant, normalize, alpha)


def save_model(model_file: ModelFile, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        model_file.write(fh)


def load_model(path: str | os.PathLike) -> ModelFile:
    with open(path, encoding="ascii") as fh:
        return ModelFile.read(fh)
