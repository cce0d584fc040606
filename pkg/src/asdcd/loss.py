"""Loss families, their conjugates, and the exact one-variable dual step.

Margins ``z = w @ x_i`` are taken on folded rows, so every loss is a
function of the margin alone. The dual variable of each loss lives in

* hinge          ``[0, C]``
* squared hinge  ``[0, inf)``
* logistic       ``(0, C)`` (``0`` is allowed as the starting point)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import xlogy

__all__ = [
    "HINGE",
    "SQUARED_HINGE",
    "LOGISTIC",
    "NumericError",
    "LossSpec",
    "DualDomain",
    "primal_loss",
    "conjugate_loss",
    "solve_subproblem",
    "prox_point",
]

HINGE = 0
SQUARED_HINGE = 1
LOGISTIC = 2

_KINDS = {"hinge": HINGE, "squared_hinge": SQUARED_HINGE, "logistic": LOGISTIC}
_ALIASES = {"sqhinge": "squared_hinge", "l1": "hinge", "l2": "squared_hinge", "lr": "logistic"}

NEWTON_MAX_ITER = 100
NEWTON_TOL = 1e-12
# smallest positive double; roots closer to an endpoint are clamped here
NEWTON_TINY = 5e-324


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class DualDomain:
    lo: float
    hi: float
    open: bool = False

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError("empty dual domain")

    def contains(self, a) -> np.ndarray:
        a = np.asarray(a)
        if self.open:
            return (a > self.lo) & (a < self.hi)
        return (a >= self.lo) & (a <= self.hi)


@dataclass(frozen=True)
class LossSpec:
    kind: str
    C: float = 1.0

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in _KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; expected one of {sorted(_KINDS)}")
        object.__setattr__(self, "kind", kind)
        if not (self.C > 0 and math.isfinite(self.C)):
            raise ValueError(f"C must be a positive finite number, got {self.C!r}")
        object.__setattr__(self, "C", float(self.C))

    @property
    def code(self) -> int:
        return _KINDS[self.kind]

    @property
    def domain(self) -> DualDomain:
        if self.code == HINGE:
            return DualDomain(0.0, self.C)
        if self.code == SQUARED_HINGE:
            return DualDomain(0.0, math.inf)
        return DualDomain(0.0, self.C, open=True)

    @property
    def shrinkable(self) -> bool:
        return self.code != LOGISTIC

    def feasible(self, alpha) -> np.ndarray:
        """Feasibility in the closed domain (logistic endpoints have finite conjugate)."""
        alpha = np.asarray(alpha)
        return (alpha >= 0.0) & (alpha <= self.domain.hi)


def primal_loss(spec: LossSpec, z):
    """``l_i(z)`` for a margin (scalar or array)."""
    z = np.asarray(z, dtype=np.float64)
    C = spec.C
    if spec.code == HINGE:
        out = C * np.maximum(1.0 - z, 0.0)
    elif spec.code == SQUARED_HINGE:
        out = C * np.square(np.maximum(1.0 - z, 0.0))
    else:
        out = C * np.logaddexp(0.0, -z)
    return out[()] if out.ndim == 0 else out


def conjugate_loss(spec: LossSpec, alpha):
    """``l_i^*(-alpha)``; ``+inf`` outside the closed dual domain.

    The logistic conjugate carries the ``-C log C`` constant so that the
    duality gap is exactly zero at the optimum for every ``C``.
    """
    a = np.asarray(alpha, dtype=np.float64)
    C = spec.C
    if spec.code == HINGE:
        out = np.where((a >= 0.0) & (a <= C), -a, np.inf)
    elif spec.code == SQUARED_HINGE:
        with np.errstate(invalid="ignore"):
            out = np.where(a >= 0.0, -a + a * a / (4.0 * C), np.inf)
    else:
        inside = (a >= 0.0) & (a <= C)
        ac = np.clip(a, 0.0, C)
        out = np.where(inside, xlogy(ac, ac) + xlogy(C - ac, C - ac) - C * math.log(C), np.inf)
    return out[()] if out.ndim == 0 else out


@njit(cache=True, nogil=True)
def _root_side(C, ns, alpha, wx, sign, lower, v):
    """``sign * g`` at ``u(v)`` and its derivative in ``v``."""
    t = math.exp(v)
    u = t if lower else C - t
    h = sign * (ns * (u - alpha) + wx) + v - math.log(C - t)
    return h, ns * t + 1.0 + t / (C - t)


@njit(cache=True, nogil=True)
def _logistic_root(C, ns, alpha, wx):
    """Root of ``g(u) = ns (u - alpha) + wx + log(u / (C - u))`` on ``(0, C)``; nan on failure.

    The root's side of ``C / 2`` follows from the sign of ``g(C / 2)``. The
    solve runs on ``v = log t``, ``t`` the distance to the nearer endpoint,
    where the equation is increasing, so roots far below 1e-300 stay
    resolvable. Newton steps are kept inside a bracket and replaced by
    bisection when they leave it or stop shrinking, which covers huge ``C``
    where plain Newton from ``C / 2`` crawls.
    """
    half = 0.5 * C
    g_half = ns * (half - alpha) + wx
    if g_half != g_half:
        return math.nan
    if g_half == 0.0:
        return half
    lower = g_half > 0.0
    sign = 1.0 if lower else -1.0
    tol = NEWTON_TOL * max(1.0, ns)
    lo = math.log(NEWTON_TINY)
    hi = math.log(half)
    v = hi
    # warm start from alpha, which narrows the bracket from one side or the other
    t0 = alpha if lower else C - alpha
    if 0.0 < t0 < half:
        h0, _ = _root_side(C, ns, alpha, wx, sign, lower, math.log(t0))
        if h0 >= 0.0:
            hi = v = math.log(t0)
        else:
            lo = math.log(t0)
    step_old = hi - lo
    step = step_old
    for _ in range(NEWTON_MAX_ITER):
        h, dh = _root_side(C, ns, alpha, wx, sign, lower, v)
        if h != h:
            return math.nan
        if abs(h) <= tol:
            break
        if h > 0.0:
            hi = v
        else:
            lo = v
        newton = v - h / dh
        if not lo < newton < hi or abs(h / dh) > 0.5 * abs(step_old):
            step_old, step = step, 0.5 * (hi - lo)
            nxt = lo + step
        else:
            step_old, step = step, h / dh
            nxt = newton
        if nxt == v or nxt == lo or nxt == hi:
            # bracket collapsed to adjacent doubles
            break
        v = nxt
    else:
        return math.nan
    t = max(math.exp(v), NEWTON_TINY)
    if lower:
        return t
    return min(C - t, np.nextafter(C, 0.0))


@njit(cache=True, nogil=True)
def coordinate_step(code, C, wx, ns, alpha):
    """New value of ``alpha_i`` after exactly minimizing its subproblem."""
    if code == HINGE:
        return min(max(alpha - (wx - 1.0) / ns, 0.0), C)
    if code == SQUARED_HINGE:
        return max(alpha + (1.0 - wx - alpha / (2.0 * C)) / (ns + 1.0 / (2.0 * C)), 0.0)
    return _logistic_root(C, ns, alpha, wx)


@njit(cache=True, nogil=True)
def dual_gradient(code, C, wx, alpha):
    """Partial derivative of the dual objective in ``alpha_i`` (given ``w @ x_i``)."""
    if code == HINGE:
        return wx - 1.0
    if code == SQUARED_HINGE:
        return wx - 1.0 + alpha / (2.0 * C)
    if alpha <= 0.0:
        return -math.inf
    if alpha >= C:
        return math.inf
    return wx + math.log(alpha) - math.log(C - alpha)


@njit(cache=True, nogil=True)
def projected_gradient(code, C, wx, alpha):
    g = dual_gradient(code, C, wx, alpha)
    if alpha <= 0.0:
        return min(g, 0.0)
    if code != SQUARED_HINGE and alpha >= C:
        return max(g, 0.0)
    return g


@njit(cache=True, nogil=True)
def prox_scalar(code, C, s, ns):
    """``argmin_u 0.5 (u - s)^2 + l^*(-u) / ns``."""
    if code == HINGE:
        return min(max(s + 1.0 / ns, 0.0), C)
    if code == SQUARED_HINGE:
        return max((s * ns + 1.0) / (ns + 1.0 / (2.0 * C)), 0.0)
    # same root as the coordinate step with alpha = s, wx = 0
    return _logistic_root(C, ns, s, 0.0)


def _check_ns(norm_sq: float) -> None:
    if not norm_sq > 0.0:
        raise ValueError(f"norm_sq must be positive, got {norm_sq!r}")


def solve_subproblem(spec: LossSpec, wx: float, norm_sq: float, alpha_i: float) -> float:
    """Optimal change ``delta`` of ``alpha_i`` given the current ``w @ x_i``."""
    _check_ns(norm_sq)
    new = coordinate_step(spec.code, spec.C, float(wx), float(norm_sq), float(alpha_i))
    if math.isnan(new):
        raise NumericError(f"logistic Newton solve did not converge (wx={wx}, alpha={alpha_i})")
    alpha_i = float(alpha_i)
    delta = new - alpha_i
    lo, hi = (0.0, spec.C) if spec.code != SQUARED_HINGE else (0.0, math.inf)
    strict = spec.code == LOGISTIC
    # new - alpha_i can round so that alpha_i + delta lands just outside the domain
    while delta != 0.0 and not (lo < alpha_i + delta < hi if strict else lo <= alpha_i + delta <= hi):
        delta = math.nextafter(delta, 0.0)
    return delta


def prox_point(spec: LossSpec, s: float, norm_sq: float) -> float:
    _check_ns(norm_sq)
    u = prox_scalar(spec.code, spec.C, float(s), float(norm_sq))
    if math.isnan(u):
        raise NumericError(f"logistic Newton solve did not converge (s={s})")
    return u
