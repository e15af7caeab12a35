"""Closed-interval arithmetic, interval linear algebra, and the interval
Gauss-Seidel enclosure refiner.

Intervals are closed and may be degenerate (width 0); fixed scalars flow
through the same code paths as genuinely uncertain ones.  All operations
return the exact hull of the pointwise results, so any real computation
whose inputs lie inside the operand intervals lands inside the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DivisionByZeroInterval,
    InfeasibleEnclosure,
    InvalidParameter,
    NonConvergence,
)


@dataclass(frozen=True)
class Interval:
    """Closed real interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        lo = float(self.lo)
        hi = float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise InvalidParameter("interval endpoints must not be NaN")
        if lo > hi:
            raise InvalidParameter(f"inverted interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, v: float) -> "Interval":
        return cls(v, v)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    def encloses(self, other: "Interval", slack: float = 0.0) -> bool:
        return self.lo - slack <= other.lo and other.hi <= self.hi + slack

    def meet(self, other: "Interval") -> "Interval":
        """Intersection; raises InfeasibleEnclosure when empty."""
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            raise InfeasibleEnclosure(
                f"empty intersection of [{self.lo}, {self.hi}] and "
                f"[{other.lo}, {other.hi}]"
            )
        return Interval(lo, hi)

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other: "Interval") -> "Interval":
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other: "Interval") -> "Interval":
        p = (
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        )
        return Interval(min(p), max(p))

    def __truediv__(self, other: "Interval") -> "Interval":
        if other.contains_zero():
            raise DivisionByZeroInterval(
                f"division by [{other.lo}, {other.hi}] which contains 0"
            )
        q = (
            self.lo / other.lo,
            self.lo / other.hi,
            self.hi / other.lo,
            self.hi / other.hi,
        )
        return Interval(min(q), max(q))

    def scale(self, c: float) -> "Interval":
        return self * Interval.point(c)

    def __repr__(self) -> str:
        return f"[{self.lo:.6g}, {self.hi:.6g}]"


# Functional aliases; some call sites read better with explicit names.
def interval_add(a: Interval, b: Interval) -> Interval:
    return a + b


def interval_sub(a: Interval, b: Interval) -> Interval:
    return a - b


def interval_mul(a: Interval, b: Interval) -> Interval:
    return a * b


def interval_div(a: Interval, b: Interval) -> Interval:
    return a / b


class IntervalVector:
    """Fixed-length vector of intervals (a box)."""

    def __init__(self, entries: Iterable[Interval]):
        self._entries = tuple(entries)

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> "IntervalVector":
        if len(lo) != len(hi):
            raise InvalidParameter("lo/hi length mismatch")
        return cls(Interval(l, h) for l, h in zip(lo, hi))

    @classmethod
    def constant(cls, iv: Interval, n: int) -> "IntervalVector":
        return cls([iv] * n)

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, i: int) -> Interval:
        return self._entries[i]

    def __iter__(self):
        return iter(self._entries)

    def los(self) -> np.ndarray:
        return np.array([e.lo for e in self._entries])

    def his(self) -> np.ndarray:
        return np.array([e.hi for e in self._entries])

    def encloses(self, other: "IntervalVector", slack: float = 0.0) -> bool:
        return len(self) == len(other) and all(
            a.encloses(b, slack) for a, b in zip(self, other)
        )

    def contains_point(self, x: Sequence[float], slack: float = 0.0) -> bool:
        return all(e.contains(float(v), slack) for e, v in zip(self._entries, x))

    def meet(self, other: "IntervalVector") -> "IntervalVector":
        return IntervalVector(a.meet(b) for a, b in zip(self, other))

    def __repr__(self) -> str:
        return "(" + ", ".join(repr(e) for e in self._entries) + ")"


class IntervalMatrix:
    """Rectangular grid of intervals."""

    def __init__(self, rows: Iterable[Iterable[Interval]]):
        self._rows = tuple(tuple(r) for r in rows)
        if self._rows:
            w = len(self._rows[0])
            if any(len(r) != w for r in self._rows):
                raise InvalidParameter("ragged interval matrix")

    @classmethod
    def from_bounds(cls, lo: np.ndarray, hi: np.ndarray) -> "IntervalMatrix":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape:
            raise InvalidParameter("lo/hi shape mismatch")
        return cls(
            [Interval(lo[i, j], hi[i, j]) for j in range(lo.shape[1])]
            for i in range(lo.shape[0])
        )

    @property
    def shape(self) -> tuple[int, int]:
        if not self._rows:
            return (0, 0)
        return (len(self._rows), len(self._rows[0]))

    def __getitem__(self, ij: tuple[int, int]) -> Interval:
        i, j = ij
        return self._rows[i][j]

    def row(self, i: int) -> tuple[Interval, ...]:
        return self._rows[i]

    def los(self) -> np.ndarray:
        return np.array([[e.lo for e in r] for r in self._rows])

    def his(self) -> np.ndarray:
        return np.array([[e.hi for e in r] for r in self._rows])

    def __repr__(self) -> str:
        return "\n".join(" ".join(repr(e) for e in r) for r in self._rows)


def gauss_seidel_solve(
    A: IntervalMatrix,
    b: IntervalVector,
    x0: IntervalVector,
    max_iter: int = 100,
    tol: float = 1e-9,
) -> IntervalVector:
    """Refine an enclosure of the solution set of the interval system A x = b.

    Sweeps components in order, each time re-enclosing x_i from the other
    components' current boxes and intersecting with the previous box, so the
    result is always contained in ``x0``.  Every point solution of a real
    system drawn from (A, b) that lies in ``x0`` also lies in the result.

    Stops when the largest per-component width reduction of a full sweep
    drops below ``tol``, or after ``max_iter`` sweeps.

    Raises DivisionByZeroInterval if some diagonal entry of A contains 0 and
    InfeasibleEnclosure if an intersection comes up empty (meaning ``x0``
    did not enclose the solution set restricted to it).
    """
    n = len(b)
    if A.shape != (n, n) or len(x0) != n:
        raise InvalidParameter("dimension mismatch in gauss_seidel_solve")
    for i in range(n):
        if A[i, i].contains_zero():
            raise DivisionByZeroInterval(f"diagonal interval A[{i},{i}] contains 0")

    x = list(x0)
    for _ in range(max_iter):
        max_shrink = 0.0
        for i in range(n):
            acc = b[i]
            for j in range(n):
                if j != i:
                    acc = acc - A[i, j] * x[j]
            y = acc / A[i, i]
            new = x[i].meet(y)
            max_shrink = max(max_shrink, x[i].width - new.width)
            x[i] = new
        if max_shrink < tol:
            break
    return IntervalVector(x)


def spectral_radius(M: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Spectral radius of an elementwise-nonnegative matrix.

    Power iteration from the all-ones vector with Collatz-Wielandt bracketing:
    for positive v, min_i (Av)_i/v_i <= rho(A) <= max_i (Av)_i/v_i, and the
    upper bound is non-increasing along iterates.  The matrix is shifted by
    its largest entry times the identity before iterating; the shift makes
    the diagonal strictly positive, which removes rotating eigenvalue pairs
    of imprimitive matrices (the shift is subtracted from the result, which
    is exact for nonnegative matrices).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvalidParameter("spectral_radius needs a nonempty square matrix")
    if np.any(M < 0) or np.any(~np.isfinite(M)):
        raise InvalidParameter("spectral_radius needs finite nonnegative entries")

    scale = float(M.max())
    if scale == 0.0:
        return 0.0
    shift = scale
    A = M + shift * np.eye(M.shape[0])

    v = np.ones(M.shape[0])
    prev_hi = math.inf
    hi = math.inf
    lo = 0.0
    for _ in range(max_iter):
        w = A @ v
        ratios = w / v
        hi = float(ratios.max())
        lo = float(ratios.min())
        if hi - lo <= tol:
            return 0.5 * (hi + lo) - shift
        if prev_hi - hi <= tol * max(1.0, hi):
            return hi - shift
        prev_hi = hi
        v = w / w.max()
    raise NonConvergence(
        f"power iteration did not converge in {max_iter} iterations",
        estimate=hi - shift,
        residual=hi - lo,
    )


def is_interval_m_matrix(P_max: np.ndarray, lam: float, tol: float = 1e-10) -> bool:
    """Whether I - lam*P is an interval M-matrix for every P below ``P_max``.

    Holds exactly when rho(P_max) <= 1/lam.  ``lam`` is the discount factor
    in (0, 1) for discounted systems, or 1 for substochastic ones.  When the
    test passes, interval Gauss-Seidel attains the hull of the solution set.
    """
    if not (0.0 < lam <= 1.0):
        raise InvalidParameter(f"lambda must be in (0, 1]; got {lam}")
    P_max = np.asarray(P_max, dtype=float)
    if np.any(P_max < -tol) or np.any(P_max > 1.0 + tol):
        raise InvalidParameter("P_max entries must lie in [0, 1]")
    rho = spectral_radius(np.clip(P_max, 0.0, 1.0), tol=tol)
    return rho <= 1.0 / lam + tol
