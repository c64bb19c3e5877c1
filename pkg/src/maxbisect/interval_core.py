"""Interval arithmetic with outward rounding.

Endpoints are binary64 floats or numpy arrays of them, so one ``Interval``
can hold a whole batch of boxes.  Every basic operation is computed in
round-to-nearest and then widened by one ulp on each side, which is enough
because IEEE-754 ``+ - * / sqrt`` are correctly rounded.  Library
transcendentals are widened by a few ulps more (see ``LIBM_ULPS``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

# Slack for libm functions (exp, cos, arccos, ...).  glibc documents errors
# of at most a couple of ulps for these; we use a wider margin.
LIBM_ULPS = 4

# Lower endpoints of sqrt arguments that are negative by less than this are
# treated as rounding noise and clamped to zero.
SQRT_CLAMP = 64 * np.finfo(float).eps

_INF = np.inf


class IntervalError(ValueError):
    pass


class DivisionByZeroInterval(IntervalError):
    pass


class NegativeSqrt(IntervalError):
    pass


def down(x: ArrayLike) -> ArrayLike:
    """Next float toward -inf."""
    return np.nextafter(x, -_INF)


def up(x: ArrayLike) -> ArrayLike:
    return np.nextafter(x, _INF)


def widen_down(x: ArrayLike, ulps: int) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    out = x - ulps * np.abs(np.spacing(x))
    out = np.where(np.isfinite(x), down(out), x)
    return out[()] if out.ndim == 0 else out


def widen_up(x: ArrayLike, ulps: int) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    out = x + ulps * np.abs(np.spacing(x))
    out = np.where(np.isfinite(x), up(out), x)
    return out[()] if out.ndim == 0 else out


def _scalar(x):
    x = np.asarray(x, dtype=float)
    return x[()] if x.ndim == 0 else x


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; endpoints may be arrays of equal shape.

    ``lo = -inf`` or ``hi = +inf`` mark half-lines (used for the normal
    quantile at 0 and 1).
    """

    lo: ArrayLike
    hi: ArrayLike

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise IntervalError("NaN endpoint")
        if np.any(lo > hi):
            raise IntervalError("empty interval: lo > hi")
        object.__setattr__(self, "lo", _scalar(lo))
        object.__setattr__(self, "hi", _scalar(hi))

    @classmethod
    def point(cls, x: ArrayLike) -> "Interval":
        return cls(x, x)

    @classmethod
    def exact(cls, x: ArrayLike) -> "Interval":
        """Enclosure of a decimal value that may not be representable."""
        return cls(down(x), up(x))

    @property
    def mid(self) -> ArrayLike:
        return 0.5 * self.lo + 0.5 * self.hi

    @property
    def width(self) -> ArrayLike:
        return self.hi - self.lo

    def contains(self, x: ArrayLike) -> ArrayLike:
        return (self.lo <= x) & (x <= self.hi)

    def __getitem__(self, idx) -> "Interval":
        return Interval(np.asarray(self.lo)[idx], np.asarray(self.hi)[idx])

    def __len__(self) -> int:
        return len(np.asarray(self.lo))

    def __add__(self, other):
        return add(self, as_interval(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, as_interval(other))

    def __rsub__(self, other):
        return sub(as_interval(other), self)

    def __mul__(self, other):
        return mul(self, as_interval(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, as_interval(other))

    def __rtruediv__(self, other):
        return div(as_interval(other), self)

    def __neg__(self):
        return neg(self)

    def __abs__(self):
        return iabs(self)


def as_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval.point(x)


def add(a: Interval, b: Interval) -> Interval:
    return Interval(down(a.lo + b.lo), up(a.hi + b.hi))


def sub(a: Interval, b: Interval) -> Interval:
    return Interval(down(a.lo - b.hi), up(a.hi - b.lo))


def neg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo)


def _products(x, y):
    with np.errstate(invalid="ignore"):
        p = x * y
    # 0 * inf is 0 in interval arithmetic
    return np.where(np.isnan(p), 0.0, p)


def mul(a: Interval, b: Interval) -> Interval:
    ps = [_products(x, y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
    lo = np.minimum(np.minimum(ps[0], ps[1]), np.minimum(ps[2], ps[3]))
    hi = np.maximum(np.maximum(ps[0], ps[1]), np.maximum(ps[2], ps[3]))
    return Interval(down(lo), up(hi))


def div(a: Interval, b: Interval) -> Interval:
    if np.any((b.lo <= 0) & (b.hi >= 0)):
        raise DivisionByZeroInterval("divisor interval contains 0")
    inv = Interval(down(1.0 / b.hi), up(1.0 / b.lo))
    if np.all(a.lo == 1.0) and np.all(a.hi == 1.0):
        return inv
    qs = [np.asarray(x) / np.asarray(y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
    qs = [np.where(np.isnan(q), 0.0, q) for q in qs]
    lo = np.minimum(np.minimum(qs[0], qs[1]), np.minimum(qs[2], qs[3]))
    hi = np.maximum(np.maximum(qs[0], qs[1]), np.maximum(qs[2], qs[3]))
    return Interval(down(lo), up(hi))


def iabs(a: Interval) -> Interval:
    lo = np.where(a.lo >= 0, a.lo, np.where(a.hi <= 0, -a.hi, 0.0))
    hi = np.maximum(np.abs(a.lo), np.abs(a.hi))
    return Interval(lo, hi)


def sqr(a: Interval) -> Interval:
    """Tight square (dependency-aware, unlike a*a)."""
    m = iabs(a)
    return Interval(down(m.lo * m.lo), up(m.hi * m.hi))


def sqrt(a: Interval) -> Interval:
    lo = np.asarray(a.lo, dtype=float)
    if np.any(lo < -SQRT_CLAMP):
        raise NegativeSqrt("sqrt of an interval reaching below zero")
    lo = np.maximum(lo, 0.0)
    return Interval(np.maximum(down(np.sqrt(lo)), 0.0), up(np.sqrt(a.hi)))


def imin(a: Interval, b: Interval) -> Interval:
    return Interval(np.minimum(a.lo, b.lo), np.minimum(a.hi, b.hi))


def imax(a: Interval, b: Interval) -> Interval:
    return Interval(np.maximum(a.lo, b.lo), np.maximum(a.hi, b.hi))


def hull(a: Interval, b: Interval) -> Interval:
    return Interval(np.minimum(a.lo, b.lo), np.maximum(a.hi, b.hi))


def intersect(a: Interval, lo: ArrayLike, hi: ArrayLike) -> Interval:
    """Clip to [lo, hi]; sound when the exact value is known to lie there."""
    return Interval(np.minimum(np.maximum(a.lo, lo), hi), np.maximum(np.minimum(a.hi, hi), lo))


def lift_monotone(f: Callable, direction: str, a: Interval, ulps: int = LIBM_ULPS) -> Interval:
    """Enclose f over ``a`` from its endpoint values.

    ``f`` must be monotone on ``a`` and accurate to ``ulps`` units in the
    last place.  Callers with their own certified endpoint enclosures pass
    ``ulps=0`` and a function returning (lo, hi) pairs via ``lift_bounds``.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        fa, fb = f(np.asarray(a.lo, dtype=float)), f(np.asarray(a.hi, dtype=float))
    if direction == "increasing":
        lo, hi = fa, fb
    elif direction == "decreasing":
        lo, hi = fb, fa
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return Interval(widen_down(lo, ulps), widen_up(hi, ulps))


def exp(a: Interval) -> Interval:
    r = lift_monotone(np.exp, "increasing", a)
    return Interval(np.maximum(r.lo, 0.0), r.hi)


def arccos(a: Interval) -> Interval:
    a = intersect(a, -1.0, 1.0)
    r = lift_monotone(np.arccos, "decreasing", a)
    return intersect(r, 0.0, up(np.pi))


def cos_on_0_pi(a: Interval) -> Interval:
    """cos on a subinterval of [0, pi], where it is decreasing."""
    r = lift_monotone(np.cos, "decreasing", a)
    return intersect(r, -1.0, 1.0)
