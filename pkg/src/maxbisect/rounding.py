"""The approximation ratio of one edge, and the two bias-selection rules.

For an edge with configuration (mu1, mu2, rho) rounded with biases
(r1, r2), the ratio of its cut probability to its SDP contribution is

    alpha = 2 (1 - Lambda_rho~(r1, r2)) / (1 - rho).

The linear rule sets r = c mu.  The pairing rule starts from c mu and then
matches the most positive with the most negative vertex, boosting both by
(1 - c) f(min |mu|).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from . import interval_core as ic
from .config_space import ConfigCube, Configuration, tilde_rho_box, tilde_rho_point
from .gaussian import cut_point, g_point, g_threshold, lambda_fn
from .interval_core import Interval, as_interval

BALANCE_TOL = 1e-9


class UnbalancedInput(ValueError):
    pass


class DegenerateEdge(ValueError):
    pass


@dataclass(frozen=True)
class BoostFunction:
    """f(x) = slope * max(0, x - knee) on [0, 1]."""

    knee: float
    slope: float

    def __post_init__(self):
        if not 0.0 <= self.knee <= 1.0:
            raise ValueError("knee must lie in [0, 1]")
        if self.slope < 0:
            raise ValueError("slope must be nonnegative")
        if self.slope * (1.0 - self.knee) > 1.0 + 1e-12:
            raise ValueError("f(1) = slope * (1 - knee) must not exceed 1")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.slope * np.maximum(0.0, x - self.knee)
        return out[()] if out.ndim == 0 else out

    def interval(self, x: Interval) -> Interval:
        """Enclosure of f over an interval of nonnegative arguments."""
        lo = ic.down(self.slope * np.maximum(0.0, ic.down(x.lo - self.knee)))
        hi = ic.up(self.slope * np.maximum(0.0, ic.up(x.hi - self.knee)))
        return Interval(np.maximum(lo, 0.0), hi)

    def slope_range(self, x: Interval) -> Interval:
        """Range of f' (a.e.) over an interval."""
        lo = np.where(np.asarray(x.lo) >= self.knee, self.slope, 0.0)
        hi = np.where(np.asarray(x.hi) > self.knee, self.slope, 0.0)
        return Interval(lo, hi)


@dataclass(frozen=True)
class BiasVector:
    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if np.any(np.abs(r) > 1.0):
            raise ValueError("bias outside [-1, 1]")
        object.__setattr__(self, "r", r)

    def imbalance(self) -> float:
        return math.fsum(self.r)


@dataclass(frozen=True)
class BiasRegion:
    """Union of axis-aligned rectangles ((a1, b1), (a2, b2))."""

    rects: Tuple[Tuple[Tuple[float, float], Tuple[float, float]], ...]

    def contains(self, r1: float, r2: float, tol: float = 1e-12) -> bool:
        for (a1, b1), (a2, b2) in self.rects:
            if a1 - tol <= r1 <= b1 + tol and a2 - tol <= r2 <= b2 + tol:
                return True
        return False


# ---------------------------------------------------------------------------
# ratio function


def alpha_point(mu1, mu2, rho, r1, r2):
    """alpha in floating point (vectorised).  rho must be < 1."""
    mu1, mu2, rho, r1, r2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu1, mu2, rho, r1, r2)))
    if np.any(rho >= 1.0):
        raise DegenerateEdge("rho = 1 gives a zero SDP contribution")
    rt = tilde_rho_point(mu1, mu2, rho)
    out = 2.0 * cut_point(rt, r1, r2) / (1.0 - rho)
    return out[()] if out.ndim == 0 else out


def alpha_value(c, r1, r2) -> Interval:
    """Certified enclosure of alpha for a configuration or a cube.

    For a cube the enclosure covers every configuration of the cube that
    lies in the polytope, for every bias in the given intervals.
    """
    if isinstance(c, ConfigCube):
        mu1, mu2, rho = c.mu1, c.mu2, c.rho
    else:
        mu1, mu2, rho = (Interval.point(v) for v in (c.mu1, c.mu2, c.rho))
    r1, r2 = as_interval(r1), as_interval(r2)
    if np.any(np.asarray(rho.hi) >= 1.0):
        raise DegenerateEdge("rho interval reaches 1")
    rt = tilde_rho_box(mu1, mu2, rho)
    lam = lambda_fn(rt, r1, r2)
    num = ic.mul(Interval.point(2.0), ic.sub(Interval.point(1.0), lam))
    num = Interval(np.maximum(num.lo, 0.0), np.maximum(num.hi, 0.0))
    return ic.div(num, ic.sub(Interval.point(1.0), rho))


# ---------------------------------------------------------------------------
# bias selection


def _check_balance(mus: np.ndarray, tol: float):
    if abs(math.fsum(mus)) > tol:
        raise UnbalancedInput(f"sum of mu is {math.fsum(mus):.3e}, expected 0")


def select_bias_linear(mus: Sequence[float], cparam: float, tol: float = BALANCE_TOL) -> BiasVector:
    """r_i = c mu_i."""
    mus = np.asarray(mus, dtype=float)
    if not 0.0 <= cparam <= 1.0:
        raise ValueError("c must lie in [0, 1]")
    _check_balance(mus, tol)
    return BiasVector(cparam * mus)


def pairing_order(mus: np.ndarray):
    """Matched (i, j) pairs of the pairing rule, in loop order.

    Positives are taken in decreasing mu, negatives in increasing mu, ties
    broken by the lowest index.  Vertices with mu = 0 are never matched.
    """
    idx = np.arange(len(mus))
    pos = idx[mus > 0]
    neg = idx[mus < 0]
    pos = pos[np.lexsort((pos, -mus[pos]))]
    neg = neg[np.lexsort((neg, mus[neg]))]
    k = min(len(pos), len(neg))
    return list(zip(pos[:k].tolist(), neg[:k].tolist()))


def select_bias_pairing(mus: Sequence[float], cparam: float, f: BoostFunction, tol: float = BALANCE_TOL) -> BiasVector:
    """Start from c mu, then boost matched opposite-sign pairs."""
    mus = np.asarray(mus, dtype=float)
    if not 0.0 <= cparam <= 1.0:
        raise ValueError("c must lie in [0, 1]")
    _check_balance(mus, tol)
    r = cparam * mus
    for i, j in pairing_order(mus):
        beta = min(abs(mus[i]), abs(mus[j]))
        boost = (1.0 - cparam) * float(f(beta))
        r[i] += boost
        r[j] -= boost
    return BiasVector(np.clip(r, -1.0, 1.0))


def _signed(mu: float, lo_mag: float, hi_mag: float) -> Tuple[float, float]:
    if mu > 0:
        return (lo_mag, hi_mag)
    if mu < 0:
        return (-hi_mag, -lo_mag)
    return (0.0, 0.0)


def permissible_biases(mu1: float, mu2: float, cparam: float, f: BoostFunction) -> BiasRegion:
    """Bias pairs the pairing rule can produce for an edge with these mu."""
    u1, u2 = abs(mu1), abs(mu2)
    w1 = (cparam * u1, cparam * u1 + (1 - cparam) * float(f(u1)))
    w2 = (cparam * u2, cparam * u2 + (1 - cparam) * float(f(u2)))
    weak = (_signed(mu1, *w1), _signed(mu2, *w2))
    if np.sign(mu1) == np.sign(mu2):
        return BiasRegion((weak,))
    boost = (1 - cparam) * float(f(min(u1, u2)))
    s1 = (cparam * u1 + boost, w1[1])
    s2 = (cparam * u2 + boost, w2[1])
    return BiasRegion(((_signed(mu1, *s1), weak[1]), (weak[0], _signed(mu2, *s2))))


def worst_bias_candidates(c: Configuration, I1, I2, include_origin: bool = False) -> List[Tuple[float, float]]:
    """Finite set of bias pairs on which alpha attains its minimum over I1 x I2."""
    (a1, b1), (a2, b2) = I1, I2
    rt = float(tilde_rho_point(c.mu1, c.mu2, c.rho))
    cands = [(a1, a2), (a1, b2), (b1, a2), (b1, b2)]
    if rt <= 0:
        return _dedupe(cands)
    if include_origin and a1 <= 0 <= b1 and a2 <= 0 <= b2:
        cands.append((0.0, 0.0))
    if rt >= 1.0:
        # g(x) = x: the shared point r1 = r2 when the intervals meet
        lo, hi = max(a1, a2), min(b1, b2)
        if lo <= hi:
            cands.append((lo, lo))
        return _dedupe(cands)
    for x in (a1, b1):
        y = float(g_point(rt, x))
        if a2 <= y <= b2:
            cands.append((x, y))
    for y in (a2, b2):
        x = float(g_point(rt, y))
        if a1 <= x <= b1:
            cands.append((x, y))
    return _dedupe(cands)


def _dedupe(cands):
    out = []
    for p in cands:
        if p not in out:
            out.append(p)
    return out


def alpha_cf(c: Configuration, cparam: float, f: BoostFunction) -> Interval:
    """Certified enclosure of the minimum of alpha over permissible biases."""
    region = permissible_biases(c.mu1, c.mu2, cparam, f)
    lo, hi = np.inf, np.inf
    for I1, I2 in region.rects:
        for r1, r2 in worst_bias_candidates(c, I1, I2, include_origin=False):
            e = alpha_value(c, r1, r2)
            lo = min(lo, float(e.lo))
            hi = min(hi, float(e.hi))
    return Interval(lo, hi)


# ---------------------------------------------------------------------------
# vectorised pairing minimum (float)


def _rects_vectorised(mu1, mu2, cparam, f):
    u1, u2 = np.abs(mu1), np.abs(mu2)
    s1, s2 = np.sign(mu1), np.sign(mu2)
    w1lo, w1hi = cparam * u1, cparam * u1 + (1 - cparam) * f(u1)
    w2lo, w2hi = cparam * u2, cparam * u2 + (1 - cparam) * f(u2)
    boost = (1 - cparam) * f(np.minimum(u1, u2))
    opp = s1 != s2
    mags = [
        (w1lo, w1hi, w2lo, w2hi, ~opp),
        (cparam * u1 + boost, w1hi, w2lo, w2hi, opp),
        (w1lo, w1hi, cparam * u2 + boost, w2hi, opp),
    ]
    out = []
    for l1, h1, l2, h2, mask in mags:
        a1 = np.where(s1 >= 0, l1, -h1)
        b1 = np.where(s1 >= 0, h1, -l1)
        a2 = np.where(s2 >= 0, l2, -h2)
        b2 = np.where(s2 >= 0, h2, -l2)
        out.append((a1 * (s1 != 0), b1 * (s1 != 0), a2 * (s2 != 0), b2 * (s2 != 0), mask))
    return out


def pairing_candidates(mu1, mu2, rho, cparam: float, f: BoostFunction):
    """All candidate bias pairs (vectorised): list of (r1, r2, valid)."""
    mu1, mu2, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu1, mu2, rho)))
    rt = tilde_rho_point(mu1, mu2, rho)
    pos = rt > 0
    rt_safe = np.where(pos, rt, 1.0)
    out = []
    for a1, b1, a2, b2, mask in _rects_vectorised(mu1, mu2, cparam, f):
        for r1, r2 in ((a1, a2), (a1, b2), (b1, a2), (b1, b2)):
            out.append((r1, r2, mask))
        for x in (a1, b1):
            y = g_point(rt_safe, x)
            ok = mask & pos & (y >= a2) & (y <= b2)
            out.append((x, np.where(ok, y, a2), ok))
        for y in (a2, b2):
            x = g_point(rt_safe, y)
            ok = mask & pos & (x >= a1) & (x <= b1)
            out.append((np.where(ok, x, a1), y, ok))
    return out


def alpha_cf_point(mu1, mu2, rho, cparam: float, f: BoostFunction, return_bias: bool = False):
    """min over permissible biases of alpha, in floating point (vectorised)."""
    mu1, mu2, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu1, mu2, rho)))
    best = np.full(mu1.shape, np.inf)
    br1 = np.zeros(mu1.shape)
    br2 = np.zeros(mu1.shape)
    for r1, r2, ok in pairing_candidates(mu1, mu2, rho, cparam, f):
        v = np.where(ok, alpha_point(mu1, mu2, rho, r1, r2), np.inf)
        better = v < best
        best = np.where(better, v, best)
        br1 = np.where(better, r1, br1)
        br2 = np.where(better, r2, br2)
    best = best[()] if best.ndim == 0 else best
    if return_bias:
        return best, br1, br2
    return best
