"""Edge configurations (mu1, mu2, rho), the polytope they live in, and boxes
of them.

A configuration describes one edge of an SDP solution: the inner products
of the two endpoint vectors with v0 and with each other.  Valid triples are
cut out by the four triangle inequalities.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List

import numpy as np

from . import interval_core as ic
from .interval_core import Interval, down, up


class DegenerateDenominator(ValueError):
    pass


@dataclass(frozen=True)
class Configuration:
    mu1: float
    mu2: float
    rho: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mu1, self.mu2, self.rho], dtype=float)


@dataclass(frozen=True)
class SmoothParams:
    delta: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class ConfigCube:
    mu1: Interval
    mu2: Interval
    rho: Interval

    @classmethod
    def from_bounds(cls, lo, hi) -> "ConfigCube":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return cls(Interval(lo[..., 0], hi[..., 0]), Interval(lo[..., 1], hi[..., 1]), Interval(lo[..., 2], hi[..., 2]))

    def bounds(self):
        lo = np.stack([np.asarray(self.mu1.lo), np.asarray(self.mu2.lo), np.asarray(self.rho.lo)], axis=-1)
        hi = np.stack([np.asarray(self.mu1.hi), np.asarray(self.mu2.hi), np.asarray(self.rho.hi)], axis=-1)
        return lo, hi

    def midpoint(self) -> Configuration:
        return Configuration(float(self.mu1.mid), float(self.mu2.mid), float(self.rho.mid))


class CubeClass(enum.Enum):
    OUTSIDE = "Outside"
    INSIDE = "Inside"
    STRADDLING = "Straddling"


def triangle_forms(mu1, mu2, rho):
    """The four linear forms that must all be >= -1."""
    return (mu1 + mu2 + rho, mu1 - mu2 - rho, -mu1 + mu2 - rho, -mu1 - mu2 + rho)


def in_conf(mu1, mu2, rho, tol: float = 0.0):
    """Vectorised membership test for the configuration polytope."""
    f = triangle_forms(np.asarray(mu1), np.asarray(mu2), np.asarray(rho))
    ok = (f[0] >= -1 - tol) & (f[1] >= -1 - tol) & (f[2] >= -1 - tol) & (f[3] >= -1 - tol)
    for v in (mu1, mu2, rho):
        ok = ok & (np.abs(v) <= 1 + tol)
    return ok


def is_configuration(c: Configuration, tol: float = 0.0) -> bool:
    return bool(in_conf(c.mu1, c.mu2, c.rho, tol))


def is_smooth(c: Configuration, p: SmoothParams, tol: float = 0.0) -> bool:
    lim = 1.0 - p.delta
    return is_configuration(c, tol) and max(abs(c.mu1), abs(c.mu2), abs(c.rho)) <= lim + tol


def tilde_rho_point(mu1, mu2, rho):
    """(rho - mu1 mu2) / sqrt((1 - mu1^2)(1 - mu2^2)), clipped to [-1, 1].

    Set to 0 when either |mu| = 1, where the projections are undefined.
    Vectorised.
    """
    mu1, mu2, rho = (np.asarray(v, dtype=float) for v in (mu1, mu2, rho))
    den = np.sqrt(np.maximum((1.0 - mu1) * (1.0 + mu1), 0.0) * np.maximum((1.0 - mu2) * (1.0 + mu2), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rho - mu1 * mu2) / den
    t = np.where(den > 0, np.clip(t, -1.0, 1.0), 0.0)
    return t[()] if t.ndim == 0 else t


def _half_angle_tan(mu: Interval) -> Interval:
    """sqrt((1 - mu) / (1 + mu)) = tan(arccos(mu) / 2), decreasing in mu."""
    hi_mu = np.asarray(mu.hi, dtype=float)
    lo_mu = np.asarray(mu.lo, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q_lo = down(np.maximum(down(1.0 - hi_mu), 0.0) / up(1.0 + hi_mu))
        q_hi = up(up(1.0 - lo_mu) / np.maximum(down(1.0 + lo_mu), 0.0))
    q_lo = np.where(np.isnan(q_lo), 0.0, np.maximum(q_lo, 0.0))
    q_hi = np.where(np.isnan(q_hi), np.inf, q_hi)
    return Interval(np.maximum(down(np.sqrt(q_lo)), 0.0), up(np.sqrt(q_hi)))


def tilde_rho_box(mu1: Interval, mu2: Interval, rho: Interval, strict: bool = False) -> Interval:
    """Enclosure of tilde-rho over every configuration in the box.

    The box must stay away from |mu| = 1 (the prover clips to the smooth
    region first).  Three enclosures are intersected:

    * the direct interval extension of the formula;
    * the angle form, with mu = cos a and D = sin a1 sin a2:
          rho~ = 1 - (cos(a1 - a2) - rho) / D = -1 + (rho - cos(a1 + a2)) / D,
      which stays tight where the direct form overshoots to +-1;
    * the triangle faces: on the polytope rho <= 1 - |mu1 - mu2| and
      rho >= -1 + |mu1 + mu2|, which in half-angle tangents T = tan(a/2)
      read rho~ <= min(T1, T2) / max(T1, T2) and
      rho~ >= -min(T1 T2, 1 / (T1 T2)).

    The result is only claimed for points of the box that lie in the
    configuration polytope.
    """
    one = Interval.point(1.0)
    if strict and np.any((np.abs(mu1.lo) >= 1) | (np.abs(mu1.hi) >= 1) | (np.abs(mu2.lo) >= 1) | (np.abs(mu2.hi) >= 1)):
        raise DegenerateDenominator("mu interval reaches +-1")
    s1 = ic.sub(one, ic.sqr(mu1))
    s2 = ic.sub(one, ic.sqr(mu2))
    D = ic.sqrt(ic.mul(Interval(np.maximum(s1.lo, 0.0), s1.hi), Interval(np.maximum(s2.lo, 0.0), s2.hi)))
    lo = np.full(np.shape(D.lo), -1.0)
    hi = np.full(np.shape(D.lo), 1.0)
    pos = np.asarray(D.lo) > 0
    if np.any(pos):
        Dp = Interval(np.where(pos, D.lo, 1.0), np.where(pos, D.hi, 1.0))
        num = ic.sub(rho, ic.mul(mu1, mu2))
        direct = ic.div(num, Dp)
        lo = np.where(pos, np.maximum(lo, direct.lo), lo)
        hi = np.where(pos, np.minimum(hi, direct.hi), hi)

        a1 = ic.arccos(mu1)
        a2 = ic.arccos(mu2)
        dmax = up(np.maximum(np.abs(up(a1.hi - a2.lo)), np.abs(down(a1.lo - a2.hi))))
        dmax = np.minimum(dmax, np.pi)
        cos_d_lo = ic.cos_on_0_pi(Interval(dmax, dmax)).lo
        # cos(a1 - a2) - rho >= cos_d_lo - rho_hi
        gap = down(cos_d_lo - rho.hi)
        up_angle = np.where(gap >= 0, up(1.0 - down(gap / D.hi)), 1.0)
        s_lo = down(a1.lo + a2.lo)
        s_hi = up(a1.hi + a2.hi)
        with np.errstate(invalid="ignore"):
            c_ends = np.maximum(np.cos(s_lo), np.cos(s_hi))
        c_ends = ic.widen_up(c_ends, ic.LIBM_ULPS)
        cs_max = np.where((s_lo <= 0) | (s_hi >= 2 * np.pi), 1.0, np.minimum(c_ends, 1.0))
        gap2 = down(rho.lo - cs_max)
        lo_angle = np.where(gap2 >= 0, down(-1.0 + down(gap2 / D.hi)), -1.0)
        lo = np.where(pos, np.maximum(lo, lo_angle), lo)
        hi = np.where(pos, np.minimum(hi, up_angle), hi)

    T1 = _half_angle_tan(mu1)
    T2 = _half_angle_tan(mu2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r12 = np.where(T2.lo > 0, up(T1.hi / T2.lo), 1.0)
        r21 = np.where(T1.lo > 0, up(T2.hi / T1.lo), 1.0)
    face_hi = np.where(T1.hi < T2.lo, r12, np.where(T2.hi < T1.lo, r21, 1.0))
    P = ic.mul(T1, T2)
    with np.errstate(divide="ignore", over="ignore"):
        inv_plo = np.where(P.lo > 0, up(1.0 / P.lo), np.inf)
    m = np.where((P.lo <= 1) & (P.hi >= 1), 1.0, np.where(P.hi < 1, P.hi, inv_plo))
    face_lo = -np.minimum(m, 1.0)
    lo = np.maximum(lo, face_lo)
    hi = np.minimum(hi, np.minimum(face_hi, 1.0))
    # an empty result means the box meets the polytope in no point with
    # |mu| < 1; keep it as a valid (degenerate) interval
    lo = np.minimum(lo, hi)
    # rho~ = 0 by convention where |mu| = 1; boxes touching that face must
    # contain 0, boxes pinned to it are exactly 0
    touch = (np.abs(mu1.lo) >= 1) | (np.abs(mu1.hi) >= 1) | (np.abs(mu2.lo) >= 1) | (np.abs(mu2.hi) >= 1)
    pinned = ((mu1.lo == mu1.hi) & (np.abs(mu1.lo) >= 1)) | ((mu2.lo == mu2.hi) & (np.abs(mu2.lo) >= 1))
    lo = np.where(pinned, 0.0, np.where(touch, np.minimum(lo, 0.0), lo))
    hi = np.where(pinned, 0.0, np.where(touch, np.maximum(hi, 0.0), hi))
    return Interval(lo, hi)


def tilde_rho(c):
    """tilde-rho of a configuration (float) or enclosure over a cube."""
    if isinstance(c, ConfigCube):
        return tilde_rho_box(c.mu1, c.mu2, c.rho)
    return float(tilde_rho_point(c.mu1, c.mu2, c.rho))


def classify_boxes(lo: np.ndarray, hi: np.ndarray, delta: float) -> np.ndarray:
    """Vectorised cube classification against the smooth polytope.

    Returns an array of codes: 0 outside, 1 inside, 2 straddling.  Linear
    forms are evaluated with directed rounding so that ``outside`` and
    ``inside`` are certain.
    """
    lim = 1.0 - delta
    m1lo, m2lo, plo = lo[..., 0], lo[..., 1], lo[..., 2]
    m1hi, m2hi, phi = hi[..., 0], hi[..., 1], hi[..., 2]
    # max and min of each form over the box
    fmax = (
        up(up(m1hi + m2hi) + phi),
        up(up(m1hi - m2lo) - plo),
        up(up(-m1lo + m2hi) - plo),
        up(up(-m1lo - m2lo) + phi),
    )
    fmin = (
        down(down(m1lo + m2lo) + plo),
        down(down(m1lo - m2hi) - phi),
        down(down(-m1hi + m2lo) - phi),
        down(down(-m1hi - m2hi) + plo),
    )
    outside = np.zeros(lo.shape[:-1], dtype=bool)
    for f in fmax:
        outside |= f < -1.0
    for k in range(3):
        outside |= (lo[..., k] > lim) | (hi[..., k] < -lim)
    inside = np.ones(lo.shape[:-1], dtype=bool)
    for f in fmin:
        inside &= f >= -1.0
    for k in range(3):
        inside &= (lo[..., k] >= -lim) & (hi[..., k] <= lim)
    return np.where(outside, 0, np.where(inside, 1, 2))


def classify_cube(cube: ConfigCube, p: SmoothParams) -> CubeClass:
    lo, hi = cube.bounds()
    code = int(classify_boxes(lo[None, :], hi[None, :], p.delta)[0])
    return (CubeClass.OUTSIDE, CubeClass.INSIDE, CubeClass.STRADDLING)[code]


def split_boxes(lo: np.ndarray, hi: np.ndarray):
    """Bisect every box in all three coordinates (vectorised, 8 children).

    Children are ordered child-major: all first children, then all second
    children, and so on.
    """
    mid = 0.5 * lo + 0.5 * hi
    los, his = [], []
    for b in range(8):
        l2 = lo.copy()
        h2 = hi.copy()
        for d in range(3):
            if (b >> d) & 1:
                l2[:, d] = mid[:, d]
            else:
                h2[:, d] = mid[:, d]
        los.append(l2)
        his.append(h2)
    return np.concatenate(los), np.concatenate(his)


def split_cube(cube: ConfigCube) -> List[ConfigCube]:
    """Midpoint bisection; zero-width coordinates are not split."""
    lo, hi = cube.bounds()
    parts = []
    for d in range(3):
        if hi[d] > lo[d]:
            m = 0.5 * lo[d] + 0.5 * hi[d]
            parts.append([(lo[d], m), (m, hi[d])])
        else:
            parts.append([(lo[d], hi[d])])
    out = []
    for a in parts[0]:
        for b in parts[1]:
            for c in parts[2]:
                out.append(ConfigCube(Interval(*a), Interval(*b), Interval(*c)))
    return out
