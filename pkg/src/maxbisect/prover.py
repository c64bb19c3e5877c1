"""Branch-and-bound proof that alpha exceeds a target on the smooth polytope.

The cube [-1, 1]^3 of configurations is subdivided recursively.  A cube is
accepted when it misses the polytope or when a rigorous lower bound on
alpha over it exceeds the target; a cube whose midpoint already evaluates
below the target is a failure witness; anything else is split in eight.

Lower bounds per cube are the better of two enclosures:

* a corner bound, from the monotonicity of Gamma in thresholds and rho~;
* a mean-value bound around a centre point of the polytope, with interval
  bounds on every partial derivative of alpha over the cube.

In pairing mode the permissible bias rectangles are not hulled; every
candidate of the worst-bias reduction is turned into a small box of biases
(with its own dependence on mu), and the cube bound is the minimum over
those boxes.
"""
from __future__ import annotations

import json
import math
import multiprocessing
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import interval_core as ic
from .config_space import ConfigCube, Configuration, classify_boxes, in_conf, split_boxes, tilde_rho_box
from .gaussian import INV_SQRT2PI, gamma_enclosure, lambda_fn, quantile_of_bias, std_normal_cdf
from .interval_core import Interval, down, up
from .rounding import BoostFunction, DegenerateEdge, alpha_cf, alpha_value, pairing_candidates

PROVER_VERSION = "maxbisect-prover 1.0"
CHUNK = 20000
DEFAULT_MAX_DEPTH = 40
OUTCOMES = ("OutsideConf", "BoundProved", "Inconclusive-split", "FailureWitness", "DepthExhausted")
_LEAF_CODES = {"OutsideConf": 0, "BoundProved": 1, "FailureWitness": 2, "DepthExhausted": 3}
_PATH_DIGITS = 21  # base-8 digits per 64-bit path word

_ONE = Interval.point(1.0)
_TWO = Interval.point(2.0)
_INV_2PI = up(INV_SQRT2PI * INV_SQRT2PI)


class MismatchedVersion(ValueError):
    pass


@dataclass(frozen=True)
class ProofParams:
    mode: str
    c: float
    delta: float
    boost: Optional[BoostFunction] = None

    def __post_init__(self):
        if self.mode not in ("linear", "pairing"):
            raise ValueError("mode must be 'linear' or 'pairing'")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError("c must lie in [0, 1]")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.mode == "pairing" and self.boost is None:
            raise ValueError("pairing mode needs a boost function")

    def as_dict(self) -> dict:
        return {
            "c": _num(self.c),
            "delta": _num(self.delta),
            "knee": None if self.boost is None else _num(self.boost.knee),
            "slope": None if self.boost is None else _num(self.boost.slope),
        }


@dataclass
class ProofCertificate:
    mode: str
    params: ProofParams
    target: float
    certified_bound: float
    counts: Dict[str, int]
    max_depth: int
    failures: List[Tuple[Tuple[float, float], ...]]
    wall_time: float
    prover_version: str = PROVER_VERSION
    status: str = "certified"
    symmetry: bool = False
    workers: int = 1
    deepest: int = 0
    leaf_digest: str = ""
    leaves: Optional[np.ndarray] = None

    @property
    def success(self) -> bool:
        return self.status == "certified"

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "mode": self.mode,
            "params": self.params.as_dict(),
            "target": _num(self.target),
            "certified_bound": _num(self.certified_bound),
            "counts": {k: int(self.counts.get(k, 0)) for k in OUTCOMES},
            "max_depth": int(self.max_depth),
            "failures": [[[_num(a), _num(b)] for a, b in cube] for cube in self.failures],
            "wall_time": _num(self.wall_time) if include_timing else None,
            "prover_version": self.prover_version,
            "status": self.status,
            "symmetry": self.symmetry,
            "workers": int(self.workers),
            "deepest": int(self.deepest),
            "leaf_digest": self.leaf_digest,
        }
        if self.leaves is not None:
            d["leaves"] = [[int(v) for v in row] for row in self.leaves]
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ProofCertificate":
        p = d["params"]
        boost = None if p.get("knee") is None else BoostFunction(float(p["knee"]), float(p["slope"]))
        params = ProofParams(d["mode"], float(p["c"]), float(p["delta"]), boost)
        leaves = None
        if d.get("leaves") is not None:
            leaves = np.array(d["leaves"], dtype=np.uint64).reshape(-1, 4)
        return cls(
            mode=d["mode"],
            params=params,
            target=float(d["target"]),
            certified_bound=float(d["certified_bound"]),
            counts={k: int(v) for k, v in d["counts"].items()},
            max_depth=int(d["max_depth"]),
            failures=[tuple((float(a), float(b)) for a, b in cube) for cube in d["failures"]],
            wall_time=float(d["wall_time"]) if d.get("wall_time") is not None else 0.0,
            prover_version=d["prover_version"],
            status=d["status"],
            symmetry=bool(d.get("symmetry", False)),
            workers=int(d.get("workers", 1)),
            deepest=int(d.get("deepest", 0)),
            leaf_digest=d.get("leaf_digest", ""),
            leaves=leaves,
        )

    @classmethod
    def from_json(cls, text: str) -> "ProofCertificate":
        return cls.from_dict(json.loads(text))


def _num(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# interval helpers for the vectorised kernels


def _iv(lo, hi=None) -> Interval:
    return Interval(lo, lo if hi is None else hi)


def _scale(k: float, a: Interval) -> Interval:
    return ic.mul(Interval.point(k), a)


def _maxabs(a: Interval):
    return np.maximum(np.abs(a.lo), np.abs(a.hi))


def _where(mask, a: Interval, b: Interval) -> Interval:
    return Interval(np.where(mask, a.lo, b.lo), np.where(mask, a.hi, b.hi))


def _take(a: Interval, idx) -> Interval:
    return Interval(np.asarray(a.lo)[idx], np.asarray(a.hi)[idx])


def _tighten(a: Interval, b: Interval) -> Interval:
    """Intersection of two enclosures of the same quantity."""
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    return Interval(np.minimum(lo, hi), hi)


# ---------------------------------------------------------------------------
# cube centres


@dataclass
class _Centre:
    """A point of cube and polytope used by the mean-value bound."""

    ok: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    p: np.ndarray
    rt: Interval
    dist: Tuple[np.ndarray, np.ndarray, np.ndarray]


def _centres(m1: Interval, m2: Interval, p: Interval) -> _Centre:
    cm1 = 0.5 * m1.lo + 0.5 * m1.hi
    cm2 = 0.5 * m2.lo + 0.5 * m2.hi
    # rho must satisfy -1 + |mu1 + mu2| <= rho <= 1 - |mu1 - mu2|
    ssum = np.maximum(np.abs(up(cm1 + cm2)), np.abs(down(cm1 + cm2)))
    lo_feas = up(-1.0 + ssum)
    hi_feas = down(1.0 - up(np.maximum(np.abs(up(cm1 - cm2)), np.abs(down(cm1 - cm2)))))
    plo = np.maximum(lo_feas, p.lo)
    phi = np.minimum(hi_feas, p.hi)
    ok = plo <= phi
    cp = np.clip(0.5 * p.lo + 0.5 * p.hi, plo, np.where(ok, phi, plo))
    cp = np.where(ok, cp, 0.5 * p.lo + 0.5 * p.hi)
    rt = tilde_rho_box(_iv(cm1), _iv(cm2), _iv(cp))
    dist = tuple(
        up(np.maximum(c - a.lo, a.hi - c)) for c, a in ((cm1, m1), (cm2, m2), (cp, p))
    )
    return _Centre(ok, cm1, cm2, cp, rt, dist)


# ---------------------------------------------------------------------------
# alpha lower bound over one box of (configuration, bias) space


def _corner_bounds(p: Interval, rt: Interval, r1: Interval, r2: Interval):
    """(alpha_lo, N enclosure) from the monotone corner evaluation."""
    t1 = quantile_of_bias(r1)
    t2 = quantile_of_bias(r2)
    _, g_hi = gamma_enclosure(t1.hi, t2.hi, rt.hi)
    g_lo, _ = gamma_enclosure(t1.lo, t2.lo, rt.lo)
    lam_hi = up(up(2.0 * g_hi) + up(0.5 * up(r1.hi + r2.hi)))
    lam_lo = down(down(2.0 * g_lo) + down(0.5 * down(r1.lo + r2.lo)))
    n_lo = np.clip(down(1.0 - lam_hi), 0.0, 1.0)
    n_hi = np.clip(up(1.0 - lam_lo), n_lo, 1.0)
    den = ic.sub(_ONE, p)
    a_lo = down(2.0 * n_lo / den.hi)
    a_hi = up(2.0 * n_hi / den.lo)
    return a_lo, a_hi, Interval(n_lo, n_hi), t1, t2


def _alpha_at_centre(cen: _Centre, rc1: Interval, rc2: Interval) -> np.ndarray:
    t1 = quantile_of_bias(rc1)
    t2 = quantile_of_bias(rc2)
    _, g_hi = gamma_enclosure(t1.hi, t2.hi, cen.rt.hi)
    lam_hi = up(up(2.0 * g_hi) + up(0.5 * up(rc1.hi + rc2.hi)))
    n_lo = np.clip(down(1.0 - lam_hi), 0.0, 1.0)
    return down(2.0 * n_lo / up(1.0 - cen.p))


def _alpha_box_lower(m1, m2, p, rt, r1, r2, jac, rc, cen: _Centre, need=None):
    """Lower bound of alpha over cube x r1 x r2 (vectorised).

    jac[i] is None when r_i varies freely over its interval, or a pair of
    intervals (d r_i / d mu1, d r_i / d mu2) when r_i is a function of mu;
    rc[i] then encloses that function at the centre.
    """
    corner, _, N, t1, t2 = _corner_bounds(p, rt, r1, r2)
    out = corner.copy()
    if need is None:
        need = np.ones(out.shape, dtype=bool)
    need = need & cen.ok
    if not np.any(need):
        return out
    idx = np.nonzero(need)[0]
    sel = lambda a: _take(a, idx)
    m1s, m2s, ps, rts, r1s, r2s, Ns = map(sel, (m1, m2, p, rt, r1, r2, N))
    t1s, t2s = sel(t1), sel(t2)
    finite = np.isfinite(t1s.lo) & np.isfinite(t1s.hi) & np.isfinite(t2s.lo) & np.isfinite(t2s.hi)
    t1s = Interval(np.where(finite, t1s.lo, 0.0), np.where(finite, t1s.hi, 0.0))
    t2s = Interval(np.where(finite, t2s.lo, 0.0), np.where(finite, t2s.hi, 0.0))

    s2 = ic.sub(_ONE, ic.sqr(rts))
    s_ok = s2.lo > 0
    s2 = Interval(np.where(s_ok, s2.lo, 0.5), np.where(s_ok, np.maximum(s2.hi, s2.lo), 0.5))
    s = ic.sqrt(s2)
    s = Interval(np.maximum(s.lo, 1e-300), s.hi)

    # density of the bivariate normal: dLambda/drho~ = 2 phi_2
    e_num = ic.sub(ic.add(ic.sqr(t1s), ic.sqr(t2s)), _scale(2.0, ic.mul(rts, ic.mul(t1s, t2s))))
    e_num = Interval(np.maximum(e_num.lo, 0.0), np.maximum(e_num.hi, 0.0))
    e = ic.div(e_num, s2)
    ex = ic.exp(_iv(-0.5 * e.lo))
    dens = up(up(ex.hi * _INV_2PI) / s.lo)
    dL_drt = Interval(np.zeros_like(dens), up(2.0 * dens))
    # dLambda/dr1 = 1/2 - Phi((t2 - rho~ t1)/s)
    ph1 = std_normal_cdf(ic.div(ic.sub(t2s, ic.mul(rts, t1s)), s))
    ph2 = std_normal_cdf(ic.div(ic.sub(t1s, ic.mul(rts, t2s)), s))
    dL_dr1 = Interval(down(0.5 - ph1.hi), up(0.5 - ph1.lo))
    dL_dr2 = Interval(down(0.5 - ph2.hi), up(0.5 - ph2.lo))

    om1 = ic.sub(_ONE, ic.sqr(m1s))
    om2 = ic.sub(_ONE, ic.sqr(m2s))
    D = ic.sqrt(ic.mul(om1, om2))
    drt_dm1 = _tighten(
        ic.div(ic.sub(ic.mul(m1s, ps), m2s), ic.mul(om1, D)),
        ic.sub(ic.div(ic.mul(rts, m1s), om1), ic.div(m2s, D)),
    )
    drt_dm2 = _tighten(
        ic.div(ic.sub(ic.mul(m2s, ps), m1s), ic.mul(om2, D)),
        ic.sub(ic.div(ic.mul(rts, m2s), om2), ic.div(m1s, D)),
    )
    drt_dp = ic.div(_ONE, D)
    den = ic.sub(_ONE, ps)

    a1 = ic.mul(dL_drt, drt_dm1)
    a2 = ic.mul(dL_drt, drt_dm2)
    slack = np.zeros(len(idx))
    dists = [d[idx] for d in cen.dist]
    for dL, J, r in ((dL_dr1, jac[0], r1s), (dL_dr2, jac[1], r2s)):
        if J is None:
            g = up(2.0 * up(_maxabs(dL) / den.lo))
            rmid = 0.5 * r.lo + 0.5 * r.hi
            slack = up(slack + up(g * up(np.maximum(rmid - r.lo, r.hi - rmid))))
        else:
            a1 = ic.add(a1, ic.mul(dL, sel(J[0])))
            a2 = ic.add(a2, ic.mul(dL, sel(J[1])))
    g1 = up(2.0 * up(_maxabs(a1) / den.lo))
    g2 = up(2.0 * up(_maxabs(a2) / den.lo))
    gp = ic.sub(
        ic.div(_scale(2.0, Ns), ic.sqr(den)),
        ic.div(_scale(2.0, ic.mul(dL_drt, drt_dp)), den),
    )
    slack = up(slack + up(g1 * dists[0]))
    slack = up(slack + up(g2 * dists[1]))
    slack = up(slack + up(_maxabs(gp) * dists[2]))

    # centre value; free coordinates sit at the midpoint of their interval
    cen_s = _Centre(cen.ok[idx], cen.m1[idx], cen.m2[idx], cen.p[idx], sel(cen.rt), tuple(dists))
    rcs = []
    for r, J, c in ((r1s, jac[0], rc[0]), (r2s, jac[1], rc[1])):
        if J is None:
            rcs.append(_iv(0.5 * r.lo + 0.5 * r.hi))
        else:
            rcs.append(sel(c))
    a_c = _alpha_at_centre(cen_s, rcs[0], rcs[1])
    mv = down(a_c - slack)
    valid = finite & s_ok & np.isfinite(mv)
    out[idx] = np.where(valid, np.maximum(out[idx], mv), out[idx])
    return out


# ---------------------------------------------------------------------------
# mode-specific cube bounds


def _linear_lower(m1, m2, p, rt, cen, c, need=None):
    cI = Interval.point(c)
    zero = Interval(np.zeros(len(m1)), np.zeros(len(m1)))
    cc = Interval(np.full(len(m1), c), np.full(len(m1), c))
    r1 = ic.intersect(ic.mul(cI, m1), -1.0, 1.0)
    r2 = ic.intersect(ic.mul(cI, m2), -1.0, 1.0)
    rc1 = ic.mul(cI, _iv(cen.m1))
    rc2 = ic.mul(cI, _iv(cen.m2))
    return _alpha_box_lower(m1, m2, p, rt, r1, r2, ((cc, zero), (zero, cc)), (rc1, rc2), cen, need)


@dataclass
class _Mag:
    """A bias magnitude as a function of |mu1|, |mu2| over a cube: value
    range, derivative in its own |mu| and in the other |mu|, and its value
    at the centre."""

    val: Interval
    dself: Interval
    dother: Interval
    centre: Interval


def _magnitudes(u, uc, b, bc, c: float, f: BoostFunction):
    """Weak lower, upper and strong lower magnitude for one coordinate."""
    n = len(u.lo)
    cI = Interval.point(c)
    kI = ic.sub(_ONE, cI)
    zero = Interval(np.zeros(n), np.zeros(n))
    cc = Interval(np.full(n, c), np.full(n, c))
    weak = _Mag(ic.mul(cI, u), cc, zero, ic.mul(cI, uc))
    fr = f.slope_range(u)
    upper = _Mag(
        ic.add(ic.mul(cI, u), ic.mul(kI, f.interval(u))),
        ic.add(cc, ic.mul(kI, fr)),
        zero,
        ic.add(ic.mul(cI, uc), ic.mul(kI, f.interval(uc))),
    )
    fb = f.slope_range(b)
    fb = Interval(np.zeros(n), fb.hi)
    strong = _Mag(
        ic.add(ic.mul(cI, u), ic.mul(kI, f.interval(b))),
        ic.add(cc, ic.mul(kI, fb)),
        ic.mul(kI, fb),
        ic.add(ic.mul(cI, uc), ic.mul(kI, f.interval(bc))),
    )
    return weak, upper, strong


def _signed(s, low: _Mag, high: _Mag, sgn_prod):
    """Signed low and high endpoints of a bias interval: value, (dself,
    dcross) and centre value."""

    def neg(m: _Mag) -> _Mag:
        return _Mag(ic.neg(m.val), m.dself, m.dother, ic.neg(m.centre))

    def pick(a: _Mag, b: _Mag) -> _Mag:
        pos = s > 0
        return _Mag(_where(pos, a.val, b.val), _where(pos, a.dself, b.dself),
                    _where(pos, a.dother, b.dother), _where(pos, a.centre, b.centre))

    A = pick(low, neg(high))
    B = pick(high, neg(low))
    out = []
    for E in (A, B):
        cross = ic.mul(Interval(sgn_prod, sgn_prod), E.dother)
        out.append((E.val, E.dself, cross, E.centre))
    return out


def _g_range(x: Interval, rt: Interval) -> Interval:
    """Enclosure of g(x) = 1 - 2 Phi(Phi^-1((1-x)/2) / rho~) over x and
    rho~ in (0, rt.hi]."""
    t = quantile_of_bias(x)
    rl = np.maximum(rt.lo, 0.0)
    rh = np.maximum(rt.hi, 1e-300)
    zs = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for tv in (t.lo, t.hi):
            for rv in (rl, rh):
                q = tv / rv
                q = np.where(rv == 0, np.where(tv == 0, 0.0, np.sign(tv) * np.inf), q)
                zs.append(np.where(np.isnan(q), 0.0, q))
    zlo = down(np.minimum.reduce(zs))
    zhi = up(np.maximum.reduce(zs))
    ph = std_normal_cdf(Interval(zlo, zhi))
    return ic.intersect(Interval(down(1.0 - up(2.0 * ph.hi)), up(1.0 - down(2.0 * ph.lo))), -1.0, 1.0)


def _clamp_range(g: Interval, A: Interval, B: Interval) -> Interval:
    lo = np.minimum(np.maximum(g.lo, A.lo), B.lo)
    hi = np.minimum(np.maximum(g.hi, A.hi), B.hi)
    return Interval(lo, np.maximum(lo, hi))


def _pairing_lower(m1, m2, p, rt, cen, c: float, f: BoostFunction, target=None):
    n = len(m1.lo)
    out = np.full(n, np.inf)
    s1 = np.where(m1.lo >= 0, 1.0, np.where(m1.hi <= 0, -1.0, 0.0))
    s2 = np.where(m2.lo >= 0, 1.0, np.where(m2.hi <= 0, -1.0, 0.0))
    u1, u2 = ic.iabs(m1), ic.iabs(m2)
    alive = np.ones(n, dtype=bool)

    def update(v, mask):
        nonlocal alive
        out[mask] = np.minimum(out[mask], v)
        if target is not None:
            alive &= ~(out <= target)

    # sign of some mu not fixed over the cube: free hull box
    st = (s1 == 0) | (s2 == 0)
    if np.any(st):
        idx = np.nonzero(st)[0]
        sel = lambda a: _take(a, idx)
        hulls = []
        cI = Interval.point(c)
        kI = ic.sub(_ONE, cI)
        for s, u in ((s1[idx], sel(u1)), (s2[idx], sel(u2))):
            top = _iv(u.hi)
            U = ic.add(ic.mul(cI, top), ic.mul(kI, f.interval(top))).hi
            lo_pos = ic.mul(cI, _iv(u.lo)).lo
            lo = np.where(s > 0, lo_pos, -U)
            hi = np.where(s < 0, -lo_pos, U)
            hulls.append(ic.intersect(Interval(lo, hi), -1.0, 1.0))
        cen_s = _sub_centre(cen, idx)
        v = _alpha_box_lower(sel(m1), sel(m2), sel(p), sel(rt), hulls[0], hulls[1], (None, None),
                             (None, None), cen_s)
        update(v, st)

    ns = ~st
    if not np.any(ns):
        return out
    idx = np.nonzero(ns)[0]
    sel = lambda a: _take(a, idx)
    m1s, m2s, ps, rts = sel(m1), sel(m2), sel(p), sel(rt)
    u1s, u2s = sel(u1), sel(u2)
    s1s, s2s = s1[idx], s2[idx]
    cen_s = _sub_centre(cen, idx)
    uc1, uc2 = _iv(np.abs(cen_s.m1)), _iv(np.abs(cen_s.m2))
    b = Interval(np.minimum(u1s.lo, u2s.lo), np.minimum(u1s.hi, u2s.hi))
    bc = _iv(np.minimum(uc1.lo, uc2.lo))
    weak1, upper1, strong1 = _magnitudes(u1s, uc1, b, bc, c, f)
    weak2, upper2, strong2 = _magnitudes(u2s, uc2, b, bc, c, f)
    sp = s1s * s2s
    opp = sp < 0
    rects = [
        (weak1, upper1, weak2, upper2, ~opp),
        (strong1, upper1, weak2, upper2, opp),
        (weak1, upper1, strong2, upper2, opp),
    ]
    pos = rts.hi > 0
    res = np.full(len(idx), np.inf)
    live = np.ones(len(idx), dtype=bool)

    def jac(E, first):
        _, dself, cross, _ = E
        return (dself, cross) if first else (cross, dself)

    for L1, U1, L2, U2, mask in rects:
        A1, B1 = _signed(s1s, L1, U1, sp)
        A2, B2 = _signed(s2s, L2, U2, sp)
        cands = []
        for E1 in (A1, B1):
            for E2 in (A2, B2):
                cands.append((E1[0], E2[0], (jac(E1, True), jac(E2, False)), (E1[3], E2[3]), mask))
        for E1 in (A1, B1):
            gr = _clamp_range(_g_range(E1[0], rts), A2[0], B2[0])
            cands.append((E1[0], gr, (jac(E1, True), None), (E1[3], None), mask & pos))
        for E2 in (A2, B2):
            gr = _clamp_range(_g_range(E2[0], rts), A1[0], B1[0])
            cands.append((gr, E2[0], (None, jac(E2, False)), (None, E2[3]), mask & pos))
        for r1, r2, J, rc, cmask in cands:
            go = cmask & live
            if not np.any(go):
                continue
            k = np.nonzero(go)[0]
            tk = lambda a: None if a is None else _take(a, k)
            Jk = tuple(None if j is None else (tk(j[0]), tk(j[1])) for j in J)
            rck = tuple(tk(x) for x in rc)
            v = _alpha_box_lower(tk(m1s), tk(m2s), tk(ps), tk(rts),
                                 ic.intersect(tk(r1), -1.0, 1.0), ic.intersect(tk(r2), -1.0, 1.0),
                                 Jk, rck, _sub_centre(cen_s, k))
            res[k] = np.minimum(res[k], v)
            if target is not None:
                live &= ~(res <= target)
    out[idx] = res
    return out


def _sub_centre(cen: _Centre, idx) -> _Centre:
    return _Centre(cen.ok[idx], cen.m1[idx], cen.m2[idx], cen.p[idx], _take(cen.rt, idx),
                   tuple(d[idx] for d in cen.dist))


def lower_bounds(lo: np.ndarray, hi: np.ndarray, params: ProofParams, target: Optional[float] = None) -> np.ndarray:
    """Rigorous lower bounds of alpha over cube and smooth polytope.

    ``lo``, ``hi`` are (n, 3) boxes already clipped to the smooth range.
    With ``target`` set, the pairing minimum stops early for cubes already
    known to be at or below the target; their value is then only an upper
    estimate of the lower bound and must not be used as a bound.
    """
    out = np.empty(len(lo))
    for i in range(0, len(lo), CHUNK):
        l, h = lo[i:i + CHUNK], hi[i:i + CHUNK]
        m1, m2, p = (Interval(l[:, k], h[:, k]) for k in range(3))
        if np.any(p.hi >= 1.0):
            raise DegenerateEdge("rho interval reaches 1")
        with np.errstate(all="ignore"):
            rt = ic.intersect(tilde_rho_box(m1, m2, p), -1.0, 1.0)
            cen = _centres(m1, m2, p)
            if params.mode == "linear":
                out[i:i + CHUNK] = _linear_lower(m1, m2, p, rt, cen, params.c)
            else:
                out[i:i + CHUNK] = _pairing_lower(m1, m2, p, rt, cen, params.c, params.boost, target)
    return out


def _midpoints_in_conf(mid: np.ndarray) -> np.ndarray:
    a, b, c = mid[:, 0], mid[:, 1], mid[:, 2]
    forms = (down(down(a + b) + c), down(down(a - b) - c), down(down(-a + b) - c), down(down(-a - b) + c))
    ok = np.ones(len(mid), dtype=bool)
    for fv in forms:
        ok &= fv >= -1.0
    return ok


def _alpha_points_hi(m1, m2, p, r1, r2) -> np.ndarray:
    """Certified upper bounds of alpha at points (r may be intervals)."""
    rt = tilde_rho_box(_iv(m1), _iv(m2), _iv(p))
    lam = lambda_fn(rt, ic.intersect(r1, -1.0, 1.0), ic.intersect(r2, -1.0, 1.0))
    n_hi = np.clip(up(1.0 - lam.lo), 0.0, 1.0)
    return up(2.0 * n_hi / down(1.0 - p))


def upper_at_points(pts: np.ndarray, params: ProofParams) -> np.ndarray:
    """Certified upper bound of the point ratio at configurations of the
    polytope: alpha at r = c mu, or the pairing minimum over biases."""
    m1, m2, p = pts[:, 0], pts[:, 1], pts[:, 2]
    out = np.empty(len(pts))
    with np.errstate(all="ignore"):
        if params.mode == "linear":
            cI = Interval.point(params.c)
            return _alpha_points_hi(m1, m2, p, ic.mul(cI, _iv(m1)), ic.mul(cI, _iv(m2)))
        out[:] = np.inf
        for r1, r2, ok in pairing_candidates(m1, m2, p, params.c, params.boost):
            if not np.any(ok):
                continue
            v = _alpha_points_hi(m1[ok], m2[ok], p[ok], _iv(r1[ok]), _iv(r2[ok]))
            out[ok] = np.minimum(out[ok], v)
    return out


def bound_alpha_on_cube(cube: ConfigCube, mode: str, params: ProofParams) -> Interval:
    """Enclosure [lower, upper] of alpha over cube and smooth polytope.

    The lower end holds for every configuration of the cube in the smooth
    polytope; the upper end is a certified evaluation at one such point
    (the midpoint when it qualifies).  A degenerate cube is a single
    configuration and is enclosed directly, smooth or not.
    """
    if mode != params.mode:
        raise ValueError("mode does not match params")
    lo, hi = cube.bounds()
    if np.all(lo == hi):
        conf = Configuration(*map(float, lo))
        if not in_conf(*lo) or conf.rho >= 1.0:
            return Interval(np.inf, np.inf)
        if mode == "linear":
            return alpha_value(conf, params.c * conf.mu1, params.c * conf.mu2)
        return alpha_cf(conf, params.c, params.boost)
    lim = 1.0 - params.delta
    lo = np.maximum(lo, -lim)[None, :]
    hi = np.minimum(hi, lim)[None, :]
    if np.any(lo > hi) or classify_boxes(lo, hi, params.delta)[0] == 0:
        return Interval(np.inf, np.inf)
    lower = float(lower_bounds(lo, hi, params)[0])
    mid = 0.5 * lo + 0.5 * hi
    if not _midpoints_in_conf(mid)[0]:
        m1, m2, p = (Interval(lo[:, k], hi[:, k]) for k in range(3))
        cen = _centres(m1, m2, p)
        if not cen.ok[0]:
            return Interval(lower, np.inf)
        mid = np.array([[cen.m1[0], cen.m2[0], cen.p[0]]])
    upper = float(upper_at_points(mid, params)[0])
    return Interval(min(lower, upper), upper)


# ---------------------------------------------------------------------------
# subdivision driver


def _mix(x: np.ndarray) -> np.ndarray:
    """splitmix64 finaliser on uint64 arrays."""
    with np.errstate(over="ignore"):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _leaf_hash(depth: int, w0: np.ndarray, w1: np.ndarray, code: int) -> Tuple[int, int]:
    tag = np.uint64((depth << 8) | code)
    h = _mix(_mix(w0 ^ _mix(np.full(w0.shape, tag))) ^ w1)
    h2 = _mix(h ^ np.uint64(0x5851F42D4C957F2D))
    with np.errstate(over="ignore"):
        return int(np.sum(h, dtype=np.uint64)), int(np.sum(h2, dtype=np.uint64))


def _extend(w0, w1, depth, b):
    b = np.uint64(b)
    if depth <= _PATH_DIGITS:
        return w0 * np.uint64(8) + b, w1
    return w0, w1 * np.uint64(8) + b


def _clip(lo, hi, delta):
    lim = 1.0 - delta
    return np.maximum(lo, -lim), np.minimum(hi, lim)


@dataclass
class _RunState:
    counts: Dict[str, int] = field(default_factory=lambda: {k: 0 for k in OUTCOMES})
    digest: List[int] = field(default_factory=lambda: [0, 0])
    failures: list = field(default_factory=list)
    deepest: int = 0
    unresolved_lower: float = math.inf
    leaves: list = field(default_factory=list)
    aborted: bool = False


def _record(state: _RunState, name: str, depth, w0, w1, record: bool):
    n = len(w0)
    if n == 0:
        return
    state.counts[name] += n
    h1, h2 = _leaf_hash(depth, w0, w1, _LEAF_CODES[name])
    state.digest[0] = (state.digest[0] + h1) % 2**64
    state.digest[1] = (state.digest[1] + h2) % 2**64
    if record:
        state.leaves.append(np.stack([np.full(n, depth, dtype=np.uint64), w0, w1,
                                      np.full(n, _LEAF_CODES[name], dtype=np.uint64)], axis=1))


def _run_subtree(args):
    (params, target, max_depth, lo, hi, w0, w1, depth, record, max_failures, progress) = args
    state = _RunState()
    stack = [(depth, lo, hi, w0, w1)]
    t0 = time.time()
    seen = 0
    while stack:
        depth, lo, hi, w0, w1 = stack.pop()
        if len(lo) > CHUNK:
            for i in reversed(range(0, len(lo), CHUNK)):
                stack.append((depth, lo[i:i + CHUNK], hi[i:i + CHUNK], w0[i:i + CHUNK], w1[i:i + CHUNK]))
            continue
        state.deepest = max(state.deepest, depth)
        seen += len(lo)
        lo, hi = _clip(lo, hi, params.delta)
        empty = np.any(lo > hi, axis=1)
        code = np.where(empty, 0, classify_boxes(np.where(empty[:, None], 0.0, lo), np.where(empty[:, None], 0.0, hi), params.delta))
        out = code == 0
        _record(state, "OutsideConf", depth, w0[out], w1[out], record)
        keep = ~out
        lo, hi, w0, w1 = lo[keep], hi[keep], w0[keep], w1[keep]
        if len(lo) == 0:
            continue
        lower = lower_bounds(lo, hi, params, target)
        ok = lower > target
        _record(state, "BoundProved", depth, w0[ok], w1[ok], record)
        und = ~ok
        lo, hi, w0, w1, lower = lo[und], hi[und], w0[und], w1[und], lower[und]
        if len(lo) == 0:
            continue
        mid = 0.5 * lo + 0.5 * hi
        inside = _midpoints_in_conf(mid)
        fail = np.zeros(len(lo), dtype=bool)
        if np.any(inside):
            fail[inside] = upper_at_points(mid[inside], params) < target
        if np.any(fail):
            _record(state, "FailureWitness", depth, w0[fail], w1[fail], record)
            for l, h in zip(lo[fail], hi[fail]):
                state.failures.append(tuple((float(a), float(b)) for a, b in zip(l, h)))
            if len(state.failures) >= max_failures:
                state.aborted = True
                break
        go = ~fail
        lo, hi, w0, w1, lower = lo[go], hi[go], w0[go], w1[go], lower[go]
        if len(lo) == 0:
            continue
        state.unresolved_lower = min(state.unresolved_lower, float(np.min(lower)))
        if depth >= max_depth:
            _record(state, "DepthExhausted", depth, w0, w1, record)
            continue
        state.counts["Inconclusive-split"] += len(lo)
        clo, chi = split_boxes(lo, hi)
        k = len(lo)
        cw0 = np.empty(8 * k, dtype=np.uint64)
        cw1 = np.empty(8 * k, dtype=np.uint64)
        for b in range(8):
            cw0[b * k:(b + 1) * k], cw1[b * k:(b + 1) * k] = _extend(w0, w1, depth + 1, b)
        stack.append((depth + 1, clo, chi, cw0, cw1))
        if progress is not None:
            progress(seen, time.time() - t0)
    return state


def verify(
    mode: str,
    params: ProofParams,
    target: float,
    max_depth: int = DEFAULT_MAX_DEPTH,
    workers: int = 1,
    symmetry: bool = False,
    record_leaves: bool = False,
    max_failures: int = 1,
    progress=None,
) -> ProofCertificate:
    """Subdivide [-1, 1]^3 until every cube is accepted or a failure is found."""
    if mode != params.mode:
        raise ValueError("mode does not match params")
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in (0, 1)")
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    if workers < 1:
        raise ValueError("workers must be positive")
    t0 = time.time()
    root_lo = np.array([[-1.0, -1.0, -1.0]])
    root_hi = np.array([[1.0, 1.0, 1.0]])
    state = _RunState()
    state.counts["Inconclusive-split"] += 1
    clo, chi = split_boxes(*_clip(root_lo, root_hi, params.delta))
    seeds = []
    for b in range(8):
        if symmetry and not (b & 1):
            continue
        w0 = np.array([b], dtype=np.uint64)
        seeds.append((params, target, max_depth, clo[b:b + 1], chi[b:b + 1], w0,
                      np.zeros(1, dtype=np.uint64), 1, record_leaves, max_failures, progress))
    if workers == 1:
        results = []
        for s in seeds:
            results.append(_run_subtree(s))
            if results[-1].aborted:
                break
    else:
        seeds = [s[:-1] + (None,) for s in seeds]
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            results = pool.map(_run_subtree, seeds)
    for r in results:
        for k in OUTCOMES:
            state.counts[k] += r.counts[k]
        state.digest = [(a + b) % 2**64 for a, b in zip(state.digest, r.digest)]
        state.failures.extend(r.failures)
        state.deepest = max(state.deepest, r.deepest)
        state.unresolved_lower = min(state.unresolved_lower, r.unresolved_lower)
        state.leaves.extend(r.leaves)
        state.aborted |= r.aborted
    state.failures.sort()
    if state.failures:
        status = "failure"
    elif state.counts["DepthExhausted"]:
        status = "depth_exhausted"
    else:
        status = "certified"
    if status == "certified":
        bound = target
    else:
        # alpha >= 0 always; a partial run certifies nothing better
        bound = 0.0 if state.aborted else max(0.0, min(target, state.unresolved_lower))
    leaves = None
    if record_leaves:
        leaves = np.concatenate(state.leaves) if state.leaves else np.zeros((0, 4), dtype=np.uint64)
        leaves = leaves[np.lexsort(leaves.T[::-1])]
    return ProofCertificate(
        mode=mode,
        params=params,
        target=target,
        certified_bound=bound,
        counts=state.counts,
        max_depth=max_depth,
        failures=state.failures,
        wall_time=time.time() - t0,
        status=status,
        symmetry=symmetry,
        workers=workers,
        deepest=state.deepest,
        leaf_digest=f"{state.digest[0]:016x}{state.digest[1]:016x}",
        leaves=leaves,
    )


# ---------------------------------------------------------------------------
# replay


def decode_leaf(depth: int, w0: int, w1: int, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Rebuild the (clipped) box of a leaf from its path code."""
    digits = []
    n0 = min(depth, _PATH_DIGITS)
    for k in range(n0):
        digits.append((w0 >> (3 * (n0 - 1 - k))) & 7)
    n1 = depth - n0
    for k in range(n1):
        digits.append((w1 >> (3 * (n1 - 1 - k))) & 7)
    lo = np.array([[-1.0, -1.0, -1.0]])
    hi = np.array([[1.0, 1.0, 1.0]])
    for b in digits:
        lo, hi = _clip(lo, hi, delta)
        clo, chi = split_boxes(lo, hi)
        lo, hi = clo[b:b + 1], chi[b:b + 1]
    return _clip(lo, hi, delta)


def _consistent(cert: ProofCertificate) -> bool:
    c = cert.counts
    if cert.status == "certified":
        return (not cert.failures and c.get("DepthExhausted", 0) == 0 and c.get("FailureWitness", 0) == 0
                and cert.certified_bound == cert.target)
    return cert.certified_bound < cert.target or cert.certified_bound == 0.0


def replay_certificate(cert: ProofCertificate, spot_check_fraction: float, seed: int = 0) -> bool:
    """Re-check a certificate.

    Always checks internal consistency.  With recorded leaves, a random
    fraction of accepted leaves is re-bounded from scratch and the leaf set
    is checked against the counts, the digest and complete coverage.
    Without recorded leaves any positive fraction re-runs the whole proof
    and compares counts and digest.
    """
    if cert.prover_version != PROVER_VERSION:
        raise MismatchedVersion(f"certificate from {cert.prover_version!r}, this is {PROVER_VERSION!r}")
    if not 0.0 <= spot_check_fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    if not _consistent(cert):
        return False
    if spot_check_fraction == 0.0:
        return True
    if cert.leaves is None:
        again = verify(cert.mode, cert.params, cert.target, cert.max_depth, workers=cert.workers,
                       symmetry=cert.symmetry)
        return (again.counts == {k: cert.counts.get(k, 0) for k in OUTCOMES}
                and again.leaf_digest == cert.leaf_digest and again.status == cert.status)
    leaves = cert.leaves.astype(np.uint64)
    # coverage: leaves plus the split cubes tile the root exactly
    if len(leaves):
        dmax = int(leaves[:, 0].max())
        cover = sum(8 ** (dmax - int(d)) for d in leaves[:, 0])
        full = 8 ** dmax if not cert.symmetry else 8 ** dmax // 2
        if cover != full:
            return False
    names = {v: k for k, v in _LEAF_CODES.items()}
    for code, name in names.items():
        if int(np.sum(leaves[:, 3] == code)) != cert.counts.get(name, 0):
            return False
    digest = [0, 0]
    for (d, code) in {(int(a), int(b)) for a, b in zip(leaves[:, 0], leaves[:, 3])}:
        m = (leaves[:, 0] == d) & (leaves[:, 3] == code)
        h1, h2 = _leaf_hash(d, leaves[m, 1], leaves[m, 2], code)
        digest = [(digest[0] + h1) % 2**64, (digest[1] + h2) % 2**64]
    if f"{digest[0]:016x}{digest[1]:016x}" != cert.leaf_digest:
        return False
    accepted = np.nonzero((leaves[:, 3] == 0) | (leaves[:, 3] == 1))[0]
    rng = np.random.default_rng(seed)
    k = int(math.ceil(spot_check_fraction * len(accepted)))
    pick = np.sort(rng.choice(accepted, size=k, replace=False)) if k else accepted[:0]
    for i in pick:
        d, w0, w1, code = (int(v) for v in leaves[i])
        lo, hi = decode_leaf(d, w0, w1, cert.params.delta)
        empty = bool(np.any(lo > hi))
        cls = 0 if empty else int(classify_boxes(lo, hi, cert.params.delta)[0])
        if code == 0:
            if cls != 0:
                return False
        else:
            if cls == 0:
                continue
            if not lower_bounds(lo, hi, cert.params)[0] > cert.target:
                return False
    return True
