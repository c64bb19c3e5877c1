"""Normal distribution helpers: point values and certified enclosures.

Two routes are kept deliberately separate.  The fast float route
(``bvn_cdf``) uses Owen's T function from scipy and feeds the optimizer.
The certified route (``gamma_enclosure`` and friends) integrates

    Gamma = int_{-inf}^{t1} phi(x) Phi((t2 - rho x) / sqrt(1 - rho^2)) dx

by composite Gauss-Legendre quadrature with a rigorous bound on the
discretisation error, and feeds the prover.  The two are cross-checked in
the test-suite.

Scalar normal functions come from ``scipy.special.ndtr`` and ``numpy.exp``;
their relative accuracy is trusted up to ``CDF_REL`` / ``LIBM_ULPS`` and the
results are inflated accordingly.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, ndtr, ndtri, owens_t

from .interval_core import (
    LIBM_ULPS,
    Interval,
    as_interval,
    down,
    intersect,
    up,
    widen_down,
    widen_up,
)

SQRT2PI = math.sqrt(2.0 * math.pi)
INV_SQRT2PI = 1.0 / SQRT2PI

# Trusted relative accuracy of scipy's ndtr (Cephes erf/erfc), with margin.
CDF_REL = 1e-13
# Absolute floor added to every cdf enclosure (covers subnormal results).
CDF_ABS = 1e-300
EPS = np.finfo(float).eps

# Quadrature layout for the certified bivariate CDF.
GL_NODES = 12
GL_PANELS = 8
TRUNC = 9.0  # integration window in x: [-TRUNC, TRUNC]
WINDOW = 9.0  # half-width of the window around the Phi-transition, in y units
CRAMER_K = 1.086435  # |He_k(x)| exp(-x^2/4) <= K sqrt(k!)


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# float route


def pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) * INV_SQRT2PI


def cdf(x):
    return ndtr(x)


def cdf_inv(p):
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("probability outside [0, 1]")
    return ndtri(p)


def bvn_cdf(t1, t2, rho):
    """P[X <= t1, Y <= t2] for standard normals with correlation rho (float).

    Owen's T form; the exact degenerate forms are used at |rho| = 1 and
    infinite thresholds.
    """
    t1, t2, rho = np.broadcast_arrays(
        np.asarray(t1, dtype=float), np.asarray(t2, dtype=float), np.asarray(rho, dtype=float)
    )
    out = np.empty(t1.shape)
    c1, c2 = ndtr(t1), ndtr(t2)
    with np.errstate(all="ignore"):
        s = np.sqrt((1.0 - rho) * (1.0 + rho))
        h = np.where(t1 == 0, 1e-300, t1)
        k = np.where(t2 == 0, 1e-300, t2)
        ah = (k - rho * h) / (h * s)
        ak = (h - rho * k) / (k * s)
        beta = np.where((h * k > 0) | ((h * k == 0) & (h + k >= 0)), 0.0, 0.5)
        val = 0.5 * c1 + 0.5 * c2 - owens_t(h, ah) - owens_t(k, ak) - beta
    frechet_lo = np.maximum(0.0, c1 + c2 - 1.0)
    frechet_hi = np.minimum(c1, c2)
    out[...] = np.clip(val, frechet_lo, frechet_hi)
    out = np.where(rho >= 1.0, frechet_hi, out)
    out = np.where(rho <= -1.0, frechet_lo, out)
    out = np.where(np.isinf(t1) | np.isinf(t2), np.where((t1 == -np.inf) | (t2 == -np.inf), 0.0, frechet_hi), out)
    return out[()] if out.ndim == 0 else out


def gamma_point(rho_t, q1, q2):
    """Gamma_rho(q1, q2) in plain floating point."""
    return bvn_cdf(ndtri(q1), ndtri(q2), rho_t)


def lambda_point(rho_t, r1, r2):
    """Probability that two thresholded projections agree (float)."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    return 2.0 * gamma_point(rho_t, 0.5 * (1.0 - r1), 0.5 * (1.0 - r2)) + 0.5 * (r1 + r2)


def cut_point(rho_t, r1, r2):
    """1 - Lambda, computed from the two disagreement quadrants.

    Avoids the cancellation in 1 - Lambda when Lambda is close to 1.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    t1 = ndtri(0.5 * (1.0 - r1))
    t2 = ndtri(0.5 * (1.0 - r2))
    rho_t = np.asarray(rho_t, dtype=float)
    return bvn_cdf(t1, -t2, -rho_t) + bvn_cdf(-t1, t2, -rho_t)


def g_point(rho_t, x):
    """Worst-bias partner g(x) = 1 - 2 Phi(Phi^-1((1-x)/2) / rho) for rho > 0."""
    rho_t = np.asarray(rho_t, dtype=float)
    if np.any(rho_t <= 0):
        raise DomainError("g is defined for rho_t > 0 only")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = ndtri(0.5 * (1.0 - np.asarray(x, dtype=float))) / rho_t
    z = np.where(np.isnan(z), 0.0, z)
    return np.clip(1.0 - 2.0 * ndtr(z), -1.0, 1.0)


# ---------------------------------------------------------------------------
# certified scalar enclosures


def _cdf_bounds(x):
    """Certified (lo, hi) of Phi at float points x (inf allowed)."""
    v = ndtr(np.asarray(x, dtype=float))
    lo = np.clip(v * (1.0 - CDF_REL) - CDF_ABS, 0.0, 1.0)
    hi = np.clip(v * (1.0 + CDF_REL) + CDF_ABS, 0.0, 1.0)
    return lo, hi


def _pdf_bounds(x):
    """Certified (lo, hi) of phi at float points x."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    sq_lo, sq_hi = down(ax * ax), up(ax * ax)
    with np.errstate(over="ignore"):
        e_lo = widen_down(np.exp(-0.5 * sq_hi), LIBM_ULPS)
        e_hi = widen_up(np.exp(-0.5 * sq_lo), LIBM_ULPS)
    c_lo, c_hi = down(INV_SQRT2PI), up(INV_SQRT2PI)
    return np.maximum(down(e_lo * c_lo), 0.0), up(e_hi * c_hi)


def std_normal_pdf(x) -> Interval:
    """Enclosure of phi over a point or interval (decreasing in |x|)."""
    x = as_interval(x)
    near = np.where((x.lo <= 0) & (x.hi >= 0), 0.0, np.minimum(np.abs(x.lo), np.abs(x.hi)))
    far = np.maximum(np.abs(x.lo), np.abs(x.hi))
    lo, _ = _pdf_bounds(far)
    _, hi = _pdf_bounds(near)
    return Interval(lo, hi)


def std_normal_cdf(x) -> Interval:
    x = as_interval(x)
    lo, _ = _cdf_bounds(x.lo)
    _, hi = _cdf_bounds(x.hi)
    return Interval(lo, hi)


def _quantile_bounds(p):
    """Certified (lo, hi) with Phi(lo) <= p <= Phi(hi) for float p in [0, 1]."""
    p = np.asarray(p, dtype=float)
    upper = p > 0.5
    if np.any(upper):
        # 1 - p is exact here, and Phi is accurate in relative terms in the
        # lower tail, so reflect.
        lo, hi = _quantile_lower_half(np.where(upper, 1.0 - p, p))
        return np.where(upper, -hi, lo), np.where(upper, -lo, hi)
    return _quantile_lower_half(p)


def _quantile_lower_half(p):
    t = ndtri(p)
    lo = np.array(t, dtype=float, copy=True)
    hi = np.array(t, dtype=float, copy=True)
    finite = np.isfinite(t)
    step = np.where(finite, 8.0 * EPS * np.maximum(np.abs(t), 1.0), 0.0)
    # below the absolute slack of Phi no finite lower end can be certified
    tiny = finite & (p <= 2.0 * CDF_ABS)
    lo = np.where(tiny, -np.inf, lo)
    # push lo down until Phi_hi(lo) <= p, and hi up until Phi_lo(hi) >= p
    for _ in range(60):
        _, c_hi = _cdf_bounds(lo)
        bad = finite & ~tiny & (c_hi > p)
        if not np.any(bad):
            break
        lo = np.where(bad, lo - step, lo)
        step = np.where(bad, step * 4.0, step)
    else:
        raise RuntimeError("quantile enclosure did not converge")
    step = np.where(finite, 8.0 * EPS * np.maximum(np.abs(t), 1.0), 0.0)
    for _ in range(60):
        c_lo, _ = _cdf_bounds(hi)
        bad = finite & (c_lo < p)
        if not np.any(bad):
            break
        hi = np.where(bad, hi + step, hi)
        step = np.where(bad, step * 4.0, step)
    else:
        raise RuntimeError("quantile enclosure did not converge")
    # p in {0, 1}: ndtri gives -inf / +inf which are exact markers
    return lo, hi


def std_normal_cdf_inv(p) -> Interval:
    """Enclosure of Phi^-1 over a point or interval of probabilities.

    p = 0 and p = 1 map to the -inf / +inf half-line markers.
    """
    p = as_interval(p)
    if np.any((p.lo < 0) | (p.hi > 1)):
        raise DomainError("probability outside [0, 1]")
    lo, _ = _quantile_bounds(p.lo)
    _, hi = _quantile_bounds(p.hi)
    return Interval(lo, hi)


# ---------------------------------------------------------------------------
# certified bivariate CDF


@lru_cache(maxsize=None)
def _gl_rule(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return x, w


@lru_cache(maxsize=None)
def _gl_error_constants(m: int):
    """log of the Gauss-Legendre remainder factor and the derivative-bound
    coefficients for n = 2m.

    Remainder on [u, u+w]:  w^(2m+1) (m!)^4 / ((2m+1) ((2m)!)^3) * max|h^(2m)|.
    For h(x) = phi(x) Phi(a + b x), Leibniz plus Cramer's inequality
    |phi^(k)(x)| <= K sqrt(k!) exp(-x^2/4) / sqrt(2 pi) gives

        |h^(n)| <= exp(-xm^2/4) [K sqrt(n!)/sqrt(2pi)
                                 + exp(-ym^2/4) sum_j c_j |b|^j]

    with c_j = C(n,j) K^2 sqrt((n-j)! (j-1)!) / (2 pi), j >= 1, where xm and
    ym are the smallest |x| and |a + b x| on the panel.
    """
    n = 2 * m
    log_rem = 4 * gammaln(m + 1) - math.log(2 * m + 1) - 3 * gammaln(n + 1)
    j = np.arange(1, n + 1)
    log_c = (
        gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
        + 0.5 * gammaln(n - j + 1) + 0.5 * gammaln(j)
        + 2 * math.log(CRAMER_K) - math.log(2 * math.pi)
    )
    log_c0 = math.log(CRAMER_K) + 0.5 * gammaln(n + 1) - 0.5 * math.log(2 * math.pi)
    return log_rem, log_c0, j, log_c


def _phi_arg_bounds(y, dy):
    lo, _ = _cdf_bounds(y - dy)
    _, hi = _cdf_bounds(y + dy)
    return lo, hi


def _region(x0, x1, a, b, dab):
    """Enclose int_{x0}^{x1} phi(x) Phi(a + b x) dx using monotonicity of the
    second factor: [dPhi_lo * F_min, dPhi_hi * F_max]."""
    c0lo, c0hi = _cdf_bounds(x0)
    c1lo, c1hi = _cdf_bounds(x1)
    mass_lo = np.maximum(c1lo - c0hi, 0.0)
    mass_hi = np.maximum(c1hi - c0lo, 0.0)
    with np.errstate(invalid="ignore", over="ignore"):
        y0 = np.where(np.isinf(x0), np.where(b == 0, a, -np.inf * np.sign(b)), a + b * x0)
        y1 = a + b * x1
    e0 = np.where(np.isfinite(y0), dab * (1.0 + np.abs(np.where(np.isfinite(x0), x0, 0.0))), 0.0)
    e1 = dab * (1.0 + np.abs(x1))
    f0lo, f0hi = _phi_arg_bounds(y0, e0)
    f1lo, f1hi = _phi_arg_bounds(y1, e1)
    flo = np.minimum(f0lo, f1lo)
    fhi = np.maximum(f0hi, f1hi)
    empty = ~(x1 > x0)
    return np.where(empty, 0.0, down(mass_lo * flo)), np.where(empty, 0.0, up(mass_hi * fhi))


def gamma_enclosure(t1, t2, rho):
    """Certified (lo, hi) of P[X <= t1, Y <= t2] at float arguments.

    t1, t2 may be +-inf.  rho in [-1, 1]; |rho| = 1 uses the exact
    degenerate forms.  Vectorised over broadcast inputs.
    """
    t1, t2, rho = np.broadcast_arrays(
        np.asarray(t1, dtype=float), np.asarray(t2, dtype=float), np.asarray(rho, dtype=float)
    )
    shape = t1.shape
    t1, t2, rho = t1.ravel(), t2.ravel(), rho.ravel()
    if np.any((rho < -1) | (rho > 1)):
        raise DomainError("correlation outside [-1, 1]")
    c1lo, c1hi = _cdf_bounds(t1)
    c2lo, c2hi = _cdf_bounds(t2)
    fr_lo = np.maximum(0.0, down(c1lo + c2lo) - 1.0)
    fr_lo = np.maximum(0.0, down(fr_lo))
    fr_hi = np.minimum(c1hi, c2hi)
    lo = fr_lo.copy()
    hi = fr_hi.copy()

    pos = rho >= 1.0
    lo[pos] = np.minimum(c1lo, c2lo)[pos]
    neg = rho <= -1.0
    hi[neg] = np.maximum(0.0, up(c1hi + c2hi) - 1.0)[neg]
    hi = np.maximum(hi, lo)

    gen = ~pos & ~neg & np.isfinite(t1) & np.isfinite(t2)
    if np.any(gen):
        glo, ghi = _gamma_quadrature(t1[gen], t2[gen], rho[gen])
        lo[gen] = np.maximum(lo[gen], glo)
        hi[gen] = np.minimum(hi[gen], ghi)
    # infinite thresholds reduce to a marginal
    inf1 = t1 == np.inf
    inf2 = t2 == np.inf
    lo = np.where(inf1, c2lo, np.where(inf2, c1lo, lo))
    hi = np.where(inf1, c2hi, np.where(inf2, c1hi, hi))
    zero = (t1 == -np.inf) | (t2 == -np.inf)
    lo = np.where(zero, 0.0, lo)
    hi = np.where(zero, 0.0, hi)
    lo = np.minimum(lo, hi)
    return lo.reshape(shape), hi.reshape(shape)


def _gamma_quadrature(t1, t2, rho):
    m, P = GL_NODES, GL_PANELS
    s = np.sqrt((1.0 - rho) * (1.0 + rho))
    a = t2 / s
    b = -rho / s
    absb = np.abs(b)
    # relative rounding error of a and b (a few ulps each) in absolute terms
    dab = 8.0 * EPS * (np.abs(a) + absb + 1.0)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        xs = np.where(rho != 0, t2 / rho, 0.0)
        half = np.where(absb > 0, WINDOW / absb, np.inf)
        wlo, whi = xs - half, xs + half
    # a subnormal rho gives inf - inf; the window then covers everything
    wide = np.isnan(wlo) | np.isnan(whi)
    L = np.maximum(-TRUNC, np.where(wide, -np.inf, wlo))
    U = np.minimum(np.minimum(t1, TRUNC), np.where(wide, np.inf, whi))
    has = U > L
    L = np.where(has, L, t1)
    U = np.where(has, U, t1)

    left_lo, left_hi = _region(np.full_like(t1, -np.inf), L, a, b, dab)
    right_lo, right_hi = _region(U, t1, a, b, dab)

    xg, wg = _gl_rule(m)
    width = (U - L) / P  # panel width
    # node positions: (npts, P, m)
    pstart = L[:, None] + width[:, None] * np.arange(P)[None, :]
    x = pstart[:, :, None] + (0.5 * width)[:, None, None] * (xg + 1.0)[None, None, :]
    y = a[:, None, None] + b[:, None, None] * x
    fx = pdf(x)
    Fy = ndtr(y)
    h = fx * Fy
    wts = (0.5 * width)[:, None, None] * wg[None, None, :]
    total = np.sum(wts * h, axis=(1, 2))

    # floating-point slack: node and argument rounding, library accuracy,
    # summation.
    dx = 4.0 * EPS * (np.abs(L) + np.abs(U) + 1.0)
    dy = dab[:, None, None] * (1.0 + np.abs(x)) + absb[:, None, None] * dx[:, None, None] + 4.0 * EPS * np.abs(y)
    node_err = h * (CDF_REL + 4.0 * EPS * (1.0 + x * x) + 1e-15) + fx * INV_SQRT2PI * dy
    node_err += dx[:, None, None] * (0.25 + 0.4 * absb[:, None, None]) * 1.01
    absum = np.sum(wts * np.abs(h), axis=(1, 2))
    round_err = np.sum(wts * node_err, axis=(1, 2)) + (P * m + 4) * EPS * absum + 1e-300

    # discretisation error per panel
    log_rem, log_c0, j, log_c = _gl_error_constants(m)
    pend = pstart + width[:, None]
    xm = np.where((pstart <= 0) & (pend >= 0), 0.0, np.minimum(np.abs(pstart), np.abs(pend)))
    y0 = a[:, None] + b[:, None] * pstart
    y1 = a[:, None] + b[:, None] * pend
    ym = np.where(y0 * y1 <= 0, 0.0, np.minimum(np.abs(y0), np.abs(y1)))
    ym = np.maximum(ym - dab[:, None] * (1.0 + np.abs(pstart) + np.abs(pend)), 0.0)
    with np.errstate(divide="ignore"):
        logb = np.log(absb)
    # log sum_j c_j |b|^j via log-sum-exp
    terms = log_c[None, :] + j[None, :] * logb[:, None]
    log_s1 = np.where(absb > 0, np.logaddexp.reduce(terms, axis=1), -np.inf)
    with np.errstate(divide="ignore"):
        logw = np.log(width)
    log_bound = (
        (2 * m + 1) * logw[:, None] + log_rem - 0.25 * xm * xm
        + np.logaddexp(log_c0, -0.25 * ym * ym + log_s1[:, None])
    )
    disc = np.sum(np.exp(log_bound), axis=1) * 1.0001

    err = disc + round_err
    qlo = down(total - err)
    qhi = up(total + err)
    qlo = np.where(has, qlo, 0.0)
    qhi = np.where(has, qhi, 0.0)
    return down(down(qlo + left_lo) + right_lo), up(up(qhi + left_hi) + right_hi)


def bivariate_cdf(rho_t, q1, q2) -> Interval:
    """Enclosure of Gamma_rho(q1, q2) = P[X <= Phi^-1(q1), Y <= Phi^-1(q2)].

    Interval arguments are handled by monotonicity: Gamma is nondecreasing
    in q1, q2 and rho (Slepian), so the enclosure comes from two corners.
    """
    rho_t, q1, q2 = as_interval(rho_t), as_interval(q1), as_interval(q2)
    if np.any((rho_t.lo < -1) | (rho_t.hi > 1)):
        raise DomainError("rho_t outside [-1, 1]")
    if np.any((q1.lo < 0) | (q1.hi > 1) | (q2.lo < 0) | (q2.hi > 1)):
        raise DomainError("probability outside [0, 1]")
    t1lo, _ = _quantile_bounds(q1.lo)
    _, t1hi = _quantile_bounds(q1.hi)
    t2lo, _ = _quantile_bounds(q2.lo)
    _, t2hi = _quantile_bounds(q2.hi)
    lo, _ = gamma_enclosure(t1lo, t2lo, rho_t.lo)
    _, hi = gamma_enclosure(t1hi, t2hi, rho_t.hi)
    # exact values at q = 0 or 1
    lo = np.where((q1.lo == 0) | (q2.lo == 0), 0.0, lo)
    return Interval(np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0))


def gamma_t_interval(t1: Interval, t2: Interval, rho_t: Interval) -> Interval:
    """Enclosure of P[X <= t1, Y <= t2] over threshold/correlation boxes."""
    lo, _ = gamma_enclosure(t1.lo, t2.lo, rho_t.lo)
    _, hi = gamma_enclosure(t1.hi, t2.hi, rho_t.hi)
    return Interval(lo, np.maximum(hi, lo))


def quantile_of_bias(r: Interval) -> Interval:
    """Enclosure of Phi^-1((1 - r)/2); decreasing in r."""
    q = Interval(np.maximum(down(0.5 * down(1.0 - r.hi)), 0.0), np.minimum(up(0.5 * up(1.0 - r.lo)), 1.0))
    lo, _ = _quantile_bounds(q.lo)
    _, hi = _quantile_bounds(q.hi)
    return Interval(lo, hi)


def lambda_fn(rho_t, r1, r2) -> Interval:
    """Enclosure of Lambda = 2 Gamma((1-r1)/2, (1-r2)/2) + (r1 + r2)/2.

    Lambda is increasing in rho; in r it is not monotone, so interval r
    arguments are split into the Gamma part (decreasing in each r) and the
    linear part (increasing).  Tight for point arguments.
    """
    rho_t, r1, r2 = as_interval(rho_t), as_interval(r1), as_interval(r2)
    if np.any((r1.lo < -1) | (r1.hi > 1) | (r2.lo < -1) | (r2.hi > 1)):
        raise DomainError("bias outside [-1, 1]")
    t1 = quantile_of_bias(r1)
    t2 = quantile_of_bias(r2)
    g = gamma_t_interval(t1, t2, rho_t)
    lin_lo = down(0.5 * down(r1.lo + r2.lo))
    lin_hi = up(0.5 * up(r1.hi + r2.hi))
    lo = down(down(2.0 * g.lo) + lin_lo)
    hi = up(up(2.0 * g.hi) + lin_hi)
    return intersect(Interval(lo, np.maximum(hi, lo)), 0.0, 1.0)


def g_threshold(rho_t, x) -> Interval:
    """Enclosure of g(x) = 1 - 2 Phi(Phi^-1((1-x)/2) / rho), rho in (0, 1].

    g is increasing in x; in rho it is monotone on each sign of x, so the
    four corners bound it.
    """
    rho_t, x = as_interval(rho_t), as_interval(x)
    if np.any(rho_t.lo <= 0):
        raise DomainError("g is defined for rho_t > 0 only")
    t = quantile_of_bias(x)
    # z = t / rho over the box; rho > 0
    with np.errstate(over="ignore", invalid="ignore"):
        zs = [np.asarray(tt) / np.asarray(rr) for tt in (t.lo, t.hi) for rr in (rho_t.lo, rho_t.hi)]
    zs = [np.where(np.isnan(z), 0.0, z) for z in zs]
    zlo = down(np.minimum(np.minimum(zs[0], zs[1]), np.minimum(zs[2], zs[3])))
    zhi = up(np.maximum(np.maximum(zs[0], zs[1]), np.maximum(zs[2], zs[3])))
    _, chi = _cdf_bounds(zhi)
    clo, _ = _cdf_bounds(zlo)
    return intersect(Interval(down(1.0 - 2.0 * chi), up(1.0 - 2.0 * clo)), -1.0, 1.0)
