from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxbisect import interval_core as ic
from maxbisect.gaussian import std_normal_cdf
from maxbisect.interval_core import Interval

N_TRIALS = 1_000_000


def _encloses(r: Interval, lo, hi, slack=1e-14):
    return r.lo <= lo and r.hi >= hi and r.lo >= lo - slack * max(1, abs(lo)) and r.hi <= hi + slack * max(1, abs(hi))


def test_add_exact_endpoints():
    assert _encloses(Interval(1, 2) + Interval(3, 4), 4, 6)
    r = Interval(0, 0) + Interval(-0.25, 0.75)
    assert _encloses(r, -0.25, 0.75)


def test_add_widens_non_representable():
    r = Interval.point(0.1) + Interval.point(0.2)
    assert r.lo < r.hi
    assert Fraction(r.lo) <= Fraction(0.1) + Fraction(0.2) <= Fraction(r.hi)


def test_mul_sign_cases():
    assert _encloses(ic.mul(Interval(-1, 2), Interval(3, 4)), -4, 8)
    assert _encloses(ic.mul(Interval(-2, -1), Interval(-3, 5)), -10, 6)


def test_sqrt_and_div():
    assert _encloses(ic.sqrt(Interval(4, 9)), 2, 3)
    assert _encloses(ic.div(Interval(1, 1), Interval(2, 4)), 0.25, 0.5)


def test_div_by_interval_with_zero():
    with pytest.raises(ic.DivisionByZeroInterval):
        ic.div(Interval(1, 2), Interval(-1, 1))


def test_sqrt_negative():
    with pytest.raises(ic.NegativeSqrt):
        ic.sqrt(Interval(-0.5, 1))
    # a tiny negative endpoint is rounding noise and clamps to zero
    assert ic.sqrt(Interval(-1e-300, 1)).lo == 0.0


def test_empty_interval_rejected():
    with pytest.raises(ic.IntervalError):
        Interval(2, 1)


def test_neg_abs_min_max_hull():
    a, b = Interval(-3, 1), Interval(0.5, 2)
    assert (ic.neg(a).lo, ic.neg(a).hi) == (-1, 3)
    assert (ic.iabs(a).lo, ic.iabs(a).hi) == (0, 3)
    assert (ic.imin(a, b).lo, ic.imin(a, b).hi) == (-3, 1)
    assert (ic.imax(a, b).lo, ic.imax(a, b).hi) == (0.5, 2)
    assert (ic.hull(a, b).lo, ic.hull(a, b).hi) == (-3, 2)


def test_lift_monotone_cdf():
    assert std_normal_cdf(0.0).contains(0.5)
    full = std_normal_cdf(Interval(-np.inf, np.inf))
    assert full.lo == 0.0 and full.hi == 1.0
    e = ic.lift_monotone(np.exp, "increasing", Interval(0.0, 1.0))
    assert e.lo <= 1.0 and e.hi >= np.e and e.hi - np.e < 1e-14


# -- randomized containment with error-free transformations ------------------


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _le_exact(x, s, e):
    """x <= s + e exactly (s, e a non-overlapping expansion)."""
    return (x < s) | ((x == s) & (e >= 0))


def _ge_exact(x, s, e):
    return (x > s) | ((x == s) & (e <= 0))


def _operands(rng, n):
    a = np.sort(rng.uniform(-10, 10, (n, 2)) * 10.0 ** rng.integers(-3, 4, (n, 1)), axis=1)
    b = np.sort(rng.uniform(-10, 10, (n, 2)) * 10.0 ** rng.integers(-3, 4, (n, 1)), axis=1)
    x = a[:, 0] + rng.random(n) * (a[:, 1] - a[:, 0])
    y = b[:, 0] + rng.random(n) * (b[:, 1] - b[:, 0])
    x = np.clip(x, a[:, 0], a[:, 1])
    y = np.clip(y, b[:, 0], b[:, 1])
    return Interval(a[:, 0], a[:, 1]), Interval(b[:, 0], b[:, 1]), x, y


def test_inclusion_add_sub():
    rng = np.random.default_rng(1)
    A, B, x, y = _operands(rng, N_TRIALS)
    r = ic.add(A, B)
    s, e = _two_sum(x, y)
    assert np.all(_le_exact(r.lo, s, e) & _ge_exact(r.hi, s, e))
    r = ic.sub(A, B)
    s, e = _two_sum(x, -y)
    assert np.all(_le_exact(r.lo, s, e) & _ge_exact(r.hi, s, e))


def test_inclusion_mul():
    rng = np.random.default_rng(2)
    A, B, x, y = _operands(rng, N_TRIALS)
    r = ic.mul(A, B)
    p, e = _two_prod(x, y)
    assert np.all(_le_exact(r.lo, p, e) & _ge_exact(r.hi, p, e))


def test_inclusion_div():
    rng = np.random.default_rng(3)
    A, B, x, y = _operands(rng, N_TRIALS)
    pos = B.lo > 0
    B, y = Interval(B.lo[pos], B.hi[pos]), y[pos]
    A, x = Interval(A.lo[pos], A.hi[pos]), x[pos]
    r = ic.div(A, B)
    # lo <= x / y  <=>  lo * y <= x for y > 0
    p, e = _two_prod(r.lo, y)
    assert np.all((p < x) | ((p == x) & (e <= 0)))
    p, e = _two_prod(r.hi, y)
    assert np.all((p > x) | ((p == x) & (e >= 0)))


def test_inclusion_sqrt():
    rng = np.random.default_rng(4)
    a = np.sort(rng.uniform(0, 10, (N_TRIALS, 2)) * 10.0 ** rng.integers(-3, 4, (N_TRIALS, 1)), axis=1)
    x = np.clip(a[:, 0] + rng.random(N_TRIALS) * (a[:, 1] - a[:, 0]), a[:, 0], a[:, 1])
    r = ic.sqrt(Interval(a[:, 0], a[:, 1]))
    p, e = _two_prod(r.lo, r.lo)
    assert np.all((p < x) | ((p == x) & (e <= 0)))
    p, e = _two_prod(r.hi, r.hi)
    assert np.all((p > x) | ((p == x) & (e >= 0)))


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return Interval(min(a, b), max(a, b))


@settings(max_examples=300, deadline=None)
@given(intervals(), intervals(), st.floats(0, 1), st.floats(0, 1))
def test_inclusion_exact_rationals(a, b, s, t):
    x = Fraction(a.lo) + (Fraction(a.hi) - Fraction(a.lo)) * Fraction(s)
    y = Fraction(b.lo) + (Fraction(b.hi) - Fraction(b.lo)) * Fraction(t)
    for op, exact in ((ic.add, x + y), (ic.sub, x - y), (ic.mul, x * y)):
        r = op(a, b)
        assert Fraction(r.lo) <= exact <= Fraction(r.hi)


@settings(max_examples=200, deadline=None)
@given(intervals(), intervals())
def test_commutative_enclosures(a, b):
    for op in (ic.add, ic.mul):
        r1, r2 = op(a, b), op(b, a)
        assert (r1.lo, r1.hi) == (r2.lo, r2.hi)


@settings(max_examples=200, deadline=None)
@given(intervals(), intervals(), st.floats(0, 10), st.floats(0, 10))
def test_width_monotone(a, b, d1, d2):
    wide = Interval(a.lo - d1, a.hi + d2)
    for op in (ic.add, ic.sub, ic.mul):
        r, rw = op(a, b), op(wide, b)
        assert rw.lo <= r.lo and rw.hi >= r.hi
