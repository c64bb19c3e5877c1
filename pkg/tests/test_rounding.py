import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxbisect.config_space import Configuration, tilde_rho
from maxbisect.gaussian import g_threshold
from maxbisect.rounding import (
    BoostFunction,
    DegenerateEdge,
    UnbalancedInput,
    alpha_cf,
    alpha_cf_point,
    alpha_point,
    alpha_value,
    permissible_biases,
    select_bias_linear,
    select_bias_pairing,
    worst_bias_candidates,
)

from conftest import PAIRING_F, PHI1, PHI2, random_configurations

C_STAR = 0.86450318
# 40-digit mpmath references
ALPHA_PHI1_CSTAR = 0.87368287298163551152
# both coordinates at the strong bound R = c + (1 - c) f(1)
ALPHA_PHI2_BOTH_STRONG = 0.97024580069104050688


def test_alpha_phi2_closed_form():
    c = 0.8
    e = alpha_value(PHI2, c, -c)
    assert e.lo <= (1 + c * c) / 2 <= e.hi
    assert e.hi - e.lo < 1e-12


def test_alpha_phi1_at_best_c():
    e = alpha_value(PHI1, C_STAR * PHI1.mu1, C_STAR * PHI1.mu2)
    assert e.lo <= ALPHA_PHI1_CSTAR <= e.hi
    assert abs(e.mid - 0.87368) < 1e-4


def test_alpha_zero_when_fully_correlated():
    # tilde-rho = 1 needs rho = mu1 mu2 + sqrt((1 - mu1^2)(1 - mu2^2)) < 1
    m1, m2 = 0.2, 0.5
    conf = Configuration(m1, m2, m1 * m2 + math.sqrt((1 - m1**2) * (1 - m2**2)))
    assert tilde_rho(conf) == pytest.approx(1.0, abs=1e-12)
    for r in (-0.3, 0.0, 0.6):
        assert float(alpha_point(conf.mu1, conf.mu2, conf.rho, r, r)) == pytest.approx(0.0, abs=1e-6)


def test_alpha_degenerate_edge():
    with pytest.raises(DegenerateEdge):
        alpha_value(Configuration(0.0, 0.0, 1.0), 0.0, 0.0)


def test_select_linear_examples():
    assert np.allclose(select_bias_linear([0.5, -0.5], 0.8).r, [0.4, -0.4])
    mus = [0.3, -0.1, -0.2]
    assert np.all(select_bias_linear(mus, 0.0).r == 0)
    assert np.allclose(select_bias_linear(mus, 1.0).r, mus)
    with pytest.raises(UnbalancedInput):
        select_bias_linear([0.5, 0.5], 0.8)


def test_select_pairing_hand_trace():
    r = select_bias_pairing([0.6, -0.5, 0.2, -0.3], 0.8056, PAIRING_F).r
    boost = (1 - 0.8056) * 1.618 * (0.5 - 0.478)
    expect = [0.8056 * 0.6 + boost, -0.8056 * 0.5 - boost, 0.8056 * 0.2, -0.8056 * 0.3]
    assert np.allclose(r, expect, atol=1e-15)
    assert r[0] == pytest.approx(0.49028, abs=1e-5) and r[1] == pytest.approx(-0.40972, abs=1e-5)
    assert abs(math.fsum(r)) < 1e-15


def test_select_pairing_no_pairs_and_single_pair():
    assert np.all(select_bias_pairing([0.0, 0.0, 0.0], 0.8, PAIRING_F).r == 0)
    x, c = 0.7, 0.8056
    r = select_bias_pairing([x, -x], c, PAIRING_F).r
    v = c * x + (1 - c) * float(PAIRING_F(x))
    assert np.allclose(r, [v, -v])


def test_boost_function_validation():
    assert PAIRING_F(0.0) == 0.0
    assert PAIRING_F(1.0) == pytest.approx(1.618 * 0.522)
    with pytest.raises(ValueError):
        BoostFunction(0.2, 2.0)
    with pytest.raises(ValueError):
        BoostFunction(1.2, 0.5)


def test_permissible_examples():
    c, f = 0.8056, PAIRING_F
    reg = permissible_biases(0.5, 0.5, c, f)
    w = (c * 0.5, c * 0.5 + (1 - c) * float(f(0.5)))
    assert reg.rects == ((w, w),)
    reg = permissible_biases(0.6, -0.5, c, f)
    assert len(reg.rects) == 2
    boost = (1 - c) * float(f(0.5))
    (I1a, I2a), (I1b, I2b) = reg.rects
    assert I1a[0] == pytest.approx(c * 0.6 + boost)
    assert I2b[1] == pytest.approx(-(c * 0.5 + boost))
    reg = permissible_biases(0.0, -0.4, c, f)
    assert all(I1 == (0.0, 0.0) for I1, _ in reg.rects)


def test_worst_candidates_examples():
    I1, I2 = (0.2, 0.4), (0.1, 0.3)
    neg = Configuration(0.0, 0.0, -0.5)
    assert sorted(worst_bias_candidates(neg, I1, I2)) == sorted([(0.2, 0.1), (0.2, 0.3), (0.4, 0.1), (0.4, 0.3)])
    m1, m2 = 0.2, 0.5
    full = Configuration(m1, m2, m1 * m2 + math.sqrt((1 - m1**2) * (1 - m2**2)))
    cands = worst_bias_candidates(full, (0.2, 0.4), (0.2, 0.4))
    assert any(a == b for a, b in cands)
    pos = Configuration(0.0, 0.0, 0.5)
    cands = worst_bias_candidates(pos, I1, I2, include_origin=False)
    expect = {(0.2, 0.1), (0.2, 0.3), (0.4, 0.1), (0.4, 0.3)}
    for x in I1:
        y = g_threshold(0.5, x).mid
        if I2[0] <= y <= I2[1]:
            expect.add((x, y))
    for y in I2:
        x = g_threshold(0.5, y).mid
        if I1[0] <= x <= I1[1]:
            expect.add((x, y))
    assert len(cands) == len(expect)
    assert all(any(abs(a - p) < 1e-12 and abs(b - q) < 1e-12 for p, q in expect) for a, b in cands)
    # a wider box does admit g-points
    wide = worst_bias_candidates(pos, (-0.5, 0.5), (-0.9, 0.9))
    assert len(wide) > 4 and (0.0, 0.0) not in wide


def test_alpha_cf_examples():
    # only one of the two coordinates is guaranteed the strong bound, so the
    # minimum pairs R with the weak end c: alpha = (1 + R c) / 2 at rho~ = 0
    c = 0.8056
    R = c + (1 - c) * 1.618 * (1 - 0.478)
    e = alpha_cf(PHI2, c, PAIRING_F)
    assert e.lo <= (1 + R * c) / 2 <= e.hi
    assert e.hi < ALPHA_PHI2_BOTH_STRONG
    both = alpha_value(PHI2, R, -R)
    assert both.lo <= ALPHA_PHI2_BOTH_STRONG <= both.hi
    conf = Configuration(0.0, 0.0, -0.3)
    direct = alpha_value(conf, 0.0, 0.0)
    e = alpha_cf(conf, 0.8056, PAIRING_F)
    assert (e.lo, e.hi) == (direct.lo, direct.hi)


def test_alpha_cf_point_matches_certified():
    pts = random_configurations(np.random.default_rng(5), 300)
    pts = pts[pts[:, 2] < 0.999]
    vals = alpha_cf_point(pts[:, 0], pts[:, 1], pts[:, 2], 0.8056, PAIRING_F)
    for p, v in zip(pts, vals):
        e = alpha_cf(Configuration(*p), 0.8056, PAIRING_F)
        assert e.lo - 1e-9 <= v <= e.hi + 1e-9


def test_candidates_beat_grid_small():
    rng = np.random.default_rng(6)
    pts = random_configurations(rng, 400)
    checked = 0
    for m1, m2, r in pts:
        conf = Configuration(m1, m2, r)
        if r >= 0.999 or abs(tilde_rho(conf)) > 0.999:
            continue
        I1, I2 = tuple(np.sort(rng.uniform(-1, 1, 2))), tuple(np.sort(rng.uniform(-1, 1, 2)))
        cand = min(float(alpha_point(m1, m2, r, a, b)) for a, b in worst_bias_candidates(conf, I1, I2, True))
        g1, g2 = np.meshgrid(np.linspace(*I1, 60), np.linspace(*I2, 60))
        grid = float(np.min(alpha_point(m1, m2, r, g1, g2)))
        assert cand <= grid + 1e-4
        checked += 1
    assert checked > 200


mus_strategy = st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=40)


def _balanced(xs):
    x = np.asarray(xs, dtype=float)
    x = np.concatenate([x, -x])
    return x


@settings(max_examples=200, deadline=None)
@given(mus_strategy, st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_pairing_output_is_permissible(xs, c, knee, s):
    f = BoostFunction(knee, s / max(1 - knee, 1e-9) if knee < 1 else 0.0) if knee < 1 else BoostFunction(1.0, 0.0)
    mus = _balanced(xs)
    r = select_bias_pairing(mus, c, f).r
    assert abs(math.fsum(r)) < 1e-12
    assert np.all(np.abs(r) <= 1)
    u = np.abs(mus)
    tol = 1e-12
    lo, hi = c * u, c * u + (1 - c) * f(u)
    assert np.all((np.abs(r) >= lo - tol) & (np.abs(r) <= hi + tol))
    assert np.all((mus == 0) <= (r == 0))
    assert np.all(np.sign(r) * np.sign(mus) >= 0)
    pos, neg = np.flatnonzero(mus > 0), np.flatnonzero(mus < 0)
    for i in pos[:10]:
        for j in neg[:10]:
            assert permissible_biases(mus[i], mus[j], c, f).contains(r[i], r[j], tol=1e-12)


@settings(max_examples=50, deadline=None)
@given(mus_strategy, st.floats(0, 1))
def test_selection_deterministic(xs, c):
    mus = _balanced(xs)
    a = select_bias_pairing(mus, c, PAIRING_F).r
    b = select_bias_pairing(mus.copy(), c, PAIRING_F).r
    assert np.array_equal(a, b)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_alpha_nonnegative_and_symmetric(m1, m2, s, r1, r2):
    lo, hi = -1 + abs(m1 + m2), min(1 - abs(m1 - m2), 0.999)
    if hi <= lo:
        return
    rho = lo + s * (hi - lo)
    a = float(alpha_point(m1, m2, rho, r1, r2))
    b = float(alpha_point(m2, m1, rho, r2, r1))
    assert a >= 0
    assert a == pytest.approx(b, abs=1e-12)
