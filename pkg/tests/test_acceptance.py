"""Acceptance criteria, one test each, each reporting a single PASS/FAIL line.

The two full-scale proofs (linear target 0.87362, pairing target 0.87762)
are long; they run when MAXBISECT_FULL is set to "linear", "pairing" or
"all".  The desk-scale fallback proofs always run.
"""
import json
import math
import os
import time

import numpy as np
import pytest

from maxbisect.cli import oracle_lambda_grid
from maxbisect.config_space import Configuration, tilde_rho_point
from maxbisect.gaussian import (
    INV_SQRT2PI,
    bivariate_cdf,
    lambda_point,
    std_normal_cdf_inv,
)
from maxbisect.optimizer import alpha_of_c, maximize_linear, mixture_bound_curve, optimize_pairing
from maxbisect.oracle import brute_force_max_bisection, mc_quadrant_prob
from maxbisect.pipeline import RoundingParams, run_max_bisection
from maxbisect.prover import ProofParams, verify
from maxbisect.rounding import alpha_cf_point, alpha_point, worst_bias_candidates

from conftest import ACCEPTANCE_LINES, PAIRING_F, PHI1, PHI2, corpus, random_configurations

FULL = os.environ.get("MAXBISECT_FULL", "").lower()
RUN_FULL_LINEAR = FULL in ("1", "all", "linear")
RUN_FULL_PAIRING = FULL in ("1", "all", "pairing")

C_LINEAR = 0.86451
C_PAIR = 0.8056


def report(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def timed_verify(mode, c, delta, target, **kw):
    params = ProofParams(mode, c, delta, PAIRING_F if mode == "pairing" else None)
    t0 = time.perf_counter()
    cert = verify(mode, params, target, **kw)
    return cert, time.perf_counter() - t0


def proof_ok(cert):
    return cert.status == "certified" and cert.counts["FailureWitness"] == 0 and cert.counts["DepthExhausted"] == 0


# ---------------------------------------------------------------- fixtures


@pytest.fixture(scope="module")
def linear_fallback():
    return timed_verify("linear", C_LINEAR, 1e-5, 0.873)


@pytest.fixture(scope="module")
def pairing_fallback():
    return timed_verify("pairing", C_PAIR, 1e-4, 0.874)


@pytest.fixture(scope="module")
def linear_full():
    if not RUN_FULL_LINEAR:
        return None
    return timed_verify("linear", C_LINEAR, 1e-5, 0.87362)


@pytest.fixture(scope="module")
def pairing_full():
    if not RUN_FULL_PAIRING:
        return None
    return timed_verify("pairing", C_PAIR, 1e-5, 0.87762)


@pytest.fixture(scope="module")
def corpus_reports():
    return pipeline_reports()


def pipeline_reports():
    out = {}
    for name, g in corpus():
        res = run_max_bisection(g, RoundingParams("pairing", C_PAIR, PAIRING_F, 1e-5, 100, 0))
        out[name] = {
            "best_value": format(res["best_value"], ".17g"),
            "best_y": [int(v) for v in res["best_y"]],
            "stats": {k: format(float(v), ".17g") for k, v in res["stats"].items()},
        }
    return json.dumps(out, sort_keys=True)


LAMBDA_SAMPLES = 10_000_000
LAMBDA_SEED = 1
CANDIDATE_INSTANCES = 10_000


@pytest.fixture(scope="module")
def lambda_grid_rows():
    return oracle_lambda_grid(LAMBDA_SAMPLES, LAMBDA_SEED)


# ---------------------------------------------------------------- 1, 2: proofs


def test_c01_certified_linear(linear_fallback, linear_full):
    cert, secs = linear_fallback
    ok = proof_ok(cert) and secs <= 300
    detail = f"fallback target 0.873 {cert.status} in {secs:.0f}s (budget 300s)"
    if linear_full is not None:
        full, fsecs = linear_full
        ok &= proof_ok(full) and fsecs <= 7200
        detail += f"; full target 0.87362 {full.status} in {fsecs:.0f}s, {sum(full.counts.values())} cubes"
    else:
        detail += "; full target 0.87362 not run (set MAXBISECT_FULL=linear)"
    assert report(1, ok, detail)


def test_c02_certified_pairing(pairing_fallback, pairing_full):
    cert, secs = pairing_fallback
    ok = proof_ok(cert) and secs <= 900
    detail = f"fallback delta 1e-4 target 0.874 {cert.status} in {secs:.0f}s (budget 900s)"
    if pairing_full is not None:
        full, fsecs = pairing_full
        ok &= proof_ok(full) and fsecs <= 6 * 3600
        detail += f"; full target 0.87762 {full.status} in {fsecs:.0f}s"
    else:
        detail += "; full target 0.87762 not run (set MAXBISECT_FULL=pairing)"
    assert report(2, ok, detail)


# ---------------------------------------------------------------- 3-5: numerical claims


def test_c03_linear_claim():
    c, ratio = maximize_linear()
    worst = [cf.as_array() for cf, _ in alpha_of_c(c).worst_configs]
    near = lambda target: any(np.max(np.abs(w - target.as_array())) <= 1e-2 for w in worst)
    ok = abs(c - 0.86450318) <= 5e-3 and abs(ratio - 0.87368287) <= 5e-4 and near(PHI1) and near(PHI2)
    assert report(3, ok, f"c = {c:.7f}, ratio = {ratio:.8f}, phi1 found {near(PHI1)}, phi2 found {near(PHI2)}")


def test_c04_pairing_claim():
    rep = optimize_pairing((C_PAIR, 0.478, 1.618))
    ok = abs(rep.best_ratio - 0.87765366) <= 2e-4
    assert report(4, ok, f"minimum {rep.best_ratio:.8f} at {rep.worst_configs[0][0]}")


def test_c05_mixture_limit():
    cs = np.round(np.arange(0, 10001) * 1e-4, 4)
    curve = mixture_bound_curve(cs)
    c_best, v_best = max(curve, key=lambda t: t[1])
    ok = v_best <= 0.873829 + 1e-4
    assert report(5, ok, f"max {v_best:.7f} at c = {c_best:.4f} (limit 0.873929)")


# ---------------------------------------------------------------- 6: Gaussian properties


def test_c06_gaussian_properties():
    t0 = time.perf_counter()
    n = 20
    R, A, B = (x.ravel() for x in np.meshgrid(np.linspace(-1, 1, n), np.linspace(0, 1, n), np.linspace(0, 1, n),
                                               indexing="ij"))
    sym = np.max(np.abs(bivariate_cdf(R, 1 - A, 1 - B).mid - bivariate_cdf(R, A, B).mid - 1 + A + B))
    indep = bool(np.all(bivariate_cdf(R, A, B).lo <= A * B + 2 * np.abs(R)))

    keep = (np.abs(R) <= 0.99) & (A > 0) & (A < 1) & (B > 0) & (B < 1)
    r, a, b = R[keep], A[keep], B[keep]
    h = 1e-6
    fd = (bivariate_cdf(r, a + h, b).mid - bivariate_cdf(r, a - h, b).mid) / (2 * h)
    t1, t2 = std_normal_cdf_inv(a).mid, std_normal_cdf_inv(b).mid
    from scipy.special import ndtr

    deriv = np.max(np.abs(fd - ndtr((t2 - r * t1) / np.sqrt(1 - r * r))))

    rng = np.random.default_rng(6)
    lo, hi = np.sort(rng.normal(0, 3, (2, 100_000)), axis=0)
    t = rng.normal(0, 3, 100_000)
    al = 1 + rng.exponential(2.0, 100_000)
    conc = bool(np.all(ndtr(hi) - ndtr(lo) <= (hi - lo) * INV_SQRT2PI + 1e-15)
                and np.all(ndtr(al * t) <= ndtr(t) + (al - 1) / math.sqrt(2 * math.pi * math.e) + 1e-15))
    secs = time.perf_counter() - t0
    ok = sym <= 1e-10 and indep and deriv <= 1e-5 and conc and secs <= 120
    assert report(6, ok, f"symmetry {sym:.1e}, indep bound {indep}, derivative {deriv:.1e}, "
                         f"anti-concentration {conc}, {secs:.0f}s")


# ---------------------------------------------------------------- 7: oracle equivalence


def test_c07_oracle_equivalence(lambda_grid_rows):
    bad = [r[:3] for r in lambda_grid_rows if not r[-1]]
    est = mc_quadrant_prob(0.5, 0.5, 0.5, LAMBDA_SAMPLES, LAMBDA_SEED)
    enc = bivariate_cdf(0.5, 0.5, 0.5)
    quad = est.within(1 / 3) and float(enc.lo) <= 1 / 3 <= float(enc.hi)
    ok = not bad and quad
    assert report(7, ok, f"{len(lambda_grid_rows) - len(bad)}/343 grid points within 4 sigma at 1e7 samples; "
                         f"quadrant MC {est.mean:.6f} +- {est.std_error:.1e} brackets 1/3: {quad}")


# ---------------------------------------------------------------- 8: worst-bias candidates


def _alpha_grid(rt, rho, r1, r2):
    # Lambda form with a single bivariate CDF call per point
    return (1.0 - lambda_point(rt, r1, r2)) / ((1.0 - rho) / 2.0)


def test_c08_worst_bias_candidates():
    rng = np.random.default_rng(8)
    n_inst, grid, fine = CANDIDATE_INSTANCES, 200, 45
    confs = random_configurations(rng, n_inst)
    worst_gap, worst_refined = -np.inf, 0.0
    for k in range(n_inst):
        m1, m2, rho = map(float, confs[k])
        conf = Configuration(m1, m2, rho)
        (a1, b1), (a2, b2) = np.sort(rng.uniform(-1, 1, 2)), np.sort(rng.uniform(-1, 1, 2))
        I1, I2 = (float(a1), float(b1)), (float(a2), float(b2))
        cands = np.array(worst_bias_candidates(conf, I1, I2))
        vals = alpha_point(m1, m2, rho, cands[:, 0], cands[:, 1])
        j = int(np.argmin(vals))
        cmin = float(vals[j])
        rt = float(tilde_rho_point(m1, m2, rho))
        u, v = np.meshgrid(np.linspace(*I1, grid), np.linspace(*I2, grid), indexing="ij")
        gmin = float(np.min(_alpha_grid(rt, rho, u.ravel(), v.ravel())))
        worst_gap = max(worst_gap, cmin - gmin)
        # refined window around the candidate argmin, clipped to the rectangle
        x, y = cands[j]
        hw1, hw2 = 1e-3 * max(b1 - a1, 1e-12), 1e-3 * max(b2 - a2, 1e-12)
        u, v = np.meshgrid(np.linspace(max(a1, x - hw1), min(b1, x + hw1), fine),
                           np.linspace(max(a2, y - hw2), min(b2, y + hw2), fine), indexing="ij")
        rmin = float(np.min(alpha_point(m1, m2, rho, u.ravel(), v.ravel())))
        worst_refined = max(worst_refined, abs(cmin - rmin))
    ok = worst_gap <= 1e-4 and worst_refined <= 1e-6
    assert report(8, ok, f"max(candidate min - 200x200 grid min) = {worst_gap:.2e}; "
                         f"max |candidate min - refined min| = {worst_refined:.2e} over {n_inst} instances")


# ---------------------------------------------------------------- 9: pipeline vs brute force


def test_c09_pipeline_vs_brute_force(corpus_reports):
    reps = json.loads(corpus_reports)
    worst, bip_ok = np.inf, True
    for name, g in corpus():
        opt, _ = brute_force_max_bisection(g)
        got = float(reps[name]["best_value"])
        if opt > 0:
            worst = min(worst, got / opt)
        if g.is_bipartite() and got != opt:
            bip_ok = False
    ok = worst >= 0.8776 and bip_ok
    assert report(9, ok, f"min best/optimum {worst:.4f} over {len(reps)} graphs; bipartite optimal: {bip_ok}")


# ---------------------------------------------------------------- 10: soundness spot check


def test_c10_soundness(linear_fallback, pairing_fallback, linear_full, pairing_full):
    rng = np.random.default_rng(10)
    n = 1_000_000
    lines = []
    ok = True
    certs = [linear_full or linear_fallback, pairing_full or pairing_fallback]
    for cert, _ in certs:
        d = cert.params.delta
        pts = random_configurations(rng, n, delta=d)
        m1, m2, rho = pts.T
        if cert.mode == "linear":
            vals = alpha_point(m1, m2, rho, cert.params.c * m1, cert.params.c * m2)
        else:
            vals = alpha_cf_point(m1, m2, rho, cert.params.c, cert.params.boost)
        low = float(np.min(vals))
        good = proof_ok(cert) and low >= cert.certified_bound - 1e-9
        ok &= good
        lines.append(f"{cert.mode} min {low:.6f} vs bound {cert.certified_bound}")
    assert report(10, ok, "; ".join(lines) + f" ({n} samples each)")


# ---------------------------------------------------------------- 11: determinism


def test_c11_determinism(linear_fallback, lambda_grid_rows, corpus_reports):
    first, _ = linear_fallback
    again, _ = timed_verify("linear", C_LINEAR, 1e-5, 0.873)
    same_cert = first.to_json(include_timing=False) == again.to_json(include_timing=False)
    same_grid = oracle_lambda_grid(LAMBDA_SAMPLES, LAMBDA_SEED) == lambda_grid_rows
    same_pipe = pipeline_reports() == corpus_reports
    ok = same_cert and same_grid and same_pipe
    assert report(11, ok, f"certificate identical {same_cert}, oracle grid identical {same_grid}, "
                          f"pipeline reports identical {same_pipe}")
