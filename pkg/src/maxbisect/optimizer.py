"""Floating-point search for the worst configurations and the best rounding
parameters, and the data behind the figures.

Nothing here is rigorous: the minimum over configurations is found by a
grid on the boundary of the polytope (where the worst cases sit), a coarse
interior grid, and bounded local descent from the best seeds.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .config_space import Configuration, in_conf, tilde_rho_point
from .gaussian import lambda_point
from .rounding import BoostFunction, alpha_cf_point, alpha_point

PHI1 = Configuration(0.176945, 0.176945, -0.646110)
PHI2 = Configuration(1.0, -1.0, -1.0)
MIXTURE_WEIGHT = 0.931935
PAIRING_PARAMS = (0.8056, 0.478, 1.618)

GRID_N = 101
INTERIOR_N = 21
PLOT_GRID = 41
N_SEEDS = 12
RHO_CAP = 1.0 - 1e-9
FIGURES = (
    "alpha_linear_full",
    "alpha_linear_zoom",
    "linear_bad_mixture",
    "boost_envelope",
    "surface_contour_lower",
    "surface_contour_upper",
)


class UnknownFigure(ValueError):
    pass


@dataclass
class OptimizationReport:
    best_params: tuple
    best_ratio: float
    worst_configs: List[Tuple[Configuration, float]]
    search_trace: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# inner minimisation over configurations


def lower_envelope(mu1, mu2):
    return -1.0 + np.abs(mu1 + mu2)


def upper_envelope(mu1, mu2):
    return 1.0 - np.abs(mu1 - mu2)


def _candidate_grid(grid_n: int, interior_n: int) -> np.ndarray:
    u = np.linspace(-1.0, 1.0, grid_n)
    a, b = np.meshgrid(u, u, indexing="ij")
    a, b = a.ravel(), b.ravel()
    pts = [np.stack([a, b, lower_envelope(a, b)], 1), np.stack([a, b, upper_envelope(a, b)], 1)]
    if interior_n > 1:
        v = np.linspace(-1.0, 1.0, interior_n)
        g = np.stack(np.meshgrid(v, v, v, indexing="ij"), -1).reshape(-1, 3)
        pts.append(g[in_conf(g[:, 0], g[:, 1], g[:, 2])])
    pts = np.concatenate(pts)
    return pts[pts[:, 2] < RHO_CAP]


def _from_unit(z: np.ndarray) -> np.ndarray:
    """Map (mu1, mu2, s) with s in [0, 1] onto the polytope."""
    mu1, mu2, s = np.clip(z[0], -1, 1), np.clip(z[1], -1, 1), np.clip(z[2], 0, 1)
    lo, hi = lower_envelope(mu1, mu2), min(upper_envelope(mu1, mu2), RHO_CAP)
    return np.array([mu1, mu2, lo + s * max(hi - lo, 0.0)])


def _to_unit(x: np.ndarray) -> np.ndarray:
    lo, hi = lower_envelope(x[0], x[1]), min(upper_envelope(x[0], x[1]), RHO_CAP)
    s = 0.0 if hi <= lo else (x[2] - lo) / (hi - lo)
    return np.array([x[0], x[1], np.clip(s, 0.0, 1.0)])


def _seeds(pts: np.ndarray, vals: np.ndarray, k: int, sep: float = 0.05) -> List[int]:
    order = np.argsort(vals, kind="stable")
    chosen: List[int] = []
    for i in order:
        if not np.isfinite(vals[i]):
            break
        if all(np.max(np.abs(pts[i] - pts[j])) > sep for j in chosen):
            chosen.append(int(i))
        if len(chosen) == k:
            break
    return chosen


def minimize_over_conf(
    fn: Callable[[np.ndarray], np.ndarray],
    grid_n: int = GRID_N,
    interior_n: int = INTERIOR_N,
    refine: bool = True,
    n_seeds: int = N_SEEDS,
) -> List[Tuple[Configuration, float]]:
    """Local minima of ``fn`` (vectorised over (n, 3) points), best first."""
    pts = _candidate_grid(grid_n, interior_n)
    with np.errstate(all="ignore"):
        vals = np.asarray(fn(pts), dtype=float)
    vals = np.where(np.isnan(vals), np.inf, vals)
    found = []
    for i in _seeds(pts, vals, n_seeds):
        x, v = pts[i], float(vals[i])
        if refine:
            obj = lambda z: float(np.nan_to_num(fn(_from_unit(z)[None, :])[0], nan=np.inf))
            res = minimize(obj, _to_unit(x), method="Powell", bounds=[(-1, 1), (-1, 1), (0, 1)],
                           options={"xtol": 1e-7, "ftol": 1e-12})
            if res.fun < v:
                x, v = _from_unit(res.x), float(res.fun)
        found.append((Configuration(*map(float, x)), v))
    found.sort(key=lambda t: t[1])
    # drop duplicates that descended into the same minimum
    out: List[Tuple[Configuration, float]] = []
    for c, v in found:
        if all(np.max(np.abs(c.as_array() - d.as_array())) > 1e-3 for d, _ in out):
            out.append((c, v))
    return out


# ---------------------------------------------------------------------------
# linear rounding


def linear_alpha_points(pts: np.ndarray, cparam: float) -> np.ndarray:
    m1, m2, p = pts[:, 0], pts[:, 1], pts[:, 2]
    return alpha_point(m1, m2, p, cparam * m1, cparam * m2)


def alpha_of_c(cparam: float, grid_n: int = GRID_N, refine: bool = True, interior_n: int = INTERIOR_N) -> OptimizationReport:
    """Estimate min over the polytope of alpha with biases c mu."""
    if not 0.0 <= cparam <= 1.0:
        raise ValueError("c must lie in [0, 1]")
    worst = minimize_over_conf(lambda x: linear_alpha_points(x, cparam), grid_n, interior_n, refine)
    return OptimizationReport((cparam,), worst[0][1], worst, [(cparam, worst[0][1])])


def maximize_linear(lo: float = 0.8, hi: float = 0.92, xtol: float = 1e-5) -> Tuple[float, float]:
    """Bounded scalar search over c of alpha_of_c."""
    trace = []

    def neg(c):
        v = alpha_of_c(c, grid_n=61, interior_n=11).best_ratio
        trace.append((c, v))
        return -v

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": xtol})
    c_star = float(res.x)
    return c_star, alpha_of_c(c_star).best_ratio


def _cut_and_sdp(conf: Configuration, r1: float, r2: float) -> Tuple[float, float]:
    rt = tilde_rho_point(conf.mu1, conf.mu2, conf.rho)
    cut = 1.0 - float(lambda_point(rt, r1, r2))
    return cut, (1.0 - conf.rho) / 2.0


def mixture_bound_curve(cs: Sequence[float], weight: float = MIXTURE_WEIGHT) -> List[Tuple[float, float]]:
    """Expected cut over expected SDP value when configurations are phi1
    with probability ``weight`` and phi2 otherwise."""
    out = []
    for c in cs:
        n1, d1 = _cut_and_sdp(PHI1, c * PHI1.mu1, c * PHI1.mu2)
        n2, d2 = _cut_and_sdp(PHI2, c * PHI2.mu1, c * PHI2.mu2)
        out.append((float(c), (weight * n1 + (1 - weight) * n2) / (weight * d1 + (1 - weight) * d2)))
    return out


# ---------------------------------------------------------------------------
# pairing rounding


def pairing_min(params: Tuple[float, float, float], grid_n: int = GRID_N, refine: bool = True,
                interior_n: int = INTERIOR_N) -> List[Tuple[Configuration, float]]:
    c, knee, slope = params
    f = BoostFunction(knee, slope)
    return minimize_over_conf(lambda x: alpha_cf_point(x[:, 0], x[:, 1], x[:, 2], c, f), grid_n, interior_n, refine)


def optimize_pairing(seed_params: Tuple[float, float, float] = PAIRING_PARAMS, steps: int = 0,
                     step_sizes: Tuple[float, float, float] = (2e-3, 4e-3, 2e-2),
                     grid_n: int = GRID_N) -> OptimizationReport:
    """Pattern search over (c, knee, slope) maximising the pairing minimum.

    ``steps = 0`` just evaluates the seed.
    """
    c, knee, slope = seed_params
    BoostFunction(knee, slope)
    best = tuple(map(float, seed_params))
    worst = pairing_min(best, grid_n)
    best_val = worst[0][1]
    trace = [(best, best_val)]
    h = np.array(step_sizes, dtype=float)
    for _ in range(steps):
        improved = False
        for k in range(3):
            for sgn in (1.0, -1.0):
                cand = np.array(best)
                cand[k] += sgn * h[k]
                try:
                    BoostFunction(cand[1], cand[2])
                except ValueError:
                    continue
                if not 0.0 <= cand[0] <= 1.0:
                    continue
                w = pairing_min(tuple(cand), grid_n=41, interior_n=11)
                trace.append((tuple(cand), w[0][1]))
                if w[0][1] > best_val:
                    best, best_val, worst, improved = tuple(map(float, cand)), w[0][1], w, True
        if not improved:
            h /= 2
    if steps:
        worst = pairing_min(best, grid_n)
        best_val = worst[0][1]
    return OptimizationReport(best, best_val, worst, trace)


# ---------------------------------------------------------------------------
# figure data


def emit_plot_data(figure: str, resolution: int) -> Tuple[List[str], List[tuple]]:
    """(header, rows) for one figure."""
    if figure not in FIGURES:
        raise UnknownFigure(figure)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    n = resolution
    if figure in ("alpha_linear_full", "alpha_linear_zoom"):
        cs = np.linspace(0.0, 1.0, n) if figure == "alpha_linear_full" else np.linspace(0.83, 0.88, n)
        rows = [(float(c), alpha_of_c(float(c), grid_n=PLOT_GRID, refine=False, interior_n=0).best_ratio) for c in cs]
        return ["c", "alpha"], rows
    if figure == "linear_bad_mixture":
        cs = np.linspace(0.0, 1.0, n)
        mix = mixture_bound_curve(cs)
        rows = []
        for (c, m) in mix:
            v1 = float(alpha_point(PHI1.mu1, PHI1.mu2, PHI1.rho, c * PHI1.mu1, c * PHI1.mu2))
            v2 = float(alpha_point(PHI2.mu1, PHI2.mu2, PHI2.rho, c * PHI2.mu1, c * PHI2.mu2))
            rows.append((c, v1, v2, m))
        return ["c", "alpha_phi1", "alpha_phi2", "mixture"], rows
    c, knee, slope = PAIRING_PARAMS
    f = BoostFunction(knee, slope)
    if figure == "boost_envelope":
        mu = np.linspace(0.0, 1.0, n)
        return ["mu", "lower", "upper"], [(float(m), c * m, c * m + (1 - c) * float(f(m))) for m in mu]
    u = np.linspace(-1.0, 1.0, n)
    a, b = np.meshgrid(u, u, indexing="ij")
    a, b = a.ravel(), b.ravel()
    rho = lower_envelope(a, b) if figure == "surface_contour_lower" else upper_envelope(a, b)
    with np.errstate(all="ignore"):
        vals = np.where(rho < RHO_CAP, alpha_cf_point(a, b, np.minimum(rho, RHO_CAP), c, f), np.nan)
    return ["mu1", "mu2", "rho", "alpha"], [tuple(map(float, r)) for r in zip(a, b, rho, vals)]


def write_csv(header: List[str], rows: List[tuple], path: Optional[str] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in r])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
