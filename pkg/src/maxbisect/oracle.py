"""Monte Carlo and brute-force oracles.

These share no code with the analytic side beyond the normal quantile:
same-side probabilities are sampled, bisections are enumerated.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy.special import ndtri

SAMPLE_BLOCK = 1_000_000
MAX_BRUTE_N = 24


class OddVertexCount(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    def within(self, value: float, k: float = 4.0) -> bool:
        # a zero standard error (all samples equal) still admits rounding slack
        return abs(self.mean - value) <= k * self.std_error + 1e-12


def _estimate(hits: int, n: int, seed: int) -> McEstimate:
    p = hits / n
    # sample standard deviation of a 0/1 variable
    var = p * (1 - p) * n / (n - 1) if n > 1 else 0.0
    return McEstimate(p, float(np.sqrt(var / n)), n, seed)


def _correlated_normals(rng: np.random.Generator, rho_t: float, n: int):
    z1 = rng.standard_normal(n)
    z = rng.standard_normal(n)
    z2 = rho_t * z1 + np.sqrt(max(0.0, 1.0 - rho_t * rho_t)) * z
    return z1, z2


def _threshold(r: float) -> float:
    return float(ndtri((1.0 - r) / 2.0))


def mc_same_side_prob(rho_t: float, r1: float, r2: float, n: int, seed: int) -> McEstimate:
    """Estimate P[x1 = x2] for thresholded correlated normals."""
    if n < 1:
        raise ValueError("n must be positive")
    if not (-1 <= rho_t <= 1 and -1 <= r1 <= 1 and -1 <= r2 <= 1):
        raise ValueError("arguments outside [-1, 1]")
    rng = np.random.default_rng(seed)
    a1, a2 = _threshold(r1), _threshold(r2)
    hits = 0
    left = n
    while left:
        k = min(left, SAMPLE_BLOCK)
        z1, z2 = _correlated_normals(rng, rho_t, k)
        hits += int(np.count_nonzero((z1 < a1) == (z2 < a2)))
        left -= k
    return _estimate(hits, n, seed)


def mc_quadrant_prob(rho_t: float, q1: float, q2: float, n: int, seed: int) -> McEstimate:
    """Estimate P[Z1 <= Phi^-1(q1), Z2 <= Phi^-1(q2)]."""
    rng = np.random.default_rng(seed)
    t1, t2 = float(ndtri(q1)), float(ndtri(q2))
    hits = 0
    left = n
    while left:
        k = min(left, SAMPLE_BLOCK)
        z1, z2 = _correlated_normals(rng, rho_t, k)
        hits += int(np.count_nonzero((z1 <= t1) & (z2 <= t2)))
        left -= k
    return _estimate(hits, n, seed)


def mc_sign_covariance(rho_t: float, r1: float, r2: float, n: int, seed: int) -> Tuple[float, float]:
    """Sample covariance of the two rounded signs and its standard error."""
    rng = np.random.default_rng(seed)
    z1, z2 = _correlated_normals(rng, rho_t, n)
    x1 = np.where(z1 < _threshold(r1), -1.0, 1.0)
    x2 = np.where(z2 < _threshold(r2), -1.0, 1.0)
    d = (x1 - x1.mean()) * (x2 - x2.mean())
    return float(d.sum() / (n - 1)), float(d.std(ddof=1) / np.sqrt(n))


def brute_force_max_bisection(graph) -> Tuple[float, np.ndarray]:
    """Best balanced +-1 assignment by enumeration (vertex 0 fixed to +1)."""
    n = graph.n
    if n % 2:
        raise OddVertexCount(f"n = {n} is odd")
    if n > MAX_BRUTE_N:
        raise TooLarge(f"n = {n} exceeds {MAX_BRUTE_N}")
    if n == 0:
        return 0.0, np.zeros(0, dtype=int)
    e = np.asarray([(i, j) for i, j, _ in graph.edges], dtype=int).reshape(-1, 2)
    w = np.asarray([wt for _, _, wt in graph.edges], dtype=float)
    best, best_x = -1.0, None
    # swapping sides does not change the cut, so vertex 0 stays on +1
    for rest in itertools.combinations(range(1, n), n // 2 - 1):
        x = -np.ones(n, dtype=int)
        x[0] = 1
        x[list(rest)] = 1
        val = 0.5 * float(np.sum(w * (1 - x[e[:, 0]] * x[e[:, 1]]))) if len(w) else 0.0
        if val > best:
            best, best_x = val, x
    return best, best_x


def mc_rounding_stats(sol, biases, trials: int, seed: int, graph=None) -> Dict[str, object]:
    """Repeat threshold rounding and rebalancing.

    Reports the mean bias of each vertex, the histogram of b = sum(x)/2 and,
    when a graph is given, mean cut values before and after rebalancing.
    """
    from .pipeline import cut_value, rebalance, round_once

    ss = np.random.SeedSequence(seed)
    kids = ss.spawn(trials)
    xs = []
    cuts, bal_cuts = [], []
    for child in kids:
        s1, s2 = child.generate_state(2)
        x = round_once(sol, biases, int(s1))
        y = rebalance(x, int(s2))
        xs.append(x)
        if graph is not None:
            cuts.append(cut_value(graph, x))
            bal_cuts.append(cut_value(graph, y))
    xs = np.asarray(xs)
    b = xs.sum(axis=1) // 2
    vals, counts = np.unique(b, return_counts=True)
    out: Dict[str, object] = {
        "mean_x": xs.mean(axis=0),
        "std_x": xs.std(axis=0, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros(xs.shape[1]),
        "imbalance_histogram": dict(zip(vals.tolist(), counts.tolist())),
    }
    if graph is not None:
        out["mean_cut"] = float(np.mean(cuts))
        out["std_cut"] = float(np.std(cuts, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
        out["mean_balanced_cut"] = float(np.mean(bal_cuts))
    return out
