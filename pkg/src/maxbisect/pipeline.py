"""Desk-scale Max Bisection: a low-rank SDP heuristic, smoothing and repair of
the vectors, threshold rounding with biases, and rebalancing.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import ndtri
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state

from .rounding import BiasVector, BoostFunction, select_bias_linear, select_bias_pairing

UNIT_TOL = 1e-8
ZERO_NORM = 1e-12


class NonConvergence(RuntimeWarning):
    pass


class DimensionMismatch(ValueError):
    pass


class InfeasibleBalance(ValueError):
    pass


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class Graph:
    n: int
    edges: Tuple[Tuple[int, int, float], ...]

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("negative vertex count")
        edges = tuple((int(i), int(j), float(w)) for i, j, w in self.edges)
        for i, j, w in edges:
            if i == j:
                raise ValueError(f"self-loop at {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range")
            if not (math.isfinite(w) and w >= 0):
                raise ValueError(f"bad weight {w}")
        object.__setattr__(self, "edges", edges)

    @property
    def total_weight(self) -> float:
        return math.fsum(w for _, _, w in self.edges)

    def arrays(self):
        e = np.array([(i, j) for i, j, _ in self.edges], dtype=int).reshape(-1, 2)
        w = np.array([w for _, _, w in self.edges], dtype=float)
        return e, w

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            A[i, j] += w
            A[j, i] += w
        return A

    def is_bipartite(self) -> bool:
        color = [-1] * self.n
        adj: List[List[int]] = [[] for _ in range(self.n)]
        for i, j, _ in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        for s in range(self.n):
            if color[s] >= 0:
                continue
            color[s] = 0
            stack = [s]
            while stack:
                u = stack.pop()
                for v in adj[u]:
                    if color[v] < 0:
                        color[v] = 1 - color[u]
                        stack.append(v)
                    elif color[v] == color[u]:
                        return False
        return True


def parse_graph(text: str) -> Graph:
    """Header "n m", then m lines "i j weight" (0-indexed); '#' comments."""
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line.split())
    if not lines:
        raise ValueError("empty graph file")
    n, m = int(lines[0][0]), int(lines[0][1])
    body = lines[1:]
    if len(body) != m:
        raise ValueError(f"header says {m} edges, found {len(body)}")
    edges = []
    for parts in body:
        if len(parts) not in (2, 3):
            raise ValueError(f"bad edge line {' '.join(parts)!r}")
        w = float(parts[2]) if len(parts) == 3 else 1.0
        edges.append((int(parts[0]), int(parts[1]), w))
    return Graph(n, tuple(edges))


def read_graph(path: str) -> Graph:
    with open(path) as fh:
        return parse_graph(fh.read())


def format_graph(g: Graph) -> str:
    out = [f"{g.n} {len(g.edges)}"]
    out += [f"{i} {j} {format(w, '.17g')}" for i, j, w in g.edges]
    return "\n".join(out) + "\n"


def cut_value(graph: Graph, x) -> float:
    x = np.asarray(x)
    if x.shape != (graph.n,):
        raise DimensionMismatch(f"assignment has shape {x.shape}, graph has {graph.n} vertices")
    return math.fsum(0.5 * w * (1 - x[i] * x[j]) for i, j, w in graph.edges)


# ---------------------------------------------------------------------------
# SDP solutions


@dataclass(frozen=True)
class SdpSolution:
    """v0 (d,) and one unit vector per vertex as the rows of V (n, d)."""

    v0: np.ndarray
    V: np.ndarray
    info: Dict[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v0 = np.asarray(self.v0, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if V.ndim != 2 or v0.shape != (V.shape[1],):
            raise DimensionMismatch("v0 and V disagree in dimension")
        object.__setattr__(self, "v0", v0)
        object.__setattr__(self, "V", V)

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def mu(self) -> np.ndarray:
        return self.V @ self.v0

    @property
    def rho(self) -> np.ndarray:
        return self.V @ self.V.T

    @property
    def w(self) -> np.ndarray:
        return self.V - np.outer(self.mu, self.v0)

    @property
    def wbar(self) -> np.ndarray:
        """Normalised orthogonal parts; a zero part becomes a fresh unit
        vector orthogonal to everything (extra coordinates)."""
        w = self.w
        norms = np.linalg.norm(w, axis=1)
        zero = norms < ZERO_NORM
        out = np.zeros((self.n, w.shape[1] + int(zero.sum())))
        out[~zero, : w.shape[1]] = w[~zero] / norms[~zero, None]
        for k, i in enumerate(np.nonzero(zero)[0]):
            out[i, w.shape[1] + k] = 1.0
        return out

    def check(self, tol: float = UNIT_TOL) -> None:
        if abs(np.linalg.norm(self.v0) - 1) > tol or np.any(np.abs(np.linalg.norm(self.V, axis=1) - 1) > tol):
            raise ValueError("vectors are not unit length")

    def triangle_violation(self) -> float:
        """Largest violation of the four triangle inequalities over pairs."""
        if self.n < 2:
            return 0.0
        mu, rho = self.mu, self.rho
        a, b = mu[:, None], mu[None, :]
        forms = (a + b + rho, a - b - rho, -a + b - rho, -a - b + rho)
        iu = np.triu_indices(self.n, 1)
        return float(max(0.0, max(np.max(-1.0 - f[iu]) for f in forms)))


def sdp_value(graph: Graph, sol: SdpSolution) -> float:
    if sol.n != graph.n:
        raise DimensionMismatch("solution and graph sizes differ")
    V = sol.V
    return math.fsum(0.5 * w * (1 - float(V[i] @ V[j])) for i, j, w in graph.edges)


def _normalize_rows(Y):
    norms = np.linalg.norm(Y, axis=1)
    return Y / np.maximum(norms, 1e-300)[:, None], norms


def _objective(Y_flat, n, k, A, lam, lam_t):
    """Negative penalised SDP value over rows v0 (row 0) and v1..vn."""
    Y = Y_flat.reshape(n + 1, k)
    U, norms = _normalize_rows(Y)
    v0, V = U[0], U[1:]
    G = V @ V.T
    val = 0.25 * np.sum(A * (1 - G))
    s = V.sum(axis=0)
    f = -val + lam * (s @ s)
    gV = 0.5 * (A @ V) + 2 * lam * s[None, :]
    g0 = np.zeros(k)
    if lam_t > 0:
        mu = V @ v0
        a, b = mu[:, None], mu[None, :]
        gmu = np.zeros(n)
        gG = np.zeros((n, n))
        for sa, sb, sg in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
            viol = np.maximum(0.0, -1.0 - (sa * a + sb * b + sg * G))
            np.fill_diagonal(viol, 0.0)
            f += lam_t * np.sum(viol ** 2)
            d = -2 * lam_t * viol
            gmu += sa * d.sum(axis=1) + sb * d.sum(axis=0)
            gG += sg * d
        gV += gmu[:, None] * v0[None, :] + (gG + gG.T) @ V
        g0 += V.T @ gmu
    gU = np.vstack([g0[None, :], gV])
    # back through the row normalisation
    gY = (gU - np.sum(gU * U, axis=1)[:, None] * U) / np.maximum(norms, 1e-300)[:, None]
    return f, gY.ravel()


def _local_search_bisection(graph: Graph, rng) -> np.ndarray:
    """Random balanced split improved by best pair swaps."""
    n = graph.n
    A = graph.adjacency()
    x = np.ones(n)
    x[rng.permutation(n)[: n // 2]] = -1
    for _ in range(10 * n):
        # gain of moving i is sum_j A_ij x_i x_j (edges that become cut minus uncut)
        gain = x * (A @ x)
        P, N = np.nonzero(x > 0)[0], np.nonzero(x < 0)[0]
        if len(P) == 0 or len(N) == 0:
            break
        # the edge between the swapped pair stays cut
        G = gain[P][:, None] + gain[N][None, :] + 2 * A[np.ix_(P, N)]
        a, b = np.unravel_index(np.argmax(G), G.shape)
        if G[a, b] <= 1e-12:
            break
        x[P[a]], x[N[b]] = -1, 1
    return x


def solve_basic_sdp(graph: Graph, rank: Optional[int] = None, iterations: int = 500, seed: int = 0,
                    restarts: int = 3, triangle_penalty: float = 1.0) -> SdpSolution:
    """Low-rank penalised ascent for the bisection SDP.

    Maximises 1/2 sum w (1 - <vi, vj>) over unit vectors with sum(vi) = 0
    (quadratic penalty, doubled until met) and a soft penalty on triangle
    inequalities with v0.  One restart starts from a local-search bisection
    embedded as +-e1, so the value is at least that bisection's.
    """
    n = graph.n
    if n < 2 or n % 2:
        raise ValueError("need an even number of vertices, at least 2")
    k = rank if rank is not None else math.ceil(math.sqrt(2 * n)) + 2
    rng = check_random_state(seed)
    A = graph.adjacency()
    W = max(graph.total_weight, 1.0)
    best, best_val, converged = None, -np.inf, True
    starts = []
    x = _local_search_bisection(graph, rng)
    Y0 = np.zeros((n + 1, k))
    Y0[0, 0] = 1.0
    Y0[1:, 0] = x
    starts.append(Y0 + 1e-3 * rng.standard_normal(Y0.shape))
    for _ in range(restarts):
        starts.append(rng.standard_normal((n + 1, k)))
    for Y in starts:
        lam = W / n
        for _ in range(30):
            res = minimize(_objective, Y.ravel(), args=(n, k, A, lam, triangle_penalty * W),
                           jac=True, method="L-BFGS-B", options={"maxiter": iterations})
            Y = res.x.reshape(n + 1, k)
            U, _ = _normalize_rows(Y)
            if np.linalg.norm(U[1:].sum(axis=0)) <= 1e-6 * n:
                break
            lam *= 2
        else:
            converged = False
        sol = _project_balance(U[0], U[1:])
        val = sdp_value(graph, sol)
        if val > best_val:
            best, best_val = sol, val
    if not converged:
        warnings.warn("balance penalty did not reach tolerance", NonConvergence)
    best.info.update({"converged": converged, "sdp_value": best_val, "rank": k})
    return best


def _project_balance(v0: np.ndarray, V: np.ndarray) -> SdpSolution:
    """Make sum(vi) ~ 0 and sum(mu) = 0 up to rounding."""
    for _ in range(5):
        V = V - V.mean(axis=0)[None, :]
        V, _ = _normalize_rows(V)
    mu = V @ v0
    w = V - np.outer(mu, v0)
    norms = np.linalg.norm(w, axis=1)
    wbar = np.where(norms[:, None] > ZERO_NORM, w / np.maximum(norms, 1e-300)[:, None], 0.0)
    mu = balance_mu(mu)
    V = mu[:, None] * v0[None, :] + np.sqrt(np.maximum(0.0, 1 - mu * mu))[:, None] * wbar
    # a zero orthogonal part with |mu| < 1 would not be unit length
    bad = (norms <= ZERO_NORM) & (np.abs(mu) < 1)
    if np.any(bad):
        extra = np.zeros((len(mu), int(bad.sum())))
        extra[np.nonzero(bad)[0], np.arange(int(bad.sum()))] = np.sqrt(1 - mu[bad] ** 2)
        V = np.hstack([V, extra])
        v0 = np.concatenate([v0, np.zeros(extra.shape[1])])
    return SdpSolution(v0, V)


def balance_mu(mu: np.ndarray) -> np.ndarray:
    """Shift mu (clipped to [-1, 1]) so that it sums to zero, then absorb
    the floating-point residue in the entry farthest from +-1."""
    mu = np.clip(np.asarray(mu, dtype=float), -1.0, 1.0)
    if len(mu) == 0:
        return mu
    f = lambda m: math.fsum(np.clip(mu - m, -1.0, 1.0))
    if f(0.0) != 0.0:
        m = brentq(f, -2.0, 2.0, xtol=1e-16)
        mu = np.clip(mu - m, -1.0, 1.0)
    for _ in range(4):
        res = math.fsum(mu)
        if res == 0.0:
            break
        i = int(np.argmin(np.abs(mu)))
        mu[i] -= res
    return mu


def smooth_solution(sol: SdpSolution, delta: float) -> SdpSolution:
    """Scale every vi by (1 - delta) and add an orthogonal fresh part.

    Gives mu' = (1 - delta) mu and rho' = (1 - delta)^2 rho for i != j.
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    if delta == 0.0:
        return sol
    n, d = sol.V.shape
    a = 1.0 - delta
    b = math.sqrt(1.0 - a * a)
    V = np.hstack([a * sol.V, b * np.eye(n)])
    v0 = np.concatenate([sol.v0, np.zeros(n)])
    return SdpSolution(v0, V, dict(sol.info))


def repair_near_integral(sol: SdpSolution, threshold: float) -> SdpSolution:
    """Replace short orthogonal parts (norm < threshold) by fresh orthogonal
    directions of the same length."""
    w = sol.w
    norms = np.linalg.norm(w, axis=1)
    hit = np.nonzero(norms < threshold)[0]
    if len(hit) == 0:
        return sol
    mu = sol.mu
    extra = np.zeros((sol.n, len(hit)))
    extra[hit, np.arange(len(hit))] = norms[hit]
    base = sol.V.copy()
    base[hit] = np.outer(mu[hit], sol.v0)
    V = np.hstack([base, extra])
    v0 = np.concatenate([sol.v0, np.zeros(len(hit))])
    return SdpSolution(v0, V, dict(sol.info))


def measure_uncorrelation(sol: SdpSolution) -> float:
    """Average |<wbar_i, wbar_j>| over unordered pairs i < j."""
    n = sol.n
    if n < 2:
        return 0.0
    Wb = sol.wbar
    G = np.abs(Wb @ Wb.T)
    iu = np.triu_indices(n, 1)
    return float(G[iu].mean())


# ---------------------------------------------------------------------------
# rounding


def round_once(sol: SdpSolution, biases: BiasVector, seed) -> np.ndarray:
    """x_i = -1 iff <wbar_i, g> < Phi^-1((1 - r_i)/2) for one Gaussian g."""
    r = np.asarray(biases.r if isinstance(biases, BiasVector) else biases, dtype=float)
    if r.shape != (sol.n,):
        raise DimensionMismatch("one bias per vertex expected")
    Wb = sol.wbar
    g = check_random_state(seed).standard_normal(Wb.shape[1])
    with np.errstate(divide="ignore"):
        thr = ndtri((1.0 - r) / 2.0)
    return np.where(Wb @ g < thr, -1, 1)


def rebalance(x, seed) -> np.ndarray:
    """Flip |b| uniformly chosen majority vertices, b = sum(x)/2."""
    x = np.asarray(x, dtype=int).copy()
    n = len(x)
    if n % 2:
        raise InfeasibleBalance("odd vertex count")
    b = int(x.sum()) // 2
    if b == 0:
        return x
    side = 1 if b > 0 else -1
    idx = np.nonzero(x == side)[0]
    flip = check_random_state(seed).choice(idx, size=abs(b), replace=False)
    x[flip] = -side
    assert x.sum() == 0
    return x


@dataclass(frozen=True)
class RoundingParams:
    mode: str = "pairing"
    cparam: float = 0.8056
    f: Optional[BoostFunction] = BoostFunction(0.478, 1.618)
    delta_smooth: float = 1e-5
    trials: int = 100
    seed: int = 0
    repair_threshold: float = 1e-3

    def __post_init__(self):
        if self.mode not in ("linear", "pairing"):
            raise ValueError("mode must be 'linear' or 'pairing'")
        if self.mode == "pairing" and self.f is None:
            raise ValueError("pairing mode needs a boost function")
        if self.trials < 1:
            raise ValueError("trials must be positive")


def select_biases(mu, params: RoundingParams) -> BiasVector:
    if params.mode == "linear":
        return select_bias_linear(mu, params.cparam)
    return select_bias_pairing(mu, params.cparam, params.f)


def run_max_bisection(graph: Graph, params: RoundingParams, sol: Optional[SdpSolution] = None) -> Dict[str, object]:
    """SDP, repair, smoothing, biased rounding and rebalancing; best of
    ``params.trials`` bisections."""
    if graph.n % 2:
        raise InfeasibleBalance("odd vertex count")
    ss = np.random.SeedSequence(params.seed)
    sdp_seed, round_ss = ss.spawn(2)
    if sol is None:
        sol = solve_basic_sdp(graph, seed=int(sdp_seed.generate_state(1)[0]))
    sdp_val = sdp_value(graph, sol)
    prepared = smooth_solution(repair_near_integral(sol, params.repair_threshold), params.delta_smooth)
    biases = select_biases(balance_mu(prepared.mu), params)
    xs_val, ys_val, imb = [], [], []
    best_y, best_val = None, -np.inf
    for child in round_ss.spawn(params.trials):
        s1, s2 = (int(v) for v in child.generate_state(2))
        x = round_once(prepared, biases, s1)
        y = rebalance(x, s2)
        vx, vy = cut_value(graph, x), cut_value(graph, y)
        xs_val.append(vx)
        ys_val.append(vy)
        imb.append(int(x.sum()) // 2)
        if vy > best_val:
            best_y, best_val = y, vy
    return {
        "best_y": best_y,
        "best_value": best_val,
        "stats": {
            "sdp_value": sdp_val,
            "mean_val_x": float(np.mean(xs_val)),
            "std_val_x": float(np.std(xs_val)),
            "mean_val_y": float(np.mean(ys_val)),
            "std_val_y": float(np.std(ys_val)),
            "mean_abs_imbalance": float(np.mean(np.abs(imb))),
            "std_imbalance": float(np.std(imb)),
            "uncorrelation": measure_uncorrelation(prepared),
            "triangle_violation": sol.triangle_violation(),
        },
    }


# ---------------------------------------------------------------------------
# estimator wrapper


class MaxBisection(BaseEstimator):
    """Estimator-style wrapper: ``fit`` solves the SDP of a graph and
    ``predict`` returns the best rounded bisection."""

    def __init__(self, mode: str = "pairing", c: float = 0.8056, knee: float = 0.478, slope: float = 1.618,
                 delta: float = 1e-5, trials: int = 100, seed: int = 0, rank: Optional[int] = None):
        self.mode = mode
        self.c = c
        self.knee = knee
        self.slope = slope
        self.delta = delta
        self.trials = trials
        self.seed = seed
        self.rank = rank

    def _params(self) -> RoundingParams:
        f = BoostFunction(self.knee, self.slope) if self.mode == "pairing" else None
        return RoundingParams(self.mode, self.c, f, self.delta, self.trials, self.seed)

    def fit(self, graph: Graph, y=None):
        if not isinstance(graph, Graph):
            raise TypeError("fit expects a Graph")
        self._params()
        self.solution_ = solve_basic_sdp(graph, rank=self.rank, seed=self.seed)
        self.sdp_value_ = sdp_value(graph, self.solution_)
        self.n_vertices_ = graph.n
        return self

    def transform(self, graph: Graph) -> np.ndarray:
        """Configuration rows (mu_i, mu_j, rho_ij) of every edge."""
        self._check_fitted(graph)
        mu, rho = self.solution_.mu, self.solution_.rho
        return np.array([(mu[i], mu[j], rho[i, j]) for i, j, _ in graph.edges]).reshape(-1, 3)

    def predict(self, graph: Graph) -> np.ndarray:
        self._check_fitted(graph)
        res = run_max_bisection(graph, self._params(), sol=self.solution_)
        self.best_value_ = res["best_value"]
        self.stats_ = res["stats"]
        return res["best_y"]

    def score(self, graph: Graph, y=None) -> float:
        return cut_value(graph, self.predict(graph))

    def _check_fitted(self, graph: Graph):
        if not hasattr(self, "solution_"):
            raise RuntimeError("call fit first")
        if graph.n != self.n_vertices_:
            raise DimensionMismatch("graph differs from the fitted one")
