"""maxbisect command line.

Exit codes: 0 success; 1 usage error; 2 failure witness (verify) or a
failed statistical band (oracle) or a rejected certificate (replay);
3 depth limit exhausted (verify).
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_DEPTH = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_rounding_flags(p, need_mode=True):
    if need_mode:
        p.add_argument("--mode", choices=("linear", "pairing"), required=True)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--knee", type=float, default=0.478)
    p.add_argument("--slope", type=float, default=1.618)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="maxbisect", description="Biased hyperplane rounding for Max Bisection.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="certify a lower bound on the approximation ratio")
    _add_rounding_flags(v)
    v.add_argument("--delta", type=float, default=1e-5)
    v.add_argument("--target", type=float, required=True)
    v.add_argument("--max-depth", type=int, default=40)
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--symmetry", action="store_true", help="only prove the half mu1 >= 0")
    v.add_argument("--record-leaves", action="store_true", help="store every leaf for replay")
    v.add_argument("--with-timing", action="store_true",
                   help="store wall time in the certificate (breaks byte-identical reruns)")
    v.add_argument("--out", default=None)

    r = sub.add_parser("replay", help="re-check a certificate")
    r.add_argument("--cert", required=True)
    r.add_argument("--fraction", type=float, default=0.01)
    r.add_argument("--seed", type=int, default=0)

    o = sub.add_parser("optimize", help="numerical search for worst configurations")
    _add_rounding_flags(o)
    o.add_argument("--steps", type=int, default=0, help="pattern-search steps over (c, knee, slope)")
    o.add_argument("--out", default=None)

    pl = sub.add_parser("plot", help="CSV data for a figure")
    pl.add_argument("--figure", required=True)
    pl.add_argument("--resolution", type=int, default=200)
    pl.add_argument("--out", default=None)

    orc = sub.add_parser("oracle", help="Monte Carlo and brute-force cross-checks")
    orc.add_argument("--check", choices=("lambda", "gamma", "covariance"), required=True)
    orc.add_argument("--samples", type=int, default=1_000_000)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--out", default=None)

    rd = sub.add_parser("round", help="run the full pipeline on a graph")
    rd.add_argument("--graph", required=True)
    _add_rounding_flags(rd)
    rd.add_argument("--delta", type=float, default=1e-5)
    rd.add_argument("--trials", type=int, default=100)
    rd.add_argument("--seed", type=int, default=0)
    rd.add_argument("--out", default=None)
    return ap


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _default_c(mode: str, c: Optional[float]) -> float:
    if c is not None:
        return c
    return 0.86451 if mode == "linear" else 0.8056


def cmd_verify(a) -> int:
    from .prover import ProofParams, verify
    from .rounding import BoostFunction

    boost = BoostFunction(a.knee, a.slope) if a.mode == "pairing" else None
    params = ProofParams(a.mode, _default_c(a.mode, a.c), a.delta, boost)
    cert = verify(a.mode, params, a.target, max_depth=a.max_depth, workers=a.workers,
                  symmetry=a.symmetry, record_leaves=a.record_leaves)
    text = cert.to_json(include_timing=a.with_timing) + "\n"
    if a.out:
        _emit(text, a.out)
    counts = ", ".join(f"{k}={v}" for k, v in cert.counts.items())
    print(f"status: {cert.status}  target: {a.target}  certified_bound: {cert.certified_bound:.17g}")
    print(f"counts: {counts}  deepest: {cert.deepest}  wall_time: {cert.wall_time:.1f}s")
    if cert.status == "failure":
        for cube in cert.failures:
            print("witness: " + " x ".join(f"[{lo:.17g}, {hi:.17g}]" for lo, hi in cube))
        return EXIT_FAIL
    if cert.status == "depth_exhausted":
        return EXIT_DEPTH
    return EXIT_OK


def cmd_replay(a) -> int:
    from .prover import ProofCertificate, replay_certificate

    with open(a.cert) as fh:
        cert = ProofCertificate.from_json(fh.read())
    ok = replay_certificate(cert, a.fraction, seed=a.seed)
    print("replay: " + ("ok" if ok else "REJECTED"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_optimize(a) -> int:
    from .optimizer import alpha_of_c, maximize_linear, optimize_pairing

    if a.mode == "linear":
        if a.c is None:
            c, ratio = maximize_linear()
        else:
            c = a.c
        rep = alpha_of_c(c)
        params = {"c": c}
    else:
        rep = optimize_pairing((_default_c("pairing", a.c), a.knee, a.slope), steps=a.steps)
        params = dict(zip(("c", "knee", "slope"), rep.best_params))
    out = {
        "mode": a.mode,
        "params": {k: format(v, ".17g") for k, v in params.items()},
        "best_ratio": format(rep.best_ratio, ".17g"),
        "worst_configs": [
            {"mu1": format(cf.mu1, ".17g"), "mu2": format(cf.mu2, ".17g"), "rho": format(cf.rho, ".17g"),
             "ratio": format(v, ".17g")}
            for cf, v in rep.worst_configs
        ],
    }
    _emit(json.dumps(out, indent=1, sort_keys=True) + "\n", a.out)
    return EXIT_OK


def cmd_plot(a) -> int:
    from .optimizer import FIGURES, emit_plot_data, write_csv

    if a.figure not in FIGURES:
        print(f"unknown figure {a.figure!r}; choose from {', '.join(FIGURES)}", file=sys.stderr)
        return EXIT_USAGE
    if a.resolution < 2:
        print("resolution must be at least 2", file=sys.stderr)
        return EXIT_USAGE
    header, rows = emit_plot_data(a.figure, a.resolution)
    _emit(write_csv(header, rows), a.out)
    return EXIT_OK


def oracle_lambda_grid(samples: int, seed: int, k: float = 4.0):
    """Rows (rho~, r1, r2, mc mean, std error, enclosure lo, hi, ok) on a
    7 x 7 x 7 grid."""
    from .gaussian import lambda_fn
    from .oracle import mc_same_side_prob

    grid = np.linspace(-1.0, 1.0, 7)
    rows = []
    idx = 0
    for rt in grid:
        for r1 in grid:
            for r2 in grid:
                est = mc_same_side_prob(float(rt), float(r1), float(r2), samples, seed + idx)
                enc = lambda_fn(float(rt), float(r1), float(r2))
                lo, hi = float(enc.lo), float(enc.hi)
                gap = max(lo - est.mean, est.mean - hi, 0.0)
                rows.append((float(rt), float(r1), float(r2), est.mean, est.std_error, lo, hi,
                             gap <= k * est.std_error + 1e-12))
                idx += 1
    return rows


def cmd_oracle(a) -> int:
    from .gaussian import bivariate_cdf
    from .oracle import mc_quadrant_prob, mc_sign_covariance

    lines = []
    if a.check == "lambda":
        rows = oracle_lambda_grid(a.samples, a.seed)
        ok = all(r[-1] for r in rows)
        lines.append("rho_t,r1,r2,mc_mean,std_error,lambda_lo,lambda_hi,pass")
        lines += [",".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in r) for r in rows]
        print(f"lambda oracle: {sum(r[-1] for r in rows)}/{len(rows)} within 4 sigma", file=sys.stderr)
    elif a.check == "gamma":
        grid = (0.1, 0.5, 0.9)
        ok = True
        lines.append("rho_t,q1,q2,mc_mean,std_error,gamma_lo,gamma_hi,pass")
        idx = 0
        for rt in (-0.8, 0.0, 0.5, 0.95):
            for q1 in grid:
                for q2 in grid:
                    est = mc_quadrant_prob(rt, q1, q2, a.samples, a.seed + idx)
                    enc = bivariate_cdf(rt, q1, q2)
                    gap = max(float(enc.lo) - est.mean, est.mean - float(enc.hi), 0.0)
                    good = gap <= 4 * est.std_error + 1e-12
                    ok &= good
                    lines.append(",".join(format(v, ".17g") for v in (rt, q1, q2, est.mean, est.std_error,
                                                                       float(enc.lo), float(enc.hi))) + f",{good}")
                    idx += 1
    else:
        from .gaussian import bivariate_cdf as gam

        ok = True
        lines.append("rho_t,r1,r2,mc_cov,std_error,predicted,pass")
        idx = 0
        for rt in (-0.6, 0.0, 0.7):
            for r1, r2 in ((0.0, 0.0), (0.3, -0.2), (0.5, 0.5)):
                cov, se = mc_sign_covariance(rt, r1, r2, a.samples, a.seed + idx)
                q1, q2 = (1 - r1) / 2, (1 - r2) / 2
                enc = gam(rt, q1, q2)
                pred = 2 * (float(enc.lo) + float(enc.hi)) - 4 * q1 * q2
                good = abs(cov - pred) <= 4 * se + 1e-9
                ok &= good
                lines.append(",".join(format(v, ".17g") for v in (rt, r1, r2, cov, se, pred)) + f",{good}")
                idx += 1
    _emit("\n".join(lines) + "\n", a.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_round(a) -> int:
    from .pipeline import RoundingParams, read_graph, run_max_bisection
    from .rounding import BoostFunction

    g = read_graph(a.graph)
    if g.n % 2:
        print("graph has an odd number of vertices", file=sys.stderr)
        return EXIT_USAGE
    f = BoostFunction(a.knee, a.slope) if a.mode == "pairing" else None
    params = RoundingParams(a.mode, _default_c(a.mode, a.c), f, a.delta, a.trials, a.seed)
    res = run_max_bisection(g, params)
    report = {
        "graph": a.graph,
        "n": g.n,
        "mode": a.mode,
        "best_value": format(res["best_value"], ".17g"),
        "best_assignment": [int(v) for v in res["best_y"]],
        "stats": {k: format(float(v), ".17g") for k, v in res["stats"].items()},
    }
    _emit(json.dumps(report, indent=1, sort_keys=True) + "\n", a.out)
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "replay": cmd_replay,
    "optimize": cmd_optimize,
    "plot": cmd_plot,
    "oracle": cmd_oracle,
    "round": cmd_round,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"maxbisect {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
