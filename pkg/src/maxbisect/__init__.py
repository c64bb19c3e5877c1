"""Biased hyperplane rounding for Max Bisection with a certified ratio prover."""
from .interval_core import Interval
from .config_space import ConfigCube, Configuration, in_conf, tilde_rho_box
from .gaussian import gamma_enclosure, lambda_fn
from .rounding import BoostFunction, alpha_cf, alpha_value, select_bias_linear, select_bias_pairing
from .prover import ProofCertificate, ProofParams, replay_certificate, verify
from .pipeline import Graph, MaxBisection, RoundingParams, run_max_bisection

__version__ = "0.1.0"

__all__ = [
    "Interval", "ConfigCube", "Configuration", "in_conf", "tilde_rho_box",
    "gamma_enclosure", "lambda_fn", "BoostFunction", "alpha_cf", "alpha_value",
    "select_bias_linear", "select_bias_pairing", "ProofCertificate", "ProofParams",
    "replay_certificate", "verify", "Graph", "MaxBisection", "RoundingParams",
    "run_max_bisection",
]
