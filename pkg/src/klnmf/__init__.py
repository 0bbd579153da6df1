"""KL-divergence NMF with majorization-minimization Bregman proximal gradient methods.

Solvers: MMBPG and its extrapolated variant MMBPGe (:mod:`klnmf.solvers`),
plus MU, MUe, CCD and AGD baselines (:mod:`klnmf.baselines`).
"""

__version__ = "0.1.0"

from . import _ext
from .baselines import BaselineConfig, run_baseline
from .bregman import bregman_distance, grad_phi, phi
from .data import SynthSpec, generate_synthetic, initial_point, load_movielens
from .errors import (
    ConfigError,
    DegenerateMetricError,
    DimensionError,
    DomainError,
    KLNMFError,
    ParseError,
    SolverDivergenceError,
)
from .matrix import FactorPair
from .model import (
    KLProblem,
    Regularizer,
    build_majorizer,
    grad_f,
    kkt_residuals,
    kl_divergence,
    objective,
    relative_error,
)
from .solvers import SolverConfig, run_solver

BACKEND = _ext.BACKEND

__all__ = [
    "BACKEND",
    "BaselineConfig",
    "ConfigError",
    "DegenerateMetricError",
    "DimensionError",
    "DomainError",
    "FactorPair",
    "KLNMFError",
    "KLProblem",
    "ParseError",
    "Regularizer",
    "SolverConfig",
    "SolverDivergenceError",
    "SynthSpec",
    "bregman_distance",
    "build_majorizer",
    "generate_synthetic",
    "grad_f",
    "grad_phi",
    "initial_point",
    "kkt_residuals",
    "kl_divergence",
    "load_movielens",
    "objective",
    "phi",
    "relative_error",
    "run_baseline",
    "run_solver",
]
