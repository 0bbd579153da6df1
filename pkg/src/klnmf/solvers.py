"""MMBPG and MMBPGe for KL-NMF.

Both methods build the Jensen majorizer of the KL loss at the current
iterate ``Z^k`` and take one Bregman proximal gradient step on it with the
separable kernel of :mod:`klnmf.bregman`. Each entry of the step has a closed
form, so ``W`` and ``H`` are updated simultaneously.

MMBPGe extrapolates ``Y^k = Z^k + beta_k (Z^k - Z^{k-1})`` with the Nesterov
schedule and restarts (``Y^k = Z^k``, ``theta = 1``) when ``Y^k`` leaves the
positive orthant or when ``D(Z^k, Y^k) > rho * D(Z^{k-1}, Z^k)``. The
majorizer is always built at ``Z^k``; only the gradient and kernel terms of
the step are evaluated at ``Y^k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _ext
from .bregman import bregman_distance, grad_phi
from .errors import ConfigError, DomainError
from .matrix import FactorPair, as_matrix
from .model import (
    KLProblem,
    MajorizerState,
    build_majorizer,
    grad_majorizer,
    objective,
)
from .trace import SolverTrace, StepInfo, drive

__all__ = [
    "SolverConfig",
    "ExtrapolationState",
    "prox_step_l1",
    "prox_step_sqfro",
    "assemble_P",
    "step_sizes",
    "potential_M",
    "theta_next",
    "mmbpg_step",
    "mmbpge_step",
    "potential_value",
    "run_solver",
]

ALGORITHMS = ("mmbpg", "mmbpge")
STEP_MODES = ("joint", "split")


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`run_solver`.

    ``lambda_scale_w`` and ``lambda_scale_h`` multiply the reciprocal step
    ``1 / L``; the defaults give ``lambda_k = 1 / L_k``. With
    ``strict_step=True`` every step size is further divided by
    ``1 + strict_eps`` so that ``lambda_k L_k < 1`` holds strictly.
    ``potential_m_position`` places ``M`` on the admissible interval
    ``(rho (1 + lambda L) / lambda, 1 / lambda)`` in log scale: 0.5 is the
    geometric midpoint. ``extrapolate=False`` forces ``beta = 0``.
    """

    algorithm: str = "mmbpge"
    step_mode: str = "joint"
    lambda_scale_w: float = 1.0
    lambda_scale_h: float = 1.0
    strict_step: bool = False
    strict_eps: float = 0.05
    rho: float = 0.999
    max_iter: int = 3000
    tol: float = 1e-9
    potential_m_position: float = 0.5
    trace_every: int = 10
    seed: int = 0
    extrapolate: bool = True
    metrics: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.step_mode not in STEP_MODES:
            raise ConfigError(f"step_mode must be one of {STEP_MODES}, got {self.step_mode!r}")
        if not (0.0 < self.rho <= 1.0):
            raise ConfigError(f"rho must lie in (0, 1], got {self.rho}")
        if not (self.lambda_scale_w > 0 and self.lambda_scale_h > 0):
            raise ConfigError("step-size scales must be positive")
        if self.strict_eps <= 0:
            raise ConfigError("strict_eps must be positive")
        if self.max_iter < 0 or self.trace_every < 1:
            raise ConfigError("max_iter must be >= 0 and trace_every >= 1")
        if self.tol < 0:
            raise ConfigError("tol must be nonnegative")

    @property
    def lambda_rule(self) -> str:
        if self.lambda_scale_w == 1.0 and self.lambda_scale_h == 1.0:
            return "reciprocal_L"
        return "scaled"


@dataclass(frozen=True)
class ExtrapolationState:
    """Momentum state carried between MMBPGe steps.

    ``theta`` is the most recent Nesterov parameter and ``Z_prev`` the
    previous iterate. ``dist_prev`` caches ``D(Z_prev, Z)`` for the restart
    test so it is never recomputed.
    """

    theta: float
    Z_prev: FactorPair
    dist_prev: float = 0.0

    @classmethod
    def initial(cls, Z0: FactorPair) -> "ExtrapolationState":
        return cls(theta=1.0, Z_prev=Z0, dist_prev=0.0)


def theta_next(theta: float) -> float:
    return (1.0 + math.sqrt(1.0 + 4.0 * theta * theta)) / 2.0


def prox_step_l1(P, mu_lambda: float) -> np.ndarray:
    """Entrywise minimizer of ``p x + mu_lambda x - log x + x^2 / 2`` over ``x > 0``."""
    if mu_lambda < 0:
        raise ConfigError("mu_lambda must be nonnegative")
    return _ext.prox_values(as_matrix(P), float(mu_lambda), _ext.KIND_L1)


def prox_step_sqfro(P, mu_lambda: float) -> np.ndarray:
    """Entrywise minimizer of ``p x + mu_lambda x^2 / 2 - log x + x^2 / 2`` over ``x > 0``."""
    if mu_lambda < 0:
        raise ConfigError("mu_lambda must be nonnegative")
    return _ext.prox_values(as_matrix(P), float(mu_lambda), _ext.KIND_SQFRO)


def assemble_P(
    s: MajorizerState, Y: FactorPair, lambda_w: float, lambda_h: float
) -> tuple[np.ndarray, np.ndarray]:
    """Linear coefficients of the separable step subproblem at ``Y``.

    ``P = lambda_w grad_W fhat(Y) - grad_W phi(Y)`` and likewise ``Q`` for H.
    """
    gW, gH = grad_majorizer(s, Y)
    pW, pH = grad_phi(Y)
    return lambda_w * gW - pW, lambda_h * gH - pH


def step_sizes(s: MajorizerState, cfg: SolverConfig) -> tuple[float, float, float]:
    """Return ``(lambda_w, lambda_h, L)`` for the configured step rule.

    ``L`` is the constant reported in traces: ``L_joint`` in joint mode and
    ``max(L_w, L_h)`` in split mode.
    """
    shrink = 1.0 / (1.0 + cfg.strict_eps) if cfg.strict_step else 1.0
    if cfg.step_mode == "joint":
        lw = cfg.lambda_scale_w / s.L_joint
        lh = cfg.lambda_scale_h / s.L_joint
        L = s.L_joint
    else:
        lw = cfg.lambda_scale_w / s.L_w
        lh = cfg.lambda_scale_h / s.L_h
        L = max(s.L_w, s.L_h)
    lw *= shrink
    lh *= shrink
    if not (lw > 0 and lh > 0):
        raise ConfigError("step sizes must be positive")
    return lw, lh, L


def potential_M(lam: float, lamL: float, rho: float, position: float = 0.5) -> float:
    """Pick ``M`` on ``(rho (1 + lamL) / lam, 1 / lam)`` at a log-scale position.

    ``position=0.5`` gives the geometric midpoint ``sqrt(rho (1 + lamL)) / lam``.
    The interval is empty when ``rho (1 + lamL) >= 1``; the same formula is
    still returned so that monitoring continues.
    """
    lo = rho * (1.0 + lamL)
    return lo ** (1.0 - position) / lam


def _monitor_M(s: MajorizerState, cfg: SolverConfig, lw: float, lh: float) -> float:
    if cfg.step_mode == "joint":
        lam, lamL = min(lw, lh), max(lw, lh) * s.L_joint
    else:
        lam, lamL = min(lw, lh), max(lw * s.L_w, lh * s.L_h)
    return potential_M(lam, lamL, cfg.rho, cfg.potential_m_position)


def _prox_update(
    p: KLProblem, s: MajorizerState, Y: FactorPair, lw: float, lh: float
) -> FactorPair:
    kind = p.reg.prox_kind
    W = _ext.prox_block(
        s.S_W, Y.W, np.ascontiguousarray(Y.H.sum(axis=1)), lw, p.reg.mu_w * lw, kind, 1
    )
    H = _ext.prox_block(
        s.S_H, Y.H, np.ascontiguousarray(Y.W.sum(axis=0)), lh, p.reg.mu_h * lh, kind, 0
    )
    Z = FactorPair(W, H)
    if not Z.is_positive():
        raise DomainError("step produced a nonpositive entry (underflow)")
    return Z


def mmbpg_step(
    p: KLProblem, Z: FactorPair, cfg: SolverConfig, state: Optional[MajorizerState] = None
) -> tuple[FactorPair, StepInfo]:
    """One MMBPG step from ``Z``."""
    s = state if state is not None else build_majorizer(p, Z)
    lw, lh, L = step_sizes(s, cfg)
    Z_next = _prox_update(p, s, Z, lw, lh)
    info = StepInfo(lambda_w=lw, lambda_h=lh, L=L, M=_monitor_M(s, cfg, lw, lh))
    return Z_next, info


def mmbpge_step(
    p: KLProblem, Z: FactorPair, ext: ExtrapolationState, cfg: SolverConfig
) -> tuple[FactorPair, ExtrapolationState, StepInfo]:
    """One MMBPGe step from ``Z`` with momentum state ``ext``."""
    s = build_majorizer(p, Z)
    theta = theta_next(ext.theta)
    beta = (ext.theta - 1.0) / theta if cfg.extrapolate else 0.0
    reason = "none"
    if beta == 0.0:
        Y = Z
    else:
        Y = FactorPair(Z.W + beta * (Z.W - ext.Z_prev.W), Z.H + beta * (Z.H - ext.Z_prev.H))
        if not Y.is_positive():
            reason = "nonpositive"
        elif bregman_distance(Z, Y) > cfg.rho * ext.dist_prev:
            reason = "distance_test"
        if reason != "none":
            Y = Z
            theta = 1.0
            beta = 0.0
    lw, lh, L = step_sizes(s, cfg)
    Z_next = _prox_update(p, s, Y, lw, lh)
    dist = bregman_distance(Z, Z_next)
    info = StepInfo(
        lambda_w=lw,
        lambda_h=lh,
        L=L,
        M=_monitor_M(s, cfg, lw, lh),
        restart_reason=reason,
        beta=beta,
        bregman_step=dist,
    )
    return Z_next, ExtrapolationState(theta=theta, Z_prev=Z, dist_prev=dist), info


def potential_value(p: KLProblem, Z_curr: FactorPair, Z_next: FactorPair, M: float) -> float:
    """``Psi(Z_next) + M * D(Z_curr, Z_next)``."""
    if M < 0:
        raise ConfigError("M must be nonnegative")
    return objective(p, Z_next) + M * bregman_distance(Z_curr, Z_next)


class _MMBPGeStepper:
    def __init__(self, p, cfg, Z0):
        self.p = p
        self.cfg = cfg
        self.ext = ExtrapolationState.initial(Z0)

    def __call__(self, Z):
        Z_next, self.ext, info = mmbpge_step(self.p, Z, self.ext, self.cfg)
        return Z_next, info


def run_solver(p: KLProblem, Z0: FactorPair, cfg: SolverConfig) -> tuple[FactorPair, SolverTrace]:
    """Run MMBPG or MMBPGe from ``Z0`` and return the last iterate and its trace.

    ``Z0`` must be strictly positive. Scaling the initial point is the
    caller's job (see :func:`klnmf.data.initial_point`).
    """
    Z0.require_positive("initial point")
    if cfg.algorithm == "mmbpg":
        def step(Z):
            return mmbpg_step(p, Z, cfg)
    else:
        step = _MMBPGeStepper(p, cfg, Z0)
    return drive(
        p,
        Z0,
        step,
        algorithm=cfg.algorithm,
        max_iter=cfg.max_iter,
        tol=cfg.tol,
        trace_every=cfg.trace_every,
        metrics=cfg.metrics,
        with_potential=cfg.algorithm == "mmbpge",
    )
