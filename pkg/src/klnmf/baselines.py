"""Reference algorithms for comparison runs: MU, MUe, CCD and AGD.

All four are alternating schemes (W first, then H with the new W). They are
driven by the same loop and termination rule as the MM solvers.

MUe is not guaranteed to converge when a penalty is present.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _ext
from .bregman import bregman_distance
from .errors import ConfigError, DomainError
from .matrix import FactorPair
from .model import KLProblem, _ratio, build_majorizer, grad_f, objective
from .solvers import ExtrapolationState, theta_next
from .trace import SolverTrace, StepInfo, drive

__all__ = [
    "BaselineConfig",
    "mu_step",
    "mue_step",
    "ccd_pass",
    "agd_step",
    "agd_initial_step",
    "run_baseline",
]

BASELINES = ("mu", "mue", "ccd", "agd")


@dataclass(frozen=True)
class BaselineConfig:
    algorithm: str = "mu"
    ccd_inner_iters: int = 100
    ccd_floor: float = 1e-15
    ccd_tol: float = 1e-12
    agd_c: float = 2.0
    agd_shrink: float = 0.5
    agd_sigma: float = 1e-4
    agd_max_backtracks: int = 50
    agd_floor: float = 1e-15
    rho: float = 0.999
    extrapolate: bool = True
    max_iter: int = 3000
    tol: float = 1e-9
    trace_every: int = 10
    metrics: bool = True

    def __post_init__(self):
        if self.algorithm not in BASELINES:
            raise ConfigError(f"algorithm must be one of {BASELINES}, got {self.algorithm!r}")
        if self.ccd_inner_iters < 1:
            raise ConfigError("ccd_inner_iters must be positive")
        if self.agd_c <= 1:
            raise ConfigError("agd_c must exceed 1")
        if not (0 < self.agd_shrink < 1) or not (0 < self.agd_sigma < 1):
            raise ConfigError("agd_shrink and agd_sigma must lie in (0, 1)")
        if not (0.0 < self.rho <= 1.0):
            raise ConfigError("rho must lie in (0, 1]")


# -- multiplicative updates -------------------------------------------------


def _mu_block(S: np.ndarray, c: np.ndarray, mu: float, kind: str) -> np.ndarray:
    # minimizer of -S log x + c x + penalty, given S = x_old * (ratio term)
    if np.any(c <= 0):
        raise DomainError("zero denominator in multiplicative update")
    if kind == "fro" and mu > 0:
        out = 2.0 * S / (c + np.sqrt(c * c + 4.0 * mu * S))
    elif kind == "l1":
        out = S / (c + mu)
    else:
        out = S / c
    if not np.all(out > 0):
        raise DomainError("multiplicative update lost positivity (degenerate data or underflow)")
    return out


def mu_step(p: KLProblem, Z: FactorPair) -> FactorPair:
    """One multiplicative update of W, then of H at the new W.

    With an l1 penalty the denominators gain ``mu_w`` / ``mu_h``; with a
    squared Frobenius penalty each block takes the exact minimizer of the
    Lee-Seung auxiliary function plus the penalty.
    """
    X = p.X
    reg = p.reg
    W, H = Z.W, Z.H
    R, _ = _ratio(X, W @ H)
    W = _mu_block(
        W * (R @ H.T), np.broadcast_to(H.sum(axis=1)[None, :], W.shape), reg.mu_w, reg.kind
    )
    R, _ = _ratio(X, W @ H)
    H = _mu_block(
        H * (W.T @ R), np.broadcast_to(W.sum(axis=0)[:, None], H.shape), reg.mu_h, reg.kind
    )
    return FactorPair(W, H)


def mue_step(
    p: KLProblem,
    Z: FactorPair,
    ext: ExtrapolationState,
    rho: float,
    extrapolate: bool = True,
) -> tuple[FactorPair, ExtrapolationState, str]:
    """MU applied at ``Y = Z + beta [Z - Z_prev]_+``.

    The momentum schedule and the distance restart test are the ones used by
    MMBPGe. Returns the new iterate, state and restart reason.
    """
    theta = theta_next(ext.theta)
    beta = (ext.theta - 1.0) / theta if extrapolate else 0.0
    reason = "none"
    if beta == 0.0:
        Y = Z
    else:
        Y = FactorPair(
            Z.W + beta * np.maximum(Z.W - ext.Z_prev.W, 0.0),
            Z.H + beta * np.maximum(Z.H - ext.Z_prev.H, 0.0),
        )
        if bregman_distance(Z, Y) > rho * ext.dist_prev:
            reason = "distance_test"
            Y = Z
            theta = 1.0
    Z_next = mu_step(p, Y)
    dist = bregman_distance(Z, Z_next)
    return Z_next, ExtrapolationState(theta=theta, Z_prev=Z, dist_prev=dist), reason


# -- cyclic coordinate descent ----------------------------------------------


def ccd_pass(
    p: KLProblem,
    Z: FactorPair,
    inner_iters: int = 100,
    floor: float = 1e-15,
    tol: float = 1e-12,
) -> FactorPair:
    """One outer CCD iteration: a coordinate sweep over W, then over H.

    Every coordinate receives up to ``inner_iters`` one-variable Newton steps
    on the KL loss, clipped below at ``floor`` and stopped early once the
    change is below ``tol`` (relative to ``max(1, x)``).
    """
    if not p.reg.is_zero:
        raise ConfigError("CCD supports only the unpenalized problem")
    X = p.X
    W = Z.W.copy()
    H = Z.H
    WH = W @ H
    _ext.ccd_rows(X, W, H, WH, int(inner_iters), float(floor), float(tol))
    Xt = np.ascontiguousarray(X.T)
    Ht = np.ascontiguousarray(H.T)
    Wt = np.ascontiguousarray(W.T)
    WHt = np.ascontiguousarray((W @ H).T)
    _ext.ccd_rows(Xt, Ht, Wt, WHt, int(inner_iters), float(floor), float(tol))
    return FactorPair(W, np.ascontiguousarray(Ht.T))


# -- alternating projected gradient -----------------------------------------


def agd_initial_step(p: KLProblem, Z0: FactorPair, c: float) -> float:
    """``1 / (c L0)`` with ``L0`` the smooth-adaptable constant at ``Z0``."""
    return 1.0 / (c * build_majorizer(p, Z0).L_joint)


def _prox_grad(x, g, t, mu, kind, floor):
    if kind == "l1":
        out = x - t * (g + mu)
    elif kind == "fro":
        out = (x - t * g) / (1.0 + t * mu)
    else:
        out = x - t * g
    return np.maximum(out, floor)


def _block_penalty(x, mu, kind):
    if kind == "l1":
        return mu * float(np.abs(x).sum())
    if kind == "fro":
        return 0.5 * mu * float(np.vdot(x, x))
    return 0.0


def agd_step(p: KLProblem, Z: FactorPair, cfg: BaselineConfig, step0: float) -> tuple[FactorPair, bool]:
    """Backtracking proximal gradient step on W, then on H.

    A trial ``x+`` is accepted when
    ``F(x+) <= F(x) + sigma * (<grad, x+ - x> + g(x+) - g(x))``.
    Returns ``(Z_next, ok)``; ``ok`` is False when a block exhausts its
    backtracks, in which case ``Z`` is returned unchanged.
    """
    reg = p.reg
    W, H = Z.W, Z.H
    for block in ("W", "H"):
        cur = FactorPair(W, H)
        F = objective(p, cur)
        gW, gH = grad_f(p, cur)
        x, g, mu = (W, gW, reg.mu_w) if block == "W" else (H, gH, reg.mu_h)
        gx = _block_penalty(x, mu, reg.kind)
        t = step0
        for _ in range(cfg.agd_max_backtracks + 1):
            x_new = _prox_grad(x, g, t, mu, reg.kind, cfg.agd_floor)
            trial = FactorPair(x_new, H) if block == "W" else FactorPair(W, x_new)
            try:
                F_new = objective(p, trial)
            except DomainError:
                F_new = math.inf
            decrease = float(np.vdot(g, x_new - x)) + _block_penalty(x_new, mu, reg.kind) - gx
            if F_new <= F + cfg.agd_sigma * decrease:
                break
            t *= cfg.agd_shrink
        else:
            return Z, False
        if block == "W":
            W = x_new
        else:
            H = x_new
    return FactorPair(W, H), True


# -- driver -----------------------------------------------------------------


def run_baseline(p: KLProblem, Z0: FactorPair, cfg: BaselineConfig) -> tuple[FactorPair, SolverTrace]:
    """Run one of the baseline algorithms with the shared stopping rule."""
    Z0.require_positive("initial point")
    if cfg.algorithm == "ccd" and not p.reg.is_zero:
        raise ConfigError("CCD supports only the unpenalized problem")

    if cfg.algorithm == "mu":
        def step(Z):
            return mu_step(p, Z), StepInfo()
    elif cfg.algorithm == "mue":
        state = {"ext": ExtrapolationState.initial(Z0)}

        def step(Z):
            Z_next, state["ext"], reason = mue_step(p, Z, state["ext"], cfg.rho, cfg.extrapolate)
            return Z_next, StepInfo(restart_reason=reason)
    elif cfg.algorithm == "ccd":
        def step(Z):
            return ccd_pass(p, Z, cfg.ccd_inner_iters, cfg.ccd_floor, cfg.ccd_tol), StepInfo()
    else:
        step0 = agd_initial_step(p, Z0, cfg.agd_c)

        def step(Z):
            Z_next, ok = agd_step(p, Z, cfg, step0)
            info = StepInfo(lambda_w=step0, lambda_h=step0)
            if not ok:
                info.failed = True
                info.message = "line search exhausted its backtracks"
            return Z_next, info

    return drive(
        p,
        Z0,
        step,
        algorithm=cfg.algorithm,
        max_iter=cfg.max_iter,
        tol=cfg.tol,
        trace_every=cfg.trace_every,
        metrics=cfg.metrics,
    )
