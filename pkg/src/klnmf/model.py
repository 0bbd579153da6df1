"""The KL-NMF problem: loss, regularizer, gradients, majorizer and metrics.

The majorizer built at an anchor ``Z^k = (W^k, H^k)`` uses the Jensen weights
``alpha[i, l, j] = W^k[i, l] H^k[l, j] / (W^k H^k)[i, j]``. The m x r x n weight
tensor is never formed; every use only needs its marginals against ``X``::

    S_W = W^k * ((X / W^k H^k) @ H^k.T)      # sum_j alpha[i, l, j] X[i, j]
    S_H = H^k * (W^k.T @ (X / W^k H^k))      # sum_i alpha[i, l, j] X[i, j]
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _ext
from .errors import ConfigError, DegenerateMetricError, DimensionError, DomainError
from .matrix import FactorPair, as_matrix

__all__ = [
    "Regularizer",
    "KLProblem",
    "MajorizerState",
    "kl_divergence",
    "objective",
    "grad_f",
    "build_majorizer",
    "grad_majorizer",
    "majorizer_value",
    "relative_error",
    "kkt_residuals",
]

REG_KINDS = ("none", "l1", "fro")
RELATIVE_ERROR_FLOOR = 1e-12


@dataclass(frozen=True)
class Regularizer:
    """Separable penalty ``g(W, H)``.

    ``kind="l1"`` is ``mu_w * |W|_1 + mu_h * |H|_1``; ``kind="fro"`` is
    ``mu_w/2 * |W|_F^2 + mu_h/2 * |H|_F^2``.
    """

    kind: str = "none"
    mu_w: float = 0.0
    mu_h: float = 0.0

    def __post_init__(self):
        if self.kind not in REG_KINDS:
            raise ConfigError(f"unknown regularizer {self.kind!r}; expected {REG_KINDS}")
        if self.mu_w < 0 or self.mu_h < 0:
            raise ConfigError("regularization weights must be nonnegative")
        if self.kind == "none" and (self.mu_w != 0 or self.mu_h != 0):
            raise ConfigError("regularizer 'none' requires mu_w == mu_h == 0")

    @property
    def is_zero(self) -> bool:
        return self.kind == "none" or (self.mu_w == 0 and self.mu_h == 0)

    @property
    def prox_kind(self) -> int:
        return _ext.KIND_L1 if self.kind == "l1" else _ext.KIND_SQFRO

    def value(self, Z: FactorPair) -> float:
        if self.kind == "l1":
            return self.mu_w * float(np.abs(Z.W).sum()) + self.mu_h * float(np.abs(Z.H).sum())
        if self.kind == "fro":
            return 0.5 * (self.mu_w * float(np.vdot(Z.W, Z.W)) + self.mu_h * float(np.vdot(Z.H, Z.H)))
        return 0.0

    def gradient(self, Z: FactorPair) -> tuple[np.ndarray, np.ndarray]:
        """Gradient of ``g`` on the open positive orthant."""
        if self.kind == "l1":
            return np.full_like(Z.W, self.mu_w), np.full_like(Z.H, self.mu_h)
        if self.kind == "fro":
            return self.mu_w * Z.W, self.mu_h * Z.H
        return np.zeros_like(Z.W), np.zeros_like(Z.H)


@dataclass
class KLProblem:
    """Observed nonnegative matrix ``X`` (m x n), inner rank ``r`` and penalty."""

    X: np.ndarray
    r: int
    reg: Regularizer = field(default_factory=Regularizer)

    def __post_init__(self):
        self.X = as_matrix(self.X)
        if not np.all(np.isfinite(self.X)):
            raise DomainError("X must be finite")
        if np.any(self.X < 0):
            raise DomainError("X must be entrywise nonnegative")
        if not np.any(self.X > 0):
            raise DomainError("X must have at least one positive entry")
        if int(self.r) != self.r or self.r < 1:
            raise ConfigError(f"r must be a positive integer, got {self.r}")
        self.r = int(self.r)
        if self.r > min(self.X.shape):
            warnings.warn(
                f"r={self.r} exceeds min(m, n)={min(self.X.shape)}", stacklevel=2
            )

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @cached_property
    def relative_error_denominator(self) -> float:
        """``sum X log(n X / rowsum(X))`` with zero entries contributing 0."""
        X = self.X
        rows = X.sum(axis=1, keepdims=True)
        pos = X > 0
        logs = np.zeros_like(X)
        with np.errstate(divide="ignore", invalid="ignore"):
            np.log(self.n * X / rows, out=logs, where=pos)
        return float(np.sum(X * logs))

    def check_factors(self, Z: FactorPair) -> None:
        m, n, r = Z.shape
        if (m, n, r) != (self.m, self.n, self.r):
            raise DimensionError(
                f"factors of shape (m, n, r)={(m, n, r)} do not match problem "
                f"{(self.m, self.n, self.r)}"
            )


def _ratio(X: np.ndarray, WH: np.ndarray) -> tuple[np.ndarray, float]:
    R, kl, n_bad = _ext.kl_ratio(X, WH)
    if n_bad:
        raise DomainError(f"{n_bad} entries of WH are nonpositive or underflowed")
    return R, kl


def kl_divergence(X, WH) -> float:
    """``sum(X log(X / WH) - X + WH)`` with the convention ``0 log 0 = 0``."""
    X = as_matrix(X)
    WH = as_matrix(WH)
    if X.shape != WH.shape:
        raise DimensionError(f"shape mismatch {X.shape} vs {WH.shape}")
    kl, n_bad = _ext.kl_value(X, WH)
    if n_bad:
        raise DomainError("WH must be strictly positive")
    return float(kl)


def objective(p: KLProblem, Z: FactorPair) -> float:
    """``Psi(Z) = KL(X, WH) + g(Z)``."""
    p.check_factors(Z)
    return kl_divergence(p.X, Z.product()) + p.reg.value(Z)


def grad_f(p: KLProblem, Z: FactorPair) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the KL loss: ``(1 - X/WH) H^T`` and ``W^T (1 - X/WH)``."""
    p.check_factors(Z)
    R, _ = _ratio(p.X, Z.product())
    gW = Z.H.sum(axis=1)[None, :] - R @ Z.H.T
    gH = Z.W.sum(axis=0)[:, None] - Z.W.T @ R
    return gW, gH


@dataclass(frozen=True)
class MajorizerState:
    """Per-iteration majorizer data built at ``anchor``.

    Attributes
    ----------
    S_W, S_H : ndarray
        Marginal Jensen weights (m x r and r x n).
    L_joint, L_w, L_h : float
        Smooth-adaptable constants for the joint and block-split updates.
    anchor : FactorPair
    f_anchor : float
        KL loss at the anchor, a by-product of the construction.
    const : float
        Additive constant such that ``majorizer_value`` is exact.
    """

    S_W: np.ndarray
    S_H: np.ndarray
    L_joint: float
    L_w: float
    L_h: float
    anchor: FactorPair
    f_anchor: float
    const: float


def build_majorizer(p: KLProblem, anchor: FactorPair) -> MajorizerState:
    p.check_factors(anchor)
    if not anchor.is_positive():
        raise DomainError("majorizer anchor must be strictly positive")
    W, H = anchor.W, anchor.H
    WH = W @ H
    R, kl = _ratio(p.X, WH)
    S_W = W * (R @ H.T)
    S_H = H * (W.T @ R)
    floor = float(max(p.m, p.n))
    max_sw = float(S_W.max())
    max_sh = float(S_H.max())
    const = kl + float(np.vdot(S_W, np.log(W))) + float(np.vdot(S_H, np.log(H))) - float(WH.sum())
    return MajorizerState(
        S_W=S_W,
        S_H=S_H,
        L_joint=max(max_sw, max_sh, floor),
        L_w=max(max_sw, floor),
        L_h=max(max_sh, floor),
        anchor=anchor,
        f_anchor=kl,
        const=const,
    )


def _check_point(s: MajorizerState, Y: FactorPair) -> None:
    if not Y.same_shape(s.anchor):
        raise DimensionError("point and majorizer anchor have different shapes")
    if not Y.is_positive():
        raise DomainError("majorizer is only defined on strictly positive points")


def grad_majorizer(s: MajorizerState, Y: FactorPair) -> tuple[np.ndarray, np.ndarray]:
    _check_point(s, Y)
    gW = -s.S_W / Y.W + Y.H.sum(axis=1)[None, :]
    gH = -s.S_H / Y.H + Y.W.sum(axis=0)[:, None]
    return gW, gH


def majorizer_value(s: MajorizerState, p: KLProblem, Y: FactorPair) -> float:
    """Value of the majorizer of the KL loss built at ``s.anchor``, at ``Y``."""
    p.check_factors(Y)
    _check_point(s, Y)
    return (
        s.const
        - float(np.vdot(s.S_W, np.log(Y.W)))
        - float(np.vdot(s.S_H, np.log(Y.H)))
        + float(np.dot(Y.W.sum(axis=0), Y.H.sum(axis=1)))
    )


def relative_error(p: KLProblem, Z: FactorPair) -> float:
    """KL loss divided by ``sum X log(n X / rowsum(X))``.

    Raises
    ------
    DegenerateMetricError
        When the denominator is at most 1e-12 (e.g. every row of ``X`` is
        constant); report the raw objective instead.
    """
    denom = p.relative_error_denominator
    if not denom > RELATIVE_ERROR_FLOOR:
        raise DegenerateMetricError(
            f"relative error undefined: denominator {denom:.3g} <= "
            f"{RELATIVE_ERROR_FLOOR}; report the raw objective instead"
        )
    return kl_divergence(p.X, Z.product()) / denom


def kkt_residuals(p: KLProblem, Z: FactorPair, include_reg: bool = False) -> tuple[float, float]:
    """Norms of the normalized KKT complementarity residuals.

    Returns ``(|Wn * grad_W|_F, |Hn * grad_H|_F)`` where ``Wn`` has unit
    Euclidean columns and ``Hn`` unit Euclidean rows. The gradient is that of
    the KL loss; ``include_reg=True`` adds the penalty gradient.
    """
    Z.require_positive("KKT residual point")
    gW, gH = grad_f(p, Z)
    if include_reg:
        rW, rH = p.reg.gradient(Z)
        gW = gW + rW
        gH = gH + rH
    cn = np.sqrt(np.sum(Z.W * Z.W, axis=0))
    rn = np.sqrt(np.sum(Z.H * Z.H, axis=1))
    if np.any(cn == 0) or np.any(rn == 0):
        raise DomainError("zero column of W or zero row of H")
    kw = np.linalg.norm((Z.W / cn[None, :]) * gW)
    kh = np.linalg.norm((Z.H / rn[:, None]) * gH)
    return float(kw), float(kh)
