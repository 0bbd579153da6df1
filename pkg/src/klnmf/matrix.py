"""Dense matrix primitives and the factor pair container.

Matrices are C-contiguous ``float64`` numpy arrays; the helpers here add the
shape and domain checks the solvers rely on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

__all__ = [
    "as_matrix",
    "matmul",
    "elementwise",
    "frobenius_norm",
    "FactorPair",
]

_OPS = ("add", "sub", "mul", "div", "max0")


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a 2-D C-contiguous float64 array."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    return arr


def _check_finite(a: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{what} produced non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product ``a @ b`` with an explicit inner-dimension check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return _check_finite(a @ b, "matmul")


def elementwise(op: str, a, b=None) -> np.ndarray:
    """Apply an entrywise binary operation.

    Parameters
    ----------
    op : {"add", "sub", "mul", "div", "max0"}
        ``max0`` computes ``max(a, b)`` and defaults ``b`` to 0, i.e. the
        positive part ``[a]_+``.
    a : array_like
    b : array_like or float
        Same shape as ``a`` or a scalar.

    Raises
    ------
    DomainError
        ``div`` with any zero in the denominator.
    """
    if op not in _OPS:
        raise ValueError(f"unknown op {op!r}; expected one of {_OPS}")
    a = as_matrix(a)
    if b is None:
        if op != "max0":
            raise ValueError(f"op {op!r} needs a second operand")
        b = 0.0
    if np.ndim(b) == 0:
        b = float(b)
    else:
        b = as_matrix(b)
        if b.shape != a.shape:
            raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    if op == "div" and np.any(np.asarray(b) == 0.0):
        raise DomainError("division by a zero entry")
    # overflow surfaces as a DomainError below, not a warning
    with np.errstate(over="ignore", invalid="ignore"):
        if op == "add":
            out = a + b
        elif op == "sub":
            out = a - b
        elif op == "mul":
            out = a * b
        elif op == "div":
            out = a / b
        else:
            out = np.maximum(a, b)
    return _check_finite(np.ascontiguousarray(out), op)


def frobenius_norm(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt(np.sum(a * a)))


@dataclass(frozen=True)
class FactorPair:
    """The optimization variable ``Z = (W, H)`` with ``W`` m x r and ``H`` r x n."""

    W: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        W = as_matrix(self.W)
        H = as_matrix(self.H)
        if W.shape[1] != H.shape[0]:
            raise DimensionError(
                f"inner dimensions differ: W is {W.shape}, H is {H.shape}"
            )
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "H", H)

    @property
    def shape(self) -> tuple[int, int, int]:
        """``(m, n, r)``."""
        return self.W.shape[0], self.H.shape[1], self.W.shape[1]

    def product(self) -> np.ndarray:
        return self.W @ self.H

    def is_positive(self) -> bool:
        return bool(np.all(self.W > 0.0) and np.all(self.H > 0.0))

    def require_positive(self, what: str = "factor pair") -> None:
        if not self.is_positive():
            raise DomainError(f"{what} must be strictly positive")

    def same_shape(self, other: "FactorPair") -> bool:
        return self.W.shape == other.W.shape and self.H.shape == other.H.shape

    def __add__(self, other: "FactorPair") -> "FactorPair":
        return FactorPair(self.W + other.W, self.H + other.H)

    def __sub__(self, other: "FactorPair") -> "FactorPair":
        return FactorPair(self.W - other.W, self.H - other.H)

    def scale(self, c: float) -> "FactorPair":
        return FactorPair(c * self.W, c * self.H)

    def inner(self, other: "FactorPair") -> float:
        """Frobenius inner product summed over both blocks."""
        return float(np.vdot(self.W, other.W) + np.vdot(self.H, other.H))

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.W, self.W) + np.vdot(self.H, self.H)))

    def copy(self) -> "FactorPair":
        return FactorPair(self.W.copy(), self.H.copy())

    def equals(self, other: "FactorPair") -> bool:
        """Bitwise equality of both blocks."""
        return bool(
            np.array_equal(self.W, other.W) and np.array_equal(self.H, other.H)
        )
