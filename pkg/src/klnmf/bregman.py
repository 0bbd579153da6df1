"""Separable log-barrier-plus-quadratic kernel and its Bregman distance.

The kernel is ``phi(W, H) = sum(-log x + x**2 / 2)`` over every entry of both
factors. It is 1-strongly convex on the open positive orthant, so
``bregman_distance(Z1, Z2) >= |Z1 - Z2|_F^2 / 2``.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .matrix import FactorPair

__all__ = ["phi", "grad_phi", "bregman_distance", "bregman_distance_block"]


def _entries(x: np.ndarray) -> float:
    return float(np.sum(-np.log(x) + 0.5 * x * x))


def phi(Z: FactorPair) -> float:
    Z.require_positive("kernel argument")
    return _entries(Z.W) + _entries(Z.H)


def grad_phi(Z: FactorPair) -> tuple[np.ndarray, np.ndarray]:
    Z.require_positive("kernel argument")
    return Z.W - 1.0 / Z.W, Z.H - 1.0 / Z.H


def bregman_distance_block(x: np.ndarray, y: np.ndarray) -> float:
    """Bregman distance of one block, summed over its entries.

    Written in the per-entry form ``d - log(1 + d) + (x - y)**2 / 2`` with ``d = (x - y) / y``,
    which avoids the cancellation of ``phi(x) - phi(y) - <grad, x - y>``
    when ``x`` is close to ``y``.
    """
    diff = x - y
    d = diff / y
    return float(np.sum((d - np.log1p(d)) + 0.5 * diff * diff))


def bregman_distance(Z1: FactorPair, Z2: FactorPair) -> float:
    """``phi(Z1) - phi(Z2) - <grad_phi(Z2), Z1 - Z2>``."""
    if not Z1.same_shape(Z2):
        raise DimensionError("Bregman distance between factors of different shapes")
    Z1.require_positive("first Bregman argument")
    Z2.require_positive("second Bregman argument")
    return bregman_distance_block(Z1.W, Z2.W) + bregman_distance_block(Z1.H, Z2.H)
