"""Pure numpy implementations of the hot kernels.

Signatures mirror the compiled ``_kernels`` module exactly so either can be
dropped in.
"""
import numpy as np

#: smallest admissible entry of ``WH``; anything below is treated as a domain error
WH_FLOOR = 1e-300

KIND_SQFRO = 0
KIND_L1 = 1


def kl_ratio(X, WH):
    """Return ``(X / WH, KL(X, WH), n_bad)`` with ``0 log 0 = 0``.

    ``n_bad`` counts entries of ``WH`` below ``WH_FLOOR``; when it is nonzero
    the other outputs are meaningless.
    """
    n_bad = int(np.count_nonzero(~(WH >= WH_FLOOR)))
    if n_bad:
        return None, np.nan, n_bad
    R = X / WH
    pos = X > 0
    logs = np.zeros_like(X)
    np.log(R, out=logs, where=pos)
    kl = float(np.sum(X * logs - X + WH))
    return R, kl, 0


def kl_value(X, WH):
    _, kl, n_bad = kl_ratio(X, WH)
    return kl, n_bad


def prox_values(P, mu_lambda, kind):
    """Closed-form minimizer of ``p x + reg(x) - log x + x**2 / 2`` per entry.

    ``kind`` selects the regularizer term: ``KIND_L1`` adds ``mu_lambda * x``,
    ``KIND_SQFRO`` adds ``mu_lambda * x**2 / 2`` (``mu_lambda = 0`` is g = 0).
    Uses the cancellation-free branch ``2 / (p + sqrt(p^2 + 4c))`` for p > 0.
    """
    P = np.asarray(P, dtype=np.float64)
    if kind == KIND_L1:
        q = P + mu_lambda
        root = np.sqrt(q * q + 4.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(q > 0.0, 2.0 / (q + root), (root - q) / 2.0)
    else:
        c = 1.0 + mu_lambda
        root = np.sqrt(P * P + 4.0 * c)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(P > 0.0, 2.0 / (P + root), (root - P) / (2.0 * c))
    return np.ascontiguousarray(out)


def prox_block(S, Y, lin, lam, mu_lambda, kind, lin_axis):
    """Fused gradient assembly and prox update for one factor block.

    Computes ``P = lam * (lin - S / Y) - (Y - 1 / Y)`` where ``lin`` is
    broadcast along columns (``lin_axis=1``) or rows (``lin_axis=0``), then
    applies :func:`prox_values`.
    """
    L = lin[None, :] if lin_axis == 1 else lin[:, None]
    P = lam * (-S / Y + L) - (-1.0 / Y + Y)
    return prox_values(P, mu_lambda, kind)


def ccd_rows(X, A, B, AB, inner_iters, floor, tol):
    """One cyclic coordinate-descent sweep over ``A`` for ``KL(X, A B)``.

    Each coordinate ``A[i, l]`` gets up to ``inner_iters`` Newton steps on the
    one-variable restriction, clipped below at ``floor``; stepping stops early
    once ``|delta| <= tol * max(1, a)``. ``A`` and ``AB`` are updated in place.
    Rows of ``A`` are independent given ``B``, so all rows advance together.
    Returns the number of Newton steps taken.
    """
    p, r = A.shape
    steps = 0
    for l in range(r):
        b = B[l]
        b2 = b * b
        bsum = b.sum()
        active = np.arange(p)
        for _ in range(inner_iters):
            if active.size == 0:
                break
            ABs = AB[active]
            Xs = X[active]
            R = Xs / ABs
            g = bsum - R @ b
            h = (R / ABs) @ b2
            a = A[active, l]
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = np.maximum(a - g / h, floor)
            new = np.where(h > 0.0, newton, np.where(g > 0.0, floor, a))
            delta = new - a
            A[active, l] = new
            AB[active] += delta[:, None] * b[None, :]
            steps += active.size
            active = active[np.abs(delta) > tol * np.maximum(1.0, new)]
    return steps
