"""Problem generation, initial points, MovieLens ingestion and matrix CSV files.

Randomness comes from numpy's ``PCG64`` bit generator (``default_rng``),
seeded with ``[seed, stream]`` so that ground truth and initial points drawn
from the same user seed use independent streams.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError, ParseError
from .matrix import FactorPair, as_matrix
from .model import KLProblem, Regularizer

__all__ = [
    "SynthSpec",
    "RatingsMatrix",
    "make_rng",
    "generate_synthetic",
    "initial_point",
    "load_movielens",
    "write_matrix_csv",
    "read_matrix_csv",
]

STREAM_DATA = 0
STREAM_INIT = 1
MOVIELENS_HEADER = ["userId", "movieId", "rating", "timestamp"]


def make_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, stream])


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic instance: ``W*`` i.i.d. Uniform(0, 1), rows of ``H*`` Dirichlet.

    ``sparsity`` is the fraction of entries of each factor kept nonzero.
    ``concentration`` is the symmetric Dirichlet parameter (1 gives the
    uniform distribution on the simplex).
    """

    m: int
    n: int
    r: int
    sparsity: float = 1.0
    seed: int = 0
    concentration: float = 1.0

    def __post_init__(self):
        for name in ("m", "n", "r"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not (0.0 < self.sparsity <= 1.0):
            raise ConfigError(f"sparsity must lie in (0, 1], got {self.sparsity}")
        if self.concentration <= 0:
            raise ConfigError("Dirichlet concentration must be positive")


def _sparsify(A: np.ndarray, keep: float, rng: np.random.Generator) -> np.ndarray:
    size = A.size
    k = max(1, int(round(keep * size)))
    mask = np.zeros(size, dtype=bool)
    mask[rng.choice(size, size=k, replace=False)] = True
    mask = mask.reshape(A.shape)
    # restore one entry in every empty row and column
    for i in np.flatnonzero(~mask.any(axis=1)):
        mask[i, rng.integers(A.shape[1])] = True
    for j in np.flatnonzero(~mask.any(axis=0)):
        mask[rng.integers(A.shape[0]), j] = True
    return np.where(mask, A, 0.0)


def generate_synthetic(
    spec: SynthSpec, reg: Optional[Regularizer] = None
) -> tuple[KLProblem, FactorPair]:
    """Return ``(problem, ground_truth)`` with ``X = W* H*``.

    Below full density, a uniformly random subset of entries of each factor is
    kept, every empty row and column gets one entry back, and the rows of
    ``H*`` are renormalized to sum to one.
    """
    rng = make_rng(spec.seed, STREAM_DATA)
    W = rng.uniform(0.0, 1.0, size=(spec.m, spec.r))
    H = rng.dirichlet(np.full(spec.n, spec.concentration), size=spec.r)
    if spec.sparsity < 1.0:
        W = _sparsify(W, spec.sparsity, rng)
        H = _sparsify(H, spec.sparsity, rng)
        sums = H.sum(axis=1, keepdims=True)
        if np.any(sums <= 0):
            raise DomainError("sparsified H* has an all-zero row")
        H = H / sums
    X = W @ H
    if np.any(X.sum(axis=1) <= 0) or np.any(X.sum(axis=0) <= 0):
        raise DomainError("generated X has an all-zero row or column")
    return KLProblem(X, spec.r, reg or Regularizer()), FactorPair(W, H)


def _positive_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    A = rng.uniform(0.0, 1.0, size=shape)
    while True:
        zero = A == 0.0
        if not zero.any():
            return A
        A[zero] = rng.uniform(0.0, 1.0, size=int(zero.sum()))


def initial_point(p: KLProblem, seed: int, scaled: bool = False) -> FactorPair:
    """Uniform(0, 1) factors, optionally scaled so that ``sum(W0 H0) == sum(X)``."""
    total = float(p.X.sum())
    if not total > 0:
        raise DomainError("X has zero total mass")
    rng = make_rng(seed, STREAM_INIT)
    W = _positive_uniform(rng, (p.m, p.r))
    H = _positive_uniform(rng, (p.r, p.n))
    if scaled:
        alpha = math.sqrt(total / float(W.sum(axis=0) @ H.sum(axis=1)))
        W = alpha * W
        H = alpha * H
    return FactorPair(W, H)


@dataclass
class RatingsMatrix:
    """Items x users rating matrix; unrated cells are 0."""

    X: np.ndarray
    item_ids: list
    user_ids: list

    @property
    def shape(self):
        return self.X.shape


def load_movielens(path) -> RatingsMatrix:
    """Read a MovieLens ``ratings.csv`` into a movies x users matrix.

    Rows follow ascending ``movieId`` and columns ascending ``userId``. When a
    (user, movie) pair repeats, the last occurrence wins.
    """
    triples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file")
        if [h.strip() for h in header] != MOVIELENS_HEADER:
            raise ParseError(f"{path}:1: expected header {','.join(MOVIELENS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                user, movie, rating = int(row[0]), int(row[1]), float(row[2])
                int(row[3])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if not (math.isfinite(rating) and rating >= 0):
                raise ParseError(f"{path}:{lineno}: invalid rating {row[2]!r}")
            triples.append((user, movie, rating))
    if not triples:
        raise ParseError(f"{path}: no ratings")
    users = sorted({t[0] for t in triples})
    movies = sorted({t[1] for t in triples})
    ucol = {u: j for j, u in enumerate(users)}
    mrow = {mv: i for i, mv in enumerate(movies)}
    X = np.zeros((len(movies), len(users)))
    for user, movie, rating in triples:
        X[mrow[movie], ucol[user]] = rating
    return RatingsMatrix(X=X, item_ids=movies, user_ids=users)


def write_matrix_csv(A, path) -> None:
    """Write a dense matrix, one row per line, 17 significant digits."""
    A = as_matrix(A)
    with open(path, "w") as fh:
        for row in A:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if len(rows[-1]) != len(rows[0]):
                raise ParseError(f"{path}:{lineno}: ragged row ({len(rows[-1])} != {len(rows[0])})")
    if not rows:
        raise ParseError(f"{path}: empty matrix file")
    return np.ascontiguousarray(rows, dtype=np.float64)
