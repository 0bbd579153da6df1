"""Convergence traces and the iteration driver shared by every algorithm."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateMetricError, ParseError, SolverDivergenceError
from .matrix import FactorPair
from .model import KLProblem, kkt_residuals, objective, relative_error

__all__ = [
    "TRACE_COLUMNS",
    "RESTART_REASONS",
    "StepInfo",
    "TraceRecord",
    "SolverTrace",
    "step_criterion",
    "drive",
    "read_trace_csv",
]

TRACE_COLUMNS = (
    "iter",
    "time_s",
    "objective",
    "potential",
    "rel_error",
    "kkt_w",
    "kkt_h",
    "restart_reason",
    "lambda_w",
    "lambda_h",
)
RESTART_REASONS = ("none", "nonpositive", "distance_test")


@dataclass
class StepInfo:
    """What a single step reports back to the driver."""

    lambda_w: float = math.nan
    lambda_h: float = math.nan
    L: float = math.nan
    M: float = math.nan
    restart_reason: str = "none"
    beta: float = 0.0
    #: Bregman distance between the iterate before and after the step
    bregman_step: float = math.nan
    failed: bool = False
    message: str = ""


@dataclass
class TraceRecord:
    iter: int
    time_s: float
    objective: float
    potential: float
    rel_error: float
    kkt_w: float
    kkt_h: float
    restart_reason: str
    lambda_w: float
    lambda_h: float
    L: float = math.nan
    M: float = math.nan
    step_norm: float = math.nan
    bregman_step: float = math.nan

    def row(self) -> list:
        return [getattr(self, c) for c in TRACE_COLUMNS]


@dataclass
class SolverTrace:
    algorithm: str
    records: list[TraceRecord] = field(default_factory=list)
    restarts: dict[str, int] = field(
        default_factory=lambda: {"nonpositive": 0, "distance_test": 0}
    )
    status: str = "running"
    iterations: int = 0
    elapsed: float = 0.0
    message: str = ""

    def append(self, rec: TraceRecord) -> None:
        if self.records and rec.iter <= self.records[-1].iter:
            raise ValueError("trace records must have increasing iteration indices")
        self.records.append(rec)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def total_restarts(self) -> int:
        return sum(self.restarts.values())

    def summary(self) -> dict:
        last = self.final
        return {
            "algorithm": self.algorithm,
            "status": self.status,
            "iter": self.iterations,
            "objective": last.objective,
            "rel": last.rel_error,
            "kkt_w": last.kkt_w,
            "kkt_h": last.kkt_h,
            "time": self.elapsed,
            "restarts_nonpositive": self.restarts["nonpositive"],
            "restarts_distance": self.restarts["distance_test"],
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for rec in self.records:
                w.writerow([_fmt(v) for v in rec.row()])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def read_trace_csv(path) -> list[dict]:
    """Read a trace CSV back as a list of dicts with numeric fields parsed."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty trace file") from None
        if tuple(header) != TRACE_COLUMNS:
            raise ParseError(f"{path}: unexpected trace header {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(TRACE_COLUMNS):
                raise ParseError(f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} fields")
            rec = dict(zip(TRACE_COLUMNS, row))
            for k in TRACE_COLUMNS:
                if k == "restart_reason":
                    continue
                rec[k] = int(rec[k]) if k == "iter" else float(rec[k])
            rows.append(rec)
    return rows


def step_criterion(Z_prev: FactorPair, Z_next: FactorPair) -> float:
    """``|Z_next - Z_prev|_F / max(1, |Z_next|_F)``, the termination measure."""
    num = math.sqrt(
        float(np.sum((Z_next.W - Z_prev.W) ** 2)) + float(np.sum((Z_next.H - Z_prev.H) ** 2))
    )
    return num / max(1.0, Z_next.norm())


Stepper = Callable[[FactorPair], "tuple[FactorPair, StepInfo]"]


def _record(p, Z, k, elapsed, info: Optional[StepInfo], with_potential, metrics, step_norm):
    obj = objective(p, Z)
    if not math.isfinite(obj):
        return None
    potential = math.nan
    if with_potential:
        potential = obj
        if info is not None and math.isfinite(info.M) and math.isfinite(info.bregman_step):
            potential = obj + info.M * info.bregman_step
    rel = kw = kh = math.nan
    if metrics:
        try:
            rel = relative_error(p, Z)
        except DegenerateMetricError:
            rel = math.nan
        kw, kh = kkt_residuals(p, Z)
    return TraceRecord(
        iter=k,
        time_s=elapsed,
        objective=obj,
        potential=potential,
        rel_error=rel,
        kkt_w=kw,
        kkt_h=kh,
        restart_reason=info.restart_reason if info else "none",
        lambda_w=info.lambda_w if info else math.nan,
        lambda_h=info.lambda_h if info else math.nan,
        L=info.L if info else math.nan,
        M=info.M if info else math.nan,
        step_norm=step_norm,
        bregman_step=info.bregman_step if info else math.nan,
    )


def drive(
    p: KLProblem,
    Z0: FactorPair,
    step: Stepper,
    *,
    algorithm: str,
    max_iter: int,
    tol: float,
    trace_every: int = 1,
    metrics: bool = True,
    with_potential: bool = False,
) -> tuple[FactorPair, SolverTrace]:
    """Iterate ``step`` from ``Z0`` until the step criterion or ``max_iter``.

    The run stops after the first step with ``step_criterion <= tol``. The
    initial point is recorded as iteration 0, then every ``trace_every``
    iterations and always the final iterate. ``time_s`` accumulates only the
    time spent inside ``step`` and the termination test.
    """
    if max_iter < 0 or trace_every < 1:
        raise ValueError("max_iter must be >= 0 and trace_every >= 1")
    p.check_factors(Z0)
    Z0.require_positive("initial point")
    trace = SolverTrace(algorithm=algorithm)
    rec = _record(p, Z0, 0, 0.0, None, with_potential, metrics, math.nan)
    if rec is None:
        raise SolverDivergenceError("objective is not finite at the initial point", trace)
    trace.append(rec)

    Z = Z0
    elapsed = 0.0
    trace.status = "max_iter"
    for k in range(1, max_iter + 1):
        t0 = time.perf_counter()
        Z_next, info = step(Z)
        crit = step_criterion(Z, Z_next) if not info.failed else math.nan
        elapsed += time.perf_counter() - t0

        if info.failed:
            # the step was rejected; keep the last accepted iterate
            trace.status = "step_failed"
            trace.message = info.message
            trace.iterations = k - 1
            trace.elapsed = elapsed
            if trace.final.iter != k - 1:
                trace.append(_record(p, Z, k - 1, elapsed, info, with_potential, metrics, math.nan))
            return Z, trace

        if info.restart_reason != "none":
            trace.restarts[info.restart_reason] += 1
        if not math.isfinite(crit):
            trace.status = "diverged"
            trace.iterations = k
            raise SolverDivergenceError(f"non-finite iterate at iteration {k}", trace)

        Z = Z_next
        done = crit <= tol
        if done or k % trace_every == 0 or k == max_iter:
            rec = _record(p, Z, k, elapsed, info, with_potential, metrics, crit)
            if rec is None:
                trace.status = "diverged"
                trace.iterations = k
                raise SolverDivergenceError(f"non-finite objective at iteration {k}", trace)
            trace.append(rec)
        if done:
            trace.status = "converged"
            trace.iterations = k
            break
    else:
        trace.iterations = max_iter
    trace.elapsed = elapsed
    return Z, trace
