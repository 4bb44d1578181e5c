"""Damped Picard iteration for fixed points of T, with deterministic multi-start."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .numerics import Grid
from .operator import ConeReport, OperatorError, StatePair, apply_operator, cone_membership
from .problem import ProblemSpec

DEFAULT_AMPLITUDES = (0.03, 0.3, 1.0, 3.0, 8.0)
OUTSIDE = "outside certified intervals"


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    """Picard iteration hit ``max_iterations``; keeps the step size and norm history."""

    def __init__(self, message: str, step: float, norms: list[float]):
        super().__init__(message)
        self.step = step
        self.norms = norms


class Divergence(SolverError):
    def __init__(self, message: str, iteration: int, norm: float):
        super().__init__(message)
        self.iteration = iteration
        self.norm = norm


def amplitude_grid(levels=DEFAULT_AMPLITUDES) -> tuple:
    return tuple((a1, a2) for a1 in levels for a2 in levels)


@dataclass(frozen=True)
class SolverConfig:
    damping: float = 0.5
    max_iterations: int = 2000
    tol: float = 1e-9
    starts: tuple = field(default_factory=amplitude_grid)
    dedup_distance: float = 1e-6
    ceiling: float = 1e4
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.ceiling > 0.0:
            raise ValueError("ceiling must be positive")


@dataclass(eq=False)
class SolutionRecord:
    state: StatePair
    sigma: float
    residual: float
    norms: tuple
    cone_report: ConeReport
    iterations: int
    start_used: tuple
    interval: str | None = None

    @property
    def norm(self) -> float:
        return self.norms[2]

    def to_dict(self) -> dict:
        return {
            "norm": self.norms[2],
            "norm_u": self.norms[0],
            "norm_v": self.norms[1],
            "sigma": self.sigma,
            "residual": self.residual,
            "iterations": self.iterations,
            "start_used": list(self.start_used),
            "cone_passed": self.cone_report.passed,
            "interval": self.interval,
        }


def cone_tolerance(state: StatePair) -> float:
    return 1e-8 * max(state.norm(), 1e-4)


def picard_solve(spec: ProblemSpec, start: StatePair, cfg: SolverConfig, start_label=None) -> SolutionRecord:
    """Iterate ``x <- (1 - w) x + w T(x)`` until the sup-norm step drops below ``cfg.tol``.

    Raises:
        ValueError: ``start`` is not in the cone.
        Divergence: the iterate norm passed ``cfg.ceiling`` or T overflowed.
        NonConvergence: ``cfg.max_iterations`` reached.
        SolverError: the converged state failed the residual or cone check.
    """
    report = cone_membership(start, cone_tolerance(start))
    if not report.passed:
        raise ValueError(f"start is not in the cone: {', '.join(report.failures())}")
    state = start
    norms = [state.norm()]
    step = math.inf
    for it in range(1, cfg.max_iterations + 1):
        try:
            out = apply_operator(spec, state)
        except (OperatorError, ValueError, FloatingPointError, OverflowError) as exc:
            raise Divergence(f"operator evaluation failed at iteration {it}: {exc}", it, norms[-1]) from None
        new = state.combine(out.state, cfg.damping)
        step = new.distance(state)
        state = new
        norms.append(state.norm())
        if not math.isfinite(norms[-1]) or norms[-1] > cfg.ceiling:
            raise Divergence(f"iterate norm {norms[-1]:.3e} exceeded ceiling {cfg.ceiling:.3e}", it, norms[-1])
        if step < cfg.tol:
            break
    else:
        raise NonConvergence(f"no convergence after {cfg.max_iterations} iterations (last step {step:.3e})", step, norms)

    out = apply_operator(spec, state)
    res = state.distance(out.state)
    cone = cone_membership(state, cone_tolerance(state), spec)
    # Step < tol bounds the residual by tol / damping; allow that slack.
    if res > cfg.tol / cfg.damping * 10.0:
        raise SolverError(f"residual {res:.3e} above tolerance after convergence")
    if not cone.passed:
        raise SolverError(f"converged state left the cone: {', '.join(cone.failures())}")
    return SolutionRecord(state, out.sigma, res, state.norms(), cone, it, tuple(start_label or ()))


@dataclass
class StartFailure:
    start: tuple
    reason: str


@dataclass
class MultiStartResult:
    records: list
    failures: list

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, k):
        return self.records[k]


def _run_start(spec: ProblemSpec, grid: Grid, cfg: SolverConfig, amp: tuple):
    start = StatePair.cone_profile(grid, *amp)
    try:
        return picard_solve(spec, start, cfg, amp)
    except (SolverError, ValueError) as exc:
        return StartFailure(tuple(amp), f"{type(exc).__name__}: {exc}")


def multi_start_solve(spec: ProblemSpec, cfg: SolverConfig, n: int | None = None) -> MultiStartResult:
    """Run :func:`picard_solve` from every start amplitude and merge the results.

    Starts are ``(a1 (1-t), a2 min(t, 1-t))``. Results are merged in start
    order: a record within ``cfg.dedup_distance`` of an earlier one is
    dropped. The survivors are sorted by norm.
    """
    if not cfg.starts:
        raise ValueError("at least one start amplitude is required")
    grid = Grid(n or spec.numerics.n)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(lambda a: _run_start(spec, grid, cfg, a), cfg.starts))
    else:
        results = [_run_start(spec, grid, cfg, a) for a in cfg.starts]

    kept, failures = [], []
    for res in results:
        if isinstance(res, StartFailure):
            failures.append(res)
        elif all(res.state.distance(k.state) >= cfg.dedup_distance for k in kept):
            kept.append(res)
    kept.sort(key=lambda r: (r.norm, r.start_used))
    return MultiStartResult(kept, failures)


def localize(records, cert) -> list:
    """Tag each record with the certified interval containing its norm."""
    if records and not cert.conclusive:
        raise ValueError("localize needs a conclusive certificate")
    for rec in records:
        rec.interval = OUTSIDE
        for loc in cert.localization:
            if loc.contains(rec.norm):
                rec.interval = loc.label()
                break
    return list(records)


def refine(spec: ProblemSpec, record: SolutionRecord, n: int, cfg: SolverConfig) -> SolutionRecord:
    """Re-polish a solution on a grid with ``n`` cells, starting from its interpolant."""
    grid = Grid(n)
    t = grid.nodes
    start = StatePair.from_arrays(grid, record.state.u(t), record.state.v(t))
    return picard_solve(spec, start, cfg, record.start_used)


def grid_shift(coarse: SolutionRecord, fine: SolutionRecord) -> float:
    """Sup-norm difference between two solutions, compared on the finer grid."""
    t = fine.state.grid.nodes
    du = np.max(np.abs(coarse.state.u(t) - fine.state.u.values))
    dv = np.max(np.abs(coarse.state.v(t) - fine.state.v.values))
    return float(max(du, dv))
