"""The integral operator T = (T1, T2) on grid functions.

Both components are built from node samples of ``g_i * f_i(t, u, v)``:
one cumulative trapezoid pass gives ``F_i(x) = int_0^x g_i f_i``, and every
inner integral ``int_a^b g_i f_i`` is then ``F_i(b) - F_i(a)``. Off-grid
limits (the turning point sigma) use the exact integral of the linear
interpolant on the partial cell. Cells touching an endpoint where ``g_i`` is
declared singular are integrated adaptively instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import ExprError, evaluate
from .numerics import (
    Grid,
    GridFunction,
    QuadratureError,
    find_smallest_root,
    integrate,
    phi_p_inv,
)
from .problem import ProblemSpec

_SCAN_BLOCK = 64
_SINGULAR_CELLS = 32


class OperatorError(RuntimeError):
    """Evaluation of T failed; ``t`` is the offending node when known."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} (at t={t:.9g})")
        self.t = t


@dataclass(eq=False)
class StatePair:
    u: GridFunction
    v: GridFunction

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v must share a grid")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: Grid, u, v) -> StatePair:
        return cls(GridFunction(grid, u), GridFunction(grid, v))

    @classmethod
    def zeros(cls, grid: Grid) -> StatePair:
        z = np.zeros(len(grid))
        return cls.from_arrays(grid, z, z)

    @classmethod
    def cone_profile(cls, grid: Grid, alpha1: float, alpha2: float) -> StatePair:
        """``(alpha1 (1 - t), alpha2 min(t, 1 - t))``."""
        t = grid.nodes
        return cls.from_arrays(grid, alpha1 * (1.0 - t), alpha2 * np.minimum(t, 1.0 - t))

    def norms(self) -> tuple[float, float, float]:
        nu, nv = self.u.sup_norm(), self.v.sup_norm()
        return nu, nv, max(nu, nv)

    def norm(self) -> float:
        return self.norms()[2]

    def distance(self, other: StatePair) -> float:
        return max(
            float(np.max(np.abs(self.u.values - other.u.values))),
            float(np.max(np.abs(self.v.values - other.v.values))),
        )

    def combine(self, other: StatePair, weight: float) -> StatePair:
        """``(1 - weight) * self + weight * other``."""
        return StatePair.from_arrays(
            self.grid,
            (1.0 - weight) * self.u.values + weight * other.u.values,
            (1.0 - weight) * self.v.values + weight * other.v.values,
        )


@dataclass(eq=False)
class OperatorOutput:
    Tu: GridFunction
    Tv: GridFunction
    sigma: float
    quadrature_error_estimate: float
    branch_mismatch: float = 0.0

    @property
    def state(self) -> StatePair:
        return StatePair(self.Tu, self.Tv)


class _Density:
    """Node samples of ``g_i f_i`` and their cumulative integral ``F``."""

    def __init__(self, spec: ProblemSpec, i: int, state: StatePair):
        grid = state.grid
        self.grid = grid
        self.h = grid.h
        self.n = grid.n_intervals
        t = grid.nodes
        singular = spec.numerics.g1_singular if i == 1 else spec.numerics.g2_singular
        # Trapezoid error on the cells next to an integrable singularity decays
        # only like k^(-5/2) in the cell index, so a block of cells goes adaptive.
        block = min(_SINGULAR_CELLS, self.n)
        self.singular_cells = set()
        if 0.0 in singular:
            self.singular_cells.update(range(block))
        if 1.0 in singular:
            self.singular_cells.update(range(self.n - block, self.n))

        bindings = {"t": t, "u": state.u.values, "v": state.v.values}
        fvals = _evaluate_at_nodes(spec.f(i), bindings, f"f{i}")
        with np.errstate(all="ignore"):
            gvals = _weight_at_nodes(spec.g(i), t, singular, f"g{i}")
            w = gvals * fvals
        if singular:
            ends = [0 if x == 0.0 else self.n for x in singular]
            w[ends] = 0.0
        if not np.all(np.isfinite(w)):
            k = int(np.flatnonzero(~np.isfinite(w))[0])
            raise OperatorError(f"g{i}*f{i} is not finite", float(t[k]))
        self.w = w

        cells = 0.5 * self.h * (w[1:] + w[:-1])
        self._g = spec.g(i)
        self._f = spec.f(i)
        self._state = state
        self._tol = spec.numerics.quad_tol
        for k in self.singular_cells:
            cells[k] = self._adaptive(t[k], t[k + 1])
        self.F = np.concatenate([[0.0], np.cumsum(cells)])

    def _adaptive(self, a: float, b: float) -> float:
        u, v = self._state.u, self._state.v
        g, f = self._g, self._f

        def integrand(x):
            try:
                return evaluate(g, {"t": x}) * evaluate(f, {"t": x, "u": float(u(x)), "v": float(v(x))})
            except ExprError:
                return math.nan

        try:
            return integrate(integrand, a, b, self._tol)
        except QuadratureError as exc:
            raise OperatorError(f"singular cell quadrature failed: {exc}", a) from None

    def cell_index(self, x):
        k = np.floor(np.asarray(x) * self.n).astype(int)
        return np.clip(k, 0, self.n - 1)

    def F_at(self, x):
        x = np.asarray(x, dtype=float)
        k = self.cell_index(x)
        t_k = k * self.h
        dx = x - t_k
        w_x = self.w[k] + (self.w[k + 1] - self.w[k]) * (dx / self.h)
        out = self.F[k] + 0.5 * dx * (self.w[k] + w_x)
        if self.singular_cells:
            flat_x, flat_k = np.atleast_1d(x), np.atleast_1d(k)
            flat_out = np.atleast_1d(out).copy()
            for j, (xj, kj) in enumerate(zip(flat_x, flat_k)):
                if int(kj) in self.singular_cells:
                    flat_out[j] = self.F[kj] + self._adaptive(kj * self.h, float(xj))
            out = flat_out.reshape(np.shape(out))
        return out


def _evaluate_at_nodes(e, bindings, label):
    try:
        vals = np.asarray(evaluate(e, bindings), dtype=float)
    except ExprError as exc:
        t = bindings["t"]
        for j in range(len(t)):
            try:
                evaluate(e, {k: float(b[j]) for k, b in bindings.items()})
            except ExprError:
                raise OperatorError(f"{label}: {exc}", float(t[j])) from None
        raise OperatorError(f"{label}: {exc}") from None
    return np.broadcast_to(vals, bindings["t"].shape).copy()


def _weight_at_nodes(g, t, singular, label):
    inner = np.ones_like(t, dtype=bool)
    for x in singular:
        inner &= t != x
    out = np.full_like(t, np.nan)
    out[inner] = _evaluate_at_nodes(g, {"t": t[inner]}, label)
    return out


def _B_term(spec: ProblemSpec, i: int, total):
    arg = phi_p_inv(total, spec.p(i))
    try:
        return evaluate(spec.B(i), {"w": arg})
    except ExprError as exc:
        raise OperatorError(f"B{i}: {exc}") from None


def eval_T1(spec: ProblemSpec, state: StatePair) -> GridFunction:
    dens = _Density(spec, 1, state)
    return _T1_from_density(spec, dens)


def _T1_from_density(spec: ProblemSpec, dens: _Density) -> GridFunction:
    q = phi_p_inv(dens.F, spec.p1)
    h = dens.h
    tail = np.zeros_like(q)
    tail[:-1] = np.cumsum((0.5 * h * (q[1:] + q[:-1]))[::-1])[::-1]
    return GridFunction(dens.grid, tail + _B_term(spec, 1, dens.F[-1]))


def _branches(spec: ProblemSpec, dens: _Density, xs: np.ndarray):
    """Left side (with B2 term) and right side of the sigma equation at each x."""
    p = spec.p2
    h, n = dens.h, dens.n
    F = dens.F
    J = np.arange(n + 1)
    left = np.empty(len(xs))
    right = np.empty(len(xs))
    for start in range(0, len(xs), _SCAN_BLOCK):
        x = xs[start:start + _SCAN_BLOCK]
        k = dens.cell_index(x)
        Fx = dens.F_at(x)
        rows = np.arange(len(x))
        diff = Fx[:, None] - F[None, :]
        Q = phi_p_inv(np.where(J[None, :] <= k[:, None], diff, 0.0), p)
        R = phi_p_inv(np.where(J[None, :] >= k[:, None] + 1, -diff, 0.0), p)
        wl = h * (J[None, :] <= k[:, None]) - 0.5 * h * (J[None, :] == 0) - 0.5 * h * (J[None, :] == k[:, None])
        wr = h * (J[None, :] >= k[:, None] + 1) - 0.5 * h * (J[None, :] == k[:, None] + 1) - 0.5 * h * (J[None, :] == n)
        t_k = k * h
        lpart = 0.5 * (x - t_k) * Q[rows, k]
        rpart = 0.5 * (t_k + h - x) * R[rows, np.minimum(k + 1, n)]
        left[start:start + len(x)] = np.sum(wl * Q, axis=1) + lpart + _B_term(spec, 2, Fx)
        right[start:start + len(x)] = np.sum(wr * R, axis=1) + rpart
    return left, right


def _sigma_from_density(spec: ProblemSpec, dens: _Density) -> float:
    num = spec.numerics
    if not np.any(dens.w):
        return 0.0

    def H(x):
        lft, rgt = _branches(spec, dens, np.atleast_1d(np.asarray(x, dtype=float)))
        return lft - rgt

    xs = np.linspace(0.0, 1.0, num.scan_points + 1)
    hs = H(xs)
    if hs[0] == 0.0:
        return 0.0
    s0 = math.copysign(1.0, hs[0])
    changed = np.flatnonzero((hs == 0.0) | (np.sign(hs) != s0))
    if changed.size == 0:
        raise OperatorError("sigma equation has no sign change on the scan grid")
    j = int(changed[0])
    if hs[j] == 0.0:
        return float(xs[j])
    # The bracket is already the leftmost one; bisect inside it.
    return find_smallest_root(lambda x: float(H(x)[0]), num.root_tol, 1, float(xs[j - 1]), float(xs[j]))


def sigma(spec: ProblemSpec, state: StatePair) -> float:
    """Smallest root in [0, 1] of the turning-point equation of T2."""
    return _sigma_from_density(spec, _Density(spec, 2, state))


def _T2_from_density(spec: ProblemSpec, dens: _Density, s: float):
    p = spec.p2
    h, n = dens.h, dens.n
    F = dens.F
    t = dens.grid.nodes
    F_s = float(dens.F_at(s))
    jmax = int(np.flatnonzero(t <= s)[-1])

    q = phi_p_inv(F_s - F[: jmax + 1], p)
    left_cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (q[1:] + q[:-1]))])
    b_term = float(_B_term(spec, 2, F_s))
    out = np.empty(n + 1)
    out[: jmax + 1] = left_cum + b_term
    left_at_s = left_cum[-1] + 0.5 * (s - t[jmax]) * q[-1] + b_term

    if jmax < n:
        r = phi_p_inv(F[jmax + 1:] - F_s, p)
        right_cum = np.zeros_like(r)
        right_cum[:-1] = np.cumsum((0.5 * h * (r[1:] + r[:-1]))[::-1])[::-1]
        out[jmax + 1:] = right_cum
        right_at_s = right_cum[0] + 0.5 * (t[jmax + 1] - s) * r[0]
    else:
        right_at_s = 0.0
    return GridFunction(dens.grid, out), abs(left_at_s - right_at_s)


def eval_T2(spec: ProblemSpec, state: StatePair) -> tuple[GridFunction, float]:
    dens = _Density(spec, 2, state)
    s = _sigma_from_density(spec, dens)
    Tv, _ = _T2_from_density(spec, dens, s)
    return Tv, s


def _simpson_total(w: np.ndarray, h: float) -> float | None:
    if (len(w) - 1) % 2:
        return None
    return h / 3.0 * (w[0] + w[-1] + 4.0 * w[1:-1:2].sum() + 2.0 * w[2:-1:2].sum())


def apply_operator(spec: ProblemSpec, state: StatePair) -> OperatorOutput:
    """Evaluate ``T(u, v)`` with sigma and an error estimate."""
    if state.grid.n_intervals < 2:
        raise ValueError("operator evaluation needs at least two grid cells")
    d1 = _Density(spec, 1, state)
    d2 = _Density(spec, 2, state)
    Tu = _T1_from_density(spec, d1)
    s = _sigma_from_density(spec, d2)
    Tv, mismatch = _T2_from_density(spec, d2, s)
    err = mismatch
    for d in (d1, d2):
        simpson = _simpson_total(d.w, d.h) if not d.singular_cells else None
        if simpson is not None:
            err += abs(simpson - d.F[-1])
    return OperatorOutput(Tu, Tv, s, err, mismatch)


def residual(spec: ProblemSpec, state: StatePair) -> float:
    """``||(u, v) - T(u, v)||`` in the max-of-sup-norms product norm."""
    return state.distance(apply_operator(spec, state).state)


# -- cone diagnostics ------------------------------------------------------------


@dataclass
class CheckResult:
    passed: bool
    worst_violation: float
    witness_t: float | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "worst_violation": self.worst_violation, "witness_t": self.witness_t}


def _check(violation: np.ndarray, t: np.ndarray, tol: float) -> CheckResult:
    if violation.size == 0:
        return CheckResult(True, 0.0)
    k = int(np.argmax(violation))
    worst = float(max(violation[k], 0.0))
    passed = worst <= tol
    return CheckResult(passed, worst, None if worst == 0.0 else float(t[k]))


@dataclass
class ConeReport:
    tol: float
    nonneg_u: CheckResult
    nonneg_v: CheckResult
    nonincreasing_u: CheckResult
    concave_u: CheckResult
    concave_v: CheckResult
    lower_bound_u: CheckResult
    lower_bound_v: CheckResult
    interval_checks: dict = field(default_factory=dict)

    def checks(self) -> dict:
        out = {
            "nonneg_u": self.nonneg_u,
            "nonneg_v": self.nonneg_v,
            "nonincreasing_u": self.nonincreasing_u,
            "concave_u": self.concave_u,
            "concave_v": self.concave_v,
            "lower_bound_u": self.lower_bound_u,
            "lower_bound_v": self.lower_bound_v,
        }
        out.update(self.interval_checks)
        return out

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks().values())

    def failures(self) -> list[str]:
        return [name for name, c in self.checks().items() if not c.passed]

    def to_dict(self) -> dict:
        return {"tol": self.tol, "passed": self.passed, **{k: c.to_dict() for k, c in self.checks().items()}}


def cone_membership(state: StatePair, tol: float = 1e-10, spec: ProblemSpec | None = None) -> ConeReport:
    """Discrete membership checks for the cone ``K1 x K2``.

    Adjacent differences test monotonicity, second differences test
    concavity, and the pointwise lower bounds ``u >= (1-t)||u||`` and
    ``v >= min(t, 1-t)||v||`` are checked at every node. With ``spec`` the
    subinterval bounds ``min_{[0,b1]} u >= c1 ||u||`` and
    ``min_{[a2,b2]} v >= c2 ||v||`` are added.
    """
    t = state.grid.nodes
    u, v = state.u.values, state.v.values
    nu, nv = np.max(np.abs(u)), np.max(np.abs(v))
    report = ConeReport(
        tol=tol,
        nonneg_u=_check(-u, t, tol),
        nonneg_v=_check(-v, t, tol),
        nonincreasing_u=_check(np.diff(u), t[1:], tol),
        concave_u=_check(u[:-2] - 2 * u[1:-1] + u[2:], t[1:-1], tol),
        concave_v=_check(v[:-2] - 2 * v[1:-1] + v[2:], t[1:-1], tol),
        lower_bound_u=_check((1.0 - t) * nu - u, t, tol),
        lower_bound_v=_check(np.minimum(t, 1.0 - t) * nv - v, t, tol),
    )
    if spec is not None:
        for name, w, norm, (a, b), c in (
            ("interval_bound_u", u, nu, spec.interval(1), spec.c1),
            ("interval_bound_v", v, nv, spec.interval(2), spec.c2),
        ):
            mask = (t >= a) & (t <= b)
            report.interval_checks[name] = _check(c * norm - w[mask], t[mask], tol)
    return report
