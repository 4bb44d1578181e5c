"""Scalar p-Laplacian maps, quadrature, grids, root finding and 1-D minimization."""

from __future__ import annotations

import heapq
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

QUAD_TOL = 1e-10
ROOT_TOL = 1e-10
MIN_TOL = 1e-8
DEFAULT_N = 1024
SCAN_POINTS = 512

_MAX_PANELS = 200_000
_SEED_POINTS = 64
_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class NumericsError(ArithmeticError):
    """Base class for failures raised by the numerical kernels."""


class DomainError(NumericsError, ValueError):
    pass


class QuadratureError(NumericsError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best available estimate and its error bound are kept on the exception
    so callers can still report something.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class RootNotFoundError(NumericsError):
    pass


def _check_p(p: float) -> None:
    if not (math.isfinite(p) and p > 1.0):
        raise DomainError(f"exponent p must be a finite real > 1, got {p!r}")


def phi_p(w, p: float):
    """Return ``|w|**(p-2) * w``; works elementwise on arrays."""
    _check_p(p)
    if np.ndim(w) == 0:
        w = float(w)
        if not math.isfinite(w):
            raise DomainError(f"phi_p argument must be finite, got {w!r}")
        if w == 0.0:
            return 0.0
        return math.copysign(abs(w) ** (p - 1.0), w)
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DomainError("phi_p argument must be finite")
    return np.sign(w) * np.abs(w) ** (p - 1.0)


def phi_p_inv(w, p: float):
    """Return ``|w|**(1/(p-1)) * sgn(w)``, the inverse of :func:`phi_p`."""
    _check_p(p)
    if np.ndim(w) == 0:
        w = float(w)
        if not math.isfinite(w):
            raise DomainError(f"phi_p_inv argument must be finite, got {w!r}")
        if w == 0.0:
            return 0.0
        return math.copysign(abs(w) ** (1.0 / (p - 1.0)), w)
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DomainError("phi_p_inv argument must be finite")
    return np.sign(w) * np.abs(w) ** (1.0 / (p - 1.0))


def _simpson(fa: float, fm: float, fb: float, width: float) -> float:
    return width * (fa + 4.0 * fm + fb) / 6.0


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = QUAD_TOL,
    max_panels: int = _MAX_PANELS,
    return_error: bool = False,
):
    """Globally adaptive Simpson quadrature of ``f`` over ``[a, b]``.

    The panel with the largest error estimate is bisected until the summed
    error estimate falls below ``tol``. A non-finite value at ``a`` or ``b``
    marks an integrable endpoint singularity: the variable is changed to
    ``x = a + (b - a) s^2`` (mirrored at ``b``) and the transformed endpoint
    value is taken as 0.

    Args:
        f: Scalar integrand.
        a: Lower limit.
        b: Upper limit, ``a <= b``.
        tol: Absolute error target.
        max_panels: Bisection budget before giving up.
        return_error: Also return the error estimate.

    Returns:
        The integral estimate, or ``(estimate, error)`` if ``return_error``.

    Raises:
        QuadratureError: The budget ran out before reaching ``tol``.
    """
    if a > b:
        raise ValueError(f"integrate requires a <= b, got a={a}, b={b}")
    if a == b:
        return (0.0, 0.0) if return_error else 0.0

    sing_a, sing_b = _singular(f, a), _singular(f, b)
    if sing_a and sing_b:
        mid = 0.5 * (a + b)
        lv, le = integrate(f, a, mid, tol / 2, max_panels, True)
        rv, re = integrate(f, mid, b, tol / 2, max_panels, True)
        return (lv + rv, le + re) if return_error else lv + rv
    if sing_a or sing_b:
        # x = a + L s^2 (or b - L s^2) turns an inverse square root
        # singularity into a smooth integrand and weakens stronger ones.
        L = b - a
        if sing_a:
            g = lambda s: 2.0 * L * s * f(a + L * s * s) if s > 0 else 0.0
        else:
            g = lambda s: 2.0 * L * s * f(b - L * s * s) if s > 0 else 0.0
        return _adaptive_simpson(g, 0.0, 1.0, tol, max_panels, return_error)
    return _adaptive_simpson(f, a, b, tol, max_panels, return_error)


def _singular(f, x: float) -> bool:
    try:
        return not math.isfinite(float(f(x)))
    except (ArithmeticError, ValueError):
        return True


def _adaptive_simpson(f, a, b, tol, max_panels, return_error):
    def value(x: float, endpoint: bool = False) -> float:
        try:
            y = float(f(x))
        except (ArithmeticError, ValueError):
            if endpoint:
                return 0.0
            raise
        if not math.isfinite(y):
            if endpoint:
                return 0.0
            raise QuadratureError(f"integrand is not finite at interior point {x!r}", math.nan, math.inf)
        return y

    def panel(lo, hi, flo, fmid, fhi):
        mid = 0.5 * (lo + hi)
        fl = value(0.5 * (lo + mid))
        fr = value(0.5 * (mid + hi))
        coarse = _simpson(flo, fmid, fhi, hi - lo)
        left = _simpson(flo, fl, fmid, mid - lo)
        right = _simpson(fmid, fr, fhi, hi - mid)
        fine = left + right
        err = abs(fine - coarse) / 15.0
        # (-err, seq) ordering makes the heap a max-heap on the error with
        # deterministic tie-breaking.
        return [-err, 0, lo, hi, flo, fl, fmid, fr, fhi, fine + (fine - coarse) / 15.0]

    fa = value(a, endpoint=True)
    fb = value(b, endpoint=True)
    fm = value(0.5 * (a + b))
    seq = 0
    first = panel(a, b, fa, fm, fb)
    heap = [first]
    total = first[-1]
    error = -first[0]
    tiny = 64.0 * np.finfo(float).eps * max(abs(a), abs(b), 1.0)

    while error > tol:
        if len(heap) >= max_panels:
            raise QuadratureError(
                f"adaptive Simpson did not converge on [{a}, {b}] "
                f"(error estimate {error:.3e} > tol {tol:.3e})",
                total,
                error,
            )
        worst = heapq.heappop(heap)
        _, _, lo, hi, flo, fl, fmid, fr, fhi, est = worst
        if hi - lo < tiny:
            # Cannot split further; keep it and stop if nothing else helps.
            heapq.heappush(heap, worst)
            raise QuadratureError(
                f"panel width underflow near {lo!r} (error estimate {error:.3e})",
                total,
                error,
            )
        mid = 0.5 * (lo + hi)
        left = panel(lo, mid, flo, fl, fmid)
        right = panel(mid, hi, fmid, fr, fhi)
        seq += 1
        left[1] = 2 * seq
        right[1] = 2 * seq + 1
        heapq.heappush(heap, left)
        heapq.heappush(heap, right)
        total += left[-1] + right[-1] - est
        error += worst[0] - left[0] - right[0]

    # Re-sum to shed the drift accumulated by incremental updates.
    total = math.fsum(item[-1] for item in heap)
    error = math.fsum(-item[0] for item in heap)
    return (total, error) if return_error else total


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[0, 1]`` with ``n_intervals`` cells."""

    n_intervals: int = DEFAULT_N

    def __post_init__(self):
        if int(self.n_intervals) != self.n_intervals or self.n_intervals < 1:
            raise ValueError(f"n_intervals must be a positive integer, got {self.n_intervals!r}")

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.arange(self.n_intervals + 1, dtype=float) / self.n_intervals
        nodes.setflags(write=False)
        return nodes

    @property
    def h(self) -> float:
        return 1.0 / self.n_intervals

    def __len__(self) -> int:
        return self.n_intervals + 1


@dataclass(eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.grid),):
            raise ValueError(f"expected {len(self.grid)} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("GridFunction values must be finite")
        values.setflags(write=False)
        self.values = values

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
        return cls(grid, np.broadcast_to(fn(grid.nodes), grid.nodes.shape))

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __call__(self, t):
        """Piecewise-linear interpolation."""
        return np.interp(t, self.grid.nodes, self.values)


def cumulative_integral(w: GridFunction) -> GridFunction:
    """Cumulative trapezoid integral ``x -> int_0^x w``, zero at the first node."""
    h = w.grid.h
    y = w.values
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * h * (y[1:] + y[:-1]), out=out[1:])
    return GridFunction(w.grid, out)


def find_smallest_root(
    h: Callable[[float], float],
    tol: float = ROOT_TOL,
    scan_points: int = SCAN_POINTS,
    lo: float = 0.0,
    hi: float = 1.0,
) -> float:
    """Leftmost root of ``h`` on ``[lo, hi]``.

    ``h`` is sampled on ``scan_points`` equal cells; the first cell where the
    sign differs from ``h(lo)`` is refined by bisection to width ``<= tol``.
    Returns ``lo`` when ``h(lo) == 0``.

    Raises:
        RootNotFoundError: No sign change on the scan grid.
    """
    xs = np.linspace(lo, hi, scan_points + 1)
    h0 = float(h(xs[0]))
    if h0 == 0.0:
        return float(xs[0])
    s0 = math.copysign(1.0, h0)
    a = float(xs[0])
    for x in xs[1:]:
        hx = float(h(x))
        if hx == 0.0:
            return float(x)
        if math.copysign(1.0, hx) != s0:
            b = float(x)
            break
        a = float(x)
    else:
        raise RootNotFoundError(f"no sign change of h on [{lo}, {hi}] with {scan_points} scan cells")

    while b - a > tol:
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        hm = float(h(m))
        if hm == 0.0:
            return m
        if math.copysign(1.0, hm) == s0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def minimize_1d(
    phi: Callable[[float], float],
    a: float,
    b: float,
    tol: float = MIN_TOL,
    seed_points: int = _SEED_POINTS,
) -> tuple[float, float]:
    """Minimize ``phi`` on ``[a, b]``: grid seeding then golden-section refinement.

    The seed grid has ``seed_points`` cells; the leftmost best node wins ties.
    Golden-section search then runs on the two cells around it, and its
    result replaces the seed only if strictly smaller.
    """
    if not a < b:
        raise ValueError(f"minimize_1d requires a < b, got a={a}, b={b}")
    xs = np.linspace(a, b, seed_points + 1)
    values = np.array([float(phi(x)) for x in xs])
    k = int(np.argmin(values))
    best_x, best_f = float(xs[k]), float(values[k])

    lo = float(xs[max(k - 1, 0)])
    hi = float(xs[min(k + 1, seed_points)])
    x1 = hi - _INV_GOLDEN * (hi - lo)
    x2 = lo + _INV_GOLDEN * (hi - lo)
    f1, f2 = float(phi(x1)), float(phi(x2))
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_GOLDEN * (hi - lo)
            f1 = float(phi(x1))
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_GOLDEN * (hi - lo)
            f2 = float(phi(x2))
    x_gs, f_gs = (x1, f1) if f1 <= f2 else (x2, f2)
    if f_gs < best_f:
        best_x, best_f = x_gs, f_gs
    return best_x, best_f
