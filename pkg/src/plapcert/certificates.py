"""Cone constants, growth bounds and fixed-point-index certificates."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .expr import ExprError, evaluate, parse_expression
from .numerics import integrate, minimize_1d, phi_p, phi_p_inv
from .operator import StatePair
from .problem import ProblemSpec

MARGIN_FLOOR = 1e-9
REFINE_RTOL = 1e-6
_REFINE_POINTS = 5
_MAX_REFINE_ROUNDS = 40

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"

TAGS = ("I1", "I0", "I0star")
_RADIUS_NAMES = ("rho", "r", "s", "delta")
_COUNT_WORDS = {1: "one", 2: "two", 3: "three", 4: "four", 5: "five"}


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class ConeConstants:
    c1: float
    c2: float
    m1: float
    m2: float
    M1: float
    M2: float
    Mt1: float
    Mt2: float
    nu_star: float
    nu_star_tilde: float
    b1: float
    a2: float
    b2: float

    def m(self, i: int) -> float:
        return self.m1 if i == 1 else self.m2

    def M(self, i: int) -> float:
        return self.M1 if i == 1 else self.M2

    def Mt(self, i: int) -> float:
        return self.Mt1 if i == 1 else self.Mt2

    def c(self, i: int) -> float:
        return self.c1 if i == 1 else self.c2

    def interval(self, i: int) -> tuple[float, float]:
        return (0.0, self.b1) if i == 1 else (self.a2, self.b2)

    def to_dict(self) -> dict:
        return asdict(self)


def _M2_objective(spec: ProblemSpec, with_h: bool):
    g = spec.weight(2)
    p, tol = spec.p2, spec.numerics.quad_tol
    a2, b2 = spec.a2, spec.b2

    def objective(nu: float) -> float:
        left = integrate(lambda s: phi_p_inv(g.integral(s, nu), p), a2, nu, tol)
        right = integrate(lambda s: phi_p_inv(g.integral(nu, s), p), nu, b2, tol)
        extra = spec.h21 * phi_p_inv(g.integral(a2, nu), p) if with_h else 0.0
        return left + right + extra

    return objective


def compute_constants(spec: ProblemSpec) -> ConeConstants:
    """All cone constants by quadrature; the M2 pair also needs a 1-D minimization."""
    g1, g2 = spec.weight(1), spec.weight(2)
    p1, p2 = spec.p1, spec.p2
    tol = spec.numerics.quad_tol

    def from_zero(upper: float) -> float:
        return integrate(lambda s: phi_p_inv(g1.integral(0.0, s), p1), 0.0, upper, tol)

    base_m1 = from_zero(1.0)
    inv_m1 = base_m1 + spec.h12 * phi_p_inv(g1.integral(0.0, 1.0), p1)
    inv_Mt1 = from_zero(spec.b1)
    inv_M1 = inv_Mt1 + spec.h11 * phi_p_inv(g1.integral(0.0, spec.b1), p1)

    left_half = integrate(lambda s: phi_p_inv(g2.integral(s, 0.5), p2), 0.0, 0.5, tol)
    left_half += spec.h22 * phi_p_inv(g2.integral(0.0, 0.5), p2)
    right_half = integrate(lambda s: phi_p_inv(g2.integral(0.5, s), p2), 0.5, 1.0, tol)
    inv_m2 = max(left_half, right_half)

    min_tol = spec.numerics.min_tol
    nu_star, best = minimize_1d(_M2_objective(spec, True), spec.a2, spec.b2, min_tol)
    nu_tilde, best_tilde = minimize_1d(_M2_objective(spec, False), spec.a2, spec.b2, min_tol)

    return ConeConstants(
        c1=spec.c1,
        c2=spec.c2,
        m1=1.0 / inv_m1,
        m2=1.0 / inv_m2,
        M1=1.0 / inv_M1,
        M2=2.0 / best,
        Mt1=1.0 / inv_Mt1,
        Mt2=2.0 / best_tilde,
        nu_star=nu_star,
        nu_star_tilde=nu_tilde,
        b1=spec.b1,
        a2=spec.a2,
        b2=spec.b2,
    )


# -- growth bounds ------------------------------------------------------------


@dataclass(frozen=True)
class RadiusBox:
    rho1: float
    rho2: float

    def __post_init__(self):
        if not (self.rho1 > 0 and self.rho2 > 0 and math.isfinite(self.rho1) and math.isfinite(self.rho2)):
            raise ValueError(f"radii must be positive and finite, got ({self.rho1}, {self.rho2})")

    def rho(self, i: int) -> float:
        return self.rho1 if i == 1 else self.rho2


@dataclass
class GrowthEstimate:
    kind: str
    component: int
    value: float
    raw: float
    witness: tuple
    resolution: int
    refined: bool
    box: tuple

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "component": self.component,
            "value": self.value,
            "raw": self.raw,
            "witness": list(self.witness),
            "resolution": self.resolution,
            "refined": self.refined,
            "box": [list(r) for r in self.box],
        }


GROWTH_KINDS = ("sup-I1", "inf-I0", "inf-I0star")


def growth_box(spec: ProblemSpec, kind: str, i: int, box: RadiusBox) -> tuple:
    """``((t_lo, t_hi), (u_lo, u_hi), (v_lo, v_hi))`` for a growth bound."""
    r1, r2 = box.rho1, box.rho2
    if kind == "sup-I1":
        return (0.0, 1.0), (0.0, r1), (0.0, r2)
    if kind == "inf-I0":
        if i == 1:
            return (0.0, spec.b1), (spec.c1 * r1, r1), (0.0, r2)
        return (spec.a2, spec.b2), (0.0, r1), (spec.c2 * r2, r2)
    if kind == "inf-I0star":
        return spec.interval(i), (0.0, r1), (0.0, r2)
    raise ValueError(f"unknown growth kind {kind!r}")


def _lattice_extreme(f, axes, sign):
    T, U, V = np.meshgrid(*axes, indexing="ij")
    vals = sign * np.asarray(evaluate(f, {"t": T, "u": U, "v": V}), dtype=float)
    if not np.all(np.isfinite(vals)):
        k = np.unravel_index(int(np.flatnonzero(~np.isfinite(vals))[0]), vals.shape)
        raise CertificateError(f"f is not finite at (t,u,v)=({T[k]:.9g}, {U[k]:.9g}, {V[k]:.9g})")
    k = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return float(vals[k]), (float(T[k]), float(U[k]), float(V[k]))


def growth_bound(
    spec: ProblemSpec,
    kind: str,
    i: int,
    box: RadiusBox,
    resolution: int | None = None,
    refine: bool = True,
) -> GrowthEstimate:
    """Sup or inf of ``f_i / rho_i^(p_i - 1)`` over the box for ``kind``.

    A ``resolution``-per-axis lattice is scanned first (ties go to the first
    point in (t, u, v) lattice order). Refinement then searches shrinking
    sub-lattices around the incumbent and only accepts strict improvements,
    stopping once two consecutive rounds improve by less than ``1e-6``
    relative.
    """
    resolution = resolution or spec.numerics.lattice
    ranges = growth_box(spec, kind, i, box)
    sign = 1.0 if kind.startswith("sup") else -1.0
    f = spec.f(i)
    axes = [np.linspace(lo, hi, resolution) for lo, hi in ranges]
    try:
        best, witness = _lattice_extreme(f, axes, sign)
    except ExprError as exc:
        raise CertificateError(f"f{i}: {exc}") from None

    if refine:
        widths = [(hi - lo) / (resolution - 1) for lo, hi in ranges]
        quiet = 0
        for _ in range(_MAX_REFINE_ROUNDS):
            sub = [
                np.linspace(max(lo, x - d), min(hi, x + d), _REFINE_POINTS)
                for (lo, hi), x, d in zip(ranges, witness, widths)
            ]
            try:
                cand, cand_w = _lattice_extreme(f, sub, sign)
            except ExprError as exc:
                raise CertificateError(f"f{i}: {exc}") from None
            gain = cand - best if cand > best else 0.0
            if gain > 0.0:
                best, witness = cand, cand_w
            quiet = quiet + 1 if gain <= REFINE_RTOL * max(abs(best), 1e-300) else 0
            if quiet >= 2:
                break
            widths = [d / 2.0 for d in widths]

    raw = sign * best
    scale = box.rho(i) ** (spec.p(i) - 1.0)
    label = f"{kind}-f{i}"
    return GrowthEstimate(label, i, raw / scale, raw, witness, resolution, refine, ranges)


# -- index conditions ----------------------------------------------------------


@dataclass
class Comparison:
    """One strict inequality between a growth bound and its threshold."""

    component: int
    direction: str  # "<" or ">"
    estimate: GrowthEstimate
    threshold: float
    raw_threshold: float
    margin: float
    status: str

    def to_dict(self) -> dict:
        return {
            "component": self.component,
            "direction": self.direction,
            "estimate": self.estimate.to_dict(),
            "value": self.estimate.value,
            "raw_value": self.estimate.raw,
            "threshold": self.threshold,
            "raw_threshold": self.raw_threshold,
            "margin": self.margin,
            "status": self.status,
        }


def _compare(estimate: GrowthEstimate, threshold: float, direction: str, scale: float) -> Comparison:
    diff = threshold - estimate.value if direction == "<" else estimate.value - threshold
    floor = MARGIN_FLOOR * max(abs(threshold), abs(estimate.value), 1e-300)
    if abs(diff) <= floor:
        status = INCONCLUSIVE
    else:
        status = HOLDS if diff > 0 else FAILS
    return Comparison(estimate.component, direction, estimate, threshold, threshold * scale, abs(diff), status)


def _combine(statuses, need_all: bool) -> str:
    if need_all:
        if all(s == HOLDS for s in statuses):
            return HOLDS
        return FAILS if FAILS in statuses else INCONCLUSIVE
    if HOLDS in statuses:
        return HOLDS
    return INCONCLUSIVE if INCONCLUSIVE in statuses else FAILS


@dataclass
class ConditionCheck:
    name: str
    status: str
    comparisons: list

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "comparisons": [c.to_dict() for c in self.comparisons]}


@dataclass
class BoxConditions:
    box: RadiusBox
    I1: ConditionCheck
    I0: ConditionCheck
    I0star: ConditionCheck

    def get(self, tag: str) -> ConditionCheck:
        return {"I1": self.I1, "I0": self.I0, "I0star": self.I0star}[tag]

    def to_dict(self) -> dict:
        return {
            "box": [self.box.rho1, self.box.rho2],
            "I1": self.I1.to_dict(),
            "I0": self.I0.to_dict(),
            "I0star": self.I0star.to_dict(),
        }


def check_index_conditions(
    spec: ProblemSpec,
    constants: ConeConstants,
    box: RadiusBox,
    resolution: int | None = None,
) -> BoxConditions:
    """Evaluate the index-one condition and both index-zero conditions on ``box``.

    I1 needs ``sup f_i / rho_i^(p_i-1) < phi_{p_i}(m_i)`` for both i; I0 needs
    the inf over its box ``> phi_{p_i}(M_i)`` for both i; I0star needs the
    inf over ``[a_i, b_i] x [0, rho1] x [0, rho2]`` above ``phi_{p_i}(M_i)``
    for at least one i. A comparison within the relative margin floor is
    inconclusive, never a pass.
    """
    out = {}
    for tag, kind, need_all in (("I1", "sup-I1", True), ("I0", "inf-I0", True), ("I0star", "inf-I0star", False)):
        comps = []
        for i in (1, 2):
            p = spec.p(i)
            est = growth_bound(spec, kind, i, box, resolution)
            if tag == "I1":
                threshold, direction = phi_p(constants.m(i), p), "<"
            else:
                threshold, direction = phi_p(constants.M(i), p), ">"
            comps.append(_compare(est, threshold, direction, box.rho(i) ** (p - 1.0)))
        out[tag] = ConditionCheck(tag, _combine([c.status for c in comps], need_all), comps)
    return BoxConditions(box, out["I1"], out["I0"], out["I0star"])


# -- theorem ladders ------------------------------------------------------------


@dataclass
class Localization:
    lo: float
    hi: float
    rigorous_lo: float
    rigorous_hi: float
    region: str

    def to_dict(self) -> dict:
        return asdict(self)

    def contains(self, norm: float) -> bool:
        return self.lo < norm <= self.hi

    def label(self) -> str:
        return f"({self.lo:.9g}, {self.hi:.9g}]"


@dataclass
class Certificate:
    constants: ConeConstants
    ladder: list
    boxes: list
    case: str | None
    solutions: int
    conclusive: bool
    conclusion: str
    localization: list
    explanation: list
    resolution: int
    margin_floor: float = MARGIN_FLOOR

    def to_dict(self) -> dict:
        return {
            "constants": self.constants.to_dict(),
            "ladder": [{"rho1": b.rho1, "rho2": b.rho2, "tag": tag} for b, tag in self.ladder],
            "boxes": [b.to_dict() for b in self.boxes],
            "case": self.case,
            "solutions": self.solutions,
            "conclusive": self.conclusive,
            "conclusion": self.conclusion,
            "localization": [loc.to_dict() for loc in self.localization],
            "explanation": list(self.explanation),
            "resolution": self.resolution,
            "margin_floor": self.margin_floor,
        }


def _radius_name(k: int) -> str:
    return _RADIUS_NAMES[k] if k < len(_RADIUS_NAMES) else f"R{k + 1}"


def _pattern(tags: list[str]) -> tuple[str | None, str | None]:
    """Match a tag sequence against the S-cases; return (case, error)."""
    if len(tags) < 2:
        return None, "no S-pattern matched: a ladder needs at least two boxes"
    kinds = ["I0" if t in ("I0", "I0star") else "I1" for t in tags]
    for k, t in enumerate(tags[1:], start=1):
        if t == "I0star":
            return None, f"no S-pattern matched: I0star is only allowed on the innermost box (box {k + 1})"
    for k in range(len(kinds) - 1):
        if kinds[k] == kinds[k + 1]:
            return None, f"no S-pattern matched: tags must alternate between index 0 and 1 (boxes {k + 1}, {k + 2})"
    n = len(tags)
    starts_zero = kinds[0] == "I0"
    if n <= 4:
        case = {(2, True): "S1", (2, False): "S2", (3, True): "S3", (3, False): "S4",
                (4, True): "S5", (4, False): "S6"}[(n, starts_zero)]
    else:
        case = ("S5" if starts_zero else "S6") + f"-extended({n} boxes)"
    return case, None


def _orderings(ladder, constants: ConeConstants) -> list[str]:
    violations = []
    for k in range(len(ladder) - 1):
        (inner, t_in), (outer, _) = ladder[k], ladder[k + 1]
        a, b = _radius_name(k), _radius_name(k + 1)
        for i in (1, 2):
            x, y = inner.rho(i), outer.rho(i)
            if t_in == "I1":
                c = constants.c(i)
                if not x < c * y:
                    violations.append(f"ordering {a}{i} < c{i}*{b}{i} violated ({x:.9g} >= {c * y:.9g})")
            elif not x < y:
                violations.append(f"ordering {a}{i} < {b}{i} violated ({x:.9g} >= {y:.9g})")
    return violations


def _localize(ladder, constants: ConeConstants) -> list[Localization]:
    out = []
    for k in range(len(ladder) - 1):
        (inner, t_in), (outer, _) = ladder[k], ladder[k + 1]
        a, b = _radius_name(k), _radius_name(k + 1)
        lo = max(inner.rho1, inner.rho2)
        hi = max(outer.rho1, outer.rho2)
        if t_in == "I1":
            rig_lo = min(inner.rho1, inner.rho2)
            region = f"V_{{{b}1,{b}2}} minus closure(K_{{{a}1,{a}2}})"
        else:
            rig_lo = min(constants.c1 * inner.rho1, constants.c2 * inner.rho2)
            region = f"K_{{{b}1,{b}2}} minus closure(V_{{{a}1,{a}2}})"
        out.append(Localization(lo, hi, rig_lo, hi, region))
    return out


def parse_tag(tag: str) -> str:
    norm = tag.strip().replace("*", "star").replace("^", "")
    for t in TAGS:
        if norm.lower() == t.lower():
            return t
    raise CertificateError(f"unknown condition tag {tag!r}; expected one of {', '.join(TAGS)}")


def certify(
    spec: ProblemSpec,
    ladder: list,
    constants: ConeConstants | None = None,
    resolution: int | None = None,
) -> Certificate:
    """Apply the existence theorem to a ladder of ``(RadiusBox, tag)`` pairs.

    Boxes run from the innermost outwards. Tags must alternate between an
    index-zero condition (``I0``, or ``I0star`` on the innermost box only)
    and ``I1``. A ladder of ``k`` boxes that passes its radius orderings and
    whose tagged conditions all hold certifies ``k - 1`` positive solutions,
    one per consecutive pair of boxes.
    """
    constants = constants or compute_constants(spec)
    resolution = resolution or spec.numerics.lattice
    ladder = [(box, parse_tag(tag)) for box, tag in ladder]
    tags = [tag for _, tag in ladder]
    boxes = [check_index_conditions(spec, constants, box, resolution) for box, _ in ladder]

    explanation = []
    case, err = _pattern(tags)
    if err:
        explanation.append(err)
    else:
        explanation.extend(_orderings(ladder, constants))
    for k, ((box, tag), res) in enumerate(zip(ladder, boxes), start=1):
        status = res.get(tag).status
        if status != HOLDS:
            failing = [
                f"f{c.component} {c.estimate.kind.split('-')[0]} {c.estimate.raw:.9g} {c.direction} "
                f"{c.raw_threshold:.9g} {c.status}"
                for c in res.get(tag).comparisons
                if c.status != HOLDS
            ]
            explanation.append(
                f"condition {tag} at ({box.rho1:.9g}, {box.rho2:.9g}) {status}: " + "; ".join(failing)
            )

    conclusive = not explanation
    if conclusive:
        solutions = len(ladder) - 1
        localization = _localize(ladder, constants)
        word = _COUNT_WORDS.get(solutions, str(solutions))
        conclusion = f"{word} solution" + ("s" if solutions > 1 else "")
        explanation.append(f"{case}: all orderings and conditions hold")
    else:
        solutions = 0
        localization = []
        conclusion = "inconclusive"
    return Certificate(
        constants, ladder, boxes, case if not err else None, solutions, conclusive,
        conclusion, localization, explanation, resolution,
    )


# -- nonexistence -----------------------------------------------------------------


@dataclass
class NonexistenceCheck:
    condition: int
    component: int
    passed: bool
    worst_margin: float
    witness: tuple | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["witness"] = None if self.witness is None else list(self.witness)
        return d


@dataclass
class NonexistenceVerdict:
    verdict: str
    case: int | None
    checks: list
    cap: float
    resolution: int

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "case": self.case,
            "checks": [c.to_dict() for c in self.checks],
            "cap": self.cap,
            "resolution": self.resolution,
        }


def small_growth_variant(spec: ProblemSpec, constants: ConeConstants | None = None, factor: float = 0.5) -> ProblemSpec:
    """``spec`` with ``f_i = phi_{p_i}(factor * m_i * u_i)``, where ``u_1 = u`` and ``u_2 = v``.

    For ``factor < 1`` this satisfies nonexistence condition 1 on every box.
    """
    constants = constants or compute_constants(spec)
    f = {}
    for i, var in ((1, "u"), (2, "v")):
        k = factor * constants.m(i)
        f[f"f{i}"] = parse_expression(f"({k!r}*{var})^{spec.p(i) - 1.0!r}")
    return dataclasses.replace(spec, **f)


def _positive_axis(cap: float, resolution: int) -> np.ndarray:
    k = max(resolution // 2, 2)
    return np.unique(np.concatenate([np.geomspace(cap * 1e-6, cap, k), np.linspace(0.0, cap, resolution - k + 1)[1:]]))


def check_nonexistence(spec: ProblemSpec, constants: ConeConstants, cap: float, resolution: int = 64) -> NonexistenceVerdict:
    """Sample the sufficient conditions for having no positive solution.

    Condition 1 is ``f_i < phi_{p_i}(m_i u_i)`` on ``[0,1] x (0,cap]^2``;
    condition 2 is ``f_i > phi_{p_i}(M_i u_i / c_i)`` on
    ``[a_i,b_i] x (0,cap]^2``. The verdict is only ever a sampled
    nonexistence or "not established".
    """
    if not cap > 0:
        raise ValueError("cap must be positive")
    axis = _positive_axis(cap, resolution)
    checks = {}
    for i in (1, 2):
        p = spec.p(i)
        f = spec.f(i)
        for cond in (1, 2):
            t_lo, t_hi = (0.0, 1.0) if cond == 1 else constants.interval(i)
            t = np.linspace(t_lo, t_hi, resolution)
            T, U, V = np.meshgrid(t, axis, axis, indexing="ij")
            X = U if i == 1 else V
            vals = np.asarray(evaluate(f, {"t": T, "u": U, "v": V}), dtype=float)
            if cond == 1:
                gap = phi_p(constants.m(i) * X, p) - vals
            else:
                gap = vals - phi_p(constants.M(i) / constants.c(i) * X, p)
            gap = np.where(np.isfinite(gap), gap, -np.inf)
            k = np.unravel_index(int(np.argmin(gap)), gap.shape)
            worst = float(gap[k])
            passed = worst > 0.0
            witness = None if passed else (float(T[k]), float(U[k]), float(V[k]))
            checks[(cond, i)] = NonexistenceCheck(cond, i, passed, worst, witness)

    case = None
    if checks[(1, 1)].passed and checks[(1, 2)].passed:
        case = 1
    elif checks[(2, 1)].passed and checks[(2, 2)].passed:
        case = 2
    elif (checks[(1, 1)].passed and checks[(2, 2)].passed) or (checks[(1, 2)].passed and checks[(2, 1)].passed):
        case = 3
    verdict = f"sampled-nonexistence (case {case})" if case else "not established"
    return NonexistenceVerdict(verdict, case, list(checks.values()), cap, resolution)


# -- set inclusions ------------------------------------------------------------------


@dataclass
class Membership:
    in_K_small: bool
    in_V: bool
    in_K: bool
    on_boundary_V: bool
    boundary_bounds_ok: bool | None

    @property
    def chain_ok(self) -> bool:
        return (not self.in_K_small or self.in_V) and (not self.in_V or self.in_K)


@dataclass
class InclusionVerdict:
    holds: bool
    memberships: list = field(default_factory=list)


def set_membership(constants: ConeConstants, box: RadiusBox, state: StatePair, tol: float = 1e-12) -> Membership:
    t = state.grid.nodes
    u, v = state.u.values, state.v.values
    nu, nv = float(np.max(np.abs(u))), float(np.max(np.abs(v)))
    r1, r2 = box.rho1, box.rho2
    c1, c2 = constants.c1, constants.c2
    a1, b1 = constants.interval(1)
    a2, b2 = constants.interval(2)
    min_u = float(np.min(u[(t >= a1) & (t <= b1)]))
    min_v = float(np.min(v[(t >= a2) & (t <= b2)]))

    in_small = nu < c1 * r1 and nv < c2 * r2
    in_V = min_u < c1 * r1 and min_v < c2 * r2
    in_K = nu < r1 and nv < r2

    def close(x, y):
        return abs(x - y) <= tol * max(abs(y), 1.0)

    hit_u = close(min_u, c1 * r1) and min_v <= c2 * r2 * (1 + tol)
    hit_v = close(min_v, c2 * r2) and min_u <= c1 * r1 * (1 + tol)
    on_boundary = hit_u or hit_v
    bounds = None
    if on_boundary:
        # On the boundary of V some component sits in [c_i rho_i, rho_i] on
        # its subinterval and both components are bounded by their radii.
        slack = 1 + 1e-9
        ok_u = hit_u and np.all(u[(t >= a1) & (t <= b1)] >= c1 * r1 / slack) and nu <= r1 * slack
        ok_v = hit_v and np.all(v[(t >= a2) & (t <= b2)] >= c2 * r2 / slack) and nv <= r2 * slack
        bounds = bool((ok_u or ok_v) and nu <= r1 * slack and nv <= r2 * slack)
    return Membership(in_small, in_V, in_K, on_boundary, bounds)


def set_inclusion_check(constants: ConeConstants, box: RadiusBox, samples: list) -> InclusionVerdict:
    """Check ``K_{c1 rho1, c2 rho2} in V_{rho1,rho2} in K_{rho1,rho2}`` sample by sample."""
    memberships = [set_membership(constants, box, s) for s in samples]
    holds = all(m.chain_ok and m.boundary_bounds_ok is not False for m in memberships)
    return InclusionVerdict(holds, memberships)
