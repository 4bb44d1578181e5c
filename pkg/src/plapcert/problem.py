"""Problem instances: configuration parsing and structural validation."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .expr import (
    Expr,
    ExprError,
    constant_value,
    evaluate,
    free_variables,
    parse_expression,
    to_source,
)
from .numerics import (
    DEFAULT_N,
    MIN_TOL,
    QUAD_TOL,
    ROOT_TOL,
    SCAN_POINTS,
    QuadratureError,
    integrate,
    phi_p_inv,
)


class ConfigError(ValueError):
    pass


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class Numerics:
    n: int = DEFAULT_N
    quad_tol: float = QUAD_TOL
    root_tol: float = ROOT_TOL
    min_tol: float = MIN_TOL
    scan_points: int = SCAN_POINTS
    lattice: int = 64
    samples: int = 64
    sandwich_samples: int = 10_000
    radius: float = 10.0
    # Endpoints (0 and/or 1) where g_i is declared singular.
    g1_singular: tuple = ()
    g2_singular: tuple = ()


@dataclass(frozen=True)
class ProblemSpec:
    p1: float
    p2: float
    g1: Expr
    g2: Expr
    f1: Expr
    f2: Expr
    B1: Expr
    B2: Expr
    b1: float
    a2: float
    b2: float
    h11: float
    h12: float
    h21: float
    h22: float
    numerics: Numerics = field(default_factory=Numerics)

    def __post_init__(self):
        for name in ("p1", "p2"):
            p = getattr(self, name)
            if not (math.isfinite(p) and p > 1):
                raise SpecError(f"{name} must be > 1, got {p}")
        if not 0 < self.b1 < 1:
            raise SpecError(f"b1 must lie in (0, 1), got {self.b1}")
        if not 0 < self.a2 < self.b2 < 1:
            raise SpecError(f"need 0 < a2 < b2 < 1, got a2={self.a2}, b2={self.b2}")
        for name in ("h11", "h12", "h21", "h22"):
            if getattr(self, name) < 0:
                raise SpecError(f"{name} must be >= 0")
        if self.h11 > self.h12:
            raise SpecError("need h11 <= h12")
        if self.h21 > self.h22:
            raise SpecError("need h21 <= h22")
        allowed = {"g1": {"t"}, "g2": {"t"}, "f1": {"t", "u", "v"}, "f2": {"t", "u", "v"},
                   "B1": {"w"}, "B2": {"w"}}
        for name, ok in allowed.items():
            extra = free_variables(getattr(self, name)) - ok
            if extra:
                raise SpecError(f"{name} may only use {sorted(ok)}, found {sorted(extra)}")

    def p(self, i: int) -> float:
        return self.p1 if i == 1 else self.p2

    def g(self, i: int) -> Expr:
        return self.g1 if i == 1 else self.g2

    def f(self, i: int) -> Expr:
        return self.f1 if i == 1 else self.f2

    def B(self, i: int) -> Expr:
        return self.B1 if i == 1 else self.B2

    def interval(self, i: int) -> tuple[float, float]:
        """The subinterval ``[a_i, b_i]``; ``a_1`` is always 0."""
        return (0.0, self.b1) if i == 1 else (self.a2, self.b2)

    @property
    def c1(self) -> float:
        return 1.0 - self.b1

    @property
    def c2(self) -> float:
        return min(self.a2, 1.0 - self.b2)

    def c(self, i: int) -> float:
        return self.c1 if i == 1 else self.c2

    def weight(self, i: int) -> Weight:
        return Weight(self.g(i), self.numerics.quad_tol)

    def with_numerics(self, **changes) -> ProblemSpec:
        return replace(self, numerics=replace(self.numerics, **changes))


class Weight:
    """Scalar access to ``g_i`` with a shortcut for constant weights."""

    def __init__(self, expr: Expr, tol: float = QUAD_TOL):
        self.expr = expr
        self.tol = tol
        self.const = constant_value(expr)

    def __call__(self, t: float) -> float:
        if self.const is not None:
            return self.const
        try:
            return float(evaluate(self.expr, {"t": t}))
        except ExprError:
            return math.nan

    def integral(self, a: float, b: float) -> float:
        if self.const is not None:
            return self.const * (b - a)
        return integrate(self, a, b, self.tol)


# -- configuration -----------------------------------------------------------

_SECTIONS = {
    "problem": ("p1", "p2", "g1", "g2", "f1", "f2", "B1", "B2"),
    "cone": ("b1", "a2", "b2"),
    "robin": ("h11", "h12", "h21", "h22"),
}
_NUMERIC_KEYS = {f.name: f for f in fields(Numerics)}
_INT_KEYS = {"n", "scan_points", "lattice", "samples", "sandwich_samples"}

PAPER_EXAMPLE_CONFIG = """\
[problem]
p1 = 3/2
p2 = 3
g1 = 1
g2 = 1
f1 = (u^4 + t^3*v^3)/16 + 27/50
f2 = sqrt(t*u) + 10*v^9
B1 = piecewise((w <= 0, w), (w <= 1, w/2), (else, w/6 + 1/3))
B2 = piecewise((w <= 1, w/3), (else, w/9 + 2/9))

[cone]
b1 = 2/3
a2 = 1/4
b2 = 3/4

[robin]
h11 = 1/6
h12 = 1/2
h21 = 1/9
h22 = 1/3
"""


def _constant(text: str, where: str) -> float:
    try:
        value = constant_value(parse_expression(text.strip()))
    except ExprError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if value is None:
        raise ConfigError(f"{where}: expected a number, got {text!r}")
    return value


def _endpoints(text: str, where: str) -> tuple:
    out = []
    for item in text.replace(",", " ").split():
        x = _constant(item, where)
        if x not in (0.0, 1.0):
            raise ConfigError(f"{where}: singular endpoints must be 0 or 1, got {item!r}")
        out.append(x)
    return tuple(sorted(set(out)))


def parse_config(text: str, source: str = "<config>") -> ProblemSpec:
    """Build a :class:`ProblemSpec` from INI-style text.

    Raises:
        ConfigError: Missing or unknown keys, bad numbers or expressions.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    for section in parser.sections():
        if section not in _SECTIONS and section != "numerics":
            raise ConfigError(f"unknown section [{section}]")
        known = _SECTIONS.get(section, tuple(_NUMERIC_KEYS))
        for key in parser[section]:
            if key not in known:
                raise ConfigError(f"unknown key {section}.{key}")

    values: dict = {}
    for section, keys in _SECTIONS.items():
        for key in keys:
            if not parser.has_option(section, key):
                raise ConfigError(f"missing key {section}.{key}")
            raw = parser.get(section, key)
            where = f"{section}.{key}"
            if section == "problem" and key not in ("p1", "p2"):
                try:
                    values[key] = parse_expression(raw.strip())
                except ExprError as exc:
                    raise ConfigError(f"{where}: {exc}") from None
            else:
                values[key] = _constant(raw, where)

    numerics = {}
    if parser.has_section("numerics"):
        for key, raw in parser["numerics"].items():
            where = f"numerics.{key}"
            if key in ("g1_singular", "g2_singular"):
                numerics[key] = _endpoints(raw, where)
            elif key in _INT_KEYS:
                x = _constant(raw, where)
                if x != int(x) or x < 1:
                    raise ConfigError(f"{where}: expected a positive integer, got {raw!r}")
                numerics[key] = int(x)
            else:
                x = _constant(raw, where)
                if not x > 0:
                    raise ConfigError(f"{where}: expected a positive number, got {raw!r}")
                numerics[key] = x
    try:
        return ProblemSpec(**values, numerics=Numerics(**numerics))
    except SpecError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def paper_example() -> ProblemSpec:
    return parse_config(PAPER_EXAMPLE_CONFIG, source="<paper example>")


def spec_to_config(spec: ProblemSpec) -> str:
    """Render ``spec`` as config text that :func:`parse_config` reads back."""
    lines = ["[problem]"]
    lines += [f"p1 = {spec.p1!r}", f"p2 = {spec.p2!r}"]
    for key in ("g1", "g2", "f1", "f2", "B1", "B2"):
        lines.append(f"{key} = {to_source(getattr(spec, key))}")
    lines += ["", "[cone]"] + [f"{k} = {getattr(spec, k)!r}" for k in _SECTIONS["cone"]]
    lines += ["", "[robin]"] + [f"{k} = {getattr(spec, k)!r}" for k in _SECTIONS["robin"]]
    lines += ["", "[numerics]"]
    for key in _NUMERIC_KEYS:
        value = getattr(spec.numerics, key)
        if isinstance(value, tuple):
            if not value:
                continue
            value = ", ".join(repr(x) for x in value)
        else:
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


# -- validation ---------------------------------------------------------------

PASS = "pass"
SAMPLED_PASS = "sampled-pass"
FAIL = "fail"


@dataclass
class ConditionResult:
    name: str
    verdict: str
    detail: str = ""
    witness: dict | None = None
    values: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.verdict != FAIL


@dataclass
class ValidationReport:
    conditions: dict
    samples: int
    radius: float
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.conditions.values())

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "samples": self.samples,
            "radius": self.radius,
            "conditions": {
                k: {"verdict": c.verdict, "detail": c.detail, "witness": c.witness, "values": c.values}
                for k, c in self.conditions.items()
            },
            "notes": list(self.notes),
        }


def _check_c1(spec: ProblemSpec, samples: int, radius: float) -> ConditionResult:
    t = np.linspace(0.0, 1.0, samples)
    r = np.linspace(0.0, radius, samples)
    T, U, V = np.meshgrid(t, r, r, indexing="ij")
    for i in (1, 2):
        try:
            vals = evaluate(spec.f(i), {"t": T, "u": U, "v": V})
        except ExprError as exc:
            return ConditionResult("C1", FAIL, f"f{i} could not be evaluated: {exc}")
        bad = ~np.isfinite(vals) | (vals < 0)
        if bad.any():
            k = np.unravel_index(int(np.flatnonzero(bad)[0]), bad.shape)
            witness = {"t": float(T[k]), "u": float(U[k]), "v": float(V[k]), "f": float(vals[k])}
            kind = "negative" if np.isfinite(vals[k]) else "not finite"
            return ConditionResult("C1", FAIL, f"f{i} is {kind} at a sample point", witness)
    return ConditionResult(
        "C1", SAMPLED_PASS, f"f1, f2 >= 0 on a {samples}^3 lattice over [0,1]x[0,{radius}]^2"
    )


def _sample_weight(spec: ProblemSpec, i: int, samples: int):
    """Return a witness dict if g_i is negative (or non-finite off its declared singular endpoints)."""
    singular = spec.numerics.g1_singular if i == 1 else spec.numerics.g2_singular
    t = np.linspace(0.0, 1.0, 16 * samples + 1)
    keep = np.ones_like(t, dtype=bool)
    for x in singular:
        keep &= t != x
    t = t[keep]
    try:
        g = evaluate(spec.g(i), {"t": t})
    except ExprError as exc:
        return {"error": str(exc)}
    bad = ~np.isfinite(g) | (g < 0)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        return {"t": float(t[k]), "g": float(g[k])}
    return None


def _guarded(fn):
    try:
        return fn(), None
    except QuadratureError as exc:
        return math.inf, str(exc)


def _check_c2(spec: ProblemSpec, samples: int) -> ConditionResult:
    witness = _sample_weight(spec, 1, samples)
    if witness is not None:
        return ConditionResult("C2", FAIL, "g1 is negative or undefined at a sample point", witness)
    g = spec.weight(1)
    tol = spec.numerics.quad_tol
    p = spec.p1
    total, err_l1 = _guarded(lambda: g.integral(0.0, 1.0))
    value, err = _guarded(lambda: integrate(lambda s: phi_p_inv(g.integral(0.0, s), p), 0.0, 1.0, tol))
    on_sub, _ = _guarded(lambda: g.integral(*spec.interval(1)))
    values = {"int_g1": total, "integral": value, "int_g1_on_[a1,b1]": on_sub}
    if err_l1 or not math.isfinite(total):
        return ConditionResult("C2", FAIL, f"g1 is not integrable: {err_l1}", values=values)
    if err or not (0.0 < value < math.inf):
        return ConditionResult("C2", FAIL, f"defining integral not in (0, inf): {err or value}", values=values)
    if not on_sub > 0:
        return ConditionResult("C2", FAIL, "int of g1 over [0, b1] is not positive", values=values)
    return ConditionResult("C2", SAMPLED_PASS, "g1 >= 0 at samples; defining integral finite and positive", values=values)


def _c3_split_integral(spec: ProblemSpec) -> float:
    g = spec.weight(2)
    p, tol = spec.p2, spec.numerics.quad_tol
    left = integrate(lambda s: phi_p_inv(g.integral(s, 0.5), p), 0.0, 0.5, tol)
    right = integrate(lambda s: phi_p_inv(g.integral(0.5, s), p), 0.5, 1.0, tol)
    return left + right


def strong_c3_integral(spec: ProblemSpec) -> float:
    """``int_0^1 phi^{-1}(int_s^1 g2) ds``, the stronger variant of C3."""
    g = spec.weight(2)
    return integrate(lambda s: phi_p_inv(g.integral(s, 1.0), spec.p2), 0.0, 1.0, spec.numerics.quad_tol)


def _check_c3(spec: ProblemSpec, samples: int) -> ConditionResult:
    witness = _sample_weight(spec, 2, samples)
    if witness is not None:
        return ConditionResult("C3", FAIL, "g2 is negative or undefined at a sample point", witness)
    g = spec.weight(2)
    total, err_l1 = _guarded(lambda: g.integral(0.0, 1.0))
    value, err = _guarded(lambda: _c3_split_integral(spec))
    strong, err_strong = _guarded(lambda: strong_c3_integral(spec))
    on_sub, _ = _guarded(lambda: g.integral(*spec.interval(2)))
    values = {
        "int_g2": total,
        "integral": value,
        "int_g2_on_[a2,b2]": on_sub,
        "strong_integral": strong,
        "strong_integral_finite": err_strong is None and math.isfinite(strong),
    }
    if err_l1 or not math.isfinite(total):
        return ConditionResult("C3", FAIL, f"g2 is not integrable: {err_l1}", values=values)
    if err or not (0.0 < value < math.inf):
        return ConditionResult("C3", FAIL, f"defining integral not in (0, inf): {err or value}", values=values)
    if not on_sub > 0:
        return ConditionResult("C3", FAIL, "int of g2 over [a2, b2] is not positive", values=values)
    return ConditionResult("C3", SAMPLED_PASS, "g2 >= 0 at samples; split integral finite and positive", values=values)


def sandwich_points(radius: float, count: int) -> np.ndarray:
    """Sample points in ``(0, radius]``, half log-spaced towards 0."""
    k = max(count // 2, 2)
    pts = np.concatenate([np.geomspace(radius * 1e-9, radius, k), np.linspace(0.0, radius, count - k + 1)[1:]])
    return np.unique(pts)


def _check_c4(spec: ProblemSpec, count: int, radius: float) -> ConditionResult:
    w = sandwich_points(radius, count)
    for i in (1, 2):
        lo = spec.h11 if i == 1 else spec.h21
        hi = spec.h12 if i == 1 else spec.h22
        try:
            b = evaluate(spec.B(i), {"w": w})
        except ExprError as exc:
            return ConditionResult("C4", FAIL, f"B{i} could not be evaluated: {exc}")
        slack = 1e-12 * np.abs(w)
        bad = ~np.isfinite(b) | (b < lo * w - slack) | (b > hi * w + slack)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            witness = {"w": float(w[k]), f"B{i}": float(b[k]), "lower": lo * float(w[k]), "upper": hi * float(w[k])}
            return ConditionResult("C4", FAIL, f"B{i} leaves [h{i}1 w, h{i}2 w] at a sample point", witness)
    return ConditionResult("C4", SAMPLED_PASS, f"sandwich holds at {len(w)} points in (0, {radius}]")


def validate_spec(spec: ProblemSpec, samples: int | None = None) -> ValidationReport:
    """Check C1-C4 by sampling and quadrature; failures carry a witness."""
    samples = samples or spec.numerics.samples
    radius = spec.numerics.radius
    conditions = {
        "C1": _check_c1(spec, samples, radius),
        "C2": _check_c2(spec, samples),
        "C3": _check_c3(spec, samples),
        "C4": _check_c4(spec, spec.numerics.sandwich_samples, radius),
    }
    notes = []
    c3 = conditions["C3"].values
    if c3.get("strong_integral_finite") is False:
        notes.append("the stronger C3 variant int_0^1 phi^{-1}(int_s^1 g2) ds diverges; C3 itself is what is required")
    notes.append("C4 is checked for w > 0 only")
    return ValidationReport(conditions, samples, radius, notes)
