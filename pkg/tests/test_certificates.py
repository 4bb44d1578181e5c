import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from conftest import linear_spec, make_spec
from plapcert.certificates import (
    FAILS,
    HOLDS,
    INCONCLUSIVE,
    RadiusBox,
    certify,
    check_index_conditions,
    check_nonexistence,
    compute_constants,
    growth_bound,
    growth_box,
    set_inclusion_check,
    set_membership,
    small_growth_variant,
)
from plapcert.expr import evaluate
from plapcert.numerics import Grid
from plapcert.operator import StatePair

THIRD = 1 / 3
TWO_THIRDS = 2 / 3


def closed_form_constants(p1, p2, b1, a2, b2, h11, h12, h21, h22):
    """Cone constants for g1 = g2 = 1, where every inner integral is a power."""
    q1, q2 = 1 / (p1 - 1), 1 / (p2 - 1)
    inv_m1 = 1 / (q1 + 1) + h12
    half = 0.5 ** (q2 + 1) / (q2 + 1)
    inv_m2 = max(half + h22 * 0.5 ** q2, half)
    inv_M1 = b1 ** (q1 + 1) / (q1 + 1) + h11 * b1 ** q1

    def m2_objective(nu, h):
        return ((nu - a2) ** (q2 + 1) + (b2 - nu) ** (q2 + 1)) / (q2 + 1) + h * (nu - a2) ** q2

    def global_min(h):
        # the bounded method never samples the endpoints themselves
        res = minimize_scalar(m2_objective, bounds=(a2, b2), args=(h,), method="bounded", options={"xatol": 1e-12})
        return min((res.fun, res.x), (m2_objective(a2, h), a2), (m2_objective(b2, h), b2))

    best, nu = global_min(h21)
    best_t, _ = global_min(0.0)
    return {
        "m1": 1 / inv_m1,
        "m2": 1 / inv_m2,
        "M1": 1 / inv_M1,
        "Mt1": (q1 + 1) / b1 ** (q1 + 1),
        "M2": 2 / best,
        "Mt2": 2 / best_t,
        "nu_star": nu,
    }


def test_worked_example_constants(constants):
    assert constants.c1 == pytest.approx(THIRD, abs=1e-12)
    assert constants.c2 == 0.25
    for name, value in [("m1", 1.2), ("M1", 5.78571), ("m2", 2.12132), ("M2", 9.14497)]:
        assert getattr(constants, name) == pytest.approx(value, abs=1e-3)


def test_worked_example_closed_forms(constants):
    ref = closed_form_constants(1.5, 3.0, TWO_THIRDS, 0.25, 0.75, 1 / 6, 1 / 2, 1 / 9, THIRD)
    # 1/m1 = (p1 - 1)/p1 + h12 in this setting
    assert 1 / constants.m1 == pytest.approx(0.5 / 1.5 + 0.5, rel=1e-8)
    for name in ("m1", "m2", "M1", "Mt1", "M2", "Mt2"):
        assert getattr(constants, name) == pytest.approx(ref[name], rel=1e-8), name
    assert constants.nu_star == pytest.approx(ref["nu_star"], abs=1e-6)
    assert 0.25 <= constants.nu_star <= 0.75


def test_linear_m1():
    assert compute_constants(linear_spec()).m1 == pytest.approx(2.0, rel=1e-10)


@pytest.mark.parametrize(
    "h", [("0", "0", "0", "0"), ("1/6", "1/2", "1/9", "1/3"), ("0.5", "2", "0.05", "0.1"), ("0", "3", "1", "1")]
)
@pytest.mark.parametrize("p", [("3/2", "3"), ("2", "2"), ("4", "1.25")])
def test_constants_against_closed_forms(h, p):
    spec = make_spec(p1=p[0], p2=p[1], h11=h[0], h12=h[1], h21=h[2], h22=h[3])
    c = compute_constants(spec)
    ref = closed_form_constants(spec.p1, spec.p2, spec.b1, spec.a2, spec.b2, spec.h11, spec.h12, spec.h21, spec.h22)
    for name in ("m1", "m2", "M1", "Mt1", "M2", "Mt2"):
        assert getattr(c, name) == pytest.approx(ref[name], rel=1e-7), name
    assert c.Mt1 >= c.M1 and c.Mt2 >= c.M2
    if spec.h11 == spec.h21 == 0:
        assert c.M1 == pytest.approx(c.Mt1, rel=1e-12) and c.M2 == pytest.approx(c.Mt2, rel=1e-9)


def test_growth_examples(spec):
    est = growth_bound(spec, "sup-I1", 1, RadiusBox(1.0, TWO_THIRDS))
    # (1 + (2/3)^3)/16 + 27/50, quoted as 0.62 after rounding
    assert est.raw == pytest.approx((1 + (2 / 3) ** 3) / 16 + 0.54, rel=1e-14)
    assert round(est.raw, 2) == 0.62
    assert est.witness == pytest.approx((1.0, 1.0, TWO_THIRDS))
    est = growth_bound(spec, "inf-I0star", 1, RadiusBox(0.05, 0.05))
    assert est.raw == pytest.approx(0.54, abs=1e-3) and est.witness == (0.0, 0.0, 0.0)
    est = growth_bound(spec, "inf-I0", 2, RadiusBox(9.0, 9.0))
    assert est.raw == pytest.approx(14778.9, abs=1)
    assert est.witness[1:] == pytest.approx((0.0, 2.25)) and 0.25 <= est.witness[0] <= 0.75
    assert est.value == pytest.approx(est.raw / 9.0 ** 2)
    assert est.kind == "inf-I0-f2" and est.refined and est.resolution == 64


boxes = st.tuples(st.floats(0.01, 12), st.floats(0.01, 12)).map(lambda r: RadiusBox(*r))
kinds = st.sampled_from(["sup-I1", "inf-I0", "inf-I0star"])


@settings(max_examples=40, deadline=None)
@given(boxes, kinds, st.sampled_from([1, 2]))
def test_witness_in_box_and_value_consistent(spec, box, kind, i):
    est = growth_bound(spec, kind, i, box, resolution=17)
    for x, (lo, hi) in zip(est.witness, growth_box(spec, kind, i, box)):
        assert lo <= x <= hi
    t, u, v = est.witness
    raw = float(evaluate(spec.f(i), {"t": t, "u": u, "v": v}))
    assert est.raw == pytest.approx(raw, rel=1e-14)
    assert est.value == pytest.approx(raw / box.rho(i) ** (spec.p(i) - 1), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(boxes, st.floats(1.0, 3.0), st.floats(1.0, 3.0), st.sampled_from([1, 2]))
def test_monotone_under_box_enlargement(spec, box, s1, s2, i):
    big = RadiusBox(box.rho1 * s1, box.rho2 * s2)
    assert growth_bound(spec, "sup-I1", i, big, 17).raw >= growth_bound(spec, "sup-I1", i, box, 17).raw
    assert growth_bound(spec, "inf-I0star", i, big, 17).raw <= growth_bound(spec, "inf-I0star", i, box, 17).raw


def test_refinement_never_worsens():
    # a non-monotone nonlinearity so the lattice alone is not exact
    spec = make_spec(f1="(u - 0.37)^2*(1 + t) + 0.2*(v - 0.61)^2", f2="1 + (t - 0.43)^2 - (u - 0.29)^2 + v")
    box = RadiusBox(1.0, 1.0)
    for kind, i, sign in [("sup-I1", 1, 1), ("inf-I0star", 1, -1), ("sup-I1", 2, 1), ("inf-I0star", 2, -1)]:
        prev = None
        for res in (5, 9, 17, 33, 65):  # nested lattices
            coarse = growth_bound(spec, kind, i, box, res, refine=False)
            fine = growth_bound(spec, kind, i, box, res, refine=True)
            assert sign * fine.raw >= sign * coarse.raw
            if prev is not None:
                assert sign * fine.raw >= sign * prev.raw - 1e-12 * abs(prev.raw)
            prev = fine
    # the inf of f1 is 0 at u = 0.37, v = 0.61 and the refined estimate finds it
    assert growth_bound(spec, "inf-I0star", 1, box, 17).raw == pytest.approx(0.0, abs=1e-9)


def test_index_conditions_examples(spec, constants):
    res = check_index_conditions(spec, constants, RadiusBox(1.0, TWO_THIRDS))
    assert res.I1.status == HOLDS
    c1, c2 = res.I1.comparisons
    assert c1.raw_threshold == pytest.approx(math.sqrt(1.2), abs=1e-3)
    assert c2.estimate.raw == pytest.approx(1.260, abs=5e-4) and c2.raw_threshold == pytest.approx(2.0, abs=1e-6)
    res = check_index_conditions(spec, constants, RadiusBox(0.05, 0.05))
    assert res.I0star.status == HOLDS and res.I0.status == FAILS
    first, second = res.I0star.comparisons
    assert first.status == HOLDS and first.raw_threshold == pytest.approx(0.538, abs=1e-3)
    assert second.status == FAILS
    assert first.margin == pytest.approx(abs(first.estimate.value - first.threshold))


def test_vanishing_nonlinearity_conditions():
    spec = make_spec(f1="0", f2="0")
    res = check_index_conditions(spec, compute_constants(spec), RadiusBox(1.0, 1.0))
    assert (res.I1.status, res.I0.status, res.I0star.status) == (HOLDS, FAILS, FAILS)


def test_borderline_is_inconclusive():
    base = compute_constants(make_spec())
    spec = make_spec(f1=repr(math.sqrt(base.m1)), f2="0")
    res = check_index_conditions(spec, compute_constants(spec), RadiusBox(1.0, 1.0))
    assert res.I1.comparisons[0].status == INCONCLUSIVE
    assert res.I1.status == INCONCLUSIVE


CORRECTED = [(RadiusBox(0.05, 0.05), "I0star"), (RadiusBox(1.0, TWO_THIRDS), "I1"), (RadiusBox(10.0, 10.0), "I0")]


def test_corrected_ladder_two_solutions(spec, constants):
    cert = certify(spec, CORRECTED, constants)
    assert cert.conclusive and cert.case == "S3" and cert.solutions == 2
    assert cert.conclusion == "two solutions"
    assert [(loc.lo, loc.hi) for loc in cert.localization] == [(0.05, 1.0), (1.0, 10.0)]
    for a, b in zip(cert.localization, cert.localization[1:]):
        assert a.lo < a.hi <= b.lo < b.hi
    for loc in cert.localization:
        assert loc.rigorous_lo <= loc.lo and loc.rigorous_hi == loc.hi


def test_nine_box_fails_for_f1(spec, constants):
    ladder = CORRECTED[:2] + [(RadiusBox(9.0, 9.0), "I0")]
    cert = certify(spec, ladder, constants)
    assert not cert.conclusive and cert.conclusion == "inconclusive"
    assert any("f1 inf 5.6025" in line for line in cert.explanation)


def test_single_pair_is_S1(spec, constants):
    cert = certify(spec, CORRECTED[:2], constants)
    assert cert.case == "S1" and cert.solutions == 1
    assert cert.localization[0].label() == "(0.05, 1]"


def test_S2_pattern(spec, constants):
    cert = certify(spec, CORRECTED[1:], constants)
    assert cert.case == "S2" and cert.conclusion == "one solution"


def test_ordering_violation_named(spec, constants):
    cert = certify(spec, CORRECTED[:2] + [(RadiusBox(2.0, 2.0), "I0")], constants)
    assert not cert.conclusive
    assert any("r1 < c1*s1" in line for line in cert.explanation)
    assert any("r2 < c2*s2" in line for line in cert.explanation)


@pytest.mark.parametrize(
    "tags, message",
    [(["I1"], "at least two boxes"), (["I0", "I0star"], "innermost"), (["I0", "I0", "I1"], "alternate")],
)
def test_pattern_errors(spec, constants, tags, message):
    radii = [0.05, 1.0, 10.0]
    ladder = [(RadiusBox(r, r), tag) for r, tag in zip(radii, tags)]
    cert = certify(spec, ladder, constants, resolution=9)
    assert not cert.conclusive and cert.case is None
    assert any("no S-pattern matched" in line and message in line for line in cert.explanation)


def test_certify_deterministic(spec, constants):
    a = json.dumps(certify(spec, CORRECTED, constants).to_dict(), sort_keys=True)
    b = json.dumps(certify(spec, CORRECTED, compute_constants(spec)).to_dict(), sort_keys=True)
    assert a == b


def test_nonexistence_cases(spec, constants):
    assert check_nonexistence(spec, constants, 10.0).verdict == "not established"
    small = small_growth_variant(spec, constants)
    verdict = check_nonexistence(small, constants, 10.0)
    assert verdict.case == 1 and verdict.verdict == "sampled-nonexistence (case 1)"
    q = {1: spec.p1 - 1, 2: spec.p2 - 1}
    large_f = {
        f"f{i}": f"({2 * constants.M(i) / constants.c(i)!r}*{var})^{q[i]!r}" for i, var in ((1, "u"), (2, "v"))
    }
    large = make_spec(**large_f)
    verdict = check_nonexistence(large, constants, 10.0)
    assert verdict.case == 2
    assert all(c.passed for c in verdict.checks if c.condition == 2)
    mixed = make_spec(f1=to_text(small.f1), f2=large_f["f2"])
    verdict = check_nonexistence(mixed, constants, 10.0)
    assert verdict.case == 3


def to_text(e):
    from plapcert.expr import to_source

    return to_source(e)


def test_nonexistence_failure_has_witness(spec, constants):
    verdict = check_nonexistence(spec, constants, 10.0)
    failed = [c for c in verdict.checks if not c.passed]
    assert failed and all(c.witness is not None for c in failed)


def test_inclusion_chain_on_profiles(constants):
    grid = Grid(256)
    box = RadiusBox(1.0, 2.0)
    states = [StatePair.cone_profile(grid, lam, lam) for lam in np.linspace(0.0, 3.0, 61)]
    verdict = set_inclusion_check(constants, box, states)
    assert verdict.holds
    # the families cross all three sets
    kinds = {(m.in_K_small, m.in_V, m.in_K) for m in verdict.memberships}
    assert {(True, True, True), (False, False, False)} <= kinds


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 3), st.floats(0, 3), st.floats(0, 1), st.floats(0.1, 5), st.floats(0.1, 5))
def test_inclusion_chain_random_cone_members(constants, a, b, mix, r1, r2):
    grid = Grid(128)
    t = grid.nodes
    u = a * ((1 - mix) * (1 - t) + mix * (1 - t ** 2))
    v = b * ((1 - mix) * np.minimum(t, 1 - t) + mix * np.sin(np.pi * t))
    m = set_membership(constants, RadiusBox(r1, r2), StatePair.from_arrays(grid, u, v))
    assert m.chain_ok


def test_small_state_in_every_set(constants):
    grid = Grid(128)
    box = RadiusBox(1.0, 1.0)
    state = StatePair.cone_profile(grid, constants.c1 / 2, constants.c2 / 2)
    m = set_membership(constants, box, state)
    assert m.in_K_small and m.in_V and m.in_K


def test_boundary_of_V(constants):
    grid = Grid(400)  # a2 = 1/4 and b2 = 3/4 are nodes
    t = grid.nodes
    box = RadiusBox(1.0, 1.0)
    # min over [a2, b2] of v is exactly c2 * rho2 and min of u over [0, b1] is below c1 * rho1
    v = np.minimum(t, 1 - t)
    u = 0.1 * (1 - t)
    m = set_membership(constants, box, StatePair.from_arrays(grid, u, v))
    assert m.on_boundary_V and m.boundary_bounds_ok
    assert not m.in_V and m.in_K
