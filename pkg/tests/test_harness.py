import json
import random
from fractions import Fraction as F

import pytest

from crnric.compiler import compile_linear, compile_maxmin, compile_min2, compile_direct
from crnric.core import Crc, Crn
from crnric.harness import (
    AdversaryConfig,
    InsufficientPoints,
    adversarial_prefix,
    fit_hyperplane,
    linearity_probe,
    probe_siphons,
    random_inputs,
    rationality_probe,
    verify_stable_computation,
)
from crnric.pwl import AffineComponent, MaxMinForm
from crnric.reach import verify_path

from test_pwl import POS_CONT

LIN = AffineComponent((F(2, 5), F(-3, 5)))
MAX_FORM = MaxMinForm((AffineComponent((1, 0)), AffineComponent((0, 1))), (frozenset({0}), frozenset({1})))
MAX = compile_maxmin(MAX_FORM)
PAIR = Crc(Crn.from_strings("X1 + X2 -> Y"), ("X1", "X2"), ("Y",))


def grid(lo, hi, step=1):
    vals = [F(v) for v in range(lo, hi + 1, step)]
    return [(a, b) for a in vals for b in vals]


def test_adversarial_prefix_examples():
    mn = compile_min2()
    x0 = mn.crc.input_state((2, 3))
    assert len(adversarial_prefix(mn.crn, x0, AdversaryConfig(0, 1, 1))) == 0
    p = adversarial_prefix(mn.crn, x0, AdversaryConfig(20, 1, 1))
    assert 1 <= len(p) <= 20
    verify_path(mn.crn, p)
    stuck = Crn.from_strings("A + B -> C")
    assert len(adversarial_prefix(stuck, {"A": 1}, AdversaryConfig(20, 1, 1))) == 0


def test_adversary_config_validation():
    with pytest.raises(ValueError):
        AdversaryConfig(-1)
    with pytest.raises(ValueError):
        AdversaryConfig(5, 0)


def test_verify_max_exact():
    rep = verify_stable_computation(MAX, MAX_FORM, random_inputs(2, 30, 5), AdversaryConfig(20, 1, 5, 30))
    assert rep.ok and rep.total == 30
    assert all(r.stable and r.finisher == "schedule" and r.prefix_digest for r in rep.records)


def test_verify_direct_boundary_inputs():
    d = compile_direct(POS_CONT)
    rep = verify_stable_computation(d, POS_CONT, [(2, 0), (2, F(1, 7))], AdversaryConfig(20, 1, 2))
    assert rep.ok
    assert [r.expected for r in rep.records] == ["2", "15/7"]


def test_verify_identity_without_prefix():
    ident = MaxMinForm((AffineComponent((1,)),), (frozenset({0}),))
    rep = verify_stable_computation(compile_maxmin(ident), ident, [(F(-5, 3),), (0,)], AdversaryConfig(0, 1, 0))
    assert rep.ok and all(r.prefix_segments == 0 for r in rep.records)


def test_verify_reports_wrong_function():
    wrong = MaxMinForm((AffineComponent((1, 0)), AffineComponent((0, 1))), (frozenset({0, 1}),))
    rep = verify_stable_computation(MAX, wrong, [(1, 2), (3, 3)], AdversaryConfig(5, 1, 0))
    assert not rep.ok and rep.passed == 1
    body = json.loads(rep.to_json())
    assert body["failed"] == 1 and body["records"][0]["expected"] == "1"


def test_report_is_reproducible_and_job_independent():
    xs = random_inputs(2, 12, 9)
    a = verify_stable_computation(MAX, MAX_FORM, xs, AdversaryConfig(20, 1, 9))
    b = verify_stable_computation(MAX, MAX_FORM, xs, AdversaryConfig(20, 1, 9), jobs=3)
    assert a.to_json() == b.to_json()


def test_fit_hyperplane():
    pts = [((F(1), F(0)), F(2)), ((F(0), F(1)), F(3)), ((F(0), F(0)), F(0)), ((F(2), F(2)), F(10))]
    a, b, on = fit_hyperplane(pts)
    assert a == [2, 3] and b == 0 and on
    with pytest.raises(InsufficientPoints):
        fit_hyperplane(pts[:2])


def test_two_siphon_example():
    pts = [(a, b) for a, b in grid(0, 6) if a or b]
    # once X1 is used up, Y equals all of x1; once X2 is, Y equals x2
    drained_x1 = linearity_probe(PAIR, {"X1"}, pts)
    drained_x2 = linearity_probe(PAIR, {"X2"}, pts)
    assert drained_x1.passed and drained_x1.coefficients == (1, 0)
    assert drained_x2.passed and drained_x2.coefficients == (0, 1)


def test_linear_gadget_probe_recovers_coefficients():
    reps = probe_siphons(compile_linear(LIN), grid(-4, 4))
    assert reps and all(r.passed and r.coefficients == (F(2, 5), F(-3, 5)) for r in reps)
    rat = rationality_probe(compile_linear(LIN), grid(-3, 3))
    assert rat.passed and rat.fits[0].coefficients == (F(2, 5), F(-3, 5))


def test_constant_zero_probe():
    zero = Crc(Crn.from_strings("X1 -> W", species=("X1", "W", "Y")), ("X1",), ("Y",))
    rep = linearity_probe(zero, set(), [(F(v),) for v in range(5)])
    assert rep.passed and rep.coefficients == (0,) and rep.intercept == 0


def test_max_probe_coefficients():
    rat = rationality_probe(MAX, grid(-5, 5))
    assert rat.passed
    assert {r.coefficients for r in rat.fits} <= {(1, 0), (0, 1)}
    assert len(rat.fits) >= 2
