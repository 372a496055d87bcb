import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from crnric.compiler import compile_maxmin, compile_min2
from crnric.core import Crc, Crn, State
from crnric.dynamics import (
    BlowUp,
    NotConverged,
    RatedCrn,
    WrongOutput,
    check_convergence,
    derive_odes,
    simulate,
    trajectory_to_witness,
)
from crnric.pwl import AffineComponent, MaxMinForm
from crnric.reach import decide_reachable, verify_path

EX = Crn.from_strings("X -> C", "C + Y -> C + Z")
OSC = Crn.from_strings("X + X -> Y + Y", "Y + X -> X + X")
MAX = compile_maxmin(MaxMinForm((AffineComponent((1, 0)), AffineComponent((0, 1))), (frozenset({0}), frozenset({1}))))


def test_derive_odes_examples():
    x, c, y, k1, k2 = sympy.symbols("X C Y k1 k2", nonnegative=True)
    odes = derive_odes(Crn.from_strings("X + X -> C", "C + X -> C + Y", species=("X", "C", "Y")))
    k1, k2 = sympy.Symbol("k1", positive=True), sympy.Symbol("k2", positive=True)
    x, c, y = (sympy.Symbol(s, nonnegative=True) for s in "XCY")
    assert sympy.simplify(odes["X"] - (-2 * k1 * x**2 - k2 * c * x)) == 0
    assert sympy.simplify(odes["C"] - k1 * x**2) == 0
    assert sympy.simplify(odes["Y"] - k2 * c * x) == 0
    assert all(v == 0 for v in derive_odes(Crn((), ("A", "B"))).values())
    odes = derive_odes(OSC)
    y = sympy.Symbol("Y", nonnegative=True)
    assert sympy.simplify(odes["X"] - (-2 * k1 * x**2 + k2 * x * y)) == 0
    assert sympy.simplify(odes["Y"] - (2 * k1 * x**2 - k2 * x * y)) == 0


def test_simulate_exponential_decay():
    traj = simulate(RatedCrn.uniform(Crn.from_strings("X -> Y")), {"X": 1.0}, horizon=1.0, stop_at_equilibrium=False)
    assert traj.times[-1] == pytest.approx(1.0)
    assert traj.final["X"] == pytest.approx(math.exp(-1), abs=1e-6)
    assert traj.flux_integrals[0] == pytest.approx(1 - math.exp(-1), abs=1e-6)


def test_simulate_zero_state_is_constant():
    traj = simulate(RatedCrn.uniform(EX), {}, horizon=10.0)
    assert np.all(traj.states == 0) and traj.converged


def test_simulate_blowup():
    with pytest.raises(BlowUp):
        simulate(RatedCrn.uniform(Crn.from_strings("2 X -> 3 X")), {"X": 1.0}, horizon=10.0)


def test_rated_crn_validation():
    with pytest.raises(ValueError):
        RatedCrn(EX, (1.0,))
    with pytest.raises(ValueError):
        RatedCrn(EX, (1.0, 0.0))


def test_csv_columns():
    traj = simulate(RatedCrn.uniform(EX), {"X": 1.0, "Y": 1.0}, horizon=1.0, stop_at_equilibrium=False)
    head = traj.to_csv().splitlines()[0]
    assert head == "t,X,C,Y,Z,flux_1,flux_2"


@pytest.mark.parametrize("k1,k2", [(1, 1), (2, 1), (1, 3)])
def test_equilibrium_formula_and_conservation(k1, k2):
    traj = simulate(RatedCrn(OSC, (k1, k2)), {"X": 1.0}, horizon=1e6)
    assert traj.converged
    assert traj.final["X"] == pytest.approx(k2 / (2 * k1 + k2), abs=1e-6)
    total = traj.states.sum(axis=1)
    assert np.max(np.abs(total - 1.0)) < 1e-7


def test_check_convergence_examples():
    rng = random.Random(3)
    rates = tuple(rng.uniform(0.1, 10) for _ in range(MAX.crn.n_reactions))
    x0 = {s: float(v) for s, v in MAX.crc.input_state((1, 2)).items()}
    traj = simulate(RatedCrn(MAX.crn, rates), x0, horizon=1e20, settle_tol=1e-5)
    rep = check_convergence(MAX.crc, traj, 2)
    assert abs(rep.value - 2) < 1e-4 and rep.static
    zero = simulate(RatedCrn.uniform(MAX.crn), {}, horizon=10.0)
    assert check_convergence(MAX.crc, zero, 0).value == 0
    with pytest.raises(WrongOutput):
        check_convergence(MAX.crc, traj, 3)


def test_dynamic_equilibrium_is_not_static():
    crc = Crc(OSC, ("X",), ("Y",))
    traj = simulate(RatedCrn.uniform(OSC), {"X": 1.0}, horizon=1e6)
    with pytest.raises(NotConverged):
        check_convergence(crc, traj, 2 / 3)


def test_trajectory_to_witness_examples():
    x0 = State({"X": 1, "Y": 1})
    traj = simulate(RatedCrn.uniform(EX), {"X": 1.0, "Y": 1.0}, horizon=5.0, stop_at_equilibrium=False)
    w = trajectory_to_witness(EX, x0, traj)
    assert 2 <= len(w) <= 3
    end = verify_path(EX, w)
    assert max(abs(float(end[s]) - traj.final[s]) for s in EX.species) <= 1e-5
    assert decide_reachable(EX, x0, end).reachable

    still = simulate(RatedCrn.uniform(EX), {"X": 1.0, "Y": 1.0}, horizon=0.0)
    assert len(trajectory_to_witness(EX, x0, still)) == 0

    mn = compile_min2()
    x0 = mn.crc.input_state((2, 3))
    traj = simulate(RatedCrn.uniform(mn.crn), {s: float(v) for s, v in x0.items()}, horizon=1e6)
    end = verify_path(mn.crn, trajectory_to_witness(mn.crn, x0, traj))
    assert abs(float(end["Y+"] - end["Y-"]) - 2) < 1e-3


@settings(max_examples=25)
@given(st.integers(0, 2**32))
def test_random_trajectories_are_segment_reachable(seed):
    from randcrn import random_crn, random_state

    rng = random.Random(seed)
    crn = random_crn(rng, 4, 4)
    c = random_state(rng, crn, p_zero=0.3)
    rates = tuple(rng.uniform(0.1, 10) for _ in range(crn.n_reactions))
    try:
        traj = simulate(RatedCrn(crn, rates), {s: float(v) for s, v in c.items()}, horizon=rng.uniform(0.1, 20), stop_at_equilibrium=False)
    except BlowUp:
        return
    w = trajectory_to_witness(crn, c, traj)
    assert decide_reachable(crn, c, verify_path(crn, w)).reachable
