from fractions import Fraction as F

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from crnric.analysis import is_siphon, minimal_siphons
from crnric.core import Crn, CrnError, InapplicableReaction, State, apply_flux
from crnric.reach import (
    ApproxPath,
    Path,
    SignInfeasible,
    compress_path,
    decide_reachable,
    decide_reachable_bruteforce,
    parse_path,
    path_states,
    producible,
    rationalize_path,
    segment_bound,
    serialize_path,
    straight_line_feasible,
    verify_path,
)

from strategies import crn_and_state, small_fractions, states

EX = Crn.from_strings("X -> C", "C + Y -> C + Z")
LIMIT = Crn.from_strings("X -> Y", "X + Y -> Z + Y")


# ---------------------------------------------------------------- oracles


def test_verify_path_two_segments():
    p = Path({"X": 1, "Y": 1}, ((F(1, 10), 0), (F(9, 10), 1)))
    states_ = path_states(EX, p)
    assert states_[1] == State({"X": F(9, 10), "C": F(1, 10), "Y": 1})
    assert verify_path(EX, p) == State({"C": 1, "Z": 1})


def test_verify_path_empty_and_bad_segment():
    assert verify_path(EX, Path({"X": 1})) == State({"X": 1})
    with pytest.raises(InapplicableReaction) as err:
        verify_path(EX, Path({"X": 1, "Y": 1}, ((0, 1),)))
    assert err.value.segment == 0
    assert "segment 1" in str(err.value)


def test_producible_examples():
    P, ramp = producible(EX, {"X": 1, "Y": 1})
    assert P == {"X", "Y", "C", "Z"} and len(ramp) == 2
    assert verify_path(EX, ramp).support == P
    P, ramp = producible(Crn((), ("X",)), {"X": 1})
    assert P == {"X"} and len(ramp) == 0
    P, _ = producible(Crn.from_strings("X + Y -> 2 Y"), {"X": 1})
    assert P == {"X"}


def test_straight_line_examples():
    crn = Crn.from_strings("X1 + X2 -> Y")
    assert straight_line_feasible(crn, {"X1": 2, "X2": 3}, {"X2": 1, "Y": 2}, allowed={0}) == (2,)
    assert straight_line_feasible(EX, {"X": 1}, {"X": 1}, allowed=set()) == (0, 0)
    assert straight_line_feasible(LIMIT, {"X": 1}, {"Z": 1}, require_positive={0, 1}, check_applicability=False) is None


def test_decide_examples():
    v = decide_reachable(EX, {"X": 1, "Y": 1}, {"C": 1, "Z": 1})
    assert v.reachable and len(v.witness) <= 3
    assert verify_path(EX, v.witness) == State({"C": 1, "Z": 1})
    assert not decide_reachable(LIMIT, {"X": 1}, {"Z": 1}).reachable
    v = decide_reachable(EX, {"X": 1}, {"X": 1})
    assert v.reachable and len(v.witness) == 0
    half = Crn.from_strings("2 X -> X")
    v = decide_reachable(half, {"X": 1}, {})
    assert v.reachable and v.witness.segments == ((1,),)


def test_bruteforce_examples():
    for crn, c, d in [
        (EX, {"X": 1, "Y": 1}, {"C": 1, "Z": 1}),
        (LIMIT, {"X": 1}, {"Z": 1}),
        (EX, {"X": 1}, {"X": 1}),
    ]:
        assert decide_reachable(crn, c, d).reachable == decide_reachable_bruteforce(crn, c, d).reachable
    empty = Crn((), ("X",))
    assert decide_reachable_bruteforce(empty, {"X": 1}, {"X": 1}).reachable
    assert not decide_reachable_bruteforce(empty, {"X": 1}, {"X": 2}).reachable
    v = decide_reachable_bruteforce(Crn.from_strings("X -> Y"), {"X": 1}, {"X": F(1, 2), "Y": F(1, 2)})
    assert v.reachable and verify_path(Crn.from_strings("X -> Y"), v.witness)["Y"] == F(1, 2)


def test_compress_long_walk():
    segs = []
    cur = State({"X": 1, "Y": 1})
    for k in range(50):
        u = (cur["X"] / 3, cur["Y"] / 5 if cur["C"] > 0 else 0)
        cur = apply_flux(EX, cur, u)
        segs.append(u)
    p = Path({"X": 1, "Y": 1}, tuple(segs))
    q = compress_path(EX, p)
    assert len(q) <= 3 and verify_path(EX, q) == verify_path(EX, p)
    assert len(compress_path(EX, Path({"X": 1}, ((0, 0), (0, 0))))) == 0
    one = Path({"X": 1}, ((F(1, 2), 0),))
    assert verify_path(EX, compress_path(EX, one)) == verify_path(EX, one)


def test_rationalize_examples():
    crn = Crn.from_strings("X -> Y")
    approx = ApproxPath({"X": F(1)}, ((0.6666666667,),))
    p = rationalize_path(crn, approx, tolerance=1e-6)
    u = p.segments[0][0]
    assert isinstance(u, F) and abs(float(u) - 2 / 3) <= 1e-6 and u.denominator <= 10**6
    exact = Path({"X": 1}, ((F(1, 2),),))
    assert rationalize_path(crn, exact) is exact


def test_rationalize_sign_infeasible():
    crn = Crn.from_strings("X -> Y")
    # flux 2 from X = 1 drives X negative; no exact path has that pattern
    with pytest.raises(SignInfeasible):
        rationalize_path(crn, ApproxPath({"X": F(1)}, ((2.0,),)), tolerance=1e-6)


def test_path_file_roundtrip():
    p = Path({"X": 1, "Y": 1}, ((F(1, 10), 0), (F(9, 10), 1)))
    text = serialize_path(EX, p)
    assert "reaction 2 = 1" in text
    assert parse_path(EX, text) == p


# ------------------------------------------------------------- properties


@st.composite
def reach_query(draw):
    crn, c = draw(crn_and_state(max_species=4, max_reactions=4))
    mode = draw(st.sampled_from(("path", "random")))
    if mode == "random" or crn.n_reactions == 0:
        return crn, c, draw(states(crn))
    cur = c
    segs = []
    for _ in range(draw(st.integers(1, 3))):
        u = [F(0)] * crn.n_reactions
        for j in range(crn.n_reactions):
            if draw(st.booleans()):
                u[j] = draw(small_fractions) / 8
        try:
            cur = apply_flux(crn, cur, u)
            segs.append(tuple(u))
        except CrnError:
            pass
    return crn, c, cur


@given(reach_query())
def test_decision_matches_bruteforce_with_sound_witness(q):
    crn, c, d = q
    v = decide_reachable(crn, c, d)
    assert v.reachable == decide_reachable_bruteforce(crn, c, d).reachable
    if v.reachable:
        assert verify_path(crn, v.witness) == d
        assert segment_bound(crn) == min(crn.n_reactions, crn.n_species) + 1
        assert len(v.witness) <= segment_bound(crn)


@given(reach_query(), st.data())
def test_additivity(q, data):
    crn, c, d = q
    v = decide_reachable(crn, c, d)
    assume(v.reachable)
    e = data.draw(states(crn))
    assert verify_path(crn, v.witness.shifted(e)) == d + e


@given(reach_query(), small_fractions)
def test_scaling(q, lam):
    crn, c, d = q
    v = decide_reachable(crn, c, d)
    assume(v.reachable)
    assert verify_path(crn, v.witness.scaled(lam)) == d.scale(lam)


@given(reach_query(), st.data())
def test_convexity_of_paths(q, data):
    crn, c, d = q
    v = decide_reachable(crn, c, d)
    assume(v.reachable and len(v.witness) > 0)
    # a second path from a same-support start: scale then pad
    lam = data.draw(small_fractions)
    other = v.witness.scaled(lam)
    avg = Path(
        State({s: (c[s] + other.x0[s]) / 2 for s in crn.species}),
        tuple(tuple((a + b) / 2 for a, b in zip(s1, s2)) for s1, s2 in zip(v.witness.segments, other.segments)),
    )
    verify_path(crn, avg)


@given(reach_query())
def test_siphons_stay_empty_along_witnesses(q):
    crn, c, d = q
    v = decide_reachable(crn, c, d)
    assume(v.reachable)
    for om in minimal_siphons(crn):
        if all(c[s] == 0 for s in om):
            for x in path_states(crn, v.witness):
                assert all(x[s] == 0 for s in om)


@given(crn_and_state(max_species=4, max_reactions=4))
def test_unproducible_species_form_a_siphon(case):
    crn, c = case
    P, ramp = producible(crn, c)
    assert is_siphon(crn, set(crn.species) - P)
    assert verify_path(crn, ramp).support == P
    assert len(ramp) <= min(crn.n_reactions, crn.n_species)


@given(reach_query())
def test_compress_preserves_endpoint(q):
    crn, c, d = q
    v = decide_reachable(crn, c, d)
    assume(v.reachable)
    # split every segment in halves: twice as long, same endpoint
    halves = tuple(tuple(x / 2 for x in seg) for seg in v.witness.segments for _ in range(2))
    long = Path(c, halves)
    assert verify_path(crn, long) == d
    short = compress_path(crn, long)
    assert verify_path(crn, short) == d and len(short) <= segment_bound(crn)
