from itertools import combinations

from hypothesis import given
from hypothesis import strategies as st

from crnric.analysis import (
    feedforward_order,
    is_feedforward_order,
    is_siphon,
    minimal_siphons,
    output_stable,
    output_stable_siphons,
    stable_by_siphons,
    static_equilibrium,
)
from crnric.compiler import compile_min2
from crnric.core import Crc, Crn

from strategies import crns, states

CAT = Crn.from_strings("X1 -> C", "X1 + X2 + C -> C + Y")
CAT_CRC = Crc(CAT, ("X1", "X2"), ("Y",))
MIN = compile_min2().crc
OSC = Crn.from_strings("X + X -> Y + Y", "Y + X -> X + X")


def _all_minimal_siphons(crn):
    found = []
    for k in range(1, crn.n_species + 1):
        for combo in combinations(crn.species, k):
            s = frozenset(combo)
            if is_siphon(crn, s) and not any(f < s for f in found):
                found.append(s)
    return set(found)


def test_is_siphon_examples():
    assert is_siphon(CAT, {"X2"})
    assert not is_siphon(CAT, {"C"})
    assert is_siphon(CAT, set())


def test_minimal_siphons_examples():
    assert set(minimal_siphons(CAT)) == {frozenset({"X1"}), frozenset({"X2"})}
    bare = Crn((), ("A", "B"))
    assert minimal_siphons(bare) == [frozenset({"A"}), frozenset({"B"})]
    assert minimal_siphons(Crn.from_strings("X -> Y", "Y -> X")) == [frozenset({"X", "Y"})]


def test_output_stable_examples():
    assert output_stable(MIN, {"X2+": 2, "Y+": 3})
    assert not output_stable(MIN, {"X1+": 1, "X2+": 1})
    inert = Crc(Crn.from_strings("A -> B", species=("A", "B", "Y")), ("A",), ("Y",))
    assert output_stable(inert, {"A": 5})
    assert output_stable_siphons(inert) is None


def test_output_stable_siphons_examples():
    assert {frozenset({"X1"}), frozenset({"X2"})} <= set(output_stable_siphons(CAT_CRC))
    sets = set(output_stable_siphons(MIN))
    assert frozenset({"X1+", "X1-", "X2-"}) in sets
    assert frozenset({"X2+", "X1-", "X2-"}) in sets


def test_feedforward_examples():
    order = feedforward_order(MIN.crn)
    assert order is not None and is_feedforward_order(MIN.crn, order)
    assert is_feedforward_order(MIN.crn, ["X1-", "X2-", "X1+", "X2+", "Y+", "Y-"])
    assert feedforward_order(OSC) is None
    drain = Crn.from_strings("X ->", species=("X", "W"))
    assert is_feedforward_order(drain, feedforward_order(drain))
    assert is_feedforward_order(drain, ["W", "X"])


def test_static_equilibrium_examples():
    assert static_equilibrium(MIN.crn, {"X2+": 2, "Y+": 3})
    assert not static_equilibrium(MIN.crn, {"X1+": 1, "X2+": 1})
    assert static_equilibrium(MIN.crn, {})


# ------------------------------------------------------------- properties


@given(crns(max_species=5, max_reactions=5))
def test_minimal_siphons_match_exhaustive_search(crn):
    assert set(minimal_siphons(crn)) == _all_minimal_siphons(crn)
    assert all(is_siphon(crn, s) for s in minimal_siphons(crn))


@st.composite
def crc_and_state(draw):
    crn = draw(crns(max_species=5, max_reactions=6))
    out = draw(st.sampled_from(crn.species))
    inputs = tuple(s for s in crn.species if s != out)[:1]
    return Crc(crn, inputs, (out,)), draw(states(crn))


@given(crc_and_state())
def test_fixpoint_and_siphon_characterizations_agree(case):
    crc, c = case
    assert output_stable(crc, c) == stable_by_siphons(crc, c)


@given(crns(max_species=5, max_reactions=5))
def test_feedforward_order_is_literal(crn):
    order = feedforward_order(crn)
    if order is not None:
        assert is_feedforward_order(crn, order)
    else:
        # greedy is complete: no permutation works either (small cases only)
        if crn.n_species <= 4:
            from itertools import permutations

            assert not any(is_feedforward_order(crn, list(p)) for p in permutations(crn.species))
