import random
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from crnric.analysis import feedforward_order, output_stable
from crnric.compiler import (
    CompiledCrc,
    compile_affine,
    compile_direct,
    compile_linear,
    compile_max2,
    compile_maxmin,
    compile_min2,
    parse_schedule,
    run_schedule,
    serialize_schedule,
)
from crnric.core import Crc, Crn, Reaction, State
from crnric.harness import AdversaryConfig, adversarial_prefix
from crnric.pwl import AffineComponent, MaxMinForm, NotPositiveContinuous, parse_pwl
from crnric.reach import path_states

from test_pwl import MINMIN, NOT_POS_CONT, POS_CONT

LIN = AffineComponent((F(2, 5), F(-3, 5)))


def rxn(text):
    return Reaction.parse(text)


def run(compiled, x, split=None):
    final, _ = run_schedule(compiled.crn, compiled.crc.input_state(x, split), compiled.schedule)
    return compiled.crc.output_value(final), final


def test_linear_reactions():
    c = compile_linear(LIN)
    assert set(c.crn.reactions) == {rxn(t) for t in ("X1+ -> 2 W+", "X1- -> 2 W-", "X2+ -> 3 W-", "X2- -> 3 W+", "5 W+ -> Y+", "5 W- -> Y-")}
    ident = compile_linear(AffineComponent((1,)))
    assert set(ident.crn.reactions) == {rxn(t) for t in ("X1+ -> W+", "X1- -> W-", "W+ -> Y+", "W- -> Y-")}
    assert run(compile_linear(LIN), (5, 0))[0] == 2


def test_min_and_max_gadgets():
    mn, mx = compile_min2(), compile_max2()
    assert set(mn.crn.reactions) == {rxn("X1+ + X2+ -> Y+"), rxn("X1- -> X2+ + Y-"), rxn("X2- -> X1+ + Y-")}
    swap = {"X1+": "X1-", "X1-": "X1+", "X2+": "X2-", "X2-": "X2+", "Y+": "Y-", "Y-": "Y+"}
    swapped = {Reaction(tuple((swap[s], n) for s, n in r.reactants), tuple((swap[s], n) for s, n in r.products)) for r in mn.crn.reactions}
    assert set(mx.crn.reactions) == swapped
    assert run(mn, (2, 3))[0] == 2


def test_maxmin_examples():
    mx = compile_maxmin(MaxMinForm((AffineComponent((1, 0)), AffineComponent((0, 1))), (frozenset({0}), frozenset({1}))))
    assert run(mx, (-1, 2))[0] == 2
    ident = compile_maxmin(MaxMinForm((AffineComponent((1,)),), (frozenset({0}),)))
    assert run(ident, (F(-7, 3),))[0] == F(-7, 3)
    assert run(compile_maxmin(MINMIN), (1, 2, 5, 3))[0] == 4


def test_direct_examples():
    d = compile_direct(POS_CONT)
    assert d.crc.kind == "direct" and d.crc.output == ("Y+",)
    for x, y in [((2, 0), 2), ((2, 1), 3), ((0, 3), 3), ((0, 0), 0), ((2, F(1, 7)), F(15, 7))]:
        val, final = run(d, x)
        assert val == y
        assert output_stable(d.crc, final)
    zero = compile_direct(MaxMinForm((AffineComponent((0, 0)),), (frozenset({0}),), "nonnegative"))
    assert all(r.product_counts.get("Y+", 0) == 0 for r in zero.crn.reactions)
    assert run(zero, (3, 4))[0] == 0
    with pytest.raises(NotPositiveContinuous):
        compile_direct(NOT_POS_CONT)


def test_four_reaction_direct_max_by_hand():
    # hand-compiled direct max from the four-reaction construction
    crn = Crn.from_strings("X1 -> Y + Z1", "X2 -> Y + Z2", "Z1 + Z2 -> K", "K + Y ->")
    crc = Crc(crn, ("X1", "X2"), ("Y",))
    for x1, x2 in [(1, 2), (3, 1), (0, 0), (F(5, 2), F(5, 2))]:
        final, _ = run_schedule(crn, crc.input_state((x1, x2)), [0, 1, 2, 3])
        assert crc.output_value(final) == max(x1, x2)
    direct = compile_direct(parse_pwl("arity: 2\ndomain: nonnegative\ncomponent a = x1\ncomponent b = x2\nmaxmin: {1} {2}\n").function())
    assert run(direct, (1, 2))[0] == 2


def test_affine_examples():
    plus1 = compile_affine(MaxMinForm((AffineComponent((1,), 1),), (frozenset({0}),)))
    assert plus1.crc.initial_context == State({"Y+": 1})
    assert run(plus1, (0,))[0] == 1
    const = compile_affine(MaxMinForm((AffineComponent((0,), 1),), (frozenset({0}),)))
    assert [run(const, (x,))[0] for x in (-4, 0, 7)] == [1, 1, 1]
    mx1 = compile_affine(MaxMinForm((AffineComponent((1,)), AffineComponent((0,), 1)), (frozenset({0}), frozenset({1}))))
    assert run(mx1, (0,))[0] == 1 and run(mx1, (5,))[0] == 5


def test_schedule_file_roundtrip():
    c = compile_min2()
    text = serialize_schedule(c)
    assert text.split() == ["2", "3", "1"]
    assert parse_schedule(text, c.crn.n_reactions) == tuple(c.schedule)


# ------------------------------------------------------------- properties

FORMS = {
    "max": MaxMinForm((AffineComponent((1, 0)), AffineComponent((0, 1))), (frozenset({0}), frozenset({1}))),
    "min": MaxMinForm((AffineComponent((1, 0)), AffineComponent((0, 1))), (frozenset({0, 1}),)),
    "linear": MaxMinForm((LIN,), (frozenset({0}),)),
    "minmin": MINMIN,
    "mixed": MaxMinForm(
        (AffineComponent((1, -1)), AffineComponent((F(1, 2), 0)), AffineComponent((0, 2)), AffineComponent((-1, 0))),
        (frozenset({0, 1}), frozenset({2, 3}), frozenset({1})),
    ),
}
COMPILED = {k: compile_maxmin(f) for k, f in FORMS.items()}
rationals = st.fractions(-10, 10, max_denominator=12)


@pytest.mark.parametrize("name", sorted(COMPILED))
def test_dual_constructions_are_feedforward_and_monotone(name):
    c = COMPILED[name]
    assert feedforward_order(c.crn) is not None
    for r in c.crn.reactions:
        net = r.net()
        assert net.get("Y+", 0) >= 0 and net.get("Y-", 0) >= 0


@pytest.mark.parametrize("name", sorted(COMPILED))
@given(data=st.data())
def test_stable_computation_and_rail_split_invariance(name, data):
    c, f = COMPILED[name], FORMS[name]
    x = data.draw(st.lists(rationals, min_size=f.arity, max_size=f.arity))
    split = data.draw(st.lists(st.fractions(0, 3, max_denominator=6), min_size=f.arity, max_size=f.arity))
    seed = data.draw(st.integers(0, 2**32))
    x0 = c.crc.input_state(x, split)
    prefix = adversarial_prefix(c.crn, x0, AdversaryConfig(8, 1, seed), random.Random(seed))
    mid = path_states(c.crn, prefix)[-1]
    final, _ = run_schedule(c.crn, mid, c.schedule)
    assert output_stable(c.crc, final)
    assert c.crc.output_value(final) == f(x)
    assert run(c, x)[0] == f(x)


@given(st.lists(rationals, min_size=2, max_size=2), st.integers(0, 2**32))
def test_linear_gadget_conservation_law(x, seed):
    c = compile_linear(LIN)
    d, n = 5, {"X1": 2, "X2": -3}

    def q(s):
        y = s["Y+"] - s["Y-"]
        w = s["W+"] - s["W-"]
        return y + w / d + sum(F(k, d) * (s[f"{i}+"] - s[f"{i}-"]) for i, k in n.items())

    x0 = c.crc.input_state(x)
    path = adversarial_prefix(c.crn, x0, AdversaryConfig(12, 1, seed), random.Random(seed))
    assert all(q(s) == q(x0) for s in path_states(c.crn, path))


def _relabel(compiled: CompiledCrc, names: dict) -> Crn:
    def ren(side):
        return tuple((names.get(s, s), k) for s, k in side)

    rs = tuple(Reaction(ren(r.reactants), ren(r.products)) for r in compiled.crn.reactions)
    return Crn(rs, tuple(dict.fromkeys(names.get(s, s) for s in compiled.crn.species)))


@given(st.lists(rationals, min_size=3, max_size=3))
def test_composition_by_relabeling(x):
    # min(g(x1, x2), x3) with g = (2x1 - 3x2)/5, wired by renaming species
    lin, mn = compile_linear(LIN), compile_min2()
    a = _relabel(lin, {"Y+": "G+", "Y-": "G-", "W+": "g.W+", "W-": "g.W-"})
    b = _relabel(mn, {"X1+": "G+", "X1-": "G-", "X2+": "X3+", "X2-": "X3-"})
    crn = Crn(a.reactions + b.reactions, tuple(dict.fromkeys(a.species + b.species)))
    crc = Crc(crn, ("X1+", "X1-", "X2+", "X2-", "X3+", "X3-"), ("Y+", "Y-"), "dual")
    schedule = list(lin.schedule) + [len(a.reactions) + j for j in mn.schedule]
    final, _ = run_schedule(crn, crc.input_state(x), schedule)
    assert crc.output_value(final) == min(LIN(x[:2]), x[2])
    assert output_stable(crc, final)
