"""Compile piecewise linear functions into chemical reaction computers.

Dual-rail compilation wires one linear gadget per affine component into
balanced min trees (one per group) and a max tree over the groups.  Direct
compilation builds one dual-rail sub-network per face of the nonnegative
orthant and switches between them with indicator species.

Species are namespaced ``<gadget>.<local>``; every compiled network carries
a schedule, an order in which running each reaction to completion drives
any reachable state to an output-stable one.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Optional, Sequence, Union

from .core import Crc, Crn, CrnError, ParseError, Reaction, State, applicable, apply_flux
from .pwl import (
    AffineComponent,
    MaxMinForm,
    NotPositiveContinuous,
    RegionalPwl,
    check_positive_continuous,
    regional_to_maxmin,
)
from .reach import Path


class UnboundedReaction(CrnError):
    """A scheduled reaction consumes nothing, so it has no completion."""


@dataclass(frozen=True)
class CompiledCrc:
    crc: Crc
    schedule: tuple[int, ...]
    provenance: tuple[str, ...]

    @property
    def crn(self) -> Crn:
        return self.crc.crn


# ----------------------------------------------------------------- running


def completion_flux(crn: Crn, state: Mapping, j: int) -> Optional[Fraction]:
    """Flux that runs reaction ``j`` until a net-consumed species is exhausted."""
    state = State(state)
    if not applicable(crn, state, j):
        return None
    limits = [state[s] / -n for s, n in crn.reactions[j].net().items() if n < 0]
    if not limits:
        raise UnboundedReaction(f"reaction {j + 1} consumes nothing and cannot run to completion")
    return min(limits)


def run_schedule(crn: Crn, state: Mapping, schedule: Sequence[int]) -> tuple[State, Path]:
    """Run each scheduled reaction to completion in turn; returns the end state and the path."""
    start = cur = State(state)
    segments = []
    for j in schedule:
        u = completion_flux(crn, cur, j)
        if not u:
            continue
        seg = [Fraction(0)] * crn.n_reactions
        seg[j] = u
        cur = apply_flux(crn, cur, tuple(seg))
        segments.append(tuple(seg))
    return cur, Path(start, tuple(segments))


# ----------------------------------------------------------------- builder


class _Builder:
    def __init__(self, species: Sequence[str] = ()):
        self.species: list[str] = list(species)
        self.reactions: list[Reaction] = []
        self.tags: list[str] = []

    def add(self, reactants, products, tag: str) -> int:
        r = Reaction(tuple(reactants), tuple(products))
        self.reactions.append(r)
        self.tags.append(tag)
        return len(self.reactions) - 1

    def declare(self, *names: str) -> None:
        for n in names:
            if n not in self.species:
                self.species.append(n)

    def crn(self) -> Crn:
        return Crn(tuple(self.reactions), tuple(self.species))


def _integer_coeffs(coeffs: Sequence[Fraction]) -> tuple[list[int], int]:
    d = lcm(*(Fraction(a).denominator for a in coeffs)) if coeffs else 1
    return [int(a * d) for a in coeffs], d


def _base(name: str) -> str:
    return name[:-1] if name[-1:] in "+-" else name


Signal = tuple[str, str]


def _linear(b: _Builder, g: AffineComponent, inputs: Sequence[Optional[Signal]], out: Signal, pfx: str) -> list[int]:
    n, d = _integer_coeffs(g.coeffs)
    wp, wm = pfx + "W+", pfx + "W-"
    sched = []
    for i, ni in enumerate(n):
        if ni == 0:
            continue
        xp, xm = inputs[i]
        hi, lo = (wp, wm) if ni > 0 else (wm, wp)
        sched.append(b.add([(xp, 1)], [(hi, abs(ni))], pfx[:-1]))
        sched.append(b.add([(xm, 1)], [(lo, abs(ni))], pfx[:-1]))
    if sched:
        sched.append(b.add([(wp, d)], [(out[0], 1)], pfx[:-1]))
        sched.append(b.add([(wm, d)], [(out[1], 1)], pfx[:-1]))
    return sched


def _min(b: _Builder, x1: Signal, x2: Signal, out: Signal, tag: str, swap: bool = False) -> list[int]:
    (ap, am), (bp, bm), (yp, ym) = x1, x2, out
    if swap:
        ap, am, bp, bm, yp, ym = am, ap, bm, bp, ym, yp
    r1 = b.add([(ap, 1), (bp, 1)], [(yp, 1)], tag)
    r2 = b.add([(am, 1)], [(bp, 1), (ym, 1)], tag)
    r3 = b.add([(bm, 1)], [(ap, 1), (ym, 1)], tag)
    return [r2, r3, r1]


def compile_linear(g: AffineComponent) -> CompiledCrc:
    """Dual-rail gadget for a linear function ``y = sum a_i x_i``."""
    if g.offset:
        raise ValueError("compile_linear takes a linear component; use compile_affine for offsets")
    k = g.arity
    inputs = [(f"X{i + 1}+", f"X{i + 1}-") for i in range(k)]
    b = _Builder([s for pair in inputs for s in pair])
    sched = _linear(b, g, inputs, ("Y+", "Y-"), "")
    b.tags = ["linear"] * len(b.tags)
    b.declare("W+", "W-", "Y+", "Y-")
    crc = Crc(b.crn(), tuple(s for pair in inputs for s in pair), ("Y+", "Y-"), "dual")
    return CompiledCrc(crc, tuple(sched), tuple(b.tags))


def _two_input(swap: bool) -> CompiledCrc:
    inputs = [("X1+", "X1-"), ("X2+", "X2-")]
    b = _Builder([s for pair in inputs for s in pair] + ["Y+", "Y-"])
    sched = _min(b, inputs[0], inputs[1], ("Y+", "Y-"), "max" if swap else "min", swap)
    crc = Crc(b.crn(), ("X1+", "X1-", "X2+", "X2-"), ("Y+", "Y-"), "dual")
    return CompiledCrc(crc, tuple(sched), tuple(b.tags))


def compile_min2() -> CompiledCrc:
    return _two_input(False)


def compile_max2() -> CompiledCrc:
    return _two_input(True)


# ------------------------------------------------------------- composition


@dataclass
class _Node:
    id: str
    kind: str  # "input" | "linear" | "min" | "max"
    args: tuple = ()
    component: Optional[AffineComponent] = None


def _tree(items: list, make) -> object:
    if len(items) == 1:
        return items[0]
    mid = (len(items) + 1) // 2
    return make(_tree(items[:mid], make), _tree(items[mid:], make))


def _emit_maxmin(
    b: _Builder,
    form: MaxMinForm,
    inputs: Sequence[Signal],
    out: Signal,
    pfx: str,
    context: Optional[dict] = None,
) -> list[int]:
    """Add a max-min network to ``b``; returns its schedule.

    Offsets become initial context written into ``context`` when given.
    """
    nodes: list[_Node] = [_Node(f"in{i}", "input", (i,)) for i in range(form.arity)]
    comp_node: dict[int, int] = {}
    used = sorted(set().union(*form.groups))
    for j in used:
        nodes.append(_Node(f"L{j + 1}", "linear", tuple(i for i, a in enumerate(form.components[j].coeffs) if a), form.components[j]))
        comp_node[j] = len(nodes) - 1
    counters = {"min": 0, "max": 0}

    def make(kind):
        def mk(a, c):
            counters[kind] += 1
            nodes.append(_Node(f"{'N' if kind == 'min' else 'M'}{counters[kind]}", kind, (a, c)))
            return len(nodes) - 1
        return mk

    group_roots = [_tree([comp_node[j] for j in sorted(g)], make("min")) for g in form.groups]
    root = _tree(group_roots, make("max"))

    # signals and consumers
    consumers: dict[int, list[int]] = {i: [] for i in range(len(nodes))}
    for idx, nd in enumerate(nodes):
        if nd.kind == "linear":
            for i in nd.args:
                consumers[i].append(idx)
        elif nd.kind in ("min", "max"):
            for a in nd.args:
                consumers[a].append(idx)

    def signal(idx: int) -> Signal:
        nd = nodes[idx]
        if idx == root:
            return out
        if nd.kind == "input":
            return tuple(inputs[nd.args[0]])
        return (f"{pfx}{nd.id}.Y+", f"{pfx}{nd.id}.Y-")

    copy_of: dict[tuple[int, int], Signal] = {}
    fan_sched: dict[int, list[int]] = {}
    for idx, cons in consumers.items():
        sig = signal(idx)
        if len(cons) == 1:
            copy_of[(idx, cons[0])] = sig
        elif len(cons) > 1:
            copies = []
            for k, c in enumerate(cons, start=1):
                cp = (f"{_base(sig[0])}.c{k}+", f"{_base(sig[1])}.c{k}-")
                copy_of[(idx, c)] = cp
                copies.append(cp)
            tag = f"{pfx}fanout"
            fan_sched[idx] = [
                b.add([(sig[0], 1)], [(cp[0], 1) for cp in copies], tag),
                b.add([(sig[1], 1)], [(cp[1], 1) for cp in copies], tag),
            ]

    sched: list[int] = []
    for i in range(form.arity):
        sched.extend(fan_sched.get(i, []))
    for idx, nd in enumerate(nodes):
        if nd.kind == "input":
            continue
        o = signal(idx)
        b.declare(*o)
        npfx = f"{pfx}{nd.id}."
        if nd.kind == "linear":
            ins: list[Optional[Signal]] = [None] * form.arity
            for i in nd.args:
                ins[i] = copy_of[(i, idx)]
            sched.extend(_linear(b, AffineComponent(nd.component.coeffs), ins, o, npfx))
            off = nd.component.offset
            if off:
                if context is None:
                    raise ValueError("affine offsets need compile_affine")
                rail = o[0] if off > 0 else o[1]
                context[rail] = context.get(rail, Fraction(0)) + abs(off)
        else:
            a, c = nd.args
            sched.extend(_min(b, copy_of[(a, idx)], copy_of[(c, idx)], o, npfx[:-1], swap=nd.kind == "max"))
        sched.extend(fan_sched.get(idx, []))
    return sched


def _compile_dual(form: MaxMinForm, affine: bool) -> CompiledCrc:
    k = form.arity
    inputs = [(f"X{i + 1}+", f"X{i + 1}-") for i in range(k)]
    b = _Builder([s for pair in inputs for s in pair])
    context: dict = {}
    sched = _emit_maxmin(b, form, inputs, ("Y+", "Y-"), "", context if affine else None)
    b.declare("Y+", "Y-")
    crc = Crc(b.crn(), tuple(s for pair in inputs for s in pair), ("Y+", "Y-"), "dual", State(context))
    return CompiledCrc(crc, tuple(sched), tuple(b.tags))


def _as_maxmin(f: Union[MaxMinForm, RegionalPwl]) -> MaxMinForm:
    return f if isinstance(f, MaxMinForm) else regional_to_maxmin(f)


def compile_maxmin(f: Union[MaxMinForm, RegionalPwl]) -> CompiledCrc:
    """Dual-rail CRC computing a continuous piecewise linear function."""
    form = _as_maxmin(f)
    if not form.is_linear:
        raise ValueError("components have offsets; use compile_affine")
    return _compile_dual(form, affine=False)


def compile_affine(f: Union[MaxMinForm, RegionalPwl]) -> CompiledCrc:
    """Like :func:`compile_maxmin`, realizing offsets as initial context."""
    return _compile_dual(_as_maxmin(f), affine=True)


# ------------------------------------------------------------------ direct


def _set_tag(U: Sequence[int]) -> str:
    return "_".join(str(i + 1) for i in U)


def _restrict_form(f: Union[MaxMinForm, RegionalPwl], U: Sequence[int]) -> MaxMinForm:
    if isinstance(f, MaxMinForm):
        comps = tuple(c.restrict(U) for c in f.components)
        return MaxMinForm(comps, f.groups, "positive")
    return regional_to_maxmin(f.restrict(U))


def compile_direct(f: Union[MaxMinForm, RegionalPwl]) -> CompiledCrc:
    """Direct-encoding CRC for a positive-continuous function on the nonnegative orthant."""
    if isinstance(f, RegionalPwl):
        if f.domain not in ("nonnegative", "positive"):
            f = RegionalPwl(f.pieces, "nonnegative")
        if not check_positive_continuous(f):
            raise NotPositiveContinuous("function is not continuous on some face of the orthant")
    k = f.arity
    if k > 4:
        raise ValueError("direct compilation supports at most 4 inputs")
    xs = [f"X{i + 1}" for i in range(k)]
    b = _Builder(xs + ["Y+", "Y-"])
    subsets = [U for size in range(1, k + 1) for U in itertools.combinations(range(k), size)]

    def copy_name(U, i) -> str:
        return f"S{_set_tag(U)}.X{U.index(i) + 1}+"

    fanout = []
    for i in range(k):
        prods = [(f"I{i + 1}", 1)]
        for U in subsets:
            if i in U:
                prods.append((copy_name(U, i), 1))
                if len(U) > 1:
                    prods.append((f"J{_set_tag(U)}", 1))
        fanout.append(b.add([(xs[i], 1)], prods, "fanout"))

    activation = []
    for V in sorted(subsets, key=len):
        if len(V) < 2:
            continue
        for U1, U2 in itertools.combinations([U for U in subsets if set(U) < set(V)], 2):
            if set(U1) | set(U2) != set(V) or set(U1) <= set(U2) or set(U2) <= set(U1):
                continue
            i1, i2 = f"I{_set_tag(U1)}", f"I{_set_tag(U2)}"
            activation.append(
                b.add([(i1, 1), (i2, 1), (f"J{_set_tag(V)}", 1)], [(i1, 1), (i2, 1), (f"I{_set_tag(V)}", 1)], "activate")
            )

    sub_sched = []
    tagged: set[str] = set()
    for U in subsets:
        form = _restrict_form(f, U)
        if not form.is_linear:
            raise ValueError("direct compilation needs linear pieces (no offsets)")
        tag = _set_tag(U)
        ind = f"I{tag}"
        sub = _Builder()
        ins = [(copy_name(U, i), f"S{tag}.X{m + 1}-") for m, i in enumerate(U)]
        s = _emit_maxmin(sub, form, ins, ("Y+", "Y-"), f"S{tag}.")
        offset = len(b.reactions)
        for r, t in zip(sub.reactions, sub.tags):
            reac = dict(r.reactants)
            prod = dict(r.products)
            reac[ind] = reac.get(ind, 0) + 1
            prod[ind] = prod.get(ind, 0) + 1
            net = r.net()
            for y in ("Y+", "Y-"):
                if net.get(y, 0) > 0:
                    prod[f"T{tag}.{y}"] = net[y]
                    tagged.add(f"T{tag}.{y}")
            b.add(list(reac.items()), list(prod.items()), t)
        sub_sched.extend(offset + j for j in s)

    cancel = []
    for U in subsets:
        for U2 in subsets:
            if set(U2) < set(U):
                ind = f"I{_set_tag(U)}"
                for y, other in (("Y+", "Y-"), ("Y-", "Y+")):
                    # a tag no sub-CRC produces would only add dead reactions
                    if f"T{_set_tag(U2)}.{y}" not in tagged:
                        continue
                    cancel.append(b.add([(ind, 1), (f"T{_set_tag(U2)}.{y}", 1)], [(ind, 1), (other, 1)], "cancel"))
    annihilate = b.add([("Y+", 1), ("Y-", 1)], [], "annihilate")

    one_pass = fanout + activation + sub_sched + cancel + [annihilate]
    crc = Crc(b.crn(), tuple(xs), ("Y+",), "direct")
    return CompiledCrc(crc, tuple(one_pass * 2), tuple(b.tags))


def compile_function(f: Union[MaxMinForm, RegionalPwl], encoding: str = "dual") -> CompiledCrc:
    if encoding == "direct":
        return compile_direct(f)
    if encoding != "dual":
        raise ValueError(f"unknown encoding {encoding!r}")
    form = _as_maxmin(f)
    return compile_maxmin(form) if form.is_linear else compile_affine(form)


def serialize_schedule(compiled: CompiledCrc) -> str:
    return "".join(f"{j + 1}\n" for j in compiled.schedule)


def parse_schedule(text: str, n_reactions: int) -> tuple[int, ...]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for word in line.split():
            if not word.isdigit() or not 1 <= int(word) <= n_reactions:
                raise ParseError(f"bad reaction number {word!r}", lineno, "<schedule>")
            out.append(int(word) - 1)
    return tuple(out)
