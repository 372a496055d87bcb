"""Siphons, output stability and feedforward ordering."""

from __future__ import annotations

import itertools
from collections.abc import Mapping
from typing import Iterable, Optional

from .core import Crc, Crn, State, applicable
from .reach import fixpoint


def _producers(crn: Crn) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {s: [] for s in crn.species}
    for j, r in enumerate(crn.reactions):
        for s, _ in r.products:
            out[s].append(j)
    return out


def is_siphon(crn: Crn, species: Iterable[str]) -> bool:
    members = set(species)
    unknown = members - set(crn.species)
    if unknown:
        raise ValueError(f"unknown species {sorted(unknown)}")
    for r in crn.reactions:
        if any(s in members for s, _ in r.products) and not any(s in members for s, _ in r.reactants):
            return False
    return True


def _canonical(crn: Crn, sets: Iterable[frozenset]) -> list[frozenset]:
    uniq = set(sets)
    minimal = [s for s in uniq if not any(o < s for o in uniq)]
    return sorted(minimal, key=lambda s: sorted(crn.index(x) for x in s))


def _siphons_containing(crn: Crn, seed: frozenset) -> list[frozenset]:
    """Siphons reachable from ``seed`` by closure branching; includes every minimal one."""
    producers = _producers(crn)
    found: list[frozenset] = []
    seen: set[frozenset] = set()

    def violated(cur: frozenset) -> Optional[int]:
        for s in sorted(cur, key=crn.index):
            for j in producers[s]:
                if not any(x in cur for x, _ in crn.reactions[j].reactants):
                    return j
        return None

    stack = [seed]
    while stack:
        cur = stack.pop()
        if cur in seen or any(f <= cur for f in found):
            continue
        seen.add(cur)
        j = violated(cur)
        if j is None:
            found = [f for f in found if not cur <= f] + [cur]
            continue
        for x, _ in reversed(crn.reactions[j].reactants):
            stack.append(cur | {x})
    return found


def minimal_siphons(crn: Crn) -> list[frozenset]:
    """All inclusion-minimal nonempty siphons, sorted by species index."""
    found = []
    for s in crn.species:
        found.extend(_siphons_containing(crn, frozenset([s])))
    return _canonical(crn, found)


def output_changing(crc: Crc) -> list[int]:
    """Reactions with nonzero net stoichiometry on an output species."""
    out = []
    for j, r in enumerate(crc.crn.reactions):
        net = r.net()
        if any(net.get(y, 0) for y in crc.output):
            out.append(j)
    return out


def output_stable(crc: Crc, state: Mapping) -> bool:
    """True iff no state reachable from ``state`` can fire an output-changing reaction."""
    crn = crc.crn
    state = State(state)
    P, _ = fixpoint(crn, [i for i, s in enumerate(crn.species) if state[s] > 0])
    for j in output_changing(crc):
        if all(crn.index(s) in P for s, _ in crn.reactions[j].reactants):
            return False
    return True


def output_stable_siphons(crc: Crc) -> Optional[list[frozenset]]:
    """Minimal siphons that contain a reactant of every output-changing reaction.

    Returns ``None`` when no reaction changes the output, meaning every state
    is output stable.
    """
    changing = output_changing(crc)
    if not changing:
        return None
    choices = [sorted({s for s, _ in crc.crn.reactions[j].reactants}) for j in changing]
    hitting = {frozenset(pick) for pick in itertools.product(*choices)}
    hitting = {h for h in hitting if not any(o < h for o in hitting)}
    found = []
    for h in hitting:
        found.extend(_siphons_containing(crc.crn, h))
    return _canonical(crc.crn, found)


def stable_by_siphons(crc: Crc, state: Mapping) -> bool:
    """Output stability decided from the siphon characterization instead of the fixpoint."""
    sets = output_stable_siphons(crc)
    if sets is None:
        return True
    state = State(state)
    return any(all(state[s] == 0 for s in om) for om in sets)


def feedforward_order(crn: Crn) -> Optional[list[str]]:
    """Species order certifying the CRN is feedforward, or ``None``."""
    placed: list[str] = []
    placed_set: set[int] = set()
    remaining = list(range(crn.n_species))
    M = crn.stoich
    while remaining:
        for i in remaining:
            ok = all(
                any(M[k][j] < 0 for k in placed_set)
                for j in range(crn.n_reactions)
                if M[i][j] > 0
            )
            if ok:
                placed.append(crn.species[i])
                placed_set.add(i)
                remaining.remove(i)
                break
        else:
            return None
    return placed


def is_feedforward_order(crn: Crn, order: list[str]) -> bool:
    pos = {s: k for k, s in enumerate(order)}
    if sorted(pos) != sorted(crn.species):
        return False
    for i, s in enumerate(crn.species):
        for j in range(crn.n_reactions):
            if crn.stoich[i][j] > 0:
                if not any(crn.stoich[k][j] < 0 and pos[crn.species[k]] < pos[s] for k in range(crn.n_species)):
                    return False
    return True


def static_equilibrium(crn: Crn, state: Mapping) -> bool:
    state = State(state)
    return not any(applicable(crn, state, j) for j in range(crn.n_reactions))
