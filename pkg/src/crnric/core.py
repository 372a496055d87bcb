"""Exact data model for chemical reaction networks and their text formats.

All concentrations and fluxes are :class:`fractions.Fraction`.  Floats are
rejected at construction time so that reachability arithmetic stays exact.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

Number = Union[int, Fraction, str]
Flux = tuple  # tuple[Fraction, ...], one entry per reaction

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*[+-]?$")


class CrnError(ValueError):
    """Base class for domain errors raised by this package."""


class InapplicableReaction(CrnError):
    def __init__(self, index: int, segment: Optional[int] = None):
        self.index = index
        self.segment = segment
        where = f" in segment {segment + 1}" if segment is not None else ""
        super().__init__(f"reaction {index + 1} fired{where} while a reactant is absent")


class NegativeResult(CrnError):
    def __init__(self, species: str, segment: Optional[int] = None):
        self.species = species
        self.segment = segment
        where = f" after segment {segment + 1}" if segment is not None else ""
        super().__init__(f"species {species} would become negative{where}")


class ParseError(CrnError):
    def __init__(self, message: str, line: Optional[int] = None, source: str = "<text>"):
        self.line = line
        loc = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(loc + message)


def to_fraction(value) -> Fraction:
    """Convert ints, Fractions and numeric strings to Fraction; refuse floats."""
    if isinstance(value, bool):
        raise TypeError("booleans are not concentrations")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"exact rational expected, got {type(value).__name__}")


def check_name(name: str) -> str:
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise CrnError(f"invalid species name {name!r}")
    return name


def _merge_terms(terms: Iterable[tuple[str, int]]) -> tuple[tuple[str, int], ...]:
    counts: dict[str, int] = {}
    for name, n in terms:
        check_name(name)
        if not isinstance(n, int) or n < 0:
            raise CrnError(f"stoichiometric count for {name} must be a nonnegative integer")
        counts[name] = counts.get(name, 0) + n
    return tuple((s, n) for s, n in counts.items() if n > 0)


@dataclass(frozen=True, eq=False)
class Reaction:
    """A reaction ``reactants -> products``.

    Terms keep their written order for display; equality and hashing ignore
    that order.
    """

    reactants: tuple[tuple[str, int], ...]
    products: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "reactants", _merge_terms(_items(self.reactants)))
        object.__setattr__(self, "products", _merge_terms(_items(self.products)))
        if not self.reactants:
            raise CrnError("reaction has no reactants")

    @classmethod
    def parse(cls, text: str) -> "Reaction":
        return _parse_reaction(text)

    @property
    def reactant_counts(self) -> dict[str, int]:
        return dict(self.reactants)

    @property
    def product_counts(self) -> dict[str, int]:
        return dict(self.products)

    def net(self) -> dict[str, int]:
        """Net production per species (zeros dropped)."""
        out = dict(self.products)
        for s, n in self.reactants:
            out[s] = out.get(s, 0) - n
        return {s: n for s, n in out.items() if n != 0}

    def species(self) -> list[str]:
        seen = dict.fromkeys(s for s, _ in self.reactants)
        seen.update(dict.fromkeys(s for s, _ in self.products))
        return list(seen)

    def _key(self):
        return frozenset(self.reactants), frozenset(self.products)

    def __eq__(self, other):
        if not isinstance(other, Reaction):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __str__(self):
        lhs = " + ".join(_term(s, n) for s, n in self.reactants)
        rhs = " + ".join(_term(s, n) for s, n in self.products)
        return f"{lhs} -> {rhs}".rstrip()

    __repr__ = lambda self: f"Reaction({str(self)!r})"  # noqa: E731


def _items(terms) -> Iterable[tuple[str, int]]:
    if isinstance(terms, Mapping):
        return terms.items()
    return terms


def _term(name: str, n: int) -> str:
    return name if n == 1 else f"{n} {name}"


class State(Mapping):
    """Immutable map from species to nonnegative Fraction; missing keys read 0."""

    __slots__ = ("_conc", "_hash")

    def __init__(self, conc: Union[Mapping, Iterable, None] = None, **kw):
        items = dict(conc or {})
        items.update(kw)
        clean: dict[str, Fraction] = {}
        for s, v in items.items():
            check_name(s)
            q = to_fraction(v)
            if q < 0:
                raise NegativeResult(s)
            if q:
                clean[s] = q
        self._conc = clean
        self._hash = None

    @classmethod
    def from_vector(cls, species: Sequence[str], vec: Sequence[Fraction]) -> "State":
        return cls(zip(species, vec))

    def __getitem__(self, s: str) -> Fraction:
        return self._conc.get(s, Fraction(0))

    def __contains__(self, s) -> bool:
        return s in self._conc

    def __iter__(self) -> Iterator[str]:
        return iter(self._conc)

    def __len__(self) -> int:
        return len(self._conc)

    def __eq__(self, other):
        if isinstance(other, State):
            return self._conc == other._conc
        if isinstance(other, Mapping):
            return self._conc == State(other)._conc
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._conc.items()))
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{s}: {v}" for s, v in self._conc.items())
        return f"State({{{inner}}})"

    @property
    def support(self) -> frozenset:
        return frozenset(self._conc)

    def vector(self, species: Sequence[str]) -> list[Fraction]:
        return [self[s] for s in species]

    def __add__(self, other: Mapping) -> "State":
        out = dict(self._conc)
        for s, v in other.items():
            out[s] = out.get(s, Fraction(0)) + to_fraction(v)
        return State(out)

    def scale(self, lam) -> "State":
        lam = to_fraction(lam)
        return State({s: v * lam for s, v in self._conc.items()})

    def restrict_zero(self, species: Iterable[str]) -> bool:
        """True when every species in ``species`` is absent."""
        return all(s not in self._conc for s in species)


@dataclass(frozen=True)
class Crn:
    """Species list plus reaction list; the stoichiometry matrix is derived."""

    reactions: tuple[Reaction, ...]
    species: tuple[str, ...] = ()
    stoich: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        reactions = tuple(r if isinstance(r, Reaction) else Reaction.parse(r) for r in self.reactions)
        declared = list(dict.fromkeys(self.species))
        if len(declared) != len(tuple(self.species)):
            raise CrnError("duplicate species in declaration")
        for r in reactions:
            for s in r.species():
                if s not in declared:
                    declared.append(s)
        for s in declared:
            check_name(s)
        index = {s: i for i, s in enumerate(declared)}
        mat = [[0] * len(reactions) for _ in declared]
        for j, r in enumerate(reactions):
            for s, n in r.net().items():
                mat[index[s]][j] = n
        object.__setattr__(self, "reactions", reactions)
        object.__setattr__(self, "species", tuple(declared))
        object.__setattr__(self, "stoich", tuple(tuple(row) for row in mat))
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_strings(cls, *lines: str, species: Sequence[str] = ()) -> "Crn":
        return cls(tuple(Reaction.parse(s) for s in lines), tuple(species))

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    def index(self, species: str) -> int:
        return self._index[species]

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(row[j] for row in self.stoich)

    def zero_flux(self) -> Flux:
        return (Fraction(0),) * len(self.reactions)

    def flux(self, values: Union[Mapping[int, Number], Sequence[Number]]) -> Flux:
        """Dense flux vector from a sequence or a ``{reaction_index: value}`` map."""
        if isinstance(values, Mapping):
            out = list(self.zero_flux())
            for j, v in values.items():
                out[j] = to_fraction(v)
        else:
            out = [to_fraction(v) for v in values]
        if len(out) != len(self.reactions):
            raise CrnError(f"flux has {len(out)} entries for {len(self.reactions)} reactions")
        if any(v < 0 for v in out):
            raise CrnError("flux entries must be nonnegative")
        return tuple(out)

    def __str__(self):
        return serialize_crn(self)


@dataclass(frozen=True)
class Crc:
    """A CRN with designated inputs and output.

    For ``kind == "dual"`` the inputs are consecutive (plus, minus) pairs and
    ``output`` is ``(Y+, Y-)``; for ``"direct"`` ``output`` has one species.
    """

    crn: Crn
    inputs: tuple[str, ...]
    output: tuple[str, ...]
    kind: str = "direct"
    initial_context: State = field(default_factory=State)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "output", tuple(self.output))
        if not isinstance(self.initial_context, State):
            object.__setattr__(self, "initial_context", State(self.initial_context))
        if self.kind not in ("direct", "dual"):
            raise CrnError(f"unknown encoding {self.kind!r}")
        expected = 1 if self.kind == "direct" else 2
        if len(self.output) != expected:
            raise CrnError(f"{self.kind} CRC needs {expected} output species")
        if self.kind == "dual" and len(self.inputs) % 2:
            raise CrnError("dual-rail inputs must come in (plus, minus) pairs")
        known = set(self.crn.species)
        for s in self.inputs + self.output + tuple(self.initial_context):
            if s not in known:
                raise CrnError(f"species {s} not in CRN")
        if set(self.output) & set(self.inputs):
            raise CrnError("output species may not be an input")

    @property
    def arity(self) -> int:
        return len(self.inputs) if self.kind == "direct" else len(self.inputs) // 2

    def input_state(self, x: Sequence, offsets: Optional[Sequence] = None) -> State:
        """Initial state for input vector ``x`` plus the initial context.

        For dual-rail CRCs ``offsets[i]`` is added to both rails of input i,
        giving a non-canonical split with the same value.
        """
        x = [to_fraction(v) for v in x]
        if len(x) != self.arity:
            raise CrnError(f"expected {self.arity} inputs, got {len(x)}")
        conc: dict[str, Fraction] = {}
        if self.kind == "direct":
            for s, v in zip(self.inputs, x):
                if v < 0:
                    raise CrnError("direct inputs must be nonnegative")
                conc[s] = v
        else:
            offsets = [Fraction(0)] * len(x) if offsets is None else [to_fraction(t) for t in offsets]
            for i, v in enumerate(x):
                conc[self.inputs[2 * i]] = max(v, 0) + offsets[i]
                conc[self.inputs[2 * i + 1]] = max(-v, 0) + offsets[i]
        return State(conc) + self.initial_context

    def output_value(self, state: Mapping) -> Fraction:
        if self.kind == "direct":
            return state[self.output[0]] if self.output[0] in state else Fraction(0)
        return State(state)[self.output[0]] - State(state)[self.output[1]]


# ---------------------------------------------------------------- semantics


def applicable(crn: Crn, state: Mapping, j: int) -> bool:
    if not 0 <= j < crn.n_reactions:
        raise IndexError(f"reaction index {j} out of range")
    return all(state.get(s, 0) > 0 for s, _ in crn.reactions[j].reactants)


def applicable_vec(crn: Crn, vec: Sequence[Fraction], j: int) -> bool:
    return all(vec[crn.index(s)] > 0 for s, _ in crn.reactions[j].reactants)


def apply_flux_vec(crn: Crn, vec: Sequence[Fraction], u: Sequence[Fraction], segment: Optional[int] = None) -> list[Fraction]:
    """Vector form of :func:`apply_flux`; raises on the first violated condition."""
    for j, uj in enumerate(u):
        if uj and not applicable_vec(crn, vec, j):
            raise InapplicableReaction(j, segment)
    out = list(vec)
    for i, row in enumerate(crn.stoich):
        acc = out[i]
        for j, uj in enumerate(u):
            if uj and row[j]:
                acc += row[j] * uj
        if acc < 0:
            raise NegativeResult(crn.species[i], segment)
        out[i] = acc
    return out


def apply_flux(crn: Crn, state: Mapping, u) -> State:
    """Return ``c + M u`` if every fired reaction is applicable and the result is nonnegative."""
    if not isinstance(u, tuple) or len(u) != crn.n_reactions:
        u = crn.flux(u)
    state = State(state)
    vec = state.vector(crn.species)
    out = State.from_vector(crn.species, apply_flux_vec(crn, vec, u))
    extra = {s: v for s, v in state.items() if s not in crn._index}
    return out + extra if extra else out


# ------------------------------------------------------------- text formats

_TERM_RE = re.compile(r"^(\d+)?\s*([A-Za-z_][A-Za-z0-9_.]*[+-]?)$")
_PLUS_SPLIT = re.compile(r"\s+\+\s+")


def _parse_side(text: str, line: Optional[int], source: str) -> list[tuple[str, int]]:
    text = text.strip()
    if not text or text in ("0", "∅"):
        return []
    terms = []
    for raw in _PLUS_SPLIT.split(text):
        m = _TERM_RE.match(raw.strip())
        if not m:
            raise ParseError(f"cannot parse term {raw.strip()!r}", line, source)
        n = int(m.group(1)) if m.group(1) else 1
        if n <= 0:
            raise ParseError(f"coefficient must be positive in {raw.strip()!r}", line, source)
        terms.append((m.group(2), n))
    return terms


def _parse_reaction(text: str, line: Optional[int] = None, source: str = "<text>") -> Reaction:
    if "->" not in text:
        raise ParseError(f"missing '->' in {text.strip()!r}", line, source)
    lhs, rhs = text.split("->", 1)
    reactants = _parse_side(lhs, line, source)
    if not reactants:
        raise ParseError("reaction has an empty reactant side", line, source)
    products = _parse_side(rhs, line, source)
    try:
        return Reaction(tuple(reactants), tuple(products))
    except CrnError as exc:
        raise ParseError(str(exc), line, source) from None


@dataclass
class _CrnDocument:
    crn: Crn
    inputs: tuple[str, ...] = ()
    output: tuple[str, ...] = ()
    context: dict = field(default_factory=dict)
    encoding: Optional[str] = None


def _parse_document(text: str, source: str = "<text>") -> _CrnDocument:
    species: list[str] = []
    reactions: list[Reaction] = []
    doc = {"inputs": (), "output": (), "context": {}, "encoding": None}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        key = head.strip().lower()
        if sep and "->" not in head and key in ("species", "inputs", "output", "context", "encoding"):
            words = rest.split()
            if key == "species":
                for w in words:
                    if w in species:
                        raise ParseError(f"duplicate species {w}", lineno, source)
                    if not _NAME_RE.match(w):
                        raise ParseError(f"invalid species name {w!r}", lineno, source)
                    species.append(w)
            elif key == "context":
                ctx = {}
                for w in words:
                    name, eq, val = w.partition("=")
                    if not eq:
                        raise ParseError(f"context entry {w!r} is not NAME=value", lineno, source)
                    try:
                        q = to_fraction(val)
                    except (ValueError, ZeroDivisionError):
                        raise ParseError(f"bad rational {val!r}", lineno, source) from None
                    if q <= 0:
                        raise ParseError("context values must be positive", lineno, source)
                    ctx[name] = q
                doc["context"] = ctx
            elif key == "encoding":
                doc["encoding"] = rest.strip()
            else:
                doc[key] = tuple(words)
            continue
        reactions.append(_parse_reaction(line, lineno, source))
    header_species = list(doc["inputs"]) + list(doc["output"]) + list(doc["context"])
    for s in header_species:
        if s not in species and not any(s in r.species() for r in reactions):
            species.append(s)
    order = list(species)
    for s in header_species:
        if s not in order:
            order.append(s)
    try:
        crn = Crn(tuple(reactions), tuple(order))
    except CrnError as exc:
        raise ParseError(str(exc), None, source) from None
    return _CrnDocument(crn, doc["inputs"], doc["output"], doc["context"], doc["encoding"])


def parse_crn(text: str, source: str = "<text>") -> Crn:
    """Parse the line-based CRN format; CRC header lines are accepted and ignored."""
    return _parse_document(text, source).crn


def parse_crc(text: str, source: str = "<text>") -> Crc:
    doc = _parse_document(text, source)
    if not doc.output:
        raise ParseError("CRC file needs an 'output:' header", None, source)
    kind = doc.encoding or ("dual" if len(doc.output) == 2 else "direct")
    if kind in ("dual-rail", "dual_rail"):
        kind = "dual"
    try:
        return Crc(doc.crn, doc.inputs, doc.output, kind, State(doc.context))
    except CrnError as exc:
        raise ParseError(str(exc), None, source) from None


def format_fraction(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def serialize_crn(crn: Crn, crc: Optional[Crc] = None) -> str:
    lines = ["species: " + " ".join(crn.species)]
    if crc is not None:
        lines.append("encoding: " + crc.kind)
        lines.append("inputs: " + " ".join(crc.inputs))
        lines.append("output: " + " ".join(crc.output))
        if crc.initial_context:
            ctx = " ".join(f"{s}={format_fraction(v)}" for s, v in crc.initial_context.items())
            lines.append("context: " + ctx)
    lines.extend(str(r) for r in crn.reactions)
    return "\n".join(lines) + "\n"


def serialize_crc(crc: Crc) -> str:
    return serialize_crn(crc.crn, crc)


def parse_state(text: str, source: str = "<text>") -> State:
    conc: dict[str, Fraction] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, eq, val = line.partition("=")
        name = name.strip()
        if not eq or not _NAME_RE.match(name):
            raise ParseError(f"expected 'Species = p/q', got {line!r}", lineno, source)
        if name in conc:
            raise ParseError(f"duplicate species {name}", lineno, source)
        try:
            q = to_fraction(val)
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"bad rational {val.strip()!r}", lineno, source) from None
        if q < 0:
            raise ParseError(f"negative concentration for {name}", lineno, source)
        conc[name] = q
    return State(conc)


def serialize_state(state: Mapping, species: Optional[Sequence[str]] = None) -> str:
    names = list(species) if species is not None else list(state)
    return "".join(f"{s} = {format_fraction(State(state)[s])}\n" for s in names if State(state)[s] or species is not None)
