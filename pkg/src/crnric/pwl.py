"""Exact piecewise rational affine functions.

Two representations are supported: a max of mins of affine components
(``MaxMinForm``), and a list of (component, polyhedral region) pieces
(``RegionalPwl``).  ``regional_to_maxmin`` converts the latter into the former
by enumerating the full-dimensional cells of the arrangement ``g_i = g_j``.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .core import CrnError, ParseError, format_fraction, to_fraction
from .lp import linprog

_ZERO = Fraction(0)

DOMAINS = ("all", "nonnegative", "positive")


class ContinuityViolation(CrnError):
    pass


class CoverageGap(CrnError):
    pass


class NotPositiveContinuous(CrnError):
    pass


@dataclass(frozen=True)
class AffineComponent:
    coeffs: tuple[Fraction, ...]
    offset: Fraction = _ZERO

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(to_fraction(a) for a in self.coeffs))
        object.__setattr__(self, "offset", to_fraction(self.offset))

    @property
    def arity(self) -> int:
        return len(self.coeffs)

    def __call__(self, x: Sequence) -> Fraction:
        if len(x) != len(self.coeffs):
            raise ValueError(f"arity mismatch: expected {len(self.coeffs)}, got {len(x)}")
        return sum((a * to_fraction(v) for a, v in zip(self.coeffs, x)), self.offset)

    def restrict(self, keep: Sequence[int]) -> "AffineComponent":
        return AffineComponent(tuple(self.coeffs[i] for i in keep), self.offset)

    def __str__(self):
        return format_linear(self.coeffs, self.offset)


@dataclass(frozen=True)
class MaxMinForm:
    """``f(x) = max_i min_{j in groups[i]} components[j](x)`` (0-based indices)."""

    components: tuple[AffineComponent, ...]
    groups: tuple[frozenset, ...]
    domain: str = "all"

    def __post_init__(self):
        comps = tuple(self.components)
        groups = tuple(frozenset(g) for g in self.groups)
        if not comps:
            raise ValueError("at least one component is required")
        k = comps[0].arity
        if any(c.arity != k for c in comps):
            raise ValueError("components have different arities")
        if not groups:
            raise ValueError("at least one group is required")
        for g in groups:
            if not g or any(not 0 <= i < len(comps) for i in g):
                raise ValueError(f"bad group {sorted(g)}")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "groups", groups)

    @property
    def arity(self) -> int:
        return self.components[0].arity

    @property
    def is_linear(self) -> bool:
        return all(c.offset == 0 for c in self.components)

    def __call__(self, x: Sequence) -> Fraction:
        return eval_maxmin(self, x)


def eval_maxmin(f: MaxMinForm, x: Sequence) -> Fraction:
    if len(x) != f.arity:
        raise ValueError(f"arity mismatch: expected {f.arity}, got {len(x)}")
    vals = [c(x) for c in f.components]
    return max(min(vals[j] for j in g) for g in f.groups)


OPS = (">=", "<=", ">", "<", "=")


@dataclass(frozen=True)
class Constraint:
    """``coeffs·x + const  op  0``."""

    coeffs: tuple[Fraction, ...]
    const: Fraction
    op: str

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown operator {self.op!r}")
        object.__setattr__(self, "coeffs", tuple(to_fraction(a) for a in self.coeffs))
        object.__setattr__(self, "const", to_fraction(self.const))

    def value(self, x: Sequence) -> Fraction:
        return sum((a * to_fraction(v) for a, v in zip(self.coeffs, x)), self.const)

    def holds(self, x: Sequence) -> bool:
        v = self.value(x)
        return {">=": v >= 0, "<=": v <= 0, ">": v > 0, "<": v < 0, "=": v == 0}[self.op]

    def substitute_zero(self, keep: Sequence[int]) -> "Constraint":
        return Constraint(tuple(self.coeffs[i] for i in keep), self.const, self.op)

    def __str__(self):
        return f"{format_linear(self.coeffs, self.const)} {self.op} 0"


@dataclass(frozen=True)
class Piece:
    component: AffineComponent
    region: tuple[Constraint, ...] = ()

    def contains(self, x: Sequence) -> bool:
        return all(c.holds(x) for c in self.region)


@dataclass(frozen=True)
class RegionalPwl:
    pieces: tuple[Piece, ...]
    domain: str = "all"

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if not self.pieces:
            raise ValueError("at least one piece is required")
        k = self.pieces[0].component.arity
        for p in self.pieces:
            if p.component.arity != k or any(len(c.coeffs) != k for c in p.region):
                raise ValueError("pieces have inconsistent arity")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")

    @property
    def arity(self) -> int:
        return self.pieces[0].component.arity

    def components(self) -> list[AffineComponent]:
        return list(dict.fromkeys(p.component for p in self.pieces))

    def in_domain(self, x: Sequence) -> bool:
        if self.domain == "nonnegative":
            return all(to_fraction(v) >= 0 for v in x)
        if self.domain == "positive":
            return all(to_fraction(v) > 0 for v in x)
        return True

    def __call__(self, x: Sequence) -> Fraction:
        return evaluate(self, x)

    def restrict(self, U: Iterable[int]) -> "RegionalPwl":
        """Restriction to the face where coordinates outside ``U`` are 0 and those in ``U`` are > 0."""
        keep = sorted(U)
        pieces = []
        for p in self.pieces:
            region = tuple(c.substitute_zero(keep) for c in p.region)
            if not keep:
                if all(c.holds(()) for c in region):
                    pieces.append(Piece(p.component.restrict(keep), ()))
                continue
            pieces.append(Piece(p.component.restrict(keep), region))
        if not pieces:
            raise CoverageGap(f"no piece covers the face {[i + 1 for i in keep]}")
        return RegionalPwl(tuple(pieces), "positive" if keep else "all")


def evaluate(f: RegionalPwl, x: Sequence) -> Fraction:
    """Value of a regional function; all containing pieces must agree."""
    x = [to_fraction(v) for v in x]
    if len(x) != f.arity:
        raise ValueError(f"arity mismatch: expected {f.arity}, got {len(x)}")
    if not f.in_domain(x):
        raise ValueError(f"point {x} outside the {f.domain} domain")
    vals = {p.component(x) for p in f.pieces if p.contains(x)}
    if not vals:
        raise CoverageGap(f"no region contains {[format_fraction(v) for v in x]}")
    if len(vals) > 1:
        raise ContinuityViolation(f"pieces disagree at {[format_fraction(v) for v in x]}")
    return vals.pop()


# ------------------------------------------------------- max-min conversion


def _domain_rows(domain: str, k: int) -> list[list[Fraction]]:
    """Rows r (length k+1, last = constant) meaning r·x + const > 0 strictly."""
    if domain in ("nonnegative", "positive"):
        return [[Fraction(int(i == j)) for j in range(k)] + [_ZERO] for i in range(k)]
    return []


def _strict_point(k: int, strict_rows: list[list[Fraction]]) -> Optional[tuple[Fraction, ...]]:
    """A point with every row strictly positive, by maximizing a common slack capped at 1."""
    if not strict_rows:
        return tuple([_ZERO] * k)
    A_ub, b_ub = [], []
    for r in strict_rows:
        # -(a·x) + t <= const
        A_ub.append([-a for a in r[:k]] + [1])
        b_ub.append(r[k])
    A_ub.append([0] * k + [1])
    b_ub.append(1)
    res = linprog([0] * k + [1], A_ub, b_ub, free=range(k))
    if not res.ok or res.x[k] <= 0:
        return None
    return res.x[:k]


def arrangement_cells(components: Sequence[AffineComponent], domain: str = "all", max_cells: int = 20000) -> list[tuple[Fraction, ...]]:
    """One interior point per full-dimensional cell of ``{g_i = g_j}`` within the domain."""
    k = components[0].arity
    hyper: list[list[Fraction]] = []
    seen = set()
    for a, b in itertools.combinations(components, 2):
        row = [x - y for x, y in zip(a.coeffs, b.coeffs)] + [a.offset - b.offset]
        if not any(row[:k]):
            continue
        lead = next(v for v in row if v)
        key = tuple(v / abs(lead) for v in row)
        neg = tuple(-v for v in key)
        if key in seen or neg in seen:
            continue
        seen.add(key)
        hyper.append(row)
    base = _domain_rows(domain, k)
    start = _strict_point(k, base)
    if start is None:
        return []
    cells = [([], start)]
    for h in hyper:
        nxt = []
        for signs, pt in cells:
            v = sum((a * x for a, x in zip(h[:k], pt)), h[k])
            sides = []
            if v > 0:
                nxt.append((signs + [h], pt))
                sides = [-1]
            elif v < 0:
                nxt.append((signs + [[-a for a in h]], pt))
                sides = [1]
            else:
                sides = [1, -1]
            for s in sides:
                row = [s * a for a in h]
                rows = base + signs + [row]
                p = _strict_point(k, rows)
                if p is not None:
                    nxt.append((signs + [row], p))
        cells = nxt
        if len(cells) > max_cells:
            raise ValueError(f"arrangement has more than {max_cells} cells")
    return [pt for _, pt in cells]


def regional_to_maxmin(f: RegionalPwl) -> MaxMinForm:
    comps = f.components()
    points = arrangement_cells(comps, f.domain)
    groups: list[frozenset] = []
    for b in points:
        fb = evaluate(f, b)
        S = frozenset(i for i, g in enumerate(comps) if g(b) >= fb)
        if S not in groups:
            groups.append(S)
    groups = [g for g in groups if not any(o < g for o in groups)]
    if not groups:
        raise CoverageGap("domain is empty")
    form = MaxMinForm(tuple(comps), tuple(groups), f.domain)
    for b in points:
        if eval_maxmin(form, b) != evaluate(f, b):
            raise ContinuityViolation(f"function is not continuous near {[format_fraction(v) for v in b]}")
    return _prune(form)


def _prune(form: MaxMinForm) -> MaxMinForm:
    used = sorted(set().union(*form.groups))
    remap = {old: new for new, old in enumerate(used)}
    return MaxMinForm(
        tuple(form.components[i] for i in used),
        tuple(frozenset(remap[i] for i in g) for g in form.groups),
        form.domain,
    )


def maxmin_to_regional(form: MaxMinForm) -> RegionalPwl:
    """Regional view of a max-min form: one piece per full-dimensional cell, closed."""
    return _regional_via_cells(form, form.arity)


def _regional_via_cells(form: MaxMinForm, k: int) -> RegionalPwl:
    comps = form.components
    pieces = []
    for pt in arrangement_cells(comps, form.domain):
        val = eval_maxmin(form, pt)
        active = next(i for i, c in enumerate(comps) if c(pt) == val)
        region = []
        for a, b in itertools.combinations(range(len(comps)), 2):
            d = [x - y for x, y in zip(comps[a].coeffs, comps[b].coeffs)]
            off = comps[a].offset - comps[b].offset
            if not any(d):
                continue
            s = sum((x * y for x, y in zip(d, pt)), off)
            region.append(Constraint(tuple(d), off, ">=" if s > 0 else "<="))
        pieces.append(Piece(comps[active], tuple(region)))
    if form.domain != "all":
        op = ">=" if form.domain == "nonnegative" else ">"
        pieces = [Piece(p.component, p.region + tuple(Constraint(tuple(Fraction(int(i == j)) for j in range(k)), 0, op) for i in range(k))) for p in pieces]
    return RegionalPwl(tuple(pieces), form.domain)


# ------------------------------------------------------------ continuity


def _random_rational(rng: random.Random, lo: int = 0, hi: int = 10, den: int = 97) -> Fraction:
    return Fraction(rng.randint(lo * den, hi * den), den)


def _face_sample_points(g: RegionalPwl, rng: random.Random, n: int) -> list[list[Fraction]]:
    k = g.arity
    pts = [[_random_rational(rng, 0, 10) + Fraction(1, 1000) for _ in range(k)] for _ in range(n)]
    # points on region boundaries inside the open orthant
    for p in g.pieces:
        for c in p.region:
            nz = [i for i, a in enumerate(c.coeffs) if a]
            if not nz:
                continue
            for _ in range(max(1, n // 10)):
                x = [_random_rational(rng, 0, 10) + Fraction(1, 1000) for _ in range(k)]
                i = rng.choice(nz)
                rest = sum((a * v for jj, (a, v) in enumerate(zip(c.coeffs, x)) if jj != i), c.const)
                x[i] = -rest / c.coeffs[i]
                if x[i] > 0:
                    pts.append(x)
    return pts


def _limit_along(g: RegionalPwl, b: list[Fraction], v: list[Fraction]) -> Optional[Fraction]:
    """Limit of g(b + t v) as t -> 0+, read off the piece active for tiny t."""
    t = Fraction(1, 2**40)
    y = [bi + t * vi for bi, vi in zip(b, v)]
    if not all(yi > 0 for yi in y):
        return None
    comps = {p.component for p in g.pieces if p.contains(y)}
    if not comps:
        raise CoverageGap(f"no region contains {y}")
    vals = {c(b) for c in comps}
    if len(vals) > 1:
        raise ContinuityViolation("pieces disagree near a sample point")
    return vals.pop()


def check_positive_continuous(f: Union[RegionalPwl, MaxMinForm], samples: int = 60, seed: int = 0) -> bool:
    """Sampled check that ``f`` is continuous on every face D_U of the nonnegative orthant."""
    if isinstance(f, MaxMinForm):
        return True
    rng = random.Random(seed)
    k = f.arity
    for size in range(1, k + 1):
        for U in itertools.combinations(range(k), size):
            g = f.restrict(U)
            for b in _face_sample_points(g, rng, samples):
                try:
                    fb = evaluate(g, b)
                except (CoverageGap, ContinuityViolation):
                    return False
                dirs = [[Fraction(rng.randint(-5, 5)) for _ in range(size)] for _ in range(4)]
                for c in (c for p in g.pieces for c in p.region):
                    if any(c.coeffs):
                        dirs.append(list(c.coeffs))
                        dirs.append([-a for a in c.coeffs])
                for v in dirs:
                    try:
                        lim = _limit_along(g, b, v)
                    except (CoverageGap, ContinuityViolation):
                        return False
                    if lim is not None and lim != fb:
                        return False
    return True


# --------------------------------------------------------------- dual rail


@dataclass(frozen=True)
class DualRailValue:
    plus: Fraction
    minus: Fraction

    def __post_init__(self):
        object.__setattr__(self, "plus", to_fraction(self.plus))
        object.__setattr__(self, "minus", to_fraction(self.minus))
        if self.plus < 0 or self.minus < 0:
            raise ValueError("rails must be nonnegative")

    @property
    def value(self) -> Fraction:
        return self.plus - self.minus


def dualrail_encode(x: Union[Sequence, Fraction, int]):
    if isinstance(x, (int, Fraction, str)):
        q = to_fraction(x)
        return DualRailValue(max(q, _ZERO), max(-q, _ZERO))
    return [dualrail_encode(v) for v in x]


def dualrail_decode(v) -> Union[Fraction, list]:
    if isinstance(v, DualRailValue):
        return v.value
    if isinstance(v, tuple) and len(v) == 2 and not isinstance(v[0], (tuple, DualRailValue)):
        return to_fraction(v[0]) - to_fraction(v[1])
    return [dualrail_decode(w) for w in v]


# -------------------------------------------------------------- text format


def format_linear(coeffs: Sequence[Fraction], offset: Fraction = _ZERO) -> str:
    parts = []
    for i, a in enumerate(coeffs, start=1):
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {format_fraction(abs(a))} x{i}")
    if offset or not parts:
        sign = "-" if offset < 0 else "+"
        parts.append(f"{sign} {format_fraction(abs(offset))}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]


_TERM = re.compile(r"\s*([+-])?\s*(\d+(?:/\d+)?)?\s*\*?\s*(?:x(\d+))?\s*")


def parse_linear(text: str, arity: int, line: Optional[int] = None, source: str = "<text>") -> tuple[list[Fraction], Fraction]:
    coeffs = [_ZERO] * arity
    const = _ZERO
    pos = 0
    text = text.strip()
    if not text:
        raise ParseError("empty expression", line, source)
    first = True
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos or (m.group(2) is None and m.group(3) is None):
            raise ParseError(f"cannot parse expression {text!r}", line, source)
        if not first and m.group(1) is None:
            raise ParseError(f"missing operator in {text!r}", line, source)
        first = False
        sign = -1 if m.group(1) == "-" else 1
        num = Fraction(m.group(2)) if m.group(2) else Fraction(1)
        if m.group(3):
            i = int(m.group(3))
            if not 1 <= i <= arity:
                raise ParseError(f"variable x{i} outside arity {arity}", line, source)
            coeffs[i - 1] += sign * num
        else:
            const += sign * num
        pos = m.end()
    return coeffs, const


@dataclass
class PwlSpec:
    """Parsed function file: either a regional function or a max-min form."""

    arity: int
    components: dict = field(default_factory=dict)
    regional: Optional[RegionalPwl] = None
    maxmin: Optional[MaxMinForm] = None
    domain: str = "all"

    def as_maxmin(self) -> MaxMinForm:
        return self.maxmin if self.maxmin is not None else regional_to_maxmin(self.regional)

    def function(self) -> Union[RegionalPwl, MaxMinForm]:
        return self.regional if self.regional is not None else self.maxmin

    def __call__(self, x):
        f = self.function()
        return evaluate(f, x) if isinstance(f, RegionalPwl) else eval_maxmin(f, x)


def parse_pwl(text: str, source: str = "<text>") -> PwlSpec:
    arity = None
    domain = "all"
    comps: dict[str, AffineComponent] = {}
    order: list[str] = []
    regions: list[tuple[str, tuple[Constraint, ...]]] = []
    groups = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":") if not line.startswith("component") else ("component", ":", line[len("component"):])
        head = head.strip()
        if head == "arity":
            try:
                arity = int(rest.strip())
            except ValueError:
                raise ParseError("arity must be an integer", lineno, source) from None
            if arity < 1:
                raise ParseError("arity must be positive", lineno, source)
            continue
        if head == "domain":
            domain = rest.strip()
            if domain not in DOMAINS:
                raise ParseError(f"domain must be one of {', '.join(DOMAINS)}", lineno, source)
            continue
        if arity is None:
            raise ParseError("'arity:' must come first", lineno, source)
        if head == "component":
            name, eq, expr = rest.partition("=")
            name = name.strip()
            if not eq or not re.fullmatch(r"[A-Za-z_]\w*", name):
                raise ParseError("expected 'component <name> = <expr>'", lineno, source)
            if name in comps:
                raise ParseError(f"duplicate component {name}", lineno, source)
            a, b = parse_linear(expr, arity, lineno, source)
            comps[name] = AffineComponent(tuple(a), b)
            order.append(name)
        elif head.startswith("region"):
            name = head[len("region"):].strip()
            if name not in comps:
                raise ParseError(f"unknown component {name!r}", lineno, source)
            cons = []
            for part in rest.split(","):
                part = part.strip()
                if not part:
                    continue
                op = next((o for o in OPS if o in part), None)
                if op is None:
                    raise ParseError(f"no comparison in {part!r}", lineno, source)
                lhs, rhs = part.split(op, 1)
                la, lb = parse_linear(lhs, arity, lineno, source)
                ra, rb = parse_linear(rhs, arity, lineno, source)
                cons.append(Constraint(tuple(x - y for x, y in zip(la, ra)), lb - rb, op))
            regions.append((name, tuple(cons)))
        elif head == "maxmin":
            groups = []
            for m in re.finditer(r"\{([^}]*)\}", rest):
                try:
                    idx = [int(v) - 1 for v in m.group(1).replace(",", " ").split()]
                except ValueError:
                    raise ParseError("group members must be component numbers", lineno, source) from None
                if not idx or any(not 0 <= i < len(order) for i in idx):
                    raise ParseError(f"bad group {{{m.group(1)}}}", lineno, source)
                groups.append(frozenset(idx))
            if not groups:
                raise ParseError("maxmin needs at least one {...} group", lineno, source)
        else:
            raise ParseError(f"unknown line {line!r}", lineno, source)
    if arity is None:
        raise ParseError("missing 'arity:'", None, source)
    if not comps:
        raise ParseError("no components", None, source)
    spec = PwlSpec(arity, comps, domain=domain)
    if regions and groups is not None:
        raise ParseError("give either regions or a maxmin line, not both", None, source)
    if regions:
        spec.regional = RegionalPwl(tuple(Piece(comps[n], c) for n, c in regions), domain)
    elif groups is not None:
        spec.maxmin = MaxMinForm(tuple(comps[n] for n in order), tuple(groups), domain)
    elif len(comps) == 1:
        spec.maxmin = MaxMinForm((comps[order[0]],), (frozenset([0]),), domain)
    else:
        raise ParseError("several components but no regions or maxmin line", None, source)
    return spec


def serialize_maxmin(form: MaxMinForm) -> str:
    lines = [f"arity: {form.arity}"]
    if form.domain != "all":
        lines.append(f"domain: {form.domain}")
    for i, c in enumerate(form.components, start=1):
        lines.append(f"component g{i} = {c}")
    lines.append("maxmin: " + " ".join("{" + ",".join(str(i + 1) for i in sorted(g)) + "}" for g in form.groups))
    return "\n".join(lines) + "\n"


def serialize_regional(f: RegionalPwl) -> str:
    comps = f.components()
    names = {c: f"g{i}" for i, c in enumerate(comps, start=1)}
    lines = [f"arity: {f.arity}"]
    if f.domain != "all":
        lines.append(f"domain: {f.domain}")
    for c in comps:
        lines.append(f"component {names[c]} = {c}")
    for p in f.pieces:
        cons = ", ".join(f"{format_linear(c.coeffs, c.const)} {c.op} 0" for c in p.region) or "0 = 0"
        lines.append(f"region {names[p.component]}: {cons}")
    return "\n".join(lines) + "\n"
