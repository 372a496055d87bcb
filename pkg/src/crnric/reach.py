"""Segment reachability: paths, the producible fixpoint, exact decision with witnesses.

A path is an initial state plus a finite list of flux vectors.  Each segment
is one straight line ``x -> x + M u`` that may only fire reactions applicable
at its start and must land in the nonnegative orthant.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .core import (
    CrnError,
    Crn,
    InapplicableReaction,
    NegativeResult,
    ParseError,
    State,
    apply_flux,
    apply_flux_vec,
    format_fraction,
    to_fraction,
)
from .lp import linprog

_ZERO = Fraction(0)


class SignInfeasible(CrnError):
    """No rational path with the requested sign pattern lies within tolerance."""


@dataclass(frozen=True)
class Path:
    x0: State
    segments: tuple[tuple[Fraction, ...], ...] = ()

    def __post_init__(self):
        if not isinstance(self.x0, State):
            object.__setattr__(self, "x0", State(self.x0))
        object.__setattr__(self, "segments", tuple(tuple(to_fraction(v) for v in seg) for seg in self.segments))

    def __len__(self) -> int:
        return len(self.segments)

    def total_flux(self, n_reactions: int) -> tuple[Fraction, ...]:
        tot = [_ZERO] * n_reactions
        for seg in self.segments:
            for j, v in enumerate(seg):
                tot[j] += v
        return tuple(tot)

    def then(self, other: "Path") -> "Path":
        return Path(self.x0, self.segments + other.segments)

    def scaled(self, lam) -> "Path":
        lam = to_fraction(lam)
        return Path(self.x0.scale(lam), tuple(tuple(v * lam for v in seg) for seg in self.segments))

    def shifted(self, extra: Mapping) -> "Path":
        return Path(self.x0 + extra, self.segments)


@dataclass(frozen=True)
class ReachVerdict:
    reachable: bool
    witness: Optional[Path] = None

    def __bool__(self) -> bool:
        return self.reachable


def path_states(crn: Crn, p: Path) -> list[State]:
    """All states x_0 .. x_L along a path, raising on the first invalid segment."""
    states = [p.x0]
    cur = p.x0
    for i, seg in enumerate(p.segments):
        if len(seg) != crn.n_reactions:
            raise CrnError(f"segment {i + 1} has {len(seg)} entries for {crn.n_reactions} reactions")
        try:
            cur = apply_flux(crn, cur, seg)
        except InapplicableReaction as exc:
            raise InapplicableReaction(exc.index, i) from None
        except NegativeResult as exc:
            raise NegativeResult(exc.species, i) from None
        states.append(cur)
    return states


def verify_path(crn: Crn, p: Path) -> State:
    return path_states(crn, p)[-1]


# ------------------------------------------------------------------ fixpoint


def _vec(crn: Crn, state: Mapping) -> list[Fraction]:
    return [to_fraction(state.get(s, 0)) for s in crn.species]


def _enabled(crn: Crn, present: set, j: int) -> bool:
    return all(crn.index(s) in present for s, _ in crn.reactions[j].reactants)


def fixpoint(crn: Crn, present: Iterable[int], allowed: Optional[Iterable[int]] = None) -> tuple[frozenset, frozenset]:
    """Producible species indices and enabled reactions, using only ``allowed``."""
    present = set(present)
    todo = set(range(crn.n_reactions) if allowed is None else allowed)
    fired: set[int] = set()
    changed = True
    while changed:
        changed = False
        for j in sorted(todo - fired):
            if _enabled(crn, present, j):
                fired.add(j)
                for s, _ in crn.reactions[j].products:
                    present.add(crn.index(s))
                changed = True
    return frozenset(present), frozenset(fired)


def self_firable_core(crn: Crn, c: Mapping, reactions: Iterable[int]) -> frozenset:
    """Greatest subset T of ``reactions`` whose own fixpoint from ``c`` enables all of T."""
    start = [i for i, v in enumerate(_vec(crn, c)) if v > 0]
    T = frozenset(reactions)
    while True:
        _, fired = fixpoint(crn, start, T)
        if fired == T:
            return T
        T = fired


def _ramp(crn: Crn, vec: list[Fraction], allowed: Iterable[int], stop_when_enabled: bool) -> list[tuple[Fraction, ...]]:
    """Stage-by-stage ramp; each stage fires the newly enabled reactions with a small flux."""
    allowed = set(allowed)
    cur = list(vec)
    fired: set[int] = set()
    segments = []
    while True:
        present = {i for i, v in enumerate(cur) if v > 0}
        new = sorted(j for j in allowed - fired if _enabled(crn, present, j))
        if not new:
            break
        if stop_when_enabled and fired | set(new) == allowed:
            break
        minpos = min(v for v in cur if v > 0)
        maxcons = max((-crn.stoich[i][j] for i in range(crn.n_species) for j in new if crn.stoich[i][j] < 0), default=0)
        eps = minpos / (2 * (maxcons or 1) * len(new))
        seg = [_ZERO] * crn.n_reactions
        for j in new:
            seg[j] = eps
        cur = apply_flux_vec(crn, cur, seg)
        segments.append(tuple(seg))
        fired.update(new)
    return segments


def producible(crn: Crn, c: Mapping) -> tuple[frozenset, Path]:
    """Species present in some state reachable from ``c``, with a ramp path exhibiting them."""
    c = State(c)
    vec = _vec(crn, c)
    start = [i for i, v in enumerate(vec) if v > 0]
    P, _ = fixpoint(crn, start)
    ramp = _ramp(crn, vec, range(crn.n_reactions), stop_when_enabled=False)
    names = frozenset(crn.species[i] for i in P) | frozenset(s for s in c if s not in crn.species)
    return names, Path(c, tuple(ramp))


# ---------------------------------------------------------- straight lines


def _slack_lp(crn: Crn, delta: Sequence[Fraction], cols: Sequence[int], positive: Sequence[int]):
    """max t s.t. M_cols u = delta, u >= 0, u_j >= t for j in positive, t <= 1."""
    n = len(cols)
    A_eq = [[crn.stoich[i][j] for j in cols] + [0] for i in range(crn.n_species)]
    A_ub = []
    b_ub = []
    pos = {j: k for k, j in enumerate(cols)}
    for j in positive:
        row = [0] * (n + 1)
        row[pos[j]] = -1
        row[n] = 1
        A_ub.append(row)
        b_ub.append(0)
    cap = [0] * n + [1]
    A_ub.append(cap)
    b_ub.append(1)
    res = linprog([0] * n + [1], A_ub, b_ub, A_eq, list(delta))
    if not res.ok:
        return None
    u = [_ZERO] * crn.n_reactions
    for k, j in enumerate(cols):
        u[j] = res.x[k]
    return res.x[n], tuple(u)


def _delta(crn: Crn, c: Mapping, d: Mapping) -> Optional[list[Fraction]]:
    c, d = State(c), State(d)
    for s in set(c) | set(d):
        if s not in crn.species and c[s] != d[s]:
            return None
    return [d[s] - c[s] for s in crn.species]


def straight_line_feasible(
    crn: Crn,
    c: Mapping,
    d: Mapping,
    allowed: Optional[Iterable[int]] = None,
    require_positive: Iterable[int] = (),
    check_applicability: bool = True,
) -> Optional[tuple[Fraction, ...]]:
    """Flux u >= 0 with c + M u = d, supp(u) in ``allowed`` and u_j > 0 on ``require_positive``."""
    allowed = sorted(set(range(crn.n_reactions) if allowed is None else allowed))
    positive = sorted(set(require_positive))
    if not set(positive) <= set(allowed):
        raise ValueError("require_positive must be a subset of allowed")
    if check_applicability:
        cs = State(c)
        vec = _vec(crn, cs)
        present = {i for i, v in enumerate(vec) if v > 0}
        allowed = [j for j in allowed if _enabled(crn, present, j)]
        if not set(positive) <= set(allowed):
            return None
    delta = _delta(crn, c, d)
    if delta is None:
        return None
    out = _slack_lp(crn, delta, allowed, positive)
    if out is None:
        return None
    t, u = out
    if positive and t <= 0:
        return None
    return u


def maximal_support(crn: Crn, c: Mapping, d: Mapping, allowed: Iterable[int]) -> Optional[tuple[frozenset, tuple[Fraction, ...]]]:
    """Largest support of a flux u >= 0 with c + M u = d inside ``allowed``, plus a flux attaining it."""
    cols = sorted(set(allowed))
    delta = _delta(crn, c, d)
    if delta is None:
        return None
    first = _slack_lp(crn, delta, cols, [])
    if first is None:
        return None
    sols = [first[1]]
    covered = {j for j in cols if first[1][j] > 0}
    for j in cols:
        if j in covered:
            continue
        t, u = _slack_lp(crn, delta, cols, [j])
        if t > 0:
            sols.append(u)
            covered.update(k for k in cols if u[k] > 0)
    n = len(sols)
    avg = tuple(sum((u[j] for u in sols), _ZERO) / n for j in range(crn.n_reactions))
    return frozenset(covered), avg


# ---------------------------------------------------------------- decision


def witness_path(crn: Crn, c: Mapping, u: Sequence[Fraction]) -> Path:
    """Ramp-then-straight-line path from ``c`` along total flux ``u``.

    ``supp(u)`` must be self-firable from ``c``.  The ramp stops as soon as
    every reaction in the support is enabled, and is scaled so the residual
    flux stays strictly positive on the support.
    """
    c = State(c)
    T = {j for j, v in enumerate(u) if v > 0}
    if not T:
        return Path(c, ())
    vec = _vec(crn, c)
    ramp = _ramp(crn, vec, T, stop_when_enabled=True)
    sigma = [sum((seg[j] for seg in ramp), _ZERO) for j in range(crn.n_reactions)]
    lam = Fraction(1)
    for j in T:
        if sigma[j] > 0:
            lam = min(lam, u[j] / (2 * sigma[j]))
    segs = [tuple(v * lam for v in seg) for seg in ramp]
    segs.append(tuple(u[j] - lam * sigma[j] for j in range(crn.n_reactions)))
    return Path(c, tuple(segs))


def _initial_support(crn: Crn, c: Mapping) -> frozenset:
    start = [i for i, v in enumerate(_vec(crn, c)) if v > 0]
    return fixpoint(crn, start)[1]


def decide_reachable(crn: Crn, c: Mapping, d: Mapping) -> ReachVerdict:
    """Exact decision of ``c => d`` by support refinement, with a verified witness."""
    c, d = State(c), State(d)
    if _delta(crn, c, d) is None:
        return ReachVerdict(False)
    T = _initial_support(crn, c)
    while True:
        found = maximal_support(crn, c, d, T)
        if found is None:
            return ReachVerdict(False)
        S, u = found
        core = self_firable_core(crn, c, S)
        if core == T:
            break
        T = core
    return _verdict(crn, c, d, u)


def _verdict(crn: Crn, c: State, d: State, u: Sequence[Fraction]) -> ReachVerdict:
    p = witness_path(crn, c, u)
    end = verify_path(crn, p)
    if end != d:
        raise AssertionError("witness does not end at the target")
    return ReachVerdict(True, p)


def decide_reachable_bruteforce(crn: Crn, c: Mapping, d: Mapping) -> ReachVerdict:
    """Oracle: try every reaction subset as the exact support."""
    c, d = State(c), State(d)
    if _delta(crn, c, d) is None:
        return ReachVerdict(False)
    R = range(crn.n_reactions)
    for size in range(crn.n_reactions + 1):
        for T in itertools.combinations(R, size):
            if self_firable_core(crn, c, T) != frozenset(T):
                continue
            u = straight_line_feasible(crn, c, d, T, T, check_applicability=False)
            if u is not None:
                return _verdict(crn, c, d, u)
    return ReachVerdict(False)


def compress_path(crn: Crn, p: Path) -> Path:
    """Equivalent path with at most min(|R|, |Λ|) + 1 segments."""
    verify_path(crn, p)
    return witness_path(crn, p.x0, p.total_flux(crn.n_reactions))


def segment_bound(crn: Crn) -> int:
    return min(crn.n_reactions, crn.n_species) + 1


# ----------------------------------------------------------- rationalizing


@dataclass(frozen=True)
class ApproxPath:
    """Float (or mixed float/Fraction) prepath; Fraction entries are taken as exact."""

    x0: Mapping
    segments: tuple = ()


def _rref(rows: list[list[Fraction]], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    rows = [list(r) for r in rows]
    pivots = []
    r = 0
    for col in range(ncols):
        pr = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if pr is None:
            continue
        rows[r], rows[pr] = rows[pr], rows[r]
        inv = 1 / rows[r][col]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def _is_exact(v) -> bool:
    return isinstance(v, (Fraction, int)) and not isinstance(v, bool)


def rationalize_path(crn: Crn, approx, tolerance: float = 1e-6, slack: Optional[float] = None) -> Path:
    """Exact path with the sign pattern of ``approx``, within ``tolerance`` in max norm.

    A float coordinate is declared zero when its magnitude is at most
    ``slack`` (default: ``tolerance``).  Exact entries are kept as given.
    """
    if isinstance(approx, Path):
        verify_path(crn, approx)
        return approx
    slack = tolerance if slack is None else slack
    species = list(crn.species)
    extra = {s: v for s, v in approx.x0.items() if s not in crn.species}
    nS, nR, L = len(species), crn.n_reactions, len(approx.segments)

    # flat coordinates: x0 then u_1..u_L
    approx_vals = [approx.x0.get(s, 0) for s in species]
    for seg in approx.segments:
        if len(seg) != nR:
            raise CrnError("segment length does not match reaction count")
        approx_vals.extend(seg)
    fixed: dict[int, Fraction] = {}
    var_idx: dict[int, int] = {}
    for k, v in enumerate(approx_vals):
        if _is_exact(v):
            fixed[k] = Fraction(v)
        elif abs(v) <= slack:
            fixed[k] = _ZERO
        else:
            var_idx[k] = len(var_idx)
    if not var_idx and all(_is_exact(v) for v in extra.values()):
        p = Path(State({**{s: fixed[i] for i, s in enumerate(species)}, **extra}), tuple(tuple(fixed[nS + i * nR + j] for j in range(nR)) for i in range(L)))
        verify_path(crn, p)
        return p

    # state coordinate x_i(s) as affine expression over flat coordinates
    def state_expr(i: int, s: int) -> dict[int, int]:
        expr = {s: 1}
        for k in range(i):
            for j in range(nR):
                m = crn.stoich[s][j]
                if m:
                    expr[nS + k * nR + j] = expr.get(nS + k * nR + j, 0) + m
        return expr

    def approx_state(i: int, s: int) -> float:
        return float(sum(float(approx_vals[k]) * m for k, m in state_expr(i, s).items()))

    eqs = []
    positive_states = []
    for i in range(1, L + 1):
        for s in range(nS):
            a = approx_state(i, s)
            expr = state_expr(i, s)
            if abs(a) <= slack:
                eqs.append(expr)
            else:
                positive_states.append((i, s, expr, a))
    nv = len(var_idx)
    rows = []
    for expr in eqs:
        row = [_ZERO] * (nv + 1)
        const = _ZERO
        for k, m in expr.items():
            if k in var_idx:
                row[var_idx[k]] += m
            else:
                const += m * fixed[k]
        row[nv] = -const
        rows.append(row)
    red, pivots = _rref(rows, nv)
    for row in red[len(pivots):]:
        if row[nv] != 0:
            raise SignInfeasible("zero pattern is inconsistent with the stoichiometry")
    free_cols = [col for col in range(nv) if col not in pivots]
    inv_var = {v: k for k, v in var_idx.items()}

    def attempt(rounder) -> Optional[Path]:
        vals = dict(fixed)
        z = {col: rounder(float(approx_vals[inv_var[col]])) for col in free_cols}
        for col, v in z.items():
            vals[inv_var[col]] = v
        for r, col in enumerate(pivots):
            v = red[r][nv] - sum((red[r][fc] * z[fc] for fc in free_cols if red[r][fc]), _ZERO)
            vals[inv_var[col]] = v
        for k in var_idx:
            if vals[k] <= 0 or abs(float(vals[k]) - float(approx_vals[k])) > tolerance:
                return None
        for i, s, expr, a in positive_states:
            v = sum((m * vals[k] for k, m in expr.items()), _ZERO)
            if v <= 0 or abs(float(v) - a) > tolerance:
                return None
        x0 = State({**{s: vals[i] for i, s in enumerate(species)}, **{s: Fraction(v) for s, v in extra.items()}})
        segs = tuple(tuple(vals[nS + i * nR + j] for j in range(nR)) for i in range(L))
        p = Path(x0, segs)
        try:
            verify_path(crn, p)
        except CrnError:
            return None
        return p

    for digits in range(1, 16):
        D = 10**digits
        p = attempt(lambda v, D=D: Fraction(v).limit_denominator(D))
        if p is not None:
            return p
    p = attempt(lambda v: Fraction(v))
    if p is not None:
        return p
    raise SignInfeasible("no rational path with the declared sign pattern within tolerance")


# ------------------------------------------------------------- file format


def serialize_path(crn: Crn, p: Path) -> str:
    lines = ["initial:"]
    for s, v in p.x0.items():
        lines.append(f"{s} = {format_fraction(v)}")
    for seg in p.segments:
        lines.append("segment:")
        for j, v in enumerate(seg):
            if v:
                lines.append(f"reaction {j + 1} = {format_fraction(v)}")
    return "\n".join(lines) + "\n"


def parse_path(crn: Crn, text: str, source: str = "<text>") -> Path:
    x0: dict[str, Fraction] = {}
    segments: list[list[Fraction]] = []
    block = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low == "initial:":
            if block is not None:
                raise ParseError("'initial:' must come first", lineno, source)
            block = "initial"
            continue
        if low == "segment:":
            if block is None:
                raise ParseError("missing 'initial:' block", lineno, source)
            block = "segment"
            segments.append([_ZERO] * crn.n_reactions)
            continue
        name, eq, val = line.partition("=")
        if not eq or block is None:
            raise ParseError(f"unexpected line {line!r}", lineno, source)
        try:
            q = to_fraction(val)
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"bad rational {val.strip()!r}", lineno, source) from None
        if q < 0:
            raise ParseError("negative value", lineno, source)
        if block == "initial":
            x0[name.strip()] = q
        else:
            parts = name.split()
            if len(parts) != 2 or parts[0] != "reaction" or not parts[1].isdigit():
                raise ParseError(f"expected 'reaction <j> = p/q', got {line!r}", lineno, source)
            j = int(parts[1]) - 1
            if not 0 <= j < crn.n_reactions:
                raise ParseError(f"reaction {j + 1} out of range", lineno, source)
            segments[-1][j] = q
    if block is None:
        raise ParseError("missing 'initial:' block", None, source)
    return Path(State(x0), tuple(tuple(s) for s in segments))


__all__ = [
    "ApproxPath",
    "Path",
    "ReachVerdict",
    "SignInfeasible",
    "compress_path",
    "decide_reachable",
    "decide_reachable_bruteforce",
    "fixpoint",
    "maximal_support",
    "parse_path",
    "path_states",
    "producible",
    "rationalize_path",
    "segment_bound",
    "self_firable_core",
    "serialize_path",
    "straight_line_feasible",
    "verify_path",
    "witness_path",
]
