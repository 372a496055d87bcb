"""Exact rational linear programming.

Dense two-phase simplex over :class:`fractions.Fraction` with Bland's rule,
so it always terminates and never rounds.  Problem sizes here are tiny
(tens of variables), which is what makes dense Fraction tableaux viable.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_ZERO = Fraction(0)


@dataclass(frozen=True)
class LPResult:
    status: str
    x: Optional[tuple[Fraction, ...]] = None
    value: Optional[Fraction] = None

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _pivot(rows: list[list[Fraction]], obj: list[Fraction], r: int, j: int) -> None:
    prow = rows[r]
    inv = 1 / prow[j]
    if inv != 1:
        prow[:] = [v * inv for v in prow]
    nz = [(k, v) for k, v in enumerate(prow) if v]
    for i, row in enumerate(rows):
        if i != r:
            f = row[j]
            if f:
                for k, v in nz:
                    row[k] -= f * v
    f = obj[j]
    if f:
        for k, v in nz:
            obj[k] -= f * v


def _simplex(rows, obj, basis, allowed: int) -> str:
    """Maximize; ``obj`` holds reduced costs.  Only columns < ``allowed`` may enter."""
    while True:
        enter = next((j for j in range(allowed) if obj[j] > 0), None)
        if enter is None:
            return OPTIMAL
        best = None
        for i, row in enumerate(rows):
            a = row[enter]
            if a > 0:
                ratio = row[-1] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            return UNBOUNDED
        r = best[1]
        _pivot(rows, obj, r, enter)
        basis[r] = enter


def linprog(
    c: Sequence,
    A_ub: Sequence[Sequence] = (),
    b_ub: Sequence = (),
    A_eq: Sequence[Sequence] = (),
    b_eq: Sequence = (),
    free: Iterable[int] = (),
) -> LPResult:
    """Maximize ``c·x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``.

    Variables are nonnegative except those listed in ``free``.
    """
    n = len(c)
    free = set(free)
    split: list[tuple[int, Optional[int]]] = []
    nx = 0
    for i in range(n):
        if i in free:
            split.append((nx, nx + 1))
            nx += 2
        else:
            split.append((nx, None))
            nx += 1

    def expand(a) -> list[Fraction]:
        out = [_ZERO] * nx
        for i, v in enumerate(a):
            if v:
                v = Fraction(v)
                p, q = split[i]
                out[p] = v
                if q is not None:
                    out[q] = -v
        return out

    m_ub, m_eq = len(A_ub), len(A_eq)
    m = m_ub + m_eq
    n_slack = m_ub
    body: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for r in range(m_ub):
        row = expand(A_ub[r]) + [_ZERO] * n_slack
        row[nx + r] = Fraction(1)
        body.append(row)
        rhs.append(Fraction(b_ub[r]))
    for r in range(m_eq):
        body.append(expand(A_eq[r]) + [_ZERO] * n_slack)
        rhs.append(Fraction(b_eq[r]))
    for r in range(m):
        if rhs[r] < 0:
            body[r] = [-v for v in body[r]]
            rhs[r] = -rhs[r]

    nreal = nx + n_slack
    # rows whose slack is +1 with rhs >= 0 can start with the slack basic
    need_art = [r for r in range(m) if not (r < m_ub and body[r][nx + r] == 1)]
    n_art = len(need_art)
    width = nreal + n_art
    rows = []
    basis = []
    art_of = {r: k for k, r in enumerate(need_art)}
    for r in range(m):
        row = body[r] + [_ZERO] * n_art + [rhs[r]]
        if r in art_of:
            row[nreal + art_of[r]] = Fraction(1)
            basis.append(nreal + art_of[r])
        else:
            basis.append(nx + r)
        rows.append(row)

    if n_art:
        obj = [_ZERO] * (width + 1)
        for r in need_art:
            for k in range(width + 1):
                obj[k] += rows[r][k]
        for k in range(nreal, width):
            obj[k] = _ZERO
        _simplex(rows, obj, basis, nreal)
        if any(rows[i][-1] != 0 for i, b in enumerate(basis) if b >= nreal):
            return LPResult(INFEASIBLE)
        # drive zero-level artificials out of the basis
        i = 0
        while i < len(rows):
            if basis[i] >= nreal:
                j = next((k for k in range(nreal) if rows[i][k] != 0), None)
                if j is None:
                    del rows[i]
                    del basis[i]
                    continue
                _pivot(rows, [_ZERO] * (width + 1), i, j)
                basis[i] = j
            i += 1
        rows = [row[:nreal] + [row[-1]] for row in rows]

    cost = expand(c) + [_ZERO] * n_slack
    obj = cost + [_ZERO]
    for i, b in enumerate(basis):
        cb = cost[b]
        if cb:
            for k in range(nreal + 1):
                obj[k] -= cb * rows[i][k]
    status = _simplex(rows, obj, basis, nreal)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED)
    sol = [_ZERO] * nreal
    for i, b in enumerate(basis):
        sol[b] = rows[i][-1]
    x = []
    for p, q in split:
        x.append(sol[p] - (sol[q] if q is not None else _ZERO))
    value = sum((Fraction(ci) * xi for ci, xi in zip(c, x)), _ZERO)
    return LPResult(OPTIMAL, tuple(x), value)


def feasible_point(
    A_ub: Sequence[Sequence] = (),
    b_ub: Sequence = (),
    A_eq: Sequence[Sequence] = (),
    b_eq: Sequence = (),
    n: Optional[int] = None,
    free: Iterable[int] = (),
) -> Optional[tuple[Fraction, ...]]:
    if n is None:
        n = len((list(A_ub) or list(A_eq))[0])
    res = linprog([0] * n, A_ub, b_ub, A_eq, b_eq, free)
    return res.x if res.ok else None
