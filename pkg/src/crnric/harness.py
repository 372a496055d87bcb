"""Adversarial verification of stable computation and empirical structure probes."""

from __future__ import annotations

import hashlib
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from .analysis import output_stable, output_stable_siphons
from .compiler import CompiledCrc, run_schedule
from .core import Crc, Crn, CrnError, State, applicable, apply_flux, format_fraction, to_fraction
from .dynamics import BlowUp, NotConverged, RatedCrn, WrongOutput, check_convergence, simulate
from .pwl import MaxMinForm, PwlSpec, RegionalPwl, eval_maxmin, evaluate
from .reach import Path, serialize_path

_ZERO = Fraction(0)


class InsufficientPoints(CrnError):
    pass


@dataclass(frozen=True)
class AdversaryConfig:
    max_prefix_segments: int = 20
    flux_scale: Fraction = Fraction(1)
    seed: int = 0
    trials: int = 100

    def __post_init__(self):
        object.__setattr__(self, "flux_scale", to_fraction(self.flux_scale))
        if self.max_prefix_segments < 0 or self.flux_scale <= 0 or self.trials < 0:
            raise ValueError("adversary bounds must be positive")


def adversarial_prefix(crn: Crn, x0, config: AdversaryConfig, rng: Optional[random.Random] = None) -> Path:
    """Random valid path: each segment fires a random subset of applicable reactions.

    Fluxes start uniform in ``[0, flux_scale]`` and are halved together until
    the segment lands in the nonnegative orthant.
    """
    rng = random.Random(config.seed) if rng is None else rng
    start = cur = State(x0)
    segments = []
    for _ in range(config.max_prefix_segments):
        live = [j for j in range(crn.n_reactions) if applicable(crn, cur, j)]
        if not live:
            break
        chosen = [j for j in live if rng.random() < 0.5] or [rng.choice(live)]
        seg = [_ZERO] * crn.n_reactions
        for j in chosen:
            seg[j] = Fraction(rng.randint(1, 1000), 1000) * config.flux_scale
        while True:
            try:
                nxt = apply_flux(crn, cur, tuple(seg))
                break
            except CrnError:
                seg = [v / 2 for v in seg]
        cur = nxt
        segments.append(tuple(seg))
    return Path(start, tuple(segments))


def _evaluate(f, x: Sequence[Fraction]) -> Fraction:
    if isinstance(f, MaxMinForm):
        return eval_maxmin(f, x)
    if isinstance(f, RegionalPwl):
        return evaluate(f, x)
    if isinstance(f, PwlSpec):
        return f(x)
    return to_fraction(f(x))


@dataclass
class TrialRecord:
    index: int
    input: list
    split: list
    prefix_segments: int
    prefix_digest: str
    finisher: str
    output: Optional[str]
    expected: str
    stable: bool
    passed: bool
    ode_output: Optional[float] = None
    ode_passed: Optional[bool] = None
    error: Optional[str] = None


@dataclass
class VerificationReport:
    records: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.records)

    @property
    def passed(self) -> int:
        return sum(1 for r in self.records if r.passed and r.ode_passed is not False)

    @property
    def ok(self) -> bool:
        return self.passed == self.total

    def to_json(self) -> str:
        body = {
            "trials": self.total,
            "passed": self.passed,
            "failed": self.total - self.passed,
            "records": [asdict(r) for r in self.records],
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _trial_rng(seed: int, index: int) -> random.Random:
    return random.Random(f"{seed}:{index}")


def random_split(crc: Crc, rng: random.Random, max_offset: int = 2) -> list[Fraction]:
    if crc.kind != "dual":
        return []
    return [Fraction(rng.randint(0, 100 * max_offset), 100) for _ in range(crc.arity)]


def _run_trial(args) -> TrialRecord:
    compiled, f, x, index, config, ode, ode_tol = args
    rng = _trial_rng(config.seed, index)
    crc = compiled.crc
    split = random_split(crc, rng)
    expected = _evaluate(f, x)
    rec = TrialRecord(index, [format_fraction(v) for v in x], [format_fraction(v) for v in split], 0, "", "schedule", None, format_fraction(expected), False, False)
    try:
        x0 = crc.input_state(x, split or None)
        prefix = adversarial_prefix(crc.crn, x0, config, rng)
        rec.prefix_segments = len(prefix)
        rec.prefix_digest = hashlib.sha256(serialize_path(crc.crn, prefix).encode()).hexdigest()[:16]
        mid = prefix.x0
        for seg in prefix.segments:
            mid = apply_flux(crc.crn, mid, seg)
        final, _ = run_schedule(crc.crn, mid, compiled.schedule)
        out = crc.output_value(final)
        rec.output = format_fraction(out)
        rec.stable = output_stable(crc, final)
        rec.passed = rec.stable and out == expected
        if ode:
            rates = tuple(rng.uniform(0.1, 10.0) for _ in range(crc.crn.n_reactions))
            try:
                traj = simulate(
                    RatedCrn(crc.crn, rates),
                    {s: float(v) for s, v in mid.items()},
                    horizon=1e20,
                    settle_tol=ode_tol / 10,
                )
                rep = check_convergence(crc, traj, float(expected), ode_tol)
                rec.ode_output = rep.value
                rec.ode_passed = rep.derivative_norm < 1e-8
            except (NotConverged, WrongOutput, BlowUp) as exc:
                rec.ode_passed = False
                rec.ode_output = getattr(exc, "value", None)
                rec.error = str(exc)
    except CrnError as exc:
        rec.error = str(exc)
    return rec


def verify_stable_computation(
    compiled: CompiledCrc,
    f: Union[MaxMinForm, RegionalPwl, PwlSpec, Callable],
    inputs: Sequence[Sequence],
    config: AdversaryConfig = AdversaryConfig(),
    ode: bool = False,
    ode_tol: float = 1e-4,
    jobs: int = 1,
) -> VerificationReport:
    """Run one adversarial trial per input; exact schedule finisher, optional ODE finisher."""
    work = [(compiled, f, [to_fraction(v) for v in x], i, config, ode, ode_tol) for i, x in enumerate(inputs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_trial, work))
    else:
        records = [_run_trial(w) for w in work]
    records.sort(key=lambda r: r.index)
    return VerificationReport(records)


def random_inputs(arity: int, n: int, seed: int, lo: int = -10, hi: int = 10, den: int = 60) -> list[list[Fraction]]:
    rng = random.Random(seed)
    return [[Fraction(rng.randint(lo * den, hi * den), den) for _ in range(arity)] for _ in range(n)]


# ------------------------------------------------------------------ probes


@dataclass
class LinearityReport:
    siphon: tuple
    points: int
    coefficients: tuple
    intercept: Fraction
    on_plane: bool

    @property
    def passed(self) -> bool:
        return self.on_plane and self.intercept == 0


def _solve_exact(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(A)
    M = [row[:] + [v] for row, v in zip(A, b)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def _rank(rows: list[list[Fraction]]) -> int:
    M = [r[:] for r in rows]
    rank = 0
    ncols = len(M[0]) if M else 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(M)) if M[r][col] != 0), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        for r in range(len(M)):
            if r != rank and M[r][col]:
                f = M[r][col] / M[rank][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[rank])]
        rank += 1
    return rank


def fit_hyperplane(points: Sequence[tuple[Sequence[Fraction], Fraction]]) -> tuple[list[Fraction], Fraction, bool]:
    """Exact affine fit y = a·x + b through affinely independent points; checks the rest."""
    if not points:
        raise InsufficientPoints("no points")
    k = len(points[0][0])
    basis: list[int] = []
    rows: list[list[Fraction]] = []
    for i, (x, _) in enumerate(points):
        cand = rows + [[Fraction(v) for v in x] + [Fraction(1)]]
        if _rank(cand) == len(cand):
            rows = cand
            basis.append(i)
            if len(basis) == k + 1:
                break
    if len(basis) < k + 1:
        raise InsufficientPoints(f"need {k + 1} affinely independent points, found {len(basis)}")
    sol = _solve_exact(rows, [points[i][1] for i in basis])
    a, b = sol[:k], sol[k]
    on = all(sum((ai * xi for ai, xi in zip(a, x)), b) == y for x, y in points)
    return a, b, on


def _crc_and_schedule(crc) -> tuple[Crc, Sequence[int]]:
    if isinstance(crc, CompiledCrc):
        return crc.crc, crc.schedule
    n = crc.crn.n_reactions
    return crc, list(range(n)) * max(1, n)


def _final_states(crc, inputs: Sequence[Sequence]) -> list[tuple[list[Fraction], State]]:
    c, schedule = _crc_and_schedule(crc)
    out = []
    for x in inputs:
        x = [to_fraction(v) for v in x]
        final, _ = run_schedule(c.crn, c.input_state(x), schedule)
        out.append((x, final))
    return out


def linearity_probe(crc, siphon, inputs: Sequence[Sequence]) -> LinearityReport:
    """Fit the outputs of inputs whose finished state drains ``siphon``; they must be linear."""
    c, _ = _crc_and_schedule(crc)
    siphon = frozenset(siphon)
    pts = [(x, c.output_value(s)) for x, s in _final_states(crc, inputs) if all(s[y] == 0 for y in siphon)]
    a, b, on = fit_hyperplane(pts)
    names = tuple(sorted(siphon, key=c.crn.index))
    return LinearityReport(names, len(pts), tuple(a), b, on)


@dataclass
class RationalityReport:
    outputs_rational: bool
    fits: list

    @property
    def passed(self) -> bool:
        return self.outputs_rational and all(
            all(isinstance(v, Fraction) for v in r.coefficients) and isinstance(r.intercept, Fraction) and r.passed
            for r in self.fits
        )


def probe_siphons(crc, inputs: Sequence[Sequence]) -> list[LinearityReport]:
    """Linearity fits for every minimal output-stable siphon drained often enough."""
    c, _ = _crc_and_schedule(crc)
    sets = output_stable_siphons(c)
    if sets is None:
        sets = [frozenset()]
    reports = []
    for om in sets:
        try:
            reports.append(linearity_probe(crc, om, inputs))
        except InsufficientPoints:
            continue
    return reports


def rationality_probe(crc, inputs: Sequence[Sequence]) -> RationalityReport:
    finals = _final_states(crc, inputs)
    c, _ = _crc_and_schedule(crc)
    rational = all(isinstance(c.output_value(s), Fraction) for _, s in finals)
    return RationalityReport(rational, probe_siphons(crc, inputs))
