"""Mass-action kinetics: symbolic ODEs, simulation, convergence checks and witness extraction."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
import sympy
from scipy.integrate import LSODA, RK45, DOP853, Radau, BDF

from .analysis import static_equilibrium
from .core import Crc, Crn, CrnError, State
from .reach import ApproxPath, Path, _ramp, _vec, rationalize_path, self_firable_core

log = logging.getLogger(__name__)

_METHODS = {"RK45": RK45, "DOP853": DOP853, "LSODA": LSODA, "Radau": Radau, "BDF": BDF}


class BlowUp(CrnError):
    pass


class NotConverged(CrnError):
    pass


class WrongOutput(CrnError):
    def __init__(self, value: float, expected: float):
        self.value = value
        self.expected = expected
        super().__init__(f"output {value!r} differs from expected {expected!r}")


@dataclass(frozen=True)
class RatedCrn:
    crn: Crn
    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(k) for k in self.rates)
        if len(rates) != self.crn.n_reactions:
            raise ValueError(f"{len(rates)} rates for {self.crn.n_reactions} reactions")
        if any(not k > 0 for k in rates):
            raise ValueError("rate constants must be positive")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def uniform(cls, crn: Crn, k: float = 1.0) -> "RatedCrn":
        return cls(crn, (k,) * crn.n_reactions)


def derive_odes(crn: Union[Crn, RatedCrn], rates: Optional[Sequence] = None) -> dict[str, sympy.Expr]:
    """Mass-action right-hand side per species.

    Rate constants are the symbols ``k1 .. km`` unless numeric rates are given
    (either via a :class:`RatedCrn` or ``rates``).
    """
    if isinstance(crn, RatedCrn):
        rates = crn.rates if rates is None else rates
        crn = crn.crn
    if rates is None:
        ks = [sympy.Symbol(f"k{j + 1}", positive=True) for j in range(crn.n_reactions)]
    else:
        ks = [sympy.nsimplify(k) if isinstance(k, (int, Fraction)) else k for k in rates]
    sym = {s: sympy.Symbol(s, nonnegative=True) for s in crn.species}
    out = {s: sympy.Integer(0) for s in crn.species}
    for j, r in enumerate(crn.reactions):
        rate = ks[j]
        for s, n in r.reactants:
            rate = rate * sym[s] ** n
        for s, n in r.net().items():
            out[s] += n * rate
    return {s: sympy.expand(e) for s, e in out.items()}


@dataclass
class Trajectory:
    species: tuple[str, ...]
    times: np.ndarray
    states: np.ndarray  # (n_times, n_species)
    flux: np.ndarray  # (n_times, n_reactions), cumulative
    converged: bool = False
    clip_events: int = 0
    final_derivative: float = float("nan")

    @property
    def final(self) -> dict[str, float]:
        return dict(zip(self.species, self.states[-1].tolist()))

    @property
    def flux_integrals(self) -> np.ndarray:
        return self.flux[-1]

    def to_csv(self) -> str:
        m = self.flux.shape[1]
        head = ["t", *self.species, *(f"flux_{j + 1}" for j in range(m))]
        lines = [",".join(head)]
        for t, x, f in zip(self.times, self.states, self.flux):
            lines.append(",".join(repr(float(v)) for v in (t, *x, *f)))
        return "\n".join(lines) + "\n"


class _MassAction:
    def __init__(self, r: RatedCrn):
        crn = r.crn
        self.n = crn.n_species
        self.k = np.array(r.rates, dtype=float)
        self.M = np.array(crn.stoich, dtype=float).reshape(crn.n_species, crn.n_reactions)
        E = np.zeros((crn.n_reactions, crn.n_species))
        for j, rx in enumerate(crn.reactions):
            for s, c in rx.reactants:
                E[j, crn.index(s)] = c
        self.E = E

    def rates(self, x: np.ndarray) -> np.ndarray:
        return self.k * np.prod(np.power(x[None, :], self.E), axis=1)

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        x = np.maximum(y[: self.n], 0.0)
        v = self.rates(x)
        return np.concatenate([self.M @ v, v])


def _as_float_state(crn: Crn, x0: Mapping) -> np.ndarray:
    x = np.array([float(x0.get(s, 0)) for s in crn.species], dtype=float)
    if np.any(x < 0):
        raise ValueError("initial state must be nonnegative")
    return x


def simulate(
    r: RatedCrn,
    x0: Mapping,
    horizon: float = 1e6,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    method: str = "LSODA",
    bound: float = 1e8,
    eq_threshold: float = 1e-10,
    eq_steps: int = 3,
    stop_at_equilibrium: bool = True,
    max_steps: int = 2_000_000,
    settle_tol: Optional[float] = None,
) -> Trajectory:
    """Integrate mass-action kinetics from ``x0`` up to ``horizon``.

    Negative excursions are clipped to zero.  Integration stops early once
    the species derivative max-norm stays below ``eq_threshold`` for
    ``eq_steps`` consecutive accepted steps.  The default stepper is LSODA:
    explicit pairs (``RK45``, ``DOP853``) run at their stability limit near
    an equilibrium and stall just above the threshold.

    ``settle_tol`` adds a second stop condition, ``max|x'| * t < settle_tol``.
    High-order reactions such as ``5 W -> Y`` decay polynomially, so a small
    derivative alone says little about how far the state still has to move;
    for a power-law tail ``|x'| * t`` is proportional to that distance.
    """
    crn = r.crn
    rhs = _MassAction(r)
    n, m = crn.n_species, crn.n_reactions
    x = _as_float_state(crn, x0)
    y0 = np.concatenate([x, np.zeros(m)])
    times, states, fluxes = [0.0], [x.copy()], [np.zeros(m)]
    clips = 0
    deriv = float(np.max(np.abs(rhs(0.0, y0)[:n]))) if n else 0.0
    if m == 0 or horizon <= 0 or (stop_at_equilibrium and deriv == 0.0):
        return Trajectory(crn.species, np.array(times), np.array(states).reshape(1, n), np.array(fluxes).reshape(1, m), True, 0, deriv)
    solver = _METHODS[method](rhs, 0.0, y0, horizon, rtol=rtol, atol=atol)
    calm = 0
    converged = False
    steps = 0
    while solver.status == "running":
        msg = solver.step()
        steps += 1
        if solver.status == "failed":
            if np.max(solver.y[:n]) > bound or not np.all(np.isfinite(solver.y)):
                raise BlowUp(f"concentration exceeded {bound:g} near t={solver.t:.6g}")
            raise NotConverged(f"integrator failed at t={solver.t:.6g}: {msg}")
        y = solver.y
        if not np.all(np.isfinite(y)) or np.max(y[:n]) > bound:
            raise BlowUp(f"concentration exceeded {bound:g} near t={solver.t:.6g}")
        if np.any(y[:n] < 0):
            clips += 1
            y = y.copy()
            y[:n] = np.maximum(y[:n], 0.0)
            # explicit steppers restart from the clipped point; LSODA keeps
            # its own history and the rate law already reads negatives as 0
            if method in ("RK45", "DOP853"):
                solver.y = y
                solver.f = rhs(solver.t, y)
        times.append(solver.t)
        states.append(y[:n].copy())
        fluxes.append(y[n:].copy())
        deriv = float(np.max(np.abs(rhs(solver.t, y)[:n])))
        if stop_at_equilibrium:
            settled = settle_tol is None or deriv * solver.t < settle_tol
            calm = calm + 1 if deriv < eq_threshold and settled else 0
            if calm >= eq_steps:
                converged = True
                break
        if steps >= max_steps:
            break
    if clips:
        log.debug("clipped negative concentrations %d times", clips)
    return Trajectory(crn.species, np.array(times), np.array(states), np.array(fluxes), converged, clips, deriv)


@dataclass
class ConvergenceReport:
    value: float
    expected: float
    derivative_norm: float
    static: bool


def _near_static(crn: Crn, final: Mapping, tol: float) -> bool:
    for r in crn.reactions:
        if all(final.get(s, 0.0) > tol for s, _ in r.reactants):
            return False
    return True


def check_convergence(crc: Crc, traj: Trajectory, expected, tol: float = 1e-4) -> ConvergenceReport:
    """Check that ``traj`` ended in a (near) static equilibrium with the expected output."""
    final = traj.final
    if not traj.converged:
        raise NotConverged(f"no equilibrium by t={traj.times[-1]:.6g} (derivative {traj.final_derivative:.3g})")
    static = _near_static(crc.crn, final, tol)
    if not static:
        raise NotConverged("trajectory settled at a dynamic equilibrium, not a static one")
    if crc.kind == "dual":
        value = final.get(crc.output[0], 0.0) - final.get(crc.output[1], 0.0)
    else:
        value = final.get(crc.output[0], 0.0)
    expected = float(expected)
    if abs(value - expected) > tol:
        raise WrongOutput(value, expected)
    return ConvergenceReport(value, expected, traj.final_derivative, static)


def trajectory_to_witness(crn: Crn, x0: Mapping, traj: Trajectory, slack: float = 1e-6, tolerance: Optional[float] = None) -> Path:
    """Exact segment path from ``x0`` to a rational state near the trajectory's last sample.

    Follows the proof that mass-action reachable states are segment
    reachable: a short exact ramp enabling every reaction that carried flux,
    then one straight line carrying the remaining flux, rationalized with the
    trajectory's zero pattern.

    Coordinates at most ``slack`` are declared zero.  Pinning one of them to
    0 shifts its neighbours by up to the largest stoichiometric coefficient,
    so the default ``tolerance`` is ``slack`` times ``1 + max |M(i,j)|``
    summed over a column.
    """
    x0 = State(x0)
    if tolerance is None:
        widest = max((sum(abs(v) for v in crn.column(j)) for j in range(crn.n_reactions)), default=0)
        tolerance = slack * (1 + widest)
    F = traj.flux_integrals
    T = {j for j, v in enumerate(F) if v > 2 * slack}
    T = self_firable_core(crn, x0, T)
    if not T:
        return rationalize_path(crn, ApproxPath(dict(x0), ()), tolerance, slack)
    vec = _vec(crn, x0)
    ramp = _ramp(crn, vec, T, stop_when_enabled=True)
    sigma = [sum((seg[j] for seg in ramp), Fraction(0)) for j in range(crn.n_reactions)]
    lam = Fraction(1)
    for j in T:
        if sigma[j] > 0:
            lam = min(lam, Fraction(float(F[j])).limit_denominator(10**9) / (2 * sigma[j]))
    segs: list = [tuple(v * lam for v in seg) for seg in ramp]
    segs.append(tuple(float(F[j]) - float(lam * sigma[j]) if j in T else Fraction(0) for j in range(crn.n_reactions)))
    return rationalize_path(crn, ApproxPath(dict(x0), tuple(segs)), tolerance, slack)


__all__ = [
    "BlowUp",
    "ConvergenceReport",
    "NotConverged",
    "RatedCrn",
    "Trajectory",
    "WrongOutput",
    "check_convergence",
    "derive_odes",
    "simulate",
    "static_equilibrium",
    "trajectory_to_witness",
]
