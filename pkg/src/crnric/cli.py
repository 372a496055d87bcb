"""Command-line entry point: ``crnric <subcommand> ...``.

Exit codes: 0 success, 1 domain failure (a verdict contradicting ``--expect``,
a failed verification, a blow-up), 2 usage or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Optional, Sequence

from . import analysis, compiler, dynamics, harness, pwl, reach
from .core import CrnError, ParseError, State, parse_crc, parse_crn, parse_state, serialize_crc

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return FsPath(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str, text: str) -> None:
    try:
        FsPath(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _species_line(crn, members) -> str:
    return " ".join(sorted(members, key=crn.index))


def _expect(verdict: str, expected: Optional[str]) -> int:
    return EXIT_DOMAIN if expected is not None and expected != verdict else EXIT_OK


# ----------------------------------------------------------------- commands


def cmd_compile(args) -> int:
    spec = pwl.parse_pwl(_read(args.spec), args.spec)
    f = spec.function()
    compiled = compiler.compile_function(f, args.encoding)
    _write(args.output, serialize_crc(compiled.crc))
    sidecar = str(FsPath(args.output).with_suffix(".schedule"))
    _write(sidecar, compiler.serialize_schedule(compiled))
    crn = compiled.crn
    print(f"compiled {args.encoding}: {crn.n_species} species, {crn.n_reactions} reactions -> {args.output}")
    return EXIT_OK


def cmd_reach(args) -> int:
    crn = parse_crn(_read(args.crn), args.crn)
    c = parse_state(_read(args.from_), args.from_)
    d = parse_state(_read(args.to), args.to)
    decide = reach.decide_reachable_bruteforce if args.bruteforce else reach.decide_reachable
    verdict = decide(crn, c, d)
    if verdict.reachable:
        print(f"reachable ({len(verdict.witness)} segments)")
        if args.witness:
            _write(args.witness, reach.serialize_path(crn, verdict.witness))
    else:
        print("unreachable")
    return _expect("reachable" if verdict.reachable else "unreachable", args.expect)


def cmd_siphons(args) -> int:
    if args.output_stable:
        crc = parse_crc(_read(args.crn), args.crn)
        sets = analysis.output_stable_siphons(crc)
        if sets is None:
            print("no output-changing reactions: every state is output stable")
            return EXIT_OK
        crn = crc.crn
    else:
        crn = parse_crn(_read(args.crn), args.crn)
        sets = analysis.minimal_siphons(crn)
    for s in sets:
        print(_species_line(crn, s))
    return EXIT_OK


def cmd_stable(args) -> int:
    crc = parse_crc(_read(args.crn), args.crn)
    state = parse_state(_read(args.state), args.state)
    ok = analysis.output_stable(crc, state)
    print("output stable" if ok else "not output stable")
    return _expect("stable" if ok else "unstable", args.expect)


def cmd_feedforward(args) -> int:
    crn = parse_crn(_read(args.crn), args.crn)
    order = analysis.feedforward_order(crn)
    if order is None:
        print("not feedforward")
    else:
        print(" ".join(order))
    return _expect("yes" if order is not None else "no", args.expect)


def _parse_rates(text: Optional[str], n: int) -> tuple[float, ...]:
    rates = [1.0] * n
    if not text:
        return tuple(rates)
    for part in text.split(","):
        key, sep, val = part.partition(":")
        if not sep:
            raise UsageError(f"rate entry {part!r} is not <reaction>:<k>")
        try:
            j = int(key)
            k = float(val)
        except ValueError:
            raise UsageError(f"bad rate entry {part!r}") from None
        if not 1 <= j <= n:
            raise UsageError(f"reaction {j} out of range 1..{n}")
        if not k > 0:
            raise UsageError(f"rate for reaction {j} must be positive")
        rates[j - 1] = k
    return tuple(rates)


def _plot(traj: dynamics.Trajectory, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for i, s in enumerate(traj.species):
        ax.plot(traj.times, traj.states[:, i], label=s)
    ax.set_xlabel("time")
    ax.set_ylabel("concentration")
    if len(traj.times) > 2 and traj.times[-1] > 1e3 * max(traj.times[1], 1e-12):
        ax.set_xscale("symlog", linthresh=max(traj.times[1], 1e-6))
    ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    fig.savefig(path, format=FsPath(path).suffix.lstrip(".") or "svg", metadata={"Date": None} if path.endswith(".svg") else None)
    plt.close(fig)


def cmd_simulate(args) -> int:
    crn = parse_crn(_read(args.crn), args.crn)
    x0 = parse_state(_read(args.state), args.state)
    rated = dynamics.RatedCrn(crn, _parse_rates(args.rates, crn.n_reactions))
    try:
        traj = dynamics.simulate(
            rated,
            {s: float(v) for s, v in x0.items()},
            horizon=args.horizon,
            rtol=args.rtol,
            atol=args.atol,
            method=args.method,
            stop_at_equilibrium=not args.no_early_stop,
        )
    except dynamics.BlowUp as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.output:
        _write(args.output, traj.to_csv())
    if args.plot:
        _plot(traj, args.plot)
    status = "equilibrium" if traj.converged else "horizon"
    print(f"t = {traj.times[-1]:.6g} ({status}, {len(traj.times)} samples)")
    for s, v in traj.final.items():
        print(f"{s} = {v:.10g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    crc = parse_crc(_read(args.crc), args.crc)
    sched_path = args.schedule or str(FsPath(args.crc).with_suffix(".schedule"))
    schedule = compiler.parse_schedule(_read(sched_path), crc.crn.n_reactions)
    spec = pwl.parse_pwl(_read(args.spec), args.spec)
    if spec.arity != crc.arity:
        raise UsageError(f"function arity {spec.arity} does not match CRC arity {crc.arity}")
    compiled = compiler.CompiledCrc(crc, schedule, ("",) * crc.crn.n_reactions)
    lo = 0 if crc.kind == "direct" else -10
    inputs = harness.random_inputs(crc.arity, args.trials, args.seed, lo, 10)
    config = harness.AdversaryConfig(args.prefix, Fraction(args.flux_scale), args.seed, args.trials)
    report = harness.verify_stable_computation(compiled, spec, inputs, config, ode=args.ode, jobs=args.jobs)
    if args.report:
        _write(args.report, report.to_json())
    for r in report.records:
        if not (r.passed and r.ode_passed is not False):
            print(f"trial {r.index + 1}: input ({', '.join(r.input)}) expected {r.expected}, got {r.output}" + (f" [{r.error}]" if r.error else ""))
    print(f"{report.passed}/{report.total} trials passed")
    return EXIT_OK if report.ok else EXIT_DOMAIN


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crnric", description="Rate-independent CRN compiler and analyzer.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a piecewise linear function into a CRN")
    c.add_argument("--spec", required=True)
    c.add_argument("--encoding", choices=("dual", "direct"), default="dual")
    c.add_argument("-o", "--output", required=True)
    c.set_defaults(func=cmd_compile)

    r = sub.add_parser("reach", help="decide segment reachability between two states")
    r.add_argument("--crn", required=True)
    r.add_argument("--from", dest="from_", required=True)
    r.add_argument("--to", required=True)
    r.add_argument("--witness")
    r.add_argument("--expect", choices=("reachable", "unreachable"))
    r.add_argument("--bruteforce", action="store_true", help="use the exhaustive support search")
    r.set_defaults(func=cmd_reach)

    s = sub.add_parser("siphons", help="list minimal siphons")
    s.add_argument("--crn", required=True)
    s.add_argument("--output-stable", action="store_true", help="list minimal output-stable siphons (needs output header)")
    s.set_defaults(func=cmd_siphons)

    st = sub.add_parser("stable", help="decide output stability of a state")
    st.add_argument("--crn", required=True)
    st.add_argument("--state", required=True)
    st.add_argument("--expect", choices=("stable", "unstable"))
    st.set_defaults(func=cmd_stable)

    ff = sub.add_parser("feedforward", help="find a feedforward species order")
    ff.add_argument("--crn", required=True)
    ff.add_argument("--expect", choices=("yes", "no"))
    ff.set_defaults(func=cmd_feedforward)

    sm = sub.add_parser("simulate", help="integrate mass-action kinetics")
    sm.add_argument("--crn", required=True)
    sm.add_argument("--state", required=True)
    sm.add_argument("--rates", help='e.g. "1:2.5,2:1.0"; unspecified rates are 1')
    sm.add_argument("--horizon", type=float, default=100.0)
    sm.add_argument("--rtol", type=float, default=1e-9)
    sm.add_argument("--atol", type=float, default=1e-12)
    sm.add_argument("--method", choices=sorted(dynamics._METHODS), default="LSODA")
    sm.add_argument("--no-early-stop", action="store_true")
    sm.add_argument("-o", "--output")
    sm.add_argument("--plot")
    sm.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="adversarially verify a compiled CRC against its function")
    v.add_argument("--crc", required=True)
    v.add_argument("--spec", required=True)
    v.add_argument("--schedule", help="defaults to the .schedule sidecar next to --crc")
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--prefix", type=int, default=20)
    v.add_argument("--flux-scale", default="1")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--report")
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--ode", action="store_true", help="also run the mass-action finisher")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CrnError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
