"""Command-line interface.

Exit status: 0 success, 1 verification failure, 2 usage or parse error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys as _sys
from pathlib import Path

import numpy as np

from . import dsl, systems
from .control import ErrorDynamicsSpec, io_linearizing_feedback
from .expr import ParseError, as_expr, is_zero, to_text, tolerances
from .frames import FrameError, check_g_compatible, invariant_tracking_error, invariants
from .reduction import ReductionError, reduce
from .sim import NumericFailure, integrate, kinetic_switch, read_csv, write_csv
from .symmetry import ansatz_field, check_symmetry, determining_equations, generator_from_action

OK, FAIL, USAGE, NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _entry(args):
    if getattr(args, "system", None):
        p = Path(args.system)
        if p.is_file():
            return dsl.load(p)
        if args.system in systems.NAMES:
            return systems.get(args.system)
        raise UsageError(f"no such system file: {args.system}")
    if getattr(args, "catalog", None):
        try:
            return systems.get(args.catalog)
        except systems.UnknownSystem as exc:
            raise UsageError(exc.args[0]) from exc
    raise UsageError("give --system FILE or --catalog NAME")


def _csv_floats(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _names(text: str | None) -> list[str]:
    return [s.strip() for s in (text or "").split(",") if s.strip()]


def _emit(args, text: str):
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")


# ---------------------------------------------------------------------------
# commands


def cmd_check_symmetry(args) -> int:
    e = _entry(args)
    names = list(e.generators) if args.generator in (None, "all") else _names(args.generator)
    ok = True
    for n in names:
        if n not in e.generators:
            raise UsageError(f"{e.name} has no generator {n!r}; known: {', '.join(e.generators)}")
        g = e.generators[n]
        numeric = n in e.numeric_checks
        verdict = check_symmetry(e.system, g, symbolic=not numeric)
        shown = str(g)
        print(f"generator {n} = {shown if len(shown) <= 400 else shown[:400] + ' ...'}")
        for x, r, t in zip(e.system.states, verdict.residuals, verdict.tests):
            if not t:
                shown = to_text(r)
            else:
                shown = "0" if t.path == "symbolic" else f"0 ({t.path} zero test)"
            print(f"  residual[{x.name}] = {shown}")
        print(f"  symmetry: {'yes' if verdict else 'no'}")
        ok = ok and bool(verdict)
    return OK if ok else FAIL


def cmd_determining_eqs(args) -> int:
    e = _entry(args)
    deps = {}
    for spec in args.depends or []:
        if "=" not in spec:
            raise UsageError(f"--depends expects COORD=ARG,ARG..., got {spec!r}")
        k, v = spec.split("=", 1)
        deps[k.strip()] = _names(v)
    eqs = determining_equations(e.system, ansatz_field(e.system, deps))
    print("# input block (coefficients of input derivatives)")
    for x, row in zip(e.system.states, eqs.input_block):
        for u, c in zip(e.system.inputs, row):
            print(f"{x.name}/{u.name}': {to_text(c)} = 0")
    print("# base block")
    for x, c in zip(e.system.states, eqs.base_block):
        print(f"{x.name}: {to_text(c)} = 0")
    return OK


def _frame(e, name):
    if name not in e.frames:
        raise UsageError(f"{e.name} has no frame {name!r}; known: {', '.join(e.frames)}")
    return e.frame(name)


def cmd_invariants(args) -> int:
    e = _entry(args)
    fr = _frame(e, args.frame)
    print(f"frame {args.frame}: normalize {', '.join(c.name for c in fr.components)} "
          f"-> {', '.join(to_text(c) for c in fr.constants)}")
    if fr.symbolic:
        for a, g in fr.gamma.items():
            print(f"  gamma[{a.name}] = {to_text(g)}")
    else:
        print("  gamma: numeric (Newton)")
    inv = invariants(fr)
    if inv.exprs is not None:
        for c, x in zip(inv.coords, inv.exprs):
            print(f"  I[{c.name}] = {to_text(x)}")
    checks = [("equivariance", fr.check_equivariance()), ("invariance", inv.check_invariance()),
              ("independence", inv.check_independence())]
    te = invariant_tracking_error(fr)
    checks.append(("tracking error zero on reference", te.on_reference()))
    if te.symbolic:
        for i, x in enumerate(te.exprs):
            print(f"  e{i + 1} = {to_text(x)}")
    for label, v in checks:
        print(f"  {label}: {'pass' if v else 'FAIL'} {v.note}".rstrip())
    return OK if all(v for _, v in checks) else FAIL


def cmd_reduce(args) -> int:
    e = _entry(args)
    spec = e.frames.get(args.frame)
    fr = _frame(e, args.frame)
    names = list(spec.reduced) if spec.reduced else None
    red = reduce(e.system, fr, names)
    print(red.report())
    text = dsl.dumps(red.transverse_system())
    print()
    print(text, end="")
    _emit(args, text)
    return OK


def _generating_action(e, gnames):
    """The catalog action whose generators are exactly ``gnames`` (in order), if any."""
    gens = [e.generators[n] for n in gnames]
    for act in e.actions.values():
        if act.r != len(gens) or not set(act.coords) <= set(e.system.states):
            continue
        own = [generator_from_action(act, k + 1).extend(e.system.coords) for k in range(act.r)]
        if all(g.coords == o.coords and all(is_zero(p - q) for p, q in zip(g.coeffs, o.coeffs))
               for g, o in zip(gens, own)):
            return act
    return None


def cmd_gcompat(args) -> int:
    e = _entry(args)
    h = [as_expr(s) for s in _names(args.outputs)] if args.outputs else list(e.outputs.values())
    gnames = list(e.generators) if not args.generators else _names(args.generators)
    unknown = [n for n in gnames if n not in e.generators]
    if unknown:
        raise UsageError(f"{e.name} has no generators {unknown}")
    gens = [e.generators[n] for n in gnames]
    res = check_g_compatible(e.system, h, gens, _generating_action(e, gnames))
    print(f"outputs ({', '.join(to_text(x) for x in h)}): {'compatible' if res else 'not compatible'}")
    print(f"  {res.note}")
    if res.induced is not None:
        for y, x in res.induced.mapping.items():
            print(f"  induced: {y.name} -> {to_text(x)}")
    return OK if res else FAIL


def cmd_feedback(args) -> int:
    e = _entry(args)
    h = [as_expr(s) for s in _names(args.outputs)] if args.outputs else list(e.outputs.values())
    poles = [_csv_floats(p) for p in (args.poles or [])]
    if not poles:
        raise UsageError("give --poles per channel, e.g. --poles=-1,-1 --poles=-2")
    spec = ErrorDynamicsSpec.from_poles(poles)
    law = io_linearizing_feedback(e.system, h, spec)
    if not law:
        print(f"no feedback: {law.reason}")
        rd = law.relative_degree
        if rd is not None and rd.matrix is not None:
            print(f"  relative degrees {tuple(rd.degrees)}, decoupling matrix {rd.matrix.tolist()}")
        return FAIL
    for u, x in law.law.items():
        print(f"{u.name} = {to_text(x)}")
    print(f"valid where {to_text(law.domain)} != 0")
    ok = law.verify()
    print(f"closed-loop error dynamics: {'verified' if ok else 'FAILED'}")
    entry = systems.CatalogEntry(e.system.name, e.system,
                                 extra={"feedback": {"law": {u.name: x for u, x in law.law.items()}}})
    _emit(args, dsl.dumps(entry))
    return OK if ok else FAIL


def cmd_simulate(args) -> int:
    if args.switch_kinetic:
        if (args.catalog or args.system) not in ("bioreactor", "bioreactor_augmented"):
            raise UsageError("--switch-kinetic applies to the bioreactor")
        res = kinetic_switch(horizon=args.horizon or 20.0, h=args.h)
        out = Path(args.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "haldane.csv", res.haldane)
        write_csv(out / "michaelis_menten.csv", res.michaelis_menten)
        print(f"wrote {out / 'haldane.csv'} and {out / 'michaelis_menten.csv'}")
        print(res.report)
        print(f"s: sup |diff| = {res.s_gap:.3e} (the symmetry moves s)")
        ok = res.report.sup < args.tol
        print(f"(p, b) agree within {args.tol:g}: {'yes' if ok else 'no'}")
        return OK if ok else FAIL
    e = _entry(args)
    x0 = _csv_floats(args.x0)
    if len(x0) != e.system.n:
        raise UsageError(f"--x0 needs {e.system.n} values")
    u = _csv_floats(args.u) or [0.0] * e.system.m
    if len(u) != e.system.m:
        raise UsageError(f"--u needs {e.system.m} values")
    params = {}
    for kv in args.param or []:
        k, _, v = kv.partition("=")
        params[k.strip()] = float(v)
    tr = integrate(e.system, x0, args.horizon or 1.0, args.h, u=u, params=params)
    print(f"{e.system.name}: {len(tr.t)} samples, final state "
          + ", ".join(f"{n}={v:.10g}" for n, v in zip(tr.states, tr.final())))
    if args.out:
        write_csv(args.out, tr)
        print(f"wrote {args.out}")
    return OK


def cmd_compare(args) -> int:
    ha, A = read_csv(args.a)
    hb, B = read_csv(args.b)
    if A.shape[0] != B.shape[0] or not np.allclose(A[:, 0], B[:, 0], rtol=0, atol=1e-12):
        raise UsageError("trajectories are on different time grids")
    chans = _names(args.channels) or [c for c in ha[1:] if c in hb[1:]]
    worst = 0.0
    for c in chans:
        if c not in ha or c not in hb:
            raise UsageError(f"channel {c!r} missing")
        d = np.abs(A[:, ha.index(c)] - B[:, hb.index(c)])
        i = int(np.argmax(d))
        worst = max(worst, float(d[i]))
        print(f"{c}: sup |diff| = {d[i]:.3e} at t = {A[i, 0]:.6g}")
    if args.tol is not None:
        return OK if worst < args.tol else FAIL
    return OK


def cmd_catalog(args) -> int:
    if not args.name:
        for n in systems.NAMES:
            print(n)
        return OK
    try:
        e = systems.get(args.name)
    except systems.UnknownSystem as exc:
        raise UsageError(exc.args[0]) from exc
    text = dsl.dumps(e)
    if args.out:
        _emit(args, text)
    else:
        print(text, end="")
    return OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liecontrol", description="Lie symmetries, moving frames and invariant "
                                "feedback for control systems in state representation.")
    p.add_argument("--zero-tol", type=float, help="numeric zero-test tolerance (default 1e-9)")
    p.add_argument("--num-tol", type=float, help="tolerance of numeric checks (default 1e-8)")
    p.add_argument("--newton-tol", type=float, help="Newton residual tolerance for numeric frames (default 1e-12)")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def cmd(name, fn, help_):
        sp_ = sub.add_parser(name, help=help_, description=help_)
        sp_.set_defaults(fn=fn)
        return sp_

    def source(sp_):
        g = sp_.add_mutually_exclusive_group()
        g.add_argument("--system", help="system file (or catalog name)")
        g.add_argument("--catalog", help="catalog entry name")

    s = cmd("check-symmetry", cmd_check_symmetry, "verify declared generators as symmetries")
    source(s)
    s.add_argument("--generator", help="generator name(s), comma separated, or 'all' (default)")

    s = cmd("determining-eqs", cmd_determining_eqs, "emit the split determining equations for a generic ansatz")
    source(s)
    s.add_argument("--depends", action="append", metavar="COORD=ARGS",
                   help="restrict a coefficient's arguments, e.g. t=t or x=t,x (repeatable)")

    s = cmd("invariants", cmd_invariants, "solve a moving frame and print invariants and checks")
    source(s)
    s.add_argument("--frame", required=True)

    s = cmd("reduce", cmd_reduce, "reduced-order realization from a state-symmetry frame")
    source(s)
    s.add_argument("--frame", required=True)
    s.add_argument("--out", help="write the reduced system file here")

    s = cmd("gcompat", cmd_gcompat, "check that outputs are compatible with the symmetry group")
    source(s)
    s.add_argument("--outputs", help="comma-separated output expressions (default: the system's outputs)")
    s.add_argument("--generators", help="comma-separated generator names (default: all)")

    s = cmd("feedback", cmd_feedback, "input-output linearizing feedback with given error poles")
    source(s)
    s.add_argument("--outputs", help="comma-separated output expressions (default: the system's outputs)")
    s.add_argument("--poles", action="append", help="comma-separated poles of one channel (repeatable)")
    s.add_argument("--out", help="write the feedback as a system file")

    s = cmd("simulate", cmd_simulate, "fixed-step RK4 simulation")
    source(s)
    s.add_argument("--x0", help="initial state, comma separated")
    s.add_argument("--u", help="constant input, comma separated")
    s.add_argument("--param", action="append", metavar="NAME=VALUE", help="parameter override (repeatable)")
    s.add_argument("--horizon", type=float)
    s.add_argument("--h", type=float, default=1e-3, help="step size (default 1e-3)")
    s.add_argument("--switch-kinetic", action="store_true",
                   help="bioreactor: compare Haldane and Michaelis-Menten closed loops")
    s.add_argument("--tol", type=float, default=1e-6, help="agreement tolerance for --switch-kinetic")
    s.add_argument("--out", help="CSV file (directory with --switch-kinetic)")

    s = cmd("compare", cmd_compare, "per-channel sup-norm difference of two CSV trajectories")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--channels", help="comma-separated channel names (default: common channels)")
    s.add_argument("--tol", type=float, help="exit 1 when any deviation reaches this value")

    s = cmd("catalog", cmd_catalog, "list catalog entries or export one as a system file")
    s.add_argument("name", nargs="?")
    s.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else OK
    try:
        with tolerances(zero_tol=args.zero_tol, num_tol=args.num_tol, newton_tol=args.newton_tol):
            return args.fn(args)
    except (UsageError, ParseError, dsl.DSLError) as exc:
        if isinstance(exc, dsl.LoadError):
            print(f"verification failed: {exc}", file=_sys.stderr)
            return FAIL
        print(f"error: {exc}", file=_sys.stderr)
        return USAGE
    except (NumericFailure, FrameError) as exc:
        print(f"numeric failure: {exc}", file=_sys.stderr)
        return NUMERIC
    except ReductionError as exc:
        print(f"reduction failed: {exc}", file=_sys.stderr)
        return FAIL


if __name__ == "__main__":
    _sys.exit(main())
