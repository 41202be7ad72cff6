"""Reduction of systems with state symmetries to transverse and orbit subsystems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import sympy as sp

from .expr import is_zero, simplify, substitute, symbol, to_text
from .frames import MovingFrame, invariants, solve_for_params
from .geometry import Verdict, VectorField, lie_bracket
from .model import ControlSystem


class ReductionError(RuntimeError):
    pass


def check_state_symmetry(sys: ControlSystem, gens: Sequence[VectorField]) -> Verdict:
    """``[v_f, v_i] = 0`` for state-only generators, inputs held as parameters."""
    vf = sys.vector_field()
    residuals = []
    for g in gens:
        stray = [c.name for c in g.coords if c not in sys.states and g[c] != 0]
        if stray:
            raise ValueError(f"generator acts on non-state coordinates {stray}")
        residuals.extend(lie_bracket(vf, g.extend(sys.states)).coeffs)
    return Verdict.from_residuals(residuals)


@dataclass
class ReducedRealization:
    """``xi' = F1(xi, u)`` transverse to the orbits and ``eta' = F2(xi, eta, u)`` along them."""

    source: ControlSystem
    frame: MovingFrame
    transverse: tuple[sp.Symbol, ...]
    F1: tuple[sp.Expr, ...]
    orbit: tuple[sp.Symbol, ...]
    F2: tuple[sp.Expr, ...]
    Xi: tuple[sp.Expr, ...]
    inverse: dict = field(default_factory=dict)
    permutation: tuple[int, ...] = ()
    name: str = ""

    @property
    def constants(self) -> tuple[sp.Expr, ...]:
        return self.frame.constants

    def transverse_system(self) -> ControlSystem:
        return ControlSystem(self.name or f"{self.source.name}_reduced", self.transverse, self.source.inputs,
                             self.F1, dict(self.source.params), self.source.time)

    def full_system(self) -> ControlSystem:
        return ControlSystem((self.name or f"{self.source.name}_reduced") + "_orbit",
                             self.transverse + self.orbit, self.source.inputs, self.F1 + self.F2,
                             dict(self.source.params), self.source.time)

    def report(self) -> str:
        lines = [f"# reduced realization of {self.source.name}"]
        for s, f in zip(self.transverse, self.F1):
            lines.append(f"{s.name}' = {to_text(f)}")
        for s, f in zip(self.orbit, self.F2):
            lines.append(f"{s.name}' = {to_text(f)}   (orbit)")
        for s, x in zip(self.transverse, self.Xi):
            lines.append(f"{s.name} := {to_text(x)}")
        return "\n".join(lines)


def reduce(sys: ControlSystem, frame: MovingFrame, names: Sequence[str] | None = None,
           orbit_names: Sequence[str] | None = None, check: bool = True) -> ReducedRealization:
    """Transverse subsystem in the invariants ``xi = Xi(x)`` plus orbit dynamics.

    ``xi' = (dXi/dx f)`` evaluated at ``x = (c, Xi^{-1}(xi))`` and the orbit
    coordinate ``eta = -gamma(x)``.  Transverse names default to the
    non-normalized state names, orbit names to the action parameters.
    """
    if not frame.symbolic:
        raise ReductionError("reduction needs a closed-form frame")
    act = frame.action
    if not set(act.coords) <= set(sys.states):
        raise ReductionError("frame action must act on states only")
    gens = [VectorField(act.coords, tuple(sp.diff(act.component(c), a).subs({b: 0 for b in act.params})
                                          for c in act.coords)) for a in act.params]
    if check and not check_state_symmetry(sys, [g.extend(sys.states) for g in gens]):
        raise ReductionError("action is not a state symmetry of the system")
    normalized = list(frame.components)
    rest = [x for x in sys.states if x not in normalized]
    perm = tuple(sys.states.index(x) for x in normalized + rest)
    inv = invariants(frame)
    Xi = []
    for x in rest:
        Xi.append(inv.exprs[inv.coords.index(x)] if x in inv.coords else x)
    names = [x.name for x in rest] if names is None else list(names)
    if len(names) != len(rest):
        raise ReductionError(f"need {len(rest)} transverse names")
    xi = tuple(symbol(n) for n in names)
    tmp = [sp.Dummy(n) for n in names]
    slice_ = dict(zip(normalized, frame.constants))
    eqs = [substitute(X, slice_) - d for X, d in zip(Xi, tmp)]
    sol = solve_for_params(eqs, rest)
    if sol is None:
        raise ReductionError("could not invert the invariants on the normalization slice")
    x0 = {**slice_, **sol}
    # round trip: Xi(x0(xi)) = xi
    for X, d in zip(Xi, tmp):
        if not is_zero(substitute(X, x0) - d):
            raise ReductionError("inverse of the invariants failed the round trip")
    rename = dict(zip(tmp, xi))
    F1 = []
    for X in Xi:
        dX = sum(sp.diff(X, x) * f for x, f in zip(sys.states, sys.dynamics))
        F1.append(simplify(substitute(substitute(dX, x0), rename)))
    if check:
        back = dict(zip(xi, Xi))
        for X, F in zip(Xi, F1):
            dX = sum(sp.diff(X, x) * f for x, f in zip(sys.states, sys.dynamics))
            if not is_zero(dX - substitute(F, back)):
                raise ReductionError("transverse dynamics depend on the orbit coordinates")
    orbit_names = [a.name for a in act.params] if orbit_names is None else list(orbit_names)
    eta = tuple(symbol(n) for n in orbit_names)
    gamma = [frame.gamma[a] for a in act.params]
    # x = phi(x0(xi); eta) must hold with eta = -gamma(x)
    x_of = {}
    x0_sym = {x: substitute(v, rename) for x, v in x0.items()}
    at_eta = dict(zip(act.params, eta))
    for x in sys.states:
        x_of[x] = substitute(substitute(act.component(x), x0_sym), at_eta) if x in act.mapping else x
    back = {**dict(zip(xi, Xi)), **{e: -g for e, g in zip(eta, gamma)}}
    for x in sys.states:
        if not is_zero(substitute(x_of[x], back) - x):
            raise ReductionError("orbit chart x = phi(x0; -gamma) does not hold for this action")
    F2 = []
    for g in gamma:
        dg = sum(sp.diff(g, x) * f for x, f in zip(sys.states, sys.dynamics))
        F2.append(simplify(substitute(-dg, x_of)))
    return ReducedRealization(sys, frame, xi, tuple(F1), eta, tuple(F2), tuple(Xi),
                              {x: x0_sym[x] for x in rest}, perm)
