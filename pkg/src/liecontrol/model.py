"""Control systems in explicit state representation ``x' = f(t, x, u)``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import sympy as sp

from .expr import as_expr, compile_exprs, jet, split_jet, substitute, symbol


def _syms(items) -> tuple[sp.Symbol, ...]:
    return tuple(symbol(s) if isinstance(s, str) else s for s in items)


@dataclass(frozen=True)
class JetCoordinates:
    """Time symbol plus the dependent variables whose jets are formal coordinates."""

    time: sp.Symbol
    dependents: tuple[sp.Symbol, ...]


@dataclass(frozen=True)
class ControlSystem:
    name: str
    states: tuple[sp.Symbol, ...]
    inputs: tuple[sp.Symbol, ...]
    dynamics: tuple[sp.Expr, ...]
    params: Mapping[sp.Symbol, float | None] = field(default_factory=dict)
    time: sp.Symbol = field(default_factory=lambda: symbol("t"))

    def __post_init__(self):
        object.__setattr__(self, "states", _syms(self.states))
        object.__setattr__(self, "inputs", _syms(self.inputs))
        object.__setattr__(self, "dynamics", tuple(as_expr(f) for f in self.dynamics))
        object.__setattr__(self, "params", {
            (symbol(k) if isinstance(k, str) else k): v for k, v in dict(self.params).items()
        })
        if isinstance(self.time, str):
            object.__setattr__(self, "time", symbol(self.time))
        if not self.states:
            raise ValueError("a system needs at least one state")
        if len(self.dynamics) != len(self.states):
            raise ValueError(f"{len(self.states)} states but {len(self.dynamics)} dynamics expressions")
        names = [s.name for s in self.coords + tuple(self.params)]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValueError(f"duplicate symbol names: {sorted(dupes)}")
        allowed = set(self.coords) | set(self.params)
        for x, f in zip(self.states, self.dynamics):
            extra = f.free_symbols - allowed
            if extra:
                raise ValueError(f"dynamics of {x} use undeclared symbols {sorted(s.name for s in extra)}")

    def __hash__(self):
        return hash((self.name, self.states, self.inputs, self.dynamics))

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def m(self) -> int:
        return len(self.inputs)

    @property
    def coords(self) -> tuple[sp.Symbol, ...]:
        """Adapted coordinates ``(t, x, u)``."""
        return (self.time,) + self.states + self.inputs

    @property
    def dependents(self) -> tuple[sp.Symbol, ...]:
        return self.states + self.inputs

    @property
    def f(self) -> dict[sp.Symbol, sp.Expr]:
        return dict(zip(self.states, self.dynamics))

    def state_jets(self) -> tuple[sp.Symbol, ...]:
        return tuple(jet(x) for x in self.states)

    def input_jets(self) -> tuple[sp.Symbol, ...]:
        return tuple(jet(u) for u in self.inputs)

    def residuals(self) -> list[sp.Expr]:
        """``F = x' - f(t, x, u)``; the system is the zero set of ``F``."""
        return [jet(x) - f for x, f in zip(self.states, self.dynamics)]

    def on_shell(self, e) -> sp.Expr:
        """Replace state derivative coordinates ``x'`` by ``f``.

        Higher state jets are replaced recursively by total derivatives of ``f``.
        """
        e = as_expr(e)
        top = max((split_jet(s)[1] for s in e.free_symbols if split_jet(s)[0] in self.states), default=0)
        if top == 0:
            return e
        from .geometry import total_derivative

        subs = {}
        cur = dict(self.f)
        for k in range(1, top + 1):
            subs.update({jet(x, k): cur[x] for x in self.states})
            if k < top:
                cur = {x: self.on_shell(total_derivative(cur[x], self)) for x in self.states}
        return substitute(e, subs)

    def cartan(self, e) -> sp.Expr:
        """Derivative along the Cartan field ``d/dt + f d/dx + u' d/du + ...``."""
        from .geometry import total_derivative

        return self.on_shell(total_derivative(self.on_shell(e), self))

    def with_params(self, values: Mapping) -> "ControlSystem":
        """Copy with parameters substituted by numbers (exact rationals)."""
        vals = {(symbol(k) if isinstance(k, str) else k): as_expr(v) for k, v in values.items()}
        return ControlSystem(
            self.name,
            self.states,
            self.inputs,
            tuple(substitute(f, vals) for f in self.dynamics),
            {p: d for p, d in self.params.items() if p not in vals},
            self.time,
        )

    def param_values(self, overrides: Mapping | None = None) -> dict[sp.Symbol, float]:
        out = {p: v for p, v in self.params.items() if v is not None}
        for k, v in (overrides or {}).items():
            out[symbol(k) if isinstance(k, str) else k] = v
        missing = [p.name for p in self.params if p not in out]
        if missing:
            raise ValueError(f"no numeric value for parameters {missing}")
        return out

    def numeric(self, overrides: Mapping | None = None):
        """Compiled ``f(t, x, u) -> ndarray`` with parameters bound."""
        vals = self.param_values(overrides)
        fs = [substitute(f, vals) for f in self.dynamics]
        fn = compile_exprs(fs, self.coords)
        n = self.n

        def rhs(t: float, x: Sequence[float], u: Sequence[float]) -> np.ndarray:
            return np.asarray(fn(t, *x, *u), dtype=float).reshape(n)

        return rhs

    def vector_field(self):
        """``v_f = f^i d/dx^i`` on the state coordinates (inputs as parameters)."""
        from .geometry import VectorField

        return VectorField(self.states, self.dynamics)

    def field(self, coeffs: Mapping) -> "VectorField":  # noqa: F821
        """Vector field on ``(t, x, u)`` from a partial coefficient map."""
        from .geometry import VectorField

        return VectorField.from_dict(self.coords, coeffs)


def system(name: str, states: Iterable, inputs: Iterable, dynamics: Iterable,
           params: Mapping | None = None, time: str = "t") -> ControlSystem:
    """Convenience constructor accepting names and expression text."""
    return ControlSystem(name, _syms(states), _syms(inputs), tuple(as_expr(f) for f in dynamics),
                         dict(params or {}), symbol(time))
