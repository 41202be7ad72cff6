"""Vector fields on adapted coordinates: brackets, total derivatives,
prolongation, Lie-Baecklund map checks and tangency."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import sympy as sp

from .expr import ZeroTest, as_expr, is_zero, jet, simplify, split_jet, substitute, symbol, to_text
from .model import ControlSystem, JetCoordinates


class CoordinateMismatch(ValueError):
    pass


@dataclass
class Verdict:
    """Result of a verification: truthy iff every residual tested zero."""

    holds: bool
    residuals: list = field(default_factory=list)
    tests: list[ZeroTest] = field(default_factory=list)
    note: str = ""

    def __bool__(self):
        return self.holds

    @property
    def decided(self) -> bool:
        return all(t.decided for t in self.tests)

    @classmethod
    def from_residuals(cls, residuals, note: str = "", symbolic: bool = True, **kw) -> "Verdict":
        if symbolic:
            residuals = [simplify(r) for r in residuals]
        tests = [is_zero(r, symbolic=symbolic, **kw) for r in residuals]
        return cls(all(tests), residuals, tests, note)


@dataclass(frozen=True)
class VectorField:
    """``sum_k coeffs[k] * d/d coords[k]``."""

    coords: tuple[sp.Symbol, ...]
    coeffs: tuple[sp.Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(symbol(c) if isinstance(c, str) else c for c in self.coords))
        object.__setattr__(self, "coeffs", tuple(as_expr(c) for c in self.coeffs))
        if len(self.coords) != len(self.coeffs):
            raise ValueError("coordinate/coefficient length mismatch")
        if len(set(self.coords)) != len(self.coords):
            raise ValueError("repeated coordinate")

    @classmethod
    def from_dict(cls, coords: Sequence, coeffs: Mapping) -> "VectorField":
        coords = tuple(symbol(c) if isinstance(c, str) else c for c in coords)
        cmap = {(symbol(k) if isinstance(k, str) else k): as_expr(v) for k, v in coeffs.items()}
        extra = set(cmap) - set(coords)
        if extra:
            raise CoordinateMismatch(f"coefficients for unknown coordinates {sorted(s.name for s in extra)}")
        return cls(coords, tuple(cmap.get(c, sp.S.Zero) for c in coords))

    def __getitem__(self, s) -> sp.Expr:
        s = symbol(s) if isinstance(s, str) else s
        try:
            return self.coeffs[self.coords.index(s)]
        except ValueError:
            return sp.S.Zero

    def as_dict(self) -> dict[sp.Symbol, sp.Expr]:
        return {c: k for c, k in zip(self.coords, self.coeffs) if k != 0}

    def __call__(self, e) -> sp.Expr:
        """Lie derivative of a function along the field."""
        e = as_expr(e)
        return sp.Add(*[k * sp.diff(e, c) for c, k in zip(self.coords, self.coeffs) if k != 0])

    def extend(self, coords: Sequence[sp.Symbol]) -> "VectorField":
        """Same field written over a coordinate superset."""
        missing = [c for c in self.coords if c not in coords and self[c] != 0]
        if missing:
            raise CoordinateMismatch(f"field has components along {[m.name for m in missing]}")
        return VectorField.from_dict(coords, self.as_dict())

    def simplified(self) -> "VectorField":
        return VectorField(self.coords, tuple(simplify(k) for k in self.coeffs))

    def subs(self, mapping: Mapping) -> "VectorField":
        return VectorField(self.coords, tuple(substitute(k, mapping) for k in self.coeffs))

    def __add__(self, other: "VectorField") -> "VectorField":
        _check_same(self, other)
        return VectorField(self.coords, tuple(a + other[c] for c, a in zip(self.coords, self.coeffs)))

    def __neg__(self) -> "VectorField":
        return VectorField(self.coords, tuple(-k for k in self.coeffs))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self + (-other)

    def scale(self, c) -> "VectorField":
        return VectorField(self.coords, tuple(as_expr(c) * k for k in self.coeffs))

    def is_zero(self) -> Verdict:
        return Verdict.from_residuals(list(self.coeffs))

    def __str__(self):
        terms = []
        for c, k in zip(self.coords, self.coeffs):
            if k == 0:
                continue
            kt = to_text(k)
            if k == 1:
                terms.append(f"d/d{c.name}")
            elif k.is_Add:
                terms.append(f"({kt})*d/d{c.name}")
            else:
                terms.append(f"{kt}*d/d{c.name}")
        return " + ".join(terms) if terms else "0"


def _check_same(v: VectorField, w: VectorField):
    if set(v.coords) != set(w.coords):
        raise CoordinateMismatch(
            f"fields over different coordinates: {[c.name for c in v.coords]} vs {[c.name for c in w.coords]}"
        )


def lie_bracket(v: VectorField, w: VectorField) -> VectorField:
    """``[v, w]^k = v(w^k) - w(v^k)``."""
    _check_same(v, w)
    return VectorField(v.coords, tuple(simplify(v(w[c]) - w(v[c])) for c in v.coords))


def _jet_frame(coords) -> JetCoordinates:
    if isinstance(coords, (ControlSystem, JetCoordinates)):
        return JetCoordinates(coords.time, tuple(coords.dependents))
    time, *deps = coords
    return JetCoordinates(time, tuple(deps))


def total_derivative(e, coords) -> sp.Expr:
    """``D_t e = de/dt + sum_s s' de/ds`` over every jet of the dependent
    variables present in ``e``; derivative coordinates stay formal.

    ``coords`` is a :class:`ControlSystem`, a :class:`JetCoordinates` or a
    sequence ``(t, dependents...)``.
    """
    fr = _jet_frame(coords)
    e = as_expr(e)
    out = sp.diff(e, fr.time)
    deps = set(fr.dependents)
    for s in sorted(e.free_symbols, key=lambda x: x.name):
        base, k = split_jet(s)
        if base in deps:
            out += jet(base, k + 1) * sp.diff(e, s)
    return out


@dataclass(frozen=True)
class ProlongedField:
    """A field on ``(t, x, u)`` with its jet coefficients.

    ``jets[k-1]`` maps each dependent variable's ``k``-th jet coordinate to
    its coefficient (``zeta`` for states, ``psi`` for inputs when ``k = 1``).
    """

    base: VectorField
    frame: JetCoordinates
    jets: tuple[dict, ...]

    @property
    def order(self) -> int:
        return len(self.jets)

    @property
    def zeta(self) -> dict[sp.Symbol, sp.Expr]:
        return self.jets[0]

    def as_field(self) -> VectorField:
        coords = list(self.base.coords)
        coeffs = list(self.base.coeffs)
        for layer in self.jets:
            for c, k in layer.items():
                coords.append(c)
                coeffs.append(k)
        return VectorField(tuple(coords), tuple(coeffs))

    def __call__(self, e) -> sp.Expr:
        return self.as_field()(e)


def prolong(v: VectorField, coords=None, order: int = 1) -> ProlongedField:
    """Prolongation of ``v = xi d/dt + eta^a d/dz^a``:
    ``zeta_k^a = D_t zeta_{k-1}^a - z_k^a D_t xi`` with ``zeta_0 = eta``.

    ``coords`` defaults to ``(v.coords[0], v.coords[1:])`` i.e. the first
    coordinate is time.
    """
    fr = _jet_frame(coords if coords is not None else v.coords)
    xi = v[fr.time]
    dxi = total_derivative(xi, fr)
    prev = {z: v[z] for z in fr.dependents}
    layers = []
    for k in range(1, order + 1):
        layer = {}
        for z in fr.dependents:
            layer[jet(z, k)] = simplify(total_derivative(prev[z], fr) - jet(z, k) * dxi)
        layers.append(layer)
        prev = {z: layer[jet(z, k)] for z in fr.dependents}
    return ProlongedField(v, fr, tuple(layers))


@dataclass(frozen=True)
class SystemMap:
    """Point map between systems: ``t~ = time_map``, ``target = expr`` in source coordinates."""

    targets: Mapping[sp.Symbol, sp.Expr]
    time_map: sp.Expr = field(default_factory=lambda: symbol("t"))

    def __post_init__(self):
        object.__setattr__(self, "targets", {
            (symbol(k) if isinstance(k, str) else k): as_expr(v) for k, v in dict(self.targets).items()
        })
        object.__setattr__(self, "time_map", as_expr(self.time_map))

    def __hash__(self):
        return hash(tuple(self.targets.items()))

    def compose(self, first: "SystemMap", source_time: sp.Symbol | None = None) -> "SystemMap":
        """``self o first``: apply ``first`` and then ``self``.

        ``source_time`` is the time symbol that ``self`` was written in.
        """
        t = source_time or symbol("t")
        subs = dict(first.targets)
        subs[t] = first.time_map
        return SystemMap(
            {k: substitute(v, subs) for k, v in self.targets.items()},
            substitute(self.time_map, subs),
        )

    @classmethod
    def identity(cls, sys: ControlSystem) -> "SystemMap":
        return cls({c: c for c in sys.dependents}, sys.time)


def check_lie_backlund_map(m: SystemMap, src: ControlSystem, dst: ControlSystem) -> Verdict:
    """Check the defining equations ``d_t(V^b) - B^b(T, V) d_t(T) = 0`` for
    every destination state ``b``, with ``d_t`` the source Cartan field.

    Source inputs carry free derivative coordinates; destination inputs must
    be mapped but impose no condition (their jets are free).
    """
    needed = set(dst.states) | set(dst.inputs)
    missing = needed - set(m.targets)
    if missing:
        raise CoordinateMismatch(f"map lacks targets for {sorted(s.name for s in missing)}")
    stray = set().union(*(as_expr(v).free_symbols for v in m.targets.values())) - (
        set(src.coords) | set(src.params) | set(src.input_jets())
    )
    stray = {s for s in stray if split_jet(s)[0] not in src.inputs}
    if stray:
        raise CoordinateMismatch(f"map uses symbols outside the source: {sorted(s.name for s in stray)}")
    T = m.time_map
    dT = src.cartan(T)
    at = {dst.time: T, **{c: m.targets[c] for c in dst.states + dst.inputs}}
    residuals = []
    for x, g in zip(dst.states, dst.dynamics):
        residuals.append(src.cartan(m.targets[x]) - substitute(g, at) * dT)
    return Verdict.from_residuals(residuals)


def is_tangent(v: VectorField, residuals: Iterable, solve_for: Sequence[sp.Symbol] | None = None) -> Verdict:
    """Tangency of ``v`` to ``S = {F = 0}``: ``v(F^k)`` vanishes on ``S``.

    Each residual is solved for its highest-order jet coordinate (or the
    symbol given in ``solve_for``) and substituted into ``v(F^k)``.
    """
    residuals = [as_expr(r) for r in residuals]
    if solve_for is None:
        solve_for = []
        for r in residuals:
            cands = sorted(r.free_symbols, key=lambda s: (-split_jet(s)[1], s.name))
            solve_for.append(cands[0])
    solve_for = [symbol(s) if isinstance(s, str) else s for s in solve_for]
    on_s = {}
    for r, s in zip(residuals, solve_for):
        sol = sp.solve(r, s, dict=True)
        if len(sol) != 1:
            raise ValueError(f"residual {to_text(r)} is not uniquely solvable for {s}")
        on_s[s] = sol[0][s]
    return Verdict.from_residuals([substitute(v(r), on_s) for r in residuals])
