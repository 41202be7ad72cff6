"""Classical Lie point symmetries of state systems.

Residuals of the prolonged-generator condition, split determining equations,
generators of parametrized group actions, structure constants and numeric
composition checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .expr import (
    as_expr,
    compile_exprs,
    is_zero,
    jet,
    rationalize,
    simplify,
    split_jet,
    substitute,
    symbol,
    tol,
)
from .geometry import CoordinateMismatch, Verdict, VectorField, lie_bracket, prolong, total_derivative
from .model import ControlSystem


class ActionError(ValueError):
    pass


class RankDeficiency(ValueError):
    pass


def _sym(s):
    return symbol(s) if isinstance(s, str) else s


@dataclass(frozen=True)
class GroupAction:
    """Local transformation group ``z~ = phi(z; a)`` with the identity at ``a = 0``.

    ``mapping`` lists the transformed expression of every acted-on coordinate;
    coordinates absent from it are fixed.  ``multiplicative`` marks coordinates
    whose natural normalization constant is 1 rather than 0.  ``law`` maps a
    pair of parameter tuples ``(a, b)`` to the parameters of "first ``a`` then
    ``b``" when the composition is known in closed form.
    """

    name: str
    params: tuple[sp.Symbol, ...]
    mapping: Mapping[sp.Symbol, sp.Expr]
    multiplicative: frozenset = frozenset()
    law: Callable[[Sequence[float], Sequence[float]], Sequence[float]] | None = None
    time: sp.Symbol | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(_sym(p) for p in self.params))
        object.__setattr__(self, "mapping", {_sym(k): as_expr(v) for k, v in dict(self.mapping).items()})
        object.__setattr__(self, "multiplicative", frozenset(_sym(s) for s in self.multiplicative))
        if isinstance(self.time, str):
            object.__setattr__(self, "time", symbol(self.time))
        if not self.params:
            raise ActionError("an action needs at least one parameter")
        at0 = {a: 0 for a in self.params}
        for c, e in self.mapping.items():
            if not is_zero(substitute(e, at0) - c):
                raise ActionError(f"component {c.name} is not the identity at a = 0")

    def __hash__(self):
        return hash((self.name, self.params, tuple(self.mapping.items())))

    @property
    def r(self) -> int:
        return len(self.params)

    @property
    def coords(self) -> tuple[sp.Symbol, ...]:
        return tuple(self.mapping)

    def component(self, c) -> sp.Expr:
        c = _sym(c)
        return self.mapping.get(c, c)

    def constants(self) -> set[sp.Symbol]:
        """Symbols appearing in the mapping that are neither coordinates nor parameters."""
        syms = set().union(*(e.free_symbols for e in self.mapping.values()))
        return syms - set(self.mapping) - set(self.params)

    def apply(self, point: Mapping, a: Sequence[float], extra: Mapping | None = None) -> dict:
        """Numeric image of ``point`` (dict coord -> value) under parameters ``a``."""
        binding = {**{_sym(k): v for k, v in point.items()}, **{_sym(k): v for k, v in (extra or {}).items()}}
        binding.update(dict(zip(self.params, a)))
        out = dict(binding)
        for c, e in self.mapping.items():
            out[c] = float(substitute(e, binding).evalf(30)) if not isinstance(e, (int, float)) else float(e)
        return {k: v for k, v in out.items() if k not in self.params}

    def numeric(self, coords: Sequence[sp.Symbol], extra: Sequence[sp.Symbol] = ()):
        """Compiled ``(z, a, extra) -> z~`` over the given coordinate order."""
        coords = [_sym(c) for c in coords]
        extra = [_sym(c) for c in extra]
        fn = compile_exprs([self.component(c) for c in coords], coords + list(self.params) + extra)

        def run(z, a, e=()):
            return np.asarray(fn(*z, *a, *e), dtype=float)

        return run

    def prolonged(self, order: int, bases: Sequence, time=None) -> "GroupAction":
        """Action on jets of ``bases`` up to ``order`` by total differentiation.

        ``y~^(k) = D_t y~^(k-1) / D_t t~`` with parameters held constant.
        """
        if order == 0:
            return self
        t = _sym(time) if time is not None else (self.time or symbol("t"))
        bases = tuple(_sym(b) for b in bases)
        deps = tuple(c for c in self.mapping if c != t and split_jet(c)[1] == 0)
        frame = (t,) + tuple(dict.fromkeys(deps + bases))
        t_new = self.component(t)
        dT = total_derivative(t_new, frame)
        mapping = dict(self.mapping)
        for b in bases:
            prev = self.component(b)
            for k in range(1, order + 1):
                cur = total_derivative(prev, frame)
                if dT != 1:
                    cur = cur / dT
                cur = simplify(cur)
                mapping[jet(b, k)] = cur
                prev = cur
        return GroupAction(f"{self.name}^({order})", self.params, mapping, self.multiplicative, self.law, t)

    def restrict(self, coords: Sequence) -> "GroupAction":
        coords = [_sym(c) for c in coords]
        return GroupAction(self.name, self.params, {c: self.component(c) for c in coords},
                           self.multiplicative & set(coords), self.law, self.time)

    def rename(self, mapping: Mapping) -> "GroupAction":
        """Same action written for renamed coordinates (e.g. reference copies)."""
        mp = {_sym(k): _sym(v) for k, v in mapping.items()}
        return GroupAction(
            self.name,
            self.params,
            {mp.get(c, c): substitute(e, mp) for c, e in self.mapping.items()},
            frozenset(mp.get(c, c) for c in self.multiplicative),
            self.law,
            self.time,
        )

    def union(self, other: "GroupAction") -> "GroupAction":
        """Diagonal action on the disjoint union of both coordinate sets."""
        if self.params != other.params:
            raise ActionError("diagonal action needs identical parameters")
        clash = set(self.mapping) & set(other.mapping)
        if clash:
            raise ActionError(f"overlapping coordinates {sorted(c.name for c in clash)}")
        return GroupAction(self.name, self.params, {**self.mapping, **other.mapping},
                           self.multiplicative | other.multiplicative, self.law, self.time or other.time)


def generator_from_action(g: GroupAction, k: int) -> VectorField:
    """Infinitesimal generator ``d/da^k phi|_{a=0}`` (``k`` is 1-based)."""
    if not 1 <= k <= g.r:
        raise IndexError(f"parameter index {k} out of range 1..{g.r}")
    a = g.params[k - 1]
    at0 = {p: 0 for p in g.params}
    coeffs = [simplify(substitute(sp.diff(e, a), at0)) for e in g.mapping.values()]
    return VectorField(g.coords, tuple(coeffs))


def generators(g: GroupAction) -> list[VectorField]:
    return [generator_from_action(g, k) for k in range(1, g.r + 1)]


# ---------------------------------------------------------------------------
# symmetry condition


def _on_sys(sys: ControlSystem, v: VectorField) -> VectorField:
    try:
        return v.extend(sys.coords)
    except CoordinateMismatch as exc:
        raise CoordinateMismatch(f"generator not over the coordinates of {sys.name}: {exc}") from None


def symmetry_residual(sys: ControlSystem, v: VectorField, canonical: bool = True) -> list[sp.Expr]:
    """``pr v (x'^i - f^i)`` with ``x' := f`` substituted, one entry per state.

    ``canonical=False`` skips simplification of the entries.
    """
    v = _on_sys(sys, v)
    pr = prolong(v, sys) if canonical else None
    out = []
    for x, f in zip(sys.states, sys.dynamics):
        if canonical:
            zeta = pr.zeta[jet(x)]
        else:
            xi = v[sys.time]
            zeta = total_derivative(v[x], sys) - jet(x) * total_derivative(xi, sys)
        r = sys.on_shell(zeta - v(f))
        out.append(simplify(r) if canonical else r)
    return out


def check_symmetry(sys: ControlSystem, v: VectorField, symbolic: bool = True) -> Verdict:
    """Verdict on :func:`symmetry_residual`; ``symbolic=False`` decides by sampling only."""
    return Verdict.from_residuals(symmetry_residual(sys, v, canonical=symbolic), symbolic=symbolic)


@dataclass
class DeterminingEquations:
    """The split symmetry conditions.

    ``input_block[i][j]`` is the coefficient of ``u'^j`` in the ``i``-th
    condition (``eta^i_{u^j} - f^i xi_{u^j}``); ``base_block[i]`` is the
    remainder ``eta^i_t + eta^i_x f - f^i (xi_t + xi_x f) - f^i_x eta - f^i_u phi``.
    """

    input_block: list[list[sp.Expr]]
    base_block: list[sp.Expr]

    def equations(self) -> list[sp.Expr]:
        flat = [e for row in self.input_block for e in row] + list(self.base_block)
        return [e for e in flat if e != 0]


def _tidy(e: sp.Expr) -> sp.Expr:
    e = sp.expand(e)
    if e.atoms(sp.Derivative) or e.atoms(sp.core.function.AppliedUndef):
        return sp.collect(e, sorted(e.atoms(sp.Derivative), key=str), evaluate=True)
    return simplify(e)


def determining_equations(sys: ControlSystem, ansatz: VectorField) -> DeterminingEquations:
    """Split ``pr v (F) = 0`` on the system by powers of the input derivatives.

    The ansatz coefficients may be undefined functions such as ``xi(t)``;
    their partial derivatives stay formal.
    """
    v = _on_sys(sys, ansatz)
    pr = prolong(VectorField(v.coords, v.coeffs), sys)
    ujets = sys.input_jets()
    inputs_block = []
    base = []
    for x, f in zip(sys.states, sys.dynamics):
        raw = sp.expand(sys.on_shell(pr.zeta[jet(x)] - v(f)))
        row = [_tidy(raw.coeff(du)) for du in ujets]
        rest = raw.subs({du: 0 for du in ujets})
        inputs_block.append(row)
        base.append(_tidy(rest))
    return DeterminingEquations(inputs_block, base)


def ansatz_field(sys: ControlSystem, deps: Mapping | None = None, names: Mapping | None = None) -> VectorField:
    """Generic generator with undefined coefficient functions.

    ``deps`` maps a coordinate to the arguments of its coefficient (default:
    all of ``(t, x, u)``).  Coefficient names default to ``xi`` for time,
    ``eta_<x>`` for states and ``phi_<u>`` for inputs.
    """
    deps = {_sym(k): tuple(_sym(a) for a in v) for k, v in (deps or {}).items()}
    names = {_sym(k): v for k, v in (names or {}).items()}
    coeffs = []
    for c in sys.coords:
        if c == sys.time:
            nm = "xi"
        elif c in sys.states:
            nm = f"eta_{c.name}"
        else:
            nm = f"phi_{c.name}"
        nm = names.get(c, nm)
        args = deps.get(c, sys.coords)
        coeffs.append(sp.Function(nm, real=True)(*args) if args else sp.Function(nm, real=True)(sys.time))
    return VectorField(sys.coords, tuple(coeffs))


def instantiate(eqs: DeterminingEquations, solution: Mapping) -> list[sp.Expr]:
    """Substitute concrete coefficient functions into the determining equations.

    ``solution`` maps an undefined function (class or name) to a lambda-like
    callable or a ``sp.Lambda``.
    """
    repl = {}
    for k, v in solution.items():
        f = sp.Function(k, real=True) if isinstance(k, str) else k
        repl[f] = v
    out = []
    for e in eqs.equations():
        out.append(simplify(e.replace(lambda x: isinstance(x, sp.core.function.AppliedUndef) and x.func in repl,
                                      lambda x: repl[x.func](*x.args)).doit()))
    return out


# ---------------------------------------------------------------------------
# structure constants


@dataclass
class StructureConstants:
    """``table[i][j][k] = c_{ij}^k`` (0-based storage) with a closure verdict."""

    table: list[list[list[sp.Rational]]]
    closed: bool
    notes: list[str] = field(default_factory=list)

    def c(self, i: int, j: int, k: int) -> sp.Rational:
        """1-based accessor matching the usual ``c_{ij}^k`` notation."""
        return self.table[i - 1][j - 1][k - 1]

    def nonzero(self) -> dict[tuple[int, int, int], sp.Rational]:
        r = len(self.table)
        return {(i + 1, j + 1, k + 1): self.table[i][j][k]
                for i in range(r) for j in range(r) for k in range(r)
                if i < j and self.table[i][j][k] != 0}


def _sample_fields(fields: Sequence[VectorField], coords, n_points: int, rng) -> np.ndarray:
    """Stack of coefficient vectors: shape (n_points * len(coords), len(fields))."""
    syms = sorted(set(coords).union(*(set().union(*(c.free_symbols for c in v.coeffs)) for v in fields)),
                  key=lambda s: s.name)
    fns = [compile_exprs([v[c] for c in coords], syms) for v in fields]
    rows = []
    got = 0
    tries = 0
    while got < n_points and tries < 20 * n_points:
        tries += 1
        pt = rng.uniform(-tol().sample_box, tol().sample_box, size=len(syms))
        try:
            block = np.array([np.asarray(fn(*pt), dtype=float) for fn in fns]).T
        except Exception:
            continue
        if not np.all(np.isfinite(block)):
            continue
        rows.append(block)
        got += 1
    if got < n_points:
        raise RankDeficiency("could not find enough regular sample points")
    return np.vstack(rows)


def structure_constants(gens: Sequence[VectorField], rng: np.random.Generator | None = None,
                        n_points: int = 8) -> StructureConstants:
    """Constants with ``[v_i, v_j] = sum_k c_{ij}^k v_k``.

    Least squares over the stacked samples gives candidates; each is rounded
    to a small-denominator rational and confirmed symbolically.  Brackets
    outside the constant-coefficient span set ``closed`` to False.
    """
    gens = list(gens)
    r = len(gens)
    zero = sp.S.Zero
    table = [[[zero] * r for _ in range(r)] for _ in range(r)]
    if r == 0:
        return StructureConstants(table, True)
    coords = gens[0].coords
    for g in gens[1:]:
        if set(g.coords) != set(coords):
            raise CoordinateMismatch("generators over different coordinates")
    gens = [g.extend(coords) for g in gens]
    rng = np.random.default_rng(2024) if rng is None else rng
    M = _sample_fields(gens, coords, n_points, rng)
    if np.linalg.matrix_rank(M, tol=tol().num_tol) < r:
        raise RankDeficiency("generators are linearly dependent")
    closed = True
    notes = []
    for i in range(r):
        for j in range(i + 1, r):
            br = lie_bracket(gens[i], gens[j])
            if all(c == 0 for c in br.coeffs):
                continue
            Mb = _sample_fields(gens + [br], coords, n_points, np.random.default_rng(int(rng.integers(1 << 30))))
            A, y = Mb[:, :r], Mb[:, r]
            c, *_ = np.linalg.lstsq(A, y, rcond=None)
            fit = np.linalg.norm(A @ c - y) <= tol().num_tol * max(1.0, np.linalg.norm(y))
            exact = [rationalize(float(x)) for x in c] if fit else None
            if not fit or any(q is None for q in exact):
                closed = False
                notes.append(f"[v{i + 1}, v{j + 1}] is not a constant combination of the generators")
                continue
            resid = br - sum((gens[k].scale(exact[k]) for k in range(r)), VectorField(coords, (0,) * len(coords)))
            if not resid.is_zero():
                closed = False
                notes.append(f"[v{i + 1}, v{j + 1}] failed symbolic confirmation")
                continue
            for k in range(r):
                table[i][j][k] = exact[k]
                table[j][i][k] = -exact[k]
    return StructureConstants(table, closed, notes)


# ---------------------------------------------------------------------------
# composition


def check_composition(g: GroupAction, rng: np.random.Generator | None = None, pairs: int = 5,
                      scale: float = 0.5, extra: Mapping | None = None) -> Verdict:
    """Numeric local-group check ``phi_b(phi_a(z)) = phi_c(z)``.

    ``c`` comes from ``g.law`` when present, otherwise from a least-squares
    fit over several points ``z`` at once.
    """
    from scipy.optimize import least_squares

    rng = np.random.default_rng(7) if rng is None else rng
    coords = list(g.coords)
    consts = sorted(g.constants(), key=lambda s: s.name)
    cvals = [float((extra or {}).get(s, (extra or {}).get(s.name, 1.0))) for s in consts]
    run = g.numeric(coords, consts)
    worst = 0.0
    for _ in range(pairs):
        a = rng.uniform(-scale, scale, g.r)
        b = rng.uniform(-scale, scale, g.r)
        zs = [rng.uniform(0.5, 1.5, len(coords)) for _ in range(3)]
        targets = [run(run(z, a, cvals), b, cvals) for z in zs]
        if g.law is not None:
            c = np.asarray(g.law(a, b), dtype=float)
        else:
            sol = least_squares(lambda c: np.concatenate([run(z, c, cvals) - t for z, t in zip(zs, targets)]),
                                a + b, xtol=1e-15, ftol=1e-15, gtol=1e-15)
            c = sol.x
        err = max(float(np.max(np.abs(run(z, c, cvals) - t))) for z, t in zip(zs, targets))
        worst = max(worst, err)
    ok = worst < tol().num_tol
    return Verdict(ok, [worst], [], f"max composition defect {worst:.3e}")


# ---------------------------------------------------------------------------
# named composition laws (referenced by name from system files)


def additive_law(a, b):
    """Parameters compose by addition (abelian translation-like groups)."""
    return [x + y for x, y in zip(a, b)]


def se2_law(a, b):
    """Composition for ``z -> R(a1) z + (a2, a3)``: first ``a``, then ``b``."""
    c, s = math.cos(b[0]), math.sin(b[0])
    return [a[0] + b[0], c * a[1] - s * a[2] + b[1], s * a[1] + c * a[2] + b[2]]


LAWS: dict[str, Callable] = {"additive": additive_law, "se2": se2_law}


def law_name(law) -> str | None:
    for k, v in LAWS.items():
        if v is law:
            return k
    return None
