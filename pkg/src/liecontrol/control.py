"""Invariant feedback design.

Vector relative degree, input-output linearizing feedback with a prescribed
linear error dynamics, equivariance of tracking errors, and the controlled
symmetry of the bioreactor family under a kinetic change.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from .expr import (
    EvalError,
    as_expr,
    compile_exprs,
    is_zero,
    simplify,
    split_jet,
    substitute,
    symbol,
    tol,
)
from .frames import FrameError, MovingFrame, reference_symbol, solve_frame
from .geometry import Verdict, total_derivative
from .model import ControlSystem, JetCoordinates
from .symmetry import GroupAction, additive_law


def _sym(s):
    return symbol(s) if isinstance(s, str) else s


# ---------------------------------------------------------------------------
# relative degree


@dataclass
class RelativeDegree:
    """Per-channel relative degrees and decoupling matrix.

    ``failure`` is None on success, otherwise a short reason; the object is
    falsy when the computation failed.
    """

    degrees: tuple[int, ...]
    matrix: sp.Matrix | None
    failure: str | None = None

    def __bool__(self):
        return self.failure is None

    @property
    def total(self) -> int:
        return sum(self.degrees)


def lie_derivative(sys: ControlSystem, e) -> sp.Expr:
    """``L_f e = sum_i f^i de/dx^i`` with inputs held as parameters."""
    e = as_expr(e)
    return sp.Add(*[f * sp.diff(e, x) for x, f in zip(sys.states, sys.dynamics)])


def _random_binding(syms, rng, low=0.5, high=1.5) -> dict:
    return {s: float(rng.uniform(low, high)) for s in syms}


def vector_relative_degree(sys: ControlSystem, h: Sequence, rng=None, samples: int = 10) -> RelativeDegree:
    """Smallest ``k`` with ``d(L_f^k h^i)/du != 0`` per channel, plus the
    decoupling matrix.  Generic regularity is decided by numeric rank at
    random points."""
    rng = np.random.default_rng(5) if rng is None else rng
    h = [as_expr(e) for e in h]
    degrees = []
    rows = []
    for hi in h:
        L = hi
        found = None
        for k in range(1, sys.n + 1):
            L = simplify(lie_derivative(sys, L))
            row = [simplify(sp.diff(L, u)) for u in sys.inputs]
            if not all(is_zero(c) for c in row):
                found = k
                rows.append(row)
                break
        if found is None:
            return RelativeDegree(tuple(degrees), None, f"output {hi} has no finite relative degree")
        degrees.append(found)
    A = sp.Matrix(rows)
    syms = sorted(A.free_symbols, key=lambda s: s.name)
    fn = compile_exprs(list(A), syms)
    ranks = []
    for _ in range(samples):
        M = np.asarray(fn(*[rng.uniform(0.5, 1.5) for _ in syms]), dtype=float).reshape(A.shape)
        ranks.append(np.linalg.matrix_rank(M, tol=tol().num_tol))
    if len(h) != sys.m or max(ranks) < len(h):
        return RelativeDegree(tuple(degrees), A, f"decoupling matrix is singular (generic rank {max(ranks)})")
    return RelativeDegree(tuple(degrees), A)


# ---------------------------------------------------------------------------
# error dynamics and feedback


@dataclass(frozen=True)
class ErrorDynamicsSpec:
    """``e_i^(r_i) + sum_j c_i^j e_i^(j) = 0`` per channel; ``coeffs[i] = (c_i^0, ..., c_i^{r_i-1})``."""

    coeffs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(tuple(c) for c in self.coeffs))
        for i, c in enumerate(self.coeffs):
            if not self.hurwitz(c):
                raise ValueError(f"channel {i + 1}: characteristic polynomial is not Hurwitz")

    @staticmethod
    def hurwitz(c: Sequence[float], margin: float = 1e-9) -> bool:
        poly = [1.0] + [float(x) for x in reversed(c)]
        roots = np.roots(poly)
        return bool(np.all(roots.real < -margin)) if len(roots) else True

    @classmethod
    def from_poles(cls, poles: Sequence[Sequence[float]]) -> "ErrorDynamicsSpec":
        out = []
        for ps in poles:
            poly = np.real(np.poly(ps))
            out.append(tuple(float(x) for x in reversed(poly[1:])))
        return cls(tuple(out))


@dataclass
class FeedbackFailure:
    reason: str
    relative_degree: RelativeDegree | None = None

    def __bool__(self):
        return False


def _exact(c: float) -> sp.Expr:
    """Float coefficient as the rational of its shortest decimal form."""
    return sp.Rational(repr(float(c)))


def _ref_frame(sys: ControlSystem, refs: Sequence[sp.Symbol]) -> JetCoordinates:
    return JetCoordinates(sys.time, sys.states + sys.inputs + tuple(refs))


def _dt(sys: ControlSystem, e, refs) -> sp.Expr:
    return sys.on_shell(total_derivative(sys.on_shell(e), _ref_frame(sys, refs)))


@dataclass
class FeedbackLaw:
    """``u = U(x, ref)`` valid where ``domain != 0``."""

    sys: ControlSystem
    law: dict
    domain: sp.Expr
    errors: tuple[sp.Expr, ...]
    spec: ErrorDynamicsSpec
    degrees: tuple[int, ...]
    reference: tuple[sp.Symbol, ...]
    outputs: tuple[sp.Symbol, ...] = ()

    def __bool__(self):
        return True

    def closed_loop_equations(self) -> list[sp.Expr]:
        out = []
        for e, c, r in zip(self.errors, self.spec.coeffs, self.degrees):
            ders = [e]
            for _ in range(r):
                ders.append(_dt(self.sys, ders[-1], self.reference))
            out.append(ders[r] + sum(_exact(cj) * dj for cj, dj in zip(c, ders)))
        return out

    def verify(self) -> Verdict:
        """Closed-loop error dynamics hold identically after substituting ``U``."""
        return Verdict.from_residuals([substitute(E, self.law) for E in self.closed_loop_equations()])

    def numeric(self, overrides: Mapping | None = None):
        """``(t, x, ref_values) -> u`` with parameters bound; ``ref_values`` is a dict by symbol."""
        vals = self.sys.param_values(overrides)
        args = list(self.sys.coords[:1 + self.sys.n]) + list(self.reference)
        fn = compile_exprs([substitute(self.law[u], vals) for u in self.sys.inputs], args)

        def call(t, x, ref):
            return np.asarray(fn(t, *x, *[ref[r] for r in self.reference]), dtype=float)

        return call


def io_linearizing_feedback(sys: ControlSystem, h: Sequence, spec: ErrorDynamicsSpec,
                            error: Sequence | None = None, outputs: Sequence[str] | None = None):
    """Feedback imposing ``spec`` on each channel's error.

    ``error`` may replace the naive ``y - y_d`` by any expressions in the
    output symbols and reference jets ``<y>_d``, ``<y>_d'``, ...  Returns a
    :class:`FeedbackFailure` when the relative degree is not well defined or
    does not add up to the state dimension.
    """
    h = [as_expr(e) for e in h]
    rd = vector_relative_degree(sys, h)
    if not rd:
        return FeedbackFailure(rd.failure, rd)
    if rd.total != sys.n:
        return FeedbackFailure(f"relative degrees sum to {rd.total} < n = {sys.n}", rd)
    if len(spec.coeffs) != len(h) or any(len(c) != r for c, r in zip(spec.coeffs, rd.degrees)):
        return FeedbackFailure("error-dynamics orders do not match the relative degrees", rd)
    if outputs is None:
        outputs = [e.name if isinstance(e, sp.Symbol) else f"y{i + 1}" for i, e in enumerate(h)]
    ys = tuple(symbol(n) for n in outputs)
    yd = [reference_symbol(y) for y in ys]
    errs = [as_expr(e) for e in error] if error is not None else [y - d for y, d in zip(ys, yd)]
    to_x = {y: e for y, e in zip(ys, h) if y != e}
    errs = [substitute(e, to_x) for e in errs]
    E = []
    for e, c, r in zip(errs, spec.coeffs, rd.degrees):
        ders = [e]
        for _ in range(r):
            ders.append(_dt(sys, ders[-1], yd))
        E.append(sp.expand(ders[r] + sum(_exact(cj) * dj for cj, dj in zip(c, ders))))
    A = sp.Matrix([[sp.diff(Ei, u) for u in sys.inputs] for Ei in E])
    b = sp.Matrix([substitute(Ei, {u: 0 for u in sys.inputs}) for Ei in E])
    if any(a.has(*sys.inputs) for a in A):
        return FeedbackFailure("error dynamics are not affine in the inputs", rd)
    sol = A.LUsolve(-b)
    law = {u: simplify(s) for u, s in zip(sys.inputs, sol)}
    used = sorted({s for v in law.values() for s in v.free_symbols if split_jet(s)[0] in yd}, key=lambda s: s.name)
    fb = FeedbackLaw(sys, law, simplify(A.det()), tuple(errs), spec, rd.degrees, tuple(used), ys)
    return fb


def check_error_equivariance(error: Sequence, action: GroupAction, outputs: Sequence,
                             only: Sequence | None = None) -> Verdict:
    """``e(g.y, g.ref) - e(y, ref)`` vanishes identically in the parameters.

    The action on ``y`` is copied to the reference and prolonged to every
    reference jet present.  ``only`` restricts to a subgroup by setting the
    other parameters to 0.
    """
    errs = [as_expr(e) for e in error]
    ys = [_sym(y) for y in outputs]
    rmap = {y: reference_symbol(y) for y in ys}
    order = 0
    for e in errs:
        for s in e.free_symbols:
            base, k = split_jet(s)
            if base in rmap.values():
                order = max(order, k)
    ref_act = action.restrict(ys).rename(rmap).prolonged(order, list(rmap.values()))
    act = action.restrict(ys).union(ref_act)
    fix = {}
    if only is not None:
        keep = {_sym(a) for a in only}
        fix = {a: 0 for a in action.params if a not in keep}
    mapping = {c: substitute(v, fix) for c, v in act.mapping.items()}
    residuals = [substitute(e, mapping) - e for e in errs]
    return Verdict.from_residuals(residuals)


# ---------------------------------------------------------------------------
# bioreactor family


BIOREACTOR_DEFAULTS = {"alpha": 1, "beta": 1, "nu_m": 1, "mu_m": 1, "K": 1, "K_S": 1, "K_I": 1}


@dataclass
class BioreactorFamily:
    """Predator-prey chemostat with Haldane inhibition constant ``K_I``.

    ``p' = -D p + nu(b) p``, ``b' = -D b + mu(s) b - alpha nu(b) p``,
    ``s' = D (s_F - s) - beta mu(s) b`` with
    ``nu(b; k) = nu_m b / (b + K_S + k b^2)`` and ``mu(s) = mu_m s / (K + s)``.
    """

    defaults: dict = field(default_factory=lambda: dict(BIOREACTOR_DEFAULTS))

    def __post_init__(self):
        S = symbol
        self.p, self.b, self.s = S("p"), S("b"), S("s")
        self.D, self.sF = S("D"), S("s_F")
        self.KI = S("K_I")
        self.a = S("a")
        self.alpha, self.beta = S("alpha"), S("beta")
        self.nu_m, self.mu_m, self.K, self.K_S = S("nu_m"), S("mu_m"), S("K"), S("K_S")

    def nu(self, b, k) -> sp.Expr:
        return self.nu_m * b / (b + self.K_S + k * b ** 2)

    def mu(self, s) -> sp.Expr:
        return self.mu_m * s / (self.K + s)

    def mu_inv(self, w) -> sp.Expr:
        return self.K * w / (self.mu_m - w)

    @property
    def nu_H(self) -> sp.Expr:
        return self.nu(self.b, self.KI)

    @property
    def nu_tilde(self) -> sp.Expr:
        return self.nu(self.b, self.KI + self.a)

    @property
    def nu_M(self) -> sp.Expr:
        return self.nu(self.b, 0)

    def rhs(self, p, b, s, D, sF, k) -> list[sp.Expr]:
        nu = self.nu(b, k)
        return [-D * p + nu * p,
                -D * b + self.mu(s) * b - self.alpha * nu * p,
                D * (sF - s) - self.beta * self.mu(s) * b]

    def param_defaults(self, with_KI: bool = True) -> dict:
        out = {symbol(k): v for k, v in self.defaults.items()}
        if not with_KI:
            out.pop(self.KI)
        return out

    def system(self, kinetic: str = "haldane", name: str | None = None) -> ControlSystem:
        if kinetic == "haldane":
            k, params = self.KI, self.param_defaults()
        elif kinetic in ("mm", "michaelis-menten"):
            k, params = sp.S.Zero, self.param_defaults(False)
        else:
            raise ValueError(f"unknown kinetic {kinetic!r}")
        return ControlSystem(name or "bioreactor", (self.p, self.b, self.s), (self.D, self.sF),
                             tuple(self.rhs(self.p, self.b, self.s, self.D, self.sF, k)), params)

    def augmented(self) -> ControlSystem:
        """``K_I`` promoted to a constant state."""
        f = self.rhs(self.p, self.b, self.s, self.D, self.sF, self.KI)
        return ControlSystem("bioreactor_augmented", (self.KI, self.p, self.b, self.s), (self.D, self.sF),
                             (sp.S.Zero, *f), self.param_defaults(False))


def bioreactor_family(**defaults) -> BioreactorFamily:
    return BioreactorFamily({**BIOREACTOR_DEFAULTS, **defaults})


@dataclass
class ControlledSymmetry:
    """Induced maps ``D~ = delta``, ``s~ = sigma``, ``s_F~ = sigma_F`` for ``K_I -> K_I + a``."""

    family: BioreactorFamily
    delta: sp.Expr
    sigma: sp.Expr
    sigma_F: sp.Expr
    verdict: Verdict

    def action(self) -> GroupAction:
        """The state part as a group action on ``(K_I, p, b, s)``."""
        fam = self.family
        return GroupAction("kinetic_shift", (fam.a,), {fam.KI: fam.KI + fam.a, fam.p: fam.p, fam.b: fam.b,
                                                        fam.s: self.sigma},
                           law=additive_law)

    def _compiled(self, values: Mapping | None = None):
        key = tuple(sorted((str(k), float(v)) for k, v in (values or {}).items()))
        cache = self.__dict__.setdefault("_cache", {})
        if key in cache:
            return cache[key]
        fam = self.family
        vals = {**fam.param_defaults(False), **{_sym(k): v for k, v in (values or {}).items() if str(k) != "K_I"}}
        X = [fam.KI, fam.p, fam.b, fam.s]
        args = X + [fam.D, fam.sF, fam.a]
        f = [sp.S.Zero] + fam.rhs(fam.p, fam.b, fam.s, fam.D, fam.sF, fam.KI)
        phi = [fam.KI + fam.a, fam.p, fam.b, self.sigma]
        J = [[sp.diff(c, x) for x in X] for c in phi]
        lhs = [sum(J[i][j] * f[j] for j in range(4)) for i in range(4)]
        img = dict(zip(X, phi))
        img.update({fam.D: self.delta, fam.sF: self.sigma_F})
        rhs = [substitute(c, img) for c in f]
        exprs = [substitute(e, vals) for e in lhs + rhs + phi + [self.delta, self.sigma_F]]
        fn = compile_exprs(exprs, args)
        cache[key] = fn
        return fn

    def equivariance_residual(self, x: Sequence[float], u: Sequence[float], a: float,
                              values: Mapping | None = None) -> np.ndarray:
        """``dphi/dx f(x, u) - f(phi(x), psi(x, u))`` on ``(K_I, p, b, s)``."""
        out = np.asarray(self._compiled(values)(*x, *u, a), dtype=float)
        return out[:4] - out[4:8]

    def transform(self, x, u, a, values=None):
        out = np.asarray(self._compiled(values)(*x, *u, a), dtype=float)
        return out[8:12], out[12:14]

    def check_equivariance(self, samples: int = 50, rng=None, values: Mapping | None = None) -> Verdict:
        """Residual at random states and ``a`` in ``[-K_I, 0]``; points with ``mu`` not invertible are redrawn."""
        rng = np.random.default_rng(11) if rng is None else rng
        KI = float({**self.family.defaults, **{str(k): v for k, v in (values or {}).items()}}["K_I"])
        worst = 0.0
        got = 0
        skipped = 0
        while got < samples:
            x = [KI, *rng.uniform(0.1, 2.0, 3)]
            u = [float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.0, 10.0))]
            a = float(rng.uniform(-KI, 0.0))
            try:
                r = self.equivariance_residual(x, u, a, values)
            except EvalError:
                r = None
            img, _ = self.transform(x, u, a, values) if r is not None else (None, None)
            if r is None or not np.all(np.isfinite(r)) or img is None or not (img[3] > 0):
                skipped += 1
                if skipped > 100 * samples:
                    break
                continue
            got += 1
            worst = max(worst, float(np.max(np.abs(r))))
        ok = got == samples and worst < tol().num_tol
        return Verdict(ok, [worst], [], f"max equivariance residual {worst:.3e} at {got} samples ({skipped} redrawn)")


def _linear_solve(eq: sp.Expr, var: sp.Symbol) -> sp.Expr:
    """Root of an equation affine in ``var``."""
    B = sp.diff(eq, var)
    if B.has(var):
        raise ValueError(f"equation is not affine in {var}")
    return -eq.subs(var, 0) / B


def derive_controlled_symmetry(fam: BioreactorFamily | None = None) -> ControlledSymmetry:
    """Solve the three determining equations of the kinetic shift in sequence.

    The shift ``K_I -> K_I + a`` leaves ``p`` and ``b`` fixed; the first
    equation gives ``delta`` (linear in ``D~``), the second ``sigma`` through
    ``mu^{-1}``, the third ``sigma_F`` (linear in ``s_F~``).
    """
    fam = fam or bioreactor_family()
    Dt, w, sFt = sp.Dummy("Dt"), sp.Dummy("w"), sp.Dummy("sFt")
    p, b, s = fam.p, fam.b, fam.s
    f = fam.rhs(p, b, s, fam.D, fam.sF, fam.KI)
    nu_t = fam.nu_tilde
    delta = simplify(_linear_solve(f[0] - (-Dt * p + nu_t * p), Dt))
    wsol = _linear_solve(f[1] - (-delta * b + w * b - fam.alpha * nu_t * p), w)
    sigma = simplify(fam.mu_inv(wsol))
    X = [fam.KI, p, b, s]
    fx = [sp.S.Zero] + f
    ds = sum(sp.diff(sigma, x) * fx[i] for i, x in enumerate(X))
    sigma_F = _linear_solve(ds - (delta * (sFt - sigma) - fam.beta * fam.mu(sigma) * b), sFt)
    # re-verify all three determining equations
    ft = fam.rhs(p, b, sigma, delta, sigma_F, fam.KI + fam.a)
    res = [f[0] - ft[0], f[1] - ft[1], ds - ft[2]]
    tests = [is_zero(r) for r in res]
    verdict = Verdict(all(tests), res, tests, "determining equations of the kinetic shift")
    return ControlledSymmetry(fam, delta, sigma, sigma_F, verdict)


# ---------------------------------------------------------------------------
# invariantizing feedback


@dataclass
class InvariantizingFeedback:
    """New input ``v = V(x, u) = (delta, sigma_F)`` at ``a = gamma(x)``.

    ``gamma`` normalizes ``s~ = c``; ``U(x, v)`` inverts ``V`` in closed form
    (``delta`` is affine in ``D``, ``sigma_F`` affine in ``s_F``).
    """

    symmetry: ControlledSymmetry
    frame: MovingFrame
    c: float
    values: dict

    def _fns(self):
        """Compiled ``(delta, sigma_F)``, the ``D``-shift and the affine pieces of ``sigma_F``."""
        if "_fns_" not in self.__dict__:
            fam = self.symmetry.family
            vals = {**fam.param_defaults(False), **{_sym(k): v for k, v in self.values.items() if k != "K_I"}}
            X = [fam.KI, fam.p, fam.b, fam.s]
            delta, sF = self.symmetry.delta, self.symmetry.sigma_F
            shift = simplify(delta - fam.D)
            A = substitute(sF, {fam.sF: 0})
            B = sp.diff(sF, fam.sF)
            bind = lambda es: [substitute(e, vals) for e in es]  # noqa: E731
            self.__dict__["_fns_"] = (
                compile_exprs(bind([delta, sF]), X + [fam.D, fam.sF, fam.a]),
                compile_exprs(bind([shift]), X + [fam.a]),
                compile_exprs(bind([A, B]), X + [fam.D, fam.a]),
            )
        return self.__dict__["_fns_"]

    def gamma(self, x: Sequence[float], warm=None) -> float:
        """Frame parameter by scalar Newton, warm-started when ``warm`` is given."""
        if "_newton_" not in self.__dict__:
            Ffn, Jfn = self.frame._newton_fns()
            self.__dict__["_newton_"] = (Ffn, Jfn, self.frame._const_values())
        Ffn, Jfn, cv = self.__dict__["_newton_"]
        a0 = 0.0 if warm is None else float(np.ravel(warm)[0])
        return MovingFrame._newton_scalar(Ffn, Jfn, list(x), cv, a0, tol().newton_tol)

    def V(self, x, u, a=None) -> np.ndarray:
        a = self.gamma(x) if a is None else a
        return np.asarray(self._fns()[0](*x, *u, a), dtype=float)

    def U(self, x, v, a=None) -> np.ndarray:
        a = self.gamma(x) if a is None else a
        _, fshift, fab = self._fns()
        D = v[0] - fshift(*x, a)[0]
        A, B = fab(*x, D, a)
        if abs(B) < 1e-12:
            raise FrameError("invariantizing feedback not invertible in s_F", x)
        return np.array([D, (v[1] - A) / B], dtype=float)

    def invariants(self, x, a=None) -> np.ndarray:
        """``(K_I + gamma, p, b)``; ``s~ = c`` by construction."""
        a = self.gamma(x) if a is None else a
        return np.array([x[0] + a, x[1], x[2]], dtype=float)

    def check_regularity(self, samples: int = 10, rng=None) -> Verdict:
        """``dV/du`` invertible at random states near the anchor."""
        rng = np.random.default_rng(3) if rng is None else rng
        dets = []
        for _ in range(samples):
            x = [float(self.values.get("K_I", 1.0)), *rng.uniform(0.3, 1.5, 3)]
            u = [float(rng.uniform(0.2, 1.0)), float(rng.uniform(0.5, 5.0))]
            a = self.gamma(x)
            h = 1e-6
            base = self.V(x, u, a)
            J = np.array([(self.V(x, [u[0] + h, u[1]], a) - base) / h,
                          (self.V(x, [u[0], u[1] + h], a) - base) / h]).T
            dets.append(float(np.linalg.det(J)))
        ok = all(abs(d) > 1e-8 for d in dets)
        return Verdict(ok, dets, [], "regular" if ok else "dV/du singular")

    def check_orbit_invariance(self, samples: int = 20, rng=None) -> Verdict:
        """``V(g.(x, u)) = V(x, u)`` along orbits of the kinetic shift."""
        rng = np.random.default_rng(4) if rng is None else rng
        worst = 0.0
        got = 0
        while got < samples:
            x = [float(self.values.get("K_I", 1.0)), *rng.uniform(0.3, 1.5, 3)]
            u = [float(rng.uniform(0.2, 1.0)), float(rng.uniform(0.5, 5.0))]
            g = float(rng.uniform(-0.5, 0.0))
            gx, gu = self.symmetry.transform(x, u, g, self.values)
            if not (np.all(np.isfinite(gx)) and gx[3] > 0):
                continue
            try:
                a0 = self.gamma(x)
                v0 = self.V(x, u, a0)
                v1 = self.V(gx, gu, self.gamma(gx, warm=[a0 - g]))
            except (FrameError, EvalError):
                continue
            got += 1
            worst = max(worst, float(np.max(np.abs(v0 - v1))))
        return Verdict(worst < tol().num_tol, [worst], [], f"max orbit defect {worst:.3e}")


def invariantizing_feedback(sym: ControlledSymmetry, c: float = 1.0, values: Mapping | None = None,
                            anchor: Mapping | None = None) -> InvariantizingFeedback:
    """Numeric frame on ``s~ = c`` and the induced regular feedback.

    Strict monotonicity of ``sigma`` in ``a`` at the anchor is required.
    """
    fam = sym.family
    vals = {str(k): float(v) for k, v in {**fam.defaults, **(values or {})}.items()}
    action = sym.action()
    extra = {k: v for k, v in vals.items() if k != "K_I"}
    anchor = anchor or {"K_I": vals["K_I"], "p": 0.5, "b": 0.5, "s": c}
    ds_da = substitute(sp.diff(sym.sigma, fam.a), {fam.a: 0, **{symbol(k): v for k, v in extra.items()},
                                                   **{symbol(k): v for k, v in anchor.items()}})
    if abs(float(ds_da)) < tol().num_tol:
        raise FrameError("sigma is not monotone in the group parameter at the anchor", anchor)
    frame = solve_frame(action, [fam.s], [c], mode="numeric", anchor=anchor, extra=extra, name="s_norm")
    return InvariantizingFeedback(sym, frame, float(c), vals)


@dataclass
class SetPointStabilizer:
    """Set-point feedback in the invariant input ``v``.

    ``v1 = v1* - k . ((p, b) - (p*, b*))`` and ``v2 = c + beta mu(c) b / v1``;
    the latter keeps the normalized substrate at ``c`` so the frame
    parameter stays constant.
    """

    c: float
    p_star: float
    b_star: float
    v1_star: float
    gain: np.ndarray
    values: dict

    def __call__(self, I: Sequence[float]) -> np.ndarray:
        _, p, b = I
        v1 = self.v1_star - float(self.gain @ np.array([p - self.p_star, b - self.b_star]))
        mu_c = self.values["mu_m"] * self.c / (self.values["K"] + self.c)
        return np.array([v1, self.c + self.values["beta"] * mu_c * b / v1])


def bioreactor_stabilizer(c: float = 1.0, b_star: float = 0.5, poles: Sequence[float] = (-1.0, -1.5),
                          values: Mapping | None = None) -> SetPointStabilizer:
    """Pole placement on the linearized invariant ``(p, b)`` dynamics."""
    from scipy.signal import place_poles

    vals = {k: float(v) for k, v in {**BIOREACTOR_DEFAULTS, **(values or {})}.items()}
    KI = vals["K_I"]
    nu = lambda b: vals["nu_m"] * b / (b + vals["K_S"] + KI * b * b)  # noqa: E731
    dnu = lambda b: vals["nu_m"] * (vals["K_S"] - KI * b * b) / (b + vals["K_S"] + KI * b * b) ** 2  # noqa: E731
    mu_c = vals["mu_m"] * c / (vals["K"] + c)
    v1 = nu(b_star)
    p_star = b_star * (mu_c - v1) / (vals["alpha"] * v1)
    if p_star <= 0:
        raise ValueError("set point has no positive predator equilibrium")
    A = np.array([[-v1 + nu(b_star), dnu(b_star) * p_star],
                  [-vals["alpha"] * nu(b_star), -v1 + mu_c - vals["alpha"] * dnu(b_star) * p_star]])
    B = np.array([[-p_star], [-b_star]])
    K = place_poles(A, B, list(poles)).gain_matrix
    # v1 = v1* + (-K) dx  ->  gain vector with the sign convention of __call__
    return SetPointStabilizer(c, p_star, b_star, v1, np.asarray(K).reshape(2), vals)
