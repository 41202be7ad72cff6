"""Moving frames: regularity and freeness, normalization, invariants,
invariant tracking errors and G-compatible outputs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg
import sympy as sp

from .expr import (
    EvalError,
    as_expr,
    compile_exprs,
    is_zero,
    jet,
    simplify,
    split_jet,
    substitute,
    symbol,
    to_text,
    tol,
)
from .geometry import Verdict, VectorField, lie_bracket
from .model import ControlSystem
from .symmetry import GroupAction, RankDeficiency


class FrameError(RuntimeError):
    """Normalization could not be solved (rank drop or Newton failure)."""

    def __init__(self, message: str, where=None):
        super().__init__(message)
        self.where = where


def _sym(s):
    return symbol(s) if isinstance(s, str) else s


# ---------------------------------------------------------------------------
# pattern solver


def _affine(e, a):
    """``(A, B)`` with ``e = A + B*a`` if ``e`` is affine in ``a``."""
    e = sp.expand(e)
    B = sp.diff(e, a)
    if B.has(a):
        return None
    return sp.expand(e - B * a), B


def _angle(e, a):
    """``(A, B)`` with ``e = A*cos(a) + B*sin(a)`` if possible."""
    c, s = sp.Dummy("c"), sp.Dummy("s")
    w = sp.expand(sp.expand_trig(e)).subs({sp.cos(a): c, sp.sin(a): s})
    if w.has(a):
        return None
    p = sp.Poly(w, c, s) if w.free_symbols & {c, s} else None
    if p is None or p.total_degree() != 1:
        return None
    if p.coeff_monomial(1) != 0:
        return None
    return p.coeff_monomial(c), p.coeff_monomial(s)


def _exp_affine(e, a):
    """``(A, B)`` with ``e = A + B*exp(a)``."""
    E = sp.Dummy("E", positive=True)
    w = sp.expand(sp.powsimp(sp.expand(e))).subs(sp.exp(a), E)
    if w.has(a):
        return None
    res = _affine(w, E)
    if res is None:
        return None
    return res


def solve_for_params(eqs: Sequence, unknowns: Sequence[sp.Symbol]) -> dict | None:
    """Closed-form solution of ``eqs = 0`` for ``unknowns`` by pattern rules.

    Rules, tried per equation and unknown: affine (coefficient free of every
    unknown), affine in ``exp(a)`` (giving a logarithm) and the single-angle
    form ``A cos a + B sin a = 0`` (giving ``atan2(-A, B)``).  Solved unknowns
    are substituted into the remaining equations.  Returns None when no rule
    makes progress.
    """
    eqs = [as_expr(e) for e in eqs]
    todo = list(unknowns)
    sol: dict[sp.Symbol, sp.Expr] = {}
    pending = list(range(len(eqs)))
    while todo:
        progress = False
        for i in list(pending):
            e = substitute(eqs[i], sol)
            present = [a for a in todo if e.has(a)]
            for a in present:
                others = [b for b in todo if b != a]
                val = None
                aff = _affine(e, a)
                if aff is not None and aff[1] != 0 and not (others and aff[1].has(*others)):
                    val = -aff[0] / aff[1]
                if val is None and len(present) == 1:
                    ex = _exp_affine(e, a)
                    if ex is not None and ex[1] != 0:
                        val = sp.log(-ex[0] / ex[1])
                if val is None and len(present) == 1:
                    ang = _angle(e, a)
                    if ang is not None and (ang[0] != 0 or ang[1] != 0):
                        val = sp.atan2(-ang[0], ang[1])
                if val is not None:
                    sol = {k: substitute(v, {a: val}) for k, v in sol.items()}
                    sol[a] = val
                    todo.remove(a)
                    pending.remove(i)
                    progress = True
                    break
            if progress:
                break
        if not progress:
            return None
    return {k: simplify(v) for k, v in sol.items()}


# ---------------------------------------------------------------------------
# rank tests


def _rng(rng):
    return np.random.default_rng(99) if rng is None else rng


def random_point(syms: Sequence[sp.Symbol], rng, low: float = 0.5, high: float = 1.5) -> dict:
    return {s: float(rng.uniform(low, high)) for s in syms}


def _param_jacobian(action: GroupAction, comps: Sequence[sp.Symbol]) -> sp.Matrix:
    at0 = {a: 0 for a in action.params}
    return sp.Matrix([[substitute(sp.diff(action.component(c), a), at0) for a in action.params] for c in comps])


def _eval_matrix(M: sp.Matrix, point: Mapping) -> np.ndarray:
    syms = sorted(M.free_symbols, key=lambda s: s.name)
    missing = [s for s in syms if s not in point]
    if missing:
        raise EvalError(f"anchor lacks values for {[s.name for s in missing]}")
    fn = compile_exprs(list(M), syms)
    return np.asarray(fn(*[point[s] for s in syms]), dtype=float).reshape(M.shape)


def _anchor(action: GroupAction, anchor: Mapping | None, rng) -> dict:
    syms = set(action.coords) | action.constants()
    pt = {} if anchor is None else {_sym(k): float(v) for k, v in anchor.items()}
    for s in sorted(syms - set(pt), key=lambda s: s.name):
        pt[s] = float(rng.uniform(0.5, 1.5))
    return pt


def freeness_order(action: GroupAction, anchor: Mapping | None = None, max_order: int = 4,
                   bases: Sequence | None = None, rng=None) -> int:
    """Smallest prolongation order whose parameter Jacobian has rank ``r``."""
    rng = _rng(rng)
    t = action.time or symbol("t")
    bases = [c for c in action.coords if c != t and split_jet(c)[1] == 0] if bases is None else bases
    for d in range(max_order + 1):
        pr = action.prolonged(d, bases, t)
        pt = _anchor(pr, anchor, rng)
        J = _eval_matrix(_param_jacobian(pr, pr.coords), pt)
        if np.linalg.matrix_rank(J, tol=tol().num_tol) == action.r:
            return d
    raise FrameError(f"action {action.name} is not locally free up to order {max_order}")


def pivot_components(action: GroupAction, anchor: Mapping, candidates: Sequence | None = None) -> list[sp.Symbol]:
    """Greedy rank-revealing choice of ``r`` components (QR with pivoting)."""
    cands = list(action.coords) if candidates is None else [_sym(c) for c in candidates]
    J = _eval_matrix(_param_jacobian(action, cands), anchor)
    _, R, piv = scipy.linalg.qr(J.T, pivoting=True)
    if min(J.shape) < action.r or abs(R[action.r - 1, action.r - 1]) <= tol().num_tol:
        raise RankDeficiency("no regular choice of normalization components")
    # keep the original coordinate order for readability
    chosen = sorted(piv[: action.r])
    return [cands[i] for i in chosen]


# ---------------------------------------------------------------------------
# moving frame


@dataclass
class MovingFrame:
    """Solution ``a = gamma(z)`` of the normalization equations."""

    action: GroupAction
    components: tuple[sp.Symbol, ...]
    constants: tuple[sp.Expr, ...]
    gamma: dict[sp.Symbol, sp.Expr] | None
    order: int = 0
    name: str = ""
    anchor: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def symbolic(self) -> bool:
        return self.gamma is not None

    @property
    def coords(self) -> tuple[sp.Symbol, ...]:
        return self.action.coords

    @property
    def free_components(self) -> tuple[sp.Symbol, ...]:
        return tuple(c for c in self.action.coords if c not in self.components)

    def _consts(self) -> list[sp.Symbol]:
        return sorted(self.action.constants(), key=lambda s: s.name)

    def _const_values(self, extra: Mapping | None = None) -> list[float]:
        vals = {**self.extra, **{_sym(k): v for k, v in (extra or {}).items()}}
        out = []
        for s in self._consts():
            if s not in vals:
                raise EvalError(f"no value for constant {s.name}")
            out.append(float(vals[s]))
        return out

    def gamma_at(self, point: Mapping, warm: Sequence[float] | None = None, extra: Mapping | None = None) -> np.ndarray:
        """Numeric ``gamma`` at a point; Newton from ``warm`` (or 0) when not closed-form."""
        point = {_sym(k): v for k, v in point.items()}
        coords = list(self.coords)
        z = [float(point[c]) for c in coords]
        cv = self._const_values(extra)
        if self.gamma is not None:
            fn = self._gamma_fn()
            try:
                g = np.asarray(fn(*z, *cv), dtype=float)
            except EvalError as exc:
                raise FrameError(f"frame undefined at {point}: {exc}", point) from exc
            if not np.all(np.isfinite(g)):
                raise FrameError(f"frame undefined at {point}", point)
            return g
        return self._newton(z, cv, warm)

    def _gamma_fn(self):
        if "_gfn" not in self.__dict__:
            self.__dict__["_gfn"] = compile_exprs([self.gamma[a] for a in self.action.params],
                                                  list(self.coords) + self._consts())
        return self.__dict__["_gfn"]

    def _newton_fns(self):
        if "_nfn" not in self.__dict__:
            args = list(self.coords) + list(self.action.params) + self._consts()
            F = [self.action.component(c) - k for c, k in zip(self.components, self.constants)]
            J = [sp.diff(f, a) for f in F for a in self.action.params]
            self.__dict__["_nfn"] = (compile_exprs(F, args), compile_exprs(J, args))
        return self.__dict__["_nfn"]

    def _newton(self, z, cv, warm):
        Ffn, Jfn = self._newton_fns()
        r = self.action.r
        ntol = tol().newton_tol
        if r == 1:
            return np.array([self._newton_scalar(Ffn, Jfn, z, cv, 0.0 if warm is None else float(warm[0]), ntol)])
        a = np.zeros(r) if warm is None else np.asarray(warm, dtype=float).copy()
        for _ in range(50):
            try:
                F = np.asarray(Ffn(*z, *a, *cv), dtype=float)
                J = np.asarray(Jfn(*z, *a, *cv), dtype=float).reshape(r, r)
            except EvalError as exc:
                raise FrameError(f"normalization undefined during Newton: {exc}", z) from exc
            if not (np.all(np.isfinite(F)) and np.all(np.isfinite(J))):
                raise FrameError("non-finite value during Newton", z)
            try:
                step = np.linalg.solve(J, F)
            except np.linalg.LinAlgError as exc:
                raise FrameError("singular normalization Jacobian", z) from exc
            a = a - step
            if np.max(np.abs(step)) <= ntol * (1 + np.max(np.abs(a))) and np.max(np.abs(F)) <= 1e3 * ntol * (1 + np.max(np.abs(z))):
                return a
        raise FrameError("Newton did not converge in 50 iterations", z)

    @staticmethod
    def _newton_scalar(Ffn, Jfn, z, cv, a, ntol):
        scale = 1 + max(abs(v) for v in z)
        for _ in range(50):
            try:
                # divergent iterates overflow; the finiteness test below reports them
                with np.errstate(over="ignore", invalid="ignore"):
                    F = Ffn(*z, a, *cv)[0]
                    J = Jfn(*z, a, *cv)[0]
            except EvalError as exc:
                raise FrameError(f"normalization undefined during Newton: {exc}", z) from exc
            if J == 0 or not (np.isfinite(F) and np.isfinite(J)):
                raise FrameError("singular or non-finite normalization Jacobian", z)
            step = F / J
            a -= step
            if abs(step) <= ntol * (1 + abs(a)) and abs(F) <= 1e3 * ntol * scale:
                return a
        raise FrameError("Newton did not converge in 50 iterations", z)

    def normalize(self, point: Mapping, warm=None, extra: Mapping | None = None) -> dict:
        """``gamma(z) . z`` as a numeric point."""
        g = self.gamma_at(point, warm, extra)
        vals = {**self.extra, **{_sym(k): v for k, v in (extra or {}).items()}}
        return self.action.apply(point, g, vals)

    def check_equivariance(self, samples: int = 10, rng=None, scale: float = 0.3) -> Verdict:
        """Normalized components hit the constants and ``gamma`` composes with the action."""
        rng = _rng(rng)
        worst = 0.0
        for _ in range(samples):
            z = self._sample_point(rng)
            b = rng.uniform(-scale, scale, self.action.r)
            gz = self.action.apply(z, b, self.extra)
            g0 = self.gamma_at(z)
            g1 = self.gamma_at(gz, warm=g0)
            n0 = self.action.apply(z, g0, self.extra)
            n1 = self.action.apply(gz, g1, self.extra)
            for c, k in zip(self.components, self.constants):
                worst = max(worst, abs(n0[c] - float(k)), abs(n1[c] - float(k)))
            for c in self.coords:
                worst = max(worst, abs(n0[c] - n1[c]))
            if self.action.law is not None:
                worst = max(worst, float(np.max(np.abs(np.asarray(self.action.law(b, g1)) - g0))))
        return Verdict(worst < tol().num_tol, [worst], [], f"max equivariance defect {worst:.3e}")

    def _sample_point(self, rng, tries: int = 50) -> dict:
        base = dict(self.anchor)
        for _ in range(tries):
            z = {c: base.get(c, 1.0) + float(rng.uniform(-0.25, 0.25)) for c in self.coords}
            try:
                self.gamma_at(z)
                return z
            except (FrameError, EvalError):
                continue
        raise FrameError("could not find a regular sample point")


def solve_frame(action: GroupAction, components: Sequence | None = None, constants: Sequence | None = None,
                mode: str = "symbolic", anchor: Mapping | None = None, name: str = "",
                extra: Mapping | None = None, rng=None) -> MovingFrame:
    """Solve ``phi^c(z; a) = const`` for the group parameters.

    ``components`` are coordinate symbols, names or 0-based indices into
    ``action.coords``; when omitted they are picked by pivoting the parameter
    Jacobian at the anchor.  Constants default to 1 on multiplicative
    coordinates and 0 elsewhere.  ``mode="numeric"`` skips the closed-form
    attempt.
    """
    if mode not in ("symbolic", "numeric"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = _rng(rng)
    pt = _anchor(action, anchor, rng)
    if extra:
        pt.update({_sym(k): float(v) for k, v in extra.items()})
    if components is None:
        comps = pivot_components(action, pt)
    else:
        comps = [action.coords[c] if isinstance(c, int) else _sym(c) for c in components]
    if len(comps) != action.r:
        raise RankDeficiency(f"need {action.r} normalization components, got {len(comps)}")
    unknown = [c for c in comps if c not in action.mapping]
    if unknown:
        raise ValueError(f"components not acted on: {[c.name for c in unknown]}")
    J = _eval_matrix(_param_jacobian(action, comps), pt)
    if np.linalg.matrix_rank(J, tol=tol().num_tol) < action.r:
        raise RankDeficiency("normalization Jacobian is rank deficient at the anchor")
    if constants is None:
        constants = [1 if c in action.multiplicative else 0 for c in comps]
    consts = tuple(as_expr(k) for k in constants)
    gamma = None
    if mode == "symbolic":
        eqs = [action.component(c) - k for c, k in zip(comps, consts)]
        gamma = solve_for_params(eqs, action.params)
        if gamma is not None:
            resid = [substitute(e, gamma) for e in eqs]
            if not all(is_zero(r) for r in resid):
                gamma = None
    t = action.time or symbol("t")
    order = max((split_jet(c)[1] for c in action.coords if c != t), default=0)
    return MovingFrame(action, tuple(comps), consts, gamma, order, name,
                       {c: pt[c] for c in action.coords},
                       {_sym(k): float(v) for k, v in (extra or {}).items()})


# ---------------------------------------------------------------------------
# invariants


@dataclass
class InvariantSet:
    frame: MovingFrame
    coords: tuple[sp.Symbol, ...]
    exprs: tuple[sp.Expr, ...] | None

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, i) -> sp.Expr:
        if self.exprs is None:
            raise FrameError("invariants of a numeric frame have no closed form")
        return self.exprs[i]

    def evaluate(self, point: Mapping, warm=None) -> np.ndarray:
        n = self.frame.normalize(point, warm)
        return np.array([n[c] for c in self.coords])

    def check_independence(self, samples: int = 10, rng=None) -> Verdict:
        """Jacobian rank ``dim - r`` at random points (finite differences when numeric)."""
        rng = _rng(rng)
        coords = list(self.frame.coords)
        need = len(coords) - self.frame.action.r
        ranks = []
        for _ in range(samples):
            z = self.frame._sample_point(rng)
            if self.exprs is not None:
                M = sp.Matrix([[sp.diff(e, c) for c in coords] for e in self.exprs])
                J = _eval_matrix(M, {**z, **self.frame.extra})
            else:
                h = 1e-6
                base = self.evaluate(z)
                cols = []
                for c in coords:
                    zp = dict(z)
                    zp[c] += h
                    cols.append((self.evaluate(zp) - base) / h)
                J = np.array(cols).T
            ranks.append(int(np.linalg.matrix_rank(J, tol=1e-6)))
        ok = all(r == need for r in ranks)
        return Verdict(ok, ranks, [], f"ranks {ranks}, expected {need}")

    def check_invariance(self, samples: int = 20, rng=None, scale: float = 0.3) -> Verdict:
        """``|I(g.z) - I(z)|`` at random points and group elements."""
        rng = _rng(rng)
        worst = 0.0
        for _ in range(samples):
            z = self.frame._sample_point(rng)
            b = rng.uniform(-scale, scale, self.frame.action.r)
            gz = self.frame.action.apply(z, b, self.frame.extra)
            i0 = self.evaluate(z)
            i1 = self.evaluate(gz, warm=self.frame.gamma_at(z))
            worst = max(worst, float(np.max(np.abs(i0 - i1))) if len(i0) else 0.0)
        return Verdict(worst < tol().num_tol, [worst], [], f"max invariance defect {worst:.3e}")


def invariants(frame: MovingFrame) -> InvariantSet:
    """Remaining components of ``gamma(z) . z``."""
    coords = frame.free_components
    if frame.gamma is None:
        return InvariantSet(frame, coords, None)
    exprs = tuple(simplify(substitute(frame.action.component(c), frame.gamma)) for c in coords)
    return InvariantSet(frame, coords, exprs)


# ---------------------------------------------------------------------------
# invariant tracking errors


def reference_symbol(s: sp.Symbol) -> sp.Symbol:
    """``y1 -> y1_d``, ``y1'' -> y1_d''``."""
    base, k = split_jet(s)
    return jet(symbol(base.name + "_d"), k) if k else symbol(base.name + "_d")


@dataclass
class TrackingError:
    """``e = I(y, ref) - I(y_d, ref)`` with the frame evaluated on the reference jet.

    ``raw`` holds ``phi_y(y; P) - phi_y(y_d; P)`` with placeholder symbols
    ``P`` for the group parameters; ``exprs`` has ``P = gamma(ref)``
    substituted when the frame is closed-form and equals ``raw`` otherwise.
    """

    frame: MovingFrame
    outputs: tuple[sp.Symbol, ...]
    reference: tuple[sp.Symbol, ...]
    exprs: tuple[sp.Expr, ...]
    raw: tuple[sp.Expr, ...]
    placeholders: tuple[sp.Symbol, ...]
    ref_map: dict

    @property
    def symbolic(self) -> bool:
        return self.frame.gamma is not None

    def on_reference(self) -> Verdict:
        """``e(y_d, ref)``; zero by construction, checked symbolically."""
        at = {y: self.ref_map[y] for y in self.outputs}
        return Verdict.from_residuals([substitute(e, at) for e in self.exprs])

    def _ref_point(self, ref: Mapping) -> dict:
        ref = {_sym(k): float(v) for k, v in ref.items()}
        return {c: ref[r] for c, r in self.ref_map.items()}

    def _fn(self):
        if "_efn" not in self.__dict__:
            consts = self.frame._consts()
            args = list(self.outputs) + list(self.reference) + list(self.placeholders) + consts
            self.__dict__["_efn"] = compile_exprs(self.raw, args)
        return self.__dict__["_efn"]

    def evaluate(self, y: Sequence[float], ref: Mapping, warm=None) -> np.ndarray:
        """Numeric error for output values ``y`` and a reference jet ``ref`` (dict by reference symbol)."""
        zref = self._ref_point(ref)
        g = self.frame.gamma_at(zref, warm)
        vals = list(y) + [zref[c] for c in self.frame.coords] + list(g) + self.frame._const_values()
        return np.asarray(self._fn()(*vals), dtype=float)

    def check_invariance(self, samples: int = 20, rng=None, scale: float = 0.3) -> Verdict:
        """``e(g.y, g.ref) = e(y, ref)`` for random points and group elements."""
        rng = _rng(rng)
        act = self.frame.action
        worst = 0.0
        for _ in range(samples):
            z = self.frame._sample_point(rng)
            y = [z[o] + float(rng.uniform(-0.3, 0.3)) for o in self.outputs]
            ref = {self.ref_map[c]: z[c] for c in self.frame.coords}
            b = rng.uniform(-scale, scale, act.r)
            gz = act.apply(z, b, self.frame.extra)
            gy = act.apply({**z, **dict(zip(self.outputs, y))}, b, self.frame.extra)
            gref = {self.ref_map[c]: gz[c] for c in self.frame.coords}
            e0 = self.evaluate(y, ref)
            e1 = self.evaluate([gy[o] for o in self.outputs], gref, warm=self.frame.gamma_at(z))
            worst = max(worst, float(np.max(np.abs(e0 - e1))))
        return Verdict(worst < tol().num_tol, [worst], [], f"max error invariance defect {worst:.3e}")

    def check_invertibility(self, reference: Callable[[float], Mapping] | None = None,
                            times: Sequence[float] = (), rng=None) -> Verdict:
        """Numeric rank of ``de/dy`` at ``y = y_d`` (along a reference when given)."""
        rng = _rng(rng)
        if reference is not None:
            pts = [(t, reference(t)) for t in times]
        else:
            pts = []
            for _ in range(10):
                z = self.frame._sample_point(rng)
                pts.append((None, {self.ref_map[c]: z[c] for c in self.frame.coords}))
        h = 1e-6
        for t, ref in pts:
            zref = self._ref_point(ref)
            y0 = [zref[y] for y in self.outputs]
            try:
                base = self.evaluate(y0, ref)
                cols = []
                for i in range(len(y0)):
                    yp = list(y0)
                    yp[i] += h
                    cols.append((self.evaluate(yp, ref) - base) / h)
            except (FrameError, EvalError) as exc:
                return Verdict(False, [t], [], f"frame singular along the reference at t={t}: {exc}")
            J = np.array(cols).T
            if np.linalg.matrix_rank(J, tol=1e-6) < len(self.outputs):
                return Verdict(False, [t], [], f"error not invertible in y at t={t}")
        return Verdict(True, [], [], "locally invertible")


def invariant_tracking_error(frame: MovingFrame | InvariantSet, outputs: Sequence | None = None) -> TrackingError:
    """Invariant tracking error for the frame's base coordinates.

    The frame is read as normalizing the reference: every frame coordinate
    ``z`` is renamed to ``z_d`` (jets included) and the outputs are the
    order-0 acted-on coordinates unless given.
    """
    if isinstance(frame, InvariantSet):
        frame = frame.frame
    t = frame.action.time or symbol("t")
    if outputs is None:
        outputs = [c for c in frame.coords if c != t and split_jet(c)[1] == 0]
    outputs = tuple(_sym(o) for o in outputs)
    ref_map = {c: reference_symbol(c) for c in frame.coords}
    placeholders = tuple(symbol(f"gamma_{a.name}") for a in frame.action.params)
    pmap = dict(zip(frame.action.params, placeholders))
    to_ref = {y: ref_map[y] for y in outputs}
    raw = []
    for y in outputs:
        act = substitute(frame.action.component(y), pmap)
        raw.append(act - substitute(act, to_ref))
    if frame.gamma is not None:
        gmap = {pmap[a]: substitute(g, ref_map) for a, g in frame.gamma.items()}
        exprs = tuple(simplify(substitute(e, gmap)) for e in raw)
    else:
        exprs = tuple(raw)
    return TrackingError(frame, outputs, tuple(ref_map[c] for c in frame.coords), exprs, tuple(raw),
                         placeholders, ref_map)


# ---------------------------------------------------------------------------
# G-compatible outputs


@dataclass
class GCompatibility:
    compatible: bool
    witnesses: list = field(default_factory=list)
    annihilator: list[VectorField] = field(default_factory=list)
    induced: GroupAction | None = None
    note: str = ""

    def __bool__(self):
        return self.compatible


def check_g_compatible(sys: ControlSystem, h: Sequence, gens: Sequence[VectorField],
                       action: GroupAction | None = None, names: Sequence[str] | None = None,
                       rng=None) -> GCompatibility:
    """Do the generators induce an action on ``y = h(x)``?

    Tests ``<dh^i, [w, v_k]> = 0`` for a basis ``w`` of the annihilator of
    ``span{dh}``.  With ``action`` given, the induced action on ``y`` is built
    by expressing ``h o phi_g`` through ``h`` and checked at 10 random points.
    """
    rng = _rng(rng)
    h = [as_expr(e) for e in h]
    xs = list(sys.states)
    if len(h) > len(xs):
        raise RankDeficiency("more outputs than states")
    H = sp.Matrix([[sp.diff(e, x) for x in xs] for e in h])
    pt = {**{x: float(rng.uniform(0.5, 1.5)) for x in xs}, **{u: float(rng.uniform(0.5, 1.5)) for u in sys.inputs}}
    pt.update({p: float(v if v is not None else rng.uniform(0.5, 1.5)) for p, v in sys.params.items()})
    if np.linalg.matrix_rank(_eval_matrix(H, pt), tol=tol().num_tol) < len(h):
        raise RankDeficiency("output differentials are dependent")
    null = [sp.Matrix([simplify(c) for c in v]) for v in H.nullspace(simplify=simplify)]
    ann = [VectorField(tuple(xs), tuple(v)) for v in null]
    witnesses = []
    for w in ann:
        for k, v in enumerate(gens):
            vx = v.extend(xs) if set(v.coords) <= set(xs) else VectorField(tuple(xs), tuple(v[x] for x in xs))
            br = lie_bracket(w, vx)
            for i, dh in enumerate(h):
                val = simplify(sum(sp.diff(dh, x) * br[x] for x in xs))
                if not is_zero(val):
                    witnesses.append((w, k + 1, i + 1, val))
    if witnesses:
        w, k, i, val = witnesses[0]
        return GCompatibility(False, witnesses, ann, None,
                              f"<dh{i}, [{w}, v{k}]> = {to_text(val)}")
    induced = None
    note = "compatible"
    if action is not None and gens:
        ys = [symbol(n) for n in (names or [f"y{i + 1}" for i in range(len(h))])]
        induced, note = _induced_action(sys, h, ys, action, rng)
    return GCompatibility(True, [], ann, induced, note)


def _induced_action(sys, h, ys, action, rng):
    xs = list(sys.states)
    composed = [substitute(e, {x: action.component(x) for x in xs}) for e in h]
    pick = None
    for cand in _subsets(xs, len(h)):
        sol = solve_for_params([e - y for e, y in zip(h, ys)], cand)
        if sol is not None:
            pick = sol
            break
    if pick is None:
        return None, "compatible; induced action has no closed form"
    psi = [simplify(substitute(c, pick)) for c in composed]
    if any(e.has(*xs) for e in psi):
        return None, "compatible; induced action not expressible through h"
    ind = GroupAction(action.name + "_induced", action.params, dict(zip(ys, psi)), law=action.law)
    worst = 0.0
    consts = {p: float(v if v is not None else 1.0) for p, v in sys.params.items()}
    for _ in range(10):
        x = {x: float(rng.uniform(0.5, 1.5)) for x in xs}
        a = rng.uniform(-0.5, 0.5, action.r)
        gx = action.apply(x, a, consts)
        lhs = [float(substitute(e, {**gx, **consts})) for e in h]
        yv = {y: float(substitute(e, {**x, **consts})) for y, e in zip(ys, h)}
        rhs = ind.apply(yv, a, consts)
        worst = max(worst, max(abs(l - rhs[y]) for l, y in zip(lhs, ys)))
    if worst >= tol().num_tol:
        return None, f"induced action inconsistent (defect {worst:.3e})"
    return ind, f"compatible; induced action checked (defect {worst:.1e})"


def _subsets(xs, k):
    from itertools import combinations

    return [list(c) for c in combinations(xs, k)]
