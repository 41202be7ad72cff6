"""Symbolic expression core.

Expressions are sympy trees over real symbols.  This module owns the textual
grammar (parser and printer), canonical simplification, exact
differentiation, the zero test and numeric evaluation.  Everything else in
the package computes through these functions.

Derivative (jet) coordinates are ordinary symbols whose names carry trailing
primes: ``phi'`` is the first time derivative coordinate of ``phi``.
"""

from __future__ import annotations

import contextlib
import math
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping

import mpmath
import numpy as np
import sympy as sp

Expr = sp.Expr


# ---------------------------------------------------------------------------
# tolerances


@dataclass(frozen=True)
class Tolerances:
    zero_tol: float = 1e-9
    num_tol: float = 1e-8
    newton_tol: float = 1e-12
    zero_samples: int = 32
    sample_box: float = 2.0


_TOL = [Tolerances()]


def tol() -> Tolerances:
    return _TOL[-1]


@contextlib.contextmanager
def tolerances(**overrides):
    """Temporarily override default tolerances (``zero_tol``, ``num_tol`` ...)."""
    _TOL.append(replace(_TOL[-1], **{k: v for k, v in overrides.items() if v is not None}))
    try:
        yield _TOL[-1]
    finally:
        _TOL.pop()


# ---------------------------------------------------------------------------
# symbols and jets


def symbol(name: str) -> sp.Symbol:
    """The canonical (real) symbol for ``name``."""
    return sp.Symbol(name, real=True)


def symbols(names: str | Iterable[str]) -> tuple[sp.Symbol, ...]:
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    return tuple(symbol(n) for n in names)


def jet(s: sp.Symbol, order: int = 1) -> sp.Symbol:
    """Derivative coordinate of ``s`` of the given order (``x`` -> ``x'``)."""
    if order < 0:
        raise ValueError("negative jet order")
    return symbol(s.name + "'" * order)


def split_jet(s: sp.Symbol) -> tuple[sp.Symbol, int]:
    """Inverse of :func:`jet`: ``x''`` -> ``(x, 2)``."""
    name = s.name.rstrip("'")
    return symbol(name), len(s.name) - len(name)


def jet_order(s: sp.Symbol) -> int:
    return split_jet(s)[1]


def free_symbols(e) -> set[sp.Symbol]:
    return set(sp.sympify(e).free_symbols)


# ---------------------------------------------------------------------------
# parsing


class ParseError(ValueError):
    """Malformed expression text; ``offset`` is the 0-based character position."""

    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


FUNCTIONS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "arctan": sp.atan,
    "atan2": sp.atan2,
    "exp": sp.exp,
    "ln": sp.log,
    "sqrt": sp.sqrt,
    "abs": sp.Abs,
    "sign": sp.sign,
}
_ARITY = {"atan2": 2}
CONSTANTS = {"pi": sp.pi}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*'*)
  | (?P<op>\*\*|[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", pos, src)
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if text == "**":
                text = "^"
            out.append((kind, text, pos))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, tok, what="unexpected token"):
        shown = tok[1] if tok[0] != "end" else "end of input"
        raise ParseError(f"{what} {shown!r}", tok[2], self.src)

    def expect(self, text):
        tok = self.take()
        if tok[1] != text:
            self.fail(tok, f"expected {text!r}, found")
        return tok

    def parse(self):
        e = self.sum()
        if self.peek()[0] != "end":
            self.fail(self.peek())
        return e

    def sum(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return base ** self.unary()
        return base

    def atom(self):
        tok = self.take()
        kind, text, pos = tok
        if kind == "num":
            return sp.Rational(Fraction(text))
        if kind == "name":
            if self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", pos, self.src)
                self.take()
                args = [self.sum()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.sum())
                self.expect(")")
                if len(args) != _ARITY.get(text, 1):
                    raise ParseError(f"wrong number of arguments for {text!r}", pos, self.src)
                return FUNCTIONS[text](*args)
            if text in CONSTANTS:
                return CONSTANTS[text]
            return symbol(text)
        if text == "(":
            e = self.sum()
            self.expect(")")
            return e
        self.fail(tok)


def parse(source: str) -> Expr:
    """Parse infix text into an expression.

    >>> print(to_text(parse("v*cos(theta)")))
    v*cos(theta)
    """
    return _Parser(source).parse()


def as_expr(e) -> Expr:
    """Accept expression text, numbers or sympy objects."""
    if isinstance(e, str):
        return parse(e)
    if isinstance(e, float):
        return sp.Rational(Fraction(e).limit_denominator(10**12))
    return sp.sympify(e)


# ---------------------------------------------------------------------------
# printing

from sympy.printing.precedence import PRECEDENCE  # noqa: E402
from sympy.printing.str import StrPrinter  # noqa: E402

_FUNC_NAMES = {"atan": "arctan", "log": "ln", "Abs": "abs"}


class _GrammarPrinter(StrPrinter):
    def _print_Pow(self, e, rational=False):
        b, x = e.base, e.exp
        if x is sp.S.Half:
            return f"sqrt({self._print(b)})"
        if x == -sp.S.Half:
            return f"1/sqrt({self._print(b)})"
        if x is sp.S.NegativeOne:
            return "1/" + self.parenthesize(b, PRECEDENCE["Mul"], strict=True)
        base = self.parenthesize(b, PRECEDENCE["Pow"], strict=True)
        if (x.is_Integer and x >= 0) or x.is_Symbol:
            expo = self._print(x)
        else:
            expo = f"({self._print(x)})"
        return f"{base}^{expo}"

    def _print_Function(self, e):
        name = _FUNC_NAMES.get(e.func.__name__, e.func.__name__)
        return f"{name}({', '.join(self._print(a) for a in e.args)})"

    def _print_exp(self, e):
        return f"exp({self._print(e.args[0])})"

    def _print_Exp1(self, e):
        return "exp(1)"

    def _print_Pi(self, e):
        return "pi"

    def _print_Derivative(self, e):
        inner = self._print(e.expr)
        wrt = ", ".join(self._print(v) if n == 1 else f"{self._print(v)}^{n}" for v, n in e.variable_count)
        return f"D[{wrt}]({inner})"


_PRINTER = _GrammarPrinter()


def to_text(e) -> str:
    """Render an expression in the parser's grammar."""
    return _PRINTER.doprint(sp.sympify(e))


# ---------------------------------------------------------------------------
# simplification


def _map_args(e: Expr) -> Expr:
    """Canonicalize function arguments and non-integer powers, bottom up."""
    if e.is_Atom:
        return e
    if isinstance(e, sp.tan):
        arg = simplify(e.args[0])
        return sp.sin(arg) / sp.cos(arg)
    if isinstance(e, (sp.Function, sp.Derivative)) and not isinstance(e, sp.tan):
        if isinstance(e, sp.Derivative):
            return e
        return e.func(*[simplify(a) for a in e.args])
    if e.is_Pow and not e.exp.is_Integer:
        return sp.Pow(simplify(e.base), simplify(e.exp))
    return e.func(*[_map_args(a) for a in e.args])


def _reduce_sin_squares(p: Expr) -> Expr:
    p = sp.expand(p)
    if not p.has(sp.sin) or not p.has(sp.cos):
        return p

    def repl(b, x):
        n = int(x)
        return sp.sin(b.args[0]) ** (n % 2) * (1 - sp.cos(b.args[0]) ** 2) ** (n // 2)

    p2 = p.replace(
        lambda q: q.is_Pow and isinstance(q.base, sp.sin) and q.exp.is_Integer and q.exp >= 2
        and q.base.args[0] in {c.args[0] for c in p.atoms(sp.cos)},
        lambda q: repl(q.base, q.exp),
    )
    return sp.expand(p2)


def _rational_step(e: Expr) -> Expr:
    e = sp.cancel(sp.together(e))
    num, den = sp.fraction(e)
    num, den = _reduce_sin_squares(num), _reduce_sin_squares(den)
    return sp.cancel(num / den)


def simplify(e) -> Expr:
    """Canonical form: common denominator, cancelled polynomials,
    ``tan -> sin/cos`` and ``sin^2 -> 1 - cos^2`` when both appear."""
    e = as_expr(e)
    if e.is_Atom:
        return e
    e = _map_args(e)
    for _ in range(6):
        nxt = _rational_step(e)
        if nxt == e:
            break
        e = nxt
    return e


def differentiate(e, s: sp.Symbol, canonical: bool = True) -> Expr:
    """Exact partial derivative of ``e`` with respect to the symbol ``s``."""
    d = sp.diff(as_expr(e), s)
    return simplify(d) if canonical else d


def gradient(e, syms: Iterable[sp.Symbol]) -> list[Expr]:
    return [sp.diff(e, s) for s in syms]


def substitute(e, mapping: Mapping) -> Expr:
    """Simultaneous substitution of symbols (or subexpressions)."""
    if not mapping:
        return as_expr(e)
    return as_expr(e).xreplace({as_expr(k): as_expr(v) for k, v in mapping.items()})


# ---------------------------------------------------------------------------
# numeric evaluation


class EvalError(ArithmeticError):
    pass


class UnboundSymbolError(EvalError, KeyError):
    def __init__(self, names):
        self.names = sorted(names)
        super().__init__(f"unbound symbol(s): {', '.join(self.names)}")

    def __str__(self):
        return self.args[0]


class DomainError(EvalError, ValueError):
    """Evaluation left the real domain; ``subtree`` is the offending node."""

    def __init__(self, message: str, subtree: Expr):
        self.subtree = subtree
        super().__init__(f"{message}: {to_text(subtree)}")


def _binding(binding: Mapping) -> dict[sp.Symbol, float]:
    out = {}
    for k, v in binding.items():
        key = symbol(k) if isinstance(k, str) else k
        out[key] = float(v)
    return out


_UNARY = {
    sp.sin: math.sin,
    sp.cos: math.cos,
    sp.atan: math.atan,
    sp.exp: math.exp,
    sp.sign: lambda x: float(np.sign(x)),
    sp.Abs: abs,
}


def _ev(e: Expr, env: dict) -> float:
    if e.is_Symbol:
        return env[e]
    if e.is_Number or e.is_NumberSymbol:
        return float(e)
    if e.is_Add:
        return math.fsum(_ev(a, env) for a in e.args)
    if e.is_Mul:
        out = 1.0
        for a in e.args:
            out *= _ev(a, env)
        return out
    if e.is_Pow:
        b = _ev(e.base, env)
        x = _ev(e.exp, env)
        if b == 0.0 and x < 0:
            raise DomainError("division by zero", e)
        if b < 0 and not float(x).is_integer():
            raise DomainError("fractional power of a negative number", e)
        try:
            return b**x
        except OverflowError as exc:
            raise DomainError("overflow", e) from exc
    if isinstance(e, sp.log):
        x = _ev(e.args[0], env)
        if x <= 0:
            raise DomainError("logarithm of a nonpositive number", e)
        return math.log(x)
    if isinstance(e, sp.tan):
        x = _ev(e.args[0], env)
        if math.cos(x) == 0.0:
            raise DomainError("tangent pole", e)
        return math.tan(x)
    if isinstance(e, sp.atan2):
        return math.atan2(_ev(e.args[0], env), _ev(e.args[1], env))
    fn = _UNARY.get(e.func)
    if fn is not None:
        try:
            return fn(_ev(e.args[0], env))
        except OverflowError as exc:
            raise DomainError("overflow", e) from exc
    raise EvalError(f"cannot evaluate {to_text(e)}")


def evaluate(e, binding: Mapping) -> float:
    """IEEE double value of ``e`` under ``binding`` (symbol or name -> number)."""
    e = as_expr(e)
    env = _binding(binding)
    missing = {s.name for s in e.free_symbols if s not in env}
    if missing:
        raise UnboundSymbolError(missing)
    return _ev(e, env)


_MATH_MODULE = [{"atan2": math.atan2, "sign": lambda x: float(np.sign(x))}, "math"]


def compile_exprs(exprs, args: Iterable[sp.Symbol]):
    """Fast numeric callable ``f(*args) -> tuple`` for repeated evaluation."""
    args = list(args)
    exprs = [as_expr(e) for e in exprs]
    missing = set().union(*(e.free_symbols for e in exprs)) - set(args) if exprs else set()
    if missing:
        raise UnboundSymbolError({s.name for s in missing})
    fn = sp.lambdify(args, exprs, modules=_MATH_MODULE, cse=True)

    def call(*vals):
        try:
            return fn(*vals)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvalError(str(exc)) from exc

    return call


# ---------------------------------------------------------------------------
# zero testing


@dataclass(frozen=True)
class ZeroTest:
    """Outcome of :func:`is_zero`.

    ``path`` is ``"symbolic"``, ``"numeric"`` or ``"undecidable"``.
    Truthiness is the verdict; an undecidable test is falsy.
    """

    value: bool
    path: str
    max_abs: float = 0.0
    points: int = 0

    def __bool__(self):
        return self.value

    @property
    def decided(self) -> bool:
        return self.path != "undecidable"


_MP_MODULE = [{"atan2": mpmath.atan2, "sign": mpmath.sign}, "mpmath"]


def _mp_real(v):
    v = mpmath.mpmathify(v)
    if isinstance(v, mpmath.mpc):
        if abs(v.imag) > mpmath.mpf(10) ** -25 * max(1, abs(v.real)):
            return None
        v = v.real
    if not mpmath.isfinite(v):
        return None
    return v


def sample_points(syms, rng: np.random.Generator, box: float | None = None) -> dict:
    box = tol().sample_box if box is None else box
    return {s: float(rng.uniform(-box, box)) for s in syms}


def is_zero(e, *, rng: np.random.Generator | None = None, zero_tol: float | None = None,
            samples: int | None = None, box: float | None = None, symbolic: bool = True) -> ZeroTest:
    """Decide ``e == 0``: canonical simplification first, then random sampling.

    ``symbolic=False`` skips the simplifier (for very large expressions).

    The numeric fallback evaluates at independent uniform points in
    ``[-box, box]`` per symbol with 30 significant digits, redrawing singular
    points.  If every sample is singular the result is undecidable.
    """
    e = as_expr(e)
    if e == 0:
        return ZeroTest(True, "symbolic")
    try:
        s = simplify(e) if symbolic else e
    except (sp.PolynomialError, TypeError, NotImplementedError):
        s = e
    if s == 0:
        return ZeroTest(True, "symbolic")
    if s.atoms(sp.core.function.AppliedUndef) or s.atoms(sp.Derivative):
        return ZeroTest(False, "undecidable")
    syms = sorted(s.free_symbols, key=lambda x: x.name)
    if not syms:
        v = _mp_real(sp.N(s, 30))
        if v is None:
            return ZeroTest(False, "undecidable")
        return ZeroTest(abs(v) < (zero_tol or tol().zero_tol), "numeric", float(abs(v)), 1)
    zero_tol = tol().zero_tol if zero_tol is None else zero_tol
    n = tol().zero_samples if samples is None else samples
    rng = np.random.default_rng(12345) if rng is None else rng
    fn = sp.lambdify(syms, s, modules=_MP_MODULE)
    worst = 0.0
    good = 0
    with mpmath.workdps(30):
        for _ in range(n):
            for _attempt in range(8):
                pt = sample_points(syms, rng, box)
                try:
                    v = _mp_real(fn(*[mpmath.mpf(pt[x]) for x in syms]))
                except (ZeroDivisionError, ValueError, OverflowError, TypeError):
                    v = None
                if v is not None:
                    break
            if v is None:
                continue
            good += 1
            worst = max(worst, float(abs(v)))
            if worst >= zero_tol:
                return ZeroTest(False, "numeric", worst, good)
    if good == 0:
        return ZeroTest(False, "undecidable")
    return ZeroTest(True, "numeric", worst, good)


def rationalize(x: float, max_den: int = 1000, tol_: float = 1e-9) -> sp.Rational | None:
    """Nearest small-denominator rational to ``x`` if within ``tol_``."""
    f = Fraction(x).limit_denominator(max_den)
    if abs(float(f) - x) <= tol_ * max(1.0, abs(x)):
        return sp.Rational(f.numerator, f.denominator)
    return None
