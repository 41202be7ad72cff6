"""Line-oriented system files.

A file is a sequence of bracketed sections holding ``key = expression``
lines; ``#`` starts a comment.  Example::

    [system]
    name = car

    [states]
    z1
    z2
    theta

    [inputs]
    v
    phi

    [params]
    l = 1

    [dynamics]
    z1 = v*cos(theta)
    z2 = v*sin(theta)
    theta = v/l*tan(phi)

    [action rot]
    params = a
    law = additive
    z1 = z1*cos(a) - z2*sin(a)
    z2 = z1*sin(a) + z2*cos(a)
    theta = theta + a

    [generator v1]
    z1 = -z2
    z2 = z1
    theta = 1

    [frame rot0]
    action = rot
    normalize = theta
    constants = 0

The full grammar is in ``docs/grammar.ebnf``.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable

import sympy as sp

from .expr import ParseError, as_expr, is_zero, symbol, to_text
from .geometry import SystemMap, check_lie_backlund_map
from .model import ControlSystem
from .symmetry import LAWS, GroupAction, check_symmetry, law_name
from .systems import NAMES, CatalogEntry, FrameSpec

SECTIONS = ("system", "states", "inputs", "params", "dynamics", "outputs")
NAMED = ("action", "generator", "frame", "map", "feedback")
_HEADER = re.compile(r"^\[\s*([a-z]+)(?:\s+([A-Za-z_][A-Za-z0-9_]*))?\s*\]$")


class DSLError(ValueError):
    """Malformed system file; ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, message: str, line: int = 0, source: str = ""):
        where = f"{source or '<text>'}:{line}: " if line else (f"{source}: " if source else "")
        super().__init__(where + message)
        self.line = line


class LoadError(DSLError):
    """The file parsed but a declared fact (generator, map) failed verification."""


def _split_list(v: str) -> list[str]:
    return [s.strip() for s in v.split(",") if s.strip()]


def _number(v: str, line: int, src: str) -> float:
    try:
        return float(v)
    except ValueError:
        try:
            return float(as_expr(v))
        except (ParseError, TypeError) as exc:
            raise DSLError(f"expected a number, got {v!r}", line, src) from exc


def _sections(text: str, source: str) -> list[tuple[str, str | None, list[tuple[int, str, str | None]]]]:
    out = []
    cur = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            kind, name = m.group(1), m.group(2)
            if kind in SECTIONS and name:
                raise DSLError(f"section [{kind}] takes no name", no, source)
            if kind in NAMED and not name:
                raise DSLError(f"section [{kind}] needs a name", no, source)
            if kind not in SECTIONS + NAMED:
                raise DSLError(f"unknown section [{kind}]", no, source)
            cur = (kind, name, [])
            out.append(cur)
            continue
        if line.startswith("["):
            raise DSLError(f"malformed section header {line!r}", no, source)
        if cur is None:
            raise DSLError("content before the first section", no, source)
        if "=" in line:
            k, v = line.split("=", 1)
            cur[2].append((no, k.strip(), v.strip()))
        else:
            cur[2].append((no, line, None))
    return out


def _expr(v: str | None, no: int, src: str) -> sp.Expr:
    if v is None or v == "":
        raise DSLError("missing expression", no, src)
    try:
        return as_expr(v)
    except ParseError as exc:
        raise DSLError(f"{exc} in {v!r}", no, src) from exc


def loads(text: str, source: str = "", verify: bool = True, base_dir: Path | None = None) -> CatalogEntry:
    """Parse a system file into a :class:`CatalogEntry`.

    With ``verify`` every declared generator is re-checked as a symmetry and
    every map whose target can be resolved (catalog name or sibling file) is
    checked against the defining equations; failures raise :class:`LoadError`.
    """
    secs = _sections(text, source)
    meta: dict[str, str] = {}
    states: list[str] = []
    inputs: list[str] = []
    params: dict[str, float | None] = {}
    dyn: dict[str, sp.Expr] = {}
    outputs: dict[str, sp.Expr] = {}
    named: dict[str, dict[str, list]] = {k: {} for k in NAMED}
    first_line: dict[tuple[str, str], int] = {}
    for kind, name, lines in secs:
        if kind == "system":
            for no, k, v in lines:
                meta[k] = v or ""
        elif kind in ("states", "inputs"):
            target = states if kind == "states" else inputs
            for no, k, v in lines:
                if v is not None:
                    raise DSLError(f"[{kind}] lists bare names, got {k} = {v}", no, source)
                target.extend(_split_list(k))
        elif kind == "params":
            for no, k, v in lines:
                params[k] = None if v is None or v == "" else _number(v, no, source)
        elif kind in ("dynamics", "outputs"):
            target = dyn if kind == "dynamics" else outputs
            for no, k, v in lines:
                if k in target:
                    raise DSLError(f"duplicate entry for {k}", no, source)
                target[k] = _expr(v, no, source)
        else:
            if name in named[kind]:
                raise DSLError(f"duplicate [{kind} {name}]", lines[0][0] if lines else 0, source)
            named[kind][name] = lines
            first_line[(kind, name)] = lines[0][0] if lines else 0

    missing = [s for s in states if s not in dyn]
    if missing:
        raise DSLError(f"no dynamics for states {missing}", 0, source)
    stray = [k for k in dyn if k not in states]
    if stray:
        raise DSLError(f"dynamics for undeclared states {stray}", 0, source)
    try:
        sys = ControlSystem(meta.get("name", "system"), tuple(states), tuple(inputs),
                            tuple(dyn[s] for s in states), params, symbol(meta.get("time", "t")))
    except ValueError as exc:
        raise DSLError(str(exc), 0, source) from exc

    actions = {n: _action(n, ls, sys, source) for n, ls in named["action"].items()}
    generators, numeric_checks = {}, set()
    for n, ls in named["generator"].items():
        coeffs = {}
        for no, k, v in ls:
            if k == "check":
                if v not in ("symbolic", "numeric"):
                    raise DSLError(f"check must be symbolic or numeric, got {v!r}", no, source)
                if v == "numeric":
                    numeric_checks.add(n)
                continue
            if symbol(k) not in sys.coords:
                raise DSLError(f"generator component {k} is not a coordinate", no, source)
            coeffs[symbol(k)] = _expr(v, no, source)
        generators[n] = sys.field(coeffs)
    frames = {n: _frame(n, ls, actions, source) for n, ls in named["frame"].items()}
    maps = {}
    for n, ls in named["map"].items():
        target, time_map, comps = None, None, {}
        for no, k, v in ls:
            if k == "target":
                target = v
            elif k == "time":
                time_map = _expr(v, no, source)
            else:
                comps[k] = _expr(v, no, source)
        if not target:
            raise DSLError(f"[map {n}] needs a target", first_line[("map", n)], source)
        maps[n] = (target, SystemMap(comps, time_map) if time_map is not None else SystemMap(comps))
    feedback = {n: {k: _expr(v, no, source) for no, k, v in ls} for n, ls in named["feedback"].items()}

    entry = CatalogEntry(sys.name, sys, actions, generators, outputs, frames, maps,
                         provenance=meta.get("provenance", ""), numeric_checks=frozenset(numeric_checks),
                         extra={"feedback": feedback} if feedback else {})
    if verify:
        for gname, g in generators.items():
            if not check_symmetry(sys, g, symbolic=gname not in numeric_checks):
                raise LoadError(f"generator {gname} is not a symmetry of {sys.name}",
                                first_line[("generator", gname)], source)
        for mname, (target, m) in maps.items():
            dst = _resolve(target, base_dir)
            if dst is not None and not check_lie_backlund_map(m, sys, dst.system):
                raise LoadError(f"map {mname} fails the defining equations", first_line[("map", mname)], source)
    return entry


def _resolve(target: str, base_dir: Path | None):
    if target in NAMES:
        from .systems import get

        return get(target)
    for cand in ((base_dir or Path(".")) / target, (base_dir or Path(".")) / f"{target}.sys"):
        if cand.is_file():
            return load(cand, verify=False)
    return None


def _action(name, lines, sys: ControlSystem, source) -> GroupAction:
    params, mult, law, mapping = [], [], None, {}
    for no, k, v in lines:
        if k == "params":
            params = _split_list(v or "")
        elif k == "multiplicative":
            mult = _split_list(v or "")
        elif k == "law":
            if v not in LAWS:
                raise DSLError(f"unknown composition law {v!r}; known: {', '.join(LAWS)}", no, source)
            law = LAWS[v]
        else:
            mapping[k] = _expr(v, no, source)
    if not params:
        raise DSLError(f"[action {name}] needs params", lines[0][0] if lines else 0, source)
    try:
        return GroupAction(name, params, mapping, frozenset(mult), law, sys.time)
    except ValueError as exc:
        raise DSLError(f"[action {name}]: {exc}", lines[0][0] if lines else 0, source) from exc


def _frame(name, lines, actions, source) -> FrameSpec:
    kw: dict = {"anchor": {}, "extra": {}}
    for no, k, v in lines:
        if k.startswith("anchor.") or k.startswith("extra."):
            group, coord = k.split(".", 1)
            kw[group][coord] = _number(v or "", no, source)
        elif k == "action":
            if v not in actions:
                raise DSLError(f"frame {name} uses unknown action {v!r}", no, source)
            kw["action"] = v
        elif k == "normalize":
            kw["components"] = tuple(_split_list(v or ""))
        elif k == "constants":
            kw["constants"] = tuple(as_expr(c) for c in _split_list(v or ""))
        elif k in ("bases", "reduced"):
            kw[k] = tuple(_split_list(v or ""))
        elif k == "mode":
            if v not in ("symbolic", "numeric"):
                raise DSLError(f"mode must be symbolic or numeric, got {v!r}", no, source)
            kw["mode"] = v
        elif k == "prolong":
            kw["prolong"] = int(_number(v or "", no, source))
        else:
            raise DSLError(f"unknown frame key {k!r}", no, source)
    if "action" not in kw or "components" not in kw:
        raise DSLError(f"[frame {name}] needs action and normalize", lines[0][0] if lines else 0, source)
    return FrameSpec(**kw)


def load(path, verify: bool = True) -> CatalogEntry:
    path = Path(path)
    return loads(path.read_text(), str(path), verify, path.parent)


# ---------------------------------------------------------------------------
# export


def _num(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _list(items: Iterable) -> str:
    return ", ".join(str(i) for i in items)


def dump_system(sys: ControlSystem, provenance: str = "") -> list[str]:
    lines = ["[system]", f"name = {sys.name}"]
    if sys.time.name != "t":
        lines.append(f"time = {sys.time.name}")
    if provenance:
        lines.append(f"provenance = {provenance}")
    lines += ["", "[states]", *(s.name for s in sys.states)]
    if sys.inputs:
        lines += ["", "[inputs]", *(u.name for u in sys.inputs)]
    if sys.params:
        lines += ["", "[params]"]
        lines += [p.name if v is None else f"{p.name} = {_num(v)}" for p, v in sys.params.items()]
    lines += ["", "[dynamics]", *(f"{x.name} = {to_text(f)}" for x, f in zip(sys.states, sys.dynamics))]
    return lines


def dumps(entry: CatalogEntry | ControlSystem) -> str:
    """Serialize an entry (or a bare system) to the file format."""
    if isinstance(entry, ControlSystem):
        return "\n".join(dump_system(entry)) + "\n"
    lines = dump_system(entry.system, entry.provenance)
    if entry.outputs:
        lines += ["", "[outputs]", *(f"{k} = {to_text(v)}" for k, v in entry.outputs.items())]
    for n, act in entry.actions.items():
        lines += ["", f"[action {n}]", f"params = {_list(a.name for a in act.params)}"]
        if act.multiplicative:
            lines.append(f"multiplicative = {_list(sorted(s.name for s in act.multiplicative))}")
        ln = law_name(act.law)
        if ln:
            lines.append(f"law = {ln}")
        lines += [f"{c.name} = {to_text(e)}" for c, e in act.mapping.items()]
    for n, g in entry.generators.items():
        lines += ["", f"[generator {n}]"]
        if n in entry.numeric_checks:
            lines.append("check = numeric")
        lines += [f"{c.name} = {to_text(e)}" for c, e in zip(g.coords, g.coeffs) if e != 0]
    for n, f in entry.frames.items():
        lines += ["", f"[frame {n}]", f"action = {f.action}", f"normalize = {_list(f.components)}"]
        if f.constants:
            lines.append(f"constants = {_list(to_text(c) for c in f.constants)}")
        if f.mode != "symbolic":
            lines.append(f"mode = {f.mode}")
        if f.prolong:
            lines += [f"prolong = {f.prolong}", f"bases = {_list(f.bases)}"]
        if f.reduced:
            lines.append(f"reduced = {_list(f.reduced)}")
        lines += [f"anchor.{k} = {_num(v)}" for k, v in f.anchor.items()]
        lines += [f"extra.{k} = {_num(v)}" for k, v in f.extra.items()]
    for n, (target, m) in entry.maps.items():
        lines += ["", f"[map {n}]", f"target = {target}"]
        if m.time_map != symbol("t"):
            lines.append(f"time = {to_text(m.time_map)}")
        lines += [f"{k.name} = {to_text(v)}" for k, v in m.targets.items()]
    for n, law in entry.extra.get("feedback", {}).items():
        lines += ["", f"[feedback {n}]", *(f"{k} = {to_text(v)}" for k, v in law.items())]
    return "\n".join(lines) + "\n"


def dump(entry, path):
    Path(path).write_text(dumps(entry))


# ---------------------------------------------------------------------------
# canonical comparison


def _same(a, b) -> bool:
    a, b = as_expr(a), as_expr(b)
    return a == b or bool(is_zero(a - b))


def differences(x: CatalogEntry, y: CatalogEntry) -> list[str]:
    """Human-readable list of differences; empty when the entries agree."""
    out = []
    sx, sy = x.system, y.system
    for attr in ("name", "states", "inputs", "time"):
        if getattr(sx, attr) != getattr(sy, attr):
            out.append(f"system {attr}: {getattr(sx, attr)} != {getattr(sy, attr)}")
    if {k.name: v for k, v in sx.params.items()} != {k.name: v for k, v in sy.params.items()}:
        out.append("params differ")
    out += [f"dynamics of {s}" for s, f, g in zip(sx.states, sx.dynamics, sy.dynamics) if not _same(f, g)]
    if set(x.outputs) != set(y.outputs) or any(not _same(x.outputs[k], y.outputs[k]) for k in x.outputs):
        out.append("outputs differ")
    if set(x.actions) != set(y.actions):
        out.append("action names differ")
    for n in set(x.actions) & set(y.actions):
        a, b = x.actions[n], y.actions[n]
        if (a.params != b.params or set(a.mapping) != set(b.mapping) or a.multiplicative != b.multiplicative
                or law_name(a.law) != law_name(b.law)
                or any(not _same(a.mapping[c], b.mapping[c]) for c in a.mapping)):
            out.append(f"action {n}")
    if set(x.generators) != set(y.generators):
        out.append("generator names differ")
    for n in set(x.generators) & set(y.generators):
        g, h = x.generators[n], y.generators[n]
        if g.coords != h.coords or any(not _same(p, q) for p, q in zip(g.coeffs, h.coeffs)):
            out.append(f"generator {n}")
    if x.numeric_checks != y.numeric_checks:
        out.append("generator check modes differ")
    if set(x.frames) != set(y.frames):
        out.append("frame names differ")
    for n in set(x.frames) & set(y.frames):
        f, g = x.frames[n], y.frames[n]
        if (f.action, f.components, f.mode, f.prolong, f.bases, f.reduced, f.anchor, f.extra) != (
                g.action, g.components, g.mode, g.prolong, g.bases, g.reduced, g.anchor, g.extra) or \
                [as_expr(c) for c in f.constants] != [as_expr(c) for c in g.constants]:
            out.append(f"frame {n}")
    if set(x.maps) != set(y.maps):
        out.append("map names differ")
    for n in set(x.maps) & set(y.maps):
        (t1, m1), (t2, m2) = x.maps[n], y.maps[n]
        if t1 != t2 or set(m1.targets) != set(m2.targets) or any(
                not _same(m1.targets[k], m2.targets[k]) for k in m1.targets):
            out.append(f"map {n}")
    return out
