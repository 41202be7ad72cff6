"""Catalog of example systems with their symmetry data.

Each entry bundles a :class:`ControlSystem`, group actions, generators,
known outputs, frame specifications and maps to other entries.  Stored
generators are re-verified as symmetries when an entry is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import sympy as sp

from .control import bioreactor_family, derive_controlled_symmetry
from .expr import as_expr, simplify, substitute, symbol
from .frames import MovingFrame, solve_frame
from .geometry import SystemMap, VectorField, check_lie_backlund_map
from .model import ControlSystem, system
from .symmetry import GroupAction, additive_law, check_symmetry, generator_from_action, se2_law

NAMES = ("oscillator", "car", "pvtol", "pvtol_reduced", "bioreactor", "bioreactor_augmented")


class UnknownSystem(KeyError):
    pass


class CatalogError(RuntimeError):
    pass


@dataclass
class FrameSpec:
    """Recipe for a moving frame: action, normalized components and constants.

    ``prolong``/``bases`` prolong the action to jets before normalizing;
    ``reduced`` names the transverse states when the frame is used for
    reduction.
    """

    action: str
    components: tuple[str, ...]
    constants: tuple = ()
    mode: str = "symbolic"
    prolong: int = 0
    bases: tuple[str, ...] = ()
    reduced: tuple[str, ...] = ()
    anchor: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


@dataclass
class CatalogEntry:
    name: str
    system: ControlSystem
    actions: dict[str, GroupAction] = field(default_factory=dict)
    generators: dict[str, VectorField] = field(default_factory=dict)
    outputs: dict[str, sp.Expr] = field(default_factory=dict)
    frames: dict[str, FrameSpec] = field(default_factory=dict)
    maps: dict[str, tuple[str, SystemMap]] = field(default_factory=dict)
    provenance: str = ""
    numeric_checks: frozenset = frozenset()
    extra: dict = field(default_factory=dict)

    def frame(self, name: str) -> MovingFrame:
        spec = self.frames[name]
        act = self.actions[spec.action]
        if spec.prolong:
            act = act.prolonged(spec.prolong, spec.bases, self.system.time)
        return solve_frame(act, list(spec.components), list(spec.constants) or None, spec.mode,
                           anchor=spec.anchor or None, name=name, extra=spec.extra or None)

    def self_check(self):
        for gname, g in self.generators.items():
            v = check_symmetry(self.system, g, symbolic=gname not in self.numeric_checks)
            if not v:
                raise CatalogError(f"{self.name}: generator {gname} is not a symmetry")
        for mname, (target, m) in self.maps.items():
            if not check_lie_backlund_map(m, self.system, _build(target).system):
                raise CatalogError(f"{self.name}: map {mname} fails its defining equations")


def _gens(action: GroupAction, names, sys: ControlSystem) -> dict[str, VectorField]:
    return {n: generator_from_action(action, k + 1).extend(sys.coords) for k, n in enumerate(names)}


def _oscillator() -> CatalogEntry:
    sys = system("oscillator", ["phi", "dphi"], [], ["dphi", "-omega^2*phi"], {"omega": 1})
    scale = GroupAction("scale", ["a"], {"phi": "exp(a)*phi", "dphi": "exp(a)*dphi"},
                        multiplicative={"phi", "dphi"}, law=additive_law)
    yscale = GroupAction("yscale", ["a"], {"y": "exp(a)*y"}, multiplicative={"y"}, law=additive_law)
    return CatalogEntry(
        "oscillator", sys,
        {"scale": scale, "yscale": yscale},
        _gens(scale, ["scaling"], sys),
        {"y": symbol("phi")},
        {"unit": FrameSpec("scale", ("phi",), (1,), reduced=("w",)),
         "track": FrameSpec("yscale", ("y",), (1,))},
        provenance="harmonic oscillator in first-order form with its scaling symmetry",
    )


def _car() -> CatalogEntry:
    sys = system("car", ["z1", "z2", "theta"], ["v", "phi"],
                 ["v*cos(theta)", "v*sin(theta)", "v/l*tan(phi)"], {"l": 1})
    se2 = GroupAction("se2", ["a1", "a2", "a3"],
                      {"z1": "z1*cos(a1) - z2*sin(a1) + a2", "z2": "z1*sin(a1) + z2*cos(a1) + a3",
                       "theta": "theta + a1"}, law=se2_law)
    rot = GroupAction("rot", ["a"], {"z1": "z1*cos(a) - z2*sin(a)", "z2": "z1*sin(a) + z2*cos(a)",
                                     "theta": "theta + a"}, law=additive_law)
    yse2 = GroupAction("yse2", ["a1", "a2", "a3"],
                       {"y1": "y1*cos(a1) - y2*sin(a1) + a2", "y2": "y1*sin(a1) + y2*cos(a1) + a3"}, law=se2_law)
    return CatalogEntry(
        "car", sys,
        {"se2": se2, "rot": rot, "yse2": yse2},
        _gens(se2, ["v1", "v2", "v3"], sys),
        {"y1": symbol("z1"), "y2": symbol("z2")},
        {"rot0": FrameSpec("rot", ("theta",), (0,), reduced=("z1", "z2")),
         "se2_track": FrameSpec("yse2", ("y1", "y2", "y2'"), (0, 0, 0), prolong=1, bases=("y1", "y2"),
                                anchor={"y1": 0.3, "y2": 0.2, "y1'": 1.0, "y2'": 0.4})},
        provenance="kinematic car with the planar Euclidean group",
    )


_PVTOL_MAP = {
    "z1": "y1 - eps*sin(theta)",
    "z2": "y2 + eps*cos(theta)",
    "dz1": "dy1 - eps*cos(theta)*dtheta",
    "dz2": "dy2 - eps*sin(theta)*dtheta",
    "v1": "theta",
    "v2": "u1 - eps*dtheta^2",
}


def _pvtol() -> CatalogEntry:
    sys = system("pvtol", ["y1", "y2", "theta", "dy1", "dy2", "dtheta"], ["u1", "u2"],
                 ["dy1", "dy2", "dtheta", "-u1*sin(theta) + eps*u2*cos(theta)",
                  "u1*cos(theta) + eps*u2*sin(theta) + g", "u2"], {"g": 9.81, "eps": 0.1})
    shift = GroupAction("shift", ["a1", "a2"], {"y1": "y1 + a1", "y2": "y2 + a2"}, law=additive_law)
    return CatalogEntry(
        "pvtol", sys, {"shift": shift}, _gens(shift, ["d1", "d2"], sys),
        {"y1": symbol("y1"), "y2": symbol("y2")},
        {"track": FrameSpec("shift", ("y1", "y2"), (0, 0))},
        {"to_reduced": ("pvtol_reduced", SystemMap(_PVTOL_MAP))},
        provenance="planar vertical take-off and landing aircraft",
    )


def _pvtol_reduced() -> CatalogEntry:
    sys = system("pvtol_reduced", ["z1", "z2", "dz1", "dz2"], ["v1", "v2"],
                 ["dz1", "dz2", "-v2*sin(v1)", "v2*cos(v1) + g"], {"g": 9.81})
    shift = GroupAction("shift", ["a1", "a2"], {"z1": "z1 + a1", "z2": "z2 + a2"}, law=additive_law)
    return CatalogEntry(
        "pvtol_reduced", sys, {"shift": shift}, _gens(shift, ["d1", "d2"], sys),
        {"z1": symbol("z1"), "z2": symbol("z2")},
        {"track": FrameSpec("shift", ("z1", "z2"), (0, 0))},
        provenance="equivalent PVTOL representation in the flat coordinates",
    )


def _bioreactor() -> CatalogEntry:
    fam = bioreactor_family()
    sys = fam.system("haldane")
    return CatalogEntry(
        "bioreactor", sys, {}, {}, {"p": fam.p, "b": fam.b}, {},
        provenance="predator-prey chemostat with Haldane kinetics; fixture parameters",
        extra={"family": fam, "mm": fam.system("mm", "bioreactor_mm")},
    )


def _bioreactor_augmented() -> CatalogEntry:
    fam = bioreactor_family()
    cs = derive_controlled_symmetry(fam)
    sys = fam.augmented()
    act = cs.action()
    at0 = {fam.a: 0}
    gen = sys.field({
        fam.KI: 1,
        fam.s: simplify(substitute(sp.diff(cs.sigma, fam.a), at0)),
        fam.D: simplify(substitute(sp.diff(cs.delta, fam.a), at0)),
        fam.sF: substitute(sp.diff(cs.sigma_F, fam.a), at0),
    })
    extra = {k: v for k, v in fam.defaults.items() if k != "K_I"}
    return CatalogEntry(
        "bioreactor_augmented", sys, {"kinetic_shift": act}, {"kinetic_shift": gen},
        {"p": fam.p, "b": fam.b},
        {"s_norm": FrameSpec("kinetic_shift", ("s",), (1,), mode="numeric",
                             anchor={"K_I": 1.0, "p": 0.5, "b": 0.5, "s": 1.0}, extra=extra)},
        provenance="bioreactor with the inhibition constant as a constant state and the kinetic shift",
        numeric_checks=frozenset({"kinetic_shift"}),
        extra={"family": fam, "symmetry": cs},
    )


_BUILDERS = {
    "oscillator": _oscillator,
    "car": _car,
    "pvtol": _pvtol,
    "pvtol_reduced": _pvtol_reduced,
    "bioreactor": _bioreactor,
    "bioreactor_augmented": _bioreactor_augmented,
}


@lru_cache(maxsize=None)
def _build(name: str) -> CatalogEntry:
    return _BUILDERS[name]()


@lru_cache(maxsize=None)
def get(name: str) -> CatalogEntry:
    """Catalog entry by name, self-checked on first use."""
    if name not in _BUILDERS:
        raise UnknownSystem(f"unknown system {name!r}; known: {', '.join(NAMES)}")
    entry = _build(name)
    entry.self_check()
    return entry


def frames() -> list[tuple[str, str]]:
    """All ``(system, frame)`` pairs in the catalog."""
    return [(n, f) for n in NAMES for f in get(n).frames]


def expressions() -> list[sp.Expr]:
    """Every dynamics, output and action expression in the catalog."""
    out = []
    for n in NAMES:
        e = get(n)
        out.extend(e.system.dynamics)
        out.extend(as_expr(o) for o in e.outputs.values())
        for act in e.actions.values():
            out.extend(act.mapping.values())
    return out
