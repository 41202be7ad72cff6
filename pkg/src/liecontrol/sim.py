"""Fixed-step RK4 simulation, trajectory comparison and CSV output."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .expr import EvalError
from .frames import FrameError
from .model import ControlSystem


class NumericFailure(RuntimeError):
    """Integration aborted; ``time`` is the grid time of the failing step."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    states: tuple[str, ...]
    inputs: tuple[str, ...]
    y: np.ndarray | None = None
    outputs: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        if self.x.shape[0] != n or self.u.shape[0] != n or (self.y is not None and self.y.shape[0] != n):
            raise ValueError("sample counts do not match the time grid")

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def channel(self, name: str) -> np.ndarray:
        for names, data in ((self.states, self.x), (self.inputs, self.u), (self.outputs, self.y)):
            if name in names:
                return data[:, names.index(name)]
        raise KeyError(f"no channel {name!r}")

    @property
    def channels(self) -> tuple[str, ...]:
        return self.states + self.inputs + self.outputs

    def final(self) -> np.ndarray:
        return self.x[-1]

    def to_csv(self, path, channels: Sequence[str] | None = None):
        write_csv(path, self, channels)


def write_csv(path, traj: Trajectory, channels: Sequence[str] | None = None):
    """Header ``t,<names>`` and ``%.17g`` values, one row per grid point."""
    channels = list(channels or traj.channels)
    cols = [traj.channel(c) for c in channels]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *channels])
        for i, t in enumerate(traj.t):
            w.writerow(["%.17g" % t, *("%.17g" % c[i] for c in cols)])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def _grid(horizon: float, h: float) -> int:
    if h <= 0 or horizon < 0:
        raise ValueError("need h > 0 and horizon >= 0")
    steps = int(round(horizon / h))
    if abs(steps * h - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a multiple of h = {h}")
    return steps


Feedback = Callable[[float, np.ndarray], Sequence[float]]


def integrate(sys: ControlSystem, x0: Sequence[float], horizon: float, h: float,
              feedback: Feedback | None = None, u: Sequence[float] | Callable | None = None,
              params: Mapping | None = None, outputs: Mapping[str, Callable] | None = None,
              name: str = "") -> Trajectory:
    """Classical RK4 on ``x' = f(t, x, u)``.

    ``feedback(t, x)`` is re-evaluated at every stage; otherwise ``u`` is a
    constant vector or a function of time.  Non-finite states and feedback
    domain errors abort with :class:`NumericFailure`.
    """
    steps = _grid(horizon, h)
    rhs = sys.numeric(params)
    m = sys.m
    if feedback is None:
        if u is None:
            u = np.zeros(m)
        if callable(u):
            ufun = u
            feedback = lambda t, x: ufun(t)  # noqa: E731
        else:
            uc = np.asarray(u, dtype=float).reshape(m)
            feedback = lambda t, x: uc  # noqa: E731

    def control(t, x):
        try:
            val = np.asarray(feedback(t, x), dtype=float).reshape(m)
        except (FrameError, EvalError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
            raise NumericFailure(f"feedback failed: {exc}", t) from exc
        if not np.all(np.isfinite(val)):
            raise NumericFailure("feedback returned a non-finite value", t)
        return val

    def f(t, x):
        try:
            return rhs(t, x, control(t, x))
        except EvalError as exc:
            raise NumericFailure(f"dynamics undefined: {exc}", t) from exc

    n = sys.n
    T = np.arange(steps + 1) * h
    X = np.empty((steps + 1, n))
    U = np.empty((steps + 1, m))
    x = np.asarray(x0, dtype=float).reshape(n)
    X[0] = x
    for k in range(steps):
        t = T[k]
        U[k] = control(t, x)
        # overflow is caught by the finiteness test below
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = f(t, x)
            k2 = f(t + h / 2, x + h / 2 * k1)
            k3 = f(t + h / 2, x + h / 2 * k2)
            k4 = f(t + h, x + h * k3)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NumericFailure("state became non-finite", T[k + 1])
        X[k + 1] = x
    U[steps] = control(T[steps], x)
    Y = None
    onames: tuple[str, ...] = ()
    if outputs:
        onames = tuple(outputs)
        Y = np.array([[outputs[o](T[i], X[i]) for o in onames] for i in range(steps + 1)])
    return Trajectory(T, X, U, tuple(s.name for s in sys.states), tuple(s.name for s in sys.inputs), Y, onames,
                      {"system": name or sys.name, "h": h, "horizon": horizon,
                       "params": {str(k): v for k, v in (params or {}).items()}})


@dataclass
class ChannelDeviation:
    channel: str
    sup: float
    at: float


@dataclass
class CompareReport:
    channels: list[ChannelDeviation]

    def __getitem__(self, name: str) -> ChannelDeviation:
        for c in self.channels:
            if c.channel == name:
                return c
        raise KeyError(name)

    @property
    def sup(self) -> float:
        return max((c.sup for c in self.channels), default=0.0)

    def __str__(self):
        return "\n".join(f"{c.channel}: sup |diff| = {c.sup:.3e} at t = {c.at:.6g}" for c in self.channels)


def compare(a: Trajectory, b: Trajectory, channels: Sequence[str] | None = None,
            b_channels: Sequence[str] | None = None) -> CompareReport:
    """Per-channel sup-norm of ``a - b`` and the time of the maximum."""
    if len(a.t) != len(b.t) or not np.allclose(a.t, b.t, rtol=0, atol=1e-12):
        raise ValueError("trajectories are on different time grids")
    channels = list(channels or [c for c in a.channels if c in b.channels])
    b_channels = list(b_channels or channels)
    out = []
    for ca, cb in zip(channels, b_channels):
        d = np.abs(a.channel(ca) - b.channel(cb))
        i = int(np.argmax(d))
        out.append(ChannelDeviation(ca, float(d[i]), float(a.t[i])))
    return CompareReport(out)


def map_trajectory(traj: Trajectory, fn: Callable[[np.ndarray], Sequence[float]], names: Sequence[str]) -> Trajectory:
    """Apply a state map pointwise (e.g. the invariants of a reduction)."""
    X = np.array([np.asarray(fn(x), dtype=float) for x in traj.x])
    return Trajectory(traj.t, X, traj.u, tuple(names), traj.inputs, None, (), dict(traj.meta))


# ---------------------------------------------------------------------------
# bioreactor kinetic switch


@dataclass
class KineticSwitchResult:
    haldane: Trajectory
    michaelis_menten: Trajectory
    report: CompareReport
    s_gap: float


def kinetic_switch(horizon: float = 20.0, h: float = 1e-3, p0: float = 0.45, b0: float = 0.6,
                   c: float = 1.0, b_star: float = 0.5, poles: Sequence[float] = (-1.0, -1.5),
                   values: Mapping | None = None) -> KineticSwitchResult:
    """Closed loops of the Haldane and Michaelis-Menten realizations.

    Both plants run the invariantizing feedback with one set-point
    stabilizer acting on the invariants.  The Michaelis-Menten plant starts
    at the image of the Haldane initial state under the kinetic shift with
    ``a = -K_I``, so both share the same invariants.
    """
    from .control import bioreactor_family, bioreactor_stabilizer, derive_controlled_symmetry, invariantizing_feedback

    fam = bioreactor_family(**(values or {}))
    cs = derive_controlled_symmetry(fam)
    vals = {k: float(v) for k, v in fam.defaults.items()}
    fb = invariantizing_feedback(cs, c, vals)
    stab = bioreactor_stabilizer(c, b_star, poles, vals)
    plant = fam.augmented()
    KI = vals["K_I"]
    xH = np.array([KI, p0, b0, c])
    xM, _ = cs.transform(xH, [1.0, 1.0], -KI, vals)

    def make_feedback(x_init):
        warm = [fb.gamma(x_init, 0.0)]

        def fbk(t, x):
            a = fb.gamma(x, warm[0])
            warm[0] = a
            v = stab(np.array([x[0] + a, x[1], x[2]]))
            return fb.U(x, v, a)

        return fbk

    fH, fM = make_feedback(xH), make_feedback(xM)
    trH = integrate(plant, xH, horizon, h, feedback=fH, name="bioreactor_haldane")
    trM = integrate(plant, xM, horizon, h, feedback=fM, name="bioreactor_mm")
    rep = compare(trH, trM, ["p", "b"])
    s_gap = float(np.max(np.abs(trH.channel("s") - trM.channel("s"))))
    return KineticSwitchResult(trH, trM, rep, s_gap)
