import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liecontrol.model import system
from liecontrol.sim import (
    NumericFailure,
    Trajectory,
    compare,
    integrate,
    kinetic_switch,
    map_trajectory,
    read_csv,
    write_csv,
)


def car_inputs(t):
    return [1.0 + 0.3 * np.sin(t), 0.4 * np.cos(0.7 * t)]


def test_oscillator_returns_after_one_period(oscillator):
    # 2 pi is not a multiple of 1e-3, so the nearest uniform grid is used
    n = round(2 * math.pi / 1e-3)
    tr = integrate(oscillator.system, [1.0, 0.0], 2 * math.pi, 2 * math.pi / n)
    assert np.max(np.abs(tr.final() - [1.0, 0.0])) < 1e-8


def test_zero_dynamics_constant():
    sys = system("still", ["x", "y"], [], ["0", "0"])
    tr = integrate(sys, [0.3, -2.0], 1.0, 0.1)
    assert np.all(tr.x == np.array([0.3, -2.0]))


def test_car_straight_line(car):
    tr = integrate(car.system, [0, 0, 0], 1.0, 1e-3, u=[1.0, 0.0])
    assert np.max(np.abs(tr.final() - [1.0, 0.0, 0.0])) < 1e-10


def test_rk4_order_factor(oscillator):
    T = 10.0
    errs = []
    for h in (4e-3, 2e-3, 1e-3):
        tr = integrate(oscillator.system, [1.0, 0.0], T, h)
        errs.append(np.max(np.abs(tr.final() - [math.cos(T), -math.sin(T)])))
    assert errs[0] / errs[1] >= 12
    assert errs[1] / errs[2] >= 12


def test_feedback_re_evaluated_at_every_stage():
    # x' = -x as feedback u = -x on x' = u: RK4 must match the open-loop RK4 of x' = -x
    plant = system("int", ["x"], ["u"], ["u"])
    ref = system("decay", ["x"], [], ["-x"])
    a = integrate(plant, [1.0], 2.0, 0.1, feedback=lambda t, x: [-x[0]])
    b = integrate(ref, [1.0], 2.0, 0.1)
    assert np.max(np.abs(a.x - b.x)) < 1e-15


def test_time_varying_input_and_outputs(car):
    tr = integrate(car.system, [0, 0, 0], 1.0, 1e-2, u=car_inputs, outputs={"r": lambda t, x: x[0] ** 2 + x[1] ** 2})
    assert tr.channels == ("z1", "z2", "theta", "v", "phi", "r")
    assert np.allclose(tr.channel("v"), [car_inputs(t)[0] for t in tr.t])
    assert np.allclose(tr.channel("r"), tr.x[:, 0] ** 2 + tr.x[:, 1] ** 2)


def test_grid_must_divide_horizon(oscillator):
    with pytest.raises(ValueError):
        integrate(oscillator.system, [1.0, 0.0], 1.0, 0.3)
    with pytest.raises(ValueError):
        integrate(oscillator.system, [1.0, 0.0], 1.0, 0.0)


def test_nonfinite_state_reports_time():
    sys = system("blow", ["x"], [], ["x^2"])
    with pytest.raises(NumericFailure) as info:
        integrate(sys, [1.0], 2.0, 1e-2)
    # the exact solution 1/(1 - t) blows up at t = 1
    assert 1.0 <= info.value.time <= 1.1


def test_domain_error_reports_time():
    sys = system("sq", ["x"], [], ["-sqrt(x)"])
    with pytest.raises(NumericFailure) as info:
        integrate(sys, [0.5], 3.0, 1e-2)
    # x reaches 0 at t = 2 sqrt(0.5)
    assert abs(info.value.time - 2 * math.sqrt(0.5)) < 0.02


def test_feedback_failure_reports_time():
    plant = system("int", ["x"], ["u"], ["u"])

    def bad(t, x):
        if t > 0.5:
            raise ZeroDivisionError("boom")
        return [0.0]

    with pytest.raises(NumericFailure) as info:
        integrate(plant, [1.0], 1.0, 0.1, feedback=bad)
    assert 0.5 < info.value.time <= 0.6


def test_trajectory_sample_counts_checked():
    with pytest.raises(ValueError):
        Trajectory(np.arange(3.0), np.zeros((2, 1)), np.zeros((3, 0)), ("x",), ())


# -- symmetry transport -----------------------------------------------------


@settings(max_examples=5, deadline=None)
@given(st.tuples(*[st.floats(-1, 1) for _ in range(3)]))
def test_car_se2_transport(a):
    from liecontrol import systems

    car = systems.get("car")
    act = car.actions["se2"]
    x0 = {"z1": 0.3, "z2": -0.2, "theta": 0.5}
    coords = car.system.states
    tr = integrate(car.system, [x0[c.name] for c in coords], 5.0, 1e-3, u=car_inputs)
    gx0 = act.apply(x0, a)
    gtr = integrate(car.system, [gx0[c] for c in coords], 5.0, 1e-3, u=car_inputs)
    moved = np.array([[act.apply(dict(zip(coords, x)), a)[c] for c in coords] for x in tr.x[::50]])
    assert np.max(np.abs(moved - gtr.x[::50])) < 1e-6


@settings(max_examples=5, deadline=None)
@given(st.floats(-1, 1))
def test_oscillator_scaling_transport(a):
    from liecontrol import systems

    osc = systems.get("oscillator")
    act = osc.actions["scale"]
    tr = integrate(osc.system, [1.0, 0.3], 5.0, 1e-3)
    gx0 = act.apply({"phi": 1.0, "dphi": 0.3}, [a])
    gtr = integrate(osc.system, [gx0[c] for c in osc.system.states], 5.0, 1e-3)
    assert np.max(np.abs(math.exp(a) * tr.x - gtr.x)) < 1e-6


# -- comparison and CSV -----------------------------------------------------


def test_compare_identical_is_zero(car):
    tr = integrate(car.system, [0, 0, 0], 1.0, 1e-2, u=car_inputs)
    rep = compare(tr, tr)
    assert rep.sup == 0.0
    assert rep["theta"].sup == 0.0


def test_compare_reports_location(oscillator):
    a = integrate(oscillator.system, [1.0, 0.0], 2.0, 1e-2)
    b = integrate(oscillator.system, [1.1, 0.0], 2.0, 1e-2)
    rep = compare(a, b, ["phi"])
    i = int(np.argmax(np.abs(a.x[:, 0] - b.x[:, 0])))
    assert rep["phi"].sup == pytest.approx(abs(a.x[i, 0] - b.x[i, 0]))
    assert rep["phi"].at == pytest.approx(a.t[i])
    assert "phi: sup |diff|" in str(rep)


def test_compare_grid_mismatch(oscillator):
    a = integrate(oscillator.system, [1.0, 0.0], 1.0, 1e-2)
    b = integrate(oscillator.system, [1.0, 0.0], 1.0, 2e-2)
    with pytest.raises(ValueError):
        compare(a, b)


def test_map_trajectory(oscillator):
    tr = integrate(oscillator.system, [1.0, 0.0], 1.0, 1e-2)
    m = map_trajectory(tr, lambda x: [x[1] / x[0]], ["w"])
    assert m.states == ("w",)
    assert np.allclose(m.channel("w"), tr.x[:, 1] / tr.x[:, 0])


def test_csv_format(tmp_path, oscillator):
    tr = integrate(oscillator.system, [1.0, 0.0], 0.1, 0.05)
    path = tmp_path / "osc.csv"
    write_csv(path, tr)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,phi,dphi"
    assert len(lines) == 4
    assert lines[1] == "0,1,0"
    assert lines[2].split(",")[1] == "%.17g" % tr.x[1, 0]
    names, data = read_csv(path)
    assert names == ["t", "phi", "dphi"]
    assert np.array_equal(data[:, 1:], tr.x)


def test_short_kinetic_switch():
    res = kinetic_switch(horizon=2.0, h=1e-2)
    assert res.report.sup < 1e-6
    assert res.s_gap > 1e-3
