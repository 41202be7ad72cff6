import numpy as np
import pytest
import sympy as sp

from liecontrol.expr import compile_exprs, is_zero, symbol
from liecontrol.frames import solve_frame
from liecontrol.model import system
from liecontrol.reduction import ReductionError, check_state_symmetry, reduce
from liecontrol.sim import integrate
from liecontrol.symmetry import GroupAction, additive_law

v, phi, l = symbol("v"), symbol("phi"), symbol("l")
z1, z2 = symbol("z1"), symbol("z2")


def translation_example():
    sys = system("tr", ["x1", "x2"], ["u"], ["u", "x2"])
    act = GroupAction("shift", ["a"], {"x1": "x1 + a"}, law=additive_law)
    return sys, solve_frame(act, ["x1"], [0])


def car_inputs(t):
    return [1.0 + 0.3 * np.sin(t), 0.4 * np.cos(0.7 * t)]


# -- state symmetries -------------------------------------------------------


def test_car_state_symmetry(car):
    assert check_state_symmetry(car.system, list(car.generators.values()))


def test_controlled_invariant_is_not_invariant():
    sys = system("ci", ["x1", "x2"], ["u"], ["x1*u + x2", "x2"])
    v = check_state_symmetry(sys, [sys.field({"x1": 1})])
    assert not v
    u, x1 = symbol("u"), symbol("x1")
    # [v_f, d/dx1] = -u d/dx1
    assert is_zero(v.residuals[0] + u)
    assert x1 not in sp.sympify(v.residuals[0]).free_symbols


def test_empty_generators_are_trivially_symmetries(car):
    assert check_state_symmetry(car.system, [])


def test_generator_on_inputs_rejected(car):
    with pytest.raises(ValueError):
        check_state_symmetry(car.system, [car.system.field({"v": 1})])


# -- reduction --------------------------------------------------------------


def test_car_rotation_reduction_golden(car):
    red = reduce(car.system, car.frame("rot0"))
    assert red.transverse == (z1, z2)
    F1, F2 = red.F1, red.F2
    assert is_zero(F1[0] - (v + v / l * z2 * sp.tan(phi)))
    assert is_zero(F1[1] + v / l * z1 * sp.tan(phi))
    assert is_zero(F2[0] - v / l * sp.tan(phi))
    eta = red.orbit[0]
    for f in F1:
        assert eta not in f.free_symbols


def test_car_reduction_records_permutation(car):
    red = reduce(car.system, car.frame("rot0"))
    assert red.permutation == (2, 0, 1)
    assert red.constants == (0,)


def test_translation_reduction():
    sys, frame = translation_example()
    red = reduce(sys, frame)
    assert red.transverse == (symbol("x2"),)
    assert is_zero(red.F1[0] - symbol("x2"))
    assert is_zero(red.F2[0] - symbol("u"))


def test_oscillator_scaling_reduction(oscillator):
    frame = solve_frame(oscillator.actions["scale"], ["phi"], [1])
    red = reduce(oscillator.system, frame, names=["w"])
    w, omega = symbol("w"), symbol("omega")
    assert len(red.F1) == 1
    assert is_zero(red.F1[0] - (-omega**2 - w**2))
    assert is_zero(red.Xi[0] - symbol("dphi") / symbol("phi"))


def test_numeric_frame_rejected(car):
    frame = solve_frame(car.actions["rot"], ["theta"], [0], mode="numeric")
    with pytest.raises(ReductionError):
        reduce(car.system, frame)


def test_non_symmetry_rejected():
    sys = system("ci", ["x1", "x2"], ["u"], ["x1*u + x2", "x2"])
    frame = solve_frame(GroupAction("shift", ["a"], {"x1": "x1 + a"}), ["x1"], [0])
    with pytest.raises(ReductionError):
        reduce(sys, frame)


def test_wrong_name_count(car):
    with pytest.raises(ReductionError):
        reduce(car.system, car.frame("rot0"), names=["only_one"])


def test_report_lists_all_equations(car):
    text = reduce(car.system, car.frame("rot0")).report()
    assert "z1' =" in text and "z2' =" in text and "(orbit)" in text


# -- consistency with simulation --------------------------------------------


def _sup_error(sys, red, x0, u, horizon=5.0, h=1e-3):
    full = integrate(sys, x0, horizon, h, u=u)
    Xi = compile_exprs(list(red.Xi), list(sys.states))
    xi0 = np.asarray(Xi(*x0), dtype=float)
    reduced = integrate(red.transverse_system(), xi0, horizon, h, u=u)
    mapped = np.array([np.asarray(Xi(*x), dtype=float) for x in full.x])
    return float(np.max(np.abs(mapped - reduced.x)))


def test_car_reduction_matches_full_simulation(car):
    red = reduce(car.system, car.frame("rot0"))
    err = _sup_error(car.system, red, [0.3, -0.2, 0.5], car_inputs)
    assert err < 1e-6


def test_translation_reduction_matches_full_simulation():
    sys, frame = translation_example()
    red = reduce(sys, frame)
    err = _sup_error(sys, red, [1.0, 0.2], lambda t: [np.sin(t)])
    assert err < 1e-6


def test_orbit_subsystem_reconstructs_heading(car):
    red = reduce(car.system, car.frame("rot0"))
    x0 = [0.3, -0.2, 0.5]
    full = integrate(car.system, x0, 5.0, 1e-3, u=car_inputs)
    Xi = compile_exprs(list(red.Xi), list(car.system.states))
    xi0 = list(np.asarray(Xi(*x0), dtype=float))
    both = integrate(red.full_system(), xi0 + [0.5], 5.0, 1e-3, u=car_inputs)
    assert np.max(np.abs(both.channel("a") - full.channel("theta"))) < 1e-6
