import pytest
import sympy as sp

from liecontrol import systems
from liecontrol.expr import is_zero, parse, symbol
from liecontrol.geometry import SystemMap, check_lie_backlund_map
from liecontrol.symmetry import check_symmetry


@pytest.mark.parametrize("name", systems.NAMES)
def test_every_entry_loads_and_self_checks(name):
    entry = systems.get(name)
    assert entry.name == name
    assert entry.provenance
    entry.self_check()


def test_unknown_name():
    with pytest.raises(systems.UnknownSystem):
        systems.get("nonexistent")


def test_car_model(car):
    z1, z2, th, v, phi, l = (symbol(n) for n in ("z1", "z2", "theta", "v", "phi", "l"))
    expected = [v * sp.cos(th), v * sp.sin(th), v / l * sp.tan(phi)]
    assert car.system.states == (z1, z2, th)
    assert car.system.inputs == (v, phi)
    assert all(is_zero(a - b) for a, b in zip(car.system.dynamics, expected))
    assert set(car.generators) == {"v1", "v2", "v3"}


def test_bioreactor_model():
    entry = systems.get("bioreactor")
    p, b, s, D, sF = (symbol(n) for n in ("p", "b", "s", "D", "s_F"))
    al, be, nm, mm, K, KS, KI = (symbol(n) for n in ("alpha", "beta", "nu_m", "mu_m", "K", "K_S", "K_I"))
    nu = nm * b / (b + KS + KI * b**2)
    mu = mm * s / (K + s)
    expected = [-D * p + nu * p, -D * b + mu * b - al * nu * p, D * (sF - s) - be * mu * b]
    assert all(is_zero(a - e) for a, e in zip(entry.system.dynamics, expected))
    mm_sys = entry.extra["mm"]
    assert all(is_zero(a - e.subs(KI, 0)) for a, e in zip(mm_sys.dynamics, expected))
    assert KI not in mm_sys.params


def test_bioreactor_fixture_parameters():
    params = {k.name: v for k, v in systems.get("bioreactor").system.params.items()}
    assert params == {"alpha": 1, "beta": 1, "nu_m": 1, "mu_m": 1, "K": 1, "K_S": 1, "K_I": 1}


def test_augmented_bioreactor_keeps_inhibition_constant():
    entry = systems.get("bioreactor_augmented")
    KI = symbol("K_I")
    assert entry.system.states[0] == KI
    assert entry.system.dynamics[0] == 0
    assert entry.generators["kinetic_shift"][KI] == 1


def test_second_order_systems_in_first_order_form(oscillator, pvtol):
    assert [s.name for s in oscillator.system.states] == ["phi", "dphi"]
    assert [s.name for s in pvtol.system.states] == ["y1", "y2", "theta", "dy1", "dy2", "dtheta"]
    params = {k.name: v for k, v in pvtol.system.params.items()}
    assert params == {"g": 9.81, "eps": 0.1}


def test_pvtol_map_and_perturbation(pvtol):
    target, m = pvtol.maps["to_reduced"]
    red = systems.get(target).system
    assert check_lie_backlund_map(m, pvtol.system, red)
    bad = dict(m.targets)
    bad[symbol("z1")] = parse("y1 - 2*eps*sin(theta)")
    assert not check_lie_backlund_map(SystemMap(bad), pvtol.system, red)


def test_stored_generators_symbolic_symmetries(car, oscillator, pvtol):
    for entry in (car, oscillator, pvtol, systems.get("pvtol_reduced")):
        for g in entry.generators.values():
            assert check_symmetry(entry.system, g)


def test_catalog_frame_listing():
    pairs = systems.frames()
    assert ("car", "rot0") in pairs
    assert ("bioreactor_augmented", "s_norm") in pairs
    assert all(f in systems.get(s).frames for s, f in pairs)


def test_expressions_cover_catalog():
    exprs = systems.expressions()
    assert len(exprs) > 30
    assert all(isinstance(e, sp.Expr) for e in exprs)
