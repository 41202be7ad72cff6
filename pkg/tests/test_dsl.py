from pathlib import Path

import pytest

from liecontrol import systems
from liecontrol.dsl import DSLError, LoadError, differences, dumps, load, loads
from liecontrol.expr import symbol

SHIPPED = Path(__file__).resolve().parent.parent / "systems"

SMALL = """\
# a comment
[system]
name = tiny

[states]
x1, x2

[inputs]
u

[params]
k = 2
m

[dynamics]
x1 = x2
x2 = -k*x1 + u/m

[generator shift]
x1 = 0
"""


@pytest.mark.parametrize("name", systems.NAMES)
def test_round_trip(name):
    entry = systems.get(name)
    again = loads(dumps(entry), source=name)
    assert differences(entry, again) == []


@pytest.mark.parametrize("name", systems.NAMES)
def test_shipped_files_match_catalog(name):
    assert differences(systems.get(name), load(SHIPPED / f"{name}.sys")) == []


def test_small_file():
    entry = loads(SMALL)
    sys = entry.system
    assert sys.name == "tiny"
    assert sys.states == (symbol("x1"), symbol("x2"))
    assert sys.params == {symbol("k"): 2, symbol("m"): None}
    assert "shift" in entry.generators


def test_plain_system_dump():
    text = dumps(systems.get("car").system)
    assert "[dynamics]" in text and "[action" not in text
    assert loads(text).system.dynamics == systems.get("car").system.dynamics


@pytest.mark.parametrize("text,line,fragment", [
    ("[system]\nname = a\n[bogus]\n", 3, "unknown section"),
    ("[action]\n", 1, "needs a name"),
    ("[states] x\n", 1, "malformed"),
    ("x = 1\n", 1, "before the first section"),
    ("[states]\nx\n[params]\nk = abc\n[dynamics]\nx = k\n", 4, "expected a number"),
    ("[states]\nx\n[dynamics]\nx = x +* 2\n", 4, ""),
    ("[states]\nx\n[dynamics]\nx = 1\nx = 2\n", 5, "duplicate"),
    ("[states]\nx = 1\n", 2, "bare names"),
    ("[states]\nx\n[dynamics]\nx = x\n[action g]\nparams = a\nlaw = magic\nx = x + a\n", 7, "composition law"),
    ("[states]\nx\n[dynamics]\nx = x\n[generator g]\ny = 1\n", 6, "not a coordinate"),
    ("[states]\nx\n[dynamics]\nx = x\n[action g]\nparams = a\nx = x+a\n[frame f]\naction = h\n", 9, "unknown action"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(DSLError) as info:
        loads(text, source="bad.sys")
    assert info.value.line == line
    assert f"bad.sys:{line}:" in str(info.value)
    assert fragment in str(info.value)


def test_missing_dynamics():
    with pytest.raises(DSLError, match="no dynamics"):
        loads("[states]\nx, y\n[dynamics]\nx = y\n")


def test_false_generator_is_a_load_error():
    text = SMALL.replace("[generator shift]\nx1 = 0", "[generator bad]\nx1 = 1")
    with pytest.raises(LoadError) as info:
        loads(text, source="tiny.sys")
    assert "bad" in str(info.value)
    assert info.value.line > 0
    # verification can be skipped
    assert "bad" in loads(text, verify=False).generators


def test_broken_map_is_a_load_error():
    text = dumps(systems.get("pvtol")).replace("z1 = -eps*sin(theta) + y1", "z1 = -2*eps*sin(theta) + y1")
    with pytest.raises(LoadError):
        loads(text)


def test_map_target_from_sibling_file(tmp_path):
    (tmp_path / "target.sys").write_text(dumps(systems.get("pvtol_reduced")))
    text = dumps(systems.get("pvtol")).replace("target = pvtol_reduced", "target = target.sys")
    path = tmp_path / "src.sys"
    path.write_text(text)
    assert "to_reduced" in load(path).maps


def test_numeric_check_flag_survives():
    text = dumps(systems.get("bioreactor_augmented"))
    assert "check = numeric" in text
