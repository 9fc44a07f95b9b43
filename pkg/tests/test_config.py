import math
import pathlib

import pytest
from hypothesis import given, settings, strategies as st

from perspectival.bell import chsh
from perspectival.config import (
    ConfigError,
    RunConfig,
    build_scenario,
    emit_config,
    load_config,
    parse_config,
    parse_table,
)
from perspectival.relativity import LAB, SpacetimePoint, order_events
from perspectival.scenarios import CHSH_ANGLES, perspectival_consistency

FULL = """\
# four-party run in degrees
[scenario]
name = four-party

[angles]
a = 0 deg
b = 45 deg
c = 90 deg
d = 135 deg

[frames]
betas = 0, 0.6

[execution]
runs = 20000
seed = 3
format = csv
"""


def test_parse_full_config():
    c = parse_config(FULL)
    assert c.scenario == "four-party" and c.runs == 20000 and c.seed == 3 and c.format == "csv"
    assert c.betas == (0.0, 0.6)
    for k in "abcd":
        assert c.angles[k] == pytest.approx(CHSH_ANGLES[k], abs=1e-15)


def test_degrees_config_gives_quantum_chsh():
    s = build_scenario(parse_config(FULL))
    r = perspectival_consistency(s, runs=20_000, seed=3)
    assert r.chsh == pytest.approx(-2 * math.sqrt(2), abs=4 * r.tolerance)
    from_angles = [-math.cos(s.protocol.measurement(x).direction.angle_to(s.protocol.measurement(y).direction))
                   for x, y in (("A", "B"), ("A", "D"), ("C", "B"), ("C", "D"))]
    assert from_angles[0] - from_angles[1] + from_angles[2] + from_angles[3] == pytest.approx(-2 * math.sqrt(2), abs=1e-12)


def test_emit_parse_round_trip():
    c = parse_config(FULL)
    assert parse_config(emit_config(c)) == c
    assert emit_config(parse_config(emit_config(c))) == emit_config(c)


betas = st.lists(st.floats(-0.99, 0.99, allow_nan=False), min_size=1, max_size=4)


@settings(max_examples=60)
@given(
    st.sampled_from(["gao-single", "gao-repeated", "four-party"]),
    betas,
    st.integers(0, 2**64 - 1),
    st.one_of(st.none(), st.integers(1, 10**7)),
    st.floats(-4, 4, allow_nan=False),
)
def test_round_trip_property(name, bs, seed, runs, angle):
    kw = {"scenario": name, "betas": tuple(bs), "seed": seed, "runs": runs}
    if name == "four-party":
        kw["angles"] = {"a": angle, "b": 0.0, "c": 1.0, "d": -angle}
        kw["geometry"] = {"bob_measure": SpacetimePoint(5.0, 10.0 + abs(angle))}
    if name == "gao-repeated":
        kw["repeats"] = 3
    c = RunConfig(**kw)
    back = parse_config(emit_config(c))
    assert back == c
    assert back.betas == c.betas and back.angles == c.angles and back.seed == c.seed


def test_dict_round_trip():
    c = parse_config(FULL)
    assert RunConfig.from_dict(c.to_dict()) == c


def test_unknown_key_reports_position():
    text = "[scenario]\nname = gao-single\n[execution]\n  colour = red\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == 4 and exc.value.column == 3
    assert str(exc.value).startswith("line 4, column 3:") and "colour" in str(exc.value)


def test_beta_out_of_range():
    with pytest.raises(ConfigError, match="frame velocity out of range") as exc:
        parse_config("[frames]\nbetas = 0, 1.5\n")
    assert exc.value.line == 2
    with pytest.raises(ConfigError, match="frame velocity out of range"):
        RunConfig(betas=(1.5,))


@pytest.mark.parametrize(
    "text, message",
    [
        ("[scenario]\nname = gao-double\n", "unknown scenario"),
        ("[nope]\n", "unknown section"),
        ("[scenario]\nname = gao-single\nname = four-party\n", "duplicate key"),
        ("[scenario]\n[scenario]\n", "appears twice"),
        ("name = gao-single\n", "before any"),
        ("[angles]\na = 45\n", "deg"),
        ("[execution]\nseed = -1\n", "seed"),
        ("[execution]\nruns = many\n", "integer"),
        ("[scenario]\nname = gao-single\n[angles]\na = 1 rad\n", "four-party only"),
        ("[scenario]\nname = gao-single\nrepeats = 3\n", "repeats"),
        ("[geometry]\nalice_measure = 0, 0\n", r"\(t, x\)"),
        ("[scenario]\n = x\n", "key"),
        ("[execution]\nformat = xml\n", "format"),
    ],
)
def test_config_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_builtin_names_build():
    s = build_scenario(RunConfig(scenario="gao-single"))
    assert [o.id for o in order_events(s.protocol.ops, LAB)] == ["A", "A~", "B"]
    assert len(build_scenario(RunConfig(scenario="gao-repeated")).protocol.measurement_ids) == 11
    assert build_scenario(RunConfig(scenario="gao-many", pairs=500)).default_runs == 500


def test_partial_angles_rejected():
    with pytest.raises(ConfigError, match="all four angles"):
        build_scenario(RunConfig(angles={"a": 0.0}))


def test_bad_geometry_becomes_config_error():
    c = RunConfig(scenario="gao-single", geometry={"bob_start": SpacetimePoint(5.0, 1.0)})
    with pytest.raises(ConfigError, match="spacelike"):
        build_scenario(c)


def test_betas_replace_frames():
    s = build_scenario(RunConfig(scenario="gao-single", betas=(0.0, 0.12, -0.2)))
    assert [f.beta for f in s.frames] == [0.0, 0.12, -0.2]


TABLE = """\
[expectations]
ab = -0.7071067811865476
ad = 0.7071067811865476
cb = -0.7071067811865476
cd = -0.7071067811865476
"""


def test_parse_table_expectations():
    q = parse_table(TABLE)
    assert chsh(q.table, q.pairing) == pytest.approx(-2 * math.sqrt(2), abs=1e-12)
    assert q.target is None


def test_parse_table_angles_and_query():
    q = parse_table("[angles]\na = 0 deg\nb = 45 deg\nc = 90 deg\nd = 135 deg\n[table]\npairs = cd, ad, ab\n[query]\ntarget = bc\n")
    assert q.target == ("b", "c") and len(q.table.expectations) == 3
    assert q.table.expectation("ad") == pytest.approx(math.sqrt(2) / 2)


def test_parse_table_joints_and_marginals():
    q = parse_table("[joints]\nab = 0.4, 0.1, 0.1, 0.4\n[marginals]\na = 0\nb = 0\n")
    assert q.table.expectation("ab") == pytest.approx(0.6)


@pytest.mark.parametrize(
    "text, message",
    [
        ("[expectations]\nax = 0.1\n", "invalid pair"),
        ("[joints]\nab = 0.5, 0.5\n", "four probabilities"),
        ("[expectations]\nab = 2\n", r"\[-1, 1\]"),
        ("[angles]\na = 0 deg\n", "must define"),
        ("[angles]\na = 0 deg\nb = 0 deg\nc = 0 deg\nd = 0 deg\n[expectations]\nba = 0.1\n", "both"),
        ("[joints]\nab = 0.5, 0, 0, 0.5\nac = 0.7, 0.1, 0.1, 0.1\n", "inconsistent input marginals"),
    ],
)
def test_table_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_table(text)


CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")), ids=lambda p: p.name)
def test_shipped_configs_build(path):
    c = load_config(str(path))
    assert parse_config(emit_config(c)) == c
    build_scenario(c)


def test_shipped_tables():
    q = parse_table((CONFIGS / "chsh_quantum.tbl").read_text())
    assert chsh(q.table, q.pairing) == pytest.approx(-2 * math.sqrt(2), abs=1e-12)
    q = parse_table((CONFIGS / "bc_range.tbl").read_text())
    assert q.target == ("b", "c")
