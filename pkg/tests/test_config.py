from dataclasses import fields

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from penrose_fife import ScenarioConfig, build_problem, parse_config, serialize_config, validate_problem
from penrose_fife.config import CHOICES, parse_ladder
from penrose_fife.errors import ParseError, UnknownKey


def test_empty_text_is_the_default_scenario():
    cfg = parse_config("")
    assert cfg == ScenarioConfig()
    assert cfg.mesh.nodes == 128 and cfg.mesh.dimension == 1 and cfg.mesh.extent == 1.0
    assert cfg.time.T == 1.0 and cfg.time.N == 64
    assert cfg.kernel.name == "gaussian" and cfg.kernel.width == 0.1
    assert cfg.nonlinearity.beta == "cubic" and cfg.nonlinearity.pi_slope == -1.0
    spec = build_problem(cfg)
    x = spec.mesh.points[:, 0]
    np.testing.assert_allclose(spec.phi0, 0.5 * np.cos(np.pi * x))
    np.testing.assert_array_equal(spec.theta0, 1.0)
    np.testing.assert_array_equal(spec.v0, 0.0)
    assert spec.nonlinearity.pi_lipschitz == 1.0
    assert spec.sample_g(0.3)[0] == -1.0 and np.all(spec.sample_f(0.3) == 0.0)
    assert validate_problem(spec).ok


def test_zero_steps_rejected_with_line_number():
    with pytest.raises(ParseError) as info:
        parse_config("[time]\nT = 2.0\nN = 0\n")
    assert info.value.line == 3
    assert "N" in str(info.value)


def test_unknown_key_is_quoted():
    with pytest.raises(UnknownKey) as info:
        parse_config("[solver]\n\ntolerance = 1e-8\n")
    assert "'tolerance'" in str(info.value)
    assert info.value.line == 3


def test_unknown_section():
    with pytest.raises(UnknownKey) as info:
        parse_config("[mesh]\nnodes = 9\n[plots]\ncolour = red\n")
    assert info.value.line == 3


@pytest.mark.parametrize("text,line", [
    ("nodes = 3\n", 1),
    ("[mesh]\nnodes = many\n", 2),
    ("[mesh]\nnodes = 9\nnodes = 10\n", 3),
    ("[kernel]\nname = lorentzian\n", 2),
    ("[solver]\ntol = nan\n", 2),
    ("[mesh]\ndimension = 3\n", 2),
    ("[time]\n# comment\nladder = 5..2\n", None),
])
def test_malformed_input(text, line):
    with pytest.raises(ParseError) as info:
        parse_config(text)
    if line is not None:
        assert info.value.line == line


def test_ladder_syntax():
    assert parse_ladder("5..10") == [5, 6, 7, 8, 9, 10]
    assert parse_ladder("3, 1,2") == [1, 2, 3]
    with pytest.raises(ParseError):
        parse_ladder("five")


def test_presets_build_valid_problems(tmp_path):
    table = tmp_path / "kernel.csv"
    table.write_text("radius,value\n0.0,1.0\n0.2,0.5\n0.4,0.0\n")
    text = f"""
[mesh]
nodes = 33
[kernel]
name = custom-table
table = {table}
[nonlinearity]
beta = custom
beta_poly = 0.5, 0.0, 1.0
pi_slope = -0.5
[data]
f = sine
f_value = 0.1
f_amp = 0.2
g = pulsed
g_amp = 0.5
theta0 = linear
theta0_slope = 0.5
phi0 = random
phi0_amp = 0.3
v0 = cosine
v0_value = 0.1
seed = 4
"""
    spec = build_problem(parse_config(text))
    assert validate_problem(spec).ok
    assert spec.kernel.samples.max() == pytest.approx(1.0)
    assert spec.nonlinearity.beta(np.array(1.0)) == pytest.approx(1.5)
    assert spec.sample_g(0.5)[0] == pytest.approx(-1.5)
    assert spec.theta0[-1] == pytest.approx(1.5)
    again = build_problem(parse_config(text))
    np.testing.assert_array_equal(spec.phi0, again.phi0)


def test_positive_boundary_preset_fails_validation():
    spec = build_problem(parse_config("[data]\ng_value = 1.0\n"))
    assert any("boundary sign" in v for v in validate_problem(spec).violations)


# -- round trip ---------------------------------------------------------------

safe_text = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789_./-", min_size=1, max_size=12)
finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6)


@st.composite
def configs(draw):
    cfg = ScenarioConfig()
    cfg.mesh.dimension = draw(st.sampled_from([1, 2]))
    cfg.mesh.nodes = draw(st.integers(3, 500))
    cfg.mesh.extent = draw(st.floats(1e-3, 1e3))
    cfg.kernel.name = draw(st.sampled_from(sorted(CHOICES[("kernel", "name")])))
    cfg.kernel.width = draw(st.floats(1e-3, 10.0))
    cfg.kernel.strength = draw(finite)
    cfg.kernel.table = draw(st.one_of(st.just(""), safe_text))
    cfg.nonlinearity.beta = draw(st.sampled_from(sorted(CHOICES[("nonlinearity", "beta")])))
    cfg.nonlinearity.beta_coeff = draw(finite)
    cfg.nonlinearity.beta_poly = ", ".join(repr(x) for x in draw(st.lists(finite, min_size=1, max_size=4)))
    cfg.nonlinearity.pi_slope = draw(finite)
    cfg.nonlinearity.pi_lipschitz = draw(st.one_of(st.none(), st.floats(0.0, 100.0)))
    for key in ("f", "g", "theta0", "phi0", "v0"):
        setattr(cfg.data, key, draw(st.sampled_from(sorted(CHOICES[("data", key)]))))
    cfg.data.g_value = draw(finite)
    cfg.data.phi0_amp = draw(finite)
    cfg.data.seed = draw(st.integers(0, 2**31))
    cfg.time.T = draw(st.floats(1e-3, 1e3))
    cfg.time.N = draw(st.integers(1, 10_000))
    cfg.time.ladder = draw(st.sampled_from(["", "5..10", "2..4", "1, 3, 5"]))
    cfg.solver.tol = draw(st.floats(1e-15, 1e-2))
    cfg.solver.max_iter = draw(st.integers(1, 1000))
    cfg.solver.points_per_step = draw(st.integers(8, 64))
    cfg.output.directory = draw(safe_text)
    cfg.output.stride = draw(st.integers(1, 100))
    return cfg


@settings(max_examples=100, deadline=None)
@given(configs())
def test_serialize_parse_round_trip(cfg):
    text = serialize_config(cfg)
    back = parse_config(text)
    assert back == cfg
    assert serialize_config(back) == text


def test_serialized_default_lists_every_key():
    text = serialize_config(ScenarioConfig())
    for section in fields(ScenarioConfig):
        assert f"[{section.name}]" in text
        for key in fields(getattr(ScenarioConfig(), section.name)):
            assert f"\n{key.name} = " in text
