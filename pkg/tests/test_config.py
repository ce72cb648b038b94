from fractions import Fraction as Fr

import pytest

from quasilinear_mp.config import ConfigError, load_config, parse_config, require
from quasilinear_mp.exponents import INF, Envelope

from .conftest import CONFIGS

BASE = """
[problem]
N = 3
V = "r^-2"
K = "min(r^3, 1)"

[envelope.zero]
alpha = 3
beta = 0

[envelope.infinity]
alpha = 0
beta = 0

[nonlinearity]
kind = single_power
q1 = 8
"""


def test_parse_defaults_recorded():
    cfg = parse_config(BASE)
    assert cfg.N == 3 and cfg.V == "r^-2" and cfg.K == "min(r^3, 1)"
    assert cfg.envelopes_zero == [Envelope(3, 0)]
    echo = cfg.to_dict()
    assert echo["mesh"] == {"r_min": 1e-6, "r_max": 1e3, "nodes": 2000}
    assert echo["solver"]["P"] == 21 and echo["solver"]["rho"] is None
    assert echo["verify"]["weak_defect_tol"] == 1e-6
    assert echo["nonlinearity"]["q1"] == "8"


def test_parse_is_deterministic():
    assert parse_config(BASE).to_dict() == parse_config(BASE).to_dict()


def test_rationals_and_inf():
    cfg = parse_config(BASE.replace("alpha = 3", "alpha = inf").replace("q1 = 8", "q1 = 13/2"))
    assert cfg.envelopes_zero[0].alpha == INF
    assert cfg.nonlinearity["q1"] == Fr(13, 2)


def test_tagged_envelopes():
    text = BASE + "\n[envelope.zero.second]\nalpha = 6\nbeta = 0\n"
    cfg = parse_config(text)
    assert len(cfg.envelopes_zero) == 2


def test_empty():
    with pytest.raises(ConfigError) as info:
        parse_config("  \n")
    assert info.value.line == 1


def test_unknown_key_has_line():
    with pytest.raises(ConfigError) as info:
        parse_config(BASE.replace("N = 3", "N = 3\ncolour = red"))
    assert info.value.line == 4 and "colour" in str(info.value)


def test_unknown_section():
    with pytest.raises(ConfigError) as info:
        parse_config(BASE + "\n[plotting]\ndpi = 3\n")
    assert "plotting" in str(info.value)


def test_expression_error_column():
    text = '[problem]\nV = "r^-2 + foo"\n'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    # value starts at column 5, the quote adds one, foo is the 8th character
    assert (info.value.line, info.value.col) == (2, 13)


def test_bad_values():
    with pytest.raises(ConfigError, match="nodes"):
        parse_config(BASE + "\n[mesh]\nnodes = many\n")
    with pytest.raises(ConfigError, match="N must be"):
        parse_config(BASE.replace("N = 3", "N = 2"))
    with pytest.raises(ConfigError, match="beta"):
        parse_config(BASE.replace("beta = 0", "beta = 2", 1))
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("[problem]\nthis line has no equals\n")


def test_missing_header():
    with pytest.raises(ConfigError, match="section"):
        parse_config("N = 3\n")


def test_require():
    cfg = parse_config("[nonlinearity]\nq1 = 8\n")
    with pytest.raises(ConfigError, match=r"\[problem\] V"):
        require(cfg, "V")
    with pytest.raises(ConfigError, match="envelope.zero"):
        require(cfg, "envelopes")
    require(cfg, "q1")


def test_shipped_configs_parse():
    paths = sorted(CONFIGS.glob("*.ini"))
    assert len(paths) >= 7
    for path in paths:
        cfg = load_config(path)
        require(cfg, "V", "K", "q1", "envelopes")
        cfg.build_potentials()
        cfg.build_nonlinearity()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")


def test_builders():
    cfg = parse_config(BASE + "\n[mesh]\nnodes = 300\n")
    energy = cfg.build_energy()
    assert energy.mesh.n == 300
    assert energy.g.kind == "single_power" and energy.g.q1 == 8
