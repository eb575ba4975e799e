import pytest

from breather_lab.config import ConfigError, Param, parse_config
from breather_lab.experiments import SCHEMAS

TOY = {
    "demo": {
        "d": Param("float"),
        "K": Param("int", 10),
        "alpha": Param("complex", 0.1 + 0j),
        "levels": Param("ints", (8, 16)),
        "mode": Param("str", "kg", choices=("kg", "qhj")),
        "flag": Param("bool", False),
    }
}


def test_full_example_echoes_defaults():
    text = "[experiment]\nname = demo\nseed = 7\n\n[parameters]\nd = 50\nlevels = 4, 5\n"
    cfg = parse_config(text, TOY)
    assert cfg.seed == 7
    assert cfg.parameters["d"] == 50.0
    assert cfg.parameters["levels"] == (4, 5)
    assert cfg.defaulted == {"K", "alpha", "mode", "flag"}
    echo = cfg.echo()
    assert echo["defaults_applied"] == ["K", "alpha", "flag", "mode"]
    assert echo["parameters"]["alpha"] == {"re": 0.1, "im": 0.0}


def test_comments_and_types():
    text = """
# header
[experiment]
name = demo
; another comment
[parameters]
d = 1e2
K = 3.0
alpha = 0.1+0.2j
mode = qhj
flag = yes
"""
    p = parse_config(text, TOY).parameters
    assert p == {"d": 100.0, "K": 3, "alpha": 0.1 + 0.2j, "levels": (8, 16), "mode": "qhj", "flag": True}


def test_parse_is_deterministic():
    text = "[experiment]\nname = demo\n[parameters]\nd = 2\n"
    assert parse_config(text, TOY) == parse_config(text, TOY)


@pytest.mark.parametrize("text,needle", [
    ("[experiment]\n[parameters]\nd = 1\n", "empty [experiment]"),
    ("[parameters]\nd = 1\n", "empty [experiment]"),
    ("[experiment]\nname = demo\n[parameters]\n", "missing required parameter 'd'"),
    ("[experiment]\nname = demo\n[parameters]\nd = 1\nbogus = 2\n", "line 5: unknown parameter 'bogus'"),
    ("[experiment]\nname = demo\n[parameters]\nd = abc\n", "line 4: parameter 'd' expects float"),
    ("[experiment]\nname = demo\n[parameters]\nd = 1\nK = 2.5\n", "line 5: parameter 'K' expects int"),
    ("[experiment]\nname = demo\n[parameters]\nd = 1\nmode = x\n", "must be one of"),
    ("[experiment]\nname = other\n", "unknown experiment"),
    ("[experiment]\nname = demo\nseed = x\n", "seed must be an integer"),
    ("[experiment]\nname = demo\n[extra]\n", "unknown section"),
    ("d = 1\n", "outside any section"),
    ("[experiment\nname = demo\n", "malformed section"),
    ("[experiment]\nname demo\n", "expected 'key = value'"),
    ("[experiment]\nname = demo\n[parameters]\nd = 1\nlevels = 1,,2\n", "expects ints"),
])
def test_rejections(text, needle):
    with pytest.raises(ConfigError, match=needle.replace("[", r"\[").replace("(", r"\(")):
        parse_config(text, TOY)


def test_duplicate_key_names_both_lines():
    text = "[experiment]\nname = demo\n[parameters]\nd = 1\nK = 2\nd = 3\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text, TOY)
    assert "lines 4 and 6" in str(info.value)
    assert "'d'" in str(info.value)


def test_experiment_mismatch():
    with pytest.raises(ConfigError, match="requested"):
        parse_config("[experiment]\nname = demo\n[parameters]\nd = 1\n", TOY, experiment="other")


def test_every_experiment_parses_with_defaults():
    for name, schema in SCHEMAS.items():
        cfg = parse_config(f"[experiment]\nname = {name}\n", SCHEMAS, name)
        assert set(cfg.parameters) == set(schema)
        assert cfg.defaulted == set(schema)
