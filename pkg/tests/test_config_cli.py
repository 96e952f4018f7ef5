import json

import pytest

from skmanifold.cli import main
from skmanifold.config import ConfigError, build_config, load_config, parse_config_text


def test_parse_flat_file():
    vals = parse_config_text("""
        # desk settings
        M = 16
        nu = 1e-4   # inline comment
        nus = 0.1, 0.01
        heat = false
        f = sine
    """)
    assert vals == {"M": 16, "nu": 1e-4, "nus": (0.1, 0.01), "heat": False, "f": "sine"}


@pytest.mark.parametrize("text", ["M 16", "bogus = 1", "M = sixteen", "heat = maybe"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_flags_override_file_and_defaults(tmp_path):
    cfg_file = tmp_path / "c.cfg"
    cfg_file.write_text("seed = 7\nreplicas = 50\n")
    cfg = load_config("sk", str(cfg_file), {"replicas": 20})
    assert cfg.seed == 7 and cfg.replicas == 20
    assert cfg.nus == (0.1, 0.01, 0.001)
    assert cfg.resolved()["M_phys"] == 64


@pytest.mark.parametrize("values", [
    {"nu": 0.05},
    {"a": 1.5},
    {"substeps": 3},
    {"N": 20},
    {"M_phys": 10},
    {"q_p": 1.0},
])
def test_invalid_configs(values):
    with pytest.raises(ConfigError):
        build_config("gap-check", values)


def test_cli_gap_check(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["gap-check", "--heat", "--L_F", "1", "--out", str(out), "--quiet"]) == 0
    data = json.loads((out / "gap_check.json").read_text())
    assert data["report"]["gap_value"] == pytest.approx(0.8)
    assert data["config"]["N"] == 2 and data["config"]["heat"] is True
    assert main(["gap-check", "--heat", "--N", "1", "--L-F", "1", "--out", str(out), "--quiet"]) == 1
    assert main(["gap-check", "--nu", "1e-4", "--out", str(out), "--quiet"]) == 0


def test_cli_exit_codes(tmp_path):
    assert main(["gap-check", "--nu", "0.1", "--out", str(tmp_path), "--quiet"]) == 2
    assert main(["gap-check", "--config", str(tmp_path / "missing.cfg"), "--quiet"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["gap-check", "--no-such-flag", "1"])
    assert exc.value.code == 2


def test_cli_numerical_failure(tmp_path):
    code = main(["manifold", "--heat", "--max_iters", "2", "--T_back", "1", "--grid_points", "3",
                 "--out", str(tmp_path), "--quiet"])
    assert code == 3


def test_cli_stationary_zero_noise(tmp_path):
    out = tmp_path / "s"
    assert main(["stationary", "--q_law", "zero", "--replicas", "1000", "--T", "2", "--out", str(out), "--quiet"]) == 0
    rows = (out / "stationary.csv").read_text().splitlines()
    assert rows[0].startswith("quantity,nu,mode")
    assert all(r.endswith(",1") for r in rows[1:])


def test_cli_sk_control(tmp_path):
    out = tmp_path / "k"
    code = main(["sk", "--f", "zero", "--sigma", "0", "--replicas", "5", "--T", "0.2", "--out", str(out), "--quiet"])
    data = json.loads((out / "sk.json").read_text())
    assert [r["exceedance"] for r in data["table"]] == [0.0, 0.0, 0.0]
    assert code == 1  # a flat zero sequence is not strictly decreasing
