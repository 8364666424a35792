"""Define tests for the command-line entry point."""

import json

import pytest

from cylarm import __main__ as cli
from cylarm.config import default_config, dump_config
from cylarm.const import OUT_DIR_ENV
from tests.common import get_fixture_path

SHORT = str(get_fixture_path("config_short.json"))


def run(*argv):
    return cli.main(list(argv))


def test_print_defaults(capsys):
    assert run("--print-defaults") == 0
    out = capsys.readouterr().out
    assert out == dump_config(default_config())
    assert json.loads(out)["gains"]["asmc-nn"]["reaching_sign"] == 1


def test_no_command(capsys):
    assert run() == 2
    assert "usage" in capsys.readouterr().err


def test_simulate_defaults(tmp_path, capsys):
    out_dir = tmp_path / "out"
    assert run("simulate", "--scenario", "constant", "--controller", "asmc-nn", "--out", str(out_dir)) == 0
    assert sorted(p.name for p in out_dir.iterdir()) == [
        "constant_asmc-nn.csv",
        "constant_asmc-nn_error.svg",
        "constant_asmc-nn_metrics.json",
        "constant_asmc-nn_response.svg",
    ]
    printed = capsys.readouterr().out.splitlines()
    assert len(printed) == 4

    metrics = json.loads((out_dir / "constant_asmc-nn_metrics.json").read_text(encoding="utf-8"))
    assert max(metrics["overshoot_percent"]) < 1.0
    assert all(t is not None and t <= 0.5 for t in metrics["settling_time"])


def test_simulate_is_byte_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out_dir in (first, second):
        assert run("simulate", "--scenario", "sinusoidal", "--controller", "asmc-nn", "--config", SHORT, "--out", str(out_dir)) == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_simulate_save_weights(tmp_path):
    assert run("simulate", "--scenario", "constant", "--controller", "asmc-nn", "--config", SHORT, "--out", str(tmp_path), "--save-weights") == 0
    lines = (tmp_path / "constant_asmc-nn_weights.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 64


def test_out_dir_from_environment(tmp_path, monkeypatch):
    env_dir = tmp_path / "env"
    monkeypatch.setenv(OUT_DIR_ENV, str(env_dir))
    assert run("simulate", "--scenario", "constant", "--controller", "pd", "--config", SHORT) == 0
    assert (env_dir / "constant_pd.csv").exists()

    cli_dir = tmp_path / "cli"
    assert run("simulate", "--scenario", "constant", "--controller", "pd", "--config", SHORT, "--out", str(cli_dir)) == 0
    assert (cli_dir / "constant_pd.csv").exists()


def test_unknown_scenario(tmp_path, capsys):
    assert run("simulate", "--scenario", "ramp", "--controller", "smc", "--out", str(tmp_path)) == 2
    err = capsys.readouterr().err
    assert "scenario" in err
    for name in ("constant", "uncertain", "sinusoidal", "disturbance"):
        assert name in err


def test_unknown_controller_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        run("simulate", "--scenario", "constant", "--controller", "fuzzy", "--out", str(tmp_path))
    assert err.value.code == 2


def test_invalid_config(tmp_path, capsys):
    config = str(get_fixture_path("config_zero_epsilon.json"))
    assert run("verify", "--config", config) == 2
    assert "gains.asmc-nn.epsilon" in capsys.readouterr().err
    assert run("simulate", "--scenario", "constant", "--controller", "smc", "--config", config, "--out", str(tmp_path)) == 2


def test_simulation_aborted(tmp_path, capsys):
    config = str(get_fixture_path("config_literal_sign.json"))
    assert run("simulate", "--scenario", "constant", "--controller", "asmc-nn", "--config", config, "--out", str(tmp_path)) == 3
    assert "aborted" in capsys.readouterr().err
    assert (tmp_path / "constant_asmc-nn_partial.csv").exists()


def test_output_error(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    assert run("simulate", "--scenario", "constant", "--controller", "pd", "--config", SHORT, "--out", str(blocker)) == 1
    assert "output error" in capsys.readouterr().err


def test_compare(tmp_path, capsys, mocker):
    spy = mocker.spy(cli, "async_run_controllers")
    assert run("compare", "--scenario", "sinusoidal", "--controllers", "smc,asmc-nn", "--config", SHORT, "--out", str(tmp_path)) == 0
    assert spy.call_count == 1

    lines = (tmp_path / "sinusoidal_comparison.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "controller,joint,metric,value"
    rows = [line.split(",") for line in lines[1:]]
    for metric in ("rms_error", "settling_time", "ise"):
        cells = [r for r in rows if r[2] == metric]
        assert len(cells) == 2 * 3
        assert {r[0] for r in cells} == {"asmc-nn", "smc"}
    assert (tmp_path / "sinusoidal_asmc-nn-smc_response.svg").exists()
    assert (tmp_path / "sinusoidal_smc.csv").exists()
    assert "controller" in capsys.readouterr().out


def test_compare_constant_settling(tmp_path):
    assert run("compare", "--scenario", "constant", "--controllers", "pd,smc,asmc-nn", "--out", str(tmp_path)) == 0
    lines = (tmp_path / "constant_comparison.csv").read_text(encoding="utf-8").splitlines()
    settling = {
        (c, j): v for c, j, m, v in (line.split(",") for line in lines[1:]) if m == "settling_time"
    }
    assert len(settling) == 9
    for joint in ("1", "2", "3"):
        assert float(settling["asmc-nn", joint]) <= 0.5
        assert settling["pd", joint]


@pytest.mark.parametrize("controllers", ["smc", "smc,smc", "smc,fuzzy"])
def test_compare_needs_two_known_controllers(tmp_path, capsys, controllers):
    assert run("compare", "--scenario", "constant", "--controllers", controllers, "--out", str(tmp_path)) == 2
    assert "controllers" in capsys.readouterr().err


def test_parse_controllers_sorted():
    assert [k.value for k in cli.parse_controllers(" smc, pd ,asmc-nn")] == ["asmc-nn", "pd", "smc"]


def test_verify_defaults(capsys):
    assert run("verify") == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 9
    assert all(line.startswith("PASS ") for line in out)


def test_verify_literal_sign(capsys):
    assert run("verify", "--config", str(get_fixture_path("config_literal_sign.json"))) == 4
    captured = capsys.readouterr()
    assert any(line.startswith("FAIL lyapunov_monitor") for line in captured.out.splitlines())
    assert "reaching_sign=-1" in captured.out
    assert "checks failed" in captured.err
