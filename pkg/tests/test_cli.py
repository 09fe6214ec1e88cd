import csv
import json
import subprocess
import sys
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from poroflow import (
    ConvergenceError,
    FieldState,
    Grid,
    ICKind,
    InitialCondition,
    ModelParams,
    ParseError,
    Regime,
    TransientConfig,
    ValidationError,
)
from poroflow.cli import ENV_OUT, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO, EXIT_OK, main, parse_sweep
from poroflow.io import (
    COEXISTENCE,
    Outputs,
    ScenarioConfig,
    config_from_dict,
    default_config,
    load_config,
    read_profile_csv,
    write_config,
    write_profile_csv,
)

SMALL = {"grid": {"n": 51}}


def write_json(path, data):
    path.write_text(json.dumps(data, indent=2))
    return path


@pytest.fixture
def small_config(tmp_path):
    return write_json(tmp_path / "small.json", SMALL)


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_default_config_is_valid_and_at_coexistence(tmp_path):
    cfg = load_config(write_json(tmp_path / "c.json", {}))
    assert cfg.pressure == COEXISTENCE
    assert cfg.params.p == pytest.approx(0.24220915762437872, rel=1e-13)
    assert (cfg.params.a, cfg.params.b, cfg.params.alpha) == (0.5, 1.0, 100.0)
    assert cfg.grid == Grid(0.0, 1.0, 201)
    assert cfg == default_config()


def test_negative_k1_is_named(tmp_path):
    with pytest.raises(ValidationError) as info:
        load_config(write_json(tmp_path / "c.json", {"params": {"k1": -1}}))
    assert any("k1" in p for p in info.value.problems)


def test_indefinite_gradient_matrix_rejected(tmp_path):
    data = {"params": {"k1": 1e-3, "k2": 2e-3, "k3": 1e-3}}
    with pytest.raises(ValidationError, match="k1\\*k3 - k2\\*\\*2"):
        load_config(write_json(tmp_path / "c.json", data))


def test_every_problem_is_listed(tmp_path):
    data = {
        "params": {"k1": "big", "zeta": 1},
        "grid": {"n": 3},
        "regime": "leaky",
        "ic": "file:missing.csv",
        "transient": {"t_end": -1},
        "outputs": {"features": "yes"},
    }
    with pytest.raises(ValidationError) as info:
        load_config(write_json(tmp_path / "c.json", data))
    text = "\n".join(info.value.problems)
    for needle in ("params.k1", "zeta", "grid", "regime", "missing.csv", "transient", "outputs.features"):
        assert needle in text


def test_pressure_below_critical_rejected(tmp_path):
    with pytest.raises(ValidationError, match="critical pressure"):
        load_config(write_json(tmp_path / "c.json", {"params": {"p": 0.1}}))


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "grid": {"n": 51},\n  "regime": zero\n}\n')
    with pytest.raises(ParseError, match=r"bad\.json:3:"):
        load_config(path)


def test_ic_file_resolved_relative_to_config(tmp_path, coexistence):
    _, s, f = coexistence
    g = Grid(0.0, 1.0, 51)
    write_profile_csv(tmp_path / "start.csv", g, FieldState.linear(s, f, g))
    cfg = load_config(write_json(tmp_path / "c.json", {"grid": {"n": 51}, "ic": "file:start.csv"}))
    assert cfg.ic.path == (tmp_path / "start.csv").resolve()


configs = st.builds(
    lambda n, regime, ic, t_end, frac, pressure, features: ScenarioConfig(
        params=ModelParams(p=pressure if pressure else 0.24220915762437872, k2=frac * 1e-3),
        grid=Grid(0.0, 1.0, n),
        regime=regime,
        ic=InitialCondition(ic),
        transient=TransientConfig(t_end=t_end, snapshot_times=(t_end / 2, t_end)),
        outputs=Outputs("runs", features),
        pressure=None if pressure else COEXISTENCE,
    ),
    n=st.integers(5, 400),
    regime=st.sampled_from(list(Regime)),
    ic=st.sampled_from([ICKind.LINEAR, ICKind.FLUID_POOR, ICKind.FLUID_RICH]),
    t_end=st.floats(1e-3, 1e3),
    frac=st.floats(-1.0, 1.0),
    pressure=st.one_of(st.none(), st.floats(0.23, 1.0)),
    features=st.booleans(),
)


@settings(max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(cfg=configs)
def test_config_round_trip(cfg, tmp_path):
    back = load_config(write_config(cfg, tmp_path / "rt.json"))
    assert back == cfg


def test_config_from_dict_rejects_non_object():
    with pytest.raises(ValidationError):
        config_from_dict([1, 2])


def test_phases_command(capsys, tmp_path):
    code, out, _ = run(["phases", "--out", tmp_path], capsys)
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["p_c"] < data["p_co"]
    assert json.loads((tmp_path / "phases.json").read_text()) == data


def test_stationary_command_writes_profile(capsys, tmp_path, small_config):
    code, out, _ = run(["stationary", "--config", small_config, "--out", tmp_path / "st"], capsys)
    assert code == EXIT_OK
    x, state = read_profile_csv(tmp_path / "st" / "stationary.csv")
    assert len(x) == 51
    with open(tmp_path / "st" / "stationary.csv") as fh:
        assert next(csv.reader(fh)) == ["X_s", "eps", "m"]
    assert 0.5 < json.loads(out)["interface_position"] < 0.7


def test_stationary_sweep_file_set(capsys, tmp_path, small_config):
    out = tmp_path / "sw"
    code, _, _ = run(["stationary", "--config", small_config, "--out", out, "--sweep", "k1=figure"], capsys)
    assert code == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    expected = sorted([f"stationary_k1={v:g}.csv" for v in (1e-3, 4e-3, 7e-3, 8e-3, 9e-3, 1e-2)] + ["sweep.json"])
    assert names == expected
    widths = [r["interface_width"] for r in json.loads((out / "sweep.json").read_text())]
    assert widths == sorted(widths)


def test_sweep_command_runs_all_cases_in_parallel(capsys, tmp_path, small_config):
    out = tmp_path / "all"
    code, _, _ = run(["sweep", "--config", small_config, "--out", out, "--workers", 2], capsys)
    assert code == EXIT_OK
    records = json.loads((out / "sweep.json").read_text())
    assert len(records) == 14
    assert len(list(out.glob("stationary_*.csv"))) == 14


def test_parse_sweep():
    assert parse_sweep("k2=figure")[1] == (-1e-3, -0.4e-3, 0.2e-3, 0.8e-3, 1e-3)
    assert parse_sweep("k3=1e-3,2e-3") == ("k3", (1e-3, 2e-3))
    for bad in ("k4=1", "k1=", "k1=a,b"):
        with pytest.raises(ValueError):
            parse_sweep(bad)


def test_invalid_sweep_value_is_config_error(capsys, tmp_path, small_config):
    code, _, err = run(["stationary", "--config", small_config, "--out", tmp_path, "--sweep", "k2=5e-3"], capsys)
    assert code == EXIT_CONFIG
    assert "k2=0.005" in err


def test_evolve_writes_six_figure_snapshots(capsys, tmp_path, small_config):
    out = tmp_path / "ev"
    code, _, _ = run(
        ["evolve", "--config", small_config, "--bc", "zero-mu", "--ic", "linear", "--out-dir", out, "--features"],
        capsys,
    )
    assert code == EXIT_OK
    index = json.loads((out / "snapshots.json").read_text())
    assert [float(e["t"]) for e in index] == [0.05, 0.2, 0.3, 0.75, 4.0, 40.0]
    for k, entry in enumerate(index):
        path = out / entry["file"]
        with open(path) as fh:
            assert next(csv.reader(fh)) == ["X_s", "eps", "m", "v"]
        assert (out / f"features_{k:02d}.json").exists()
    with open(out / "run_log.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "dt", "newton_iters", "F", "dF"]
    assert float(rows[-1][0]) == 40.0
    for name in ("config.json", "report.json", "stationary.csv", "plot.py"):
        assert (out / name).exists()


def test_evolve_outputs_are_bit_identical(capsys, tmp_path, small_config):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        code, _, _ = run(["evolve", "--config", small_config, "--ic", "fluid-rich", "--snapshots", "0.01,0.1",
                          "--out-dir", d], capsys)
        assert code == EXIT_OK
    for name in ("snapshot_00.csv", "snapshot_01.csv", "run_log.csv", "stationary.csv"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_plot_script_renders(capsys, tmp_path, small_config):
    pytest.importorskip("matplotlib")
    out = tmp_path / "pl"
    code, _, _ = run(["evolve", "--config", small_config, "--snapshots", "0.01,0.05", "--out-dir", out], capsys)
    assert code == EXIT_OK
    subprocess.run([sys.executable, str(out / "plot.py")], check=True, cwd=tmp_path)
    assert (out / "profiles.png").stat().st_size > 0


def test_output_root_precedence(capsys, tmp_path, small_config, monkeypatch):
    env_dir = tmp_path / "from_env"
    monkeypatch.setenv(ENV_OUT, str(env_dir))
    code, _, _ = run(["stationary", "--config", small_config], capsys)
    assert code == EXIT_OK and (env_dir / "stationary.csv").exists()
    flag_dir = tmp_path / "from_flag"
    code, _, _ = run(["stationary", "--config", small_config, "--out", flag_dir], capsys)
    assert code == EXIT_OK and (flag_dir / "stationary.csv").exists()
    monkeypatch.delenv(ENV_OUT)
    cfg = write_json(tmp_path / "dir.json", {**SMALL, "outputs": {"directory": str(tmp_path / "from_cfg")}})
    code, _, _ = run(["stationary", "--config", cfg], capsys)
    assert code == EXIT_OK and (tmp_path / "from_cfg" / "stationary.csv").exists()


def test_exit_code_config(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _, err = run(["phases", "--config", bad], capsys)
    assert code == EXIT_CONFIG and "config error" in err
    code, _, _ = run(["evolve", "--config", write_json(tmp_path / "s.json", SMALL), "--ic", "file:nope.csv",
                      "--out-dir", tmp_path], capsys)
    assert code == EXIT_CONFIG
    code, _, _ = run(["evolve", "--config", write_json(tmp_path / "s2.json", SMALL), "--t-end", "0.01",
                      "--snapshots", "0.5", "--out-dir", tmp_path], capsys)
    assert code == EXIT_CONFIG


def test_exit_code_convergence(capsys, tmp_path, small_config, monkeypatch):
    import poroflow.cli as cli

    def failing(*args, **kwargs):
        raise ConvergenceError("forced", t=0.25)

    monkeypatch.setattr(cli, "evolve", failing)
    code, _, err = run(["evolve", "--config", small_config, "--snapshots", "0.5", "--out-dir", tmp_path / "x"],
                       capsys)
    assert code == EXIT_CONVERGENCE
    assert "t=0.25" in err
    # the (empty) run log is still written
    assert (tmp_path / "x" / "run_log.csv").exists()


def test_exit_code_io(capsys, tmp_path, small_config):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    code, _, err = run(["stationary", "--config", small_config, "--out", blocker / "sub"], capsys)
    assert code == EXIT_IO and "I/O error" in err


def test_written_config_reloads_identically(tmp_path):
    cfg = replace(default_config(), regime=Regime.ONE_SIDE_IMPERMEABLE)
    assert load_config(write_config(cfg, tmp_path / "w.json")) == cfg
