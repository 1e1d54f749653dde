import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varint import cli
from varint.cli import (
    ConfigError,
    RunConfig,
    drift_slope,
    execute,
    main,
    read_csv,
    summarize,
    write_csv,
)


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    out = dict(cfg)
    out.setdefault("output", {"trajectory": str(tmp_path / "traj.csv"),
                              "diagnostics": str(tmp_path / "diag.json")})
    path.write_text(json.dumps(out))
    return str(path)


def last_json(text):
    return json.loads(text.strip().splitlines()[-1])


FREE = {"integrator": "galerkin",
        "model": {"id": "free_particle"},
        "scheme": {"s": 2, "h": 0.1, "steps": 10},
        "initial": {"q0": [0.0], "q1": [0.2]}}


def test_free_particle_run_writes_linear_csv(tmp_path, capsys):
    assert main(["run", write_config(tmp_path, FREE)]) == 0
    header, table = read_csv(tmp_path / "traj.csv")
    assert header == ["t", "q0", "p0", "energy"]
    assert table.shape[0] == 10 + 2
    np.testing.assert_allclose(table[:, 1], 0.2 * np.arange(12), atol=1e-12)
    np.testing.assert_allclose(table[:, 2], 2.0, atol=1e-12)
    diag = json.loads((tmp_path / "diag.json").read_text())
    assert diag["rows"] == 12
    assert diag["energy_max_drift"] < 1e-12
    assert last_json(capsys.readouterr().out) == diag


def test_galerkin_initial_velocity(tmp_path):
    cfg = dict(FREE, initial={"q0": [1.0], "v0": [-1.0]})
    result, _ = execute(RunConfig.from_dict(cfg))
    assert result.table[1, 1] == pytest.approx(0.9, abs=1e-12)


@pytest.mark.parametrize("raw,key", [
    ({"integrator": "galerkin", "model": {"id": "free_particle"}, "scheme": {"s": 2, "hh": 0.1, "steps": 3},
      "initial": {"q0": [0.0], "q1": [0.1]}}, "scheme.hh"),
    ({"model": {}}, "integrator"),
    ({"integrator": "leapfrog"}, "integrator"),
    ({"integrator": "galerkin", "colour": 1}, "colour"),
    ({"integrator": "galerkin", "seed": -1}, "seed"),
    ({"integrator": "galerkin", "model": []}, "model"),
])
def test_config_errors_name_the_key(raw, key, tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    assert main(["run", str(path)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config"
    assert err["field"] == key


@pytest.mark.parametrize("patch,key", [
    ({"scheme": {"s": 2, "h": -0.1, "steps": 3}}, "scheme.h"),
    ({"scheme": {"s": 0, "h": 0.1, "steps": 3}}, "scheme.s"),
    ({"scheme": {"s": 2, "h": 0.1, "steps": "many"}}, "scheme.steps"),
    ({"model": {"id": "rocket"}}, "model.id"),
    ({"model": {"id": "free_particle", "charge": 1.0}}, "model.charge"),
    ({"initial": {"q0": [0.0, 1.0], "q1": [0.1]}}, "initial.q0"),
])
def test_semantic_config_errors(patch, key, tmp_path, capsys):
    assert main(["run", write_config(tmp_path, dict(FREE, **patch))]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["field"] == key


def test_invalid_json_and_missing_file(tmp_path, capsys):
    bad = tmp_path / "x.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "absent.json")]) == 4


def test_solver_failure_exit_code(tmp_path, capsys):
    cfg = dict(FREE, model={"id": "pendulum"}, scheme={"s": 2, "h": 0.1, "steps": 5, "max_iter": 1, "tol": 1e-15},
               initial={"q0": [3.0], "q1": [3.1]})
    assert main(["run", write_config(tmp_path, cfg)]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "solver"
    assert isinstance(err["step"], int)


def test_runs_are_deterministic(tmp_path):
    cfg = {"integrator": "multisym", "model": {"id": "wave"},
           "scheme": {"M": 16, "steps": 10}, "initial": {"noise": 0.01}, "seed": 7}
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert main(["run", write_config(a, cfg)]) == 0
    assert main(["run", write_config(b, cfg)]) == 0
    assert (a / "traj.csv").read_bytes() == (b / "traj.csv").read_bytes()
    assert json.loads((a / "diag.json").read_text())["seed"] == 7


@pytest.mark.parametrize("cfg", [
    {"integrator": "sem", "model": {"id": "pendulum"}, "scheme": {"h": 0.1, "steps": 20},
     "initial": {"q0": [0.5], "v0": [0.0]}},
    {"integrator": "liegroup", "model": {"id": "rigid_body"}, "scheme": {"h": 0.05, "steps": 10},
     "initial": {"omega": [0.3, 1.0, 0.2]}},
    {"integrator": "dep", "model": {"id": "rigid_body"}, "scheme": {"h": 0.05, "steps": 10},
     "initial": {"omega": [0.3, 1.0, 0.2]}},
    {"integrator": "multisym", "model": {"id": "sine_gordon"}, "scheme": {"M": 16, "steps": 10}},
    {"integrator": "tdse", "model": {"potential": {"type": "cos", "amplitude": 1.0}},
     "scheme": {"N": 8, "dt": 0.01, "steps": 20}},
], ids=["sem", "liegroup", "dep", "multisym", "tdse"])
def test_each_integrator_runs(cfg, tmp_path):
    assert main(["run", write_config(tmp_path, cfg)]) == 0
    header, table = read_csv(tmp_path / "traj.csv")
    assert header[0] == "t"
    assert table.shape[0] > 1
    diag = json.loads((tmp_path / "diag.json").read_text())
    assert diag["energy_max_drift"] < 1e-2


def test_liegroup_diagnostics_are_tight():
    cfg = RunConfig.from_dict({"integrator": "liegroup", "model": {"id": "rigid_body"},
                               "scheme": {"h": 0.05, "steps": 20}, "initial": {"omega": [0.3, 1.0, 0.2]}})
    result, summary = execute(cfg)
    assert result.extra["orthogonality_defect"] < 1e-12
    assert max(summary.momentum_max_drift.values()) < 1e-9


def test_tdse_norm_conserved():
    cfg = RunConfig.from_dict({"integrator": "tdse", "scheme": {"N": 16, "dt": 0.01, "steps": 50},
                               "initial": {"type": "gaussian", "k0": 2.0}})
    _, summary = execute(cfg)
    assert summary.norm_max_drift < 1e-9


@pytest.mark.slow
def test_multiscale_run():
    cfg = RunConfig.from_dict({"integrator": "multiscale", "model": {"id": "stiff_pendulum"},
                               "scheme": {"t_end": 0.5, "samples_per_segment": 5},
                               "initial": {"theta0": 0.5}})
    result, _ = execute(cfg)
    assert result.extra["omega_estimate"] == pytest.approx(100.0, rel=0.02)
    assert np.all(np.isfinite(result.table))


def test_tise_free_eigenvalues(tmp_path, capsys):
    cfg = {"integrator": "tise", "model": {"hbar": 1.0, "potential": "zero"}, "scheme": {"N": 8}}
    assert main(["run", write_config(tmp_path, cfg)]) == 0
    lam = np.sort(last_json(capsys.readouterr().out)["extra"]["eigenvalues"])
    expected = np.sort([-float(j * j) for j in range(-3, 5)])
    np.testing.assert_allclose(lam, expected, atol=1e-10)


def test_filon_weights_command(capsys):
    assert main(["filon-weights", "--points", "3", "--theta", "0"]) == 0
    rows = [tuple(map(float, line.split(","))) for line in capsys.readouterr().out.split()]
    np.testing.assert_allclose([r[0] for r in rows], [1 / 6, 2 / 3, 1 / 6], atol=1e-15)
    np.testing.assert_allclose([r[1] for r in rows], 0.0, atol=1e-15)


def test_filon_weights_sum_at_pi(capsys):
    assert main(["filon-weights", "--points", "3", "--theta", str(np.pi)]) == 0
    rows = [complex(*map(float, line.split(","))) for line in capsys.readouterr().out.split()]
    assert sum(rows) == pytest.approx(2j / np.pi, abs=1e-14)


def test_filon_weights_usage_errors(capsys):
    assert main(["filon-weights", "--points", "1", "--theta", "0"]) == 2
    assert main(["filon-weights", "--theta", "0"]) == 2
    assert main([]) == 2


def test_diagnose_constant_and_linear(tmp_path, capsys):
    t = np.linspace(0, 10, 101)
    path = tmp_path / "c.csv"
    write_csv(str(path), ["t", "energy"], np.column_stack([t, np.full_like(t, 2.5)]))
    assert main(["diagnose", str(path)]) == 0
    out = last_json(capsys.readouterr().out)
    assert abs(out["energy_drift_slope"]) < 1e-14
    write_csv(str(path), ["t", "energy"], np.column_stack([t, 1.0 + 1e-3 * t]))
    assert main(["diagnose", str(path)]) == 0
    out = last_json(capsys.readouterr().out)
    assert out["energy_drift_slope"] == pytest.approx(1e-3, rel=0.05)


@pytest.mark.parametrize("content,code", [("", 2), ("t,energy\n", 2), ("t,energy\n0,1,2\n", 2),
                                          ("t,energy\n0,abc\n", 2), ("t,,x\n0,1,2\n", 2)])
def test_diagnose_schema_errors(content, code, tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    assert main(["diagnose", str(path)]) == code
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "schema"


def test_diagnose_missing_file(tmp_path):
    assert main(["diagnose", str(tmp_path / "none.csv")]) == 4


def test_diagnose_round_trip(tmp_path, capsys):
    cfg = {"integrator": "galerkin", "model": {"id": "harmonic_oscillator"},
           "scheme": {"s": 2, "h": 0.1, "steps": 50}, "initial": {"q0": [1.0], "v0": [0.0]}}
    assert main(["run", write_config(tmp_path, cfg)]) == 0
    in_process = json.loads((tmp_path / "diag.json").read_text())
    capsys.readouterr()
    assert main(["diagnose", str(tmp_path / "traj.csv")]) == 0
    reloaded = last_json(capsys.readouterr().out)
    for key in ("rows", "energy_max_drift", "energy_drift_slope"):
        assert reloaded[key] == pytest.approx(in_process[key], abs=1e-12)


@settings(max_examples=25)
@given(values=st.lists(st.floats(-1e6, 1e6, allow_subnormal=False), min_size=1, max_size=20))
def test_csv_round_trip_is_bit_faithful(values, tmp_path_factory):
    path = tmp_path_factory.mktemp("csv") / "r.csv"
    table = np.column_stack([np.arange(len(values), dtype=float), values])
    write_csv(str(path), ["t", "x"], table)
    header, back = read_csv(path)
    assert header == ["t", "x"]
    assert np.array_equal(back, table)


@settings(max_examples=25)
@given(st.floats(-1.0, 1.0), st.floats(-5.0, 5.0))
def test_drift_slope_recovers_lines(slope, offset):
    t = np.linspace(0.0, 3.0, 31)
    assert drift_slope(t, offset + slope * t) == pytest.approx(slope, abs=1e-12)


def test_summarize_skips_nan_entries():
    header = ["t", "energy", "momentum_x", "norm"]
    table = np.array([[0, 1.0, 2.0, 1.0], [1, 1.5, 2.0, 1.0], [2, np.nan, 2.5, 1.0]])
    s = summarize(header, table)
    assert s.energy_max_drift == 0.5
    assert s.momentum_max_drift == {"momentum_x": 0.5}
    assert s.norm_max_drift == 0.0


def test_logging_env(monkeypatch, capsys):
    monkeypatch.setenv("VARINT_LOG", "debug")
    assert main(["filon-weights", "--points", "2", "--theta", "1"]) == 0


def test_config_error_carries_field():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_dict([1, 2])
    assert info.value.field == "<root>"
    assert cli.EXIT_CONFIG == 2
