import json

import numpy as np
import pytest

from pmrouter import cli
from pmrouter.analysis import sweep_switching_metrics
from pmrouter.config import (
    default_config,
    normalize_config,
    router_from_config,
    sweep_configs,
    validate_config,
)
from pmrouter.datasets import load_dataset
from pmrouter.errors import ConfigError, ConvergenceError
from pmrouter.optics import build_router

FAST = """
[sweep]
input_states = ["H", "D"]
points = 41
repeats = 3

[tomography]
datasets = 3

[bandwidth]
points = 5
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_file_echoes_defaults(tmp_path):
    assert validate_config(write(tmp_path, "")) == default_config()


def test_defaults_build_the_default_router():
    r = router_from_config(default_config())
    ref = build_router()
    assert r.half_wave_voltage == pytest.approx(ref.half_wave_voltage)
    assert r.mode_overlap == pytest.approx(ref.mode_overlap)


def test_negative_length_names_key(tmp_path):
    with pytest.raises(ConfigError) as info:
        validate_config(write(tmp_path, "[eom]\ncrystal_length_mm = -2.0\n"))
    assert any(e.startswith("eom.crystal_length_mm:") for e in info.value.errors)


def test_string_voltage_is_type_error_with_path(tmp_path):
    with pytest.raises(ConfigError) as info:
        validate_config(write(tmp_path, '[driver]\nvoltage_kV = "1.0"\n'))
    assert info.value.errors == ["driver.voltage_kV: expected a number, got str '1.0'"]


def test_errors_are_aggregated(tmp_path):
    text = '[eom]\nwavelength_nm = 0\ncolor = "red"\n[sweep]\npoints = 10.5\n[noise]\nrin = true\n[extra]\nx = 1\n'
    with pytest.raises(ConfigError) as info:
        validate_config(write(tmp_path, text))
    errs = info.value.errors
    assert len(errs) == 5
    joined = "\n".join(errs)
    for key in ("eom.wavelength_nm", "eom.color: unknown key", "sweep.points", "noise.rin", "extra: unknown key"):
        assert key in joined


def test_numbers_and_cross_checks():
    cfg = normalize_config({"eom": {"crystal_length_mm": 12}, "seed": 4})
    assert cfg["eom"]["crystal_length_mm"] == 12.0 and isinstance(cfg["eom"]["crystal_length_mm"], float)
    assert cfg["seed"] == 4
    with pytest.raises(ConfigError, match="stop_kV"):
        normalize_config({"sweep": {"start_kV": 1.0, "stop_kV": 0.5}})
    with pytest.raises(ConfigError, match="unknown polarization"):
        normalize_config({"sweep": {"input_states": ["H", "X"]}})
    with pytest.raises(ConfigError, match="expected a table"):
        normalize_config({"eom": 3})


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        validate_config(tmp_path / "missing.toml")
    with pytest.raises(ConfigError):
        validate_config(write(tmp_path, "[eom\n"))


def test_sweep_configs_use_distinct_seeds():
    cfgs = sweep_configs(default_config(), seed=1)
    assert [c.input_state for c in cfgs] == ["H", "V", "D", "R"]
    assert len({c.seed for c in cfgs}) == 4
    assert cfgs[0].voltages[0] == 0.0 and cfgs[0].voltages[-1] == 2000.0


def _strip_times(path):
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        data.pop("created_utc", None)
        return json.dumps(data, sort_keys=True)
    return path.read_bytes()


def test_full_report_is_deterministic(tmp_path):
    cfg = write(tmp_path, FAST)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["--config", str(cfg), "--scenario", "full-report", "--out", str(a), "--quiet"]) == 0
    assert cli.main(["--config", str(cfg), "--scenario", "full-report", "--out", str(b), "--quiet"]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in ("summary.md", "metrics.json", "sweep_plot.csv", "chi_port1.json", "waveform.csv", "bandwidth_curve.csv"):
        assert n in names
    for n in names:
        assert _strip_times(a / n) == _strip_times(b / n), n
    # non-dataset outputs carry no timestamps at all
    for n in ("summary.md", "metrics.json", "chi_port2.json"):
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_seed_flag_changes_noisy_output(tmp_path):
    cfg = write(tmp_path, FAST)
    cli.main(["--config", str(cfg), "--scenario", "sweep", "--out", str(tmp_path / "s0"), "--quiet", "--seed", "0"])
    cli.main(["--config", str(cfg), "--scenario", "sweep", "--out", str(tmp_path / "s1"), "--quiet", "--seed", "1"])
    assert (tmp_path / "s0/sweep_H.csv").read_bytes() != (tmp_path / "s1/sweep_H.csv").read_bytes()


def test_sweep_metrics_trace_to_dataset_files(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["--config", str(write(tmp_path, FAST)), "--scenario", "sweep", "--out", str(out), "--quiet"]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    entry = metrics["sweep"]["per_input"]["D"]
    ds = load_dataset(out / entry["dataset"])
    m = sweep_switching_metrics(ds, 1000.0)
    assert m.ser1_db == entry["ser1_db"] and m.loss2 == entry["loss2"]
    assert 19 < entry["ser1_db"] < 21.5


def test_noiseless_tomography_reports_unit_fidelity(tmp_path):
    cfg = write(tmp_path, "[noise]\nrin = 0.0\n[tomography]\ndatasets = 2\n")
    out = tmp_path / "o"
    assert cli.main(["--config", str(cfg), "--scenario", "tomography", "--out", str(out), "--quiet"]) == 0
    summary = (out / "summary.md").read_text()
    assert "| 1 | 1.000000" in summary and "| 2 | 1.000000" in summary
    chi = json.loads((out / "chi_port1.json").read_text())
    assert chi["mean"]["basis"] == ["I", "X", "Y", "Z"]
    m = np.array(chi["mean"]["real"]) + 1j * np.array(chi["mean"]["imag"])
    assert m[0, 0].real == pytest.approx(1.0, abs=1e-8)


def test_risetime_scenario(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["--scenario", "risetime", "--out", str(out), "--quiet"]) == 0
    metrics = json.loads((out / "metrics.json").read_text())["risetime"]
    assert metrics["rise_10_90_ns"] == pytest.approx(2.9, abs=0.1)
    assert "| rise 10-90 % | 2.90 |" in (out / "summary.md").read_text()


def test_bad_config_exits_2_with_json(tmp_path, capsys):
    cfg = write(tmp_path, '[driver]\nvoltage_kV = "1.0"\n[eom]\ncrystal_length_mm = -1\n')
    code = cli.main(["--config", str(cfg), "--scenario", "sweep", "--out", str(tmp_path / "o")])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and len(err["errors"]) == 2


def test_unknown_scenario_and_unphysical_model_exit_2(tmp_path, capsys):
    assert cli.main(["--scenario", "bogus", "--out", str(tmp_path / "o")]) == 2
    capsys.readouterr()
    cfg = write(tmp_path, "[eom]\nr23_pm_per_V = 0.0\nr33_pm_per_V = 0.0\n")
    assert cli.main(["--config", str(cfg), "--scenario", "sweep", "--out", str(tmp_path / "o")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "NoSwitchingError"


def test_numerical_failure_exits_3(tmp_path, capsys, monkeypatch):
    def boom(ds):
        raise ConvergenceError("process MLE did not converge", gradient_norm=1e-3, iterations=500)

    monkeypatch.setattr(cli, "mle_process", boom)
    cfg = write(tmp_path, "[tomography]\ndatasets = 2\n")
    assert cli.main(["--config", str(cfg), "--scenario", "tomography", "--out", str(tmp_path / "o"), "--quiet"]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConvergenceError"
    assert err["diagnostics"] == {"gradient_norm": 1e-3, "iterations": 500}


def test_unwritable_output_exits_2(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["--scenario", "bandwidth", "--out", str(blocker / "sub")]) == 2
    assert "--out" in json.loads(capsys.readouterr().err)["message"]
