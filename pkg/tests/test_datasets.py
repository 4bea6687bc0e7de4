import json

import numpy as np
import pytest

from pmrouter.datasets import (
    SweepDataset,
    TomographyDataset,
    WaveformDataset,
    load_dataset,
    save_dataset,
    sidecar_path,
)
from pmrouter.errors import FormatError
from pmrouter.experiment import NoiseModel, SweepConfig, run_sweep, run_tomography_experiment


def test_sweep_round_trip_is_exact(router, tmp_path):
    ds = run_sweep(router, SweepConfig((0.0, 500.0, 1000.0), "R", repeats=3, noise=NoiseModel(rin=0.01), seed=5))
    save_dataset(ds, tmp_path / "s.csv")
    back = load_dataset(tmp_path / "s.csv")
    assert isinstance(back, SweepDataset)
    assert back.input_label == "R"
    assert np.array_equal(back.voltages, ds.voltages)
    assert np.array_equal(back.p1, ds.p1)
    assert np.array_equal(back.p2, ds.p2)
    assert back.metadata["seed"] == 5


def test_tomography_round_trip_keeps_frame_flag(router, tmp_path):
    ds = run_tomography_experiment(router, 0.0, noise=NoiseModel(rin=0.01), repeats=2, seed=1)[2]
    ds.frame_corrected = True
    save_dataset(ds, tmp_path / "t.csv")
    back = load_dataset(tmp_path / "t.csv")
    assert isinstance(back, TomographyDataset)
    assert back.port == 2 and back.frame_corrected
    assert np.array_equal(back.intensities, ds.intensities)
    assert "frame_corrected" not in back.metadata


def test_waveform_round_trip(tmp_path):
    ds = WaveformDataset(np.arange(5) * 0.1, np.linspace(0, 1, 5) ** 2, metadata={"seed": 0})
    save_dataset(ds, tmp_path / "w.csv")
    back = load_dataset(tmp_path / "w.csv")
    assert np.array_equal(back.t_ns, ds.t_ns) and np.array_equal(back.p1, ds.p1)


def test_timestamp_only_in_sidecar(tmp_path):
    ds = WaveformDataset(np.zeros(2), np.zeros(2))
    save_dataset(ds, tmp_path / "a.csv", timestamp=True)
    save_dataset(ds, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert "created_utc" in json.loads(sidecar_path(tmp_path / "a.csv").read_text())


def _write(tmp_path, csv_text, kind="sweep", version="1"):
    p = tmp_path / "d.csv"
    p.write_text(csv_text)
    sidecar_path(p).write_text(json.dumps({"schema_version": version, "kind": kind, "metadata": {}}))
    return p


def test_missing_column_is_named(tmp_path):
    p = _write(tmp_path, "input,voltage_V,repeat,p1\nH,0.0,0,0.5\n")
    with pytest.raises(FormatError, match="missing column 'p2'"):
        load_dataset(p)


def test_bad_number_reports_line_and_field(tmp_path):
    p = _write(tmp_path, "input,voltage_V,repeat,p1,p2\nH,0.0,0,0.5,0.4\nH,1.0,0,abc,0.4\n")
    with pytest.raises(FormatError, match=r"line 3, field 'p1'"):
        load_dataset(p)


def test_unknown_label_and_field_count(tmp_path):
    p = _write(tmp_path, "input,voltage_V,repeat,p1,p2\nQ,0.0,0,0.5,0.4\n")
    with pytest.raises(FormatError, match="polarization label"):
        load_dataset(p)
    p = _write(tmp_path, "input,voltage_V,repeat,p1,p2\nH,0.0,0,0.5\n")
    with pytest.raises(FormatError, match="expected 5 fields"):
        load_dataset(p)


def test_future_schema_rejected_with_hint(tmp_path):
    p = _write(tmp_path, "t_ns,p1\n0.0,0.0\n", kind="waveform", version="2")
    with pytest.raises(FormatError, match="unsupported schema_version '2'.*version '1'"):
        load_dataset(p)


def test_missing_sidecar_and_incomplete_grid(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("t_ns,p1\n")
    with pytest.raises(FormatError, match="sidecar not found"):
        load_dataset(p)
    p = _write(tmp_path, "input,port,projector,repeat,intensity\nH,1,H,0,1.0\n", kind="tomography")
    with pytest.raises(FormatError, match="incomplete"):
        load_dataset(p)


def test_unequal_repeats_rejected(tmp_path):
    p = _write(tmp_path, "input,voltage_V,repeat,p1,p2\nH,0.0,0,0.5,0.4\nH,0.0,1,0.5,0.4\nH,1.0,0,0.5,0.4\n")
    with pytest.raises(FormatError, match="unequal repeat counts"):
        load_dataset(p)
