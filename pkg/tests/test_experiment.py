import numpy as np
import pytest

from pmrouter.errors import ConfigError
from pmrouter.experiment import (
    DriverWaveformConfig,
    NoiseModel,
    SweepConfig,
    calibrate_driver,
    normalized_level_inverse,
    run_sweep,
    run_tomography_experiment,
    run_waveform,
)
from pmrouter.optics import port_powers
from pmrouter.polarization import STATE_LABELS

VOLTS = tuple(np.linspace(0, 2000, 21))


def test_noiseless_sweep_matches_model(router):
    ds = run_sweep(router, SweepConfig(VOLTS, "D", repeats=2))
    p1, p2 = port_powers(router, "D", np.array(VOLTS))
    assert np.array_equal(ds.p1[:, 0], p1)
    assert np.array_equal(ds.p2[:, 1], p2)
    assert np.all(ds.std(1) == 0)


def test_sweep_is_reproducible_and_seed_sensitive(router):
    noise = NoiseModel(rin=0.01)
    a = run_sweep(router, SweepConfig(VOLTS, repeats=3, noise=noise, seed=7))
    b = run_sweep(router, SweepConfig(VOLTS, repeats=3, noise=noise, seed=7))
    c = run_sweep(router, SweepConfig(VOLTS, repeats=3, noise=noise, seed=8))
    assert np.array_equal(a.p1, b.p1)
    assert not np.array_equal(a.p1, c.p1)


def test_cells_do_not_depend_on_run_length(router):
    noise = NoiseModel(rin=0.01)
    short = run_sweep(router, SweepConfig(VOLTS, repeats=2, noise=noise, seed=3))
    long = run_sweep(router, SweepConfig(VOLTS, repeats=5, noise=noise, seed=3))
    assert np.array_equal(short.p1, long.p1[:, :2])


def test_relative_noise_level(router):
    noise = NoiseModel(rin=0.01)
    ds = run_sweep(router, SweepConfig((1000.0,), repeats=10000, noise=noise, seed=1))
    p1, _ = port_powers(router, "H", 1000.0)
    rel = ds.p1[0] / p1 - 1
    assert abs(rel.mean()) < 5 * 0.01 / np.sqrt(10000)
    assert rel.std(ddof=1) == pytest.approx(0.01, rel=0.05)


def test_offset_and_clipping(router):
    ds = run_sweep(router, SweepConfig((0.0, 1000.0), repeats=1, noise=NoiseModel(detector_offset=0.01)))
    p1, _ = port_powers(router, "H", np.array([0.0, 1000.0]))
    assert np.allclose(ds.p1[:, 0], p1 + 0.01)
    noisy = run_sweep(router, SweepConfig((0.0,), repeats=200, noise=NoiseModel(rin=2.0), seed=2))
    assert np.all(noisy.p1 >= 0) and np.any(noisy.p1 == 0)


def test_phase_drift_moves_readings(router):
    noise = NoiseModel(phase_drift_amplitude=0.3, phase_drift_period=7)
    assert noise.drift(0) == 0
    assert noise.drift(7 / 4) == pytest.approx(0.3)
    ds = run_sweep(router, SweepConfig((500.0,), repeats=7, noise=noise))
    assert np.ptp(ds.p1) > 0.01


def test_sweep_config_validation():
    with pytest.raises(ConfigError):
        SweepConfig(())
    with pytest.raises(ConfigError):
        SweepConfig((0.0, 0.0, 1.0))
    with pytest.raises(ConfigError):
        SweepConfig((0.0, 1.0), repeats=0)
    with pytest.raises(ConfigError):
        NoiseModel(rin=-0.1)


def test_tomography_grid_consistency(router):
    data = run_tomography_experiment(router, router.half_wave_voltage)
    for port in (1, 2):
        m = data[port].intensities[..., 0]
        # each analyzer pair sums to the port throughput
        totals = m[:, 0::2] + m[:, 1::2]
        assert np.allclose(totals, totals[0, 0], rtol=1e-12)
    p1 = data[1].intensities[..., 0]
    for s in range(6):
        assert np.argmax(p1[s]) == s


def test_port2_data_is_left_in_lab_frame(router):
    data = run_tomography_experiment(router, 0.0)
    m = data[2].intensities[..., 0]
    assert not data[2].frame_corrected
    partner = {"H": "H", "V": "V", "D": "A", "A": "D", "R": "L", "L": "R"}
    for s, label in enumerate(STATE_LABELS):
        assert STATE_LABELS[np.argmax(m[s])] == partner[label]


def test_tomography_noise_is_seeded(router):
    noise = NoiseModel(rin=0.01)
    a = run_tomography_experiment(router, 0.0, noise=noise, repeats=2, seed=4)
    b = run_tomography_experiment(router, 0.0, noise=noise, repeats=2, seed=4)
    assert np.array_equal(a[1].intensities, b[1].intensities)
    assert not np.array_equal(a[1].intensities, a[2].intensities)
    with pytest.raises(ConfigError):
        run_tomography_experiment(router, 0.0, repeats=0)


def test_driver_calibration_values(router):
    drv = calibrate_driver(router)
    assert drv.rise_tau_ns == pytest.approx(2.14, abs=0.01)
    assert drv.fall_fast_tau_ns == pytest.approx(2.22, abs=0.01)
    assert drv.fall_slow_tau_ns == pytest.approx(36.6, abs=0.1)
    assert normalized_level_inverse(router, 0.2) == pytest.approx(drv.splice_fraction)


def test_drive_fraction_shape():
    drv = DriverWaveformConfig(2.0, 2.0, 30.0, 0.3)
    t = drv.time_grid()
    u = drv.drive_fraction(t)
    assert t[0] == -20 and t[-1] == pytest.approx(400)
    assert np.all(u[t < 0] == 0)
    assert u.max() <= 1 and u.max() > 0.999
    # continuous at the splice point
    assert np.max(np.abs(np.diff(u[t > 100]))) < 0.05


def test_driver_config_validation():
    with pytest.raises(ConfigError):
        DriverWaveformConfig(-1.0, 2.0, 30.0, 0.3)
    with pytest.raises(ConfigError):
        DriverWaveformConfig(1.0, 2.0, 30.0, 1.3)
    with pytest.raises(ConfigError):
        DriverWaveformConfig(1.0, 2.0, 30.0, 0.3, sample_interval_ns=1.0)
    with pytest.raises(ConfigError):
        calibrate_driver(None, fall_fast_ns=20.0, fall_total_ns=15.0)


def test_waveform_levels(router):
    drv = calibrate_driver(router)
    wf = run_waveform(router, "H", drv)
    lo, _ = port_powers(router, "H", 0.0)
    hi, _ = port_powers(router, "H", router.half_wave_voltage)
    assert wf.p1[0] == pytest.approx(lo)
    assert wf.p1.max() == pytest.approx(hi, rel=1e-6)
    noisy = run_waveform(router, "H", drv, noise=NoiseModel(rin=0.01), seed=1)
    assert not np.array_equal(noisy.p1, wf.p1)
