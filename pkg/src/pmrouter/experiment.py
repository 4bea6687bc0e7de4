"""Synthetic measurement runs: voltage sweeps, tomography grids and switching waveforms.

Noise is drawn from one RNG stream per measurement cell, seeded from
``(seed, cell index)``, so results do not depend on evaluation order and
cells can be generated in parallel.

Readings are already normalized to the input-port power. ``NoiseModel.rin``
is the relative noise left on that ratio after normalization.
"""

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .datasets import SweepDataset, TomographyDataset, WaveformDataset
from .errors import ConfigError
from .optics import port_powers, router_transfer
from .polarization import JONES, STATE_LABELS, jones_vector

# spawn-key prefixes keep the three run types on disjoint streams
_SWEEP, _TOMO, _WAVE = 1, 2, 3


@dataclass(frozen=True)
class NoiseModel:
    rin: float = 0.0
    phase_drift_amplitude: float = 0.0
    phase_drift_period: float = 1000.0
    detector_offset: float = 0.0

    def __post_init__(self):
        for name in ("rin", "phase_drift_amplitude", "detector_offset"):
            if getattr(self, name) < 0:
                raise ConfigError(f"noise.{name} must be >= 0, got {getattr(self, name)}")
        if not self.phase_drift_period > 0:
            raise ConfigError(f"noise.phase_drift_period must be > 0, got {self.phase_drift_period}")

    @property
    def is_noiseless(self):
        return self.rin == 0 and self.phase_drift_amplitude == 0 and self.detector_offset == 0

    def drift(self, ticks):
        """Interferometer phase drift (radians) at integer time ``ticks``."""
        ticks = np.asarray(ticks, dtype=float)
        return self.phase_drift_amplitude * np.sin(2 * np.pi * ticks / self.phase_drift_period)


@dataclass(frozen=True)
class SweepConfig:
    voltages: tuple
    input_state: str = "H"
    repeats: int = 100
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0

    def __post_init__(self):
        volts = np.asarray(self.voltages, dtype=float)
        if volts.size == 0:
            raise ConfigError("sweep voltage grid is empty")
        if volts.ndim != 1 or np.any(np.diff(volts) <= 0):
            raise ConfigError("sweep voltage grid must be strictly increasing")
        if self.repeats < 1:
            raise ConfigError(f"sweep repeats must be >= 1, got {self.repeats}")
        object.__setattr__(self, "voltages", tuple(float(u) for u in volts))


@dataclass(frozen=True)
class DriverWaveformConfig:
    """High-voltage pulse shape, as fractions of the drive amplitude.

    Rise: 1 - exp(-t / rise_tau). Fall: exponential with ``fall_fast_tau``
    down to ``splice_fraction`` of the amplitude, then ``fall_slow_tau``.
    ``amplitude_V=None`` drives at the router's half-wave voltage.
    """

    rise_tau_ns: float
    fall_fast_tau_ns: float
    fall_slow_tau_ns: float
    splice_fraction: float
    pulse_width_ns: float = 100.0
    sample_interval_ns: float = 0.1
    pre_ns: float = 20.0
    post_ns: float = 300.0
    amplitude_V: Optional[float] = None

    def __post_init__(self):
        for name in ("rise_tau_ns", "fall_fast_tau_ns", "fall_slow_tau_ns", "pulse_width_ns", "sample_interval_ns"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"driver.{name} must be > 0, got {getattr(self, name)}")
        if self.sample_interval_ns > 0.5:
            raise ConfigError(f"driver.sample_interval_ns must be <= 0.5, got {self.sample_interval_ns}")
        if not 0 < self.splice_fraction < 1:
            raise ConfigError(f"driver.splice_fraction must lie in (0, 1), got {self.splice_fraction}")
        if self.pre_ns < 0 or self.post_ns < 0:
            raise ConfigError("driver.pre_ns and driver.post_ns must be >= 0")

    def time_grid(self):
        n = int(round((self.pre_ns + self.pulse_width_ns + self.post_ns) / self.sample_interval_ns))
        return -self.pre_ns + self.sample_interval_ns * np.arange(n + 1)

    def drive_fraction(self, t):
        """Applied voltage as a fraction of the amplitude at times ``t`` (ns)."""
        t = np.asarray(t, dtype=float)
        w = self.pulse_width_ns
        u = np.zeros_like(t)
        on = (t >= 0) & (t < w)
        u[on] = -np.expm1(-t[on] / self.rise_tau_ns)
        u_top = -np.expm1(-w / self.rise_tau_ns)
        fast_end = w + self.fall_fast_tau_ns * np.log(u_top / self.splice_fraction) if u_top > self.splice_fraction else w
        fast = (t >= w) & (t < fast_end)
        u[fast] = u_top * np.exp(-(t[fast] - w) / self.fall_fast_tau_ns)
        slow = t >= fast_end
        start = min(u_top, self.splice_fraction)
        u[slow] = start * np.exp(-(t[slow] - fast_end) / self.fall_slow_tau_ns)
        return u


def _normals(seed, key, size):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
    return rng.standard_normal(size)


def _apply_noise(true_value, noise, normal):
    reading = true_value * (1.0 + noise.rin * normal) + noise.detector_offset
    return max(reading, 0.0)


def run_sweep(router, cfg):
    """Voltage sweep: ``cfg.repeats`` readings of (P1/P_in, P2/P_in) per voltage."""
    volts = np.asarray(cfg.voltages)
    noise = cfg.noise
    n, reps = volts.size, cfg.repeats
    p1 = np.empty((n, reps))
    p2 = np.empty((n, reps))
    state = jones_vector(cfg.input_state)
    drifting = noise.phase_drift_amplitude > 0
    if not drifting:
        true1, true2 = port_powers(router, state, volts)
    for i in range(n):
        for k in range(reps):
            if drifting:
                a, b = port_powers(router, state, volts[i], float(noise.drift(i * reps + k)))
            else:
                a, b = true1[i], true2[i]
            if noise.rin == 0 and noise.detector_offset == 0:
                p1[i, k], p2[i, k] = a, b
                continue
            e1, e2 = _normals(cfg.seed, (_SWEEP, i, k), 2)
            p1[i, k] = _apply_noise(a, noise, e1)
            p2[i, k] = _apply_noise(b, noise, e2)
    meta = {
        "seed": cfg.seed,
        "config": {
            "input_state": cfg.input_state,
            "repeats": reps,
            "noise": asdict(noise),
            "half_wave_voltage_V": router.half_wave_voltage,
        },
    }
    label = cfg.input_state if isinstance(cfg.input_state, str) else "custom"
    return SweepDataset(label, volts.copy(), p1, p2, metadata=meta)


def _port_intensities(router, voltage, extra_phase):
    """(2, 6, 6) noiseless intensities [port, input, projector]."""
    out = np.empty((2, 6, 6))
    analyzers = np.array([JONES[m] for m in STATE_LABELS])
    for s, label in enumerate(STATE_LABELS):
        fields = router_transfer(router, JONES[label], voltage, extra_phase)
        for p, f in enumerate(fields):
            # |<m|E>|^2 summed over the two spatial modes
            amps = analyzers.conj() @ f.T
            out[p, s] = np.sum(np.abs(amps) ** 2, axis=1)
    return out


def run_tomography_experiment(router, voltage, noise=None, repeats=1, seed=0):
    """Analyzer intensities at both ports for the six input eigenstates.

    Returns ``{1: TomographyDataset, 2: TomographyDataset}``; port-2 data is
    left in the lab frame (H axis inverted by the odd reflection count).
    """
    noise = NoiseModel() if noise is None else noise
    if repeats < 1:
        raise ConfigError(f"tomography repeats must be >= 1, got {repeats}")
    data = np.empty((2, 6, 6, repeats))
    drifting = noise.phase_drift_amplitude > 0
    base = None if drifting else _port_intensities(router, voltage, 0.0)
    for k in range(repeats):
        for s in range(6):
            for m in range(6):
                tick = (k * 6 + s) * 6 + m
                true = _port_intensities(router, voltage, float(noise.drift(tick)))[:, s, m] if drifting else base[:, s, m]
                for p in range(2):
                    if noise.rin == 0 and noise.detector_offset == 0:
                        data[p, s, m, k] = true[p]
                    else:
                        (e,) = _normals(seed, (_TOMO, p, s, m, k), 1)
                        data[p, s, m, k] = _apply_noise(true[p], noise, e)
    meta = {
        "seed": seed,
        "config": {"voltage_V": float(voltage), "repeats": repeats, "noise": asdict(noise)},
    }
    return {p + 1: TomographyDataset(p + 1, data[p], metadata=dict(meta)) for p in range(2)}


def normalized_level_inverse(router, level, input_state="H"):
    """Drive fraction u in [0, 1] at which port 1 reaches ``level`` of its 0 -> U_pi swing."""
    u_pi = router.half_wave_voltage
    lo = port_powers(router, input_state, 0.0)[0]
    hi = port_powers(router, input_state, u_pi)[0]

    def f(u):
        return (port_powers(router, input_state, u * u_pi)[0] - lo) / (hi - lo) - level

    return brentq(f, 0.0, 1.0, xtol=1e-15, rtol=1e-15)


def calibrate_driver(router, rise_ns=2.9, fall_fast_ns=2.2, fall_total_ns=15.6, splice_level=0.2, **kwargs):
    """Driver time constants that give the requested optical transition times at port 1.

    ``rise_ns`` is the 10-90 % rise, ``fall_fast_ns`` the 90 -> ``splice_level``
    fall and ``fall_total_ns`` the 90 -> 10 % fall.
    """
    if not fall_total_ns > fall_fast_ns > 0 or not rise_ns > 0:
        raise ConfigError("driver targets must satisfy rise > 0 and fall_total > fall_fast > 0")
    if not 0.1 < splice_level < 0.9:
        raise ConfigError(f"splice level must lie in (0.1, 0.9), got {splice_level}")
    u10 = normalized_level_inverse(router, 0.1)
    u90 = normalized_level_inverse(router, 0.9)
    u_s = normalized_level_inverse(router, splice_level)
    return DriverWaveformConfig(
        rise_tau_ns=rise_ns / np.log((1 - u10) / (1 - u90)),
        fall_fast_tau_ns=fall_fast_ns / np.log(u90 / u_s),
        fall_slow_tau_ns=(fall_total_ns - fall_fast_ns) / np.log(u_s / u10),
        splice_fraction=u_s,
        **kwargs,
    )


def run_waveform(router, input_state, drv, noise=None, seed=0):
    """Time trace of P1/P_in while the driver applies one pulse."""
    noise = NoiseModel() if noise is None else noise
    t = drv.time_grid()
    amplitude = router.half_wave_voltage if drv.amplitude_V is None else drv.amplitude_V
    volts = amplitude * drv.drive_fraction(t)
    ticks = np.arange(t.size)
    p1, _ = port_powers(router, input_state, volts, noise.drift(ticks))
    if noise.rin > 0 or noise.detector_offset > 0:
        for i in range(t.size):
            (e,) = _normals(seed, (_WAVE, i), 1)
            p1[i] = _apply_noise(p1[i], noise, e)
    meta = {"seed": seed, "config": {"driver": asdict(drv), "noise": asdict(noise)}}
    return WaveformDataset(t, p1, metadata=meta)
