"""TOML run configuration: schema, validation and conversion to model objects.

Every key carries its unit in the name (``_nm``, ``_mm``, ``_kV``, ...).
All keys have defaults, so an empty file is a valid configuration. Validation
collects every problem before raising, and unknown keys are always errors.
"""

import copy
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .experiment import NoiseModel, SweepConfig, calibrate_driver
from .optics import RTP_N_Y, RTP_N_Z, RTP_R23, RTP_R33, build_router
from .polarization import STATE_LABELS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _positive(v):
    return None if v > 0 else "must be > 0"


def _non_negative(v):
    return None if v >= 0 else "must be >= 0"


def _fraction_open(v):
    return None if 0 < v < 1 else "must lie strictly between 0 and 1"


def _fraction_upper(v):
    return None if 0 < v <= 1 else "must lie in (0, 1]"


def _index(v):
    return None if 1 < v < 4 else "must lie in (1, 4)"


def _at_least(n):
    def check(v):
        return None if v >= n else f"must be >= {n}"

    return check


def _states(v):
    bad = [s for s in v if s not in STATE_LABELS]
    if bad:
        return f"unknown polarization label(s) {bad}; allowed {list(STATE_LABELS)}"
    if not v:
        return "must name at least one input state"
    if len(set(v)) != len(v):
        return "contains duplicates"
    return None


# section -> key -> (type, default, check); type is float, int, bool or "states"
SCHEMA = {
    "eom": {
        "wavelength_nm": (float, 785.0, _positive),
        "crystal_length_mm": (float, 10.0, _positive),
        "half_wave_voltage_kV": (float, 1.0, _positive),
        "power_transmission": (float, 0.98, _fraction_upper),
        "n_y": (float, RTP_N_Y, _index),
        "n_z": (float, RTP_N_Z, _index),
        "r23_pm_per_V": (float, RTP_R23 * 1e12, _non_negative),
        "r33_pm_per_V": (float, RTP_R33 * 1e12, _non_negative),
    },
    "beam_splitters": {
        "input_T": (float, 0.49, _fraction_open),
        "output_T": (float, 0.49, _fraction_open),
    },
    "interferometer": {
        "visibility": (float, 0.98, _fraction_upper),
        "eom_arm_transmission": (float, 0.99, _fraction_upper),
        "reference_arm_transmission": (float, 0.99, _fraction_upper),
        "residual_delay_fs": (float, 0.0, None),
    },
    "noise": {
        "rin": (float, 0.01, _non_negative),
        "phase_drift_rad": (float, 0.0, _non_negative),
        "drift_period_samples": (float, 1000.0, _positive),
        "detector_offset": (float, 0.0, _non_negative),
    },
    "sweep": {
        "input_states": ("states", ["H", "V", "D", "R"], _states),
        "start_kV": (float, 0.0, None),
        "stop_kV": (float, 2.0, None),
        "points": (int, 81, _at_least(8)),
        "repeats": (int, 20, _at_least(1)),
    },
    "tomography": {
        "port1_voltage_kV": (float, 1.0, None),
        "port2_voltage_kV": (float, 0.0, None),
        "repeats": (int, 1, _at_least(1)),
        "datasets": (int, 10, _at_least(2)),
    },
    "driver": {
        "voltage_kV": (float, 1.0, _positive),
        "rise_ns": (float, 2.9, _positive),
        "fall_fast_ns": (float, 2.2, _positive),
        "fall_total_ns": (float, 15.6, _positive),
        "splice_level": (float, 0.2, None),
        "pulse_width_ns": (float, 100.0, _positive),
        "sample_interval_ns": (float, 0.1, _positive),
        "noisy": (bool, False, None),
    },
    "bandwidth": {
        "fwhm_nm": (float, 30.0, _non_negative),
        "gvd_fs2_per_mm": (float, 302.0, None),
        "min_visibility": (float, 0.99, _fraction_open),
        "max_fwhm_nm": (float, 60.0, _positive),
        "points": (int, 61, _at_least(2)),
    },
}

TOP_LEVEL = {"seed": (int, 0, _non_negative)}


def default_config():
    cfg = {name: _default(spec) for name, spec in TOP_LEVEL.items()}
    for section, keys in SCHEMA.items():
        cfg[section] = {k: _default(spec) for k, spec in keys.items()}
    return cfg


def _default(spec):
    return copy.deepcopy(spec[1])


def _coerce(path, kind, value, errors):
    """Type-check one value; returns the normalized value or None on error."""
    if kind is bool:
        if isinstance(value, bool):
            return value
        errors.append(f"{path}: expected a boolean, got {type(value).__name__} {value!r}")
        return None
    if kind == "states":
        if isinstance(value, list) and all(isinstance(s, str) for s in value):
            return list(value)
        errors.append(f"{path}: expected a list of polarization labels, got {value!r}")
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        expected = "an integer" if kind is int else "a number"
        errors.append(f"{path}: expected {expected}, got {type(value).__name__} {value!r}")
        return None
    if kind is int:
        if isinstance(value, float):
            errors.append(f"{path}: expected an integer, got float {value!r}")
            return None
        return int(value)
    if not math.isfinite(value):
        errors.append(f"{path}: must be finite, got {value!r}")
        return None
    return float(value)


def _check_block(prefix, schema, given, out, errors):
    for key, value in given.items():
        path = f"{prefix}{key}"
        if key not in schema:
            errors.append(f"{path}: unknown key")
            continue
        kind, _, check = schema[key]
        value = _coerce(path, kind, value, errors)
        if value is None:
            continue
        problem = check(value) if check else None
        if problem:
            errors.append(f"{path}: {problem}, got {value!r}")
            continue
        out[key] = value


def _cross_checks(cfg, errors):
    sw = cfg["sweep"]
    if not sw["stop_kV"] > sw["start_kV"]:
        errors.append(f"sweep.stop_kV: must exceed sweep.start_kV ({sw['start_kV']!r}), got {sw['stop_kV']!r}")
    drv = cfg["driver"]
    if not drv["fall_total_ns"] > drv["fall_fast_ns"]:
        errors.append(
            f"driver.fall_total_ns: must exceed driver.fall_fast_ns ({drv['fall_fast_ns']!r}), got {drv['fall_total_ns']!r}"
        )
    if not 0.1 < drv["splice_level"] < 0.9:
        errors.append(f"driver.splice_level: must lie strictly between 0.1 and 0.9, got {drv['splice_level']!r}")
    if drv["sample_interval_ns"] > 0.5:
        errors.append(f"driver.sample_interval_ns: must be <= 0.5, got {drv['sample_interval_ns']!r}")
    bw = cfg["bandwidth"]
    if bw["max_fwhm_nm"] >= 2 * cfg["eom"]["wavelength_nm"]:
        errors.append("bandwidth.max_fwhm_nm: must be below twice eom.wavelength_nm")
    if bw["fwhm_nm"] >= 2 * cfg["eom"]["wavelength_nm"]:
        errors.append("bandwidth.fwhm_nm: must be below twice eom.wavelength_nm")


def normalize_config(raw):
    """Validate a parsed mapping and fill in defaults.

    Raises:
        ConfigError: listing every unknown key, type error and non-physical value.
    """
    errors = []
    cfg = default_config()
    for key, value in raw.items():
        if key in SCHEMA:
            if not isinstance(value, dict):
                errors.append(f"{key}: expected a table, got {type(value).__name__}")
                continue
            _check_block(f"{key}.", SCHEMA[key], value, cfg[key], errors)
        elif key in TOP_LEVEL:
            _check_block("", TOP_LEVEL, {key: value}, cfg, errors)
        else:
            errors.append(f"{key}: unknown key")
    if not errors:
        _cross_checks(cfg, errors)
    # keys with no default would be reported here; every key currently has one
    for section, keys in SCHEMA.items():
        for key in keys:
            if key not in cfg[section]:
                errors.append(f"{section}.{key}: missing required key")
    if errors:
        raise ConfigError(errors)
    return cfg


def validate_config(path):
    """Read a TOML file and return the normalized configuration.

    Raises:
        ConfigError: if the file is missing, unparsable or fails validation.
    """
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config file ({exc.strerror})") from None
    try:
        raw = tomllib.loads(text.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return normalize_config(raw)


# ---------------------------------------------------------------------------
# conversion to model objects


def router_from_config(cfg):
    eom, bs, ifm = cfg["eom"], cfg["beam_splitters"], cfg["interferometer"]
    return build_router(
        wavelength=eom["wavelength_nm"] * 1e-9,
        crystal_length=eom["crystal_length_mm"] * 1e-3,
        half_wave_voltage_target=eom["half_wave_voltage_kV"] * 1e3,
        eom_power_transmission=eom["power_transmission"],
        bs_in_T=bs["input_T"],
        bs_out_T=bs["output_T"],
        visibility=ifm["visibility"],
        eom_arm_power_transmission=ifm["eom_arm_transmission"],
        reference_arm_power_transmission=ifm["reference_arm_transmission"],
        residual_delay_fs=ifm["residual_delay_fs"],
        n_y=eom["n_y"],
        n_z=eom["n_z"],
        r23=eom["r23_pm_per_V"] * 1e-12,
        r33=eom["r33_pm_per_V"] * 1e-12,
    )


def noise_from_config(cfg):
    n = cfg["noise"]
    return NoiseModel(
        rin=n["rin"],
        phase_drift_amplitude=n["phase_drift_rad"],
        phase_drift_period=n["drift_period_samples"],
        detector_offset=n["detector_offset"],
    )


def sweep_configs(cfg, seed):
    """One :class:`SweepConfig` per configured input state, on disjoint seeds."""
    sw = cfg["sweep"]
    volts = tuple(np.linspace(sw["start_kV"], sw["stop_kV"], sw["points"]) * 1e3)
    noise = noise_from_config(cfg)
    seeds = np.random.SeedSequence(seed).generate_state(len(sw["input_states"]))
    return [
        SweepConfig(volts, input_state=s, repeats=sw["repeats"], noise=noise, seed=int(k))
        for s, k in zip(sw["input_states"], seeds)
    ]


def driver_from_config(cfg, router):
    d = cfg["driver"]
    return calibrate_driver(
        router,
        rise_ns=d["rise_ns"],
        fall_fast_ns=d["fall_fast_ns"],
        fall_total_ns=d["fall_total_ns"],
        splice_level=d["splice_level"],
        pulse_width_ns=d["pulse_width_ns"],
        sample_interval_ns=d["sample_interval_ns"],
        amplitude_V=d["voltage_kV"] * 1e3,
    )
