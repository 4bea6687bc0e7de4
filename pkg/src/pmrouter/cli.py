"""Batch front end: config -> simulation -> analysis -> report files.

Scenarios:
    sweep        voltage sweeps for several input states, fringe fits, SER and loss
    tomography   process tomography of both ports over repeated datasets
    risetime     switching waveform under the calibrated driver, edge times
    bandwidth    dispersion-limited visibility versus source bandwidth
    full-report  all of the above

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure. Errors
are written to stderr as one JSON object.
"""

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import reference
from .analysis import (
    acceptance_bandwidth,
    fit_sinusoid,
    fringe_extinction_db,
    gvd_visibility,
    pulse_edge_times,
    sweep_switching_metrics,
)
from .config import (
    default_config,
    driver_from_config,
    noise_from_config,
    router_from_config,
    sweep_configs,
    validate_config,
)
from .datasets import save_dataset
from .errors import (
    AnalysisError,
    ConfigError,
    ConvergenceError,
    DegenerateStateError,
    FitError,
    ParameterError,
    PhysicalityError,
    RankDeficientError,
)
from .experiment import NoiseModel, run_sweep, run_tomography_experiment, run_waveform
from .polarization import PAULI_LABELS
from .tomography import (
    ideal_chi,
    min_eigenvalue,
    mle_process,
    port2_frame_correction,
    process_fidelity,
    tp_deviation,
)

SCENARIOS = ("sweep", "tomography", "risetime", "bandwidth", "full-report")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_NUMERIC_ERRORS = (
    ConvergenceError,
    FitError,
    AnalysisError,
    RankDeficientError,
    PhysicalityError,
    DegenerateStateError,
    np.linalg.LinAlgError,
)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


class Run:
    """Output directory, progress printing and the growing summary."""

    def __init__(self, out, quiet):
        self.out = Path(out)
        self.quiet = quiet
        self.sections = []

    def log(self, msg):
        if not self.quiet:
            print(msg, flush=True)

    def path(self, name):
        return self.out / name

    def dataset(self, ds, name):
        save_dataset(ds, self.path(f"{name}.csv"), timestamp=True)


def _ref(pair, digits=2):
    mean, unc = pair
    return f"{mean:.{digits}f} +/- {unc:.{digits}f}"


# ---------------------------------------------------------------------------
# scenarios


def scenario_sweep(cfg, seed, run):
    router = router_from_config(cfg)
    upi_cfg = cfg["eom"]["half_wave_voltage_kV"] * 1e3
    per_state = {}
    plot_rows = []
    for sc in sweep_configs(cfg, seed):
        s = sc.input_state
        run.log(f"sweep: input {s}")
        ds = run_sweep(router, sc)
        name = f"sweep_{s}"
        run.dataset(ds, name)
        m1, m2 = ds.mean(1), ds.mean(2)
        fit1 = fit_sinusoid(ds.voltages, m1)
        fit2 = fit_sinusoid(ds.voltages, m2)
        met = sweep_switching_metrics(ds, upi_cfg)
        per_state[s] = {
            "dataset": f"{name}.csv",
            "ser1_db": met.ser1_db,
            "ser2_db": met.ser2_db,
            "loss1": met.loss1,
            "loss2": met.loss2,
            "insertion_loss": met.insertion_loss,
            "visibility_at_setpoints": met.visibility,
            "fit_port1": {
                "offset": fit1.offset,
                "amplitude": fit1.amplitude,
                "half_wave_voltage_V": fit1.half_wave_voltage,
                "phase_rad": fit1.phase,
                "visibility": fit1.visibility,
                "residual_rms": fit1.residual_rms,
            },
            "fit_port2": {
                "half_wave_voltage_V": fit2.half_wave_voltage,
                "visibility": fit2.visibility,
            },
            "fringe_extinction_db": 10 * math.log10(m1.max() / m1.min()) if m1.min() > 0 else math.inf,
        }
        s1, s2 = ds.std(1), ds.std(2)
        f1, f2 = fit1(ds.voltages), fit2(ds.voltages)
        for i, u in enumerate(ds.voltages):
            plot_rows.append((s, u, m1[i], s1[i], f1[i], m2[i], s2[i], f2[i]))
    write_csv(
        run.path("sweep_plot.csv"),
        ("input", "voltage_V", "p1_mean", "p1_std", "p1_fit", "p2_mean", "p2_std", "p2_fit"),
        plot_rows,
    )
    sers = [v[k] for v in per_state.values() for k in ("ser1_db", "ser2_db")]
    metrics = {
        "per_input": per_state,
        "half_wave_voltage_V": router.half_wave_voltage,
        "configured_visibility": cfg["interferometer"]["visibility"],
        "visibility_limited_extinction_db": fringe_extinction_db(cfg["interferometer"]["visibility"]),
        "ser1_spread_db": float(np.ptp([v["ser1_db"] for v in per_state.values()])),
        "ser2_spread_db": float(np.ptp([v["ser2_db"] for v in per_state.values()])),
        "ser_range_db": [min(sers), max(sers)],
    }

    lines = [
        "## Switching extinction and loss",
        "",
        f"Datasets: {', '.join(v['dataset'] for v in per_state.values())}; curves in sweep_plot.csv.",
        f"Port 1 at {upi_cfg / 1e3:g} kV, port 2 at 0 kV. Reported values in parentheses.",
        "",
        "| input | SER1 (dB) | SER2 (dB) | loss1 (%) | loss2 (%) | insertion (%) | fitted U_pi (V) |",
        "|---|---|---|---|---|---|---|",
    ]
    for s, v in per_state.items():
        r1 = f" ({_ref(reference.SER_DB[1][s], digits=1)})" if s in reference.SER_DB[1] else ""
        r2 = f" ({_ref(reference.SER_DB[2][s], digits=1)})" if s in reference.SER_DB[2] else ""
        l1 = f" ({_ref(reference.LOSS_PCT[1][s])})" if s in reference.LOSS_PCT[1] else ""
        l2 = f" ({_ref(reference.LOSS_PCT[2][s])})" if s in reference.LOSS_PCT[2] else ""
        il = f" ({_ref(reference.INSERTION_LOSS_PCT[s], digits=1)})" if s in reference.INSERTION_LOSS_PCT else ""
        lines.append(
            f"| {s} | {v['ser1_db']:.2f}{r1} | {v['ser2_db']:.2f}{r2} | {100 * v['loss1']:.2f}{l1} "
            f"| {100 * v['loss2']:.2f}{l2} | {100 * v['insertion_loss']:.2f}{il} "
            f"| {v['fit_port1']['half_wave_voltage_V']:.1f} |"
        )
    lines += [
        "",
        f"Visibility-limited extinction for V = {cfg['interferometer']['visibility']:g}: "
        f"{metrics['visibility_limited_extinction_db']:.2f} dB. SER spread across inputs: "
        f"{metrics['ser1_spread_db']:.4f} dB (port 1), {metrics['ser2_spread_db']:.4f} dB (port 2).",
        "",
    ]
    run.sections.append("\n".join(lines))
    return metrics


def _chi_json(chi):
    chi = np.asarray(chi)
    return {"basis": list(PAULI_LABELS), "real": chi.real.tolist(), "imag": chi.imag.tolist()}


def scenario_tomography(cfg, seed, run):
    router = router_from_config(cfg)
    tc = cfg["tomography"]
    noise = noise_from_config(cfg)
    volts = {1: tc["port1_voltage_kV"] * 1e3, 2: tc["port2_voltage_kV"] * 1e3}
    seeds = np.random.SeedSequence(seed).generate_state(tc["datasets"])
    target = ideal_chi("I")
    rows = []
    chis = {1: [], 2: []}
    for i, s in enumerate(seeds):
        s = int(s)
        run.log(f"tomography: dataset {i + 1}/{len(seeds)}")
        for port in (1, 2):
            ds = run_tomography_experiment(router, volts[port], noise=noise, repeats=tc["repeats"], seed=s)[port]
            name = f"tomography_port{port}_set{i:02d}"
            run.dataset(ds, name)
            fit_ds = port2_frame_correction(ds) if port == 2 else ds
            chi = mle_process(fit_ds)
            chis[port].append(chi)
            rows.append(
                (i, s, port, f"{name}.csv", process_fidelity(chi, target), min_eigenvalue(chi), tp_deviation(chi))
            )
    write_csv(
        run.path("tomography_fidelity.csv"),
        ("set", "seed", "port", "dataset", "fidelity", "min_eigenvalue", "tp_deviation"),
        rows,
    )
    metrics = {"per_port": {}}
    for port in (1, 2):
        fids = np.array([r[4] for r in rows if r[2] == port])
        mean_chi = np.mean(chis[port], axis=0)
        write_json(
            run.path(f"chi_port{port}.json"),
            {
                "port": port,
                "frame_corrected": port == 2,
                "voltage_V": volts[port],
                "datasets": [_chi_json(c) for c in chis[port]],
                "mean": _chi_json(mean_chi),
            },
        )
        metrics["per_port"][str(port)] = {
            "fidelity_mean": float(fids.mean()),
            "fidelity_std": float(fids.std(ddof=1)),
            "fidelities": fids.tolist(),
            "min_eigenvalue": float(min(r[5] for r in rows if r[2] == port)),
            "max_tp_deviation": float(max(r[6] for r in rows if r[2] == port)),
            "chi_file": f"chi_port{port}.json",
        }
    lines = [
        "## Process tomography",
        "",
        f"{tc['datasets']} datasets per port ({tc['repeats']} repeat(s) each), relative noise "
        f"{noise.rin:g}; per-dataset results in tomography_fidelity.csv, process matrices in "
        "chi_port1.json and chi_port2.json. Port 2 is reconstructed after the H-axis frame correction.",
        "",
        "| port | fidelity (simulated) | fidelity (reported) |",
        "|---|---|---|",
    ]
    for port in (1, 2):
        m = metrics["per_port"][str(port)]
        ref_mean, ref_std = reference.PROCESS_FIDELITY[port]
        lines.append(f"| {port} | {m['fidelity_mean']:.6f} +/- {m['fidelity_std']:.6f} | {ref_mean:.4f} +/- {ref_std:.4f} |")
    lines.append("")
    run.sections.append("\n".join(lines))
    return metrics


def scenario_risetime(cfg, seed, run):
    router = router_from_config(cfg)
    drv = driver_from_config(cfg, router)
    noise = noise_from_config(cfg) if cfg["driver"]["noisy"] else NoiseModel()
    run.log("risetime: simulating switching waveform")
    wf = run_waveform(router, "H", drv, noise=noise, seed=seed)
    run.dataset(wf, "waveform")
    edges = pulse_edge_times(wf.t_ns, wf.p1)
    metrics = {
        "dataset": "waveform.csv",
        "rise_10_90_ns": edges[(10, 90)],
        "fall_90_20_ns": edges[(90, 20)],
        "fall_90_10_ns": edges[(90, 10)],
        "driver": {
            "rise_tau_ns": drv.rise_tau_ns,
            "fall_fast_tau_ns": drv.fall_fast_tau_ns,
            "fall_slow_tau_ns": drv.fall_slow_tau_ns,
            "splice_fraction": drv.splice_fraction,
            "amplitude_V": drv.amplitude_V,
        },
    }
    lines = [
        "## Switching speed",
        "",
        "Port-1 trace under one calibrated driver pulse in waveform.csv.",
        "",
        "| edge | simulated (ns) | reported (ns) |",
        "|---|---|---|",
        f"| rise 10-90 % | {metrics['rise_10_90_ns']:.2f} | {reference.RISE_10_90_NS:.1f} |",
        f"| fall 90-20 % | {metrics['fall_90_20_ns']:.2f} | {reference.FALL_90_20_NS:.1f} |",
        f"| fall 90-10 % | {metrics['fall_90_10_ns']:.2f} | {reference.FALL_90_10_NS:.1f} |",
        "",
    ]
    run.sections.append("\n".join(lines))
    return metrics


def scenario_bandwidth(cfg, seed, run):
    bw = cfg["bandwidth"]
    center = cfg["eom"]["wavelength_nm"]
    length = 2 * cfg["eom"]["crystal_length_mm"]
    delay = cfg["interferometer"]["residual_delay_fs"]
    gvd = bw["gvd_fs2_per_mm"]
    run.log("bandwidth: integrating dispersion-limited visibility")
    grid = np.linspace(0.0, bw["max_fwhm_nm"], bw["points"])
    curve = [gvd_visibility(f, center, gvd, length, delay) for f in grid]
    write_csv(run.path("bandwidth_curve.csv"), ("fwhm_nm", "visibility"), zip(grid, curve))
    v_cfg = gvd_visibility(bw["fwhm_nm"], center, gvd, length, delay)
    v_meas = gvd_visibility(reference.MEASUREMENT_BANDWIDTH_NM, center, gvd, length, delay)
    accept = acceptance_bandwidth(bw["min_visibility"], center, gvd, length, delay, max_nm=bw["max_fwhm_nm"])
    metrics = {
        "curve_file": "bandwidth_curve.csv",
        "glass_length_mm": length,
        "visibility_at_fwhm": v_cfg,
        "fwhm_nm": bw["fwhm_nm"],
        "visibility_at_measurement_bandwidth": v_meas,
        "acceptance_bandwidth_nm": accept,
        "min_visibility": bw["min_visibility"],
        "reported_acceptance_bandwidth_nm": reference.ACCEPTANCE_BANDWIDTH_NM,
    }
    lines = [
        "## Dispersion-limited bandwidth",
        "",
        f"Gaussian spectrum at {center:g} nm through {length:g} mm of crystal with GVD {gvd:g} fs^2/mm "
        "and no compensation in the other arm; curve in bandwidth_curve.csv.",
        "",
        f"- visibility factor at {bw['fwhm_nm']:g} nm FWHM: {v_cfg:.4f}",
        f"- visibility factor at {reference.MEASUREMENT_BANDWIDTH_NM:g} nm FWHM: {v_meas:.6f}",
        f"- FWHM keeping visibility >= {bw['min_visibility']:g}: {accept:.2f} nm "
        f"(reported: {reference.ACCEPTANCE_BANDWIDTH_NM:g} nm; not reproduced by this model, see README)",
        "",
    ]
    run.sections.append("\n".join(lines))
    return metrics


_RUNNERS = {
    "sweep": scenario_sweep,
    "tomography": scenario_tomography,
    "risetime": scenario_risetime,
    "bandwidth": scenario_bandwidth,
}


def run_scenario(cfg, scenario, seed, out, quiet=True):
    """Run one scenario (or all for ``full-report``) and write its files into ``out``.

    Returns the metrics dict that was also written to ``metrics.json``.
    """
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {list(SCENARIOS)}")
    run = Run(out, quiet)
    names = list(_RUNNERS) if scenario == "full-report" else [scenario]
    metrics = {"scenario": scenario, "seed": seed, "config": cfg}
    for name in names:
        metrics[name] = _RUNNERS[name](cfg, seed, run)
    write_json(run.path("metrics.json"), metrics)
    header = [
        f"# Router simulation: {scenario}",
        "",
        f"Seed {seed}. Every number below is computed from the files listed with it; "
        "the full configuration is echoed in metrics.json.",
        "",
    ]
    run.path("summary.md").write_text("\n".join(header + run.sections), encoding="utf-8")
    return metrics


def _fail(code, exc):
    err = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    if isinstance(exc, ConfigError):
        err["errors"] = exc.errors
    if isinstance(exc, ConvergenceError):
        err["diagnostics"] = {"gradient_norm": exc.gradient_norm, "iterations": exc.iterations}
    print(json.dumps(_jsonable(err), sort_keys=True), file=sys.stderr)
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="pmrouter", description="Polarization-maintaining EO router virtual lab.")
    p.add_argument("--config", type=Path, help="TOML configuration file (defaults used if omitted)")
    p.add_argument("--scenario", required=True, help=f"one of {', '.join(SCENARIOS)}")
    p.add_argument("--seed", type=int, help="master seed (overrides the config's seed)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = validate_config(args.config) if args.config else default_config()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(f"--seed: must be >= 0, got {args.seed}")
            cfg["seed"] = args.seed
        if args.scenario not in SCENARIOS:
            raise ConfigError(f"--scenario: unknown scenario {args.scenario!r}; choose from {list(SCENARIOS)}")
        try:
            args.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"--out: cannot create {args.out} ({exc.strerror})") from None
        if not os.access(args.out, os.W_OK):
            raise ConfigError(f"--out: directory {args.out} is not writable")
        run_scenario(cfg, args.scenario, cfg["seed"], args.out, quiet=args.quiet)
    except (ConfigError, ParameterError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except _NUMERIC_ERRORS as exc:
        return _fail(EXIT_NUMERIC, exc)
    if not args.quiet:
        print(f"wrote {args.out / 'summary.md'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
