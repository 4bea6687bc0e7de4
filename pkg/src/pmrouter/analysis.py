"""Classical analysis of router data: fringe fits, extinction/loss, edge timing, dispersion."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from ._lm import levenberg_marquardt
from .errors import AnalysisError, FitError

C_NM_PER_FS = 299.792458


@dataclass(frozen=True)
class SinusoidFit:
    """Fringe model ``offset + amplitude * cos(pi * U / half_wave_voltage + phase)``."""

    offset: float
    amplitude: float
    half_wave_voltage: float
    phase: float
    residual_rms: float

    @property
    def visibility(self):
        return self.amplitude / self.offset

    def __call__(self, voltage):
        u = np.asarray(voltage, dtype=float)
        return self.offset + self.amplitude * np.cos(np.pi * u / self.half_wave_voltage + self.phase)


def _wrap(phase):
    return float((phase + np.pi) % (2 * np.pi) - np.pi)


def fit_sinusoid(voltages, powers, uncertainties=None, min_points=8):
    """Weighted least-squares fringe fit with a multi-start over the period.

    Every candidate angular frequency on a grid fine enough to keep the phase
    error across the data below 0.2 rad is solved linearly for
    (offset, cos, sin) weights; the best few are refined by damped
    least squares on all four parameters.

    Raises:
        FitError: too few points, zero span, a flat signal, or a fitted
            half period longer than twice the voltage span.
    """
    u = np.asarray(voltages, dtype=float)
    y = np.asarray(powers, dtype=float)
    if u.shape != y.shape or u.ndim != 1:
        raise FitError("voltages and powers must be 1-D arrays of equal length")
    if u.size < min_points:
        raise FitError(f"need at least {min_points} points, got {u.size}")
    span = float(u.max() - u.min())
    if span <= 0:
        raise FitError("voltage span is zero")
    if uncertainties is None:
        w = np.ones_like(y)
    else:
        sig = np.asarray(uncertainties, dtype=float)
        positive = sig[sig > 0]
        floor = positive.min() if positive.size else 1.0
        w = 1.0 / np.where(sig > 0, sig, floor)
    scale = float(np.max(np.abs(y)))
    if scale == 0 or np.ptp(y) <= 1e-9 * scale:
        raise FitError("signal is flat; half-wave voltage is unidentifiable")

    spacing = np.min(np.diff(np.unique(u)))
    w_min, w_max = np.pi / (2 * span), np.pi / spacing
    omegas = np.arange(w_min, w_max + 0.2 / span, 0.2 / span)
    ssr = np.empty(omegas.size)
    coefs = np.empty((omegas.size, 3))
    for j, om in enumerate(omegas):
        design = np.column_stack([np.ones_like(u), np.cos(om * u), -np.sin(om * u)]) * w[:, None]
        c, *_ = np.linalg.lstsq(design, y * w, rcond=None)
        coefs[j] = c
        resid = design @ c - y * w
        ssr[j] = resid @ resid
    is_min = np.r_[True, ssr[1:] <= ssr[:-1]] & np.r_[ssr[:-1] <= ssr[1:], True]
    starts = np.flatnonzero(is_min)
    starts = starts[np.argsort(ssr[starts])][:4]

    def residuals(p):
        off, amp, upi, ph = p
        arg = np.pi * u / upi + ph
        c, s = np.cos(arg), np.sin(arg)
        r = (off + amp * c - y) * w
        jac = np.column_stack([np.ones_like(u), c, amp * s * np.pi * u / upi**2, -amp * s]) * w[:, None]
        return r, jac

    best = None
    for j in starts:
        off, a, b = coefs[j]
        p0 = [off, np.hypot(a, b), np.pi / omegas[j], math.atan2(b, a)]
        res = levenberg_marquardt(residuals, p0, max_iter=200, gtol=0.0, xtol=1e-10)
        if best is None or res.cost < best.cost:
            best = res
    off, amp, upi, ph = best.x
    if amp < 0:
        amp, ph = -amp, ph + np.pi
    if upi < 0:
        upi, ph = -upi, -ph
    if amp <= 1e-6 * scale:
        raise FitError("fitted amplitude is zero; half-wave voltage is unidentifiable")
    if upi > 2 * span:
        raise FitError(f"fitted half period {upi:.4g} exceeds twice the voltage span {span:.4g}")
    model = off + amp * np.cos(np.pi * u / upi + ph)
    rms = float(np.sqrt(np.mean((model - y) ** 2)))
    return SinusoidFit(float(off), float(amp), float(upi), _wrap(ph), rms)


@dataclass(frozen=True)
class SwitchingMetrics:
    """Extinction (dB) and losses (fractions) for both switch settings.

    Port 1 figures are taken at the half-wave voltage, port 2 figures at 0 V.
    ``insertion_loss`` is evaluated at the half-wave setting.
    """

    ser1_db: float
    ser2_db: float
    loss1: float
    loss2: float
    insertion_loss: float
    visibility: float


def _ser_db(wanted, leaked):
    if leaked == 0:
        return math.inf
    if wanted == 0:
        return -math.inf
    return 10 * math.log10(wanted / leaked)


def compute_switching_metrics(p_in, p1_on, p2_on, p1_off, p2_off):
    """Switching metrics from powers at U = U_pi (``*_on``) and U = 0 (``*_off``).

    An infinite SER is returned when the leaked power is exactly zero.
    """
    values = (p_in, p1_on, p2_on, p1_off, p2_off)
    if any(v < 0 for v in values):
        raise ValueError("powers must be non-negative")
    if p_in <= 0:
        raise ValueError("input power must be positive")
    denom = p1_on + p1_off
    vis = (p1_on - p1_off) / denom if denom > 0 else 0.0
    return SwitchingMetrics(
        ser1_db=_ser_db(p1_on, p2_on),
        ser2_db=_ser_db(p2_off, p1_off),
        loss1=1 - p1_on / p_in,
        loss2=1 - p2_off / p_in,
        insertion_loss=1 - p1_on / p_in - p2_on / p_in,
        visibility=vis,
    )


def sweep_switching_metrics(dataset, half_wave_voltage):
    """Switching metrics from a sweep's per-point means at 0 V and ``half_wave_voltage``."""
    volts = dataset.voltages
    i_off = int(np.argmin(np.abs(volts)))
    i_on = int(np.argmin(np.abs(volts - half_wave_voltage)))
    m1, m2 = dataset.mean(1), dataset.mean(2)
    return compute_switching_metrics(1.0, m1[i_on], m2[i_on], m1[i_off], m2[i_off])


def fringe_extinction_db(visibility):
    """Max/min contrast of a fringe with the given visibility, in dB."""
    return 10 * math.log10((1 + visibility) / (1 - visibility))


def plateau_levels(p, fraction=0.1):
    """(low, high) from medians of the first and last ``fraction`` of samples."""
    p = np.asarray(p, dtype=float)
    k = max(1, int(round(fraction * p.size)))
    a, b = float(np.median(p[:k])), float(np.median(p[-k:]))
    return min(a, b), max(a, b)


def _crossing(t, p, level, rising, start=0):
    """Time of the first crossing of ``level`` in the given direction at or after index ``start``."""
    above = p >= level
    if rising:
        idx = np.flatnonzero(~above[start:-1] & above[start + 1:])
    else:
        idx = np.flatnonzero(above[start:-1] & ~above[start + 1:])
    if idx.size == 0:
        return None, None
    i = start + int(idx[0])
    p0, p1 = p[i], p[i + 1]
    frac = 0.0 if p1 == p0 else (level - p0) / (p1 - p0)
    return t[i] + frac * (t[i + 1] - t[i]), i


def extract_transition_times(t, p, from_pct, to_pct, levels=None):
    """Time between the ``from_pct`` and ``to_pct`` crossings of one edge.

    ``from_pct < to_pct`` measures a rising edge, otherwise a falling one.
    Percentages refer to the plateau swing; plateaus default to
    :func:`plateau_levels`. The first edge in the requested direction is used.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    if t.shape != p.shape or t.size < 2:
        raise AnalysisError("time and signal arrays must have equal length >= 2")
    if from_pct == to_pct:
        return 0.0
    low, high = plateau_levels(p) if levels is None else levels
    swing = high - low
    if swing <= 0:
        raise AnalysisError("signal has no transition between its plateaus")
    rising = to_pct > from_pct
    lv_from = low + from_pct / 100 * swing
    lv_to = low + to_pct / 100 * swing
    t_from, i = _crossing(t, p, lv_from, rising)
    if t_from is None:
        raise AnalysisError(f"signal never crosses the {from_pct}% level {'upward' if rising else 'downward'}")
    t_to, _ = _crossing(t, p, lv_to, rising, start=i)
    if t_to is None:
        raise AnalysisError(f"signal never crosses the {to_pct}% level after the {from_pct}% crossing")
    return float(abs(t_to - t_from))


def pulse_edge_times(t, p, pairs=((10, 90), (90, 20), (90, 10))):
    """Edge times of a single pulse, keyed by ``(from_pct, to_pct)``.

    The record is cut halfway between the 50 % crossings so that each edge
    gets its own plateau estimate.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    k = max(1, int(round(0.1 * p.size)))
    low = float(np.median(p[:k]))
    high = float(np.max(p))
    mid = (low + high) / 2
    t_up, i_up = _crossing(t, p, mid, True)
    if t_up is None:
        raise AnalysisError("no rising edge found")
    t_down, i_down = _crossing(t, p, mid, False, start=i_up)
    if t_down is None:
        raise AnalysisError("no falling edge after the rising edge")
    cut = (i_up + i_down) // 2
    out = {}
    for a, b in pairs:
        sl = slice(0, cut + 1) if b > a else slice(cut, None)
        out[(a, b)] = extract_transition_times(t[sl], p[sl], a, b)
    return out


def spectral_sigma(fwhm_nm, center_nm):
    """RMS angular-frequency width (rad/fs) of a Gaussian power spectrum.

    The wavelength FWHM is mapped to frequency through its two edges.
    """
    lo = center_nm - fwhm_nm / 2
    hi = center_nm + fwhm_nm / 2
    if lo <= 0:
        raise ValueError("bandwidth must be smaller than twice the center wavelength")
    d_omega = 2 * np.pi * C_NM_PER_FS * (1 / lo - 1 / hi)
    return d_omega / (2 * np.sqrt(2 * np.log(2)))


def gvd_visibility(fwhm_nm, center_nm, gvd_fs2_per_mm, length_mm, residual_delay_fs=0.0):
    """Interference visibility limited by dispersion mismatch between the arms.

    Computes |integral S(w) exp(i [tau x + beta x^2 / 2]) dx| for a unit-area
    Gaussian spectrum S, with beta = GVD * length, by adaptive quadrature on
    quarter-sigma panels.
    """
    if fwhm_nm == 0:
        return 1.0
    sigma = spectral_sigma(fwhm_nm, center_nm)
    beta = gvd_fs2_per_mm * length_mm
    a = residual_delay_fs * sigma
    b = 0.5 * beta * sigma**2
    norm = 1 / np.sqrt(2 * np.pi)

    def re(z):
        return norm * np.exp(-0.5 * z * z) * np.cos(a * z + b * z * z)

    def im(z):
        return norm * np.exp(-0.5 * z * z) * np.sin(a * z + b * z * z)

    edges = np.arange(-12.0, 12.0 + 0.25, 0.25)
    total_re = total_im = 0.0
    for z0, z1 in zip(edges[:-1], edges[1:]):
        total_re += quad(re, z0, z1, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        total_im += quad(im, z0, z1, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return float(min(1.0, np.hypot(total_re, total_im)))


def acceptance_bandwidth(min_visibility, center_nm, gvd_fs2_per_mm, length_mm, residual_delay_fs=0.0, max_nm=200.0):
    """Largest FWHM (nm) whose dispersion-limited visibility stays at ``min_visibility``."""

    def f(bw):
        return gvd_visibility(bw, center_nm, gvd_fs2_per_mm, length_mm, residual_delay_fs) - min_visibility

    if f(max_nm) >= 0:
        return max_nm
    return float(brentq(f, 1e-6, max_nm, xtol=1e-6))
