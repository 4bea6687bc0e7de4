"""Element models for the router: two-crystal Pockels modulator, splitters and the MZI.

Units are SI throughout (meters, volts, radians). Jones matrices act on
(H, V) column vectors.

Interference imperfection is modeled by a scalar mode overlap ``gamma``
between the two arms. The field arriving from the reference arm is split
into a component in the modulator arm's spatial mode (weight ``gamma``) and
an orthogonal spatial component (weight ``sqrt(1 - gamma^2)``). Port fields
are therefore returned mode-resolved, as arrays of shape ``(2, 2)``: row 0 is
the shared spatial mode, row 1 the mismatched one, columns are (H, V).
A bucket detector sums the power of both rows.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import NoSwitchingError, ParameterError
from .polarization import jones_vector

#: Index pair seen by H and V light for each crystal orientation.
#: "z_on_v": crystal Z axis parallel to V (crystal 1); "z_on_h": rotated 90 deg (crystal 2).
ORIENTATIONS = ("z_on_v", "z_on_h")

#: Jones matrix of the odd number of reflections on the way to port 2.
PORT2_FLIP = np.diag([-1.0, 1.0]).astype(complex)

# Approximate RTP constants near 785 nm. The aperture is recalibrated from the
# half-wave voltage, so only the combination r33*nz^3 + r23*ny^3 matters there.
RTP_N_Y = 1.782
RTP_N_Z = 1.867
RTP_R23 = 15.4e-12
RTP_R33 = 38.5e-12


@dataclass(frozen=True)
class CrystalParams:
    length: float
    aperture: float
    n_y: float = RTP_N_Y
    n_z: float = RTP_N_Z
    r23: float = RTP_R23
    r33: float = RTP_R33
    orientation: str = "z_on_v"

    def __post_init__(self):
        if not self.length > 0:
            raise ParameterError(f"crystal length must be positive, got {self.length}")
        if not self.aperture > 0:
            raise ParameterError(f"crystal aperture must be positive, got {self.aperture}")
        for name in ("n_y", "n_z"):
            n = getattr(self, name)
            if not 1.0 < n < 4.0:
                raise ParameterError(f"{name} must lie in (1, 4), got {n}")
        for name in ("r23", "r33"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.orientation not in ORIENTATIONS:
            raise ParameterError(f"orientation must be one of {ORIENTATIONS}, got {self.orientation!r}")

    def index_pair(self, pol):
        """(refractive index, EO coefficient) seen by ``pol`` in this crystal."""
        pol = pol.upper()
        if pol not in ("H", "V"):
            raise ParameterError(f"polarization must be 'H' or 'V', got {pol!r}")
        z_axis_pol = "V" if self.orientation == "z_on_v" else "H"
        if pol == z_axis_pol:
            return self.n_z, self.r33
        return self.n_y, self.r23


def crystal_phase(pol, crystal, wavelength, voltage):
    """Phase picked up by ``pol`` (H or V) light in one crystal with ``voltage`` across its aperture.

    phi = (2 pi / lambda) * l * (n - r n^3 U / (2 d))
    """
    if not wavelength > 0:
        raise ParameterError(f"wavelength must be positive, got {wavelength}")
    n, r = crystal.index_pair(pol)
    field_ = np.asarray(voltage, dtype=float) / crystal.aperture
    return 2 * np.pi / wavelength * crystal.length * (n - 0.5 * r * n**3 * field_)


@dataclass(frozen=True)
class EomModel:
    crystal1: CrystalParams
    crystal2: CrystalParams
    wavelength: float = 785e-9
    amplitude_transmission: float = float(np.sqrt(0.98))

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ParameterError(f"wavelength must be positive, got {self.wavelength}")
        if not 0 < self.amplitude_transmission <= 1:
            raise ParameterError(
                f"amplitude transmission must lie in (0, 1], got {self.amplitude_transmission}"
            )

    def balanced_voltages(self, voltage):
        """Voltages (U1, U2) that cancel the field-induced birefringence.

        Equal lengths reduce this to equal fields, U1/d1 = U2/d2.
        """
        c1, c2 = self.crystal1, self.crystal2
        scale = (c1.length * c2.aperture) / (c2.length * c1.aperture)
        return voltage, voltage * scale


def eom_phases(eom, u1, u2):
    """Total (H, V) phases through both crystals."""
    lam = eom.wavelength
    phi_h = crystal_phase("H", eom.crystal1, lam, u1) + crystal_phase("H", eom.crystal2, lam, u2)
    phi_v = crystal_phase("V", eom.crystal1, lam, u1) + crystal_phase("V", eom.crystal2, lam, u2)
    return phi_h, phi_v


def eom_jones(eom, u1, u2):
    """Diagonal Jones matrix of the modulator for crystal voltages ``u1``, ``u2``."""
    phi_h, phi_v = eom_phases(eom, u1, u2)
    t = eom.amplitude_transmission
    return np.diag([t * np.exp(1j * phi_h), t * np.exp(1j * phi_v)])


def common_phase(eom, voltage):
    """Mean (H, V) phase with the balanced drive at ``voltage`` applied to crystal 1."""
    phi_h, phi_v = eom_phases(eom, *eom.balanced_voltages(voltage))
    return (phi_h + phi_v) / 2


def half_wave_voltage(eom):
    """Voltage on crystal 1 (balanced drive) that shifts the common phase by pi.

    Reduces to lambda d / [l (r33 nz^3 + r23 ny^3)] for identical crystals.
    """
    c1, c2 = eom.crystal1, eom.crystal2
    n1, r1 = c1.index_pair("V")
    n2, r2 = c2.index_pair("V")
    # per-volt phase slope on V; H is identical under the balanced drive
    u2_per_u1 = eom.balanced_voltages(1.0)[1]
    slope = (np.pi / eom.wavelength) * (
        c1.length * r1 * n1**3 / c1.aperture + c2.length * r2 * n2**3 * u2_per_u1 / c2.aperture
    )
    if slope <= 0:
        raise NoSwitchingError("electro-optic coefficients are zero; the phase does not depend on voltage")
    return float(np.pi / slope)


def rtp_eom(length=10e-3, aperture=4e-3, wavelength=785e-9, power_transmission=0.98, **material):
    """Two identical RTP crystals in the cross-axis arrangement."""
    c1 = CrystalParams(length=length, aperture=aperture, orientation="z_on_v", **material)
    c2 = CrystalParams(length=length, aperture=aperture, orientation="z_on_h", **material)
    return EomModel(c1, c2, wavelength=wavelength, amplitude_transmission=float(np.sqrt(power_transmission)))


def calibrate_aperture(eom, target_voltage):
    """Return ``eom`` with both apertures scaled so the half-wave voltage equals ``target_voltage``.

    The aperture ratio between the crystals is preserved.
    """
    if not target_voltage > 0:
        raise ParameterError(f"target half-wave voltage must be positive, got {target_voltage}")
    ratio = eom.crystal2.aperture / eom.crystal1.aperture

    def with_d(d):
        return replace(
            eom,
            crystal1=replace(eom.crystal1, aperture=d),
            crystal2=replace(eom.crystal2, aperture=d * ratio),
        )

    def mismatch(log_d):
        return np.log(half_wave_voltage(with_d(np.exp(log_d))) / target_voltage)

    log_d = brentq(mismatch, np.log(1e-9), np.log(10.0), xtol=1e-15, rtol=1e-14)
    return with_d(float(np.exp(log_d)))


@dataclass(frozen=True)
class BeamSplitterModel:
    """Power transmissivity ``T`` and reflectivity ``R`` (``R`` defaults to ``1 - T``).

    Reflection carries a factor ``i``.
    """

    T: float = 0.5
    R: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.T < 1:
            raise ParameterError(f"beam splitter T must lie in (0, 1), got {self.T}")
        if self.R is None:
            object.__setattr__(self, "R", 1.0 - self.T)
        if not 0 < self.R <= 1 - self.T + 1e-15:
            raise ParameterError(f"beam splitter R must lie in (0, 1 - T], got {self.R}")

    @property
    def t(self):
        return np.sqrt(self.T)

    @property
    def r(self):
        return 1j * np.sqrt(self.R)


@dataclass(frozen=True)
class RouterModel:
    """Mach-Zehnder router with the modulator in arm A and a free-space reference arm B.

    ``eom_arm_transmission`` and ``reference_arm_transmission`` are amplitude
    factors for losses other than modulator absorption (mirrors, coatings).
    ``residual_delay_fs`` is the uncompensated group delay between the arms,
    used only by the dispersion estimate.
    """

    eom: EomModel
    bs_in: BeamSplitterModel = field(default_factory=BeamSplitterModel)
    bs_out: BeamSplitterModel = field(default_factory=BeamSplitterModel)
    static_phase: float = 0.0
    mode_overlap: float = 1.0
    eom_arm_transmission: float = 1.0
    reference_arm_transmission: float = 1.0
    residual_delay_fs: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.mode_overlap <= 1.0:
            raise ParameterError(f"mode overlap must lie in [0, 1], got {self.mode_overlap}")
        for name in ("eom_arm_transmission", "reference_arm_transmission"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ParameterError(f"{name} must lie in (0, 1], got {v}")

    @property
    def half_wave_voltage(self):
        return half_wave_voltage(self.eom)

    def arm_amplitudes(self, voltage, extra_phase=0.0):
        """Jones matrices of arm A (modulator) and arm B (reference) from input to BS2."""
        u1, u2 = self.eom.balanced_voltages(voltage)
        arm_a = self.bs_in.t * self.eom_arm_transmission * eom_jones(self.eom, u1, u2)
        arm_b = (
            self.bs_in.r
            * self.reference_arm_transmission
            * np.exp(1j * (self.static_phase + extra_phase))
            * np.eye(2)
        )
        return arm_a, arm_b

    def absorbed_fraction(self):
        """Fraction of input power lost inside the arms (polarization independent)."""
        t_eom = self.eom.amplitude_transmission * self.eom_arm_transmission
        t_ref = self.reference_arm_transmission
        return self.bs_in.T * (1 - t_eom**2) + self.bs_in.R * (1 - t_ref**2)


def router_transfer(router, input_state, voltage, extra_phase=0.0):
    """Mode-resolved output fields (port1, port2), each of shape ``(2, 2)``.

    Port 1 collects arm A transmitted and arm B reflected at the output
    splitter; port 2 the opposite, followed by the H sign flip from its
    odd number of reflections. ``extra_phase`` adds to the static arm phase
    (used for drift).
    """
    v = jones_vector(input_state)
    if not np.any(v):
        raise ParameterError("input Jones vector has zero norm")
    gamma = router.mode_overlap
    arm_a, arm_b = router.arm_amplitudes(voltage, extra_phase)
    a = arm_a @ v
    b = arm_b @ v
    bs = router.bs_out
    overlap = np.sqrt(max(0.0, 1.0 - gamma**2))

    a1, b1 = bs.t * a, bs.r * b
    a2, b2 = bs.r * a, bs.t * b
    port1 = np.array([a1 + gamma * b1, overlap * b1])
    port2 = np.array([a2 + gamma * b2, overlap * b2]) @ PORT2_FLIP.T
    return port1, port2


def port_powers(router, input_state, voltage, extra_phase=0.0):
    """(P1/P_in, P2/P_in) for one voltage, or arrays for an array of voltages."""
    v = jones_vector(input_state)
    p_in = float(np.vdot(v, v).real)
    volts = np.asarray(voltage, dtype=float)
    phases = np.broadcast_to(np.asarray(extra_phase, dtype=float), volts.shape)
    p1 = np.empty(volts.shape)
    p2 = np.empty(volts.shape)
    for idx in np.ndindex(volts.shape):
        f1, f2 = router_transfer(router, v, float(volts[idx]), float(phases[idx]))
        p1[idx] = np.sum(np.abs(f1) ** 2) / p_in
        p2[idx] = np.sum(np.abs(f2) ** 2) / p_in
    if volts.ndim == 0:
        return float(p1), float(p2)
    return p1, p2


def port1_path_powers(router):
    """Powers reaching port 1 via arm A and arm B (H input, U irrelevant)."""
    arm_a, arm_b = router.arm_amplitudes(0.0)
    pa = router.bs_out.T * abs(arm_a[0, 0]) ** 2
    pb = router.bs_out.R * abs(arm_b[0, 0]) ** 2
    return pa, pb


def mode_overlap_for_visibility(router, visibility):
    """Mode overlap that gives port 1 a fringe visibility of ``visibility``."""
    pa, pb = port1_path_powers(router)
    gamma = visibility * (pa + pb) / (2 * np.sqrt(pa * pb))
    if 1 < gamma <= 1 + 1e-12:
        gamma = 1.0
    if not 0 <= gamma <= 1:
        raise ParameterError(
            f"visibility {visibility} is unreachable with these splitters and losses (needs overlap {gamma:.4f})"
        )
    return float(gamma)


def calibrate_static_phase(router):
    """Static phase that puts the port-2 maximum at zero volts."""
    arm_a, _ = router.arm_amplitudes(0.0)
    # port-2 amplitude ~ r_out * A + t_out * r_in * e^{i phi0}; align the two terms
    return float(np.angle(arm_a[0, 0] * router.bs_out.r / (router.bs_in.r * router.bs_out.t)))


def build_router(
    wavelength=785e-9,
    crystal_length=10e-3,
    half_wave_voltage_target=1000.0,
    eom_power_transmission=0.98,
    bs_in_T=0.49,
    bs_out_T=0.49,
    visibility=0.98,
    eom_arm_power_transmission=0.99,
    reference_arm_power_transmission=0.99,
    static_phase=None,
    aperture=None,
    residual_delay_fs=0.0,
    **material,
):
    """Assemble a calibrated router.

    The aperture is solved from ``half_wave_voltage_target`` unless given,
    the mode overlap from ``visibility`` and the static phase so that U = 0
    selects port 2 unless given.
    """
    eom = rtp_eom(
        length=crystal_length,
        aperture=4e-3 if aperture is None else aperture,
        wavelength=wavelength,
        power_transmission=eom_power_transmission,
        **material,
    )
    if aperture is None:
        eom = calibrate_aperture(eom, half_wave_voltage_target)
    router = RouterModel(
        eom=eom,
        bs_in=BeamSplitterModel(bs_in_T),
        bs_out=BeamSplitterModel(bs_out_T),
        eom_arm_transmission=float(np.sqrt(eom_arm_power_transmission)),
        reference_arm_transmission=float(np.sqrt(reference_arm_power_transmission)),
        residual_delay_fs=residual_delay_fs,
    )
    router = replace(router, mode_overlap=mode_overlap_for_visibility(router, visibility))
    phase = calibrate_static_phase(router) if static_phase is None else static_phase
    return replace(router, static_phase=phase)


def ideal_router(half_wave_voltage_target=1000.0):
    """Lossless, balanced, perfectly overlapping router (useful as a reference)."""
    return build_router(
        half_wave_voltage_target=half_wave_voltage_target,
        eom_power_transmission=1.0,
        bs_in_T=0.5,
        bs_out_T=0.5,
        visibility=1.0,
        eom_arm_power_transmission=1.0,
        reference_arm_power_transmission=1.0,
    )
