from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmrouter.errors import NoSwitchingError, ParameterError
from pmrouter.optics import (
    RTP_N_Y,
    RTP_N_Z,
    RTP_R23,
    RTP_R33,
    BeamSplitterModel,
    CrystalParams,
    EomModel,
    build_router,
    common_phase,
    crystal_phase,
    eom_jones,
    eom_phases,
    half_wave_voltage,
    ideal_router,
    port_powers,
    router_transfer,
    rtp_eom,
)
from pmrouter.polarization import JONES, STATE_LABELS


def test_crystal_phase_formula():
    c = CrystalParams(10e-3, 4e-3, orientation="z_on_v")
    lam, u = 785e-9, 700.0
    expect_v = 2 * np.pi / lam * 10e-3 * (RTP_N_Z - 0.5 * RTP_R33 * RTP_N_Z**3 * u / 4e-3)
    expect_h = 2 * np.pi / lam * 10e-3 * (RTP_N_Y - 0.5 * RTP_R23 * RTP_N_Y**3 * u / 4e-3)
    assert crystal_phase("V", c, lam, u) == pytest.approx(expect_v, rel=1e-15)
    assert crystal_phase("H", c, lam, u) == pytest.approx(expect_h, rel=1e-15)
    # the second crystal sees the axes swapped
    c2 = replace(c, orientation="z_on_h")
    assert crystal_phase("H", c2, lam, u) == pytest.approx(expect_v, rel=1e-15)


def test_half_wave_voltage_closed_form():
    eom = rtp_eom(aperture=3e-3)
    expect = 785e-9 * 3e-3 / (10e-3 * (RTP_R33 * RTP_N_Z**3 + RTP_R23 * RTP_N_Y**3))
    assert half_wave_voltage(eom) == pytest.approx(expect, rel=1e-12)
    # U_pi shifts the common phase by pi; absolute phases are ~1e5 rad, hence the tolerance
    shift = common_phase(eom, expect) - common_phase(eom, 0.0)
    assert abs(shift) == pytest.approx(np.pi, rel=1e-10)


def test_calibrated_aperture():
    r = build_router()
    assert r.half_wave_voltage == pytest.approx(1000.0, rel=1e-12)
    d = r.eom.crystal1.aperture
    assert 4.0e-3 < d < 4.6e-3
    assert r.eom.crystal2.aperture == d


def test_no_electro_optic_response():
    eom = rtp_eom(r23=0.0, r33=0.0)
    with pytest.raises(NoSwitchingError):
        half_wave_voltage(eom)
    with pytest.raises(ParameterError):
        build_router(r23=0.0, r33=0.0)


def test_parameter_validation():
    with pytest.raises(ParameterError):
        CrystalParams(-1e-3, 4e-3)
    with pytest.raises(ParameterError):
        CrystalParams(1e-3, 4e-3, n_y=0.5)
    with pytest.raises(ParameterError):
        CrystalParams(1e-3, 4e-3, orientation="z_on_x")
    with pytest.raises(ParameterError):
        BeamSplitterModel(1.2)
    with pytest.raises(ParameterError):
        BeamSplitterModel(0.5, R=0.6)
    with pytest.raises(ParameterError):
        build_router(visibility=0.98, bs_in_T=0.05)


def test_unbalanced_drive_is_birefringent():
    eom = rtp_eom()
    phi_h, phi_v = eom_phases(eom, 1000.0, 0.0)
    assert abs(phi_h - phi_v) > 1.0
    # unequal lengths leave static birefringence at zero volts
    eom2 = EomModel(CrystalParams(10e-3, 4e-3, orientation="z_on_v"), CrystalParams(11e-3, 4e-3, orientation="z_on_h"))
    phi_h, phi_v = eom_phases(eom2, 0.0, 0.0)
    assert abs(phi_h - phi_v) > 1.0


@given(st.floats(-3000, 3000), st.floats(1e-3, 8e-3), st.floats(1e-3, 8e-3))
def test_equal_field_drive_is_polarization_independent(u, d1, d2):
    eom = EomModel(CrystalParams(10e-3, d1, orientation="z_on_v"), CrystalParams(10e-3, d2, orientation="z_on_h"))
    j = eom_jones(eom, *eom.balanced_voltages(u))
    assert abs(j[0, 0] - j[1, 1]) < 1e-12
    assert j[0, 1] == 0 and j[1, 0] == 0


def test_lossless_beam_splitter_is_unitary():
    bs = BeamSplitterModel(0.49)
    m = np.array([[bs.t, bs.r], [bs.r, bs.t]])
    assert np.allclose(m.conj().T @ m, np.eye(2), atol=1e-15)


def test_ideal_router_switches_completely():
    r = ideal_router()
    p1, p2 = port_powers(r, "H", r.half_wave_voltage)
    assert p1 == pytest.approx(1.0, abs=1e-12)
    assert p2 == pytest.approx(0.0, abs=1e-12)
    p1, p2 = port_powers(r, "H", 0.0)
    assert p2 == pytest.approx(1.0, abs=1e-12)


def _random_input(seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-2000, 2000))
def test_energy_balance(router, seed, u):
    v = _random_input(seed)
    p1, p2 = port_powers(router, v, u)
    assert p1 + p2 + router.absorbed_fraction() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(-2000, 2000))
def test_powers_do_not_depend_on_polarization(router, seed, u):
    ref = port_powers(router, "H", u)
    got = port_powers(router, _random_input(seed), u)
    assert np.allclose(got, ref, atol=1e-13)


def test_fringe_visibility_and_setpoints(router):
    volts = np.linspace(0, 2000, 2001)
    p1, p2 = port_powers(router, "H", volts)
    vis = (p1.max() - p1.min()) / (p1.max() + p1.min())
    assert vis == pytest.approx(0.98, abs=1e-9)
    assert np.argmax(p2) == 0
    assert volts[np.argmax(p1)] == pytest.approx(1000.0, abs=1.0)


def test_default_router_numbers(router):
    p1, p2 = port_powers(router, "H", 1000.0)
    assert p1 == pytest.approx(0.97108, abs=5e-5)
    assert p2 == pytest.approx(0.009219, abs=5e-6)
    assert 1 - p1 - p2 == pytest.approx(0.0197, abs=1e-4)


def test_port2_inverts_horizontal_axis(router):
    for a, b in (("D", "A"), ("R", "L")):
        _, port2 = router_transfer(router, JONES[a], 0.0)
        shared = port2[0]
        # the selected output is the partner state, not the input
        assert abs(np.vdot(JONES[b], shared)) ** 2 == pytest.approx(np.vdot(shared, shared).real, rel=1e-12)
    port1, _ = router_transfer(router, JONES["D"], router.half_wave_voltage)
    assert abs(np.vdot(JONES["D"], port1[0])) ** 2 == pytest.approx(np.vdot(port1[0], port1[0]).real, rel=1e-12)


def test_array_and_scalar_powers_agree(router):
    volts = np.array([0.0, 250.0, 1000.0])
    p1, p2 = port_powers(router, "V", volts)
    for i, u in enumerate(volts):
        assert (p1[i], p2[i]) == port_powers(router, "V", u)


def test_zero_input_rejected(router):
    with pytest.raises(ParameterError):
        router_transfer(router, [0, 0], 0.0)


def test_all_labels_accepted(router):
    for s in STATE_LABELS:
        assert sum(port_powers(router, s, 500.0)) < 1
