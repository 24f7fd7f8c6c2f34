import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdsim.errors import RejectedInput, UndefinedVisibility
from qkdsim.jones import (PhaseSettings, detection_probabilities, element_matrix, intensity,
                          jones_vector, rotation_matrix, smzi_outputs, smzi_path_transforms,
                          visibility)

angles = st.floats(0, 2 * np.pi, allow_nan=False)
R_CLOSED = np.array([[0, -1], [1, 0]], dtype=complex)


def test_rotation_matrix_examples():
    R = rotation_matrix()
    assert np.array_equal(R @ [1, 0], [0, 1])
    assert np.array_equal(R @ [0, 1], [-1, 0])
    assert np.array_equal(R @ R @ [1, 0], [-1, 0])
    assert np.abs(R.T @ R - np.eye(2)).max() < 1e-15


def test_element_matrices():
    assert np.allclose(element_matrix("BS", 1, 1, 2), np.eye(2) / np.sqrt(2), atol=0, rtol=1e-15)
    assert np.allclose(element_matrix("BS", 2, 3, 1), 1j * np.eye(2) / np.sqrt(2))
    assert np.array_equal(element_matrix("PBS", 1, 1, 3), np.diag([0, 1]))
    assert np.array_equal(element_matrix("PBS", 1, 1, 2) @ [0, 1], [0, 0])
    # symmetric under port exchange
    for kind in ("BS", "PBS"):
        for j, k in [(1, 2), (1, 3)]:
            assert np.array_equal(element_matrix(kind, 1, j, k), element_matrix(kind, 1, k, j))


@pytest.mark.parametrize("ports", [(2, 3), (1, 1), (3, 2), (0, 2)])
def test_element_matrix_rejects_bad_ports(ports):
    with pytest.raises(RejectedInput):
        element_matrix("BS", 1, *ports)


def test_path_transforms_special_phases():
    t_long, t_short = smzi_path_transforms(0.0)
    assert np.abs(t_long + t_short).max() < 1e-15
    t_long, t_short = smzi_path_transforms(np.pi)
    assert np.abs(t_long - t_short).max() < 1e-15


def test_path_transforms_match_closed_form():
    # T_L = -(e^{i phi}/2) R, T_S = R/2 for output 1; both pick up i/2 on output 2
    phi = 0.7
    t_long, t_short = smzi_path_transforms(phi)
    assert np.abs(t_long - (-np.exp(1j * phi) / 2) * R_CLOSED).max() < 1e-12
    assert np.abs(t_short - R_CLOSED / 2).max() < 1e-12
    phis = np.random.default_rng(3).uniform(0, 2 * np.pi, 100)
    t_long, t_short = smzi_path_transforms(phis)
    assert np.abs(t_long + np.exp(1j * phis)[:, None, None] / 2 * R_CLOSED).max() < 1e-12
    assert np.abs(t_short - R_CLOSED / 2).max() < 1e-12
    t_long, t_short = smzi_path_transforms(phis, output=2)
    assert np.abs(t_long - 1j * np.exp(1j * phis)[:, None, None] / 2 * R_CLOSED).max() < 1e-12
    assert np.abs(t_short - 1j * R_CLOSED / 2).max() < 1e-12


def test_outputs_null_and_full_fringe():
    e = jones_vector(0.0, 0.0)
    o1, _ = smzi_outputs(e, PhaseSettings(phi_a=0.3, phi_b=0.3))
    assert np.abs(o1).max() < 1e-15
    o1, o2 = smzi_outputs(e, PhaseSettings(phi_a=0.0, phi_b=np.pi))
    assert intensity(o1) == pytest.approx(1.0, abs=1e-12)
    assert intensity(o2) == pytest.approx(0.0, abs=1e-12)


def test_outputs_closed_form_and_polarization_independence():
    theta, beta, pa, pb = np.deg2rad(37), 1.2, 0.4, 1.1
    ph = PhaseSettings(phi_a=pa, phi_b=pb)
    o1, o2 = smzi_outputs(jones_vector(theta, beta), ph)
    vec = np.array([-np.exp(1j * beta) * np.sin(theta), np.cos(theta)])
    assert np.abs(o1 - 0.5 * (np.exp(1j * pa) - np.exp(1j * pb)) * vec).max() < 1e-12
    assert np.abs(o2 - 0.5j * (np.exp(1j * pa) + np.exp(1j * pb)) * vec).max() < 1e-12
    r1, r2 = smzi_outputs(jones_vector(0, 0), ph)
    assert abs(intensity(o1) - intensity(r1)) < 1e-12
    assert abs(intensity(o2) - intensity(r2)) < 1e-12


def test_outputs_reject_non_unit_input():
    with pytest.raises(RejectedInput):
        smzi_outputs(np.array([1.0, 1.0]), PhaseSettings())


@pytest.mark.parametrize("delta, expected", [(0.0, (0.0, 1.0)), (np.pi / 2, (0.5, 0.5)),
                                             (np.pi, (1.0, 0.0))])
def test_detection_probabilities(delta, expected):
    i1, i2 = detection_probabilities(PhaseSettings(phi_a=delta, phi_b=0.0))
    assert (i1, i2) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=200)
@given(theta=st.floats(0, np.pi), beta=angles, pa=angles, pb=angles)
def test_polarization_insensitivity_and_energy(theta, beta, pa, pb):
    ph = PhaseSettings(phi_a=pa, phi_b=pb)
    o1, o2 = smzi_outputs(jones_vector(theta, beta), ph)
    r1, r2 = smzi_outputs(jones_vector(0.0, 0.0), ph)
    assert abs(intensity(o1) - intensity(r1)) < 1e-12
    assert abs(intensity(o2) - intensity(r2)) < 1e-12
    assert abs(intensity(o1) + intensity(o2) - 1) < 1e-12


def test_closed_form_equals_squared_norms():
    rng = np.random.default_rng(11)
    pa, pb = rng.uniform(0, 2 * np.pi, (2, 1000))
    ph = PhaseSettings(phi_a=pa, phi_b=pb)
    e = jones_vector(rng.uniform(0, np.pi, 1000), rng.uniform(0, 2 * np.pi, 1000))
    o1, o2 = smzi_outputs(e, ph)
    i1, i2 = detection_probabilities(ph)
    assert np.abs(intensity(o1) - i1).max() < 1e-12
    assert np.abs(intensity(o2) - i2).max() < 1e-12


def test_voltage_drive():
    ph = PhaseSettings.from_voltage(0.0, [0.0, 2.5, 5.0, -2.5], v_pi=2.5)
    assert np.allclose(ph.phi_b, [0, np.pi, 0, np.pi], atol=1e-12)


def test_visibility_examples():
    assert visibility([10000, 40, 5021, 9987]) == pytest.approx(0.992032, abs=5e-7)
    assert visibility([7, 7, 7]) == 0.0
    assert visibility([0, 12, 3]) == 1.0
    with pytest.raises(UndefinedVisibility):
        visibility([0, 0, 0])
    with pytest.raises(RejectedInput):
        visibility([5])


def test_ideal_sweep_visibility_is_one():
    volts = np.round(np.arange(-5, 5.025, 0.05), 10)
    ph = PhaseSettings.from_voltage(0.0, volts)
    o1, _ = smzi_outputs(jones_vector(0.4, 0.9), ph)
    assert visibility(intensity(o1)) == pytest.approx(1.0, abs=1e-12)
