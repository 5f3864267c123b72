import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiael.elimination import ls2
from adiael.errors import InvalidArgumentError
from adiael.lindblad import labframe_model, qubit_ops
from adiael.operators import commutator_superop, dissipator_superop
from adiael.oracles import (
    JCParams,
    LabFrameParams,
    bloch_form,
    bloch_from_generator,
    fit_labframe_coefficients,
    jc_reduced,
    labframe_rates,
    labframe_reduced,
    rotating_frame_average,
)

from conftest import rel

SM, SP, SX, SZ = qubit_ops()

lab_params = st.builds(
    LabFrameParams,
    kappa=st.floats(0.1, 5.0),
    kappa_phi=st.floats(0.0, 2.0),
    omega_B=st.floats(-20.0, 20.0),
    omega_eg=st.floats(-20.0, 20.0),
    n_th=st.floats(0.0, 3.0),
    g=st.floats(0.0, 0.3),
)


def frame(p):
    return -1j * commutator_superop(-0.5 * p.omega_eg * SZ)


def test_params_validation():
    with pytest.raises(InvalidArgumentError):
        JCParams(kappa=0.0)
    with pytest.raises(InvalidArgumentError):
        LabFrameParams(kappa=1.0, n_th=-0.1)


def test_jc_resonant_single_channel():
    G = jc_reduced(JCParams(1.0, 0.0, 0.0, 0.0, 0.1))
    assert np.allclose(G, 0.04 * dissipator_superop(SM))


def test_jc_detuned():
    G = jc_reduced(JCParams(1.0, 0.0, 0.5, 0.0, 0.1))
    expected = -1j * 0.01 * commutator_superop(SZ / 2) + 0.02 * dissipator_superop(SM)
    assert np.allclose(G, expected)


def test_jc_no_excitation_at_zero_temperature():
    G = jc_reduced(JCParams(1.0, 0.3, 0.2, 0.0, 0.1))
    ground = np.diag([1.0, 0.0]).reshape(-1, order="F")
    assert np.allclose(G @ ground, 0)
    Gt = jc_reduced(JCParams(1.0, 0.3, 0.2, 0.4, 0.1))
    assert not np.allclose(Gt @ ground, 0)


def test_jc_generalized_lowering_operator():
    p = JCParams(1.0, 0.2, 0.7, 0.6, 0.1)
    assert np.allclose(jc_reduced(p, A_lower=SM), jc_reduced(p))
    A = np.diag(np.sqrt([1.0, 2.0]), 1)
    G = jc_reduced(p, A_lower=A)
    assert G.shape == (9, 9)
    assert np.allclose(np.eye(3).reshape(-1) @ G, 0)  # trace preserving


def test_labframe_rates_definition():
    p = LabFrameParams(1.0, 0.5, 3.0, 2.0, 0.4, 0.1)
    gp, gm = 1.5 + 10j, 1.5 + 2j
    r_p, r_m, e_p, e_m = labframe_rates(p)
    assert np.isclose(r_p, 2 * 1.4 / gp) and np.isclose(r_m, 2 * 1.4 / gm)
    assert np.isclose(e_p, 0.8 / np.conj(gm)) and np.isclose(e_m, 0.8 / np.conj(gp))


def test_labframe_resonance_free_qubit():
    G, X, Y = labframe_reduced(LabFrameParams(1.0, 0.2, 4.0, 0.0, 0.7, 0.1))
    assert Y == 0.0
    assert np.allclose(X, X[0, 0] * np.ones((2, 2)))
    assert np.linalg.matrix_rank(X, tol=1e-12 * abs(X[0, 0])) == 1


def test_labframe_determinant_negative():
    # X = s 1^T + 1 s^H with s = r + e, so det X = -|s_+ - s_-|^2 <= 0
    for w_eg in (0.5, 3.0, -2.0):
        for n in (0.0, 0.5, 2.0):
            p = LabFrameParams(1.0, 0.3, 2.0, w_eg, n, 0.1)
            r_p, r_m, e_p, e_m = labframe_rates(p)
            det = np.linalg.det(labframe_reduced(p)[1])
            assert abs(det.imag) < 1e-12
            assert det.real < 0
            assert np.isclose(det.real, -abs((r_p + e_p) - (r_m + e_m)) ** 2, rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(p=lab_params)
def test_labframe_structure(p):
    G, X, Y = labframe_reduced(p)
    assert np.allclose(X, X.conj().T, atol=1e-14 * np.abs(X).max())
    assert np.trace(X).real > 0
    assert np.allclose(np.eye(2).reshape(-1) @ G, 0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(p=lab_params)
def test_bloch_form_is_pauli_image(p):
    G, _, _ = labframe_reduced(p)
    drift, affine, z_bar, r_z = bloch_form(p)
    d, a = bloch_from_generator(G)
    scale = max(1.0, np.abs(drift).max())
    assert np.abs(d - drift).max() <= 1e-12 * scale
    assert np.abs(a - affine).max() <= 1e-12 * scale
    assert np.isclose(r_z, 4 * (p.kappa + p.kappa_phi) * sum(1 / abs(x) ** 2 for x in p.gammas))


def test_bloch_form_examples():
    drift, affine, z_bar, _ = bloch_form(LabFrameParams(1.0, 0.1, 3.0, 0.0, 0.4, 0.2))
    assert np.array_equal(drift[0], np.zeros(3)) and affine[0] == 0
    assert z_bar == 0.0
    for n in (0.0, 1.0):
        drift, affine, z_bar, _ = bloch_form(LabFrameParams(1.0, 0.1, 3.0, 2.0, n, 0.2))
        ev = np.linalg.eigvals(drift)
        assert ev.real.max() <= 1e-15
        assert np.all(np.linalg.eigvals(drift[1:, 1:]).real < 0)
        assert 0 < z_bar < 1


def test_bloch_fixed_point_formula():
    p = LabFrameParams(1.0, 0.2, 3.0, 2.0, 0.5, 0.1)
    gp, gm = (abs(x) ** 2 for x in p.gammas)
    _, _, z_bar, _ = bloch_form(p)
    assert np.isclose(z_bar, (gp - gm) / ((gp + gm) * 2.0))


def test_fit_recovers_coefficients():
    p = LabFrameParams(1.0, 0.3, 5.0, 2.0, 0.5, 0.07)
    G, X, Y = labframe_reduced(p)
    Xf, Yf, resid = fit_labframe_coefficients(G - frame(p), p.g)
    assert resid < 1e-12
    assert np.allclose(Xf, X) and np.isclose(Yf, Y)


def test_labframe_matches_engine_zero_temperature():
    p = LabFrameParams(1.0, 0.2, 3.0, 1.5, 0.0, 0.05)
    m = labframe_model(1.0, 0.2, 3.0, 1.5, 0.0, 0.05, N=8)
    G, X, Y = labframe_reduced(p)
    assert rel(ls2(m), G - frame(p)) < 1e-10
    Xf, Yf, resid = fit_labframe_coefficients(ls2(m), p.g)
    assert resid < 1e-10 and np.allclose(Xf, X, rtol=1e-9) and np.isclose(Yf, Y, rtol=1e-9)


def test_rotating_frame_average():
    H = -0.5 * 3.0 * SZ
    secular = -1j * commutator_superop(SZ) + dissipator_superop(SM)
    assert np.allclose(rotating_frame_average(secular, H), secular)
    assert np.allclose(rotating_frame_average(np.kron(SP.T, SP), H), 0)  # X -> s+ X s+


def test_rwa_limit_trend():
    jc = jc_reduced(JCParams(1.0, 0.0, 0.0, 0.0, 0.05))
    errs = []
    for w in (20.0, 50.0, 100.0):
        p = LabFrameParams(1.0, 0.0, w, w, 0.0, 0.05)
        G, _, _ = labframe_reduced(p)
        avg = rotating_frame_average(G - frame(p), -0.5 * w * SZ)
        errs.append(rel(avg, jc))
    slope = np.polyfit(np.log([20, 50, 100]), np.log(errs), 1)[0]
    assert abs(slope + 1) < 0.1
