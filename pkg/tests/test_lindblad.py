import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiael.errors import DegenerateSteadyStateError, InvalidArgumentError
from adiael.lindblad import (
    BipartiteModel,
    LindbladSpec,
    adjoint_lindbladian,
    boson_ops,
    check_fock_truncation,
    jaynes_cummings_model,
    labframe_model,
    lindbladian,
    oscillator_spec,
    qubit_ops,
    steady_state,
    thermal_state,
)
from adiael.operators import expm, unvectorize, vectorize

from conftest import rand_complex, rand_density, rand_hermitian

SM, SP, SX, SZ = qubit_ops()
G = np.diag([1.0, 0.0])
E = np.diag([0.0, 1.0])


def apply(S, X):
    return unvectorize(S @ vectorize(X))


def random_spec(rng, d, n_channels=2):
    return LindbladSpec(
        rand_hermitian(rng, d),
        tuple((float(rng.uniform(0, 2)), rand_complex(rng, d, d)) for _ in range(n_channels)),
    )


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        LindbladSpec(np.array([[0, 1], [0, 0]]))
    with pytest.raises(InvalidArgumentError):
        LindbladSpec(np.zeros((2, 2)), ((-1.0, SM),))
    with pytest.raises(InvalidArgumentError):
        LindbladSpec(np.zeros((2, 2)), ((1.0, np.eye(3)),))


def test_model_validation():
    spec = oscillator_spec(0.0, 1.0, 0.0, 0.0, 3)
    b, bd, _ = boson_ops(3)
    with pytest.raises(InvalidArgumentError):
        BipartiteModel(np.zeros((2, 2)), spec, ((SM, b),), 0.1)  # not Hermitian
    with pytest.raises(InvalidArgumentError):
        BipartiteModel(np.zeros((2, 2)), spec, ((SX, np.eye(2)),), 0.1)
    with pytest.raises(InvalidArgumentError):
        BipartiteModel(np.zeros((2, 2)), spec, ((SX, b + bd),), -0.1)


def test_two_level_decay():
    L = lindbladian(LindbladSpec(np.zeros((2, 2)), ((0.7, SM),)))
    assert np.allclose(apply(L, E), 0.7 * (G - E))


def test_example1_vacuum_fixed_point():
    L = lindbladian(oscillator_spec(0.4, 1.0, 0.0, 0.0, 8))
    vac = np.zeros((8, 8))
    vac[0, 0] = 1
    assert np.allclose(apply(L, vac), 0)


def test_adjoint_unital_and_heisenberg_b():
    kappa, kphi, delta = 1.0, 0.3, 0.4
    spec = oscillator_spec(delta, kappa, kphi, 0.5, 10)
    Ls = adjoint_lindbladian(spec)
    assert np.allclose(apply(Ls, np.eye(10)), 0, atol=1e-13)
    b, _, _ = boson_ops(10)
    gamma = kappa + kphi + 2j * delta
    lhs = apply(Ls, b)
    # exact away from the truncation edge
    assert np.allclose(lhs[:-2, :-2], -gamma / 2 * b[:-2, :-2], atol=1e-12)


def test_steady_state_examples():
    assert np.allclose(steady_state(lindbladian(LindbladSpec(np.zeros((2, 2)), ((1.0, SM),)))), G)
    rho = steady_state(lindbladian(oscillator_spec(0.2, 1.0, 0.0, 1.0, 30)))
    expected = 0.5 ** (np.arange(30) + 1)
    assert np.allclose(np.diag(rho).real, expected / expected.sum(), atol=1e-9)
    rho0 = steady_state(lindbladian(oscillator_spec(0.2, 1.0, 0.0, 0.0, 6)))
    assert np.isclose(rho0[0, 0], 1) and np.isclose(np.trace(rho0), 1)


def test_steady_state_degenerate():
    with pytest.raises(DegenerateSteadyStateError) as err:
        steady_state(np.zeros((4, 4)))
    assert err.value.count == 4


def test_thermal_state():
    assert np.allclose(thermal_state(0.0, 4), np.diag([1, 0, 0, 0]))
    rho, tail = thermal_state(1.0, 40, return_tail=True)
    assert np.allclose(np.diag(rho).real, 0.5 ** (np.arange(40) + 1), atol=1e-12)
    assert np.isclose(tail, 0.5**40)
    for n_th, N in [(0.3, 3), (2.0, 7), (5.0, 50)]:
        assert np.trace(thermal_state(n_th, N)) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(InvalidArgumentError):
        thermal_state(-1.0, 3)


def test_operator_factories():
    b, bd, n = boson_ops(2)
    assert np.array_equal(b, [[0, 1], [0, 0]])
    b, bd, n = boson_ops(6)
    comm = b @ bd - bd @ b
    assert np.allclose(comm[:-1, :-1], np.eye(5))
    assert np.allclose(n, np.diag(np.arange(6)))
    assert np.allclose(SP @ SM, E)
    assert np.allclose(SZ, G - E)
    with pytest.raises(InvalidArgumentError):
        boson_ops(1)


def test_model_factories():
    m = jaynes_cummings_model(kappa=1.0, delta=0.3, n_th=0.2, g=0.05, N=6)
    assert (m.dim_A, m.dim_B) == (2, 6)
    assert np.allclose(m.H_I, m.H_I.conj().T)
    assert m.epsilon == pytest.approx(0.05 / 1.2)
    assert m.with_g(0.1).g == 0.1
    lab = labframe_model(omega_eg=2.0, N=5)
    assert np.allclose(lab.H_A, np.diag([-1.0, 1.0]))


def test_fock_truncation_check():
    m = jaynes_cummings_model(n_th=1.0, N=6)
    msg = check_fock_truncation(m, thermal_state(1.0, 6))
    assert msg and "Fock cutoff 6" in msg
    m = jaynes_cummings_model(n_th=0.0, N=6)
    assert check_fock_truncation(m, thermal_state(0.0, 6)) is None


def test_steady_state_is_fixed_point_of_propagator():
    spec = oscillator_spec(0.5, 1.0, 0.2, 0.4, 10)
    L = lindbladian(spec)
    rho = steady_state(L)
    for t in (0.1, 1.0, 10.0):
        assert np.allclose(apply(expm(L, t), rho), rho, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 4))
def test_generator_properties(seed, d):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, d)
    L, Ls = lindbladian(spec), adjoint_lindbladian(spec)
    rho = rand_density(rng, d)
    X = rand_complex(rng, d, d)
    scale = np.linalg.norm(L, 2)
    assert abs(np.trace(apply(L, rho))) < 1e-12 * scale
    assert abs(np.trace(apply(L, X))) < 1e-12 * scale * np.linalg.norm(X)
    assert np.allclose(apply(L, X.conj().T), apply(L, X).conj().T, atol=1e-12 * scale)
    lhs = np.trace(X @ apply(L, rho))
    rhs = np.trace(apply(Ls, X) @ rho)
    assert abs(lhs - rhs) < 1e-12 * scale * np.linalg.norm(X)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 4))
def test_steady_state_fixed_point_random(seed, d):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, d)
    L = lindbladian(spec)
    rho = steady_state(L)
    assert np.isclose(np.trace(rho), 1)
    assert np.linalg.eigvalsh(rho).min() > -1e-9
    kappa = max(spec.max_rate, 1e-3)
    for t in (0.1, 1.0, 10.0):
        assert np.allclose(apply(expm(L, t / kappa), rho), rho, atol=1e-9)
