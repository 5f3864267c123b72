import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rand_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rand_hermitian(rng, d):
    X = rand_complex(rng, d, d)
    return 0.5 * (X + X.conj().T)


def rand_density(rng, d):
    G = rand_complex(rng, d, d)
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def random_model(rng, d_A=None, N=6, g=0.05):
    """Random Hermitian A-side operators coupled to quadratures and number of a damped oscillator."""
    from adiael.lindblad import BipartiteModel, boson_ops, oscillator_spec

    d_A = int(rng.integers(2, 4)) if d_A is None else d_A
    b, bd, n = boson_ops(N)
    spec = oscillator_spec(
        float(rng.uniform(-2, 2)), 1.0, float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.3)), N
    )
    couplings = [(rand_hermitian(rng, d_A), b + bd)]
    if rng.random() < 0.5:
        couplings.append((rand_hermitian(rng, d_A), 1j * (bd - b)))
    return BipartiteModel(rand_hermitian(rng, d_A), spec, tuple(couplings), g, fock_cutoff=N)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
