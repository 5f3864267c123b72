"""Lindblad generators, steady states and the standard operator factories.

Sign convention for the qubit: basis order is ``(|g>, |e>)`` and
``sigma_z = |g><g| - |e><e| = diag(1, -1)``, i.e. positive on the ground
state, so ``H = -omega_eg * sigma_z / 2`` puts the excited state above the
ground state.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSteadyStateError, InvalidArgumentError
from .operators import (
    commutator_superop,
    dissipator_superop,
    spost,
    spre,
    unvectorize,
)

__all__ = [
    "LindbladSpec",
    "BipartiteModel",
    "lindbladian",
    "adjoint_lindbladian",
    "steady_state",
    "thermal_state",
    "boson_ops",
    "qubit_ops",
    "oscillator_spec",
    "jaynes_cummings_model",
    "labframe_model",
    "fock_tail_mass",
]

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
FOCK_TAIL_MAX = 1e-8


def _is_hermitian(H, tol=HERMITIAN_TOL):
    scale = max(1.0, np.abs(H).max()) if H.size else 1.0
    return np.abs(H - H.conj().T).max(initial=0.0) <= tol * scale


@dataclass(frozen=True)
class LindbladSpec:
    """Hamiltonian plus weighted jump operators.

    ``channels`` is a sequence of ``(rate, jump)`` pairs; the generator is
    ``-i[H, .] + sum rate * D[jump]``.
    """

    H: np.ndarray
    channels: tuple = ()

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise InvalidArgumentError(f"H must be square, got shape {H.shape}")
        if not _is_hermitian(H):
            raise InvalidArgumentError("H is not Hermitian")
        channels = []
        for rate, jump in self.channels:
            rate = float(rate)
            jump = np.asarray(jump, dtype=complex)
            if not rate >= 0:
                raise InvalidArgumentError(f"channel rate must be nonnegative, got {rate}")
            if jump.shape != H.shape:
                raise InvalidArgumentError(
                    f"jump operator shape {jump.shape} does not match H {H.shape}"
                )
            channels.append((rate, jump))
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "channels", tuple(channels))

    @property
    def dim(self):
        return self.H.shape[0]

    @property
    def max_rate(self):
        return max((r for r, _ in self.channels), default=0.0)


@dataclass(frozen=True)
class BipartiteModel:
    """Fast dissipative subsystem B coupled to subsystem A.

    The full generator is ``-i[H_A ⊗ I, .] + id ⊗ L_B - i g [H_I, .]`` with
    ``H_I = sum_k A_k ⊗ B_k``.  ``fock_cutoff`` is set when B is a truncated
    oscillator, which enables the truncation adequacy check.
    """

    H_A: np.ndarray
    spec_B: LindbladSpec
    couplings: tuple
    g: float
    fock_cutoff: int | None = None
    name: str = ""
    warnings: list = field(default_factory=list, compare=False)

    def __post_init__(self):
        H_A = np.asarray(self.H_A, dtype=complex)
        if H_A.ndim != 2 or H_A.shape[0] != H_A.shape[1]:
            raise InvalidArgumentError(f"H_A must be square, got shape {H_A.shape}")
        if not _is_hermitian(H_A):
            raise InvalidArgumentError("H_A is not Hermitian")
        if not float(self.g) >= 0:
            raise InvalidArgumentError(f"g must be nonnegative, got {self.g}")
        dA, dB = H_A.shape[0], self.spec_B.dim
        couplings = []
        for A_k, B_k in self.couplings:
            A_k = np.asarray(A_k, dtype=complex)
            B_k = np.asarray(B_k, dtype=complex)
            if A_k.shape != (dA, dA) or B_k.shape != (dB, dB):
                raise InvalidArgumentError(
                    f"coupling shapes {A_k.shape} x {B_k.shape} do not match dims {dA} x {dB}"
                )
            couplings.append((A_k, B_k))
        object.__setattr__(self, "H_A", H_A)
        object.__setattr__(self, "g", float(self.g))
        object.__setattr__(self, "couplings", tuple(couplings))
        if couplings and not _is_hermitian(self.H_I):
            raise InvalidArgumentError("interaction Hamiltonian sum_k A_k ⊗ B_k is not Hermitian")

    @property
    def dim_A(self):
        return self.H_A.shape[0]

    @property
    def dim_B(self):
        return self.spec_B.dim

    @property
    def H_I(self):
        H = np.zeros((self.dim_A * self.dim_B,) * 2, dtype=complex)
        for A_k, B_k in self.couplings:
            H += np.kron(A_k, B_k)
        return H

    @property
    def epsilon(self):
        """Diagnostic ``g / kappa_ref`` with ``kappa_ref`` the largest B rate."""
        k = self.spec_B.max_rate
        return self.g / k if k > 0 else np.inf

    def with_g(self, g):
        return BipartiteModel(
            self.H_A, self.spec_B, self.couplings, g, self.fock_cutoff, self.name
        )

    def joint_spec(self, g=None):
        """Lindblad spec of the full model on ``A ⊗ B`` (coupling ``g`` overridable)."""
        g = self.g if g is None else g
        IA, IB = np.eye(self.dim_A), np.eye(self.dim_B)
        H = np.kron(self.H_A, IB) + np.kron(IA, self.spec_B.H)
        if g:
            H = H + g * self.H_I
        channels = tuple((r, np.kron(IA, L)) for r, L in self.spec_B.channels)
        return LindbladSpec(H, channels)

    def full_generator(self):
        return lindbladian(self.joint_spec())


def lindbladian(spec):
    """Superoperator of ``rho -> -i[H, rho] + sum rate (L rho L† - {L†L, rho}/2)``."""
    S = -1j * commutator_superop(spec.H)
    for rate, L in spec.channels:
        if rate:
            S += rate * dissipator_superop(L)
    return S


def adjoint_lindbladian(spec):
    """Heisenberg-picture generator ``X -> i[H, X] + sum rate (L† X L - {L†L, X}/2)``.

    Satisfies ``Tr(X L(rho)) == Tr(L*(X) rho)``.
    """
    S = 1j * commutator_superop(spec.H)
    for rate, L in spec.channels:
        if rate:
            LdL = L.conj().T @ L
            S += rate * (np.kron(L.T, L.conj().T) - 0.5 * spre(LdL) - 0.5 * spost(LdL))
    return S


def steady_state(L, null_tol=1e-10):
    """Unique trace-one fixed point of a Lindbladian superoperator.

    Raises
    ------
    DegenerateSteadyStateError
        If the number of singular values below ``null_tol * sigma_max`` is
        not exactly one.
    """
    L = np.asarray(L, dtype=complex)
    _, s, Vh = np.linalg.svd(L)
    null = int(np.sum(s <= null_tol * s[0])) if s[0] > 0 else len(s)
    if null != 1:
        raise DegenerateSteadyStateError(null)
    rho = unvectorize(Vh[-1].conj())
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if tr == 0:
        raise DegenerateSteadyStateError(0)
    return rho / tr


def thermal_state(n_th, N, return_tail=False):
    """Truncated thermal state ``sum_n n_th^n / (n_th+1)^(n+1) |n><n|``, renormalized.

    With ``return_tail`` also returns the probability mass beyond level ``N-1``
    that the truncation discards.
    """
    if n_th < 0:
        raise InvalidArgumentError(f"n_th must be nonnegative, got {n_th}")
    if N < 1:
        raise InvalidArgumentError(f"cutoff must be >= 1, got {N}")
    n = np.arange(N)
    if n_th == 0:
        p = (n == 0).astype(float)
        tail = 0.0
    else:
        ratio = n_th / (n_th + 1.0)
        p = ratio**n / (n_th + 1.0)
        tail = ratio**N
    rho = np.diag(p / p.sum()).astype(complex)
    return (rho, tail) if return_tail else rho


def fock_tail_mass(rho, levels=2):
    """Population of the top ``levels`` Fock states of ``rho`` (levels above ``N - 3``)."""
    pops = np.real(np.diag(rho))
    return float(pops[-levels:].sum())


def boson_ops(N):
    """Truncated ``(b, b†, b†b)`` on ``N`` Fock levels."""
    if N < 2:
        raise InvalidArgumentError(f"Fock cutoff must be >= 2, got {N}")
    b = np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1).astype(complex)
    bd = b.conj().T
    return b, bd, bd @ b


def qubit_ops():
    """``(sigma_minus, sigma_plus, sigma_x, sigma_z)`` in the ``(|g>, |e>)`` basis."""
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    sp = sm.conj().T
    sx = sm + sp
    sz = np.diag([1.0, -1.0]).astype(complex)
    return sm, sp, sx, sz


def oscillator_spec(omega_B, kappa, kappa_phi, n_th, N):
    """Damped thermal oscillator with dephasing, truncated at ``N`` levels."""
    if not kappa > 0:
        raise InvalidArgumentError(f"kappa must be positive, got {kappa}")
    if kappa_phi < 0 or n_th < 0:
        raise InvalidArgumentError("kappa_phi and n_th must be nonnegative")
    b, bd, num = boson_ops(N)
    channels = [(kappa * (1 + n_th), b)]
    if n_th:
        channels.append((kappa * n_th, bd))
    if kappa_phi:
        channels.append((kappa_phi, num))
    return LindbladSpec(omega_B * num, tuple(channels))


def jaynes_cummings_model(kappa=1.0, kappa_phi=0.0, delta=0.0, n_th=0.0, g=0.05, N=12):
    """Rotating-frame qubit-oscillator model with ``H_I = sigma+ ⊗ b + sigma- ⊗ b†``."""
    sm, sp, _, _ = qubit_ops()
    b, bd, _ = boson_ops(N)
    spec = oscillator_spec(delta, kappa, kappa_phi, n_th, N)
    return BipartiteModel(
        np.zeros((2, 2)), spec, ((sp, b), (sm, bd)), g, fock_cutoff=N, name="jaynes_cummings"
    )


def labframe_model(kappa=1.0, kappa_phi=0.0, omega_B=5.0, omega_eg=5.0, n_th=0.0, g=0.05, N=12):
    """Lab-frame qubit-oscillator model with ``H_I = sigma_x ⊗ (b + b†)``."""
    _, _, sx, sz = qubit_ops()
    b, bd, _ = boson_ops(N)
    spec = oscillator_spec(omega_B, kappa, kappa_phi, n_th, N)
    return BipartiteModel(
        -0.5 * omega_eg * sz, spec, ((sx, b + bd),), g, fock_cutoff=N, name="labframe"
    )


def check_fock_truncation(model, rho_B):
    """Warning message when the truncated oscillator's top levels are populated."""
    if model.fock_cutoff is None:
        return None
    tail = fock_tail_mass(rho_B)
    if tail >= FOCK_TAIL_MAX:
        msg = (
            f"Fock cutoff {model.fock_cutoff} may be too small: steady-state population of "
            f"the top two levels is {tail:.2e} (limit {FOCK_TAIL_MAX:g})"
        )
        log.warning(msg)
        return msg
    return None
