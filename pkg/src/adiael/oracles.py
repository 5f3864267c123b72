"""Closed-form second-order reduced models for a qubit coupled to a damped oscillator.

Two settings are covered:

* rotating frame, exchange coupling ``sigma+ ⊗ b + sigma- ⊗ b†`` with detuning
  ``Delta`` (:func:`jc_reduced`);
* lab frame, dipolar coupling ``sigma_x ⊗ (b + b†)`` with qubit splitting
  ``omega_eg`` and oscillator frequency ``omega_B`` (:func:`labframe_reduced`,
  :func:`bloch_form`).

Bloch coordinates follow ``rho = (I + x sigma_x + y sigma_y + z sigma_z) / 2``
with ``x_i = Tr(sigma_i rho)``, in the ``(|g>, |e>)`` basis where
``sigma_z = diag(1, -1)`` and ``sigma_y = [[0, -i], [i, 0]]``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .lindblad import qubit_ops
from .operators import commutator_superop, dissipator_superop, spost, spre

__all__ = [
    "JCParams",
    "LabFrameParams",
    "jc_reduced",
    "labframe_reduced",
    "labframe_rates",
    "bloch_form",
    "bloch_from_generator",
    "fit_labframe_coefficients",
    "rotating_frame_average",
    "PAULI",
]

_SM, _SP, _SX, _SZ = qubit_ops()
_SY = np.array([[0, -1j], [1j, 0]])
PAULI = (_SX, _SY, _SZ)


@dataclass(frozen=True)
class JCParams:
    kappa: float
    kappa_phi: float = 0.0
    delta: float = 0.0
    n_th: float = 0.0
    g: float = 0.05

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidArgumentError(f"kappa must be positive, got {self.kappa}")
        if self.n_th < 0 or self.kappa_phi < 0 or self.g < 0:
            raise InvalidArgumentError("n_th, kappa_phi and g must be nonnegative")

    @property
    def gamma(self):
        return self.kappa + self.kappa_phi + 2j * self.delta


@dataclass(frozen=True)
class LabFrameParams:
    kappa: float
    kappa_phi: float = 0.0
    omega_B: float = 5.0
    omega_eg: float = 5.0
    n_th: float = 0.0
    g: float = 0.05

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidArgumentError(f"kappa must be positive, got {self.kappa}")
        if self.n_th < 0 or self.kappa_phi < 0 or self.g < 0:
            raise InvalidArgumentError("n_th, kappa_phi and g must be nonnegative")

    @property
    def gammas(self):
        """``(gamma_+, gamma_-)``."""
        base = self.kappa + self.kappa_phi
        return (
            base + 2j * (self.omega_B + self.omega_eg),
            base + 2j * (self.omega_B - self.omega_eg),
        )


def jc_reduced(p, A_lower=None):
    """Second-order generator of the rotating-frame exchange model.

    With ``A_lower`` given, the qubit lowering operator is replaced by it and
    the frequency-shift operator ``(1 + 2 n_th) sigma_z / 2`` by
    ``n_th A A† - (1 + n_th) A† A``.
    """
    rate = 4 * p.g**2 / abs(p.gamma) ** 2
    kk = p.kappa + p.kappa_phi
    if A_lower is None:
        A = _SM
        shift_op = (1 + 2 * p.n_th) * _SZ / 2
    else:
        A = np.asarray(A_lower, dtype=complex)
        Ad = A.conj().T
        shift_op = p.n_th * A @ Ad - (1 + p.n_th) * Ad @ A
    G = -1j * p.delta * rate * commutator_superop(shift_op)
    G = G + (1 + p.n_th) * kk * rate * dissipator_superop(A)
    if p.n_th:
        G = G + p.n_th * kk * rate * dissipator_superop(A.conj().T)
    return G


def labframe_rates(p):
    """``(r_+, r_-, e_+, e_-)`` of the dipolar lab-frame model."""
    gp, gm = p.gammas
    return (
        2 * (1 + p.n_th) / gp,
        2 * (1 + p.n_th) / gm,
        2 * p.n_th / np.conj(gm),
        2 * p.n_th / np.conj(gp),
    )


def _cross_dissipator(L_out, L_in):
    """Superoperator of ``rho -> L_in rho L_out† - {L_out† L_in, rho} / 2``."""
    M = L_out.conj().T @ L_in
    return np.kron(L_out.conj(), L_in) - 0.5 * spre(M) - 0.5 * spost(M)


def _labframe_basis():
    """Superoperators multiplying ``Y`` and ``X[l, l']`` (``l`` ordered ``+, -``)."""
    sig = (_SP, _SM)
    hamiltonian = -1j * commutator_superop(_SZ / 2)
    cross = [[_cross_dissipator(sig[a], sig[b]) for b in range(2)] for a in range(2)]
    return hamiltonian, cross


def labframe_reduced(p):
    """Lab-frame reduced generator, its dissipation matrix ``X`` and shift ``Y``.

    Returns
    -------
    generator : (4, 4) complex array
        Includes the bare rotation ``-i[-omega_eg sigma_z / 2, .]``.
    X : (2, 2) complex array
        Hermitian, indexed ``(+, -)``.
    Y : float
    """
    r_p, r_m, e_p, e_m = labframe_rates(p)
    r = (r_p, r_m)
    e = (e_p, e_m)
    X = np.array(
        [[r[b] + np.conj(r[a]) + e[b] + np.conj(e[a]) for b in range(2)] for a in range(2)]
    )
    Y = ((r_p + e_p - np.conj(r_p + e_p)) - (r_m + e_m - np.conj(r_m + e_m))) / 2j
    Y = float(np.real(Y))
    hamiltonian, cross = _labframe_basis()
    G = -1j * commutator_superop(-0.5 * p.omega_eg * _SZ)
    G = G + p.g**2 * Y * hamiltonian
    for a in range(2):
        for b in range(2):
            G = G + p.g**2 * X[a, b] * cross[a][b]
    return G, X, Y


def fit_labframe_coefficients(generator, g):
    """Least-squares ``(X, Y, residual)`` of a qubit generator in the lab-frame form.

    ``generator`` must exclude the bare rotation.  ``residual`` is the
    relative Frobenius norm of the part not captured by the five basis maps.
    """
    hamiltonian, cross = _labframe_basis()
    basis = [hamiltonian] + [cross[a][b] for a in range(2) for b in range(2)]
    M = np.stack([g**2 * S.reshape(-1) for S in basis], axis=1)
    target = np.asarray(generator).reshape(-1)
    coef, *_ = np.linalg.lstsq(M, target, rcond=None)
    resid = np.linalg.norm(M @ coef - target) / max(np.linalg.norm(target), 1e-300)
    Y = coef[0]
    X = coef[1:].reshape(2, 2)
    return X, Y, float(resid)


def bloch_form(p):
    """Affine Bloch equations ``d/dt v = drift @ v + affine`` of the lab-frame model.

    Only ``y`` and ``z`` are damped, both at ``g^2 (1 + 2 n_th) r_z``, with
    ``z`` relaxing to ``z_bar``.  The frequency shift enters only through
    ``dy/dt = (-omega_eg + 2 g^2 Y) x - ...``.  This is exactly the Pauli image of
    :func:`labframe_reduced`.

    Returns
    -------
    drift : (3, 3) float array
    affine : (3,) float array
    z_bar : float
        Stationary ``z``.
    r_z : float
    """
    _, X, Y = labframe_reduced(p)
    gp, gm = p.gammas
    ap, am = abs(gp) ** 2, abs(gm) ** 2
    n = p.n_th
    g2 = p.g**2
    r_z = 4 * (p.kappa + p.kappa_phi) * (1 / ap + 1 / am)
    z_bar = (ap - am) / ((ap + am) * (1 + 2 * n))
    damp = g2 * (1 + 2 * n) * r_z
    drift = np.array(
        [
            [0.0, p.omega_eg, 0.0],
            [-p.omega_eg + 2 * g2 * Y, -damp, 0.0],
            [0.0, 0.0, -damp],
        ]
    )
    affine = np.array([0.0, 0.0, damp * z_bar])
    return drift, affine, z_bar, r_z


def bloch_from_generator(G):
    """Pauli-coordinate image ``(drift, affine)`` of a qubit superoperator."""
    G = np.asarray(G)

    def act(X):
        return (G @ X.reshape(-1, order="F")).reshape(2, 2, order="F")

    drift = np.array([[np.trace(si @ act(sj)) / 2 for sj in PAULI] for si in PAULI])
    affine = np.array([np.trace(si @ act(np.eye(2))) / 2 for si in PAULI])
    return drift, affine


def rotating_frame_average(G, H):
    """Secular part of ``G`` in the frame rotating with ``H``.

    Keeps the matrix elements of ``G`` between operator eigenmodes
    ``|n><m|`` of ``[H, .]`` whose Bohr frequencies coincide, i.e. the time
    average of ``exp(i t [H, .]) G exp(-i t [H, .])``.
    """
    w, U = np.linalg.eigh(np.asarray(H, dtype=complex))
    d = len(w)
    S = np.kron(U.conj(), U)
    G_eig = S.conj().T @ G @ S
    f = (w[:, None] - w[None, :]).reshape(-1, order="F")
    tol = 1e-9 * max(1.0, np.abs(w).max()) if d else 0.0
    mask = np.abs(f[:, None] - f[None, :]) <= tol
    return S @ (G_eig * mask) @ S.conj().T

