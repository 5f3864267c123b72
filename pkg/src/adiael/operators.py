"""Dense complex linear algebra on operators and superoperators.

Operators are square ``numpy`` arrays.  Superoperators are matrices acting on
column-stacked operators, so that ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
Bipartite spaces use A-major ordering: basis index ``a * dim_B + b``, which is
what ``numpy.kron`` produces.
"""

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import InvalidArgumentError, NumericalError, SingularSylvesterError

__all__ = [
    "tensor",
    "partial_trace_B",
    "vectorize",
    "unvectorize",
    "spre",
    "spost",
    "commutator_superop",
    "dissipator_superop",
    "superop_from_map",
    "apply_superop",
    "partial_trace_superop",
    "expm",
    "Propagator",
    "invariant_subspace",
    "solve_sylvester_direct",
    "solve_sylvester_quadrature",
]

ZERO_EIG_ULPS = 64
EIG_COND_MAX = 1e8


def _square(X, name="operator"):
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise InvalidArgumentError(f"{name} must be a square matrix, got shape {X.shape}")
    return X


def tensor(A, B):
    """Kronecker product ``A ⊗ B`` with A-major index ordering."""
    return np.kron(_square(A), _square(B))


def partial_trace_B(X, dim_A, dim_B):
    """Trace out the second tensor factor of an operator on ``A ⊗ B``."""
    X = _square(X)
    if X.shape[0] != dim_A * dim_B:
        raise InvalidArgumentError(
            f"operator of dimension {X.shape[0]} does not factor as {dim_A} x {dim_B}"
        )
    return np.einsum("abcb->ac", X.reshape(dim_A, dim_B, dim_A, dim_B))


def vectorize(X):
    """Column-stacking vectorization."""
    return _square(X).reshape(-1, order="F")


def unvectorize(v, dim=None):
    """Inverse of :func:`vectorize`.  ``dim`` is inferred when omitted."""
    v = np.asarray(v)
    n = v.shape[0]
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise InvalidArgumentError(f"vector length {n} is not a perfect square")
    if dim is not None and dim != d:
        raise InvalidArgumentError(f"vector length {n} does not match dimension {dim}")
    return v.reshape(d, d, order="F")


def spre(A):
    """Superoperator of ``X -> A X``."""
    A = _square(A)
    return np.kron(np.eye(A.shape[0]), A)


def spost(B):
    """Superoperator of ``X -> X B``."""
    B = _square(B)
    return np.kron(B.T, np.eye(B.shape[0]))


def commutator_superop(H):
    """Superoperator of ``X -> [H, X]``."""
    return spre(H) - spost(H)


def dissipator_superop(L):
    """Superoperator of ``D[L](X) = L X L† - {L†L, X}/2``."""
    L = _square(L)
    LdL = L.conj().T @ L
    return np.kron(L.conj(), L) - 0.5 * spre(LdL) - 0.5 * spost(LdL)


def superop_from_map(func, dim_in, dim_out=None):
    """Matrix of a linear map on operators, built column by column.

    ``func`` receives each matrix unit ``E_ij`` of the input space and must
    return an operator on the output space.
    """
    dim_out = dim_in if dim_out is None else dim_out
    S = np.empty((dim_out * dim_out, dim_in * dim_in), dtype=complex)
    E = np.zeros((dim_in, dim_in), dtype=complex)
    for j in range(dim_in):
        for i in range(dim_in):
            E[i, j] = 1.0
            S[:, i + dim_in * j] = vectorize(func(E))
            E[i, j] = 0.0
    return S


def apply_superop(S, X):
    """Apply a (possibly rectangular) superoperator matrix to an operator."""
    out = S @ vectorize(X)
    return unvectorize(out)


def partial_trace_superop(dim_A, dim_B):
    """Matrix of ``Tr_B`` as a map from operators on ``A ⊗ B`` to operators on ``A``."""
    return superop_from_map(lambda X: partial_trace_B(X, dim_A, dim_B), dim_A * dim_B, dim_A)


class Propagator:
    """Cached evaluator of ``t -> exp(t M)``.

    The eigendecomposition of ``M`` is used when its eigenvector matrix has
    condition number below ``EIG_COND_MAX``; otherwise every evaluation falls
    back to scaling-and-squaring with a diagonal Padé kernel.

    Attributes
    ----------
    method : {"eig", "pade"}
    """

    def __init__(self, M):
        M = np.asarray(M, dtype=complex)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidArgumentError(f"generator must be square, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise InvalidArgumentError("generator has non-finite entries")
        self.M = M
        self.dim = M.shape[0]
        self.eigvals = None
        self.V = None
        self.Vinv = None
        self.method = "pade"
        self._cache = {}
        w, V = np.linalg.eig(M)
        self.spectrum = w
        cond = np.linalg.cond(V)
        if np.isfinite(cond) and cond < EIG_COND_MAX:
            # eigenvalues at rounding level are exact zeros (e.g. the stationary
            # mode); otherwise long horizons accumulate t * 1e-14 drift
            floor = ZERO_EIG_ULPS * np.finfo(float).eps * max(np.abs(w).max(), 1.0)
            w_prop = np.where(np.abs(w) <= floor, 0.0, w)
            self.eigvals, self.V, self.Vinv = w_prop, V, np.linalg.inv(V)
            self.method = "eig"

    def __call__(self, t):
        t = float(t)
        if self.method == "eig":
            return (self.V * np.exp(t * self.eigvals)) @ self.Vinv
        if t not in self._cache:
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[t] = sla.expm(t * self.M)
        return self._cache[t]

    def apply(self, t, v):
        """``exp(t M) @ v`` for a vector or a block of column vectors."""
        if self.method == "eig":
            coeff = self.Vinv @ v
            phase = np.exp(float(t) * self.eigvals)
            coeff = coeff * (phase if coeff.ndim == 1 else phase[:, None])
            return self.V @ coeff
        return self(t) @ v


def expm(M, t=1.0, method="auto"):
    """Matrix exponential ``exp(t M)``.

    Parameters
    ----------
    M : (n, n) array_like
        Operator or superoperator matrix.
    t : float
    method : {"auto", "eig", "pade"}
        ``"auto"`` picks the eigendecomposition when it is well conditioned.
        ``"eig"`` forces it regardless of conditioning.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgumentError(f"expm needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)) or not np.isfinite(t):
        raise InvalidArgumentError("expm input has non-finite entries")
    if method == "pade":
        return sla.expm(t * M)
    if method == "eig":
        w, V = np.linalg.eig(M)
        return (V * np.exp(t * w)) @ np.linalg.inv(V)
    if method != "auto":
        raise InvalidArgumentError(f"unknown expm method {method!r}")
    return Propagator(M)(t)


def invariant_subspace(M, V, tol=1e-12):
    """Orthonormal basis of the smallest ``M``-invariant subspace containing ``V``.

    Block Krylov iteration with two-pass Gram-Schmidt; a new direction is
    dropped once its norm after orthogonalization falls below
    ``tol * ||M||``.  Returns ``None`` when the computed basis fails the
    invariance check ``||M Q - Q Q^H M Q|| <= 1e3 * tol * ||M||``.
    """
    M = np.asarray(M, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if V.ndim == 1:
        V = V[:, None]
    n = M.shape[0]
    scale = max(np.linalg.norm(M, 2), 1.0)
    basis = []

    def absorb(block):
        fresh = []
        for v in block.T:
            for _ in range(2):
                for q in basis:
                    v = v - (q.conj() @ v) * q
            nv = np.linalg.norm(v)
            if nv > tol * scale:
                q = v / nv
                basis.append(q)
                fresh.append(q)
        return np.array(fresh).T if fresh else None

    block = absorb(V / np.maximum(np.linalg.norm(V, axis=0), np.finfo(float).tiny))
    while block is not None and len(basis) < n:
        block = absorb(M @ block)
    if not basis:
        return None
    Q = np.array(basis).T
    MQ = M @ Q
    if np.linalg.norm(MQ - Q @ (Q.conj().T @ MQ), 2) > 1e3 * tol * scale:
        return None
    return Q


def _sylvester_scale(A, B):
    return max(np.linalg.norm(A, 1), np.linalg.norm(B, 1), np.finfo(float).tiny)


def solve_sylvester_direct(A, B, C, gap_tol=1e-10, residual_tol=1e-10):
    """Solve ``A X + X B = C`` by complex-Schur back-substitution on ``B``.

    ``B`` is reduced to upper-triangular Schur form ``B = Z T Z^H``; the
    transformed unknown ``Y = X Z`` is then found one column at a time from
    ``(A + T_jj I) y_j = (C Z)_j - sum_{i<j} T_ij y_i``.  ``A`` may be large
    (it acts on the doubled joint space) while ``B`` is small.

    Raises
    ------
    SingularSylvesterError
        When an eigenvalue of ``A`` comes within ``gap_tol * scale`` of an
        eigenvalue of ``-B``.
    NumericalError
        When the final residual exceeds ``residual_tol * ||C||_F``.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    C = np.asarray(C, dtype=complex)
    n, m = A.shape[0], B.shape[0]
    if A.shape != (n, n) or B.shape != (m, m) or C.shape != (n, m):
        raise InvalidArgumentError(
            f"incompatible Sylvester shapes A{A.shape} B{B.shape} C{C.shape}"
        )
    for name, M in (("A", A), ("B", B), ("C", C)):
        if not np.all(np.isfinite(M)):
            raise InvalidArgumentError(f"{name} has non-finite entries")
    scale = _sylvester_scale(A, B)
    threshold = gap_tol * scale

    T, Z = sla.schur(B, output="complex")
    CZ = C @ Z
    Y = np.zeros((n, m), dtype=complex)
    factors = {}
    eye = np.eye(n)
    eig_A = None
    for j in range(m):
        shift = T[j, j]
        key = complex(np.round(shift.real, 14), np.round(shift.imag, 14))
        if key not in factors:
            M = A + shift * eye
            lu, piv, info = lapack.zgetrf(M)
            rcond = 0.0
            if info == 0:
                rcond, _ = lapack.zgecon(lu, np.linalg.norm(M, 1), norm="1")
            # sigma_min <= |eigenvalue|, so a small spectral gap always shows up here
            if info != 0 or rcond < 10 * gap_tol:
                if eig_A is None:
                    eig_A = np.linalg.eigvals(A)
                gaps = np.abs(eig_A + shift)
                i = int(np.argmin(gaps))
                if gaps[i] <= threshold or info != 0:
                    raise SingularSylvesterError((eig_A[i], shift), gaps[i], threshold)
            factors[key] = (lu, piv)
        lu, piv = factors[key]
        rhs = CZ[:, j] - Y[:, :j] @ T[:j, j]
        Y[:, j], info = lapack.zgetrs(lu, piv, rhs)
    X = Y @ Z.conj().T

    c_norm = np.linalg.norm(C)
    residual = np.linalg.norm(A @ X + X @ B - C)
    if residual > residual_tol * max(c_norm, np.finfo(float).tiny) and residual > 0:
        raise NumericalError(
            f"Sylvester residual {residual:.3e} exceeds {residual_tol:.1e} * ||C|| = "
            f"{residual_tol * c_norm:.3e}"
        )
    return X


def solve_sylvester_quadrature(A, B, C, q=None):
    """Solve ``A X + X B = C`` as ``X = -∫_0^∞ exp(tA) C exp(tB) dt``.

    The horizon is ``q.decay_folds / mu`` where ``mu`` is the slowest decay
    rate of the integrand after components sitting on non-decaying modes
    (which must vanish) are projected out.  See :mod:`adiael.quadrature`.
    """
    from .quadrature import QuadratureConfig, sylvester_integral

    return sylvester_integral(A, B, C, q or QuadratureConfig())
