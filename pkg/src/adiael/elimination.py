"""Order-by-order adiabatic elimination in the partial-trace gauge.

All generators and correction maps carry their powers of the coupling
explicitly: ``orders[j].generator`` is the full order-``j`` contribution to
the reduced generator (``eps^j L_{s,j}``), never the bare coefficient.

Corrections are rectangular superoperators from operators on A to operators
on ``A ⊗ B``.  Order ``n >= 1`` solves the Sylvester equation

    calA K_n + K_n calB = C_n,
    calA = -i[H_A ⊗ I, .] + id ⊗ L_B,   calB = i[H_A, .],
    C_n  = sum_{i=0}^{n-1} K_i L_{n-i} + i g [H_I, K_{n-1}(.)].

``calA`` and ``-calB`` share the purely imaginary spectrum of the A rotation
(the kernel of ``L_B``), so the operator is singular; the right-hand side
has zero partial trace, and the gauge ``Tr_B K_n = 0`` selects the unique
solution.  The direct path deflates that kernel, the quadrature path
integrates ``-∫ exp(t calA) C_n exp(t calB) dt`` which converges on it.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError, NumericalError
from .lindblad import adjoint_lindbladian, check_fock_truncation, lindbladian, steady_state
from .operators import (
    Propagator,
    commutator_superop,
    invariant_subspace,
    partial_trace_superop,
    solve_sylvester_direct,
    solve_sylvester_quadrature,
    spost,
    spre,
    superop_from_map,
    unvectorize,
    vectorize,
)
from .quadrature import OrbitFlow, QuadratureConfig, integrate_flow, slowest_decay

__all__ = [
    "OrderTerm",
    "ReducedModel",
    "centered_coupling",
    "a_minus",
    "b_heisenberg",
    "order0",
    "ls1",
    "k1",
    "correlation_coeffs",
    "ls2",
    "reduce",
    "invariance_residual",
]

log = logging.getLogger(__name__)

MAX_ORDER = 6
SYLVESTER_METHODS = ("direct", "quadrature")
LS2_METHODS = ("adjoint_quadrature", "from_k1")


def centered_coupling(B_k, rho_B):
    """``B_k - Tr(B_k rho_B) I``: the coupling operator with its mean removed."""
    B_k = np.asarray(B_k, dtype=complex)
    return B_k - np.trace(B_k @ rho_B) * np.eye(B_k.shape[0])


def a_minus(A_k, H_A, t):
    """``exp(-i t H_A) A_k exp(i t H_A)``, evaluated in the eigenbasis of ``H_A``."""
    w, U = np.linalg.eigh(np.asarray(H_A, dtype=complex))
    A_hat = U.conj().T @ np.asarray(A_k, dtype=complex) @ U
    phase = np.exp(-1j * (w[:, None] - w[None, :]) * t)
    return U @ (A_hat * phase) @ U.conj().T


def b_heisenberg(B_k, spec_B, t):
    """Heisenberg-picture evolution ``exp(t L_B^*)(B_k)``."""
    if t < 0:
        raise InvalidArgumentError(f"t must be nonnegative, got {t}")
    P = Propagator(adjoint_lindbladian(spec_B))
    return unvectorize(P.apply(t, vectorize(B_k)))


class _Context:
    """Derived matrices shared by every order of one model."""

    def __init__(self, model):
        self.model = model
        self.dA, self.dB = model.dim_A, model.dim_B
        self.D = self.dA * self.dB

    @cached_property
    def L_B(self):
        return lindbladian(self.model.spec_B)

    @cached_property
    def L_B_adjoint(self):
        return adjoint_lindbladian(self.model.spec_B)

    @cached_property
    def heisenberg_propagator(self):
        return Propagator(self.L_B_adjoint)

    @cached_property
    def rho_B(self):
        return steady_state(self.L_B)

    @cached_property
    def truncation_warning(self):
        return check_fock_truncation(self.model, self.rho_B)

    @cached_property
    def B0(self):
        return [centered_coupling(B, self.rho_B) for _, B in self.model.couplings]

    @cached_property
    def K0(self):
        rho_B = self.rho_B
        return superop_from_map(lambda E: np.kron(E, rho_B), self.dA, self.D)

    @cached_property
    def tr_B(self):
        return partial_trace_superop(self.dA, self.dB)

    @cached_property
    def G0(self):
        return -1j * commutator_superop(self.model.H_A)

    @cached_property
    def sylvester_A(self):
        return lindbladian(self.model.joint_spec(g=0.0))

    @cached_property
    def sylvester_B(self):
        return -self.G0

    @cached_property
    def deflated_A(self):
        # shifts the Tr_B-kernel eigenvalues off the imaginary axis; K_n never sees it
        shift = self.model.spec_B.max_rate or 1.0
        return self.sylvester_A - shift * (self.K0 @ self.tr_B)

    @cached_property
    def HI_comm(self):
        return commutator_superop(self.model.H_I)

    @cached_property
    def coupling_blocks(self):
        """Per coupling: ``[A_k, .]`` on A and ``X -> (I ⊗ B_k) X`` on the joint space."""
        IA = np.eye(self.dA)
        return [
            (commutator_superop(A_k), spre(np.kron(IA, B_k)))
            for A_k, B_k in self.model.couplings
        ]

    def generator_from_correction(self, K):
        """``-i g sum_k [A_k, Tr_B((I ⊗ B_k) K(.))]``."""
        g = self.model.g
        out = np.zeros((self.dA**2, self.dA**2), dtype=complex)
        if g == 0:
            return out
        for comm_A, left_B in self.coupling_blocks:
            out += comm_A @ (self.tr_B @ (left_B @ K))
        return -1j * g * out

    def solve(self, C, method, q):
        if method == "direct":
            return solve_sylvester_direct(self.deflated_A, self.sylvester_B, C)
        if method == "quadrature":
            return solve_sylvester_quadrature(self.sylvester_A, self.sylvester_B, C, q)
        raise InvalidArgumentError(f"unknown Sylvester method {method!r}")


def _context(model):
    ctx = model.__dict__.get("_elimination_context")
    if ctx is None:
        ctx = _Context(model)
        object.__setattr__(model, "_elimination_context", ctx)
    return ctx


def order0(model):
    """Zeroth order: free rotation of A and the product embedding ``rho ⊗ rho_B``."""
    ctx = _context(model)
    return ctx.G0.copy(), ctx.K0.copy()


def ls1(model):
    """First-order generator ``-i g sum_k Tr(B_k rho_B) [A_k, .]``."""
    ctx = _context(model)
    out = np.zeros((ctx.dA**2,) * 2, dtype=complex)
    for A_k, B_k in model.couplings:
        out += np.trace(B_k @ ctx.rho_B) * commutator_superop(A_k)
    return -1j * model.g * out


def _rhs(ctx, n, K, L):
    """Known terms of the order-``n`` invariance condition."""
    C = ctx.K0 @ L[n]
    for i in range(1, n):
        C += K[i] @ L[n - i]
    if ctx.model.g:
        C += 1j * ctx.model.g * (ctx.HI_comm @ K[n - 1])
    return C


def k1(model, method="direct", q=None):
    """First-order correction map (including its factor of ``g``)."""
    ctx = _context(model)
    q = q or QuadratureConfig()
    K = [ctx.K0]
    L = [ctx.G0, ls1(model)]
    return ctx.solve(_rhs(ctx, 1, K, L), method, q)


def correlation_coeffs(model, t):
    """Bath correlation matrices at time ``t``.

    Returns
    -------
    c, c_tilde : (K, K) complex arrays indexed ``[k, l]``
        ``c[k, l] = Tr(B_l(t) B0_k rho_B)``, ``c_tilde[k, l] = Tr(B_l(t) rho_B B0_k)``,
        with ``B_l(t)`` the Heisenberg-evolved coupling operator.
    """
    if t < 0:
        raise InvalidArgumentError(f"t must be nonnegative, got {t}")
    ctx = _context(model)
    P = ctx.heisenberg_propagator
    Bt = [unvectorize(P.apply(t, vectorize(B))) for _, B in model.couplings]
    c = np.array([[np.trace(Bl @ B0k @ ctx.rho_B) for Bl in Bt] for B0k in ctx.B0])
    ct = np.array([[np.trace(Bl @ ctx.rho_B @ B0k) for Bl in Bt] for B0k in ctx.B0])
    return c, ct


def _ls2_adjoint_quadrature(ctx, q):
    """Second-order generator from scalar bath correlations and ``A_k^-(t)``."""
    model = ctx.model
    g = model.g
    dA = ctx.dA
    n_c = len(model.couplings)
    if g == 0 or n_c == 0:
        return np.zeros((dA**2,) * 2, dtype=complex)

    P = ctx.heisenberg_propagator
    V0 = np.stack([vectorize(B) for _, B in model.couplings], axis=1)
    # Tr(Y W) = vec(Y) . vec(W^T)
    W = np.stack(
        [vectorize((B0k @ ctx.rho_B).T) for B0k in ctx.B0]
        + [vectorize((ctx.rho_B @ B0k).T) for B0k in ctx.B0]
    )
    w, U = np.linalg.eigh(model.H_A)
    A_hat = np.stack([U.conj().T @ A_k @ U for A_k, _ in model.couplings])
    freq = w[:, None] - w[None, :]

    def observe(ts, corr):
        corr = corr.reshape(len(ts), 2, n_c, n_c)
        phase = np.exp(-1j * ts[:, None, None] * freq[None])
        # integrand[t, which, l] = sum_k corr[t, which, k, l] * A_k^-(t) (in H_A eigenbasis)
        return np.einsum("twkl,kab,tab->twlab", corr, A_hat, phase)

    if P.method != "eig":
        # restrict the nonnormal generator to the orbit of the couplings
        Q = invariant_subspace(P.M, V0)
        if Q is not None and Q.shape[1] < P.dim:
            P = Propagator(Q.conj().T @ P.M @ Q)
            V0 = Q.conj().T @ V0
            W = W @ Q
    flow = OrbitFlow(P, V0, W, observe)
    if P.method == "eig":
        weights = np.abs(flow.readout_eig).max(axis=0) * np.abs(flow.coeff).max(axis=1)
        mu = slowest_decay(P.eigvals, weights)
        neutral = P.eigvals.real > -1e-10 * max(1.0, np.abs(P.eigvals).max())
        flow.coeff[neutral] = 0.0
    else:
        mu = slowest_decay(P.spectrum)
    horizon = q.decay_folds / mu
    integral, _, _ = integrate_flow(flow, horizon, q)
    integral = np.einsum("ia,wlab,jb->wlij", U, integral, U.conj())

    out = np.zeros((dA**2,) * 2, dtype=complex)
    for l, (A_l, _) in enumerate(model.couplings):
        comm_A = commutator_superop(A_l)
        out += comm_A @ (spre(integral[0, l]) - spost(integral[1, l]))
    return -(g**2) * out


def ls2(model, method="adjoint_quadrature", q=None, k1_method="direct"):
    """Second-order generator (including its factor of ``g**2``).

    ``"adjoint_quadrature"`` integrates the bath correlation functions
    against ``A_k^-(t)``; ``"from_k1"`` evaluates ``-i Tr_B[g H_I, K_1(.)]``
    with ``K_1`` from the Sylvester solver selected by ``k1_method``.
    """
    ctx = _context(model)
    q = q or QuadratureConfig()
    if method == "adjoint_quadrature":
        return _ls2_adjoint_quadrature(ctx, q)
    if method == "from_k1":
        return ctx.generator_from_correction(k1(model, k1_method, q))
    raise InvalidArgumentError(f"unknown ls2 method {method!r}; expected one of {LS2_METHODS}")


@dataclass
class OrderTerm:
    generator: np.ndarray
    correction: np.ndarray
    method: str
    residual: float = 0.0


@dataclass
class ReducedModel:
    """Reduced generators and correction maps up to some order.

    ``orders[j]`` holds the order-``j`` contributions, each already
    multiplied by its power of the coupling.
    """

    model: object
    orders: list
    rho_B: np.ndarray
    warnings: list = field(default_factory=list)

    @property
    def max_order(self):
        return len(self.orders) - 1

    def generator(self, upto=None):
        """Truncated reduced generator ``sum_{j<=upto} orders[j].generator``."""
        upto = self.max_order if upto is None else upto
        return sum(term.generator for term in self.orders[: upto + 1])

    def correction(self, upto=None):
        upto = self.max_order if upto is None else upto
        return sum(term.correction for term in self.orders[: upto + 1])

    def gauge_residuals(self):
        """``||Tr_B K_j||`` (operator 2-norm of the map) for every order ``j >= 1``."""
        tr_B = _context(self.model).tr_B
        return [float(np.linalg.norm(tr_B @ t.correction, 2)) for t in self.orders[1:]]


def invariance_residual(model, K, L, n):
    """Relative residual of the order-``n`` invariance condition.

    ``K`` and ``L`` are sequences of corrections and generators for orders
    ``0..n``.  Returns ``||residual|| / max(||term||)``.
    """
    ctx = _context(model)
    terms = [ctx.sylvester_A @ K[n]]
    if n >= 1 and model.g:
        terms.append(-1j * model.g * (ctx.HI_comm @ K[n - 1]))
    terms += [-(K[i] @ L[n - i]) for i in range(n + 1)]
    scale = max(np.linalg.norm(t) for t in terms)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(sum(terms)) / scale)


def reduce(model, max_order=2, method="direct", q=None, residual_tol=1e-8):
    """Reduced model up to ``max_order`` in the partial-trace gauge.

    Raises
    ------
    InvalidArgumentError
        For ``max_order`` outside ``0..6`` or an unknown method.
    NumericalError
        When an order's invariance residual exceeds ``residual_tol``.
    """
    if not 0 <= max_order <= MAX_ORDER:
        raise InvalidArgumentError(f"max_order must be in 0..{MAX_ORDER}, got {max_order}")
    if method not in SYLVESTER_METHODS:
        raise InvalidArgumentError(f"unknown method {method!r}; expected one of {SYLVESTER_METHODS}")
    q = q or QuadratureConfig()
    ctx = _context(model)
    warns = []
    if ctx.truncation_warning:
        warns.append(ctx.truncation_warning)

    K = [ctx.K0]
    L = [ctx.G0]
    orders = [OrderTerm(ctx.G0, ctx.K0, "closed_form", invariance_residual(model, K, L, 0))]
    for n in range(1, max_order + 1):
        L.append(ctx.generator_from_correction(K[n - 1]))
        K.append(ctx.solve(_rhs(ctx, n, K, L), method, q))
        res = invariance_residual(model, K, L, n)
        if res > residual_tol:
            raise NumericalError(f"order {n} invariance residual {res:.2e} exceeds {residual_tol:g}")
        orders.append(OrderTerm(L[n], K[n], method, res))
        log.debug("order %d: residual %.2e", n, res)
    return ReducedModel(model, orders, ctx.rho_B, warns)
