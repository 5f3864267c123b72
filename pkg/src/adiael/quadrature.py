"""Adaptive Gauss-Legendre quadrature for exponentially decaying integrands.

Integrals of the form ``∫_0^∞ F(t) dt`` where ``F`` is generated by a linear
flow (``F(t) = exp(tA) C exp(tB)`` or an observable of ``exp(tM) v``) are
truncated at a horizon of ``decay_folds`` e-folds of the slowest decay rate
and evaluated on panels that are bisected until the difference between the
one-panel and two-half-panel rules meets the tolerance.

Flows expose ``start()``, ``advance(state, dt)`` and ``values(state, offsets)``.
Bisection keeps panel widths dyadic, so the fallback (non-diagonalizable)
flows only ever need ``exp(dt M)`` for a few distinct ``dt`` per level.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DivergentIntegralError, InvalidArgumentError, QuadratureError
from .operators import Propagator

GL_NODES = 16
_X, _W = np.polynomial.legendre.leggauss(GL_NODES)
_X01 = 0.5 * (_X + 1.0)
_W01 = 0.5 * _W
_RICHARDSON = 2.0 ** (2 * GL_NODES) - 1.0


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerance and truncation settings shared by every quadrature path."""

    tol: float = 1e-9
    decay_folds: float = 40.0
    max_panels: int = 512

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidArgumentError(f"tol must be positive, got {self.tol}")
        if not self.decay_folds > 0:
            raise InvalidArgumentError(f"decay_folds must be positive, got {self.decay_folds}")
        if self.max_panels < 1:
            raise InvalidArgumentError(f"max_panels must be >= 1, got {self.max_panels}")


@dataclass
class QuadratureInfo:
    horizon: float
    decay_rate: float
    panels: int
    error_estimate: float
    method: str


def integrate_flow(flow, horizon, q, n_initial=8):
    """Integrate ``flow`` over ``[0, horizon]``.

    Returns
    -------
    value : ndarray
    panels : int
        Number of accepted panels.
    error : float
        Sum of per-panel error estimates (Frobenius norm).
    """

    def rule(state, h):
        vals = flow.values(state, h * _X01)
        return h * np.tensordot(_W01, vals, axes=1)

    h0 = horizon / n_initial
    work = []
    state = flow.start()
    for k in range(n_initial):
        work.append((state, h0, rule(state, h0)))
        if k + 1 < n_initial:
            state = flow.advance(state, h0)

    coarse_sum = sum(w[2] for w in work)
    scale = max(
        np.linalg.norm(coarse_sum), 1e-3 * sum(np.linalg.norm(w[2]) for w in work)
    )
    if scale == 0.0:
        return np.zeros_like(coarse_sum), n_initial, 0.0

    total = np.zeros_like(coarse_sum)
    err_total = 0.0
    panels = n_initial
    work.reverse()
    while work:
        state, h, coarse = work.pop()
        half = 0.5 * h
        left = rule(state, half)
        mid = flow.advance(state, half)
        right = rule(mid, half)
        fine = left + right
        err = np.linalg.norm(fine - coarse)
        if err <= q.tol * scale * h / horizon:
            total += fine + (fine - coarse) / _RICHARDSON
            err_total += err
            continue
        panels += 1
        if panels > q.max_panels:
            raise QuadratureError(
                f"quadrature needs more than {q.max_panels} panels (tol={q.tol:g})"
            )
        work.append((mid, half, right))
        work.append((state, half, left))
    return total, panels, err_total


def _zero_threshold(*spectra):
    mags = [np.max(np.abs(s)) for s in spectra if len(s)]
    return 1e-10 * max(mags + [1.0])


class _EigenSylvesterFlow:
    """``exp(tA) C exp(tB)`` in the joint eigenbasis of ``A`` and ``B``."""

    def __init__(self, lam, C_hat):
        self.lam = lam
        self.C_hat = C_hat

    def start(self):
        return 0.0

    def advance(self, a, dt):
        return a + dt

    def values(self, a, offsets):
        t = (a + offsets)[:, None, None]
        return self.C_hat[None] * np.exp(t * self.lam[None])


class _ExpmSylvesterFlow:
    """``exp(tA) C exp(tB)`` propagated with cached Padé exponentials."""

    def __init__(self, A, B, C):
        self.A, self.B, self.C = A, B, C
        self._cache = {}

    def _exp(self, dt):
        if dt not in self._cache:
            self._cache[dt] = (sla.expm(dt * self.A), sla.expm(dt * self.B))
        return self._cache[dt]

    def start(self):
        return self.C

    def advance(self, S, dt):
        EA, EB = self._exp(dt)
        return EA @ S @ EB

    def values(self, S, offsets):
        out = np.empty((len(offsets),) + S.shape, dtype=complex)
        for i, tau in enumerate(offsets):
            EA, EB = self._exp(float(tau))
            out[i] = EA @ S @ EB
        return out


def sylvester_integral(A, B, C, q, return_info=False):
    """``X = -∫_0^T exp(tA) C exp(tB) dt`` with ``T = q.decay_folds / mu``.

    Components of ``C`` that sit on pairs of modes with no net decay must be
    zero up to round-off; they are projected out.  Otherwise the integral
    diverges and :class:`DivergentIntegralError` is raised.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    C = np.asarray(C, dtype=complex)
    n, m = A.shape[0], B.shape[0]
    if A.shape != (n, n) or B.shape != (m, m) or C.shape != (n, m):
        raise InvalidArgumentError(
            f"incompatible Sylvester shapes A{A.shape} B{B.shape} C{C.shape}"
        )
    c_norm = np.linalg.norm(C)
    if c_norm == 0.0:
        X = np.zeros((n, m), dtype=complex)
        info = QuadratureInfo(0.0, np.inf, 0, 0.0, "trivial")
        return (X, info) if return_info else X

    PA, PB = Propagator(A), Propagator(B)
    thr = _zero_threshold(PA.spectrum, PB.spectrum)
    lam = PA.spectrum[:, None] + PB.spectrum[None, :]

    if PA.method == "eig" and PB.method == "eig":
        C_hat = PA.Vinv @ C @ PB.V
        neutral = lam.real > -thr
        leak = np.abs(C_hat[neutral]).max() if neutral.any() else 0.0
        if leak > 1e-8 * np.abs(C_hat).max():
            raise DivergentIntegralError(
                f"integrand has a non-decaying component of relative size "
                f"{leak / np.abs(C_hat).max():.2e}"
            )
        C_hat = np.where(neutral, 0.0, C_hat)
        if not (~neutral & (C_hat != 0)).any():
            X = np.zeros((n, m), dtype=complex)
            info = QuadratureInfo(0.0, np.inf, 0, 0.0, "trivial")
            return (X, info) if return_info else X
        mu = float(-lam.real[~neutral & (C_hat != 0)].max())
        horizon = q.decay_folds / mu
        flow = _EigenSylvesterFlow(lam, C_hat)
        Y, panels, err = integrate_flow(flow, horizon, q)
        X = -(PA.V @ Y @ PB.Vinv)
        method = "eig"
    else:
        decaying = PA.spectrum.real[PA.spectrum.real < -thr]
        if decaying.size == 0:
            raise DivergentIntegralError("A has no decaying direction")
        mu = float(-decaying.max() - max(PB.spectrum.real.max(), 0.0))
        if mu <= 0:
            raise DivergentIntegralError(f"estimated decay rate {mu:.3g} is not positive")
        horizon = q.decay_folds / mu
        flow = _ExpmSylvesterFlow(A, B, C)
        tail = np.linalg.norm(sla.expm(horizon * A) @ C @ sla.expm(horizon * B))
        if tail > max(q.tol, 1e-12) * c_norm:
            raise DivergentIntegralError(
                f"integrand has not decayed at the horizon: |F(T)|/|C| = {tail / c_norm:.2e}"
            )
        Y, panels, err = integrate_flow(flow, horizon, q)
        X = -Y
        method = "pade"
    info = QuadratureInfo(horizon, mu, panels, err, method)
    return (X, info) if return_info else X


class OrbitFlow:
    """Flow of an observable along ``exp(tM) V0``.

    Only ``readout @ exp(tM) @ V0`` is formed.  ``observe(ts, R)`` receives
    absolute times ``ts`` (shape ``(k,)``) and those readouts (shape
    ``(k, s, p)``) and returns the integrand values.
    """

    def __init__(self, propagator, V0, readout, observe):
        self.P = propagator
        self.observe = observe
        self.readout = readout
        if propagator.method == "eig":
            self.coeff = propagator.Vinv @ V0
            self.readout_eig = readout @ propagator.V
        else:
            self.V0 = V0
            self._cache = {}

    def _exp(self, dt):
        if dt not in self._cache:
            self._cache[dt] = sla.expm(dt * self.P.M)
        return self._cache[dt]

    def start(self):
        if self.P.method == "eig":
            return 0.0
        return (0.0, self.V0)

    def advance(self, state, dt):
        if self.P.method == "eig":
            return state + dt
        a, U = state
        return (a + dt, self._exp(dt) @ U)

    def values(self, state, offsets):
        if self.P.method == "eig":
            ts = state + offsets
            phase = np.exp(ts[:, None] * self.P.eigvals[None, :])
            R = self.readout_eig @ (phase[:, :, None] * self.coeff[None])
            return self.observe(ts, R)
        a, U0 = state
        R = np.stack([self.readout @ (self._exp(float(tau)) @ U0) for tau in offsets])
        return self.observe(a + offsets, R)


def slowest_decay(spectrum, weights=None):
    """Smallest positive decay rate ``-Re(lambda)`` among decaying modes.

    Modes with ``weights`` below round-off relative to the largest weight are
    ignored.
    """
    spectrum = np.asarray(spectrum)
    thr = _zero_threshold(spectrum)
    keep = spectrum.real < -thr
    if weights is not None:
        weights = np.abs(np.asarray(weights))
        keep &= weights > 1e-13 * weights.max()
    if not keep.any():
        raise DivergentIntegralError("no decaying direction detected")
    return float(-spectrum.real[keep].max())
