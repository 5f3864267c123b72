"""Brute-force checks of reduced models against the full master equation.

Three probes:

* trajectories: ``Tr_B`` of the full evolution versus the reduced flow
  (:func:`compare_reduced`);
* spectra: slow eigenvalues of the full Liouvillian versus eigenvalues of
  the truncated reduced generator (:func:`slow_spectrum_compare`);
* scaling: the spectral defect over a sweep of ``g`` fitted on a log-log
  scale (:func:`scaling_study`).
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .elimination import reduce
from .errors import InvalidArgumentError, NoSeparationError, NumericalError
from .lindblad import BipartiteModel
from .operators import Propagator, partial_trace_B, unvectorize, vectorize

__all__ = [
    "random_density",
    "integrate_full",
    "reduced_trajectory",
    "compare_reduced",
    "slow_spectrum_compare",
    "scaling_study",
    "run_validation",
    "Comparison",
    "SpectralComparison",
    "ScalingFit",
    "ValidationReport",
    "SEPARATION_FACTOR",
]

log = logging.getLogger(__name__)

DENSITY_TOL = 1e-10
SEPARATION_FACTOR = 5.0
SLOPE_STDERR_MAX = 0.5


def random_density(dim, rng):
    """Full-rank random density matrix ``G G† / Tr(G G†)`` with complex Gaussian ``G``."""
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def _check_density(rho, tol=DENSITY_TOL):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidArgumentError(f"density operator must be square, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise InvalidArgumentError("density operator is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise InvalidArgumentError(f"density operator has trace {np.trace(rho).real:.12g}")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lo < -tol:
        raise InvalidArgumentError(f"density operator has negative eigenvalue {lo:.3g}")
    return rho


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise InvalidArgumentError("time grid must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(times)) or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise InvalidArgumentError("time grid must be finite, nonnegative and increasing")
    return times


def _evolve(L, rho0, times):
    """``rho(t) = exp(t L) rho0`` on a grid; stepwise on the Padé path."""
    P = L if isinstance(L, Propagator) else Propagator(L)
    v = vectorize(rho0)
    out = np.empty((len(times),) + rho0.shape, dtype=complex)
    if P.method == "eig":
        coeff = P.Vinv @ v
        for i, t in enumerate(times):
            out[i] = unvectorize(P.V @ (np.exp(t * P.eigvals) * coeff))
        return out
    prev = 0.0
    for i, t in enumerate(times):
        v = P(t - prev) @ v
        prev = t
        out[i] = unvectorize(v)
    return out


def integrate_full(model, rho0, times):
    """Exact evolution of the full bipartite master equation on a time grid.

    Parameters
    ----------
    model : BipartiteModel
    rho0 : (D, D) array_like
        Density operator on ``A ⊗ B``.
    times : (T,) array_like
        Increasing, nonnegative.

    Returns
    -------
    (T, D, D) complex array
    """
    rho0 = _check_density(rho0)
    D = model.dim_A * model.dim_B
    if rho0.shape != (D, D):
        raise InvalidArgumentError(f"rho0 has shape {rho0.shape}, model needs {(D, D)}")
    times = _check_times(times)
    traj = _evolve(model.full_generator(), rho0, times)
    drift = np.abs(np.trace(traj, axis1=1, axis2=2) - 1).max()
    if drift > DENSITY_TOL:
        raise NumericalError(f"full propagator lost trace: max |Tr rho - 1| = {drift:.2e}")
    return traj


def reduced_trajectory(generator, rho_s0, times):
    """Evolution of ``rho_s0`` under a reduced generator."""
    return _evolve(np.asarray(generator), np.asarray(rho_s0, dtype=complex), _check_times(times))


def _trace_norm(X):
    return float(np.linalg.svd(X, compute_uv=False).sum())


@dataclass
class Comparison:
    times: np.ndarray
    discrepancy: np.ndarray
    initial: str
    order: int

    @property
    def max_discrepancy(self):
        return float(self.discrepancy.max())


def compare_reduced(model, reduced, rho_s0, times, order=None, initial="manifold",
                    propagator=None):
    """Trace-norm gap between ``Tr_B`` of the full flow and the reduced flow.

    Parameters
    ----------
    initial : {"manifold", "product"}
        Start the full model at ``K(rho_s0)`` (the invariant-manifold lift
        up to ``order``) or at ``rho_s0 ⊗ rho_B``.
    propagator : Propagator, optional
        Precomputed propagator of ``model.full_generator()``.
    """
    order = reduced.max_order if order is None else order
    if not 0 <= order <= reduced.max_order:
        raise InvalidArgumentError(f"order {order} not available (max {reduced.max_order})")
    rho_s0 = np.asarray(rho_s0, dtype=complex)
    if rho_s0.shape != (model.dim_A, model.dim_A):
        raise InvalidArgumentError(f"rho_s0 has shape {rho_s0.shape}, expected dim {model.dim_A}")
    times = _check_times(times)
    if initial == "manifold":
        K = reduced.correction(order)
    elif initial == "product":
        K = reduced.correction(0)
    else:
        raise InvalidArgumentError(f"unknown initial condition {initial!r}")
    rho0 = unvectorize(K @ vectorize(rho_s0))
    full = _evolve(propagator or model.full_generator(), rho0, times)
    red = reduced_trajectory(reduced.generator(order), rho_s0, times)
    gaps = np.array(
        [
            _trace_norm(partial_trace_B(full[i], model.dim_A, model.dim_B) - red[i])
            for i in range(len(times))
        ]
    )
    return Comparison(times, gaps, initial, order)


@dataclass
class SpectralComparison:
    """Slow eigenvalues of the full model paired with reduced eigenvalues.

    ``pairs`` rows are ``(full_eigenvalue, reduced_eigenvalue, distance)``.
    """

    full_slow: np.ndarray
    reduced: np.ndarray
    pairs: list
    max_distance: float
    separation: float


def _pair_greedy(a, b):
    """Match ``a[i]`` to ``b[j]`` by increasing distance, each used once."""
    d = np.abs(a[:, None] - b[None, :])
    order = np.dstack(np.unravel_index(np.argsort(d, axis=None, kind="stable"), d.shape))[0]
    used_a, used_b, pairs = set(), set(), []
    for i, j in order:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((a[i], b[j], float(d[i, j])))
        if len(pairs) == min(len(a), len(b)):
            break
    pairs.sort(key=lambda p: (-p[0].real, p[0].imag))
    return pairs


def slow_spectrum(model, full_eigs=None):
    """The ``d_A**2`` eigenvalues of the full generator closest to the imaginary axis.

    Returns
    -------
    slow : complex array
    separation : float
        Ratio of the slowest fast decay rate to the fastest slow decay rate
        (``inf`` when every slow eigenvalue is purely imaginary).
    """
    ev = np.linalg.eigvals(model.full_generator()) if full_eigs is None else full_eigs
    idx = np.argsort(-ev.real, kind="stable")
    n_slow = model.dim_A**2
    slow, fast = ev[idx[:n_slow]], ev[idx[n_slow:]]
    slow_rate = max(-slow.real.min(), 0.0)
    fast_rate = -fast.real.max() if fast.size else np.inf
    if slow_rate == 0.0:
        separation = np.inf if fast_rate > 0 else 0.0
    else:
        separation = fast_rate / slow_rate
    return slow, separation


def slow_spectrum_compare(model, reduced, order=None, full_eigs=None):
    """Pair slow eigenvalues of the full generator with the reduced ones.

    Raises
    ------
    NoSeparationError
        When the slowest fast mode decays less than ``SEPARATION_FACTOR``
        times faster than the fastest slow mode.
    """
    order = reduced.max_order if order is None else order
    slow, sep = slow_spectrum(model, full_eigs)
    if sep < SEPARATION_FACTOR:
        raise NoSeparationError(
            f"slow block not separated: fast/slow decay ratio {sep:.3g} < {SEPARATION_FACTOR:g}"
        )
    red = np.linalg.eigvals(reduced.generator(order))
    pairs = _pair_greedy(slow, red)
    return SpectralComparison(slow, red, pairs, max(p[2] for p in pairs), float(sep))


@dataclass
class ScalingFit:
    order: int
    g_values: np.ndarray
    defects: np.ndarray
    slope: float
    intercept: float
    stderr: float
    warnings: list = field(default_factory=list)


def _as_family(model_family):
    if isinstance(model_family, BipartiteModel):
        return model_family.with_g
    if callable(model_family):
        return model_family
    raise InvalidArgumentError("model_family must be a BipartiteModel or a callable g -> model")


def _fit_loglog(order, g, defects):
    warns = []
    keep = defects > 0
    if not keep.all():
        warns.append(f"{int((~keep).sum())} zero defects excluded from the fit")
    g, defects = g[keep], defects[keep]
    if g.size < 2:
        raise NumericalError("fewer than two nonzero defects; cannot fit a slope")
    fit = stats.linregress(np.log(g), np.log(defects))
    if fit.stderr > SLOPE_STDERR_MAX:
        warns.append(f"inconclusive fit: slope stderr {fit.stderr:.2f} > {SLOPE_STDERR_MAX}")
    return ScalingFit(order, g, defects, float(fit.slope), float(fit.intercept),
                      float(fit.stderr), warns)


def _defects_at(model, orders, method):
    reduced = reduce(model, max(orders), method=method)
    full = np.linalg.eigvals(model.full_generator())
    return [slow_spectrum_compare(model, reduced, k, full).max_distance for k in orders], reduced


def _pool_size(threads):
    if threads is None:
        threads = int(os.environ.get("ADIAEL_THREADS", "1") or 1)
    if threads < 1:
        raise InvalidArgumentError(f"thread count must be >= 1, got {threads}")
    return threads


def scaling_study(model_family, g_values, order, method="direct", threads=None):
    """Log-log slope of the spectral generator defect against ``g``.

    ``g_values <= 0`` are dropped before fitting; at least five positive
    values spanning a decade are required.  ``order`` may be an int or a
    sequence of ints, in which case a list of fits is returned (one
    brute-force eigensolve per ``g`` serves all orders).
    """
    orders = [order] if np.isscalar(order) else list(order)
    g = np.asarray(g_values, dtype=float)
    g = np.unique(g[g > 0])
    if g.size < 5 or g.max() < 10 * g.min():
        raise InvalidArgumentError(
            "scaling fit needs at least 5 positive g values spanning one decade"
        )
    family = _as_family(model_family)
    with ThreadPoolExecutor(_pool_size(threads)) as pool:
        results = list(pool.map(lambda x: _defects_at(family(x), orders, method)[0], g))
    defects = np.array(results)
    fits = [_fit_loglog(k, g, defects[:, i]) for i, k in enumerate(orders)]
    for f in fits:
        for w in f.warnings:
            log.warning("order %d: %s", f.order, w)
    return fits[0] if np.isscalar(order) else fits


@dataclass
class ValidationReport:
    """Per-run discrepancy metrics, scaling fits and spectral pairings."""

    model: dict
    seed: int
    order: int
    times: list
    rows: list = field(default_factory=list)
    fits: list = field(default_factory=list)
    spectra: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def summary(self):
        out = asdict(self)
        out.pop("rows")
        return out


def _model_summary(model):
    return {
        "name": model.name,
        "dim_A": model.dim_A,
        "dim_B": model.dim_B,
        "n_couplings": len(model.couplings),
        "fock_cutoff": model.fock_cutoff,
        "epsilon": float(model.epsilon),
    }


def run_validation(model_family, g_values, times, seed=0, order=2, method="direct", threads=None):
    """Trajectory, spectral and (with >= 5 g values) scaling checks over a g sweep.

    ``rows`` holds one dict per ``(g, t)`` with the manifold-initialized and
    product-initialized trace-norm discrepancies.  The random initial
    state is drawn once from ``numpy.random.default_rng(seed)``.
    """
    family = _as_family(model_family)
    times = _check_times(times)
    g_values = [float(x) for x in g_values]
    if not g_values:
        raise InvalidArgumentError("empty g sweep")
    base = family(g_values[0])
    rho_s0 = random_density(base.dim_A, np.random.default_rng(seed))

    fit_orders = sorted({0, order})

    def point(g):
        model = family(g)
        reduced = reduce(model, order, method=method)
        P = Propagator(model.full_generator())
        man = compare_reduced(model, reduced, rho_s0, times, order, "manifold", P)
        prod = compare_reduced(model, reduced, rho_s0, times, order, "product", P)
        defects = None
        try:
            specs = {k: slow_spectrum_compare(model, reduced, k, P.spectrum) for k in fit_orders}
            spec = specs[order]
            defects = [specs[k].max_distance for k in fit_orders]
            spec_row = {"g": g, "max_distance": spec.max_distance,
                        "separation": _finite_or_none(spec.separation),
                        "pairs": [[_c(a), _c(b), d] for a, b, d in spec.pairs]}
        except NoSeparationError as exc:
            spec_row = {"g": g, "error": str(exc)}
        rows = [
            {"g": g, "t": float(t), "discrepancy_manifold": float(a),
             "discrepancy_product": float(b)}
            for t, a, b in zip(times, man.discrepancy, prod.discrepancy)
        ]
        return rows, spec_row, defects, reduced.warnings

    with ThreadPoolExecutor(_pool_size(threads)) as pool:
        results = list(pool.map(point, g_values))

    report = ValidationReport(_model_summary(base), seed, order, [float(t) for t in times])
    for rows, spec_row, _, warns in results:
        report.rows.extend(rows)
        report.spectra.append(spec_row)
        report.warnings.extend(w for w in warns if w not in report.warnings)

    usable = [(g, d) for g, (_, _, d, _) in zip(g_values, results) if g > 0 and d is not None]
    gs = np.array([g for g, _ in usable])
    if gs.size >= 5 and gs.max() >= 10 * gs.min():
        defects = np.array([d for _, d in usable])
        for i, k in enumerate(fit_orders):
            fit = _fit_loglog(k, gs, defects[:, i])
            report.fits.append({"order": fit.order, "slope": fit.slope,
                                "intercept": fit.intercept, "stderr": fit.stderr,
                                "g": fit.g_values.tolist(), "defect": fit.defects.tolist()})
            report.warnings.extend(f"order {k}: {w}" for w in fit.warnings)
    else:
        report.warnings.append(
            "scaling fit skipped: needs 5 positive, separated g values spanning a decade"
        )
    return report


def _finite_or_none(x):
    return float(x) if np.isfinite(x) else None


def _c(z):
    return [float(np.real(z)), float(np.imag(z))]
