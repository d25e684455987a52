"""Wasserstein barycenters of Gaussian families by Riemannian gradient descent.

The barycenter functional ``F(S) = (1/2) sum_i w_i W2^2(S, S_i)`` is
geodesically 1-smooth on the Bures-Wasserstein manifold, which lets plain
gradient descent use unit step size: one iteration averages the transport
maps onto the atoms and pushes the current iterate through that average.
The stochastic variant replaces the average by a single sampled atom with a
decaying step.  Iterates never leave the eigenvalue hull of the support.
"""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    GaussianMeasure,
    NumericalError,
    SpdMatrix,
    TangentMap,
    symmetrize,
    transport_and_w2sq,
    w2_squared,
)

# Objective values may wobble at this absolute level near a plateau without
# counting as a descent violation.
DESCENT_SLACK = 1e-10

THREADS_ENV_VAR = "BW_THREADS"


# Below this many scalar operations per sweep the dispatch overhead of a
# thread pool exceeds the eigendecomposition work it parallelizes.
_PARALLEL_FLOP_FLOOR = 2_000_000

_pool = None
_pool_workers = 0


def _thread_count():
    """Worker cap from ``BW_THREADS``; all cores when unset."""
    raw = os.environ.get(THREADS_ENV_VAR, "")
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)


def _shared_pool(workers):
    global _pool, _pool_workers
    if _pool is None or _pool_workers != workers:
        if _pool is not None:
            _pool.shutdown(wait=False)
        _pool = ThreadPoolExecutor(max_workers=workers)
        _pool_workers = workers
    return _pool


def map_over_atoms(fn, atoms):
    """Apply ``fn`` to each atom, preserving input order in the result.

    Parallelism is capped by the ``BW_THREADS`` environment variable (all
    cores when unset, serial when set to 1).  Sweeps too small to benefit
    run serially unless a higher count was requested explicitly.  Results
    are always collected and reduced in ascending atom order, so outputs
    are bitwise identical for every thread count.
    """
    workers = _thread_count()
    if workers == 1 or len(atoms) <= 1:
        return [fn(a) for a in atoms]
    if not os.environ.get(THREADS_ENV_VAR, ""):
        dim = atoms[0].dim
        if len(atoms) * dim ** 3 < _PARALLEL_FLOP_FLOOR:
            return [fn(a) for a in atoms]
    return list(_shared_pool(workers).map(fn, atoms))


def _as_measure(a):
    if isinstance(a, GaussianMeasure):
        return a
    cov = a if isinstance(a, SpdMatrix) else SpdMatrix(a)
    return GaussianMeasure(np.zeros(cov.dim), cov)


class DiscreteDistribution:
    """Finitely supported distribution over Gaussian measures.

    Parameters
    ----------
    atoms : sequence of GaussianMeasure or SpdMatrix
        Support points; SpdMatrix entries are wrapped as centered Gaussians.
    weights : array_like or None
        Probability weights.  Defaults to uniform.  Must be positive and
        sum to 1 within 1e-12.
    """

    __slots__ = ("atoms", "weights")

    def __init__(self, atoms, weights=None):
        atoms = [_as_measure(a) for a in atoms]
        if not atoms:
            raise ValueError("distribution needs at least one atom")
        d = atoms[0].dim
        for a in atoms:
            if a.dim != d:
                raise ValueError(f"atom dimension mismatch: {a.dim} vs {d}")
        if weights is None:
            weights = np.full(len(atoms), 1.0 / len(atoms))
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if weights.shape[0] != len(atoms):
            raise ValueError("one weight per atom required")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be strictly positive")
        if abs(float(np.sum(weights)) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {float(np.sum(weights)):.17g}")
        weights.flags.writeable = False
        self.atoms = tuple(atoms)
        self.weights = weights

    @classmethod
    def from_covariances(cls, covs, weights=None):
        return cls([c if isinstance(c, SpdMatrix) else SpdMatrix(c) for c in covs],
                   weights)

    @property
    def dim(self):
        return self.atoms[0].dim

    @property
    def size(self):
        return len(self.atoms)

    @property
    def covs(self):
        return [a.cov for a in self.atoms]

    @property
    def means(self):
        return np.stack([a.mean for a in self.atoms])

    def is_centered(self, tol=0.0):
        return bool(np.max(np.abs(self.means)) <= tol)

    def spectral_box(self):
        """Smallest interval containing every atom's spectrum."""
        lo = min(a.cov.lambda_min for a in self.atoms)
        hi = max(a.cov.lambda_max for a in self.atoms)
        return lo, hi

    def __len__(self):
        return len(self.atoms)

    def __repr__(self):
        return f"DiscreteDistribution(size={self.size}, dim={self.dim})"


@dataclass(frozen=True)
class ConditionDiagnostics:
    """Conditioning summary of a distribution's support.

    ``kappa`` is the global eigenvalue ratio over the union of spectra,
    ``kappa_star`` the worst single-atom ratio, and ``kappa_bar`` the
    squared ratio of the averaged extreme square roots.  They always
    satisfy ``kappa_bar <= kappa_star <= kappa``.
    """

    kappa: float
    kappa_star: float
    kappa_bar: float
    lambda_min: float
    lambda_max: float


def condition_diagnostics(p):
    lo, hi = p.spectral_box()
    kappa = hi / lo
    kappa_star = max(a.cov.lambda_max / a.cov.lambda_min for a in p.atoms)
    w = p.weights
    num = float(np.sum(w * np.array([np.sqrt(a.cov.lambda_max) for a in p.atoms])))
    den = float(np.sum(w * np.array([np.sqrt(a.cov.lambda_min) for a in p.atoms])))
    kappa_bar = (num / den) ** 2
    return ConditionDiagnostics(kappa=kappa, kappa_star=kappa_star,
                                kappa_bar=kappa_bar, lambda_min=lo, lambda_max=hi)


class StepSchedule:
    """Step size rule for the stochastic solver.

    ``unit`` always returns 1 (the deterministic step), ``fixed(eta)`` a
    constant, and ``inverse_t(theta)`` the Robbins-Monro style decay
    ``theta / (t + theta)``, which stays at most 1 and decays like 1/t.
    """

    __slots__ = ("kind", "param")

    def __init__(self, kind, param=None):
        if kind not in ("unit", "inverse_t", "fixed"):
            raise ValueError(f"unknown schedule kind {kind!r}")
        if kind == "inverse_t" and (param is None or param <= 0):
            raise ValueError("inverse_t schedule needs theta > 0")
        if kind == "fixed" and (param is None or not 0 < param <= 1):
            raise ValueError("fixed schedule needs eta in (0, 1]")
        self.kind = kind
        self.param = param

    @classmethod
    def unit(cls):
        return cls("unit")

    @classmethod
    def inverse_t(cls, theta):
        return cls("inverse_t", float(theta))

    @classmethod
    def fixed(cls, eta):
        return cls("fixed", float(eta))

    def eta(self, t):
        """Step size at 1-based iteration ``t``."""
        if self.kind == "unit":
            return 1.0
        if self.kind == "fixed":
            return self.param
        return self.param / (t + self.param)

    def __repr__(self):
        if self.kind == "unit":
            return "StepSchedule.unit()"
        return f"StepSchedule.{self.kind}({self.param!r})"


def default_sgd_schedule(p):
    """Default decay ``theta / (t + theta)`` with ``theta = ceil(8 kappa^3)``."""
    kappa = condition_diagnostics(p).kappa
    return StepSchedule.inverse_t(float(np.ceil(8.0 * kappa ** 3)))


@dataclass(frozen=True)
class SolverConfig:
    """Iteration budget, gradient-norm stopping threshold, seed, schedule."""

    max_iters: int = 1000
    grad_tol: float = 1e-10
    rng_seed: int = 0
    schedule: StepSchedule | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.grad_tol < 0.0:
            raise ValueError("grad_tol must be nonnegative")


@dataclass
class TraceRecord:
    """One iterate's diagnostics."""

    iteration: int
    objective: float
    grad_norm_sq: float
    lambda_min: float
    lambda_max: float
    w2sq_to_ref: float = float("nan")
    wall_ns: int = 0
    objective_raw: float | None = None


@dataclass
class ConvergenceTrace:
    """Per-iteration records plus the reason the run stopped.

    ``stop_reason`` is ``"gradient_tolerance"`` when the gradient-norm test
    fired and ``"max_iterations"`` when the budget ran out.  The trace
    always contains one record per visited iterate, including the initial
    point, so its length is the number of iterations performed plus one.
    """

    records: list = field(default_factory=list)
    stop_reason: str = "max_iterations"

    @property
    def converged(self):
        return self.stop_reason == "gradient_tolerance"

    @property
    def iterations(self):
        return self.records[-1].iteration if self.records else 0

    def objectives(self):
        return np.array([r.objective for r in self.records])

    def grad_norms_sq(self):
        return np.array([r.grad_norm_sq for r in self.records])

    def append(self, record):
        self.records.append(record)

    def __len__(self):
        return len(self.records)


def mean_transport(sigma, p):
    """Weighted average of transport maps onto the atoms, plus the objective.

    Returns
    -------
    tbar : ndarray
        ``sum_i w_i T_{sigma -> S_i}``, symmetric.
    objective : float
        ``(1/2) sum_i w_i W2^2(sigma, S_i)`` over covariances only.
    """
    results = map_over_atoms(lambda a: transport_and_w2sq(sigma, a.cov), p.atoms)
    stacked = np.stack([t for t, _ in results])
    # Fixed ascending-index reduction keeps runs bitwise reproducible.
    tbar = symmetrize(np.tensordot(p.weights, stacked, axes=1))
    obj = 0.5 * float(np.dot(p.weights, np.array([d for _, d in results])))
    return tbar, obj


def bary_objective(sigma, p):
    """Half the weighted average squared distance from ``sigma`` to the atoms."""
    _, obj = mean_transport(sigma, p)
    return obj


def bary_gradient(sigma, p):
    """Riemannian gradient ``I - sum_i w_i T_{sigma -> S_i}`` of the objective."""
    tbar, _ = mean_transport(sigma, p)
    return TangentMap(np.eye(sigma.dim) - tbar)


def grad_norm(sigma, grad):
    ge = grad.entries if isinstance(grad, TangentMap) else grad
    val = float(np.einsum("ij,jk,ki->", ge, sigma.entries, ge))
    return float(np.sqrt(max(val, 0.0)))


def bary_gd_step(sigma, p):
    """One unit-step gradient descent update.

    Averages the transport maps onto the atoms and conjugates the iterate by
    that average.  The update's spectrum stays inside the support's
    eigenvalue hull regardless of where ``sigma`` sits.
    """
    tbar, _ = mean_transport(sigma, p)
    return SpdMatrix(symmetrize(tbar @ sigma.entries @ tbar))


def bary_sgd_step(sigma, atom_cov, eta):
    """One stochastic update toward a sampled atom with step ``eta``.

    Moves along the geodesic from ``sigma`` toward the sampled covariance:
    the map ``(1 - eta) I + eta T`` is applied on both sides.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"step size must be in [0, 1], got {eta}")
    t, _ = transport_and_w2sq(sigma, atom_cov)
    s = (1.0 - eta) * np.eye(sigma.dim) + eta * t
    return SpdMatrix(symmetrize(s @ sigma.entries @ s))


def _require_centered(p, solver):
    if not p.is_centered():
        raise ValueError(
            f"{solver} operates on centered atoms; split the means off first "
            "(see noncentered_split)"
        )


def _default_init(p, sigma0):
    if sigma0 is None:
        return p.atoms[0].cov
    return sigma0


def _ref_w2sq(sigma, reference):
    if reference is None:
        return float("nan")
    return w2_squared(sigma, reference)


def run_bary_gd(p, sigma0=None, config=None, reference=None, on_record=None):
    """Riemannian gradient descent for the Gaussian barycenter.

    Parameters
    ----------
    p : DiscreteDistribution
        Centered atoms.
    sigma0 : SpdMatrix or None
        Initial point; defaults to the first atom's covariance.
    config : SolverConfig or None
    reference : SpdMatrix or None
        When given, each record carries the squared distance to it.
    on_record : callable or None
        Called with each TraceRecord as soon as it is produced.

    Returns
    -------
    (SpdMatrix, ConvergenceTrace)

    The objective is non-increasing along the trace; an increase beyond an
    absolute 1e-10 slack raises :class:`NumericalError` with the iteration
    attached.
    """
    config = config or SolverConfig()
    _require_centered(p, "run_bary_gd")
    sigma = _default_init(p, sigma0)
    trace = ConvergenceTrace()
    prev_obj = None
    tick = time.perf_counter_ns()
    for it in range(config.max_iters + 1):
        try:
            tbar, obj = mean_transport(sigma, p)
            g = np.eye(sigma.dim) - tbar
            gnorm = grad_norm(sigma, g)
        except NumericalError as err:
            err.iteration = it
            raise
        now = time.perf_counter_ns()
        rec = TraceRecord(iteration=it, objective=obj, grad_norm_sq=gnorm ** 2,
                          lambda_min=sigma.lambda_min, lambda_max=sigma.lambda_max,
                          w2sq_to_ref=_ref_w2sq(sigma, reference),
                          wall_ns=now - tick)
        tick = now
        trace.append(rec)
        if on_record is not None:
            on_record(rec)
        if prev_obj is not None and obj > prev_obj + DESCENT_SLACK:
            raise NumericalError(
                f"objective increased from {prev_obj!r} to {obj!r}",
                iteration=it)
        prev_obj = obj
        if gnorm <= config.grad_tol:
            trace.stop_reason = "gradient_tolerance"
            break
        if it == config.max_iters:
            break
        try:
            sigma = SpdMatrix(symmetrize(tbar @ sigma.entries @ tbar))
        except NumericalError as err:
            err.iteration = it + 1
            raise
    return sigma, trace


def run_bary_sgd(p, sigma0=None, config=None, reference=None, trace_stride=1,
                 on_record=None):
    """Stochastic gradient descent sampling one atom per iteration.

    Atoms are sampled by inverse transform of the weights from a
    counter-based generator keyed on ``config.rng_seed``, so a given seed
    reproduces the exact trace regardless of thread count.  Full
    diagnostics (objective, gradient norm) are evaluated every
    ``trace_stride`` iterations and at the last one; the gradient-norm stop
    is checked only at those evaluations.
    """
    config = config or SolverConfig()
    _require_centered(p, "run_bary_sgd")
    if trace_stride < 1:
        raise ValueError("trace_stride must be at least 1")
    schedule = config.schedule or default_sgd_schedule(p)
    sigma = _default_init(p, sigma0)
    rng = np.random.Generator(np.random.Philox(key=config.rng_seed))
    cum = np.cumsum(p.weights)
    trace = ConvergenceTrace()

    def record(it, tick):
        tbar, obj = mean_transport(sigma, p)
        gnorm = grad_norm(sigma, np.eye(sigma.dim) - tbar)
        now = time.perf_counter_ns()
        rec = TraceRecord(iteration=it, objective=obj, grad_norm_sq=gnorm ** 2,
                          lambda_min=sigma.lambda_min, lambda_max=sigma.lambda_max,
                          w2sq_to_ref=_ref_w2sq(sigma, reference),
                          wall_ns=now - tick)
        trace.append(rec)
        if on_record is not None:
            on_record(rec)
        return gnorm, now

    tick = time.perf_counter_ns()
    gnorm, tick = record(0, tick)
    if gnorm <= config.grad_tol:
        trace.stop_reason = "gradient_tolerance"
        return sigma, trace
    for it in range(1, config.max_iters + 1):
        u = rng.random()
        idx = int(np.searchsorted(cum, u, side="right"))
        idx = min(idx, p.size - 1)
        eta = schedule.eta(it)
        try:
            sigma = bary_sgd_step(sigma, p.atoms[idx].cov, eta)
        except NumericalError as err:
            err.iteration = it
            raise
        if it % trace_stride == 0 or it == config.max_iters:
            gnorm, tick = record(it, tick)
            if gnorm <= config.grad_tol:
                trace.stop_reason = "gradient_tolerance"
                break
    return sigma, trace


def variance_of(p, sigma_star):
    """Average squared distance from ``sigma_star`` to the atoms (twice the objective)."""
    return 2.0 * bary_objective(sigma_star, p)


def noncentered_split(p):
    """Split a distribution into its mean part and a centered copy.

    The squared distance between Gaussians separates into a squared mean
    difference plus the covariance term, so the barycenter of the original
    distribution is the weighted mean vector paired with the barycenter of
    the centered copy.

    Returns
    -------
    (ndarray, DiscreteDistribution)
        The weighted average of the atom means, and the same atoms with
        zero means.
    """
    mbar = np.tensordot(p.weights, p.means, axes=1)
    centered = DiscreteDistribution(
        [GaussianMeasure(np.zeros(p.dim), a.cov) for a in p.atoms], p.weights)
    return mbar, centered


def reattach_mean(sigma, mean):
    """Pair a solved covariance with a mean vector."""
    return GaussianMeasure(mean, sigma)
