"""Euclidean projected gradient baselines for the Gaussian barycenter.

Viewed as a function of the covariance matrix in the Frobenius geometry,
the barycenter objective is strongly convex and smooth on any spectral box
``K = {alpha I <= S <= beta I}``, with constants that degrade polynomially
in ``beta / alpha``.  Projected gradient descent and its stochastic
variant converge inside the box, but their steps and rates carry
condition-number powers that the Riemannian methods avoid; they exist here
as the comparison point.
"""

import time
from dataclasses import dataclass

import numpy as np

from .barycenter import (
    ConvergenceTrace,
    TraceRecord,
    _default_init,
    _ref_w2sq,
    _require_centered,
    bary_objective,
    mean_transport,
)
from .geometry import (
    NumericalError,
    SpdMatrix,
    project_spectrum,
    symmetrize,
    symmetrize_checked,
    transport_and_w2sq,
)

# Early-exit floor on the Frobenius gradient norm for the deterministic
# solver; config carries no gradient tolerance of its own.
EGD_GRAD_FLOOR = 1e-13


@dataclass(frozen=True)
class EuclideanConfig:
    """Spectral box, budget, seed, and optional hand-tuned step size.

    The theoretical step sizes are conservative (the deterministic one
    especially), so ``step_override`` replaces them when supplied.
    """

    lambda_min: float
    lambda_max: float
    max_iters: int = 1000
    rng_seed: int = 0
    step_override: float | None = None

    def __post_init__(self):
        if not 0.0 < self.lambda_min <= self.lambda_max:
            raise ValueError("need 0 < lambda_min <= lambda_max")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_override is not None and self.step_override <= 0.0:
            raise ValueError("step_override must be positive")


def egd_step_size(lambda_min, lambda_max):
    """Theoretical deterministic step ``4 lambda_min^4 / lambda_max^3``."""
    return 4.0 * lambda_min ** 4 / lambda_max ** 3


def esgd_step_size(t, lambda_min, lambda_max):
    """Decaying stochastic step ``8 lambda_max^4 / (lambda_min^3 (t + 1))`` at 1-based step t."""
    return 8.0 * lambda_max ** 4 / (lambda_min ** 3 * (t + 1.0))


def euclid_gradient(sigma, p):
    """Euclidean gradient ``(I - sum_i w_i GM(S_i, sigma^{-1})) / 2``.

    The geometric means coincide with the transport maps onto the atoms,
    so this is exactly half the Riemannian gradient.

    Returns
    -------
    ndarray, shape (d, d)
        Symmetric matrix.
    """
    tbar, _ = mean_transport(sigma, p)
    return 0.5 * (np.eye(sigma.dim) - tbar)


def _check_in_box(p, lo, hi, slack=1e-12):
    blo, bhi = p.spectral_box()
    scale = max(abs(hi), 1.0)
    if blo < lo - slack * scale or bhi > hi + slack * scale:
        raise ValueError(
            f"atom spectra [{blo:.6e}, {bhi:.6e}] exceed the box [{lo}, {hi}]"
        )


def run_egd(p, sigma0=None, config=None, reference=None, on_record=None):
    """Projected Euclidean gradient descent over the spectral box.

    Each update subtracts ``eta`` times the Euclidean gradient and projects
    the eigenvalues back into ``[lambda_min, lambda_max]``, so every
    iterate sits in the box exactly.  The default step is the theoretical
    one; supply ``step_override`` to hand-tune.  The run stops early when
    the Frobenius gradient norm falls below 1e-13.

    Returns
    -------
    (SpdMatrix, ConvergenceTrace)
    """
    if config is None:
        raise ValueError("run_egd requires a EuclideanConfig")
    _require_centered(p, "run_egd")
    lo, hi = config.lambda_min, config.lambda_max
    _check_in_box(p, lo, hi)
    eta = config.step_override or egd_step_size(lo, hi)
    sigma = _default_init(p, sigma0)
    if sigma.lambda_min < lo - 1e-12 * max(hi, 1.0) or \
            sigma.lambda_max > hi + 1e-12 * max(hi, 1.0):
        raise ValueError(
            f"initial point spectrum [{sigma.lambda_min:.6e}, {sigma.lambda_max:.6e}] "
            f"outside the box [{lo}, {hi}]"
        )
    trace = ConvergenceTrace()
    tick = time.perf_counter_ns()
    for it in range(config.max_iters + 1):
        try:
            tbar, obj = mean_transport(sigma, p)
        except NumericalError as err:
            err.iteration = it
            raise
        df = 0.5 * (np.eye(sigma.dim) - tbar)
        gnorm = float(np.linalg.norm(df))
        now = time.perf_counter_ns()
        rec = TraceRecord(iteration=it, objective=obj, grad_norm_sq=gnorm ** 2,
                          lambda_min=sigma.lambda_min, lambda_max=sigma.lambda_max,
                          w2sq_to_ref=_ref_w2sq(sigma, reference),
                          wall_ns=now - tick)
        tick = now
        trace.append(rec)
        if on_record is not None:
            on_record(rec)
        if gnorm <= EGD_GRAD_FLOOR:
            trace.stop_reason = "gradient_tolerance"
            break
        if it == config.max_iters:
            break
        try:
            sigma = project_spectrum(sigma.entries - eta * df, lo, hi)
        except NumericalError as err:
            err.iteration = it + 1
            raise
    return sigma, trace


def run_esgd(p, sigma0=None, config=None, reference=None, trace_stride=1,
             on_record=None):
    """Projected Euclidean stochastic gradient descent.

    One atom is sampled per iteration (inverse transform of the weights
    from a counter-based generator, so traces are reproducible per seed)
    and the step decays like 1/t unless ``step_override`` fixes it.  Full
    diagnostics are evaluated every ``trace_stride`` iterations and at the
    final one.

    Returns
    -------
    (SpdMatrix, ConvergenceTrace)
    """
    if config is None:
        raise ValueError("run_esgd requires a EuclideanConfig")
    _require_centered(p, "run_esgd")
    if trace_stride < 1:
        raise ValueError("trace_stride must be at least 1")
    lo, hi = config.lambda_min, config.lambda_max
    _check_in_box(p, lo, hi)
    sigma = _default_init(p, sigma0)
    rng = np.random.Generator(np.random.Philox(key=config.rng_seed))
    cum = np.cumsum(p.weights)
    eye = np.eye(p.dim)
    trace = ConvergenceTrace()

    def record(it, tick):
        tbar, obj = mean_transport(sigma, p)
        gnorm = float(np.linalg.norm(0.5 * (eye - tbar)))
        now = time.perf_counter_ns()
        rec = TraceRecord(iteration=it, objective=obj, grad_norm_sq=gnorm ** 2,
                          lambda_min=sigma.lambda_min, lambda_max=sigma.lambda_max,
                          w2sq_to_ref=_ref_w2sq(sigma, reference),
                          wall_ns=now - tick)
        trace.append(rec)
        if on_record is not None:
            on_record(rec)
        return now

    tick = time.perf_counter_ns()
    tick = record(0, tick)
    for it in range(1, config.max_iters + 1):
        u = rng.random()
        idx = min(int(np.searchsorted(cum, u, side="right")), p.size - 1)
        eta = config.step_override or esgd_step_size(it, lo, hi)
        try:
            t, _ = transport_and_w2sq(sigma, p.atoms[idx].cov)
            sigma = project_spectrum(sigma.entries - eta * (eye - t), lo, hi)
        except NumericalError as err:
            err.iteration = it
            raise
        if it % trace_stride == 0 or it == config.max_iters:
            tick = record(it, tick)
    return sigma, trace


def hessian_quadratic_form_bounds(sigma, p, y, h=None):
    """Rayleigh quotient of the objective's Euclidean Hessian along ``y``.

    Estimated by a second-order central difference of the barycenter
    objective; for in-box inputs the value lands between
    ``alpha^3 / (4 beta^4)`` and ``beta^3 / (4 alpha^4)``.

    Parameters
    ----------
    sigma : SpdMatrix
    p : DiscreteDistribution
    y : array_like
        Nonzero symmetric direction.
    h : float or None
        Difference step; defaults to a small fraction of ``sigma``'s
        smallest eigenvalue so both probe points stay positive definite.

    Returns
    -------
    float
    """
    ye = symmetrize_checked(y, name="direction")
    fro = float(np.linalg.norm(ye))
    if fro == 0.0:
        raise ValueError("direction must be nonzero")
    ye = ye / fro
    if h is None:
        h = 1e-3 * sigma.lambda_min
    f0 = bary_objective(sigma, p)
    fp = bary_objective(SpdMatrix(symmetrize(sigma.entries + h * ye)), p)
    fm = bary_objective(SpdMatrix(symmetrize(sigma.entries - h * ye)), p)
    return (fp - 2.0 * f0 + fm) / (h * h)
