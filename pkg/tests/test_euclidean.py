"""Projected Euclidean baselines over a spectral box."""

import numpy as np
import pytest

from conftest import central_difference, philox, random_direction, random_instance, \
    random_spd
from bwopt import (
    DiscreteDistribution,
    EuclideanConfig,
    SolverConfig,
    SpdMatrix,
    bary_gradient,
    bary_objective,
    egd_step_size,
    esgd_step_size,
    euclid_gradient,
    hessian_quadratic_form_bounds,
    run_bary_gd,
    run_egd,
    run_esgd,
    w2_squared,
)


def test_step_size_formulas():
    assert egd_step_size(1.0, 2.0) == pytest.approx(0.5)
    assert egd_step_size(0.5, 1.0) == pytest.approx(0.25)
    assert esgd_step_size(0, 1.0, 2.0) == pytest.approx(128.0)
    assert esgd_step_size(7, 1.0, 2.0) == pytest.approx(16.0)


def test_euclid_gradient_is_half_the_riemannian_one():
    rng = philox(80)
    for _ in range(20):
        p = random_instance(rng, 5, 4)
        sigma = random_spd(rng, 4)
        half = euclid_gradient(sigma, p)
        full = bary_gradient(sigma, p).entries
        assert np.linalg.norm(full - 2.0 * half) <= 1e-9


def test_euclid_gradient_matches_finite_differences():
    rng = philox(81)
    for _ in range(10):
        p = random_instance(rng, 4, 3)
        sigma = random_spd(rng, 3)
        y = random_direction(rng, 3)
        analytic = float(np.sum(euclid_gradient(sigma, p) * y))
        fd = central_difference(lambda s: bary_objective(s, p), sigma, y, 1e-5)
        assert fd == pytest.approx(analytic, rel=1e-5, abs=1e-9)


def test_run_egd_requires_config_and_in_box_atoms():
    rng = philox(82)
    p = random_instance(rng, 3, 3, 0.5, 2.0)
    with pytest.raises(ValueError):
        run_egd(p)
    with pytest.raises(ValueError, match="box"):
        run_egd(p, config=EuclideanConfig(lambda_min=1.0, lambda_max=2.0))


def test_run_egd_iterates_stay_in_box_exactly():
    rng = philox(83)
    p = random_instance(rng, 5, 4, 1.0, 2.0)
    cfg = EuclideanConfig(lambda_min=1.0, lambda_max=2.0, max_iters=200)
    _, trace = run_egd(p, config=cfg)
    for rec in trace.records:
        assert rec.lambda_min >= 1.0 - 1e-12
        assert rec.lambda_max <= 2.0 + 1e-12


def test_run_egd_agrees_with_riemannian_solver():
    rng = philox(84)
    p = random_instance(rng, 4, 3, 1.0, 2.0)
    ref, _ = run_bary_gd(p, config=SolverConfig(grad_tol=1e-13))
    cfg = EuclideanConfig(lambda_min=1.0, lambda_max=2.0, max_iters=4000,
                          step_override=0.9)
    final, trace = run_egd(p, config=cfg)
    assert np.sqrt(w2_squared(final, ref)) <= 1e-6


def test_run_egd_single_atom_stops_on_gradient_floor():
    rng = philox(85)
    a = random_spd(rng, 3, 1.0, 2.0)
    p = DiscreteDistribution.from_covariances([a])
    cfg = EuclideanConfig(lambda_min=1.0, lambda_max=2.0, max_iters=3000,
                          step_override=0.9)
    final, trace = run_egd(p, config=cfg)
    assert trace.stop_reason == "gradient_tolerance"
    assert np.linalg.norm(final.entries - a.entries) <= 1e-9


def test_run_egd_frobenius_contraction_toward_optimum():
    """With the theoretical step the squared Frobenius error decays at
    least as fast as exp(-n / kappa^7); the solver's final iterate matches
    a manual replay of the same update rule."""
    from bwopt import project_spectrum

    rng = philox(86)
    lo, hi = 1.0, 2.0
    p = random_instance(rng, 4, 3, lo, hi)
    ref, _ = run_bary_gd(p, config=SolverConfig(grad_tol=1e-13))
    eta = egd_step_size(lo, hi)
    kappa = hi / lo
    n_steps = 300
    sigma = p.atoms[0].cov
    err0 = np.linalg.norm(sigma.entries - ref.entries) ** 2
    for n in range(1, n_steps + 1):
        sigma = project_spectrum(sigma.entries - eta * euclid_gradient(sigma, p),
                                 lo, hi)
        err = np.linalg.norm(sigma.entries - ref.entries) ** 2
        assert err <= np.exp(-n / kappa ** 7) * err0 + 1e-12
    cfg = EuclideanConfig(lambda_min=lo, lambda_max=hi, max_iters=n_steps)
    final, _ = run_egd(p, config=cfg)
    assert np.allclose(final.entries, sigma.entries, atol=1e-12)


def test_run_esgd_determinism_and_projection():
    rng = philox(87)
    p = random_instance(rng, 5, 3, 1.0, 2.0)
    cfg = EuclideanConfig(lambda_min=1.0, lambda_max=2.0, max_iters=150,
                          rng_seed=3)
    f1, t1 = run_esgd(p, config=cfg)
    f2, t2 = run_esgd(p, config=cfg)
    assert np.array_equal(f1.entries, f2.entries)
    assert np.array_equal(t1.objectives(), t2.objectives())
    for rec in t1.records:
        assert rec.lambda_min >= 1.0 - 1e-12
        assert rec.lambda_max <= 2.0 + 1e-12


def test_run_esgd_trace_stride():
    rng = philox(88)
    p = random_instance(rng, 4, 3, 1.0, 2.0)
    cfg = EuclideanConfig(lambda_min=1.0, lambda_max=2.0, max_iters=90)
    _, trace = run_esgd(p, config=cfg, trace_stride=30)
    assert [r.iteration for r in trace.records] == [0, 30, 60, 90]


def test_hessian_quadratic_form_at_identity():
    """Point mass at I: the objective is locally h^2 |Y|_F^2 / 8, so the
    normalized quadratic form is 1/4."""
    p = DiscreteDistribution.from_covariances([np.eye(3)])
    rng = philox(89)
    y = random_direction(rng, 3)
    val = hessian_quadratic_form_bounds(SpdMatrix.identity(3), p, y)
    assert val == pytest.approx(0.25, rel=1e-4)


def test_hessian_quadratic_form_within_box_bounds():
    rng = philox(90)
    lo, hi = 0.8, 1.6
    p = random_instance(rng, 5, 3, lo, hi)
    for _ in range(10):
        sigma = random_spd(rng, 3, lo, hi)
        y = random_direction(rng, 3)
        val = hessian_quadratic_form_bounds(sigma, p, y)
        assert lo ** 3 / (4.0 * hi ** 4) - 1e-6 <= val \
            <= hi ** 3 / (4.0 * lo ** 4) + 1e-6


def test_euclidean_config_validation():
    with pytest.raises(ValueError):
        EuclideanConfig(lambda_min=0.0, lambda_max=1.0)
    with pytest.raises(ValueError):
        EuclideanConfig(lambda_min=2.0, lambda_max=1.0)
    with pytest.raises(ValueError):
        EuclideanConfig(lambda_min=1.0, lambda_max=2.0, step_override=-0.1)
