"""Barycenter objective, gradient, solvers, and conditioning diagnostics."""

import os

import numpy as np
import pytest

from conftest import central_difference, philox, random_direction, random_instance, \
    random_noncentered, random_spd
from bwopt import (
    DiscreteDistribution,
    GaussianMeasure,
    SolverConfig,
    SpdMatrix,
    StepSchedule,
    bary_gd_step,
    bary_gradient,
    bary_objective,
    bary_sgd_step,
    bures_exp,
    condition_diagnostics,
    default_sgd_schedule,
    grad_norm,
    mean_transport,
    noncentered_split,
    reattach_mean,
    run_bary_gd,
    run_bary_sgd,
    variance_of,
    w2_squared,
)
from bwopt.barycenter import THREADS_ENV_VAR, map_over_atoms


def one_d(*vals):
    return DiscreteDistribution.from_covariances(
        [np.array([[v]]) for v in vals])


def test_objective_zero_at_point_mass():
    rng = philox(30)
    a = random_spd(rng, 3)
    p = DiscreteDistribution.from_covariances([a])
    assert bary_objective(a, p) <= 1e-14


def test_objective_scalar_example():
    p = one_d(1.0, 9.0)
    sigma = SpdMatrix(np.array([[4.0]]))
    assert bary_objective(sigma, p) == pytest.approx(0.5, abs=1e-12)


def test_objective_matches_direct_summation():
    rng = philox(31)
    p = random_instance(rng, 8, 4)
    sigma = random_spd(rng, 4)
    direct = 0.5 * sum(w * w2_squared(sigma, a.cov)
                       for w, a in zip(p.weights, p.atoms))
    assert bary_objective(sigma, p) == pytest.approx(direct, rel=1e-12)


def test_gradient_zero_at_point_mass():
    rng = philox(32)
    a = random_spd(rng, 3)
    p = DiscreteDistribution.from_covariances([a])
    g = bary_gradient(a, p).entries
    assert np.linalg.norm(g) <= 1e-10


def test_gradient_scalar_example():
    p = one_d(4.0)
    sigma = SpdMatrix(np.array([[1.0]]))
    g = bary_gradient(sigma, p).entries
    assert g[0, 0] == pytest.approx(-1.0, abs=1e-12)


def test_gradient_matches_finite_differences():
    """The Euclidean derivative of the objective is half the Riemannian
    gradient, checked by central differences."""
    rng = philox(33)
    for _ in range(10):
        p = random_instance(rng, 5, 4)
        sigma = random_spd(rng, 4)
        y = random_direction(rng, 4)
        g = bary_gradient(sigma, p).entries
        analytic = 0.5 * float(np.sum(g * y))
        fd = central_difference(lambda s: bary_objective(s, p), sigma, y, 1e-5)
        assert fd == pytest.approx(analytic, rel=1e-5, abs=1e-9)


def test_gd_step_is_exponential_of_negative_gradient():
    rng = philox(34)
    for _ in range(10):
        p = random_instance(rng, 5, 4)
        sigma = random_spd(rng, 4)
        g = bary_gradient(sigma, p)
        explicit = bures_exp(sigma, -g.entries).entries
        step = bary_gd_step(sigma, p).entries
        assert np.linalg.norm(step - explicit) <= 1e-9 * np.linalg.norm(step)


def test_gd_step_point_mass_lands_in_one_step():
    rng = philox(35)
    a = random_spd(rng, 3)
    p = DiscreteDistribution.from_covariances([a])
    start = random_spd(rng, 3)
    assert np.allclose(bary_gd_step(start, p).entries, a.entries, atol=1e-10)
    assert np.allclose(bary_gd_step(a, p).entries, a.entries, atol=1e-12)


def test_commuting_family_converges_in_one_step():
    """Diagonal atoms: the fixed point is the squared weighted average of
    square roots, reached from any diagonal start in a single iteration."""
    vals = np.array([[1.0, 4.0], [9.0, 1.0], [4.0, 16.0]])
    w = np.array([0.2, 0.3, 0.5])
    p = DiscreteDistribution.from_covariances([np.diag(v) for v in vals], w)
    expected = np.diag((w @ np.sqrt(vals)) ** 2)
    start = SpdMatrix(np.diag([2.0, 5.0]))
    step = bary_gd_step(start, p)
    assert np.allclose(step.entries, expected, atol=1e-10)
    g = bary_gradient(step, p)
    assert grad_norm(step, g) <= 1e-10


def test_sgd_step_endpoints():
    rng = philox(36)
    sigma = random_spd(rng, 3)
    k = random_spd(rng, 3)
    assert np.allclose(bary_sgd_step(sigma, k, 1.0).entries, k.entries,
                       atol=1e-9)
    assert np.allclose(bary_sgd_step(sigma, k, 0.0).entries, sigma.entries,
                       atol=1e-14)
    assert np.allclose(bary_sgd_step(sigma, sigma, 0.7).entries, sigma.entries,
                       atol=1e-10)
    with pytest.raises(ValueError):
        bary_sgd_step(sigma, k, 1.5)


def test_condition_diagnostics_examples():
    rng = philox(37)
    c = 3.0
    same = DiscreteDistribution.from_covariances([c * np.eye(2)] * 3)
    diag = condition_diagnostics(same)
    assert diag.kappa == pytest.approx(1.0)
    assert diag.kappa_star == pytest.approx(1.0)
    assert diag.kappa_bar == pytest.approx(1.0)

    p = DiscreteDistribution.from_covariances(
        [np.diag([1.0, 2.0]), np.diag([100.0, 200.0])])
    diag = condition_diagnostics(p)
    assert diag.kappa == pytest.approx(200.0)
    assert diag.kappa_star == pytest.approx(2.0)

    rand = random_instance(rng, 6, 4, 0.2, 8.0)
    diag = condition_diagnostics(rand)
    assert diag.kappa_bar <= diag.kappa_star + 1e-12
    assert diag.kappa_star <= diag.kappa + 1e-12


def test_variance_scalar_example():
    p = one_d(1.0, 9.0)
    star = SpdMatrix(np.array([[4.0]]))
    assert variance_of(p, star) == pytest.approx(1.0, abs=1e-12)
    single = one_d(4.0)
    assert variance_of(single, star) == pytest.approx(0.0, abs=1e-14)


def test_step_schedules():
    assert StepSchedule.unit().eta(0) == 1.0
    assert StepSchedule.unit().eta(100) == 1.0
    assert StepSchedule.fixed(0.3).eta(7) == 0.3
    sched = StepSchedule.inverse_t(10.0)
    assert sched.eta(0) == pytest.approx(1.0)
    assert sched.eta(10) == pytest.approx(0.5)
    assert sched.eta(90) == pytest.approx(0.1)

    p = one_d(1.0, 2.0)
    default = default_sgd_schedule(p)
    kappa = condition_diagnostics(p).kappa
    theta = np.ceil(8.0 * kappa ** 3)
    assert default.eta(0) == pytest.approx(theta / theta)
    assert default.eta(1000) == pytest.approx(theta / (1000 + theta))


def test_run_gd_point_mass_converges_immediately():
    rng = philox(38)
    a = random_spd(rng, 3)
    p = DiscreteDistribution.from_covariances([a])
    start = random_spd(rng, 3)
    final, trace = run_bary_gd(p, sigma0=start)
    assert trace.converged
    assert trace.iterations <= 2
    assert np.allclose(final.entries, a.entries, atol=1e-9)


def test_run_gd_monotone_descent_and_trace_shape():
    rng = philox(39)
    p = random_instance(rng, 6, 4, 0.5, 3.0)
    final, trace = run_bary_gd(p, config=SolverConfig(max_iters=200))
    objs = trace.objectives()
    assert np.all(np.diff(objs) <= 1e-10)
    assert trace.records[0].iteration == 0
    assert trace.records[-1].iteration == trace.iterations
    assert trace.stop_reason == "gradient_tolerance"
    assert trace.records[-1].grad_norm_sq <= (1e-10) ** 2
    for rec in trace.records:
        assert rec.lambda_min <= rec.lambda_max
        assert rec.wall_ns >= 0


def test_run_gd_fixed_point_is_stationary():
    """One extra step from a converged iterate moves almost nowhere."""
    rng = philox(40)
    p = random_instance(rng, 6, 4, 0.5, 3.0)
    # Below ~1e-7 the distance itself drowns in trace cancellation, so the
    # stationarity bound is asserted at a resolvable tolerance.
    tol = 1e-6
    final, trace = run_bary_gd(p, config=SolverConfig(grad_tol=tol))
    assert trace.converged
    moved = np.sqrt(w2_squared(final, bary_gd_step(final, p)))
    assert moved <= 2.0 * tol * np.sqrt(final.lambda_max)


def test_run_gd_tracks_reference_distance():
    rng = philox(41)
    p = random_instance(rng, 5, 3)
    ref, _ = run_bary_gd(p)
    _, trace = run_bary_gd(p, config=SolverConfig(max_iters=20, grad_tol=0.0),
                           reference=ref)
    dists = np.array([r.w2sq_to_ref for r in trace.records])
    assert np.all(np.isfinite(dists))
    assert dists[-1] <= dists[0] + 1e-12


def test_run_gd_rejects_noncentered_atoms():
    rng = philox(42)
    p = random_noncentered(rng, 4, 3)
    with pytest.raises(ValueError, match="centered"):
        run_bary_gd(p)


def test_run_sgd_single_atom_with_unit_step():
    rng = philox(43)
    a = random_spd(rng, 3)
    p = DiscreteDistribution.from_covariances([a])
    start = random_spd(rng, 3)
    cfg = SolverConfig(max_iters=3, schedule=StepSchedule.unit(), rng_seed=5)
    final, _ = run_bary_sgd(p, sigma0=start, config=cfg)
    assert np.allclose(final.entries, a.entries, atol=1e-9)


def test_run_sgd_seed_determinism():
    rng = philox(44)
    p = random_instance(rng, 5, 3)
    cfg = SolverConfig(max_iters=60, grad_tol=0.0, rng_seed=9)
    f1, t1 = run_bary_sgd(p, config=cfg)
    f2, t2 = run_bary_sgd(p, config=cfg)
    assert np.array_equal(f1.entries, f2.entries)
    assert np.array_equal(t1.objectives(), t2.objectives())
    f3, _ = run_bary_sgd(p, config=SolverConfig(max_iters=60, grad_tol=0.0,
                                                rng_seed=10))
    assert not np.array_equal(f1.entries, f3.entries)


def test_run_sgd_trace_stride():
    rng = philox(45)
    p = random_instance(rng, 5, 3)
    cfg = SolverConfig(max_iters=50, grad_tol=0.0, rng_seed=1)
    _, trace = run_bary_sgd(p, config=cfg, trace_stride=10)
    iters = [r.iteration for r in trace.records]
    assert iters == [0, 10, 20, 30, 40, 50]


def test_map_over_atoms_thread_count_matches_serial(monkeypatch):
    """An explicit worker override must not change results bitwise."""
    rng = philox(46)
    p = random_instance(rng, 7, 4)
    sigma = random_spd(rng, 4)
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
    t_serial, o_serial = mean_transport(sigma, p)
    monkeypatch.setenv(THREADS_ENV_VAR, "2")
    t_par, o_par = mean_transport(sigma, p)
    assert np.array_equal(t_serial, t_par)
    assert o_serial == o_par
    monkeypatch.setenv(THREADS_ENV_VAR, "not-a-number")
    vals = map_over_atoms(lambda a: a.cov.trace, p.atoms)
    assert vals == [a.cov.trace for a in p.atoms]


def test_noncentered_split_examples():
    cov = np.eye(2)
    atoms = [GaussianMeasure(np.array([0.0, 0.0]), SpdMatrix(cov)),
             GaussianMeasure(np.array([2.0, 0.0]), SpdMatrix(cov))]
    p = DiscreteDistribution(atoms)
    mean, centered = noncentered_split(p)
    assert np.allclose(mean, [1.0, 0.0], atol=1e-15)
    assert centered.is_centered()

    zero = DiscreteDistribution.from_covariances([cov, 2.0 * cov])
    mean0, _ = noncentered_split(zero)
    assert np.allclose(mean0, 0.0)


def test_noncentered_pipeline_objective_identity():
    """Full objective = centered objective + mean dispersion term."""
    rng = philox(47)
    p = random_noncentered(rng, 5, 3, mean_scale=2.0)
    mean, centered = noncentered_split(p)
    sigma, _ = run_bary_gd(centered)
    solution = reattach_mean(sigma, mean)
    full = 0.5 * sum(w * w2_squared(solution, a)
                     for w, a in zip(p.weights, p.atoms))
    mean_term = 0.5 * sum(w * float(np.sum((mean - a.mean) ** 2))
                          for w, a in zip(p.weights, p.atoms))
    centered_obj = bary_objective(sigma, centered)
    assert full == pytest.approx(centered_obj + mean_term, rel=1e-10, abs=1e-12)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(grad_tol=-1.0)
