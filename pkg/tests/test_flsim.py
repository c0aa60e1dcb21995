import numpy as np
import pytest

from ecofl.flbound import ParticipationPlan
from ecofl.flsim import SyntheticTask, estimate_constants, make_task, random_plan, run_federated_sgd, validate_bound


def test_fixed_point_trace_is_zero():
    M = np.eye(3)[None] * 2.0
    task = SyntheticTask(M, np.ones((1, 3)), np.array([1.0]), 0.0, np.ones(3), 2.0, 2.0)
    plan = ParticipationPlan.from_participation(np.ones((1, 4)), task.D)
    tr = run_federated_sgd(task, plan, 1, 0.2, 4, seed=0, n_reps=2)
    assert np.all(tr.gaps == 0.0)


def test_noise_free_contraction():
    # f = (mu/2)||w - c||^2, plain GD: gap contracts by (1 - eta mu)^2 per step
    mu, eta = 2.0, 0.2
    task = SyntheticTask(np.eye(2)[None] * mu, np.zeros((1, 2)), np.array([1.0]), 0.0,
                         np.array([1.0, -1.0]), mu, mu)
    plan = ParticipationPlan.from_participation(np.ones((1, 5)), task.D)
    g = run_federated_sgd(task, plan, 1, eta, 5, seed=0, n_reps=1).gaps[0]
    assert np.allclose(g[1:] / g[:-1], (1 - eta * mu) ** 2, rtol=1e-12)


def test_identical_optima_keep_virtual_average_consistent():
    task = make_task(K=4, dim=3, eps_w=0.0, noise=0.0, seed=3)
    assert np.allclose(task.c, task.c[0])
    plan = random_plan(task, 4, seed=1)
    tr = run_federated_sgd(task, plan, 5, 0.1, 20, seed=0, n_reps=1)
    assert tr.virtual_error < 1e-12


def test_virtual_recursion_matches_average():
    task = make_task(seed=1)
    plan = random_plan(task, 10, seed=2)
    tr = run_federated_sgd(task, plan, 5, 0.05, 50, seed=0, n_reps=3)
    assert tr.virtual_error < 1e-10
    assert tr.aggregation_indices.tolist() == list(range(5, 51, 5))


def test_task_spread_matches_request():
    task = make_task(eps_w=0.7, seed=4)
    assert np.max(np.sum((task.c - task.w_star) ** 2, axis=1)) == pytest.approx(0.7, rel=1e-9)
    assert task.gap(task.w_star) == 0.0


def test_estimates_zero_noise_and_isotropic_hessians():
    task = make_task(noise=0.0, seed=0)
    assert estimate_constants(task, seed=0).eps_v2 == 0.0
    iso = SyntheticTask(np.stack([3.0 * np.eye(2)] * 2), np.zeros((2, 2)), np.ones(2), 0.0, np.ones(2), 3.0, 3.0)
    fl = estimate_constants(iso, seed=0)
    assert fl.L == pytest.approx(3.0) and fl.mu == pytest.approx(3.0)


def test_rejects_bad_inputs():
    task = make_task(seed=0)
    plan = random_plan(task, 2)
    with pytest.raises(ValueError):
        run_federated_sgd(task, plan, 5, 0.5, 10, seed=0)
    with pytest.raises(ValueError):
        run_federated_sgd(task, plan, 5, 0.05, 11, seed=0)
    empty = ParticipationPlan.from_data(np.zeros((task.K, 3)))
    with pytest.raises(ValueError):
        run_federated_sgd(task, empty, 5, 0.05, 10, seed=0)


def test_small_validation_is_deterministic():
    a = validate_bound(total_updates=40, n_reps=5, seed=9)
    b = validate_bound(total_updates=40, n_reps=5, seed=9)
    assert np.array_equal(a.trace.gaps, b.trace.gaps)
    assert a.mean_pass and a.seed_pass_fraction >= 0.8
    rows = list(a.rows())
    assert len(rows) == 40 and rows[0][0] == 1
