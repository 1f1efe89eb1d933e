import numpy as np
import pytest

from oracles import (
    covfit_grid_search,
    covfit_objective_reference,
    expanded_covariance_reference,
)
from pufstat.correlation import covariance_matrix
from pufstat.covfit import (
    AttackCell,
    CovFitProblem,
    FitOptions,
    bits_from_values,
    choose_fixed_positions,
    evaluate_attack,
    expanded_cov_residual,
    fit,
    objective_and_gradient,
)
from pufstat.errors import ConfigurationError


def _random_problem(seed, k=8, n_train=40, num_fixed=3, mode="exact"):
    rng = np.random.default_rng(seed)
    mixing = rng.normal(size=(k, k)) / np.sqrt(k)
    data = mixing @ rng.normal(size=(k, n_train))
    cov = covariance_matrix(data)
    mu = data.mean(axis=1)
    mask = np.zeros(k, dtype=bool)
    mask[rng.choice(k, size=num_fixed, replace=False)] = True
    values = rng.normal(size=num_fixed)
    return CovFitProblem(
        cov=cov, row_means=mu, n_train=n_train,
        fixed_mask=mask, fixed_values=values, mode=mode,
    )


def test_residual_at_mean_is_scaled_negative_cov():
    rng = np.random.default_rng(2)
    data = rng.normal(size=(5, 20))
    cov = covariance_matrix(data)
    mu = data.mean(axis=1)
    residual = expanded_cov_residual(cov, mu, mu, n_train=20)
    assert np.allclose(residual, -cov / 21.0, atol=1e-15)


def test_residual_rank_one_exact_match():
    c = np.asarray([1.0, -2.0, 0.5])
    cov = np.outer(c, c)
    mu = np.zeros(3)
    residual = expanded_cov_residual(cov, mu, c, n_train=10)
    assert np.all(residual == 0.0)


def test_rank_one_identity_vs_direct_evaluation():
    # Appending one device column and recomputing the covariance with the
    # old row means must equal the rank-one shortcut.
    rng = np.random.default_rng(650)
    extended = rng.normal(size=(6, 51)) * 2.5
    train = extended[:, :50]
    cov = covariance_matrix(train)
    mu = train.mean(axis=1)
    shortcut = expanded_cov_residual(cov, mu, extended[:, 50], n_train=50)
    direct = expanded_covariance_reference(extended, 50) - cov
    assert np.max(np.abs(shortcut - direct)) < 1e-12


def test_objective_matches_expanded_reference():
    problem = _random_problem(3)
    rng = np.random.default_rng(4)
    d_free = rng.normal(size=problem.num_free)
    value, _ = objective_and_gradient(problem, d_free)

    d = np.zeros(problem.num_pairs)
    d[problem.fixed_mask] = problem.fixed_values - problem.row_means[problem.fixed_mask]
    d[~problem.fixed_mask] = d_free
    want = covfit_objective_reference(problem.cov, d, problem.n_train)
    assert value == pytest.approx(want, rel=1e-12)
    # And the objective really is the squared Frobenius norm of the residual.
    residual = expanded_cov_residual(
        problem.cov, problem.row_means, problem.row_means + d, problem.n_train
    )
    assert value == pytest.approx(float(np.sum(residual * residual)), rel=1e-10)


def test_gradient_matches_central_finite_differences():
    for seed in (10, 11, 12):
        problem = _random_problem(seed, k=8)
        rng = np.random.default_rng(seed + 100)
        d_free = rng.normal(size=problem.num_free)
        _, grad = objective_and_gradient(problem, d_free)
        grad_free = grad[~problem.fixed_mask]

        h = 1e-6
        fd = np.empty_like(d_free)
        for i in range(d_free.size):
            up = d_free.copy()
            up[i] += h
            down = d_free.copy()
            down[i] -= h
            f_up, _ = objective_and_gradient(problem, up)
            f_down, _ = objective_and_gradient(problem, down)
            fd[i] = (f_up - f_down) / (2.0 * h)
        denom = np.linalg.norm(grad_free)
        assert denom > 0
        assert np.linalg.norm(grad_free - fd) / denom < 1e-6


def test_gradient_zeroed_at_fixed_positions():
    problem = _random_problem(5)
    _, grad = objective_and_gradient(problem, np.ones(problem.num_free))
    assert np.all(grad[problem.fixed_mask] == 0.0)


def test_rank_one_recovery():
    rng = np.random.default_rng(21)
    c = rng.uniform(0.5, 1.5, size=6) * rng.choice([-1.0, 1.0], size=6)
    problem = CovFitProblem(
        cov=np.outer(c, c),
        row_means=np.zeros(6),
        n_train=50,
        fixed_mask=np.zeros(6, dtype=bool),
        fixed_values=np.zeros(0),
    )
    options = FitOptions(
        max_iter=50000, grad_tol=1e-12, objective_tol=0.0,
        start_free=rng.normal(size=6),
    )
    result = fit(problem, options)
    d_hat = result.b_hat  # row means are zero
    assert np.max(np.abs(np.abs(d_hat) - np.abs(c))) < 1e-6
    assert result.objective < 1e-12


def test_rank_one_agrees_with_coarse_grid_k3():
    rng = np.random.default_rng(22)
    c = np.asarray([0.8, -1.1, 0.6])
    cov = np.outer(c, c)
    mu = np.zeros(3)
    mask = np.asarray([True, False, False])
    values = np.asarray([c[0]])
    problem = CovFitProblem(
        cov=cov, row_means=mu, n_train=30, fixed_mask=mask, fixed_values=values
    )
    result = fit(problem, FitOptions(start_free=rng.normal(size=2)))
    best_value, _ = covfit_grid_search(cov, mu, mask, values, 30)
    assert result.objective <= best_value + 1e-6


def test_fit_matches_grid_search_oracle():
    # Two coordinates pinned to the target's exact values, two optimized.
    rng = np.random.default_rng(33)
    shared = rng.normal(size=30)
    diff = 0.8 * np.vstack([shared, -shared, shared, -shared])
    diff = diff + rng.normal(size=(4, 30))
    truth = diff[:, 29]
    train = diff[:, :29]
    cov = covariance_matrix(train)
    mu = train.mean(axis=1)
    mask = np.asarray([True, False, True, False])
    values = truth[mask]
    problem = CovFitProblem(
        cov=cov, row_means=mu, n_train=29,
        fixed_mask=mask, fixed_values=values, truth=truth,
    )
    result = fit(problem)
    best_value, best_point = covfit_grid_search(cov, mu, mask, values, 29)
    assert abs(result.objective - best_value) <= 1e-4
    d_free = (result.b_hat - mu)[~mask]
    assert np.max(np.abs(d_free - np.asarray(best_point))) < 0.02


def test_fit_requires_free_coordinates():
    problem = CovFitProblem(
        cov=np.eye(3),
        row_means=np.zeros(3),
        n_train=5,
        fixed_mask=np.ones(3, dtype=bool),
        fixed_values=np.asarray([1.0, -1.0, 1.0]),
    )
    with pytest.raises(ConfigurationError, match="free"):
        fit(problem)


def test_fixed_positions_pinned_exactly():
    problem = _random_problem(41)
    result = fit(problem)
    assert np.all(result.b_hat[problem.fixed_mask] == problem.fixed_values)
    assert result.objective <= result.start_objective


def test_monotone_descent_across_instances():
    for seed in range(50, 60):
        problem = _random_problem(seed, k=10, num_fixed=4)
        result = fit(problem)
        assert result.objective <= result.start_objective
        assert result.iterations <= FitOptions().max_iter
        assert np.all(np.isin(result.bits_hat, (0, 1)))


def test_sign_symmetry_of_returned_objective():
    rng = np.random.default_rng(60)
    data = rng.normal(size=(6, 30))
    problem = CovFitProblem(
        cov=covariance_matrix(data),
        row_means=np.zeros(6),
        n_train=30,
        fixed_mask=np.zeros(6, dtype=bool),
        fixed_values=np.zeros(0),
    )
    start = rng.normal(size=6)
    plus = fit(problem, FitOptions(start_free=start))
    minus = fit(problem, FitOptions(start_free=-start))
    assert plus.objective == minus.objective
    assert np.all(plus.b_hat == -minus.b_hat)


def test_problem_validation():
    eye = np.eye(3)
    mu = np.zeros(3)
    with pytest.raises(ConfigurationError, match="symmetric"):
        CovFitProblem(cov=np.asarray([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
                      row_means=mu, n_train=5,
                      fixed_mask=np.zeros(3, dtype=bool), fixed_values=np.zeros(0))
    with pytest.raises(ConfigurationError, match="semidefinite"):
        CovFitProblem(cov=np.diag([1.0, -0.5, 1.0]), row_means=mu, n_train=5,
                      fixed_mask=np.zeros(3, dtype=bool), fixed_values=np.zeros(0))
    with pytest.raises(ConfigurationError, match="mode"):
        CovFitProblem(cov=eye, row_means=mu, n_train=5,
                      fixed_mask=np.zeros(3, dtype=bool), fixed_values=np.zeros(0),
                      mode="guess")
    with pytest.raises(ConfigurationError, match="trend"):
        CovFitProblem(cov=eye, row_means=mu, n_train=5,
                      fixed_mask=np.asarray([True, False, False]),
                      fixed_values=np.asarray([0.7]), mode="trend")
    with pytest.raises(ConfigurationError, match="n_train"):
        CovFitProblem(cov=eye, row_means=mu, n_train=0,
                      fixed_mask=np.zeros(3, dtype=bool), fixed_values=np.zeros(0))
    with pytest.raises(ConfigurationError, match="fixed"):
        CovFitProblem(cov=eye, row_means=mu, n_train=5,
                      fixed_mask=np.asarray([True, False, False]),
                      fixed_values=np.asarray([1.0, 2.0]))
    # trend values at +-magnitude are accepted
    CovFitProblem(cov=eye, row_means=mu, n_train=5,
                  fixed_mask=np.asarray([True, True, False]),
                  fixed_values=np.asarray([2.0, -2.0]), mode="trend",
                  trend_magnitude=2.0)


def test_choose_fixed_positions_even():
    assert choose_fixed_positions(16, 4).tolist() == [0, 4, 8, 12]
    assert choose_fixed_positions(16, 0).tolist() == []
    assert choose_fixed_positions(16, 16).tolist() == list(range(16))
    assert choose_fixed_positions(10, 3).tolist() == [0, 3, 6]


def test_choose_fixed_positions_random():
    a = choose_fixed_positions(32, 8, selection="random", seed=7)
    b = choose_fixed_positions(32, 8, selection="random", seed=7)
    assert a.tolist() == b.tolist()
    assert len(set(a.tolist())) == 8
    assert a.tolist() == sorted(a.tolist())
    assert all(0 <= p < 32 for p in a)
    c = choose_fixed_positions(32, 8, selection="random", seed=8)
    assert c.tolist() != a.tolist()


def test_choose_fixed_positions_guards():
    with pytest.raises(ConfigurationError):
        choose_fixed_positions(16, 17)
    with pytest.raises(ConfigurationError):
        choose_fixed_positions(16, -1)
    with pytest.raises(ConfigurationError, match="seed"):
        choose_fixed_positions(16, 4, selection="random")
    with pytest.raises(ConfigurationError, match="selection"):
        choose_fixed_positions(16, 4, selection="first")


def test_attack_sweep_shape_and_edges():
    rng = np.random.default_rng(70)
    diff = rng.normal(size=(16, 24))
    cells = evaluate_attack(diff, device_index=5, fixed_counts=[0, 8, 16],
                            mode="exact")
    assert [c.fixed_count for c in cells] == [0, 8, 16]
    assert all(isinstance(c, AttackCell) for c in cells)
    assert all(c.error is None for c in cells)
    # m = 0 starts at the stationary mean point: nothing changes.
    assert cells[0].delta_correct == 0
    # m = K pins everything: trivially correct, no iterations.
    assert cells[2].delta_correct == 0
    assert cells[2].iterations == 0
    assert cells[2].objective is not None and np.isfinite(cells[2].objective)


def test_attack_null_mean_delta_small():
    # Independent rows carry no cross-pair structure, so the fit cannot
    # systematically improve or hurt the predicted bits.
    deltas = []
    for seed in range(20):
        rng = np.random.default_rng(900 + seed)
        diff = rng.normal(size=(16, 24))
        cells = evaluate_attack(diff, device_index=int(seed % 24),
                                fixed_counts=[8], mode="trend", seed=seed)
        deltas.append(cells[0].delta_correct)
    assert abs(float(np.mean(deltas))) < 1.0


def test_attack_exact_mode_exploits_shared_structure():
    # Strong rank-one structure: pinning half the coordinates to exact
    # values lets the fit infer the signs of the remaining ones.
    rng = np.random.default_rng(81)
    k, j = 32, 41
    pattern = rng.uniform(0.6, 1.4, size=k) * rng.choice([-1.0, 1.0], size=k)
    gains = rng.normal(size=j)
    diff = np.outer(pattern, gains) + 0.1 * rng.normal(size=(k, j))
    deltas = []
    for device in range(4):
        cells = evaluate_attack(diff, device_index=device,
                                fixed_counts=[k // 2], mode="exact", seed=5)
        deltas.append(cells[0].delta_correct)
    assert float(np.mean(deltas)) > 2.0


def test_attack_guards():
    rng = np.random.default_rng(90)
    diff = rng.normal(size=(8, 10))
    with pytest.raises(ConfigurationError):
        evaluate_attack(diff, device_index=10, fixed_counts=[0])
    with pytest.raises(ConfigurationError):
        evaluate_attack(diff, device_index=0, fixed_counts=[0], mode="best")


def test_bits_from_values_strict_positive():
    assert bits_from_values([-1.0, 0.0, 2.0]).tolist() == [0, 0, 1]
