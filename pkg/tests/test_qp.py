import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_labels, random_psd
from mklkit.errors import InfeasibleProblemError, MatrixValidationError, ValidationError
from mklkit.qp import brute_force_svm, dual_objective, project_feasible, solve_svm


def _yQy(K, y):
    return K * np.outer(y, y)


def test_two_point_analytic():
    x = np.array([1.0, -1.0])
    y = np.array([1.0, -1.0])
    Q = _yQy(np.outer(x, x), y)
    for solver in (solve_svm, brute_force_svm):
        sol = solver(Q, y, 10.0)
        assert np.allclose(sol.alpha, [0.5, 0.5], atol=1e-9)
        assert sol.bias == pytest.approx(0.0, abs=1e-9)
        assert sol.objective == pytest.approx(-0.5, abs=1e-12)


def test_two_point_grid_oracle():
    # along y'a = 0 with a_1 = a_2 = t: objective 2 t^2 - 2 t
    t = np.linspace(0, 10, 100_001)
    assert t[np.argmin(2 * t * t - 2 * t)] == pytest.approx(0.5)


def test_tiny_C_collapses(rng):
    y = random_labels(rng, 10)
    Q = _yQy(random_psd(rng, 10), y)
    sol = solve_svm(Q, y, 1e-9)
    assert np.max(sol.alpha) <= 1e-9
    assert abs(sol.objective) <= 1e-8


@given(seed=st.integers(0, 2**31 - 1), m=st.integers(2, 20), C=st.sampled_from([0.1, 1.0, 10.0]))
def test_matches_brute_force(seed, m, C):
    rng = np.random.default_rng(seed)
    y = random_labels(rng, m)
    Q = _yQy(random_psd(rng, m, rank=int(rng.integers(1, m + 1))), y)
    a = solve_svm(Q, y, C, kkt_tol=1e-8)
    b = brute_force_svm(Q, y, C)
    assert a.objective <= b.objective + 1e-6
    assert abs(a.objective - b.objective) <= 1e-6


@given(seed=st.integers(0, 2**31 - 1), m=st.integers(2, 40))
def test_feasibility_and_margins(seed, m):
    rng = np.random.default_rng(seed)
    y = random_labels(rng, m)
    K = random_psd(rng, m)
    C = float(rng.choice([0.1, 1.0, 10.0]))
    sol = solve_svm(_yQy(K, y), y, C, kkt_tol=1e-8)
    assert np.all(sol.alpha >= -1e-9) and np.all(sol.alpha <= C + 1e-9)
    assert abs(y @ sol.alpha) <= 1e-9
    assert sol.converged and sol.kkt_violation <= 1e-8
    f = K @ (sol.alpha * y) - sol.bias
    free = sol.free_mask
    assert np.all(y[free] * f[free] >= 1 - 1e-6)
    assert np.all(np.abs(y[free] * f[free] - 1) <= 1e-6)


def test_duplicated_points_get_equal_alpha(rng):
    X = rng.standard_normal((2, 6))
    X = np.concatenate([X, X[:, :1]], axis=1)  # point 6 duplicates point 0
    y = np.array([1, -1, 1, -1, 1, -1, 1.0])
    Q = _yQy(X.T @ X, y)
    sol = brute_force_svm(Q, y, 1.0)
    assert sol.alpha[0] == pytest.approx(sol.alpha[6], abs=1e-7)


def test_separable_four_points_kkt():
    X = np.array([[2.0, 3.0, -2.0, -3.0], [0.5, -0.5, 0.2, -0.1]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    K = X.T @ X
    sol = brute_force_svm(_yQy(K, y), y, 100.0)
    f = K @ (sol.alpha * y) - sol.bias
    assert np.all(y * f >= 1 - 1e-7)
    assert np.all(sol.alpha * (y * f - 1) <= 1e-7)  # complementary slackness
    assert sol.kkt_violation < 1e-8


def test_warm_start_never_worse(rng):
    m = 30
    y = random_labels(rng, m)
    Q = _yQy(random_psd(rng, m), y)
    a = solve_svm(Q, y, 1.0, kkt_tol=1e-3)
    b = solve_svm(Q, y, 1.0, kkt_tol=1e-10, alpha0=a.alpha)
    assert b.objective <= a.objective
    with pytest.raises(ValidationError):
        solve_svm(Q, y, 1.0, alpha0=np.r_[1.0, np.zeros(m - 1)])


def test_per_sample_box(rng):
    m = 12
    y = random_labels(rng, m)
    Q = _yQy(random_psd(rng, m), y)
    C = rng.uniform(0.05, 2.0, m)
    a = solve_svm(Q, y, C, kkt_tol=1e-9)
    b = brute_force_svm(Q, y, C)
    assert np.all(a.alpha <= C + 1e-12)
    assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_errors(rng):
    Q = np.eye(3)
    with pytest.raises(InfeasibleProblemError):
        solve_svm(Q, [1, 1, 1], 1.0)
    with pytest.raises(MatrixValidationError):
        solve_svm(np.diag([1.0, -1.0, 1.0]), [1, -1, 1], 1.0)
    with pytest.raises(ValidationError):
        solve_svm(Q, [1, -1, 2], 1.0)
    with pytest.raises(ValidationError):
        solve_svm(Q, [1, -1, 1], 0.0)
    with pytest.raises(ValidationError):
        brute_force_svm(np.eye(31), np.r_[1.0, -np.ones(30)], 1.0)


@given(seed=st.integers(0, 2**31 - 1))
def test_projection_is_feasible_and_nearest(seed):
    rng = np.random.default_rng(seed)
    m = 6
    y = random_labels(rng, m)
    Cv = rng.uniform(0.5, 2.0, m)
    v = 3 * rng.standard_normal(m)
    p = project_feasible(v, y, Cv)
    assert np.all(p >= 0) and np.all(p <= Cv) and abs(y @ p) < 1e-9
    # any other feasible point is at least as far away
    for _ in range(20):
        q = project_feasible(p + 0.3 * rng.standard_normal(m), y, Cv)
        assert np.linalg.norm(v - p) <= np.linalg.norm(v - q) + 1e-9


def test_dual_objective_value():
    Q = np.array([[2.0, 0.0], [0.0, 4.0]])
    assert dual_objective(Q, np.array([1.0, 1.0])) == pytest.approx(3.0 - 2.0)
