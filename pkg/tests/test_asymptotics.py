import numpy as np
import pytest
from hypothesis import given, strategies as st

from consensus_sgd.asymptotics import (
    NoiseCovariance,
    PopulationSquaredObjective,
    asymptotic_node_bound,
    hessian_at,
    lyapunov_solve,
    noise_covariance_at,
    theorem6_bound,
)
from consensus_sgd.data import GaussianStream, synth_gaussian_classification
from consensus_sgd.errors import InvalidArgumentError, UnsupportedError
from consensus_sgd.objective import LossSpec, Objective
from oracles import finite_difference_gradient, lyapunov_kron


def test_identity_gives_half():
    C = np.array([[2.0, 0.5], [0.5, 1.0]])
    sol = lyapunov_solve(np.eye(2), C)
    np.testing.assert_allclose(sol.H, C / 2)
    assert sol.residual < 1e-15


@given(st.integers(1, 12), st.integers(0, 10_000))
def test_lyapunov_matches_kronecker_oracle(d, seed):
    r = np.random.default_rng(seed)
    B = r.standard_normal((d, d))
    A = B @ B.T + 0.1 * np.eye(d)
    G = r.standard_normal((d, d))
    C = G @ G.T
    sol = lyapunov_solve(A, C)
    np.testing.assert_allclose(sol.H, lyapunov_kron(A, C), rtol=1e-8, atol=1e-10)
    assert sol.residual <= 1e-10


def test_lyapunov_rejects_bad_A():
    with pytest.raises(InvalidArgumentError):
        lyapunov_solve(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(InvalidArgumentError):
        lyapunov_solve(np.array([[1.0, 1.0], [0.0, 1.0]]), np.eye(2))


def test_hessian_matches_finite_difference_of_gradient():
    data = synth_gaussian_classification(200, 4, seed=0)
    obj = Objective(LossSpec.squared(mu=0.1), 0.1, data)
    H = hessian_at(obj)
    w = np.random.default_rng(1).standard_normal(4)
    fd = np.array([finite_difference_gradient(lambda v: obj.full_gradient(v)[k], w) for k in range(4)])
    np.testing.assert_allclose(H, fd, atol=1e-6)


def test_exact_and_empirical_covariance_agree():
    data = synth_gaussian_classification(300, 4, seed=0)
    obj = Objective(LossSpec.squared(mu=0.1), 0.1, data)
    w = np.full(4, 0.1)
    ex = noise_covariance_at(obj, w)
    em = noise_covariance_at(obj, w, mode="empirical", draws=200_000, seed=3)
    np.testing.assert_allclose(em.C, ex.C, atol=5e-3)
    # exact covariance is the sample covariance of the per-example gradients
    G = np.array([obj.mu * w + (data.y[i] * data.X[i] @ w - 1) * data.y[i] * data.X[i].toarray().ravel()
                  for i in range(data.N)])
    np.testing.assert_allclose(ex.C, np.cov(G.T, bias=True), atol=1e-12)


def test_hinge_and_large_d_rejected():
    data = synth_gaussian_classification(50, 4, seed=0)
    with pytest.raises(UnsupportedError, match="not twice differentiable"):
        hessian_at(Objective(LossSpec.hinge(), 0.1, data))
    big = synth_gaussian_classification(5, 201, seed=0)
    with pytest.raises(UnsupportedError):
        hessian_at(Objective(LossSpec.squared(mu=0.1), 0.1, big))


def test_covariance_validation():
    with pytest.raises(InvalidArgumentError):
        NoiseCovariance(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(InvalidArgumentError):
        NoiseCovariance(np.diag([1.0, -1.0]))


def test_trace_bounds_arithmetic():
    H = np.diag([1.0, 2.0])
    row = np.array([0.5, 0.25, 0.25])
    assert asymptotic_node_bound(row, H, 2.0, 0.5) == pytest.approx(0.375 * 3 * 2 / 0.5)
    A = np.diag([2.0, 4.0])
    assert theorem6_bound(4, 0.04, 2.0, A, 1.0, 0.1) == pytest.approx(25 * 0.2 * 4 / 4 * 0.75 / 0.1)
    assert theorem6_bound(4, 0.04, 2.0, A, 1.0, 0.1, variant="m", m=8) == pytest.approx(25 * 0.2 * 4 / 8 * 0.75 / 0.1)
    with pytest.raises(InvalidArgumentError):
        theorem6_bound(0, 0.04, 2.0, A, 1.0, 0.1)


def test_population_objective_matches_sampling():
    stream = GaussianStream(5, seed=2)
    pop = PopulationSquaredObjective(stream, 0.1)
    X, y = stream.draw(np.random.default_rng(0), 300_000)
    w = pop.w_star + 0.05
    emp = 0.5 * np.mean((1 - y * (X @ w)) ** 2) + 0.05 * w @ w
    assert pop.value(w) == pytest.approx(emp, rel=5e-3)
    assert pop.value(pop.w_star) <= pop.value(w)
    grad = finite_difference_gradient(pop.value, pop.w_star)
    np.testing.assert_allclose(grad, 0, atol=1e-8)
    assert pop.noise_covariance(draws=20_000).C.shape == (5, 5)
