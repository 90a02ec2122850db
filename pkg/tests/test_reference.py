import numpy as np
import pytest
import scipy.optimize as opt
import scipy.sparse as sp

from consensus_sgd import _backend
from consensus_sgd.data import Dataset, synth_gaussian_classification
from consensus_sgd.errors import InvalidArgumentError
from consensus_sgd.objective import LossSpec, Objective
from consensus_sgd.reference import engine_floor, reference_optimum, sdca_optimum


def test_single_point_ridge_closed_form():
    # J(w) = (1 - w1)^2/2 + ||w||^2/2, minimized at w = e1/2 with J = 1/4
    data = Dataset(sp.csr_matrix(np.array([[1.0, 0.0, 0.0]])), np.array([1.0]))
    ref = reference_optimum(Objective(LossSpec.squared(mu=1.0), 1.0, data))
    np.testing.assert_allclose(ref.w_star, [0.5, 0, 0], atol=1e-12)
    assert ref.J_star == pytest.approx(0.25, abs=1e-14)


def test_squared_matches_normal_equations(small_data):
    obj = Objective(LossSpec.squared(mu=0.05), 0.05, small_data)
    X = small_data.X.toarray()
    w = np.linalg.lstsq(np.vstack([X / np.sqrt(small_data.N), np.sqrt(0.05) * np.eye(small_data.d)]),
                        np.concatenate([small_data.y / np.sqrt(small_data.N), np.zeros(small_data.d)]), rcond=None)[0]
    ref = reference_optimum(obj)
    np.testing.assert_allclose(ref.w_star, w, atol=1e-8)
    assert ref.certified_gap < 1e-12


def _dual_box_qp(data, mu):
    # maximize mean(a) - ||X^T (a*y)||^2 / (2 mu N^2) over a in [0,1]^N
    X, y, N = data.X.toarray(), data.y, data.N
    Z = X * y[:, None]

    def f(a):
        v = Z.T @ a / (mu * N)
        return -(a.mean() - 0.5 * mu * v @ v), -(np.ones(N) / N - Z @ v / N)

    res = opt.minimize(f, np.full(N, 0.5), jac=True, bounds=[(0, 1)] * N, method="L-BFGS-B",
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 20000})
    return -res.fun


@pytest.mark.parametrize("backend", sorted(_backend.BACKENDS))
def test_sdca_matches_independent_dual_solver(backend):
    data = synth_gaussian_classification(150, 5, seed=1)
    obj = Objective(LossSpec.hinge(), 0.05, data)
    ref = sdca_optimum(obj, tol=1e-10, backend=backend)
    dual = _dual_box_qp(data, 0.05)
    assert ref.J_star == pytest.approx(dual, abs=1e-7)
    assert ref.lower_bound <= ref.J_star
    assert ref.certified_gap <= 1e-10 * max(1, ref.J_star)


def test_engine_floor_sits_above_sdca():
    data = synth_gaussian_classification(100, 4, seed=2)
    obj = Objective(LossSpec.hinge(), 0.1, data)
    floor = reference_optimum(obj, method="engine", T=20000, seeds=(0, 1))
    sd = reference_optimum(obj)
    assert floor.method == "engine-floor"
    assert sd.J_star - 1e-12 <= floor.J_star <= sd.J_star + 1e-2


def test_invalid_methods(small_data):
    with pytest.raises(InvalidArgumentError):
        reference_optimum(Objective(LossSpec.squared(mu=0.1), 0.1, small_data), method="sdca")
    with pytest.raises(InvalidArgumentError):
        reference_optimum(Objective(LossSpec.hinge(), 0.1, small_data), method="newton")
    with pytest.raises(InvalidArgumentError):
        reference_optimum(Objective(LossSpec.hinge(), 0.1, Dataset(sp.csr_matrix((0, 3)), np.empty(0))))
