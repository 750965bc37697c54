import numpy as np
import pytest
from sklearn.exceptions import ConvergenceWarning

from gasdemand.models import SVRForecaster
from gasdemand.models.svr import linear_kernel, rbf_kernel, smo_solve


def dual_objective(K, y, eps, a, a_star):
    d = a - a_star
    return 0.5 * d @ K @ d + eps * (a + a_star).sum() - y @ d


@pytest.mark.parametrize("kernel", ["linear", "rbf"])
def test_dual_feasibility(kernel):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 4))
    y = np.sin(X[:, 0]) + 0.3 * rng.normal(size=60)
    c = 2.0
    m = SVRForecaster(c=c, epsilon=0.05, kernel=kernel).fit(X, y)
    for v in (m.alpha_, m.alpha_star_):
        assert np.all(v >= -1e-9) and np.all(v <= c + 1e-9)
    assert abs((m.alpha_ - m.alpha_star_).sum()) < 1e-9
    assert m.kkt_gap_ < m.tol


def test_epsilon_tube_on_noiseless_linear_data():
    # The KKT tolerance bounds how far residuals may leave the tube, so the
    # solver runs tighter than its default here.
    rng = np.random.default_rng(1)
    for _ in range(10):
        X = rng.normal(size=(40, 3))
        y = X @ rng.normal(size=3) + 1.5
        eps = 0.1
        m = SVRForecaster(c=100.0, epsilon=eps, kernel="linear", tol=1e-8).fit(X, y)
        assert np.abs(m.predict(X) - y).max() <= eps + 1e-6


def test_objective_trace_monotone_and_consistent():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 3))
    y = X[:, 0] ** 2 + 0.1 * rng.normal(size=50)
    K = rbf_kernel(X, X, 0.5)
    a, a_star, b, it, gap, trace = smo_solve(K, y, 5.0, 0.05, tol=1e-6)
    assert trace[0] == 0.0 and len(trace) == it + 1
    assert np.all(np.diff(trace) <= 1e-12 * np.abs(trace).max())
    assert trace[-1] == pytest.approx(dual_objective(K, y, 0.05, a, a_star), rel=1e-9, abs=1e-9)


def test_wide_tube_gives_constant_predictor():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 2))
    y = rng.uniform(-1, 1, size=20)
    eps = np.abs(y - y.mean()).max() + 0.1
    m = SVRForecaster(c=1.0, epsilon=eps).fit(X, y)
    assert np.all(m.alpha_ == 0) and np.all(m.alpha_star_ == 0)
    pred = m.predict(rng.normal(size=(5, 2)))
    assert np.ptp(pred) == 0.0
    assert np.all(np.abs(m.predict(X) - y) <= eps)


def test_duplicated_rows_predict_identically():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(15, 3))
    X = np.vstack([X, X[:3]])
    y = rng.normal(size=15)
    y = np.concatenate([y, y[:3]])
    m = SVRForecaster(c=3.0, epsilon=0.01).fit(X, y)
    p = m.predict(X)
    np.testing.assert_array_equal(p[:3], p[15:])


def test_kernels():
    A = np.array([[0.0, 1.0], [2.0, 0.0]])
    B = np.array([[1.0, 1.0]])
    np.testing.assert_allclose(linear_kernel(A, B), [[1.0], [2.0]])
    np.testing.assert_allclose(rbf_kernel(A, B, 0.5), [[np.exp(-0.5)], [np.exp(-1.0)]])


def test_iteration_cap_warns_with_kkt():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    with pytest.warns(ConvergenceWarning, match="KKT violation"):
        m = SVRForecaster(c=10.0, epsilon=0.01, max_iter=3).fit(X, y)
    assert m.n_iter_ == 3


def test_invalid_hyperparameters():
    X, y = np.ones((4, 1)), np.arange(4.0)
    with pytest.raises(ValueError):
        SVRForecaster(c=0).fit(X, y)
    with pytest.raises(ValueError):
        SVRForecaster(epsilon=-1).fit(X, y)
    with pytest.raises(ValueError):
        SVRForecaster(kernel="poly").fit(X, y)


def test_svr_deterministic():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(80, 5))
    y = rng.normal(size=80)
    a = SVRForecaster(c=1.0).fit(X, y)
    b = SVRForecaster(c=1.0).fit(X, y)
    assert a.dual_coef_.tobytes() == b.dual_coef_.tobytes()
    assert a.intercept_ == b.intercept_
