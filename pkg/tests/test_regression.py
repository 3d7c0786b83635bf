import numpy as np
import pytest

from nss3dqa import regression
from nss3dqa.errors import ConvergenceError, ModelFileError
from nss3dqa.regression import (FeatureScaler, _rbf_kernel, predict,
                                resolve_gamma, train_svr)


def test_scaler_population_std(rng):
    X = rng.normal(size=(50, 4))
    s = FeatureScaler.fit(X)
    np.testing.assert_allclose(s.stds, X.std(axis=0))  # ddof=0
    Xs = s.transform(X)
    np.testing.assert_allclose(Xs.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(Xs.std(axis=0), 1.0, atol=1e-12)


def test_scaler_zero_variance_column(rng):
    X = rng.normal(size=(20, 3))
    X[:, 1] = 7.0
    s = FeatureScaler.fit(X)
    Xs = s.transform(X)
    np.testing.assert_array_equal(Xs[:, 1], 0.0)
    assert np.all(np.isfinite(Xs))


def test_resolve_gamma_scale(rng):
    X = rng.normal(size=(30, 5))
    g = resolve_gamma("scale", X)
    np.testing.assert_allclose(g, 1.0 / (5 * X.var(axis=0).mean()))
    assert resolve_gamma(0.25, X) == 0.25
    with pytest.raises(ValueError):
        resolve_gamma(-1.0, X)


def test_constant_target(rng):
    X = rng.normal(size=(20, 3))
    y = np.full(20, 0.7)
    model = train_svr(X, y, epsilon=0.1)
    assert len(model.dual_coefs) == 0
    np.testing.assert_allclose(model.bias, 0.7, atol=1e-9)
    np.testing.assert_allclose(predict(model, X), 0.7, atol=1e-9)


def _sine_problem(n=40, seed=5):
    rng = np.random.default_rng(seed)
    X = np.sort(rng.uniform(0, 2 * np.pi, size=(n, 1)), axis=0)
    y = np.sin(X[:, 0])
    return X, y


def test_svr_against_qp_reference():
    """The SMO optimum matches a cvxopt quadratic-program solve."""
    cvxopt = pytest.importorskip("cvxopt")
    from cvxopt import matrix, solvers
    solvers.options["show_progress"] = False

    X, y = _sine_problem()
    C, eps = 1.0, 0.1
    # Tight tolerance: near-duplicate points let a loose solve split
    # coefficients differently at an almost identical objective value.
    model = train_svr(X, y, C=C, epsilon=eps, gamma="scale", tol=1e-8)
    default_model = train_svr(X, y, C=C, epsilon=eps, gamma="scale")

    scaler = FeatureScaler.fit(X)
    Xs = scaler.transform(X)
    K = _rbf_kernel(Xs, Xs, model.gamma)
    n = len(y)
    # Dual over beta = alpha - alpha*:
    #   min 1/2 b^T K b + eps * sum |b| - y^T b,  s.t. sum b = 0, |b| <= C.
    # Split b = u - v with u, v >= 0 to keep the QP smooth.
    P = np.block([[K, -K], [-K, K]]) + 1e-10 * np.eye(2 * n)
    q = np.concatenate([eps - y, eps + y])
    G = np.vstack([-np.eye(2 * n), np.eye(2 * n)])
    h = np.concatenate([np.zeros(2 * n), np.full(2 * n, C)])
    A = np.concatenate([np.ones(n), -np.ones(n)])[None, :]
    sol = solvers.qp(matrix(P), matrix(q), matrix(G), matrix(h),
                     matrix(A), matrix(np.zeros(1)))
    assert sol["status"] == "optimal"
    uv = np.array(sol["x"]).ravel()
    beta_ref = uv[:n] - uv[n:]

    beta = np.zeros(n)
    # Reconstruct the full beta vector by matching support vector rows.
    # Support vectors are exact copies of scaled training rows.
    sv_rows = [np.flatnonzero(np.all(Xs == sv, axis=1))[0]
               for sv in model.support_vectors]
    beta[np.asarray(sv_rows, dtype=int)] = model.dual_coefs
    np.testing.assert_allclose(beta, beta_ref, atol=5e-3)

    # The default-tolerance solve reaches the same objective value even
    # where its coefficient split differs.
    def obj(b):
        return 0.5 * b @ K @ b + eps * np.abs(b).sum() - y @ b
    beta_default = np.zeros(n)
    rows = [np.flatnonzero(np.all(Xs == sv, axis=1))[0]
            for sv in default_model.support_vectors]
    beta_default[np.asarray(rows, dtype=int)] = default_model.dual_coefs
    assert abs(obj(beta) - obj(beta_ref)) <= 1e-6
    assert abs(obj(beta_default) - obj(beta_ref)) <= 1e-3


def test_kkt_box_and_epsilon_tube():
    X, y = _sine_problem()
    C = 2.5
    eps = 0.05
    model = train_svr(X, y, C=C, epsilon=eps)
    # Box constraints hold on every dual coefficient.
    assert np.all(np.abs(model.dual_coefs) <= C + 1e-9)
    preds = predict(model, X)
    # With ample C the fit stays within the tube plus the KKT slack.
    assert np.max(np.abs(preds - y)) <= eps + 0.05


def test_predict_single_and_batch(rng):
    X = rng.normal(size=(25, 4))
    y = X[:, 0] + 0.1 * rng.normal(size=25)
    model = train_svr(X, y)
    batch = predict(model, X[:3])
    singles = [predict(model, X[i]) for i in range(3)]
    np.testing.assert_allclose(batch, singles, rtol=1e-12)
    with pytest.raises(ValueError, match="features"):
        predict(model, np.zeros(5))


def test_mos_scale_applied(rng):
    X = rng.normal(size=(30, 2))
    y = rng.uniform(0, 1, size=30)
    m1 = train_svr(X, y, mos_scale=1.0)
    m10 = train_svr(X, y, mos_scale=10.0)
    np.testing.assert_allclose(predict(m10, X), 10.0 * predict(m1, X),
                               rtol=1e-12)


def test_save_load_roundtrip(tmp_path, rng):
    X, y = _sine_problem()
    model = train_svr(X, y)
    path = tmp_path / "model.json"
    regression.save_model(model, path)
    back = regression.load_model(path)
    grid = np.linspace(0, 2 * np.pi, 100)[:, None]
    np.testing.assert_array_equal(predict(back, grid), predict(model, grid))


def test_load_model_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    with pytest.raises(ModelFileError, match="corrupt"):
        regression.load_model(p)
    p.write_text('{"version": 99, "kind": "svr-rbf"}')
    with pytest.raises(ModelFileError, match="version"):
        regression.load_model(p)
    X, y = _sine_problem(n=20)
    model = train_svr(X, y)
    good = tmp_path / "good.json"
    regression.save_model(model, good)
    text = good.read_text()
    (tmp_path / "trunc.json").write_text(text[: len(text) // 2])
    with pytest.raises(ModelFileError):
        regression.load_model(tmp_path / "trunc.json")


def test_row_permutation_invariance(rng):
    X, y = _sine_problem(n=30)
    perm = rng.permutation(len(y))
    m1 = train_svr(X, y)
    m2 = train_svr(X[perm], y[perm])
    grid = np.linspace(0, 2 * np.pi, 50)[:, None]
    np.testing.assert_allclose(predict(m1, grid), predict(m2, grid),
                               atol=1e-9)


def test_convergence_error():
    X, y = _sine_problem()
    with pytest.raises(ConvergenceError):
        train_svr(X, y, max_iter=3)


def test_train_input_validation(rng):
    X = rng.normal(size=(10, 2))
    y = rng.normal(size=10)
    with pytest.raises(ValueError):
        train_svr(X, y[:-1])
    with pytest.raises(ValueError):
        train_svr(X, y, C=0.0)
    with pytest.raises(ValueError):
        train_svr(X, y, epsilon=-0.1)
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        train_svr(bad, y)
