"""Feature standardization and epsilon-SVR with an RBF kernel.

Training solves the SVR dual with sequential minimal optimization using
maximal-violating-pair working-set selection, which makes the result
deterministic for a given data set.  Models serialize to versioned JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ModelFileError

DEFAULT_C = 1.0
DEFAULT_EPSILON = 0.1
KKT_TOL = 1e-3
MAX_ITER = 1_000_000

MODEL_SCHEMA_VERSION = 1


@dataclass
class FeatureScaler:
    """Per-feature standardization statistics of a training matrix."""

    means: np.ndarray
    stds: np.ndarray  # population stds; zero-variance features map to 0

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(X) < 2:
            raise ValueError("need a 2-D matrix with at least 2 rows")
        return cls(means=X.mean(axis=0), stds=X.std(axis=0))

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        safe = np.where(self.stds > 0.0, self.stds, 1.0)
        out = (X - self.means) / safe
        return out * (self.stds > 0.0)


def fit_scaler(X) -> FeatureScaler:
    return FeatureScaler.fit(X)


@dataclass
class SvrModel:
    """Trained RBF epsilon-SVR with its preprocessing baked in."""

    support_vectors: np.ndarray  # rows in scaled feature space
    dual_coefs: np.ndarray       # nonzero, each in [-C, C]
    bias: float
    gamma: float
    C: float
    epsilon: float
    scaler: FeatureScaler
    mos_scale: float = 1.0


def _rbf_kernel(A, B, gamma):
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * A @ B.T)
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-gamma * sq)


def resolve_gamma(gamma, X_scaled):
    """Numeric kernel width from the "scale" rule or a positive number."""
    if gamma == "scale":
        d = X_scaled.shape[1]
        mean_var = float(X_scaled.var(axis=0).mean())
        if mean_var <= 0.0:
            mean_var = 1.0
        return 1.0 / (d * mean_var)
    g = float(gamma)
    if g <= 0.0:
        raise ValueError("gamma must be positive")
    return g


def _smo(K, y, C, epsilon, tol=KKT_TOL, max_iter=MAX_ITER):
    """Solve the epsilon-SVR dual by SMO on the 2n-variable split form.

    Maximal-violating-pair selection; returns (beta, bias) where beta
    are the signed dual coefficients of the n training rows.
    """
    n = len(y)
    z = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    a = np.zeros(2 * n)
    G = p.copy()
    tau = 1e-12

    converged = False
    for _ in range(max_iter):
        vals = -z * G
        up = ((z > 0) & (a < C)) | ((z < 0) & (a > 0))
        low = ((z > 0) & (a > 0)) | ((z < 0) & (a < C))
        up_vals = np.where(up, vals, -np.inf)
        low_vals = np.where(low, vals, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        if up_vals[i] - low_vals[j] < tol:
            converged = True
            break
        old_i, old_j = a[i], a[j]
        kii = K[i % n, i % n]
        kjj = K[j % n, j % n]
        kij = K[i % n, j % n]
        if z[i] != z[j]:
            quad = max(kii + kjj + 2.0 * kij, tau)
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0 and a[j] < 0:
                a[j] = 0.0
                a[i] = diff
            elif diff <= 0 and a[i] < 0:
                a[i] = 0.0
                a[j] = -diff
            if diff > 0 and a[i] > C:
                a[i] = C
                a[j] = C - diff
            elif diff <= 0 and a[j] > C:
                a[j] = C
                a[i] = C + diff
        else:
            quad = max(kii + kjj - 2.0 * kij, tau)
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
                elif a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = total
                elif a[i] < 0:
                    a[i] = 0.0
                    a[j] = total
        d_i = a[i] - old_i
        d_j = a[j] - old_j
        # Q[:, t] over the 2n variables equals z * z_t * K[:, t mod n]
        # stacked twice.
        col_i = np.concatenate([K[:, i % n], K[:, i % n]])
        col_j = np.concatenate([K[:, j % n], K[:, j % n]])
        G += z * (z[i] * d_i * col_i + z[j] * d_j * col_j)
    if not converged:
        raise ConvergenceError(
            f"SMO did not reach tolerance {tol} within {max_iter} iterations")

    beta = a[:n] - a[n:]
    vals = -z * G
    free = (a > 0) & (a < C)
    if free.any():
        bias = float(vals[free].mean())
    else:
        up = ((z > 0) & (a < C)) | ((z < 0) & (a > 0))
        low = ((z > 0) & (a > 0)) | ((z < 0) & (a < C))
        hi = vals[up].max() if up.any() else 0.0
        lo = vals[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return beta, bias


def train_svr(X, y, C=DEFAULT_C, epsilon=DEFAULT_EPSILON, gamma="scale",
              mos_scale=1.0, tol=KKT_TOL, max_iter=MAX_ITER) -> SvrModel:
    """Train an RBF epsilon-SVR on (X, y).

    y is expected in pre-scaled units (MOS divided by mos_scale);
    predictions are multiplied back by mos_scale.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(y) < 2:
        raise ValueError("X must be (n, d) with n == len(y) >= 2")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")
    if C <= 0.0:
        raise ValueError("C must be positive")
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    scaler = FeatureScaler.fit(X)
    Xs = scaler.transform(X)
    g = resolve_gamma(gamma, Xs)
    K = _rbf_kernel(Xs, Xs, g)
    beta, bias = _smo(K, y, C, epsilon, tol=tol, max_iter=max_iter)
    keep = np.abs(beta) > 1e-12
    return SvrModel(
        support_vectors=Xs[keep].copy(),
        dual_coefs=beta[keep].copy(),
        bias=bias,
        gamma=g,
        C=float(C),
        epsilon=float(epsilon),
        scaler=scaler,
        mos_scale=float(mos_scale),
    )


def predict(model: SvrModel, x):
    """Predict quality scores in database-native MOS units.

    Accepts a single feature vector or an (n, d) batch.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    d = len(model.scaler.means)
    if X.shape[1] != d:
        raise ValueError(f"expected {d} features, got {X.shape[1]}")
    Xs = model.scaler.transform(X)
    if len(model.dual_coefs):
        K = _rbf_kernel(Xs, model.support_vectors, model.gamma)
        raw = K @ model.dual_coefs + model.bias
    else:
        raw = np.full(len(Xs), model.bias)
    out = raw * model.mos_scale
    return float(out[0]) if single else out


def save_model(model: SvrModel, path):
    """Write a model as versioned JSON (full float precision)."""
    doc = {
        "version": MODEL_SCHEMA_VERSION,
        "kind": "svr-rbf",
        "C": model.C,
        "epsilon": model.epsilon,
        "gamma": model.gamma,
        "bias": model.bias,
        "mos_scale": model.mos_scale,
        "scaler": {
            "means": model.scaler.means.tolist(),
            "stds": model.scaler.stds.tolist(),
        },
        "support_vectors": model.support_vectors.tolist(),
        "dual_coefs": model.dual_coefs.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> SvrModel:
    """Load a model written by save_model; validates the schema version."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"corrupt model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("version") != MODEL_SCHEMA_VERSION:
        raise ModelFileError(
            f"unsupported model schema version {doc.get('version')!r} "
            f"(expected {MODEL_SCHEMA_VERSION})")
    if doc.get("kind") != "svr-rbf":
        raise ModelFileError(f"unsupported model kind {doc.get('kind')!r}")
    try:
        n_sv = len(doc["dual_coefs"])
        sv = np.asarray(doc["support_vectors"], dtype=np.float64)
        if n_sv == 0:
            sv = sv.reshape(0, len(doc["scaler"]["means"]))
        return SvrModel(
            support_vectors=sv,
            dual_coefs=np.asarray(doc["dual_coefs"], dtype=np.float64),
            bias=float(doc["bias"]),
            gamma=float(doc["gamma"]),
            C=float(doc["C"]),
            epsilon=float(doc["epsilon"]),
            scaler=FeatureScaler(
                means=np.asarray(doc["scaler"]["means"], dtype=np.float64),
                stds=np.asarray(doc["scaler"]["stds"], dtype=np.float64)),
            mos_scale=float(doc["mos_scale"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from None
