"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the NSS3DQA_BACKEND
environment variable: "numba" forces the jit path (and fails loudly if
numba is unavailable), "numpy" forces the fallback, anything else (or
unset) uses numba when importable.  Both paths produce identical results
up to floating-point noise; benchmarks/bench_backends.py compares their
speed.
"""

from __future__ import annotations

import math
import os

import numpy as np

_EPS = 1e-12


def _select_backend():
    choice = os.environ.get("NSS3DQA_BACKEND", "auto").lower()
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"


BACKEND = _select_backend()


def get_backend():
    """Name of the active kernel backend ("numba" or "numpy")."""
    return BACKEND


def eigvalsh3(cov):
    """Descending eigenvalues of a symmetric 3x3 matrix, clamped to >= 0.

    Closed-form trigonometric solve; tiny negative roots from rounding
    are clamped to zero.
    """
    a11, a12, a13 = cov[0, 0], cov[0, 1], cov[0, 2]
    a22, a23, a33 = cov[1, 1], cov[1, 2], cov[2, 2]
    l1, l2, l3 = _eig3_scalar(a11, a12, a13, a22, a23, a33)
    return np.array([max(l1, 0.0), max(l2, 0.0), max(l3, 0.0)])


def _eig3_scalar(a11, a12, a13, a22, a23, a33):
    p1 = a12 * a12 + a13 * a13 + a23 * a23
    q = (a11 + a22 + a33) / 3.0
    if p1 <= _EPS * _EPS * max(1.0, q * q):
        vals = sorted((a11, a22, a33), reverse=True)
        return vals[0], vals[1], vals[2]
    p2 = (a11 - q) ** 2 + (a22 - q) ** 2 + (a33 - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    b11, b22, b33 = (a11 - q) / p, (a22 - q) / p, (a33 - q) / p
    b12, b13, b23 = a12 / p, a13 / p, a23 / p
    detb = (b11 * (b22 * b33 - b23 * b23)
            - b12 * (b12 * b33 - b23 * b13)
            + b13 * (b12 * b23 - b22 * b13))
    r = min(1.0, max(-1.0, detb / 2.0))
    phi = math.acos(r) / 3.0
    e1 = q + 2.0 * p * math.cos(phi)
    e3 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    return e1, e2, e3


def eigenfeatures_from_lambdas(lams):
    """Map sorted eigenvalue triples (n, 3) to the five local shape features.

    Columns of the result: curvature, anisotropy, linearity, planarity,
    sphericity.  Degenerate triples (sum below the guard) map to zeros.
    """
    lams = np.asarray(lams, dtype=np.float64)
    squeeze = lams.ndim == 1
    lams = np.atleast_2d(lams)
    l1, l2, l3 = lams[:, 0], lams[:, 1], lams[:, 2]
    s = l1 + l2 + l3
    ok = s >= _EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        cur = np.where(ok, l3 / s, 0.0)
        ani = np.where(ok, (l1 - l3) / l1, 0.0)
        lin = np.where(ok, (l1 - l2) / l1, 0.0)
        pla = np.where(ok, (l2 - l3) / l1, 0.0)
        sph = np.where(ok, l3 / l1, 0.0)
    out = np.stack([cur, ani, lin, pla, sph], axis=1)
    out[~np.isfinite(out)] = 0.0
    return out[0] if squeeze else out


def _eigenfeatures_numpy(positions, neighbors, include_self):
    nb = positions[neighbors]  # (N, k, 3)
    if include_self:
        nb = np.concatenate([positions[:, None, :], nb], axis=1)
    centroid = nb.mean(axis=1, keepdims=True)
    d = nb - centroid
    cov = np.einsum("nki,nkj->nij", d, d) / nb.shape[1]
    lams = np.linalg.eigvalsh(cov)[:, ::-1]
    lams = np.clip(lams, 0.0, None)
    return eigenfeatures_from_lambdas(lams)


if BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _eigenfeatures_numba(positions, neighbors, include_self):
        n, k = neighbors.shape
        out = np.zeros((n, 5))
        for i in range(n):
            # Neighborhood covariance (population normalization).
            cx = cy = cz = 0.0
            m = k + 1 if include_self else k
            for j in range(k):
                p = positions[neighbors[i, j]]
                cx += p[0]
                cy += p[1]
                cz += p[2]
            if include_self:
                cx += positions[i, 0]
                cy += positions[i, 1]
                cz += positions[i, 2]
            cx /= m
            cy /= m
            cz /= m
            a11 = a12 = a13 = a22 = a23 = a33 = 0.0
            for j in range(m):
                if include_self and j == k:
                    p = positions[i]
                else:
                    p = positions[neighbors[i, j]]
                dx = p[0] - cx
                dy = p[1] - cy
                dz = p[2] - cz
                a11 += dx * dx
                a12 += dx * dy
                a13 += dx * dz
                a22 += dy * dy
                a23 += dy * dz
                a33 += dz * dz
            a11 /= m
            a12 /= m
            a13 /= m
            a22 /= m
            a23 /= m
            a33 /= m
            l1, l2, l3 = _eig3_jit(a11, a12, a13, a22, a23, a33)
            if l1 < 0.0:
                l1 = 0.0
            if l2 < 0.0:
                l2 = 0.0
            if l3 < 0.0:
                l3 = 0.0
            s = l1 + l2 + l3
            if s < _EPS or l1 < _EPS:
                if s >= _EPS:
                    out[i, 0] = l3 / s
                continue
            out[i, 0] = l3 / s
            out[i, 1] = (l1 - l3) / l1
            out[i, 2] = (l1 - l2) / l1
            out[i, 3] = (l2 - l3) / l1
            out[i, 4] = l3 / l1
        return out

    @njit(cache=True, inline="always")
    def _eig3_jit(a11, a12, a13, a22, a23, a33):
        p1 = a12 * a12 + a13 * a13 + a23 * a23
        q = (a11 + a22 + a33) / 3.0
        if p1 <= _EPS * _EPS * max(1.0, q * q):
            l1 = max(a11, max(a22, a33))
            l3 = min(a11, min(a22, a33))
            l2 = a11 + a22 + a33 - l1 - l3
            return l1, l2, l3
        p2 = (a11 - q) ** 2 + (a22 - q) ** 2 + (a33 - q) ** 2 + 2.0 * p1
        p = math.sqrt(p2 / 6.0)
        b11 = (a11 - q) / p
        b22 = (a22 - q) / p
        b33 = (a33 - q) / p
        b12 = a12 / p
        b13 = a13 / p
        b23 = a23 / p
        detb = (b11 * (b22 * b33 - b23 * b23)
                - b12 * (b12 * b33 - b23 * b13)
                + b13 * (b12 * b23 - b22 * b13))
        r = detb / 2.0
        if r > 1.0:
            r = 1.0
        elif r < -1.0:
            r = -1.0
        phi = math.acos(r) / 3.0
        e1 = q + 2.0 * p * math.cos(phi)
        e3 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
        e2 = 3.0 * q - e1 - e3
        return e1, e2, e3

    def eigenfeatures_from_neighbors(positions, neighbors, include_self=False):
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        neighbors = np.ascontiguousarray(neighbors, dtype=np.int64)
        return _eigenfeatures_numba(positions, neighbors, include_self)

else:

    def eigenfeatures_from_neighbors(positions, neighbors, include_self=False):
        positions = np.asarray(positions, dtype=np.float64)
        neighbors = np.asarray(neighbors, dtype=np.int64)
        return _eigenfeatures_numpy(positions, neighbors, include_self)


eigenfeatures_from_neighbors.__doc__ = (
    "Per-point shape features from a cloud and its (N, k) neighbor index "
    "array.  Returns an (N, 5) array with columns curvature, anisotropy, "
    "linearity, planarity, sphericity."
)
