import numpy as np
import pytest

from nss3dqa.errors import InsufficientPointsError
from nss3dqa.model_io import ColoredPointCloud
from nss3dqa.pc_features import (NeighborhoodIndex, covariance_eigen,
                                 eigenfeatures, project_pc_geometry)


def brute_knn(positions, i, k):
    d = np.linalg.norm(positions - positions[i], axis=1)
    cand = np.array([j for j in range(len(positions)) if j != i])
    order = np.lexsort((cand, d[cand]))
    return cand[order][:min(k, len(positions) - 1)]


def test_knn_brute_force_oracle(rng):
    for _ in range(25):
        n = int(rng.integers(3, 150))
        # Rounded coordinates force many exact distance ties.
        pts = np.round(rng.normal(size=(n, 3)), 1)
        for k in (1, 5, 10):
            index = NeighborhoodIndex(pts, k=k)
            for i in range(n):
                np.testing.assert_array_equal(index.query(i),
                                              brute_knn(pts, i, k))


def test_knn_duplicate_points(rng):
    base = rng.normal(size=(6, 3))
    pts = np.vstack([base, base, base])  # every point duplicated thrice
    index = NeighborhoodIndex(pts, k=5)
    for i in range(len(pts)):
        np.testing.assert_array_equal(index.query(i), brute_knn(pts, i, 5))


def test_query_all_matches_query(rng):
    pts = np.round(rng.normal(size=(80, 3)), 1)
    index = NeighborhoodIndex(pts, k=10)
    batch = index.query_all()
    for i in range(len(pts)):
        np.testing.assert_array_equal(batch[i], index.query(i))


def test_knn_small_cloud_clamps_k():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
    index = NeighborhoodIndex(pts, k=10)
    assert index.effective_k == 2
    np.testing.assert_array_equal(index.query(0), [1, 2])


def test_knn_needs_two_points():
    with pytest.raises(InsufficientPointsError):
        NeighborhoodIndex(np.zeros((1, 3)))


def test_covariance_eigen_trace(rng):
    for _ in range(50):
        pts = rng.normal(size=(12, 3))
        lams = covariance_eigen(pts)
        d = pts - pts.mean(axis=0)
        cov = d.T @ d / len(pts)
        assert lams[0] >= lams[1] >= lams[2] >= 0.0
        assert abs(lams.sum() - np.trace(cov)) <= 1e-9
        ref = np.sort(np.linalg.eigvalsh(cov))[::-1]
        np.testing.assert_allclose(lams, np.clip(ref, 0.0, None), atol=1e-10)


def test_eigenfeature_identities(rng):
    for _ in range(500):
        lams = np.sort(rng.uniform(0.0, 5.0, size=3))[::-1]
        cur, ani, lin, pla, sph = eigenfeatures(lams)
        assert abs((lin + pla) - ani) <= 1e-12
        assert abs((sph + ani) - 1.0) <= 1e-12


def test_eigenfeature_canonical_triples():
    # isotropic
    assert eigenfeatures([1.0, 1.0, 1.0]) == (1 / 3, 0.0, 0.0, 0.0, 1.0)
    # planar
    cur, ani, lin, pla, sph = eigenfeatures([1.0, 1.0, 0.0])
    assert (cur, ani, lin, pla, sph) == (0.0, 1.0, 0.0, 1.0, 0.0)
    # linear
    assert eigenfeatures([1.0, 0.0, 0.0]) == (0.0, 1.0, 1.0, 0.0, 0.0)
    # degenerate
    assert eigenfeatures([0.0, 0.0, 0.0]) == (0.0, 0.0, 0.0, 0.0, 0.0)


def _cloud(pts, rng):
    col = rng.integers(0, 256, size=(len(pts), 3)).astype(np.uint8)
    return ColoredPointCloud(pts, col)


def test_plane_and_line_statistics(rng):
    xy = rng.uniform(0, 1, size=(400, 2))
    plane = _cloud(np.column_stack([xy, np.zeros(400)]), rng)
    geo = project_pc_geometry(plane, k=10)
    # Exactly planar neighborhoods: lambda3 = 0, so Cur = Sph = 0 and
    # Ani = 1.
    assert np.all(geo.cur <= 1e-9)
    assert np.all(geo.sph <= 1e-9)
    np.testing.assert_allclose(geo.ani, 1.0, atol=1e-9)

    t = rng.uniform(0, 1, size=400)
    line = _cloud(np.column_stack([t, np.zeros(400), np.zeros(400)]), rng)
    geo = project_pc_geometry(line, k=10)
    assert np.median(geo.lin) > 0.9


def test_rotation_invariance(rng):
    pts = rng.normal(size=(200, 3))
    cloud = _cloud(pts, rng)
    # Random rotation via QR with positive diagonal.
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    rotated = ColoredPointCloud(pts @ q.T, cloud.colors)
    g1 = project_pc_geometry(cloud, k=10)
    g2 = project_pc_geometry(rotated, k=10)
    for name in ("cur", "ani", "lin", "pla", "sph"):
        np.testing.assert_allclose(getattr(g1, name), getattr(g2, name),
                                   atol=1e-9)


def test_isotropic_gaussian_eigen_ratio(rng):
    pts = rng.normal(size=(5000, 3))
    sub = pts[:200]
    ratios = []
    for i in range(50):
        d = np.linalg.norm(pts - sub[i], axis=1)
        nb = pts[np.argsort(d)[1:101]]
        lams = covariance_eigen(nb)
        ratios.append(lams[0] / lams[2])
    assert np.median(ratios) < 1.6


def test_include_self_changes_result(rng):
    pts = rng.normal(size=(60, 3))
    cloud = _cloud(pts, rng)
    g1 = project_pc_geometry(cloud, k=5, include_self=False)
    g2 = project_pc_geometry(cloud, k=5, include_self=True)
    assert not np.allclose(g1.cur, g2.cur)
