"""Point-cloud geometry feature domains.

Each point is described by the eigenvalues of the covariance of its
k-nearest neighborhood (k defaults to 10), from which curvature,
anisotropy, linearity, planarity, and sphericity are derived.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import InsufficientPointsError
from .model_io import ColoredPointCloud

DEFAULT_K = 10


class NeighborhoodIndex:
    """kd-tree over the cloud positions with deterministic kNN queries.

    Queries exclude the query point itself, return min(k, N-1) indices
    sorted by ascending Euclidean distance, and break distance ties by
    ascending point index.
    """

    def __init__(self, positions, k=DEFAULT_K):
        self.positions = np.ascontiguousarray(positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must be an (N, 3) array")
        if len(self.positions) < 2:
            raise InsufficientPointsError(
                f"need at least 2 points for neighborhoods, got {len(self.positions)}")
        self.k = int(k)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        self.tree = cKDTree(self.positions)

    @property
    def effective_k(self):
        return min(self.k, len(self.positions) - 1)

    def query(self, i):
        """Indices of the k nearest neighbors of point i (self excluded)."""
        n = len(self.positions)
        if i < 0 or i >= n:
            raise IndexError(f"point index {i} out of range")
        k_eff = self.effective_k
        # Over-query so self-removal and boundary ties can be resolved.
        m = min(k_eff + 2, n)
        dist, idx = self.tree.query(self.positions[i], k=m)
        dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
        keep = idx != i
        cand_idx = idx[keep]
        cand_dist = dist[keep]
        cut = np.sort(cand_dist)[k_eff - 1]
        if m < n and cut == cand_dist.max():
            # Points tied at the cut distance may be missing from the
            # over-query; resolve with an exact radius query.
            ball = self.tree.query_ball_point(self.positions[i],
                                              cut * (1 + 1e-12) + 1e-300)
            cand_idx = np.array([j for j in ball if j != i], dtype=np.int64)
            cand_dist = np.linalg.norm(self.positions[cand_idx]
                                       - self.positions[i], axis=1)
        order = np.lexsort((cand_idx, cand_dist))
        return cand_idx[order][:k_eff]

    def query_all(self):
        """(N, k_eff) neighbor index array for every point.

        Batched version of query(); rows with an ambiguous distance tie
        at the neighborhood boundary fall back to the exact per-point
        path.
        """
        n = len(self.positions)
        k_eff = self.effective_k
        m = min(k_eff + 2, n)
        dist, idx = self.tree.query(self.positions, k=m)
        self_mask = idx == np.arange(n)[:, None]
        dist = np.where(self_mask, np.inf, dist)
        # Two stable argsorts give a row-wise (distance, index) lexsort.
        o1 = np.argsort(idx, axis=1, kind="stable")
        dist1 = np.take_along_axis(dist, o1, axis=1)
        idx1 = np.take_along_axis(idx, o1, axis=1)
        o2 = np.argsort(dist1, axis=1, kind="stable")
        dist2 = np.take_along_axis(dist1, o2, axis=1)
        idx2 = np.take_along_axis(idx1, o2, axis=1)
        out = np.ascontiguousarray(idx2[:, :k_eff], dtype=np.int64)
        if m < n:
            has_self = self_mask.any(axis=1)
            max_finite = np.where(has_self, dist2[:, m - 2], dist2[:, m - 1])
            ambiguous = np.flatnonzero(dist2[:, k_eff - 1] == max_finite)
            for i in ambiguous:
                out[i] = self.query(i)
        return out


def knn_query(index: NeighborhoodIndex, i: int):
    """Functional wrapper around NeighborhoodIndex.query."""
    return index.query(i)


def covariance_eigen(neighborhood):
    """Descending covariance eigenvalues of a set of 3D points.

    Uses the population covariance (divide by the neighborhood size) and
    the closed-form symmetric 3x3 solve; tiny negative roots are clamped
    to zero.
    """
    pts = np.atleast_2d(np.asarray(neighborhood, dtype=np.float64))
    if pts.shape[0] < 1:
        raise ValueError("neighborhood must contain at least one point")
    d = pts - pts.mean(axis=0)
    cov = d.T @ d / len(pts)
    return kernels.eigvalsh3(cov)


def eigenfeatures(lams):
    """(Cur, Ani, Lin, Pla, Sph) from one sorted eigenvalue triple."""
    feats = kernels.eigenfeatures_from_lambdas(np.asarray(lams, dtype=np.float64))
    return tuple(feats)


@dataclass
class PcGeometryDomains:
    """Per-point geometry feature domains of one point cloud."""

    cur: np.ndarray
    ani: np.ndarray
    lin: np.ndarray
    pla: np.ndarray
    sph: np.ndarray

    def as_dict(self):
        return {"Cur": self.cur, "Ani": self.ani, "Lin": self.lin,
                "Pla": self.pla, "Sph": self.sph}


def project_pc_geometry(cloud: ColoredPointCloud, k=DEFAULT_K,
                        include_self=False) -> PcGeometryDomains:
    """Project a cloud into its five geometry feature domains.

    include_self adds the query point to its own neighborhood before the
    covariance is taken (off by default).
    """
    index = NeighborhoodIndex(cloud.positions, k=k)
    neighbors = index.query_all()
    feats = kernels.eigenfeatures_from_neighbors(cloud.positions, neighbors,
                                                 include_self)
    return PcGeometryDomains(cur=feats[:, 0], ani=feats[:, 1], lin=feats[:, 2],
                             pla=feats[:, 3], sph=feats[:, 4])
