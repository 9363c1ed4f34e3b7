"""Pull detected edge points onto the intersection of neighbouring tangent planes.

Each point solves

    min_z  sum_j ((z - p_j) . n_j)^2 + mu * ||z - p_i||^2

over its k nearest neighbours. The normal equations are a 3x3 SPD system.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neighborhood import DEFAULT_K, SpatialIndex
from .pointcloud import PointCloud

DEFAULT_MU = 0.1


@dataclass(frozen=True)
class RefineConfig:
    mu: float = DEFAULT_MU
    k: int = DEFAULT_K

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.k < 3:
            raise ValueError("k must be at least 3")


def objective(z, p_i, neighbor_points, neighbor_normals, mu) -> float:
    d = np.einsum("jk,jk->j", np.asarray(z) - neighbor_points, neighbor_normals)
    return float(np.sum(d * d) + mu * np.sum((np.asarray(z) - p_i) ** 2))


def refine_point(p_i, neighbor_points, neighbor_normals, mu: float = DEFAULT_MU) -> np.ndarray:
    p_i = np.asarray(p_i, dtype=float)
    pts = np.asarray(neighbor_points, dtype=float).reshape(-1, 3)
    nrm = np.asarray(neighbor_normals, dtype=float).reshape(-1, 3)
    if len(pts) == 0 or len(pts) != len(nrm):
        raise ValueError("need at least one neighbour with a matching normal")
    if not (np.all(np.isfinite(p_i)) and np.all(np.isfinite(pts)) and np.all(np.isfinite(nrm))):
        raise ValueError("non-finite input to refine_point")
    if not mu > 0:
        raise ValueError("mu must be positive")
    if np.max(np.abs(np.linalg.norm(nrm, axis=1) - 1.0)) > 1e-6:
        raise ValueError("neighbour normals must be unit length")
    a = nrm.T @ nrm + mu * np.eye(3)
    rhs = nrm.T @ np.einsum("jk,jk->j", nrm, pts) + mu * p_i
    return np.linalg.solve(a, rhs)


def refine_all(
    cloud: PointCloud,
    edge_indices,
    normals,
    config: RefineConfig = RefineConfig(),
    index: SpatialIndex | None = None,
) -> PointCloud:
    """Refined positions of ``edge_indices`` (neighbours come from the whole cloud)."""
    edge_indices = np.asarray(edge_indices, dtype=int).ravel()
    if len(edge_indices) == 0:
        return PointCloud(np.empty((0, 3)))
    normals = np.asarray(normals, dtype=float)
    if normals.shape != cloud.points.shape:
        raise ValueError("need one normal per cloud point")
    if np.any(edge_indices < 0) or np.any(edge_indices >= len(cloud)):
        raise IndexError("edge index out of range")
    if index is None:
        index = SpatialIndex(cloud.points)
    _, nbrs = index.knn_batch(cloud.points[edge_indices], config.k + 1)
    out = np.empty((len(edge_indices), 3))
    for row, (i, nb) in enumerate(zip(edge_indices, nbrs)):
        nb = nb[nb != i][: config.k]
        try:
            out[row] = refine_point(cloud.points[i], cloud.points[nb], normals[nb], config.mu)
        except ValueError as exc:
            raise ValueError(f"refinement failed for point {i}: {exc}") from exc
    return PointCloud(out)
