"""Structure-aware local spherical curves.

For a point p_i the k nearest neighbours are pushed radially onto the unit
sphere centred at p_i. The projected directions are flattened onto their
principal plane, the 2D convex hull picks the key points, and a closed
cubic spline through the key points (fitted in 3D, then re-normalised)
gives the curve.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import ConvexHull, cKDTree

from .errors import DegenerateError
from .pointcloud import PointCloud

DEFAULT_K = 26
DEFAULT_SAMPLES = 64
DUPLICATE_EPS = 1e-12
COLLINEAR_EPS = 1e-9


class SpatialIndex:
    """Exact k-NN over a fixed point set (scipy kd-tree)."""

    def __init__(self, points):
        self.points = np.asarray(points, dtype=float)
        if len(self.points) == 0:
            raise ValueError("cannot index an empty point set")
        self._tree = cKDTree(self.points)

    def __len__(self):
        return len(self.points)

    def knn(self, q, k: int) -> np.ndarray:
        """Indices of the ``k`` nearest points to ``q``, nearest first.

        ``k`` is clamped to the number of indexed points.
        """
        k = min(int(k), len(self.points))
        if k <= 0:
            return np.empty(0, dtype=int)
        _, idx = self._tree.query(np.asarray(q, dtype=float), k=k)
        return np.atleast_1d(idx).astype(int)

    def knn_batch(self, queries, k: int) -> tuple[np.ndarray, np.ndarray]:
        k = min(int(k), len(self.points))
        dist, idx = self._tree.query(np.asarray(queries, dtype=float), k=k)
        if k == 1:
            dist, idx = dist[:, None], idx[:, None]
        return dist, idx.astype(int)


def build_index(cloud: PointCloud) -> SpatialIndex:
    return SpatialIndex(cloud.points)


@dataclass(frozen=True, eq=False)
class LocalSphericalCurve:
    center_index: int
    samples: np.ndarray  # (M, 3) unit vectors, closed loop
    keypoints: np.ndarray  # (h, 3) hull key points in loop order
    frame: Optional[np.ndarray] = None  # rows: principal axes of the neighbourhood


def normalize_directions(center, neighbors) -> tuple[np.ndarray, int]:
    """Unit directions from ``center`` to ``neighbors``; coincident points dropped."""
    d = np.asarray(neighbors, dtype=float) - np.asarray(center, dtype=float)
    r = np.linalg.norm(d, axis=1)
    keep = r >= DUPLICATE_EPS
    return d[keep] / r[keep, None], int(np.count_nonzero(~keep))


def spherical_neighborhood(
    cloud: PointCloud, index: SpatialIndex, i: int, k: int = DEFAULT_K, neighbors=None
) -> tuple[np.ndarray, int]:
    """Return (Q_i, number of dropped duplicates) for point ``i``.

    ``neighbors`` may pass precomputed k-NN indices (self included or not).
    """
    if not 0 <= i < len(cloud):
        raise IndexError(f"point index {i} out of range for {len(cloud)} points")
    if k < 4:
        raise ValueError("k must be at least 4")
    if neighbors is None:
        neighbors = index.knn(cloud.points[i], k + 1)
    neighbors = np.asarray(neighbors)
    neighbors = neighbors[neighbors != i][:k]
    q, dropped = normalize_directions(cloud.points[i], cloud.points[neighbors])
    if len(q) < 4:
        raise DegenerateError(f"point {i}: only {len(q)} usable neighbours")
    return q, dropped


def principal_frame(q: np.ndarray) -> np.ndarray:
    """Principal axes of ``q`` as rows, largest variance first.

    Signs: third axis has non-negative dot with mean(q); first axis has
    non-negative third moment of the projections; the frame is right-handed.
    These choices make the frame rotate with the data.
    """
    mean = q.mean(axis=0)
    c = q - mean
    _, vecs = np.linalg.eigh(c.T @ c)
    a1, a3 = vecs[:, 2], vecs[:, 0]
    if a3 @ mean < 0:
        a3 = -a3
    if np.sum((c @ a1) ** 3) < 0:
        a1 = -a1
    a2 = np.cross(a3, a1)
    return np.vstack([a1, a2, a3])


def hull_indices(q: np.ndarray, frame: Optional[np.ndarray] = None) -> np.ndarray:
    """Indices into ``q`` of the 2D hull vertices of its principal-plane projection.

    Counter-clockwise, starting from the lexicographically smallest projection.
    """
    q = np.asarray(q, dtype=float)
    if len(q) < 4:
        raise DegenerateError("need at least 4 directions for a hull")
    if frame is None:
        frame = principal_frame(q)
    xy = q @ frame[:2].T
    sv = np.linalg.svd(xy - xy.mean(axis=0), compute_uv=False)
    if sv[1] <= COLLINEAR_EPS * max(1.0, sv[0]):
        raise DegenerateError("projected neighbourhood is collinear")
    verts = ConvexHull(xy).vertices  # CCW for 2D input
    start = min(range(len(verts)), key=lambda j: (xy[verts[j], 0], xy[verts[j], 1]))
    return np.roll(verts, -start)


def convex_hull_keypoints(q: np.ndarray, frame: Optional[np.ndarray] = None) -> np.ndarray:
    """Hull key points as the original unit vectors, in hull order."""
    q = np.asarray(q, dtype=float)
    return q[hull_indices(q, frame)]


def periodic_spline(keypoints: np.ndarray) -> tuple[CubicSpline, float]:
    """Closed interpolating cubic spline with chord-length parameterisation."""
    k = np.asarray(keypoints, dtype=float)
    if len(k) < 3:
        raise DegenerateError(f"need at least 3 key points, got {len(k)}")
    loop = np.vstack([k, k[:1]])
    chords = np.linalg.norm(np.diff(loop, axis=0), axis=1)
    if np.any(chords <= 0):
        raise DegenerateError("repeated key points")
    t = np.concatenate([[0.0], np.cumsum(chords)])
    return CubicSpline(t, loop, bc_type="periodic"), float(t[-1])


def fit_spherical_curve(
    keypoints: np.ndarray, m: int = DEFAULT_SAMPLES, center_index: int = -1, frame=None
) -> LocalSphericalCurve:
    if m < 16:
        raise ValueError("curve needs at least 16 samples")
    spline, period = periodic_spline(keypoints)
    pts = spline(np.arange(m) * (period / m))
    r = np.linalg.norm(pts, axis=1)
    if np.any(r < 1e-12):
        raise DegenerateError("spline passes through the sphere centre")
    return LocalSphericalCurve(
        center_index, pts / r[:, None], np.asarray(keypoints, dtype=float), frame
    )


def local_spherical_curve(
    cloud: PointCloud,
    index: SpatialIndex,
    i: int,
    k: int = DEFAULT_K,
    m: int = DEFAULT_SAMPLES,
    neighbors=None,
) -> LocalSphericalCurve:
    q, _ = spherical_neighborhood(cloud, index, i, k, neighbors)
    frame = principal_frame(q)
    keys = convex_hull_keypoints(q, frame)
    return fit_spherical_curve(keys, m, center_index=i, frame=frame)


def write_curve_xyz(curve: LocalSphericalCurve, path) -> None:
    """Debug dump: the closed sample polyline (first sample repeated at the end)."""
    loop = np.vstack([curve.samples, curve.samples[:1]])
    np.savetxt(path, loop, fmt="%.17g")
