"""Normal estimation by RANSAC great-circle fitting on a local spherical curve.

Neighbours co-planar with the centre land on a great circle; the plane of
that circle is the tangent plane. Samples off the circle (the adjacent
surface) fix the orientation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError
from .neighborhood import LocalSphericalCurve

DEFAULT_TOL = 0.05
DEFAULT_ITERATIONS = 256
MIN_ORIENTING_OUTLIERS = 3


@dataclass(frozen=True, eq=False)
class GreatCircleFit:
    plane_normal: np.ndarray
    inlier_indices: np.ndarray
    outlier_indices: np.ndarray


def _samples(curve) -> np.ndarray:
    if isinstance(curve, LocalSphericalCurve):
        return curve.samples
    return np.asarray(curve, dtype=float)


def fit_great_circle(
    curve, tol: float = DEFAULT_TOL, iterations: int = DEFAULT_ITERATIONS, seed: int = 0
) -> GreatCircleFit:
    q = _samples(curve)
    n = len(q)
    if n < 8:
        raise ValueError("great-circle fit needs at least 8 curve samples")
    if not 0 < tol < 0.5:
        raise ValueError("tol must lie in (0, 0.5)")

    rng = np.random.default_rng(seed)
    a = rng.integers(0, n, size=iterations)
    b = (a + rng.integers(1, n, size=iterations)) % n
    cand = np.cross(q[a], q[b])
    norm = np.linalg.norm(cand, axis=1)
    ok = norm >= 1e-9
    if not np.any(ok):
        raise DegenerateError("every sampled pair was near-parallel")
    cand = cand[ok] / norm[ok, None]

    resid = np.abs(cand @ q.T)  # (candidates, samples)
    inl = resid <= tol
    counts = inl.sum(axis=1)
    rms = np.sqrt(np.sum(np.where(inl, resid, 0.0) ** 2, axis=1) / np.maximum(counts, 1))
    best = np.lexsort((rms, -counts))[0]
    normal = cand[best]

    inliers = np.flatnonzero(inl[best])
    if len(inliers) >= 2:
        # Total least squares through the origin.
        _, _, vt = np.linalg.svd(q[inliers], full_matrices=False)
        refined = vt[-1]
        normal = refined / np.linalg.norm(refined)
    mask = np.abs(q @ normal) <= tol
    return GreatCircleFit(normal, np.flatnonzero(mask), np.flatnonzero(~mask))


def orient_normal(fit: GreatCircleFit, curve) -> np.ndarray:
    """Point the normal away from the off-circle samples.

    With fewer than three such samples there is nothing to orient against;
    fall back to the third principal axis of the neighbourhood (world +z if
    the curve carries no frame).
    """
    q = _samples(curve)
    normal = fit.plane_normal
    if len(fit.outlier_indices) >= MIN_ORIENTING_OUTLIERS:
        if normal @ q[fit.outlier_indices].mean(axis=0) > 0:
            normal = -normal
    else:
        frame = getattr(curve, "frame", None)
        up = frame[2] if frame is not None else np.array([0.0, 0.0, 1.0])
        if normal @ up < 0:
            normal = -normal
    return normal / np.linalg.norm(normal)


def estimate_normal(
    curve, tol: float = DEFAULT_TOL, iterations: int = DEFAULT_ITERATIONS, seed: int = 0
) -> np.ndarray:
    fit = fit_great_circle(curve, tol, iterations, seed)
    return orient_normal(fit, curve)


def pca_normal(points) -> np.ndarray:
    """Smallest-variance direction of a point set (used for degenerate curves)."""
    pts = np.asarray(points, dtype=float)
    _, _, vt = np.linalg.svd(pts - pts.mean(axis=0), full_matrices=False)
    return vt[-1] / np.linalg.norm(vt[-1])
