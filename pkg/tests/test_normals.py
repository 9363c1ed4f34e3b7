import numpy as np
import pytest

from thinedge.errors import DegenerateError
from thinedge.neighborhood import LocalSphericalCurve, build_index, local_spherical_curve
from thinedge.normals import estimate_normal, fit_great_circle, pca_normal
from thinedge.synth import ShapeSpec, generate

from oracles import random_rotation


def angle_deg(a, b, unsigned=False):
    c = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    if unsigned:
        c = abs(c)
    return np.degrees(np.arccos(np.clip(c, -1, 1)))


def equator(m=64, phase=0.0):
    t = phase + np.arange(m) * 2 * np.pi / m
    return np.c_[np.cos(t), np.sin(t), np.zeros(m)]


def edge_curve(n_top=40, n_side=24):
    """Arc of z = 0 (x <= 0) closed by an arc of x = 0 (z <= 0)."""
    t = np.linspace(np.pi / 2, 3 * np.pi / 2, n_top, endpoint=False)
    top = np.c_[np.cos(t), np.sin(t), np.zeros(n_top)]
    s = np.linspace(-np.pi / 2, np.pi / 2, n_side, endpoint=False)
    side = np.c_[np.zeros(n_side), -np.sin(s), -np.cos(s)]
    return np.vstack([top, side])


def test_equator_fit():
    fit = fit_great_circle(equator(), tol=0.05, iterations=64, seed=0)
    assert abs(abs(fit.plane_normal[2]) - 1) <= 1e-12
    assert len(fit.inlier_indices) == 64 and len(fit.outlier_indices) == 0


def test_two_semicircles_split():
    t = np.linspace(0, np.pi, 32, endpoint=False)
    upper = np.c_[np.cos(t), np.sin(t), np.zeros(32)]  # z = 0, y >= 0
    lower = np.c_[np.cos(t + np.pi), np.zeros(32), np.sin(t + np.pi)]  # y = 0, z <= 0
    q = np.vstack([upper, lower])
    fit = fit_great_circle(q, tol=0.05, iterations=256, seed=3)
    assert 0.4 * 64 <= len(fit.inlier_indices) <= 0.7 * 64
    n = fit.plane_normal
    assert min(angle_deg(n, [0, 0, 1], True), angle_deg(n, [0, 1, 0], True)) < 1e-6


def test_partition_matches_refined_plane():
    q = edge_curve()
    fit = fit_great_circle(q, 0.05, 256, seed=1)
    r = np.abs(q @ fit.plane_normal)
    assert np.all(r[fit.inlier_indices] <= 0.05)
    assert np.all(r[fit.outlier_indices] > 0.05)
    assert abs(np.linalg.norm(fit.plane_normal) - 1) <= 1e-9


def test_noisy_equator_within_two_degrees():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        q = equator(phase=rng.uniform(0, 1))
        q = q + rng.normal(0, 0.01, size=q.shape)
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        n = estimate_normal(q, 0.05, 256, seed=seed)
        worst = max(worst, angle_deg(n, [0, 0, 1], True))
    assert worst <= 2.0


def test_orientation_points_away_from_rest():
    q = edge_curve()
    fit = fit_great_circle(q, 0.05, 256, seed=0)
    n = estimate_normal(q, 0.05, 256, seed=0)
    assert n @ q[fit.outlier_indices].mean(axis=0) <= 0
    np.testing.assert_allclose(n, [0, 0, 1], atol=1e-9)


def test_equator_fallback_sign():
    n = estimate_normal(equator(), 0.05, 64, seed=0)
    np.testing.assert_allclose(n, [0, 0, 1], atol=1e-12)
    frame = np.array([[1.0, 0, 0], [0, -1, 0], [0, 0, -1]])
    curve = LocalSphericalCurve(0, equator(), equator()[:3], frame)
    np.testing.assert_allclose(estimate_normal(curve, 0.05, 64, seed=0), [0, 0, -1], atol=1e-12)


def test_rotation_equivariance():
    rng = np.random.default_rng(4)
    q = edge_curve()
    n = estimate_normal(q, 0.05, 256, seed=2)
    for _ in range(5):
        r = random_rotation(rng)
        nr = estimate_normal(q @ r.T, 0.05, 256, seed=2)
        assert angle_deg(nr, r @ n) <= 2.0


def test_deterministic_given_seed():
    rng = np.random.default_rng(0)
    q = equator() + rng.normal(0, 0.02, (64, 3))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    a = fit_great_circle(q, 0.05, 100, seed=9)
    b = fit_great_circle(q, 0.05, 100, seed=9)
    np.testing.assert_array_equal(a.plane_normal, b.plane_normal)


def test_degenerate_curve():
    q = np.tile([[0.0, 0.0, 1.0]], (16, 1))
    with pytest.raises(DegenerateError):
        fit_great_circle(q, 0.05, 32, seed=0)


def test_argument_checks():
    with pytest.raises(ValueError):
        fit_great_circle(equator(6), 0.05)
    with pytest.raises(ValueError):
        fit_great_circle(equator(), 0.6)


def test_plate_interior_normals():
    cloud, _ = generate(ShapeSpec("plate", (20, 20), 3, 0.5, 0.001, 3))
    p = cloud.points
    idx = build_index(cloud)
    top = np.flatnonzero((np.abs(p[:, 2] - 3) < 0.01) & (np.abs(p[:, 0] - 10) < 4) & (np.abs(p[:, 1] - 10) < 4))
    errs = [
        angle_deg(estimate_normal(local_spherical_curve(cloud, idx, i), seed=int(i)), [0, 0, 1], True)
        for i in top[:40]
    ]
    assert max(errs) <= 5.0


def test_pca_normal():
    pts = np.c_[np.random.default_rng(0).uniform(size=(30, 2)), np.zeros(30)]
    assert angle_deg(pca_normal(pts), [0, 0, 1], True) < 1e-9
