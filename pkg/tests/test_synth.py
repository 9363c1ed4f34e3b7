import numpy as np
import pytest

from thinedge.errors import SpecError
from thinedge.synth import ShapeSpec, format_spec, generate, parse_spec, shape_faces


def face_distance(points, faces):
    """Distance from each point to the nearest face rectangle (brute force)."""
    best = np.full(len(points), np.inf)
    for f in faces:
        rel = points - f.origin
        s = np.clip(rel @ f.u / (f.u @ f.u), 0, 1)
        t = np.clip(rel @ f.v / (f.v @ f.v), 0, 1)
        foot = f.origin + s[:, None] * f.u + t[:, None] * f.v
        best = np.minimum(best, np.linalg.norm(points - foot, axis=1))
    return best


@pytest.mark.parametrize("kind", ["plate", "box", "l-bracket"])
def test_noise_free_points_lie_on_surface(kind):
    spec = ShapeSpec(kind, thickness=3, resolution=0.5, seed=2)
    cloud, gt = generate(spec)
    assert face_distance(cloud.points, shape_faces(spec)).max() <= 1e-12
    assert gt.max_spacing() <= 0.05
    assert all(len(p) >= 2 for p in gt.polylines)


def test_plate_side_faces_have_six_rows():
    spec = ShapeSpec("plate", (20, 20), thickness=3, resolution=0.5, seed=0)
    cloud, _ = generate(spec)
    p = cloud.points
    side = np.isclose(p[:, 0], 0.0, atol=0) & (p[:, 1] > 1) & (p[:, 1] < 19)
    # Row count across the thickness: distinct z bands on the x = 0 face.
    rows = np.unique(np.floor(p[side, 2] / 0.5))
    assert len(rows) >= 6
    # Every point sits exactly on one of the slab's six planes.
    on_plane = (
        np.isin(p[:, 0], (0.0, 20.0)) | np.isin(p[:, 1], (0.0, 20.0)) | np.isin(p[:, 2], (0.0, 3.0))
    )
    assert on_plane.all()


def test_noise_rms_matches_sigma():
    base = ShapeSpec("plate", (20, 20), thickness=3, resolution=0.5, seed=5)
    clean, _ = generate(base)
    noisy, _ = generate(ShapeSpec("plate", (20, 20), 3, 0.5, 0.001, 5))
    disp = np.linalg.norm(noisy.points - clean.points, axis=1)
    rms = np.sqrt(np.mean(disp**2))
    assert abs(rms - 0.001 * np.sqrt(3)) <= 0.2 * 0.001 * np.sqrt(3)


@pytest.mark.parametrize("res,lo,hi", [(0.8, 3, 4), (0.5, 6, 6), (0.3, 9, 10)])
def test_points_across_thickness(res, lo, hi):
    cloud, _ = generate(ShapeSpec("plate", (20, 20), 3, res, 0.0, 1))
    on_side = cloud.points[:, 0] == 0.0
    columns = round(20 / res)
    assert on_side.sum() % columns == 0
    assert lo <= on_side.sum() // columns <= hi


def test_determinism():
    spec = ShapeSpec("l-bracket", thickness=2.5, resolution=0.5, noise_sigma=0.005, seed=9)
    a, _ = generate(spec)
    b, _ = generate(spec)
    assert a.points.tobytes() == b.points.tobytes()


def test_count_scales_with_resolution_squared():
    n1 = len(generate(ShapeSpec("box", thickness=3, resolution=0.6, seed=0))[0])
    n2 = len(generate(ShapeSpec("box", thickness=3, resolution=0.3, seed=0))[0])
    assert abs(n2 / n1 - 4.0) <= 0.4


@pytest.mark.parametrize(
    "kw",
    [
        dict(resolution=0.0),
        dict(resolution=-1),
        dict(thickness=0),
        dict(noise_sigma=-0.1),
        dict(thickness=25),
        dict(resolution=31, thickness=3),
        dict(kind="sphere"),
        dict(extents=(1, 2, 3)),
    ],
)
def test_invalid_specs(kw):
    with pytest.raises(SpecError):
        ShapeSpec(**{"kind": "plate", **kw})


def test_spec_file_round_trip():
    spec = ShapeSpec("box", (18, 9, 12), 2.5, 0.4, 0.003, 77)
    assert parse_spec(format_spec(spec)) == spec
    with pytest.raises(SpecError):
        parse_spec("kind = plate\nresolution = 0\n")
    with pytest.raises(SpecError):
        parse_spec("colour = red\n")
