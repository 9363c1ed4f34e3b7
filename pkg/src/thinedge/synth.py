"""Parametric thin-walled shapes with exact ground-truth edges.

Every shape is an axis-aligned polygonal profile in the xz-plane extruded
along +y. Its boundary is a set of planar rectangles, each sampled on a
cell-centred grid with in-plane jitter, then optionally perturbed by
isotropic Gaussian noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import SpecError
from .pointcloud import GroundTruthEdges, PointCloud

KINDS = ("plate", "box", "l-bracket")

DEFAULT_EXTENTS = {
    "plate": (20.0, 20.0),  # length (x), width (y)
    "box": (20.0, 12.0, 20.0),  # length (x), height (z), depth (y); hollow square tube
    "l-bracket": (20.0, 12.0, 20.0),  # leg length (x), leg height (z), depth (y)
}

JITTER = 0.25  # fraction of resolution
GT_SPACING = 0.025


@dataclass(frozen=True)
class ShapeSpec:
    kind: str = "plate"
    extents: tuple = field(default=())
    thickness: float = 3.0
    resolution: float = 0.5
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown shape kind {self.kind!r}; expected one of {KINDS}")
        ext = tuple(float(e) for e in (self.extents or DEFAULT_EXTENTS[self.kind]))
        if len(ext) != len(DEFAULT_EXTENTS[self.kind]):
            raise SpecError(
                f"{self.kind} takes {len(DEFAULT_EXTENTS[self.kind])} extents, got {len(ext)}"
            )
        object.__setattr__(self, "extents", ext)
        if not all(math.isfinite(e) and e > 0 for e in ext):
            raise SpecError("extents must be positive")
        if not self.thickness > 0:
            raise SpecError("thickness must be positive")
        if not self.resolution > 0:
            raise SpecError("resolution must be positive")
        if not self.noise_sigma >= 0:
            raise SpecError("noise_sigma must be non-negative")
        lateral = min(ext)
        if self.kind == "box":
            lateral = min(ext[0], ext[1]) / 2
        if not self.thickness < lateral:
            raise SpecError("thickness must be smaller than the lateral extents")
        if self.resolution > 10 * self.thickness:
            raise SpecError(
                f"resolution {self.resolution} too coarse for thickness {self.thickness}"
            )


class Face(NamedTuple):
    """Planar rectangle ``origin + s*u + t*v`` for s, t in [0, 1]."""

    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def normal(self):
        n = np.cross(self.u, self.v)
        return n / np.linalg.norm(n)


def _profile(spec: ShapeSpec):
    """Return (rings, cap rectangles, depth) for the xz cross-section."""
    t = spec.thickness
    if spec.kind == "plate":
        length, width = spec.extents
        rings = [[(0, 0), (length, 0), (length, t), (0, t)]]
        caps = [(0, length, 0, t)]
        return rings, caps, width
    if spec.kind == "box":
        length, height, depth = spec.extents
        outer = [(0, 0), (length, 0), (length, height), (0, height)]
        inner = [(t, t), (t, height - t), (length - t, height - t), (length - t, t)]
        caps = [
            (0, length, 0, t),
            (0, length, height - t, height),
            (0, t, t, height - t),
            (length - t, length, t, height - t),
        ]
        return [outer, inner], caps, depth
    length, height, depth = spec.extents
    ring = [(0, 0), (length, 0), (length, t), (t, t), (t, height), (0, height)]
    caps = [(0, length, 0, t), (0, t, t, height)]
    return [ring], caps, depth


def shape_faces(spec: ShapeSpec) -> list:
    """Boundary rectangles of the shape (side walls of the extrusion, then both caps)."""
    rings, caps, depth = _profile(spec)
    faces = []
    along = np.array([0.0, depth, 0.0])
    for ring in rings:
        for a, b in zip(ring, ring[1:] + ring[:1]):
            faces.append(
                Face(
                    np.array([a[0], 0.0, a[1]], dtype=float),
                    np.array([b[0] - a[0], 0.0, b[1] - a[1]], dtype=float),
                    along,
                )
            )
    for y in (0.0, depth):
        for x0, x1, z0, z1 in caps:
            faces.append(
                Face(
                    np.array([x0, y, z0], dtype=float),
                    np.array([x1 - x0, 0.0, 0.0]),
                    np.array([0.0, 0.0, z1 - z0]),
                )
            )
    return faces


def _segment(a, b, spacing=GT_SPACING):
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = max(2, int(math.ceil(np.linalg.norm(b - a) / spacing)) + 1)
    return a + np.linspace(0.0, 1.0, n)[:, None] * (b - a)


def ground_truth_edges(spec: ShapeSpec) -> GroundTruthEdges:
    rings, _, depth = _profile(spec)
    lines = []
    for ring in rings:
        for x, z in ring:
            lines.append(_segment((x, 0, z), (x, depth, z)))
        for y in (0.0, depth):
            for a, b in zip(ring, ring[1:] + ring[:1]):
                lines.append(_segment((a[0], y, a[1]), (b[0], y, b[1])))
    return GroundTruthEdges(lines)


def _sample_face(face: Face, resolution, rng) -> np.ndarray:
    lu, lv = np.linalg.norm(face.u), np.linalg.norm(face.v)
    nu = max(1, int(round(lu / resolution)))
    nv = max(1, int(round(lv / resolution)))
    s, t = np.meshgrid((np.arange(nu) + 0.5) / nu, (np.arange(nv) + 0.5) / nv, indexing="ij")
    s, t = s.ravel(), t.ravel()
    jit = rng.uniform(-JITTER * resolution, JITTER * resolution, size=(2, s.size))
    s = np.clip(s + jit[0] / lu, 0.0, 1.0)
    t = np.clip(t + jit[1] / lv, 0.0, 1.0)
    return face.origin + s[:, None] * face.u + t[:, None] * face.v


def generate(spec: ShapeSpec) -> tuple[PointCloud, GroundTruthEdges]:
    """Sample the shape boundary and return (cloud, ground-truth edges)."""
    # Separate streams keep the noise-free positions identical across noise levels.
    jitter_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(2)
    jrng = np.random.default_rng(jitter_seq)
    pts = np.vstack([_sample_face(f, spec.resolution, jrng) for f in shape_faces(spec)])
    noise = np.random.default_rng(noise_seq).normal(0.0, 1.0, size=pts.shape)
    pts = pts + spec.noise_sigma * noise
    return PointCloud(pts), ground_truth_edges(spec)


_SPEC_KEYS = {
    "kind": str,
    "extents": lambda s: tuple(float(v) for v in s.replace(",", " ").split()),
    "thickness": float,
    "resolution": float,
    "noise_sigma": float,
    "seed": int,
}


def parse_spec(text: str) -> ShapeSpec:
    """Parse ``key = value`` lines (``#`` comments allowed) into a ShapeSpec."""
    kw = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SPEC_KEYS:
            raise SpecError(f"line {lineno}: unknown key {key!r}")
        try:
            kw[key] = _SPEC_KEYS[key](value)
        except ValueError:
            raise SpecError(f"line {lineno}: bad value for {key}: {value!r}") from None
    return ShapeSpec(**kw)


def read_spec(path) -> ShapeSpec:
    return parse_spec(Path(path).read_text())


def format_spec(spec: ShapeSpec) -> str:
    return "\n".join(
        [
            f"kind = {spec.kind}",
            "extents = " + " ".join(repr(e) for e in spec.extents),
            f"thickness = {spec.thickness!r}",
            f"resolution = {spec.resolution!r}",
            f"noise_sigma = {spec.noise_sigma!r}",
            f"seed = {spec.seed}",
        ]
    ) + "\n"
