"""Point cloud container, XYZ / ASCII PLY serialization and ground-truth labeling."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import FormatError, ParseError, UnsupportedFormatError

# Named labeling presets (distance to the nearest ground-truth edge).
THIN_WALLED_THRESHOLD = 0.3
ABC_THRESHOLD = 0.025

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points with optional binary edge labels and unit normals.

    ``labels`` is a bool array (True = edge); ``normals`` is (N, 3).
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite coordinates")
        object.__setattr__(self, "points", pts)

        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (len(pts),):
                raise ValueError("labels length does not match points")
            if lab.dtype != bool:
                if not np.all(np.isin(lab, (0, 1))):
                    raise ValueError("labels must be 0 (non-edge) or 1 (edge)")
                lab = lab.astype(bool)
            object.__setattr__(self, "labels", lab)

        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=float)
            if nrm.shape != pts.shape:
                raise ValueError("normals shape does not match points")
            if len(nrm) and np.max(np.abs(np.linalg.norm(nrm, axis=1) - 1.0)) > 1e-6:
                raise ValueError("normals must have unit length")
            object.__setattr__(self, "normals", nrm)

        for arr in (self.points, self.labels, self.normals):
            if arr is not None:
                arr.setflags(write=False)

    def __len__(self):
        return len(self.points)

    def with_labels(self, labels) -> "PointCloud":
        return PointCloud(self.points, labels, self.normals)

    def with_normals(self, normals) -> "PointCloud":
        return PointCloud(self.points, self.labels, normals)

    def subset(self, indices) -> "PointCloud":
        idx = np.asarray(indices, dtype=int)
        return PointCloud(
            self.points[idx],
            None if self.labels is None else self.labels[idx],
            None if self.normals is None else self.normals[idx],
        )


@dataclass(frozen=True)
class GroundTruthEdges:
    """Dense polylines sampling the true edge curves."""

    polylines: list = field(default_factory=list)

    def __post_init__(self):
        lines = [np.asarray(p, dtype=float).reshape(-1, 3) for p in self.polylines]
        for p in lines:
            if len(p) < 2:
                raise ValueError("every ground-truth polyline needs at least 2 points")
        object.__setattr__(self, "polylines", lines)

    @property
    def vertices(self) -> np.ndarray:
        if not self.polylines:
            return np.empty((0, 3))
        return np.vstack(self.polylines)

    def max_spacing(self) -> float:
        gaps = [np.linalg.norm(np.diff(p, axis=0), axis=1).max() for p in self.polylines]
        return max(gaps) if gaps else 0.0


# ---------------------------------------------------------------- XYZ


def _parse_rows(lines, source: str):
    rows = []
    ncols = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            vals = [float(v) for v in parts]
        except ValueError:
            raise ParseError(f"{source}: malformed number in {line!r}", lineno) from None
        if ncols is None:
            if len(vals) not in (3, 4, 6):
                raise FormatError(
                    f"{source}: line {lineno} has {len(vals)} columns; expected 3, 4 or 6"
                )
            ncols = len(vals)
        elif len(vals) != ncols:
            raise FormatError(
                f"{source}: line {lineno} has {len(vals)} columns, first data line had {ncols}"
            )
        if not all(np.isfinite(vals)):
            raise ParseError(f"{source}: non-finite value", lineno)
        rows.append(vals)
    return rows, ncols


def _cloud_from_rows(rows, ncols) -> PointCloud:
    if not rows:
        return PointCloud(np.empty((0, 3)))
    data = np.array(rows, dtype=float)
    if ncols == 3:
        return PointCloud(data)
    if ncols == 4:
        lab = data[:, 3]
        if not np.all(np.isin(lab, (0.0, 1.0))):
            raise FormatError("label column must contain only 0 or 1")
        return PointCloud(data[:, :3], lab.astype(bool))
    return PointCloud(data[:, :3], normals=data[:, 3:6])


def read_xyz(path) -> PointCloud:
    """Read a whitespace-separated XYZ file with 3, 4 (label) or 6 (normal) columns."""
    path = Path(path)
    with path.open("r") as fh:
        rows, ncols = _parse_rows(fh, str(path))
    return _cloud_from_rows(rows, ncols)


def _columns(cloud: PointCloud) -> np.ndarray:
    cols = [cloud.points]
    if cloud.normals is not None:
        cols.append(cloud.normals)
    elif cloud.labels is not None:
        cols.append(cloud.labels.astype(float)[:, None])
    return np.hstack(cols)


def write_xyz(cloud: PointCloud, path) -> None:
    """Write ``cloud`` as XYZ using round-trip exact decimals.

    Normals take precedence over labels since the format has no 7-column variant.
    """
    data = _columns(cloud)
    ncols = data.shape[1]
    fmt = [_FLOAT_FMT] * ncols
    if ncols == 4:
        fmt[3] = "%d"
    with Path(path).open("w") as fh:
        if len(data):
            np.savetxt(fh, data, fmt=fmt)


# ---------------------------------------------------------------- PLY


def read_ply(path) -> PointCloud:
    """Read the vertex element of an ASCII PLY file."""
    path = Path(path)
    with path.open("r", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise UnsupportedFormatError(f"{path}: missing 'ply' magic")

    elements = []  # (name, count, [property names])
    fmt = None
    body_start = None
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1] if len(tok) > 1 else ""
        elif tok[0] == "element":
            if len(tok) != 3:
                raise ParseError(f"{path}: bad element line", lineno)
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise ParseError(f"{path}: property before element", lineno)
            if tok[1] == "list":
                elements[-1][2].append(("list", tok[-1]))
            else:
                elements[-1][2].append((tok[1], tok[-1]))
        elif tok[0] == "end_header":
            body_start = lineno
            break
    if fmt != "ascii":
        raise UnsupportedFormatError(f"{path}: only 'format ascii 1.0' is supported (got {fmt})")
    if body_start is None:
        raise FormatError(f"{path}: missing end_header")
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise UnsupportedFormatError(f"{path}: no 'element vertex' in header")

    # Skip any elements declared before the vertices.
    cursor = body_start
    for name, count, props in elements:
        if name == "vertex":
            break
        cursor += count
    _, count, props = elements[names.index("vertex")]
    pnames = [p[1] for p in props]
    for req in ("x", "y", "z"):
        if req not in pnames:
            raise FormatError(f"{path}: vertex element lacks property {req}")
    if any(p[0] == "list" for p in props):
        raise UnsupportedFormatError(f"{path}: list properties on vertices are not supported")

    body = lines[cursor:cursor + count]
    if len(body) < count:
        raise FormatError(f"{path}: expected {count} vertices, found {len(body)}")
    rows = []
    for off, line in enumerate(body):
        parts = line.split()
        if len(parts) != len(pnames):
            raise ParseError(f"{path}: expected {len(pnames)} values", cursor + off + 1)
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise ParseError(f"{path}: malformed number", cursor + off + 1) from None
    data = np.array(rows, dtype=float).reshape(count, len(pnames))
    col = {n: i for i, n in enumerate(pnames)}
    pts = data[:, [col["x"], col["y"], col["z"]]]
    normals = None
    if all(n in col for n in ("nx", "ny", "nz")):
        normals = data[:, [col["nx"], col["ny"], col["nz"]]]
    labels = None
    if "label" in col:
        labels = data[:, col["label"]].astype(int)
    return PointCloud(pts, labels, normals)


def write_ply(cloud: PointCloud, path) -> None:
    header = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}"]
    header += [f"property float {c}" for c in "xyz"]
    cols = [cloud.points]
    fmt = [_FLOAT_FMT] * 3
    if cloud.normals is not None:
        header += [f"property float {c}" for c in ("nx", "ny", "nz")]
        cols.append(cloud.normals)
        fmt += [_FLOAT_FMT] * 3
    if cloud.labels is not None:
        header.append("property uchar label")
        cols.append(cloud.labels.astype(float)[:, None])
        fmt.append("%d")
    header.append("end_header")
    with Path(path).open("w") as fh:
        fh.write("\n".join(header) + "\n")
        if len(cloud):
            np.savetxt(fh, np.hstack(cols), fmt=fmt)


def read_cloud(path) -> PointCloud:
    """Dispatch on extension: ``.ply`` is PLY, anything else XYZ."""
    return read_ply(path) if Path(path).suffix.lower() == ".ply" else read_xyz(path)


def write_cloud(cloud: PointCloud, path) -> None:
    if Path(path).suffix.lower() == ".ply":
        write_ply(cloud, path)
    else:
        write_xyz(cloud, path)


# ---------------------------------------------------------------- ground truth


def write_gt(gt: GroundTruthEdges, path) -> None:
    """Write polylines as XYZ blocks separated by ``# polyline`` comments.

    Plain XYZ readers see the union of all vertices.
    """
    with Path(path).open("w") as fh:
        for i, line in enumerate(gt.polylines):
            fh.write(f"# polyline {i}\n")
            np.savetxt(fh, line, fmt=_FLOAT_FMT)


def read_gt(path) -> GroundTruthEdges:
    path = Path(path)
    polylines, current = [], []
    with path.open("r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# polyline") and current:
                    polylines.append(current)
                    current = []
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ParseError(f"{path}: expected 3 coordinates", lineno)
            try:
                current.append([float(v) for v in parts[:3]])
            except ValueError:
                raise ParseError(f"{path}: malformed number", lineno) from None
    if current:
        polylines.append(current)
    return GroundTruthEdges(polylines)


def label_ground_truth(
    cloud: PointCloud, gt: GroundTruthEdges, threshold: float = THIN_WALLED_THRESHOLD
) -> PointCloud:
    """Label points within ``threshold`` of the nearest ground-truth vertex as edges."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    verts = gt.vertices
    if len(verts) == 0:
        raise ValueError("ground truth has no edges")
    if len(cloud) == 0:
        return cloud.with_labels(np.zeros(0, dtype=bool))
    dist, _ = cKDTree(verts).query(cloud.points, k=1)
    return cloud.with_labels(dist <= threshold)


def concat(clouds: Sequence[PointCloud]) -> PointCloud:
    pts = np.vstack([c.points for c in clouds])
    labels = None
    if all(c.labels is not None for c in clouds):
        labels = np.concatenate([c.labels for c in clouds])
    return PointCloud(pts, labels)
