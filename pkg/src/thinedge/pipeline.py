"""Whole-cloud analysis: curves -> descriptors + normals -> classification -> refinement."""
from __future__ import annotations

import hashlib
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .classifier import MlpModel, predict_proba
from .errors import DegenerateError, FormatError, ParseError
from .neighborhood import DEFAULT_K, DEFAULT_SAMPLES, SpatialIndex, local_spherical_curve
from .normals import DEFAULT_ITERATIONS, DEFAULT_TOL, estimate_normal, pca_normal
from .pointcloud import PointCloud
from .refine import DEFAULT_MU, RefineConfig, refine_all
from .sh import DEFAULT_BANDWIDTH, build_grid, descriptor, dsht, kde_on_grid

log = logging.getLogger(__name__)

THREADS_ENV = "STAR_EDGE_THREADS"
CHUNK = 512


@dataclass(frozen=True)
class RunConfig:
    k: int = DEFAULT_K
    bandwidth: int = DEFAULT_BANDWIDTH
    samples: int = DEFAULT_SAMPLES
    mu: float = DEFAULT_MU
    ransac_tol: float = DEFAULT_TOL
    ransac_iterations: int = DEFAULT_ITERATIONS
    ransac_seed: int = 0
    threshold: float = 0.5
    threads: int = 1


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class CloudAnalysis:
    descriptors: np.ndarray  # (N, B)
    normals: np.ndarray  # (N, 3)
    degenerate: np.ndarray  # (N,) bool


def _analyze_chunk(points, neighbors, indices, k, bandwidth, m, tol, iterations, seed):
    cloud = PointCloud(points)
    grid = build_grid(bandwidth)
    n = len(indices)
    desc = np.zeros((n, bandwidth))
    normals = np.zeros((n, 3))
    degenerate = np.zeros(n, dtype=bool)
    samples = np.zeros((n, m, 3))
    for row, i in enumerate(indices):
        try:
            curve = local_spherical_curve(cloud, None, i, k, m, neighbors=neighbors[row])
            samples[row] = curve.samples
            normals[row] = estimate_normal(curve, tol, iterations, seed=[seed, int(i)])
        except DegenerateError as exc:
            log.warning("point %d: %s; classified non-edge", i, exc)
            degenerate[row] = True
            nb = neighbors[row][neighbors[row] != i]
            normals[row] = pca_normal(points[np.r_[i, nb]])
    ok = ~degenerate
    if np.any(ok):
        desc[ok] = descriptor(dsht(kde_on_grid(samples[ok], grid), grid))
    return desc, normals, degenerate


def analyze_cloud(
    cloud: PointCloud,
    k: int = DEFAULT_K,
    bandwidth: int = DEFAULT_BANDWIDTH,
    m: int = DEFAULT_SAMPLES,
    tol: float = DEFAULT_TOL,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    threads: int = 1,
    index: Optional[SpatialIndex] = None,
) -> CloudAnalysis:
    """Descriptor and oriented normal for every point.

    Results do not depend on ``threads``: chunks are fixed and reassembled in order.
    """
    if len(cloud) == 0:
        raise ValueError("cannot analyse an empty cloud")
    index = index or SpatialIndex(cloud.points)
    _, nbrs = index.knn_batch(cloud.points, k + 1)
    bounds = list(range(0, len(cloud), CHUNK)) + [len(cloud)]
    jobs = [
        (cloud.points, nbrs[a:b], np.arange(a, b), k, bandwidth, m, tol, iterations, seed)
        for a, b in zip(bounds[:-1], bounds[1:])
    ]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_analyze_chunk, *zip(*jobs)))
    else:
        parts = [_analyze_chunk(*job) for job in jobs]
    desc, normals, degenerate = (np.concatenate(p) for p in zip(*parts))
    if degenerate.any():
        log.warning("%d degenerate neighbourhoods", int(degenerate.sum()))
    return CloudAnalysis(desc, normals, degenerate)


def compute_descriptors(cloud: PointCloud, config: RunConfig = RunConfig()) -> CloudAnalysis:
    return analyze_cloud(
        cloud, config.k, config.bandwidth, config.samples, config.ransac_tol,
        config.ransac_iterations, config.ransac_seed, config.threads,
    )


@dataclass
class ExtractionResult:
    labels: np.ndarray  # (N,) bool
    probabilities: np.ndarray
    normals: np.ndarray
    edge_indices: np.ndarray
    unrefined: PointCloud
    refined: Optional[PointCloud]
    degenerate: np.ndarray
    timings: dict = field(default_factory=dict)

    @property
    def edges(self) -> PointCloud:
        return self.refined if self.refined is not None else self.unrefined


def extract_edges(
    cloud: PointCloud,
    model: MlpModel,
    config: RunConfig = RunConfig(),
    refine: bool = True,
    analysis: Optional[CloudAnalysis] = None,
) -> ExtractionResult:
    timings = {}
    t0 = time.perf_counter()
    index = SpatialIndex(cloud.points)
    if analysis is None:
        analysis = analyze_cloud(
            cloud, config.k, config.bandwidth, config.samples, config.ransac_tol,
            config.ransac_iterations, config.ransac_seed, config.threads, index,
        )
    timings["descriptors"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    prob = predict_proba(model, analysis.descriptors)
    prob = np.where(analysis.degenerate, 0.0, prob)
    labels = prob >= config.threshold
    edge_idx = np.flatnonzero(labels)
    timings["classify"] = time.perf_counter() - t0

    refined = None
    if refine:
        t0 = time.perf_counter()
        refined = refine_all(cloud, edge_idx, analysis.normals, RefineConfig(config.mu, config.k), index)
        timings["refine"] = time.perf_counter() - t0
    for stage, sec in timings.items():
        log.info("stage %s: %.3f s", stage, sec)
    return ExtractionResult(
        labels, prob, analysis.normals, edge_idx, PointCloud(cloud.points[edge_idx]), refined,
        analysis.degenerate, timings,
    )


# ---------------------------------------------------------------- descriptor batches


def cloud_hash(cloud: PointCloud) -> str:
    h = hashlib.sha256(np.ascontiguousarray(cloud.points).tobytes())
    if cloud.labels is not None:
        h.update(cloud.labels.tobytes())
    return h.hexdigest()


def cache_name(cloud: PointCloud, k: int, bandwidth: int, m: int) -> str:
    return f"{cloud_hash(cloud)[:16]}.k{k}.B{bandwidth}.M{m}.desc"


def write_descriptors(path, descriptors, labels=None) -> None:
    """One row per point: B energies, then an optional 0/1 label column."""
    d = np.asarray(descriptors, dtype=float)
    fmt = ["%.17g"] * d.shape[1]
    if labels is not None:
        d = np.hstack([d, np.asarray(labels, float)[:, None]])
        fmt.append("%d")
    np.savetxt(path, d, fmt=fmt)


def read_descriptors(path, bandwidth: int) -> tuple[np.ndarray, Optional[np.ndarray]]:
    rows = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line.split()])
            except ValueError:
                raise ParseError(f"{path}: malformed descriptor row", lineno) from None
    if not rows:
        return np.empty((0, bandwidth)), None
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() not in (bandwidth, bandwidth + 1):
        raise FormatError(f"{path}: rows must have {bandwidth} or {bandwidth + 1} columns")
    data = np.array(rows)
    if data.shape[1] == bandwidth:
        return data, None
    return data[:, :bandwidth], data[:, bandwidth].astype(bool)
