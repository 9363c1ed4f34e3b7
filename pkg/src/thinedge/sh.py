"""Rotation-invariant spherical-harmonic descriptors of spherical curves.

Convention: orthonormal complex harmonics with Condon-Shortley phase,

    Y_l^m(theta, phi) = Pn_l^m(cos theta) * exp(i m phi) / sqrt(2 pi),

where Pn_l^m is the associated Legendre function normalised to unit L2 norm
on [-1, 1]. With this basis the equiangular 2B x 2B transform

    f_l^m = sqrt(2 pi) / (2B) * sum_j sum_k w_j f(theta_j, phi_k) exp(-i m phi_k) Pn_l^m(cos theta_j)

returns exact coefficients for functions band-limited to degree < B, and
the constant f == 1 has f_0^0 = sqrt(4 pi).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .neighborhood import (
    DEFAULT_K,
    DEFAULT_SAMPLES,
    LocalSphericalCurve,
    SpatialIndex,
    local_spherical_curve,
)
from .pointcloud import PointCloud

DEFAULT_BANDWIDTH = 10
MAX_BANDWIDTH = 64


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    bandwidth: int
    thetas: np.ndarray  # (2B,) zenith angles
    phis: np.ndarray  # (2B,) azimuth angles
    weights: np.ndarray  # (2B,) quadrature weights in theta
    legendre: np.ndarray  # (B, B, 2B): Pn_l^m(cos theta_j) for m >= 0, zero where m > l

    @property
    def directions(self) -> np.ndarray:
        """Unit vectors of the grid nodes, shape (2B, 2B, 3) indexed [theta, phi]."""
        st, ct = np.sin(self.thetas)[:, None], np.cos(self.thetas)[:, None]
        cp, sp = np.cos(self.phis)[None, :], np.sin(self.phis)[None, :]
        return np.stack(np.broadcast_arrays(st * cp, st * sp, ct * np.ones_like(cp)), axis=-1)


def quadrature_weights(bandwidth: int, thetas: np.ndarray) -> np.ndarray:
    l = np.arange(bandwidth)[:, None]
    series = np.sum(np.sin((2 * l + 1) * thetas) / (2 * l + 1), axis=0)
    return (2.0 / bandwidth) * np.sin(thetas) * series


def normalized_legendre(lmax: int, x) -> np.ndarray:
    """Pn_l^m(x) for 0 <= m <= l <= lmax, shape (lmax+1, lmax+1, len(x)), [l, m].

    Unit L2 norm on [-1, 1], Condon-Shortley phase included. Uses the
    standard three-term recurrence in l, seeded from the sectoral terms.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    out = np.zeros((lmax + 1, lmax + 1, x.size))
    out[0, 0] = np.sqrt(0.5)
    for m in range(1, lmax + 1):
        out[m, m] = -np.sqrt((2 * m + 1) / (2.0 * m)) * s * out[m - 1, m - 1]
    for m in range(lmax):
        out[m + 1, m] = np.sqrt(2 * m + 3.0) * x * out[m, m]
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = np.sqrt((4.0 * (l - 1) ** 2 - 1) / ((l - 1) ** 2 - m * m))
            out[l, m] = a * (x * out[l - 1, m] - out[l - 2, m] / b)
    return out


@lru_cache(maxsize=None)
def build_grid(bandwidth: int = DEFAULT_BANDWIDTH) -> SphericalGrid:
    """Equiangular 2B x 2B grid with exact theta quadrature weights."""
    b = int(bandwidth)
    if b != bandwidth or not 2 <= b <= MAX_BANDWIDTH:
        raise ValueError(f"bandwidth must be an integer in [2, {MAX_BANDWIDTH}], got {bandwidth}")
    j = np.arange(2 * b)
    thetas = np.pi * (2 * j + 1) / (4 * b)
    phis = np.pi * j / b
    weights = quadrature_weights(b, thetas)
    # Sanity check the quadrature: sum_j w_j P_l(cos theta_j) = 2 delta_l0 for l < B.
    leg = normalized_legendre(b - 1, np.cos(thetas))
    exact = np.sqrt(2.0 / (2 * np.arange(b) + 1)) * (leg[:, 0] @ weights)
    target = np.zeros(b)
    target[0] = 2.0
    if np.max(np.abs(exact - target)) > 1e-10:
        raise ArithmeticError("quadrature weights failed the exactness check")
    for arr in (thetas, phis, weights, leg):
        arr.setflags(write=False)
    return SphericalGrid(b, thetas, phis, weights, leg)


class ShCoefficients:
    """Complex coefficients f_l^m, 0 <= l < B, |m| <= l.

    Stored densely as ``data[..., l, m + B - 1]``; entries with |m| > l are zero.
    Leading axes (if any) index a batch of functions.
    """

    def __init__(self, data):
        self.data = np.asarray(data, dtype=complex)
        b = self.data.shape[-2]
        if self.data.shape[-1] != 2 * b - 1:
            raise ValueError("coefficient array must have shape (..., B, 2B-1)")

    @property
    def bandwidth(self) -> int:
        return self.data.shape[-2]

    def __getitem__(self, lm):
        l, m = lm
        if not (0 <= l < self.bandwidth and abs(m) <= l):
            raise IndexError(f"no coefficient for (l={l}, m={m})")
        return self.data[..., l, m + self.bandwidth - 1]

    @classmethod
    def zeros(cls, bandwidth: int) -> "ShCoefficients":
        return cls(np.zeros((bandwidth, 2 * bandwidth - 1), dtype=complex))

    def __setitem__(self, lm, value):
        l, m = lm
        if not (0 <= l < self.bandwidth and abs(m) <= l):
            raise IndexError(f"no coefficient for (l={l}, m={m})")
        self.data[..., l, m + self.bandwidth - 1] = value


def _signed_legendre(grid: SphericalGrid) -> np.ndarray:
    """Pn_l^m over m = -(B-1)..(B-1), shape (B, 2B-1, 2B)."""
    b = grid.bandwidth
    pos = grid.legendre
    m = np.arange(1, b)
    neg = pos[:, 1:][:, ::-1] * ((-1.0) ** m[::-1])[None, :, None]
    return np.concatenate([neg, pos], axis=1)


def kde_on_grid(curve, grid: SphericalGrid) -> np.ndarray:
    """Gaussian KDE of the curve samples on the grid, geodesic distance, h = pi/B.

    ``curve`` is a LocalSphericalCurve or an (..., M, 3) array of unit vectors;
    the result has shape (..., 2B, 2B) indexed [theta, phi].
    """
    pts = curve.samples if isinstance(curve, LocalSphericalCurve) else np.asarray(curve, float)
    h = np.pi / grid.bandwidth
    dirs = grid.directions.reshape(-1, 3)
    cos = np.clip(pts @ dirs.T, -1.0, 1.0)
    delta = np.arccos(cos)
    kern = np.exp(-0.5 * (delta / h) ** 2) / np.sqrt(2.0 * np.pi)
    n = pts.shape[-2]
    vals = kern.sum(axis=-2) / (n * h)
    return vals.reshape(vals.shape[:-1] + (2 * grid.bandwidth, 2 * grid.bandwidth))


def dsht(values, grid: SphericalGrid) -> ShCoefficients:
    """Discrete SH transform of grid samples (batched over leading axes).

    Separated form: FFT over phi, then the weighted Legendre sum over theta.
    """
    values = np.asarray(values)
    b = grid.bandwidth
    if values.shape[-2:] != (2 * b, 2 * b):
        raise ValueError(f"expected samples of shape (..., {2 * b}, {2 * b}), got {values.shape}")
    # fft index n corresponds to exp(-i n phi_k); order m lives at n = m mod 2B.
    spec = np.fft.fft(values, axis=-1)
    orders = np.arange(-(b - 1), b)
    spec = spec[..., orders % (2 * b)]  # (..., 2B theta, 2B-1 m)
    leg = _signed_legendre(grid)  # (l, m, theta)
    coeffs = np.einsum("...jm,lmj,j->...lm", spec, leg, grid.weights)
    return ShCoefficients(coeffs * (np.sqrt(2.0 * np.pi) / (2 * b)))


def synthesize(coeffs: ShCoefficients, grid: SphericalGrid) -> np.ndarray:
    """Evaluate sum f_l^m Y_l^m on the grid (inverse of dsht for band-limited input)."""
    b = grid.bandwidth
    if coeffs.bandwidth != b:
        raise ValueError("coefficient bandwidth does not match grid")
    leg = _signed_legendre(grid)
    per_m = np.einsum("...lm,lmj->...jm", coeffs.data, leg)  # (..., theta, m)
    orders = np.arange(-(b - 1), b)
    phase = np.exp(1j * np.outer(orders, grid.phis))  # (m, phi)
    return (per_m @ phase) / np.sqrt(2.0 * np.pi)


def descriptor(coeffs: ShCoefficients) -> np.ndarray:
    """Per-degree energies ||beta_l||_2, shape (..., B)."""
    return np.sqrt(np.sum(np.abs(coeffs.data) ** 2, axis=-1))


def curve_descriptor(curve, bandwidth: int = DEFAULT_BANDWIDTH) -> np.ndarray:
    grid = build_grid(bandwidth)
    return descriptor(dsht(kde_on_grid(curve, grid), grid))


def compute_descriptor(
    cloud: PointCloud,
    index: SpatialIndex,
    i: int,
    k: int = DEFAULT_K,
    bandwidth: int = DEFAULT_BANDWIDTH,
    m: int = DEFAULT_SAMPLES,
) -> np.ndarray:
    """Descriptor of point ``i``; raises DegenerateError for unusable neighbourhoods."""
    curve = local_spherical_curve(cloud, index, i, k, m)
    return curve_descriptor(curve, bandwidth)
