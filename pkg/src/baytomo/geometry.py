"""Pixel grid, parallel-beam geometry and the sparse ray-pixel projector.

Coordinates: the origin sits at the grid center, ``u`` points up (towards
row 0) and ``v`` points right (towards increasing column index).  A ray at
angle ``theta`` and offset ``s`` is the line ``u cos(theta) + v sin(theta) = s``,
so ``theta = 0`` gives horizontal rays travelling along image rows.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class ImageGrid:
    """Square-pixel lattice with values stored row-major."""

    n_rows: int
    n_cols: int
    pixel_size: float = 1.0
    values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_rows <= 0 or self.n_cols <= 0:
            raise ValueError("grid dimensions must be positive")
        if not self.pixel_size > 0:
            raise ValueError("pixel_size must be positive")
        vals = self.values
        if vals is None:
            vals = np.zeros(self.n_rows * self.n_cols)
        vals = np.ascontiguousarray(vals, dtype=np.float64).ravel()
        if vals.size != self.n_rows * self.n_cols:
            raise ValueError(
                f"values has {vals.size} entries, expected {self.n_rows * self.n_cols}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_array(cls, image, pixel_size: float = 1.0) -> "ImageGrid":
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 2:
            raise ValueError("expected a 2D array")
        return cls(image.shape[0], image.shape[1], pixel_size, image.ravel())

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def size(self) -> int:
        return self.n_rows * self.n_cols

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.shape)

    def with_values(self, values) -> "ImageGrid":
        return ImageGrid(self.n_rows, self.n_cols, self.pixel_size, values)


@dataclass(frozen=True)
class ProjectionGeometry:
    angles: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        angles = np.array(self.angles, dtype=np.float64).ravel()
        offsets = np.array(self.offsets, dtype=np.float64).ravel()
        if angles.size == 0 or offsets.size == 0:
            raise ValueError("angle and offset lists must be non-empty")
        if np.any(angles < 0) or np.any(angles >= np.pi):
            raise ValueError("angles must lie in [0, pi)")
        if np.any(np.diff(angles) <= 0):
            raise ValueError("angles must be strictly increasing")
        if np.any(np.diff(offsets) <= 0):
            raise ValueError("offsets must be strictly increasing")
        if not np.allclose(offsets, -offsets[::-1], rtol=0, atol=1e-12 * (1 + np.abs(offsets).max())):
            raise ValueError("offsets must be symmetric about 0")
        angles.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "offsets", offsets)

    @property
    def detector_count(self) -> int:
        return self.offsets.size

    @property
    def n_rays(self) -> int:
        return self.angles.size * self.offsets.size

    @classmethod
    def parallel_beam(cls, grid: ImageGrid, n_angles: int, detector_count: int | None = None):
        """Equispaced angles on [0, pi) starting at 0, detector bins tiling the
        diameter of the grid's circumscribed circle."""
        if n_angles <= 0:
            raise ValueError("n_angles must be positive")
        if detector_count is None:
            detector_count = max(grid.n_rows, grid.n_cols)
        if detector_count <= 0:
            raise ValueError("detector_count must be positive")
        angles = np.arange(n_angles) * (np.pi / n_angles)
        radius = 0.5 * grid.pixel_size * np.hypot(grid.n_rows, grid.n_cols)
        spacing = 2.0 * radius / detector_count
        offsets = (np.arange(detector_count) - 0.5 * (detector_count - 1)) * spacing
        return cls(angles, offsets)


def geometry_digest(grid: ImageGrid, geom: ProjectionGeometry) -> str:
    h = hashlib.sha256()
    h.update(np.array([grid.n_rows, grid.n_cols], dtype="<i8").tobytes())
    h.update(np.array([grid.pixel_size], dtype="<f8").tobytes())
    h.update(np.asarray(geom.angles, dtype="<f8").tobytes())
    h.update(np.asarray(geom.offsets, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def ray_intersections(grid: ImageGrid, theta: float, s: float):
    """Pixels crossed by one ray and the intersection lengths.

    Parametric grid traversal: the crossing parameters with every horizontal
    and vertical grid line are merged, and each segment between consecutive
    crossings is attributed to the pixel containing its midpoint.

    Returns
    -------
    (indices, lengths): flat row-major pixel indices (sorted) and lengths.
    """
    h = grid.pixel_size
    half_u = 0.5 * grid.n_rows * h
    half_v = 0.5 * grid.n_cols * h
    c, sn = np.cos(theta), np.sin(theta)
    # point on the line closest to the origin, and unit direction
    pu, pv = s * c, s * sn
    du, dv = -sn, c

    t_lo, t_hi = -np.inf, np.inf
    for p, d, half in ((pu, du, half_u), (pv, dv, half_v)):
        if abs(d) < 1e-15:
            if p < -half or p > half:
                return np.empty(0, dtype=np.int64), np.empty(0)
            continue
        t1, t2 = (-half - p) / d, (half - p) / d
        t_lo = max(t_lo, min(t1, t2))
        t_hi = min(t_hi, max(t1, t2))
    if not t_hi > t_lo:
        return np.empty(0, dtype=np.int64), np.empty(0)

    ts = [np.array([t_lo, t_hi])]
    if abs(du) >= 1e-15:
        lines_u = -half_u + h * np.arange(grid.n_rows + 1)
        ts.append((lines_u - pu) / du)
    if abs(dv) >= 1e-15:
        lines_v = -half_v + h * np.arange(grid.n_cols + 1)
        ts.append((lines_v - pv) / dv)
    t = np.concatenate(ts)
    t = np.unique(t[(t >= t_lo) & (t <= t_hi)])
    seg = np.diff(t)
    keep = seg > 1e-12 * h
    mid = 0.5 * (t[:-1] + t[1:])[keep]
    seg = seg[keep]

    u_mid = pu + mid * du
    v_mid = pv + mid * dv
    rows = np.clip(np.floor((half_u - u_mid) / h).astype(np.int64), 0, grid.n_rows - 1)
    cols = np.clip(np.floor((v_mid + half_v) / h).astype(np.int64), 0, grid.n_cols - 1)
    idx = rows * grid.n_cols + cols
    order = np.argsort(idx, kind="stable")
    idx, seg = idx[order], seg[order]
    # a ray running exactly along a grid line can revisit a pixel; merge
    uniq, inv = np.unique(idx, return_inverse=True)
    lengths = np.zeros(uniq.size)
    np.add.at(lengths, inv, seg)
    return uniq, lengths


@dataclass(frozen=True)
class SparseOperator:
    """System matrix in CSR layout with a cached CSC copy for column access."""

    matrix: sp.csr_matrix
    csc: sp.csc_matrix = field(default=None, repr=False)

    def __post_init__(self):
        if self.csc is None:
            object.__setattr__(self, "csc", self.matrix.tocsc())
        col_sq = np.asarray(self.csc.multiply(self.csc).sum(axis=0)).ravel()
        object.__setattr__(self, "_col_sq_norms", col_sq)

    @property
    def n_rays(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.matrix.shape[1]

    @property
    def column_sq_norms(self) -> np.ndarray:
        return self._col_sq_norms

    def todense(self) -> np.ndarray:
        return self.matrix.toarray()


def build_projector(grid: ImageGrid, geom: ProjectionGeometry) -> SparseOperator:
    """Assemble the ray-pixel intersection matrix, angle-major row order."""
    indptr = [0]
    indices = []
    data = []
    for theta in geom.angles:
        for s in geom.offsets:
            idx, lengths = ray_intersections(grid, theta, s)
            indices.append(idx)
            data.append(lengths)
            indptr.append(indptr[-1] + idx.size)
    indices = np.concatenate(indices) if indices else np.empty(0, dtype=np.int64)
    data = np.concatenate(data) if data else np.empty(0)
    mat = sp.csr_matrix(
        (data, indices.astype(np.int32), np.asarray(indptr, dtype=np.int32)),
        shape=(geom.n_rays, grid.size),
    )
    mat.eliminate_zeros()
    mat.has_sorted_indices = True
    return SparseOperator(mat)


def apply(A: SparseOperator, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != A.n_pixels:
        raise ValueError(f"expected {A.n_pixels} pixel values, got {x.size}")
    return A.matrix @ x


def apply_adjoint(A: SparseOperator, r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64).ravel()
    if r.size != A.n_rays:
        raise ValueError(f"expected {A.n_rays} ray values, got {r.size}")
    return A.csc.T @ r


@dataclass(frozen=True)
class Sinogram:
    """Measurements ``y`` (angle-major, then offset) with the noise level."""

    values: np.ndarray
    noise_sigma: float
    geometry_digest: str

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def check(self, A: SparseOperator):
        if self.values.size != A.n_rays:
            raise ValueError(f"sinogram has {self.values.size} values, operator has {A.n_rays} rays")


def simulate_sinogram(truth: ImageGrid, A: SparseOperator, noise_fraction: float,
                      seed: int, digest: str = "") -> Sinogram:
    """Noisy line integrals with sigma = noise_fraction * max(A truth).

    Noise is drawn with ``numpy.random.default_rng(seed)`` (PCG64 bit
    generator, ziggurat normals), so a given seed is reproducible bit for bit
    on one platform.
    """
    if not noise_fraction > 0:
        raise ValueError("noise_fraction must be positive")
    clean = apply(A, truth.values)
    peak = np.max(clean)
    if not peak > 0:
        raise ValueError("A @ truth has no positive line integral; sigma would be 0")
    sigma = float(noise_fraction * peak)
    rng = np.random.default_rng(seed)
    y = clean + sigma * rng.standard_normal(clean.size)
    return Sinogram(y, sigma, digest)


def likelihood_neglog(A: SparseOperator, y: Sinogram, x) -> float:
    y.check(A)
    r = y.values - apply(A, x)
    return 0.5 * float(r @ r) / y.noise_sigma**2


def likelihood_grad(A: SparseOperator, y: Sinogram, x) -> np.ndarray:
    y.check(A)
    r = y.values - apply(A, x)
    return -apply_adjoint(A, r) / y.noise_sigma**2
