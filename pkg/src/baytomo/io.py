"""File formats.

Raw data is flat little-endian float64, row-major, in ``<stem>.f64`` with a
``key = value`` text header in ``<stem>.hdr``:

* image:    n_rows, n_cols, pixel_size
* sinogram: the image keys plus noise_sigma, n_angles, detector_count,
            angles, offsets (comma separated, ``repr`` precision), digest
* volume:   the image keys plus n_slices, slice_spacing

Paths may be given with or without the ``.f64`` / ``.hdr`` suffix.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import ImageGrid, ProjectionGeometry, Sinogram, geometry_digest
from .volume import VolumeStack


def _stem(path) -> Path:
    path = Path(path)
    if path.suffix in (".f64", ".hdr"):
        path = path.with_suffix("")
    return path


def _fmt(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(repr(float(t)) for t in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path, header: dict, data: np.ndarray) -> Path:
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    with open(stem.with_suffix(".hdr"), "w", newline="\n") as fh:
        for k, v in header.items():
            fh.write(f"{k} = {_fmt(v)}\n")
    np.ascontiguousarray(data, dtype="<f8").tofile(stem.with_suffix(".f64"))
    return stem


def read_header(path) -> dict:
    out = {}
    with open(_stem(path).with_suffix(".hdr")) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _read_data(path, count: int) -> np.ndarray:
    data = np.fromfile(_stem(path).with_suffix(".f64"), dtype="<f8")
    if data.size != count:
        raise ValueError(f"{path}: expected {count} values, found {data.size}")
    return data.astype(np.float64)


def _floats(s: str) -> np.ndarray:
    return np.array([float(t) for t in s.split(",") if t.strip()])


def write_image(path, grid: ImageGrid) -> Path:
    hdr = {"kind": "image", "n_rows": grid.n_rows, "n_cols": grid.n_cols, "pixel_size": float(grid.pixel_size)}
    return _write(path, hdr, grid.values)


def read_image(path) -> ImageGrid:
    hdr = read_header(path)
    I, J = int(hdr["n_rows"]), int(hdr["n_cols"])
    return ImageGrid(I, J, float(hdr["pixel_size"]), _read_data(path, I * J))


def write_sinogram(path, sino: Sinogram, grid: ImageGrid, geom: ProjectionGeometry) -> Path:
    hdr = {
        "kind": "sinogram",
        "n_rows": grid.n_rows,
        "n_cols": grid.n_cols,
        "pixel_size": float(grid.pixel_size),
        "noise_sigma": float(sino.noise_sigma),
        "n_angles": geom.angles.size,
        "detector_count": geom.detector_count,
        "angles": geom.angles,
        "offsets": geom.offsets,
        "digest": sino.geometry_digest,
    }
    return _write(path, hdr, sino.values)


def read_sinogram(path):
    """Return ``(sinogram, grid_template, geometry)``; the digest is verified."""
    hdr = read_header(path)
    grid = ImageGrid(int(hdr["n_rows"]), int(hdr["n_cols"]), float(hdr["pixel_size"]))
    geom = ProjectionGeometry(_floats(hdr["angles"]), _floats(hdr["offsets"]))
    digest = hdr.get("digest", "")
    if digest and digest != geometry_digest(grid, geom):
        raise ValueError(f"{path}: geometry digest does not match the header geometry")
    values = _read_data(path, geom.n_rays)
    return Sinogram(values, float(hdr["noise_sigma"]), digest), grid, geom


def write_volume(path, vol: VolumeStack) -> Path:
    first = vol.slices[0]
    hdr = {
        "kind": "volume",
        "n_slices": len(vol.slices),
        "n_rows": first.n_rows,
        "n_cols": first.n_cols,
        "pixel_size": float(first.pixel_size),
        "slice_spacing": float(vol.slice_spacing),
    }
    return _write(path, hdr, vol.as_array())


def read_volume(path) -> VolumeStack:
    hdr = read_header(path)
    n, I, J = int(hdr["n_slices"]), int(hdr["n_rows"]), int(hdr["n_cols"])
    h = float(hdr["pixel_size"])
    data = _read_data(path, n * I * J).reshape(n, I * J)
    return VolumeStack([ImageGrid(I, J, h, row) for row in data], float(hdr["slice_spacing"]))


def write_image_csv(path, grid: ImageGrid) -> None:
    np.savetxt(path, grid.as_array(), delimiter=",", fmt="%.17g", newline="\n")


def read_image_csv(path, pixel_size: float = 1.0) -> ImageGrid:
    return ImageGrid.from_array(np.loadtxt(path, delimiter=",", ndmin=2), pixel_size)


def render_pgm(path, image, vmax: float | None = None) -> float:
    """8-bit binary PGM, gray = round(255 * clip(v / vmax, 0, 1)).

    ``vmax`` defaults to the 99.5th percentile of the image.  Returns vmax.
    """
    a = np.asarray(image, dtype=np.float64)
    if vmax is None:
        vmax = float(np.percentile(a, 99.5))
    if not vmax > 0:
        vmax = 1.0
    g = np.round(255.0 * np.clip(a / vmax, 0.0, 1.0)).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode())
        fh.write(g.tobytes())
    return vmax


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    parts = raw.split(b"\n", 3)
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)
