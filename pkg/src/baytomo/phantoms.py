"""Synthetic log and drill-core cross-sections.

Geometry is parametric: ellipses, disks and a rectangle drawn on a unit
square domain ``[-1/2, 1/2]^2`` and rasterized at pixel centers.  Default
attenuation values are placeholders chosen for contrast ordering only.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import ImageGrid


@dataclass(frozen=True)
class LogMaterials:
    background: float = 0.0
    wood: float = 1.0
    rot: float = 0.6
    knot: float = 1.6
    metal: float = 4.0


@dataclass(frozen=True)
class CoreMaterials:
    background: float = 0.0
    matrix: float = 1.0
    pore: float = 0.2
    cob: float = 1.5


@dataclass(frozen=True)
class PhantomSpec:
    kind: str = "log"
    side: int = 64
    seed: int = 0
    log_materials: LogMaterials = field(default_factory=LogMaterials)
    core_materials: CoreMaterials = field(default_factory=CoreMaterials)
    # log features, lengths relative to the domain width
    n_knots: int = 5
    knot_size: tuple = (0.03, 0.06)
    rot: bool = True
    metal: bool = True
    metal_box: tuple = (0.08, -0.12, 0.14, 0.06)  # (u0, v0, height, width)
    trunk_axes: tuple = (0.42, 0.38)
    # drill-core features
    n_pores: int = 12
    n_cobs: int = 8
    pore_radius: tuple = (0.02, 0.05)
    cob_radius: tuple = (0.025, 0.06)
    core_radius: float = 0.42

    def __post_init__(self):
        if self.kind not in ("log", "drill_core"):
            raise ValueError(f"unknown phantom kind {self.kind!r}")
        if self.side < 4:
            raise ValueError("phantom side must be at least 4")
        lm = self.log_materials
        vals = [lm.background, lm.wood, lm.rot, lm.knot, lm.metal]
        cm = self.core_materials
        vals_c = [cm.background, cm.matrix, cm.pore, cm.cob]
        for group in (vals, vals_c):
            if min(group) < 0:
                raise ValueError("attenuation values must be nonnegative")
            if len(set(group)) != len(group):
                raise ValueError("attenuation values must be distinct per material")

    @property
    def max_value(self) -> float:
        lm, cm = self.log_materials, self.core_materials
        if self.kind == "log":
            return max(lm.background, lm.wood, lm.rot, lm.knot, lm.metal)
        return max(cm.background, cm.matrix, cm.pore, cm.cob)


def pixel_centers(side: int):
    """(u, v) coordinates of pixel centers on the unit domain, u pointing up."""
    c = (np.arange(side) + 0.5) / side - 0.5
    return np.meshgrid(-c, c, indexing="ij")


def _knot_params(spec: PhantomSpec, rng):
    a, b = spec.trunk_axes
    knots = []
    for _ in range(spec.n_knots):
        ang = rng.uniform(0, 2 * np.pi)
        rad = rng.uniform(0.15, 0.8)
        size = rng.uniform(*spec.knot_size)
        knots.append((rad * a * np.cos(ang), rad * b * np.sin(ang), size, 1.8 * size, ang))
    return knots


def _log_slice(spec: PhantomSpec, knots, U, V) -> np.ndarray:
    lm = spec.log_materials
    a, b = spec.trunk_axes
    img = np.full(U.shape, lm.background)
    trunk = (U / a) ** 2 + (V / b) ** 2 <= 1.0
    img[trunk] = lm.wood
    if spec.rot:
        # smooth transition from wood to rot
        r = np.hypot((U + 0.18) / 0.12, (V - 0.12) / 0.09)
        w = np.clip(1.5 - r, 0.0, 1.0)
        img = np.where(trunk, lm.wood + w * (lm.rot - lm.wood), img)
    for cu, cv, ra, rb, ang in knots:
        du, dv = U - cu, V - cv
        # knots grow along the radial direction
        pu = du * np.cos(ang) + dv * np.sin(ang)
        pv = -du * np.sin(ang) + dv * np.cos(ang)
        inside = (pu / rb) ** 2 + (pv / ra) ** 2 <= 1.0
        img[inside & trunk] = lm.knot
    if spec.metal:
        u0, v0, hh, ww = spec.metal_box
        box = (U <= u0) & (U > u0 - hh) & (V >= v0) & (V < v0 + ww)
        img[box & trunk] = lm.metal
    return img


def make_log_phantom(spec: PhantomSpec, n_slices: int | None = None):
    """Log cross-section, or a stack of ``n_slices`` slices whose knots drift
    smoothly outward while the metal piece stays put."""
    if spec.kind != "log":
        raise ValueError("make_log_phantom needs kind='log'")
    rng = np.random.default_rng(spec.seed)
    knots = _knot_params(spec, rng)
    U, V = pixel_centers(spec.side)
    h = 1.0 / spec.side
    if n_slices is None:
        return ImageGrid.from_array(_log_slice(spec, knots, U, V), h)
    from .volume import VolumeStack

    slices = []
    for s in range(n_slices):
        t = s / max(n_slices - 1, 1)
        moved = [(cu * (0.7 + 0.6 * t), cv * (0.7 + 0.6 * t), ra * (0.8 + 0.4 * t), rb, ang)
                 for cu, cv, ra, rb, ang in knots]
        slices.append(ImageGrid.from_array(_log_slice(spec, moved, U, V), h))
    return VolumeStack(slices, h)


def make_drillcore_phantom(spec: PhantomSpec) -> ImageGrid:
    if spec.kind != "drill_core":
        raise ValueError("make_drillcore_phantom needs kind='drill_core'")
    cm = spec.core_materials
    rng = np.random.default_rng(spec.seed)
    U, V = pixel_centers(spec.side)
    R = spec.core_radius
    img = np.full(U.shape, cm.background)
    img[U**2 + V**2 <= R**2] = cm.matrix
    placed = []
    wanted = [("pore", spec.pore_radius, cm.pore)] * spec.n_pores + [("cob", spec.cob_radius, cm.cob)] * spec.n_cobs
    for kind, (rlo, rhi), value in wanted:
        for _ in range(10_000):
            r = rng.uniform(rlo, rhi)
            rr = np.sqrt(rng.uniform()) * (R - r)
            ang = rng.uniform(0, 2 * np.pi)
            cu, cv = rr * np.cos(ang), rr * np.sin(ang)
            if all(np.hypot(cu - pu, cv - pv) > r + pr + 1.0 / spec.side for pu, pv, pr, _ in placed):
                placed.append((cu, cv, r, value))
                break
        else:
            warnings.warn(f"could not place a {kind}; phantom has fewer features than requested")
    for cu, cv, r, value in placed:
        img[(U - cu) ** 2 + (V - cv) ** 2 <= r**2] = value
    return ImageGrid.from_array(img, 1.0 / spec.side)


def make_phantom(spec: PhantomSpec):
    return make_log_phantom(spec) if spec.kind == "log" else make_drillcore_phantom(spec)


def metal_mask(spec: PhantomSpec) -> np.ndarray:
    """Pixels covered by the metal rectangle (before clipping to the trunk)."""
    U, V = pixel_centers(spec.side)
    u0, v0, hh, ww = spec.metal_box
    return (U <= u0) & (U > u0 - hh) & (V >= v0) & (V < v0 + ww)
