from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ImageGrid


@dataclass(frozen=True)
class VolumeStack:
    """Equally spaced 2D slices of one shape."""

    slices: list
    slice_spacing: float = 1.0

    def __post_init__(self):
        if not self.slices:
            raise ValueError("a volume needs at least one slice")
        shape = self.slices[0].shape
        for s in self.slices:
            if s.shape != shape:
                raise ValueError(f"slice shape {s.shape} differs from {shape}")
        object.__setattr__(self, "slices", list(self.slices))

    @property
    def shape(self):
        return (len(self.slices),) + self.slices[0].shape

    def as_array(self) -> np.ndarray:
        return np.stack([s.as_array() for s in self.slices])

    def unstack(self) -> list:
        return list(self.slices)


def stack(slices, slice_spacing: float = 1.0) -> VolumeStack:
    if len(slices) < 2:
        raise ValueError("stacking needs at least two slices")
    return VolumeStack(list(slices), slice_spacing)
