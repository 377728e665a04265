"""Analytic toy targets used to calibrate the samplers.

Each exposes ``energy``, ``gradient``, ``value_and_grad`` and ``delta`` (the
energy change of moving one component), the interface the samplers consume.
"""
from __future__ import annotations

import numpy as np


class GaussianTarget:
    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, dtype=np.float64).ravel()
        self.cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        self.precision = np.linalg.inv(self.cov)
        self.dim = self.mean.size

    @classmethod
    def standard(cls, dim: int) -> "GaussianTarget":
        return cls(np.zeros(dim), np.eye(dim))

    def energy(self, x) -> float:
        d = np.asarray(x) - self.mean
        return 0.5 * float(d @ self.precision @ d)

    def gradient(self, x) -> np.ndarray:
        return self.precision @ (np.asarray(x) - self.mean)

    def value_and_grad(self, x):
        g = self.gradient(x)
        return 0.5 * float((np.asarray(x) - self.mean) @ g), g

    def delta(self, x, k, new) -> float:
        step = new - x[k]
        row = self.precision[k]
        return step * float(row @ (x - self.mean)) + 0.5 * step * step * row[k]


class CauchyProductTarget:
    """Independent standard Cauchy marginals."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def energy(self, x) -> float:
        return float(np.sum(np.log1p(np.asarray(x) ** 2)))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x)
        return 2 * x / (1 + x * x)

    def value_and_grad(self, x):
        return self.energy(x), self.gradient(x)

    def delta(self, x, k, new) -> float:
        return float(np.log1p(new * new) - np.log1p(x[k] * x[k]))
