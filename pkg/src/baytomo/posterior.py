"""Negative log posterior: Gaussian likelihood plus a prior energy."""
from __future__ import annotations

import numpy as np

from .geometry import SparseOperator, Sinogram, apply, apply_adjoint
from .priors import PriorModel


class Posterior:
    """U(x) = ||y - A x||^2 / (2 sigma^2) + G(x)."""

    def __init__(self, A: SparseOperator, sinogram: Sinogram, prior: PriorModel):
        sinogram.check(A)
        if prior.shape[0] * prior.shape[1] != A.n_pixels:
            raise ValueError("prior grid does not match the operator")
        self.A = A
        self.sinogram = sinogram
        self.prior = prior
        self.y = sinogram.values
        self.sigma = sinogram.noise_sigma

    @property
    def dim(self) -> int:
        return self.A.n_pixels

    def residual(self, x) -> np.ndarray:
        return self.y - apply(self.A, x)

    def energy(self, x) -> float:
        r = self.residual(x)
        return 0.5 * float(r @ r) / self.sigma**2 + self.prior.energy(x)

    def gradient(self, x) -> np.ndarray:
        r = self.residual(x)
        return -apply_adjoint(self.A, r) / self.sigma**2 + self.prior.gradient(x)

    def value_and_grad(self, x):
        r = self.residual(x)
        f = 0.5 * float(r @ r) / self.sigma**2 + self.prior.energy(x)
        g = -apply_adjoint(self.A, r) / self.sigma**2 + self.prior.gradient(x)
        return f, g

    def with_prior(self, prior: PriorModel) -> "Posterior":
        return Posterior(self.A, self.sinogram, prior)

    def smoothed(self, beta: float) -> "Posterior":
        return self.with_prior(self.prior.with_smoothing(beta))

    def proposal_scale_hint(self) -> np.ndarray:
        """Per-pixel conditional std under the likelihood alone, sigma / ||A[:, k]||.

        Pixels no ray touches fall back to the largest finite value.
        """
        norms = np.sqrt(self.A.column_sq_norms)
        with np.errstate(divide="ignore"):
            s = np.where(norms > 0, self.sigma / norms, np.inf)
        finite = s[np.isfinite(s)]
        fill = finite.max() if finite.size else 1.0
        return np.where(np.isfinite(s), s, fill)


def dynamic_range_estimate(A: SparseOperator, sinogram: Sinogram) -> float:
    """Rough attenuation scale: largest measurement over the longest ray."""
    row_sums = np.asarray(A.matrix.sum(axis=1)).ravel()
    longest = row_sums.max()
    if not longest > 0:
        return 1.0
    return float(max(np.max(np.abs(sinogram.values)) / longest, 1e-300))


def default_smoothing(A: SparseOperator, sinogram: Sinogram) -> float:
    return max(1e-8 * dynamic_range_estimate(A, sinogram), 1e-12)
