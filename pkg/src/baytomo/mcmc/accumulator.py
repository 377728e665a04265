"""Streaming mean and pixel-wise variance of MCMC samples (Welford)."""
from __future__ import annotations

import numpy as np


class ChainAccumulator:
    """Running mean and sum of squared deviations.

    ``keep_every > 0`` additionally stores every ``keep_every``-th sample,
    which the batch-means error estimate needs.
    """

    def __init__(self, dim: int, keep_every: int = 0):
        self.dim = int(dim)
        self.count = 0
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros(self.dim)
        self.keep_every = int(keep_every)
        self._kept = []

    def add(self, sample) -> "ChainAccumulator":
        x = np.asarray(sample, dtype=np.float64).ravel()
        if x.size != self.dim:
            raise ValueError(f"sample has {x.size} entries, accumulator expects {self.dim}")
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)
        if self.keep_every and (self.count - 1) % self.keep_every == 0:
            self._kept.append(x.copy())
        return self

    def merge(self, other: "ChainAccumulator") -> "ChainAccumulator":
        """Combine with another chain's statistics (pairwise update)."""
        if other.dim != self.dim:
            raise ValueError("cannot merge accumulators of different dimension")
        out = ChainAccumulator(self.dim, self.keep_every)
        n = self.count + other.count
        out.count = n
        if n == 0:
            return out
        delta = other.mean - self.mean
        out.mean = self.mean + delta * (other.count / n)
        out.m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / n)
        out._kept = self._kept + other._kept
        return out

    @property
    def samples(self) -> np.ndarray:
        if not self._kept:
            return np.empty((0, self.dim))
        return np.array(self._kept)

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            raise ValueError("variance needs at least two samples")
        return self.m2 / (self.count - 1)

    def finalize(self):
        """Return ``(mean, unbiased variance, log10 variance)``."""
        var = self.variance
        with np.errstate(divide="ignore"):
            logvar = np.log10(var)
        return self.mean.copy(), var, logvar


def accumulate(acc: ChainAccumulator, sample) -> ChainAccumulator:
    return acc.add(sample)


def finalize(acc: ChainAccumulator):
    return acc.finalize()


def batch_means_se(samples, n_batches: int = 20) -> np.ndarray:
    """Monte Carlo standard error of the mean of each column by batch means."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    n = samples.shape[0] // n_batches * n_batches
    if n < 2 * n_batches:
        raise ValueError("too few samples for batch means")
    batches = samples[:n].reshape(n_batches, -1, samples.shape[1]).mean(axis=1)
    return batches.std(axis=0, ddof=1) / np.sqrt(n_batches)
