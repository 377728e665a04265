"""Single-component adaptive Metropolis-within-Gibbs.

Each sweep visits every component once and proposes ``x_k + s_k * z``.
During adaptation ``s_k = 2.4 * sd_k + floor`` where ``sd_k`` is the
running standard deviation of component k over the chain so far (a
component that has not moved yet halves its scale instead); afterwards
the scales are frozen and sweeps feed the accumulator.

Tomography posteriors run through a numba sweep that keeps the residual
``y - A x`` (and, for Besov, the Haar coefficients) up to date, so a
proposal costs one sparse column of A plus the prior stencil.  Any other
target with a ``delta(x, k, new)`` method runs through a plain Python loop
that consumes the same random numbers in the same order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np

from ..posterior import Posterior, dynamic_range_estimate
from ..priors import BESOV, local_delta
from .accumulator import ChainAccumulator

log = logging.getLogger(__name__)

SCALE = 2.4
DRIFT_TOL = 1e-6


@dataclass(frozen=True)
class MwgConfig:
    initial_std: float | None = None
    warmup: int = 10
    floor: float | None = None
    random_order: bool = False
    keep_every: int = 0
    refresh_every: int = 100


@dataclass
class MwgDiagnostics:
    proposal_std: np.ndarray
    acceptance: np.ndarray
    energy: list = field(default_factory=list)
    mean_std: list = field(default_factory=list)
    sweep_accept: list = field(default_factory=list)
    refreshes: int = 0

    @property
    def mean_acceptance(self) -> float:
        return float(np.mean(self.acceptance))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("iteration,energy,mean_proposal_std,acceptance,divergent,tree_depth\n")
            for i, (e, s, a) in enumerate(zip(self.energy, self.mean_std, self.sweep_accept)):
                fh.write(f"{i},{e!r},{s!r},{a!r},0,0\n")


def likelihood_delta(A, y, x, k: int, new_value: float, residual) -> float:
    """Change of ||y - A x||^2 / (2 sigma^2) when x[k] becomes ``new_value``.

    ``residual`` must equal ``y.values - A @ x``.  Uses column k of A only.
    """
    step = new_value - x[k]
    if step == 0:
        return 0.0
    col = A.csc
    sl = slice(col.indptr[k], col.indptr[k + 1])
    vals = col.data[sl]
    dot = float(vals @ residual[col.indices[sl]])
    nrm = float(vals @ vals)
    return (-2.0 * step * dot + step * step * nrm) / (2.0 * y.noise_sigma**2)


def commit_residual(A, residual, k: int, step: float) -> None:
    col = A.csc
    sl = slice(col.indptr[k], col.indptr[k + 1])
    residual[col.indices[sl]] -= step * col.data[sl]


@numba.njit(cache=True)
def _sweep(x, r, a_ptr, a_idx, a_val, half_inv_s2, kind, prm, I, J,
           d_ptr, d_idx, d_val, W, order, step, z, u, accepted):
    total = 0.0
    n_acc = 0
    for t in range(order.size):
        k = order[t]
        old = x[k]
        new = old + step[k] * z[t]
        d = new - old
        dot = 0.0
        nrm = 0.0
        for q in range(a_ptr[k], a_ptr[k + 1]):
            v = a_val[q]
            dot += v * r[a_idx[q]]
            nrm += v * v
        dU = (-2.0 * d * dot + d * d * nrm) * half_inv_s2
        dU += local_delta(kind, prm, x, I, J, k, new, d_ptr, d_idx, d_val, W)
        if dU <= 0.0 or u[t] < np.exp(-dU):
            x[k] = new
            for q in range(a_ptr[k], a_ptr[k + 1]):
                r[a_idx[q]] -= d * a_val[q]
            if kind == BESOV:
                for q in range(d_ptr[k], d_ptr[k + 1]):
                    W[d_idx[q]] += d * d_val[q]
            accepted[k] += 1
            total += dU
            n_acc += 1
    return total, n_acc


class _TomographyChain:
    def __init__(self, post: Posterior, x):
        self.post = post
        A = post.A
        self.x = x
        self.r = post.residual(x)
        self.a = (A.csc.indptr.astype(np.int32), A.csc.indices.astype(np.int32), A.csc.data)
        self.half_inv_s2 = 0.5 / post.sigma**2
        pr = post.prior
        self.kind = pr.kind
        self.prm = pr.kernel_params()
        self.I, self.J = pr.shape
        self.d = pr.dwt_arrays()
        self.W = pr.coefficients(x) if pr.kind == BESOV else np.zeros(1)
        self.U = post.energy(x)

    def sweep(self, order, step, z, u, accepted):
        dU, n_acc = _sweep(self.x, self.r, *self.a, self.half_inv_s2, self.kind, self.prm,
                           self.I, self.J, *self.d, self.W, order, step, z, u, accepted)
        self.U += dU
        return n_acc

    def refresh(self) -> bool:
        fresh = self.post.residual(self.x)
        drift = np.max(np.abs(fresh - self.r))
        if self.kind == BESOV:
            w = self.post.prior.coefficients(self.x)
            drift = max(drift, np.max(np.abs(w - self.W)))
        if drift > DRIFT_TOL:
            log.warning("mwg: cached state drifted by %.3g, refreshing", drift)
            self.r = fresh
            if self.kind == BESOV:
                self.W = w
            self.U = self.post.energy(self.x)
            return True
        return False


class _GenericChain:
    def __init__(self, target, x):
        self.target = target
        self.x = x
        self.U = target.energy(x)

    def sweep(self, order, step, z, u, accepted):
        x = self.x
        n_acc = 0
        for t in range(order.size):
            k = order[t]
            new = x[k] + step[k] * z[t]
            dU = self.target.delta(x, k, new)
            if dU <= 0.0 or u[t] < np.exp(-dU):
                x[k] = new
                accepted[k] += 1
                self.U += dU
                n_acc += 1
        return n_acc

    def refresh(self) -> bool:
        return False


def mwg_run(posterior, x0, n_adapt: int, n_samples: int, seed: int, cfg: MwgConfig | None = None):
    """Run adaptive MwG; returns ``(ChainAccumulator, MwgDiagnostics)``."""
    cfg = cfg or MwgConfig()
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if n_adapt < 0:
        raise ValueError("n_adapt must be nonnegative")
    x = np.array(x0, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("initial point is not finite")
    m = x.size
    rng = np.random.default_rng(seed)

    if isinstance(posterior, Posterior):
        chain = _TomographyChain(posterior, x)
        default_std = posterior.proposal_scale_hint()
        scale = dynamic_range_estimate(posterior.A, posterior.sinogram)
    else:
        chain = _GenericChain(posterior, x)
        default_std = np.ones(m)
        scale = 1.0
    if not np.isfinite(chain.U):
        raise FloatingPointError("energy is not finite at the initial point")
    floor = cfg.floor if cfg.floor is not None else 1e-8 * scale
    step = np.full(m, cfg.initial_std) if cfg.initial_std is not None else default_std.astype(np.float64)
    step = np.ascontiguousarray(step)

    # running moments of each component over the adaptation phase
    n_seen = 1
    mean = x.copy()
    m2 = np.zeros(m)

    acc = ChainAccumulator(m, cfg.keep_every)
    accepted = np.zeros(m, dtype=np.int64)
    diag = MwgDiagnostics(step, accepted)
    raster = np.arange(m, dtype=np.int64)
    refreshes = 0
    for sweep in range(n_adapt + n_samples):
        order = rng.permutation(m) if cfg.random_order else raster
        z = rng.standard_normal(m)
        u = rng.random(m)
        if sweep == n_adapt:
            accepted[:] = 0
        n_acc = chain.sweep(order, step, z, u, accepted)
        if cfg.refresh_every and (sweep + 1) % cfg.refresh_every == 0:
            refreshes += chain.refresh()
        if not np.isfinite(chain.U):
            raise FloatingPointError(f"energy became non-finite at sweep {sweep}")
        diag.energy.append(chain.U)
        diag.mean_std.append(float(step.mean()))
        diag.sweep_accept.append(n_acc / m)
        if sweep < n_adapt:
            n_seen += 1
            delta = x - mean
            mean += delta / n_seen
            m2 += delta * (x - mean)
            if n_seen > cfg.warmup:
                sd = np.sqrt(m2 / (n_seen - 1))
                # a component that never moved has sd 0; shrink its scale instead
                step[:] = np.where(sd > 0, SCALE * sd + floor, np.maximum(0.5 * step, floor))
        else:
            acc.add(x)
    diag.proposal_std = step.copy()
    diag.acceptance = accepted / n_samples
    diag.refreshes = refreshes
    return acc, diag
