"""Leapfrog integration and the No-U-Turn Sampler with dual averaging.

The potential is ``U(x) = -log pi(x | y)`` (likelihood plus prior energy),
kinetic energy ``p^T M^{-1} p / 2`` with a diagonal mass ``M``.  Trajectories
are grown by doubling in a random direction until the endpoints start to
approach each other, a leaf diverges (energy error above 1000), or the
maximum depth is hit.  The next state is drawn from the trajectory with
multinomial weights ``exp(-H)``: uniformly-progressive inside subtrees and
biased towards the newest subtree at the top level.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .accumulator import ChainAccumulator

log = logging.getLogger(__name__)

DIVERGENCE = 1000.0


def _value_and_grad(target):
    if hasattr(target, "value_and_grad"):
        return target.value_and_grad
    return lambda x: (target.energy(x), target.gradient(x))


def leapfrog(grad_U, x, p, eps: float, M=1.0, L_steps: int = 1):
    """Stormer-Verlet integration of Hamilton's equations.

    Returns ``(x, p, divergent)``; ``divergent`` is set as soon as a
    gradient evaluation is not finite.
    """
    if not eps > 0:
        raise ValueError("step size must be positive")
    inv_m = 1.0 / np.asarray(M, dtype=np.float64)
    x = np.array(x, dtype=np.float64)
    p = np.array(p, dtype=np.float64)
    g = np.asarray(grad_U(x))
    for _ in range(L_steps):
        if not np.all(np.isfinite(g)):
            return x, p, True
        p = p - 0.5 * eps * g
        x = x + eps * inv_m * p
        g = np.asarray(grad_U(x))
        if not np.all(np.isfinite(g)):
            return x, p, True
        p = p - 0.5 * eps * g
    return x, p, False


@dataclass(frozen=True)
class NutsConfig:
    target_accept: float = 0.8
    max_depth: int = 10
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    step_size: float | None = None
    mass: np.ndarray | None = None
    keep_every: int = 0

    def __post_init__(self):
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.mass is not None and np.any(np.asarray(self.mass) <= 0):
            raise ValueError("mass entries must be positive")


class DualAveraging:
    """Step-size adaptation toward a target mean acceptance statistic."""

    def __init__(self, eps0, target, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * eps0)
        self.target = target
        self.gamma, self.t0, self.kappa = gamma, t0, kappa
        self.h_bar = 0.0
        self.log_eps = math.log(eps0)
        self.log_eps_bar = 0.0
        self.count = 0

    def update(self, accept_stat: float) -> float:
        self.count += 1
        m = self.count
        w = 1.0 / (m + self.t0)
        self.h_bar = (1 - w) * self.h_bar + w * (self.target - accept_stat)
        self.log_eps = self.mu - math.sqrt(m) / self.gamma * self.h_bar
        eta = m ** (-self.kappa)
        self.log_eps_bar = eta * self.log_eps + (1 - eta) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def final_step(self) -> float:
        return math.exp(self.log_eps_bar)


@dataclass
class HmcState:
    x: np.ndarray
    step_size: float
    mass: np.ndarray
    target_accept: float
    max_depth: int
    adapter: DualAveraging | None
    rng: np.random.Generator


@dataclass
class NutsDiagnostics:
    energy: list = field(default_factory=list)
    step_size: list = field(default_factory=list)
    accept_stat: list = field(default_factory=list)
    divergent: list = field(default_factory=list)
    depth: list = field(default_factory=list)
    n_leapfrog: list = field(default_factory=list)
    n_adapt: int = 0
    final_step_size: float = float("nan")

    def _post(self, name):
        return np.asarray(getattr(self, name)[self.n_adapt:], dtype=float)

    @property
    def mean_accept(self) -> float:
        return float(self._post("accept_stat").mean())

    @property
    def divergence_rate(self) -> float:
        return float(self._post("divergent").mean())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("iteration,energy,step_size,acceptance,divergent,tree_depth\n")
            rows = zip(self.energy, self.step_size, self.accept_stat, self.divergent, self.depth)
            for i, (e, s, a, d, t) in enumerate(rows):
                fh.write(f"{i},{e!r},{s!r},{a!r},{int(d)},{t}\n")


class _Leaf:
    __slots__ = ("x", "p", "g", "U")

    def __init__(self, x, p, g, U):
        self.x, self.p, self.g, self.U = x, p, g, U


class _Tree:
    __slots__ = ("minus", "plus", "sample", "log_w", "stop", "divergent", "acc_sum", "n_leaves")


class _Nuts:
    def __init__(self, fg, inv_mass, rng):
        self.fg = fg
        self.inv_mass = inv_mass
        self.rng = rng

    def kinetic(self, p):
        return 0.5 * float(p @ (self.inv_mass * p))

    def step(self, leaf: _Leaf, eps):
        p = leaf.p - 0.5 * eps * leaf.g
        x = leaf.x + eps * self.inv_mass * p
        U, g = self.fg(x)
        p = p - 0.5 * eps * g
        return _Leaf(x, p, g, U)

    def turning(self, minus: _Leaf, plus: _Leaf) -> bool:
        dx = plus.x - minus.x
        return float(dx @ (self.inv_mass * minus.p)) < 0 or float(dx @ (self.inv_mass * plus.p)) < 0

    def build(self, leaf: _Leaf, direction: int, depth: int, eps: float, H0: float) -> _Tree:
        t = _Tree()
        if depth == 0:
            new = self.step(leaf, direction * eps)
            H = new.U + self.kinetic(new.p) if np.isfinite(new.U) else np.inf
            if not np.isfinite(H) or not np.all(np.isfinite(new.g)):
                H = np.inf
            t.minus = t.plus = t.sample = new
            t.log_w = -H
            t.divergent = (H - H0) > DIVERGENCE
            t.stop = t.divergent
            t.acc_sum = min(1.0, math.exp(H0 - H)) if np.isfinite(H) else 0.0
            t.n_leaves = 1
            return t
        first = self.build(leaf, direction, depth - 1, eps, H0)
        if first.stop:
            return first
        edge = first.plus if direction > 0 else first.minus
        second = self.build(edge, direction, depth - 1, eps, H0)
        t.acc_sum = first.acc_sum + second.acc_sum
        t.n_leaves = first.n_leaves + second.n_leaves
        t.divergent = second.divergent
        if direction > 0:
            t.minus, t.plus = first.minus, second.plus
        else:
            t.minus, t.plus = second.minus, first.plus
        t.log_w = np.logaddexp(first.log_w, second.log_w)
        t.sample = first.sample
        if second.stop:
            t.stop = True
            return t
        if self.rng.random() < math.exp(second.log_w - t.log_w):
            t.sample = second.sample
        t.stop = self.turning(t.minus, t.plus)
        return t

    def transition(self, current: _Leaf, eps: float, max_depth: int):
        z = self.rng.standard_normal(current.x.size)
        p0 = z / np.sqrt(self.inv_mass)
        start = _Leaf(current.x, p0, current.g, current.U)
        H0 = current.U + self.kinetic(p0)
        minus = plus = start
        sample = current
        log_w = -H0
        acc_sum, n_leaves = 0.0, 0
        divergent = False
        depth = 0
        while depth < max_depth:
            direction = 1 if self.rng.random() < 0.5 else -1
            edge = plus if direction > 0 else minus
            sub = self.build(edge, direction, depth, eps, H0)
            acc_sum += sub.acc_sum
            n_leaves += sub.n_leaves
            depth += 1
            if sub.divergent:
                divergent = True
            if sub.stop:
                break
            if direction > 0:
                plus = sub.plus
            else:
                minus = sub.minus
            if self.rng.random() < math.exp(min(0.0, sub.log_w - log_w)):
                sample = sub.sample
            log_w = np.logaddexp(log_w, sub.log_w)
            if self.turning(minus, plus):
                break
        return sample, acc_sum / max(n_leaves, 1), divergent, depth, n_leaves


def find_reasonable_epsilon(fg, x, inv_mass, rng, U=None, g=None) -> float:
    """Double or halve a trial step until one leapfrog step's acceptance
    probability crosses 1/2."""
    if U is None:
        U, g = fg(x)
    nuts = _Nuts(fg, inv_mass, rng)
    p = rng.standard_normal(x.size) / np.sqrt(inv_mass)
    H0 = U + nuts.kinetic(p)
    leaf = _Leaf(x, p, g, U)

    def log_ratio(eps):
        new = nuts.step(leaf, eps)
        H = new.U + nuts.kinetic(new.p)
        return H0 - H if np.isfinite(H) else -np.inf

    eps = 1.0
    lr = log_ratio(eps)
    a = 1.0 if lr > math.log(0.5) else -1.0
    for _ in range(100):
        if not (a * lr > -a * math.log(2.0)):
            break
        eps *= 2.0**a
        lr = log_ratio(eps)
    return eps


def nuts_run(posterior, x0, n_adapt: int, n_samples: int, seed: int, cfg: NutsConfig | None = None):
    """Run NUTS; the first ``n_adapt`` iterations tune the step size and are
    discarded.  Returns ``(ChainAccumulator, NutsDiagnostics)``."""
    cfg = cfg or NutsConfig()
    if n_samples < 1 or n_adapt < 0:
        raise ValueError("need n_samples >= 1 and n_adapt >= 0")
    fg = _value_and_grad(posterior)
    x = np.array(x0, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("initial point is not finite")
    U, g = fg(x)
    if not np.isfinite(U) or not np.all(np.isfinite(g)):
        raise FloatingPointError("energy is not finite at the initial point")
    rng = np.random.default_rng(seed)
    mass = np.ones(x.size) if cfg.mass is None else np.broadcast_to(np.asarray(cfg.mass, float), x.shape).copy()
    inv_mass = 1.0 / mass
    eps = cfg.step_size or find_reasonable_epsilon(fg, x, inv_mass, rng, U, g)
    adapter = DualAveraging(eps, cfg.target_accept, cfg.gamma, cfg.t0, cfg.kappa) if n_adapt > 0 else None
    state = HmcState(x, eps, mass, cfg.target_accept, cfg.max_depth, adapter, rng)

    nuts = _Nuts(fg, inv_mass, rng)
    current = _Leaf(x, None, g, U)
    acc = ChainAccumulator(x.size, cfg.keep_every)
    diag = NutsDiagnostics(n_adapt=n_adapt)
    for it in range(n_adapt + n_samples):
        current, stat, div, depth, n_lf = nuts.transition(current, state.step_size, cfg.max_depth)
        if not np.isfinite(current.U):
            raise FloatingPointError(f"energy became non-finite at iteration {it}")
        diag.energy.append(current.U)
        diag.step_size.append(state.step_size)
        diag.accept_stat.append(stat)
        diag.divergent.append(div)
        diag.depth.append(depth)
        diag.n_leapfrog.append(n_lf)
        if it < n_adapt:
            state.step_size = adapter.update(stat)
            if it == n_adapt - 1:
                state.step_size = adapter.final_step
        else:
            acc.add(current.x)
    state.x = current.x
    diag.final_step_size = state.step_size
    if diag.divergence_rate > 0.1:
        log.warning("nuts: %.1f%% of post-adaptation transitions diverged", 100 * diag.divergence_rate)
    return acc, diag


def diagonal_mass_from_variance(variance, floor: float = 1e-12) -> np.ndarray:
    """Mass matrix diagonal from a preliminary chain: M = 1 / var."""
    return 1.0 / np.maximum(np.asarray(variance, dtype=np.float64), floor)
