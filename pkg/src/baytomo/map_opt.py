"""MAP estimation by limited-memory BFGS and hyperparameter grid search."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class LineSearchError(RuntimeError):
    pass


class Objective:
    """Counts evaluations around a ``value_and_grad`` callable."""

    def __init__(self, value_and_grad: Callable, dim: int | None = None):
        self._fg = value_and_grad
        self.dim = dim
        self.n_evals = 0

    @classmethod
    def from_posterior(cls, posterior) -> "Objective":
        return cls(posterior.value_and_grad, posterior.dim)

    @classmethod
    def from_functions(cls, f, grad, dim=None) -> "Objective":
        return cls(lambda x: (f(x), grad(x)), dim)

    def __call__(self, x):
        self.n_evals += 1
        f, g = self._fg(x)
        return float(f), np.asarray(g, dtype=np.float64)


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 10
    max_iterations: int = 2000
    grad_tol: float = 1e-6
    relative_tol: bool = True
    c1: float = 1e-4
    c2: float = 0.9
    max_linesearch: int = 40

    def __post_init__(self):
        if self.memory < 1 or self.max_iterations < 1:
            raise ValueError("memory and max_iterations must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")


@dataclass
class LbfgsReport:
    iterations: int
    grad_norm: float
    converged: bool
    message: str
    trace: list = field(default_factory=list)
    n_evals: int = 0


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db)."""
    d1 = da + db - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = db - da + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def _quad_min(a, fa, da, b, fb):
    """Minimizer of the parabola through (a, fa) with slope da and through (b, fb)."""
    w = b - a
    curv = fb - fa - da * w
    if not curv > 0:
        return None
    return a - da * w * w / (2 * curv)


def _finite_or_raise(f, g):
    if np.isnan(f) or not np.all(np.isfinite(g)):
        if np.isinf(f) and f > 0:
            return False
        raise FloatingPointError("objective or gradient is not finite")
    return np.isfinite(f)


def strong_wolfe(obj, x, f0, g0, p, a_init, c1, c2, max_iter):
    """Line search returning (step, f, g) satisfying the strong Wolfe conditions.

    Bracketing followed by safeguarded cubic zoom.  An infinite trial value
    counts as overshooting; NaN aborts.
    """
    d0 = float(g0 @ p)
    if d0 >= 0:
        raise LineSearchError("not a descent direction")
    evals = 0

    def phi(a):
        nonlocal evals
        evals += 1
        f, g = obj(x + a * p)
        ok = _finite_or_raise(f, g)
        return (f if ok else np.inf), g, (float(g @ p) if ok else np.nan)

    def zoom(lo, flo, dlo, glo, hi, fhi, dhi):
        best = None
        widths = [np.inf, np.inf]
        for _ in range(max_iter):
            a = None
            if np.isfinite(fhi) and np.isfinite(dhi):
                a = _cubic_min(lo, flo, dlo, hi, fhi, dhi)
            if np.isfinite(fhi) and fhi > flo:
                # overshoot: the parabola stays accurate where the cubic cancels
                aq = _quad_min(lo, flo, dlo, hi, fhi)
                if aq is not None and (a is None or abs(aq - lo) < abs(a - lo)):
                    a = aq
            width = hi - lo
            inside = a is not None and min(lo, hi) < a < max(lo, hi) and a != lo
            # bisect when the bracket has not shrunk enough over two trials
            if not inside or abs(width) > 0.66 * widths[-2]:
                a = lo + 0.5 * width
            widths.append(abs(width))
            f, g, d = phi(a)
            if f > f0 + c1 * a * d0 or f >= flo:
                hi, fhi, dhi = a, f, d
            else:
                if abs(d) <= -c2 * d0:
                    return a, f, g
                if best is None or f < best[1]:
                    best = (a, f, g)
                if d * (hi - lo) >= 0:
                    hi, fhi, dhi = lo, flo, dlo
                lo, flo, dlo, glo = a, f, d, g
            if abs(hi - lo) <= 1e-16 * max(abs(lo), abs(hi)):
                break
        if lo > 0:
            return lo, flo, glo
        raise LineSearchError("zoom failed to find an acceptable step")

    a_prev, f_prev, d_prev, g_prev = 0.0, f0, d0, g0
    a = a_init
    for i in range(max_iter):
        f, g, d = phi(a)
        if f > f0 + c1 * a * d0 or (i > 0 and f >= f_prev):
            return zoom(a_prev, f_prev, d_prev, g_prev, a, f, d)
        if abs(d) <= -c2 * d0:
            return a, f, g
        if d >= 0:
            return zoom(a, f, d, g, a_prev, f_prev, d_prev)
        a_prev, f_prev, d_prev, g_prev = a, f, d, g
        a *= 2.0
    raise LineSearchError("step bracketing did not terminate")


def lbfgs_minimize(obj, cfg: LbfgsConfig | None = None, x0=None):
    """Minimize ``obj`` (callable returning value and gradient) from ``x0``.

    Returns ``(x, report)``.  Stops when the max-norm of the gradient drops
    below ``grad_tol`` (times the initial max-norm if ``relative_tol``), at
    ``max_iterations``, or when the line search fails; in the last case the
    current (best) iterate is returned and the report says so.
    """
    cfg = cfg or LbfgsConfig()
    if not isinstance(obj, Objective):
        obj = Objective(obj)
    x = np.array(x0, dtype=np.float64).ravel()
    f, g = obj(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise FloatingPointError("objective is not finite at the initial point")
    gnorm = float(np.max(np.abs(g)))
    tol = cfg.grad_tol * (gnorm if cfg.relative_tol and gnorm > 0 else 1.0)
    trace = [f]
    S, Y, RHO = [], [], []
    message = "max_iterations reached"
    converged = False
    it = 0
    while True:
        if gnorm <= tol:
            converged = True
            message = "gradient tolerance reached"
            break
        if it >= cfg.max_iterations:
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(S), reversed(Y), reversed(RHO)):
            a_ = rho * float(s @ q)
            alphas.append(a_)
            q -= a_ * y
        if S:
            q *= float(S[-1] @ Y[-1]) / float(Y[-1] @ Y[-1])
        for (s, y, rho), a_ in zip(zip(S, Y, RHO), reversed(alphas)):
            b_ = rho * float(y @ q)
            q += (a_ - b_) * s
        p = -q
        if float(p @ g) >= 0:
            S, Y, RHO = [], [], []
            p = -g
        a_init = 1.0
        try:
            step, f_new, g_new = strong_wolfe(obj, x, f, g, p, a_init, cfg.c1, cfg.c2, cfg.max_linesearch)
        except LineSearchError as exc:
            message = f"line search failed: {exc}"
            break
        s = step * p
        y = g_new - g
        sy = float(s @ y)
        x = x + s
        f, g = f_new, g_new
        it += 1
        trace.append(f)
        gnorm = float(np.max(np.abs(g)))
        # scale-free curvature test: angle between s and y below 90 degrees
        if sy > 1e-10 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            S.append(s)
            Y.append(y)
            RHO.append(1.0 / sy)
            if len(S) > cfg.memory:
                S.pop(0)
                Y.pop(0)
                RHO.pop(0)
    report = LbfgsReport(it, gnorm, converged, message, trace, obj.n_evals)
    log.debug("lbfgs: %s after %d iterations, |g|=%.3g", message, it, gnorm)
    return x, report


def relative_l2_error(x, truth) -> float:
    truth = np.asarray(truth, dtype=np.float64).ravel()
    return float(np.linalg.norm(np.asarray(x).ravel() - truth) / np.linalg.norm(truth))


def log_candidates(lo: float, hi: float, n: int) -> list:
    return list(np.logspace(np.log10(lo), np.log10(hi), n))


@dataclass(frozen=True)
class GridSearchSpec:
    parameter: str
    candidates: Sequence[float]
    truth: np.ndarray

    def __post_init__(self):
        if len(self.candidates) == 0:
            raise ValueError("grid search needs at least one candidate")
        if any(not c > 0 for c in self.candidates):
            raise ValueError("grid search candidates must be positive")


@dataclass
class GridRow:
    candidate: float
    rel_error: float
    iterations: int
    converged: bool
    message: str = ""
    x: np.ndarray | None = field(default=None, repr=False)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("BAYTOMO_THREADS", "1")))
    except ValueError:
        return 1


def grid_search(spec: GridSearchSpec, make_objective: Callable, cfg: LbfgsConfig | None = None,
                x0=None, workers: int | None = None):
    """Run MAP for each candidate value and keep the lowest relative L2 error.

    ``make_objective(value)`` builds the objective for one candidate.
    Returns ``(best_value, rows)``; failed candidates get ``rel_error = nan``.
    """
    cfg = cfg or LbfgsConfig()
    truth = np.asarray(spec.truth, dtype=np.float64).ravel()
    start = np.zeros_like(truth) if x0 is None else np.asarray(x0, dtype=np.float64)

    def run(value):
        try:
            x, rep = lbfgs_minimize(make_objective(value), cfg, start)
            return GridRow(float(value), relative_l2_error(x, truth), rep.iterations, rep.converged, rep.message, x)
        except Exception as exc:  # one bad candidate must not stop the sweep
            log.warning("grid search candidate %g failed: %s", value, exc)
            return GridRow(float(value), float("nan"), 0, False, f"failed: {exc}")

    workers = workers or worker_count()
    if workers > 1 and len(spec.candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, spec.candidates))
    else:
        rows = [run(v) for v in spec.candidates]
    valid = [r for r in rows if np.isfinite(r.rel_error)]
    if not valid:
        raise RuntimeError("every grid-search candidate failed")
    best = min(valid, key=lambda r: r.rel_error)
    return best.candidate, rows


def write_error_table(rows, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("candidate,rel_l2_error,iterations,converged\n")
        for r in rows:
            fh.write(f"{r.candidate!r},{r.rel_error!r},{r.iterations},{int(r.converged)}\n")
