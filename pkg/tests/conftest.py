import numpy as np
import pytest

from baytomo.geometry import ImageGrid, ProjectionGeometry, build_projector, simulate_sinogram
from baytomo.posterior import Posterior
from baytomo.priors import make_prior


def clip_chord(theta, s, half_u, half_v):
    """Length of the line u cos(t) + v sin(t) = s inside [-half_u, half_u] x [-half_v, half_v]."""
    c, d = np.cos(theta), np.sin(theta)
    # point on the line and its direction
    p = np.array([s * c, s * d])
    e = np.array([-d, c])
    lo, hi = -np.inf, np.inf
    for axis, half in ((0, half_u), (1, half_v)):
        if abs(e[axis]) < 1e-15:
            if abs(p[axis]) > half:
                return 0.0
            continue
        t1 = (-half - p[axis]) / e[axis]
        t2 = (half - p[axis]) / e[axis]
        lo, hi = max(lo, min(t1, t2)), min(hi, max(t1, t2))
    return max(hi - lo, 0.0)


def small_problem(side=4, n_angles=4, prior="gaussian", seed=0, noise=0.02, **kw):
    rng = np.random.default_rng(seed)
    truth = ImageGrid(side, side, 1.0, rng.uniform(0.5, 1.5, side * side))
    geom = ProjectionGeometry.parallel_beam(truth, n_angles)
    A = build_projector(truth, geom)
    sino = simulate_sinogram(truth, A, noise, seed)
    kw = kw or {"gaussian": {"sigma_pr": 1.0}, "tv": {"alpha": 1.0}, "tv_iso": {"alpha": 1.0},
                "besov": {"scale": 1.0}, "cauchy": {"lam": 1.0}, "cauchy_sheet": {"lam": 1.0}}[prior]
    return truth, A, sino, Posterior(A, sino, make_prior(prior, truth.shape, **kw))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
