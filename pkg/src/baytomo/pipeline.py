"""End-to-end experiment steps shared by the CLI and the scripts."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import io
from .config import RunConfig
from .geometry import (ImageGrid, ProjectionGeometry, SparseOperator, Sinogram, build_projector,
                       geometry_digest, simulate_sinogram)
from .map_opt import (GridSearchSpec, LbfgsConfig, Objective, grid_search, lbfgs_minimize,
                      relative_l2_error)
from .phantoms import PhantomSpec, make_phantom
from .posterior import Posterior, default_smoothing
from .priors import MAIN_PARAMETER, make_prior

log = logging.getLogger(__name__)

GRADIENT_SMOOTHED = ("tv", "tv_iso", "besov")


@dataclass
class Problem:
    truth: ImageGrid | None
    grid: ImageGrid
    geom: ProjectionGeometry
    A: SparseOperator
    sinogram: Sinogram


def phantom_spec(cfg: RunConfig) -> PhantomSpec:
    p = cfg.phantom
    return PhantomSpec(kind=p.kind, side=p.side, seed=p.seed, n_knots=p.n_knots, rot=p.rot,
                       metal=p.metal, n_pores=p.n_pores, n_cobs=p.n_cobs)


def load_truth(cfg: RunConfig, path: str = "") -> ImageGrid:
    path = path or cfg.phantom.truth
    if path:
        return io.read_image(path)
    return make_phantom(phantom_spec(cfg))


def simulate(cfg: RunConfig, truth: ImageGrid | None = None) -> Problem:
    truth = truth if truth is not None else load_truth(cfg)
    geom = ProjectionGeometry.parallel_beam(truth, cfg.geometry.n_angles, cfg.geometry.detector_count or None)
    A = build_projector(truth, geom)
    sino = simulate_sinogram(truth, A, cfg.noise.noise_fraction, cfg.run.seed, geometry_digest(truth, geom))
    return Problem(truth, truth.with_values(np.zeros(truth.size)), geom, A, sino)


def load_problem(cfg: RunConfig) -> Problem:
    """Measured sinogram from file if configured, otherwise simulated."""
    if cfg.noise.sinogram:
        sino, grid, geom = io.read_sinogram(cfg.noise.sinogram)
        truth = io.read_image(cfg.phantom.truth) if cfg.phantom.truth else None
        return Problem(truth, grid, geom, build_projector(grid, geom), sino)
    return simulate(cfg)


def prior_kwargs(cfg: RunConfig, smoothing: float) -> dict:
    p = cfg.prior
    kw = {}
    if p.name == "gaussian":
        kw = {"sigma_pr": p.sigma_pr, "sigma_boundary": p.sigma_boundary or None}
    elif p.name in ("tv", "tv_iso"):
        kw = {"alpha": p.alpha, "alpha_boundary": p.alpha_boundary or None}
    elif p.name == "besov":
        kw = {"levels": p.levels or None, "scale": p.scale}
    else:
        kw = {"lam": p.lam}
    if p.name in GRADIENT_SMOOTHED:
        kw["smoothing_beta"] = smoothing
    return kw


def resolve_smoothing(cfg: RunConfig, problem: Problem) -> None:
    """Materialize the automatic Charbonnier scale into the config."""
    if cfg.prior.smoothing_beta < 0:
        cfg.prior.smoothing_beta = default_smoothing(problem.A, problem.sinogram)


def posterior_for(cfg: RunConfig, problem: Problem, smoothing: float | None = None) -> Posterior:
    beta = cfg.prior.smoothing_beta if smoothing is None else smoothing
    prior = make_prior(cfg.prior.name, problem.grid.shape, problem.grid.pixel_size,
                       **prior_kwargs(cfg, beta))
    return Posterior(problem.A, problem.sinogram, prior)


def lbfgs_config(cfg: RunConfig) -> LbfgsConfig:
    return LbfgsConfig(memory=cfg.map.memory, max_iterations=cfg.map.max_iterations, grad_tol=cfg.map.grad_tol)


def run_map(cfg: RunConfig, problem: Problem):
    post = posterior_for(cfg, problem)
    x0 = np.zeros(problem.grid.size)
    return lbfgs_minimize(Objective.from_posterior(post), lbfgs_config(cfg), x0)


def run_grid_search(cfg: RunConfig, problem: Problem | None = None):
    """Tune the prior's main parameter against a truth image.

    Uses ``[gridsearch] truth`` when set (a separate tuning slice, simulated
    with the run's geometry and noise), otherwise the run's own problem.
    Returns ``(parameter, best, rows)`` and writes the best value into cfg.
    """
    param = cfg.gridsearch.parameter or MAIN_PARAMETER[cfg.prior.name]
    if cfg.gridsearch.truth:
        tune = simulate(cfg, io.read_image(cfg.gridsearch.truth))
    else:
        tune = problem if problem is not None else load_problem(cfg)
    if tune.truth is None:
        raise ValueError("grid search needs a truth image")
    resolve_smoothing(cfg, tune)
    spec = GridSearchSpec(param, cfg.candidate_values(), tune.truth.values)

    def make_objective(value):
        trial = _with_param(cfg, param, value)
        return Objective.from_posterior(posterior_for(trial, tune))

    best, rows = grid_search(spec, make_objective, lbfgs_config(cfg))
    setattr(cfg.prior, param, float(best))
    return param, best, rows


def _with_param(cfg: RunConfig, param: str, value: float) -> RunConfig:
    import copy

    trial = copy.deepcopy(cfg)
    setattr(trial.prior, param, float(value))
    return trial


def run_sampler(cfg: RunConfig, problem: Problem, x_map, seed: int):
    """MCMC from the MAP estimate; returns ``(accumulator, diagnostics)``."""
    from .mcmc import MwgConfig, NutsConfig, mwg_run, nuts_run
    from .mcmc.hmc import diagonal_mass_from_variance

    mc = cfg.mcmc
    if mc.estimator == "mwg":
        post = posterior_for(cfg, problem, smoothing=0.0)
        return mwg_run(post, x_map, mc.mwg_adapt, mc.mwg_samples, seed,
                       MwgConfig(random_order=mc.random_order))
    post = posterior_for(cfg, problem)
    mass = None
    if mc.diagonal_mass:
        # preliminary run to estimate the posterior variance
        pre, _ = nuts_run(post, x_map, mc.nuts_adapt, max(mc.nuts_adapt, 2), seed + 7919,
                          NutsConfig(target_accept=mc.target_accept, max_depth=mc.max_depth))
        mass = diagonal_mass_from_variance(pre.variance)
    ncfg = NutsConfig(target_accept=mc.target_accept, max_depth=mc.max_depth, mass=mass)
    return nuts_run(post, x_map, mc.nuts_adapt, mc.nuts_samples, seed, ncfg)


def metal_plateau_stats(x, truth: ImageGrid, spec: PhantomSpec):
    """Max reconstructed value inside the metal piece and the wood plateau."""
    from .phantoms import metal_mask

    t = truth.as_array()
    X = np.asarray(x).reshape(truth.shape)
    metal = metal_mask(spec) & (t == spec.log_materials.metal)
    return float(X[metal].max()), spec.log_materials.wood


__all__ = ["Problem", "simulate", "load_problem", "run_map", "run_grid_search", "run_sampler",
           "posterior_for", "resolve_smoothing", "relative_l2_error"]
