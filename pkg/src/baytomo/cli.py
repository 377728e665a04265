"""Command-line front end.

    baytomo simulate|map|sample|gridsearch|stack [--config PATH] [--seed N]
            [--out DIR] [--prior NAME] [--angles N] [--estimator map|mwg|nuts]

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical error.
Every command writes ``run.lock`` (the resolved config) into its output
directory; ``--config DIR/run.lock`` repeats the run.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, RunConfig, load_config, write_lock
from .map_opt import relative_l2_error, write_error_table

log = logging.getLogger("baytomo")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.run.seed = args.seed
    if args.out is not None:
        cfg.run.output = args.out
    if args.prior is not None:
        cfg.prior.name = args.prior
    if args.angles is not None:
        cfg.geometry.n_angles = args.angles
    if args.estimator is not None:
        cfg.mcmc.estimator = args.estimator
    return cfg.validate()


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.run.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_image(out: Path, stem: str, values, like, vmax=None):
    grid = like.with_values(values)
    io.write_image(out / stem, grid)
    return io.render_pgm(out / f"{stem}.pgm", grid.as_array(), vmax)


def cmd_simulate(cfg: RunConfig) -> int:
    from .pipeline import simulate

    out = _out_dir(cfg)
    prob = simulate(cfg)
    io.write_image(out / "truth", prob.truth)
    io.render_pgm(out / "truth.pgm", prob.truth.as_array())
    io.write_sinogram(out / "sinogram", prob.sinogram, prob.truth, prob.geom)
    write_lock(cfg, out)
    print(f"sigma = {prob.sinogram.noise_sigma!r}")
    return EXIT_OK


def _reconstruct(cfg: RunConfig, sample: bool) -> int:
    from . import pipeline as P

    out = _out_dir(cfg)
    prob = P.load_problem(cfg)
    P.resolve_smoothing(cfg, prob)
    if cfg.gridsearch.enabled:
        param, best, rows = P.run_grid_search(cfg, prob)
        write_error_table(rows, out / "gridsearch.csv")
        print(f"{param} = {best!r}")
    write_lock(cfg, out)

    x_map, rep = P.run_map(cfg, prob)
    with open(out / "lbfgs_trace.csv", "w", newline="\n") as fh:
        fh.write("iteration,objective\n")
        for i, f in enumerate(rep.trace):
            fh.write(f"{i},{f!r}\n")
    vmax = float(np.percentile(prob.truth.values, 99.5)) if prob.truth is not None else None
    vmax = _write_image(out, "map", x_map, prob.grid, vmax)
    metrics = {"map_iterations": rep.iterations, "map_converged": rep.converged}
    if prob.truth is not None:
        metrics["map_rel_l2_error"] = relative_l2_error(x_map, prob.truth.values)

    if sample:
        seed = cfg.run.seed + 1
        acc, diag = P.run_sampler(cfg, prob, x_map, seed)
        cm, var, logvar = acc.finalize()
        _write_image(out, "cm", cm, prob.grid, vmax)
        io.write_image(out / "variance", prob.grid.with_values(var))
        io.write_image(out / "logvar", prob.grid.with_values(logvar))
        lv = np.where(np.isfinite(logvar), logvar, np.nan)
        lo, hi = np.nanmin(lv), np.nanmax(lv)
        io.render_pgm(out / "logvar.pgm", np.nan_to_num((lv - lo).reshape(prob.grid.shape), nan=0.0),
                      (hi - lo) or 1.0)
        diag.write_csv(out / "diagnostics.csv")
        if prob.truth is not None:
            metrics["cm_rel_l2_error"] = relative_l2_error(cm, prob.truth.values)
        if cfg.mcmc.estimator == "nuts":
            metrics["step_size"] = diag.final_step_size
            metrics["divergence_rate"] = diag.divergence_rate
            if diag.divergence_rate > 0.1:
                print(f"WARNING: {100 * diag.divergence_rate:.1f}% divergent transitions", file=sys.stderr)
        else:
            metrics["mean_acceptance"] = diag.mean_acceptance
    with open(out / "metrics.txt", "w", newline="\n") as fh:
        for k, v in metrics.items():
            fh.write(f"{k} = {v!r}\n")
    for k, v in metrics.items():
        print(f"{k} = {v!r}")
    return EXIT_OK


def cmd_reconstruct(cfg: RunConfig) -> int:
    return _reconstruct(cfg, sample=cfg.mcmc.estimator != "map")


def cmd_gridsearch(cfg: RunConfig) -> int:
    from . import pipeline as P

    out = _out_dir(cfg)
    param, best, rows = P.run_grid_search(cfg)
    write_error_table(rows, out / "gridsearch.csv")
    write_lock(cfg, out)
    (out / "best.txt").write_text(f"{param} = {best!r}\n", newline="\n")
    print(f"{param} = {best!r}")
    return EXIT_OK


def cmd_stack(cfg: RunConfig, paths) -> int:
    from .volume import stack

    out = _out_dir(cfg)
    paths = list(paths) or [p.strip() for p in cfg.stack.inputs.split(",") if p.strip()]
    if len(paths) < 2:
        raise ConfigError("stack needs at least two slice images")
    cfg.stack.inputs = ",".join(paths)
    vol = stack([io.read_image(p) for p in paths], cfg.stack.slice_spacing)
    io.write_volume(out / "volume", vol)
    write_lock(cfg, out)
    print(f"stacked {len(paths)} slices into {out / 'volume.f64'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="baytomo", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "map", "sample", "gridsearch", "stack"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--prior", type=str, default=None)
        p.add_argument("--angles", type=int, default=None)
        p.add_argument("--estimator", choices=("map", "mwg", "nuts"), default=None)
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "stack":
            p.add_argument("slices", nargs="*")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    threads = os.environ.get("BAYTOMO_THREADS")
    if threads:
        try:
            import numba

            numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
        except ValueError:
            pass
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.command == "map":
            cfg.mcmc.estimator = "map"
        cfg = _apply_overrides(cfg, args)
        if args.command == "sample" and cfg.mcmc.estimator == "map":
            raise ConfigError("sample needs --estimator mwg or nuts")
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command in ("map", "sample"):
            return cmd_reconstruct(cfg)
        if args.command == "gridsearch":
            return cmd_gridsearch(cfg)
        return cmd_stack(cfg, args.slices)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
