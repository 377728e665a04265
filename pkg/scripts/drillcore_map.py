#!/usr/bin/env python3
"""MAP reconstructions of the low-contrast drill-core phantom under every prior."""
import argparse
from pathlib import Path

from baytomo import io, pipeline as P
from baytomo.config import RunConfig

RANGES = {"gaussian": (1e-2, 1e2), "tv": (1e-2, 1e2), "besov": (1e-2, 1e2), "cauchy": (1e-1, 1e3)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/drillcore")
    ap.add_argument("--angles", type=int, default=30)
    ap.add_argument("--candidates", type=int, default=9)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for prior, (lo, hi) in RANGES.items():
        cfg = RunConfig()
        cfg.phantom.kind = "drill_core"
        cfg.geometry.n_angles = args.angles
        cfg.prior.name = prior
        cfg.gridsearch.lo, cfg.gridsearch.hi, cfg.gridsearch.n = lo, hi, args.candidates
        prob = P.simulate(cfg)
        param, best, _ = P.run_grid_search(cfg, prob)
        x, _ = P.run_map(cfg, prob)
        vmax = float(prob.truth.values.max())
        io.render_pgm(out / "truth.pgm", prob.truth.as_array(), vmax)
        io.render_pgm(out / f"{prior}.pgm", x.reshape(prob.grid.shape), vmax)
        io.write_image(out / prior, prob.grid.with_values(x))
        print(f"{prior:9s} {param}={best:.4g}  rel L2 error {P.relative_l2_error(x, prob.truth.values):.4f}")


if __name__ == "__main__":
    main()
