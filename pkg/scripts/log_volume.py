#!/usr/bin/env python3
"""3D log reconstruction by stacking per-slice MAP estimates.

Each slice of a synthetic log volume is simulated and reconstructed
independently with the Cauchy prior; the estimates are stacked into one
volume file.  Reports, per slice, whether the brightest reconstructed pixel
lies inside the metal piece.
"""
import argparse
from pathlib import Path

import numpy as np

from baytomo import io, pipeline as P
from baytomo.config import RunConfig
from baytomo.phantoms import PhantomSpec, make_log_phantom, metal_mask
from baytomo.volume import stack


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/log_volume")
    ap.add_argument("--side", type=int, default=64)
    ap.add_argument("--slices", type=int, default=16)
    ap.add_argument("--angles", type=int, default=30)
    ap.add_argument("--lam", type=float, default=10.0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = PhantomSpec(side=args.side)
    truth = make_log_phantom(spec, n_slices=args.slices)
    box = metal_mask(spec)
    estimates = []
    for s, sl in enumerate(truth.slices):
        cfg = RunConfig()
        cfg.run.seed = s
        cfg.phantom.side = args.side
        cfg.geometry.n_angles = args.angles
        cfg.prior.name = "cauchy"
        cfg.prior.lam = args.lam
        prob = P.simulate(cfg, sl)
        x, _ = P.run_map(cfg, prob)
        estimates.append(prob.grid.with_values(x))
        peak = np.unravel_index(np.argmax(x), prob.grid.shape)
        print(f"slice {s:2d}: rel L2 error {P.relative_l2_error(x, sl.values):.4f}, "
              f"peak inside metal: {bool(box[peak])}", flush=True)
    io.write_volume(out / "truth", truth)
    io.write_volume(out / "map", stack(estimates, truth.slice_spacing))


if __name__ == "__main__":
    main()
