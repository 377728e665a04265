"""Run configuration: INI-style sections mapped onto dataclasses.

Every key has a default; ``write_lock`` emits the fully resolved config so a
run can be repeated exactly from its ``run.lock``.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

from .priors import PRIOR_NAMES


class ConfigError(ValueError):
    pass


@dataclass
class RunSection:
    seed: int = 0
    output: str = "out"


@dataclass
class PhantomSection:
    kind: str = "log"
    side: int = 64
    seed: int = 0
    n_knots: int = 5
    rot: bool = True
    metal: bool = True
    n_pores: int = 12
    n_cobs: int = 8
    n_slices: int = 0
    truth: str = ""


@dataclass
class GeometrySection:
    n_angles: int = 30
    detector_count: int = 0


@dataclass
class NoiseSection:
    noise_fraction: float = 0.015
    sinogram: str = ""


@dataclass
class PriorSection:
    name: str = "tv"
    sigma_pr: float = 1.0
    sigma_boundary: float = 0.0
    alpha: float = 1.0
    alpha_boundary: float = 0.0
    lam: float = 1.0
    levels: int = 0
    scale: float = 1.0
    smoothing_beta: float = -1.0


@dataclass
class MapSection:
    memory: int = 10
    max_iterations: int = 2000
    grad_tol: float = 1e-6


@dataclass
class McmcSection:
    estimator: str = "map"
    mwg_adapt: int = 50000
    mwg_samples: int = 40000
    nuts_adapt: int = 100
    nuts_samples: int = 400
    target_accept: float = 0.8
    max_depth: int = 10
    diagonal_mass: bool = False
    random_order: bool = False


@dataclass
class GridSearchSection:
    enabled: bool = False
    parameter: str = ""
    candidates: str = ""
    lo: float = 1e-3
    hi: float = 1e3
    n: int = 13
    truth: str = ""


@dataclass
class StackSection:
    inputs: str = ""
    slice_spacing: float = 1.0


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    phantom: PhantomSection = field(default_factory=PhantomSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    prior: PriorSection = field(default_factory=PriorSection)
    map: MapSection = field(default_factory=MapSection)
    mcmc: McmcSection = field(default_factory=McmcSection)
    gridsearch: GridSearchSection = field(default_factory=GridSearchSection)
    stack: StackSection = field(default_factory=StackSection)

    def validate(self, lines: dict | None = None) -> "RunConfig":
        lines = lines or {}

        def fail(section, key, msg):
            where = lines.get((section, key))
            prefix = f"line {where}: " if where else ""
            raise ConfigError(f"{prefix}[{section}] {key}: {msg}")

        if self.phantom.kind not in ("log", "drill_core"):
            fail("phantom", "kind", "must be log or drill_core")
        if self.phantom.side < 4:
            fail("phantom", "side", "must be at least 4")
        if self.geometry.n_angles < 1:
            fail("geometry", "n_angles", "must be positive")
        if self.geometry.detector_count < 0:
            fail("geometry", "detector_count", "must be nonnegative (0 = grid side)")
        if not self.noise.noise_fraction > 0:
            fail("noise", "noise_fraction", "must be positive")
        if self.prior.name not in PRIOR_NAMES:
            fail("prior", "name", f"must be one of {', '.join(PRIOR_NAMES)}")
        for key in ("sigma_pr", "alpha", "lam", "scale"):
            if not getattr(self.prior, key) > 0:
                fail("prior", key, "must be positive")
        if self.mcmc.estimator not in ("map", "mwg", "nuts"):
            fail("mcmc", "estimator", "must be map, mwg or nuts")
        for key in ("mwg_samples", "nuts_samples"):
            if getattr(self.mcmc, key) < 1:
                fail("mcmc", key, "must be at least 1")
        for key in ("mwg_adapt", "nuts_adapt"):
            if getattr(self.mcmc, key) < 0:
                fail("mcmc", key, "must be nonnegative")
        if not 0 < self.mcmc.target_accept < 1:
            fail("mcmc", "target_accept", "must lie in (0, 1)")
        if self.map.memory < 1 or self.map.max_iterations < 1:
            fail("map", "memory", "memory and max_iterations must be positive")
        for section, key in (("phantom", "truth"), ("noise", "sinogram"), ("gridsearch", "truth")):
            path = getattr(getattr(self, section), key)
            if path and not Path(path).with_suffix(".hdr").exists() and not Path(path).exists():
                fail(section, key, f"file {path!r} does not exist")
        if self.gridsearch.candidates:
            try:
                vals = self.candidate_values()
            except ValueError:
                fail("gridsearch", "candidates", "must be a comma-separated list of numbers")
            if not vals or any(not v > 0 for v in vals):
                fail("gridsearch", "candidates", "must be positive numbers")
        elif not (0 < self.gridsearch.lo < self.gridsearch.hi and self.gridsearch.n >= 1):
            fail("gridsearch", "lo", "need 0 < lo < hi and n >= 1")
        return self

    def candidate_values(self) -> list:
        gs = self.gridsearch
        if gs.candidates:
            return [float(t) for t in gs.candidates.split(",") if t.strip()]
        import numpy as np

        return [float(v) for v in np.logspace(np.log10(gs.lo), np.log10(gs.hi), gs.n)]


def _convert(text: str, typ):
    if typ in (bool, "bool"):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if typ in (int, "int"):
        return int(text)
    if typ in (float, "float"):
        return float(text)
    return text.strip()


def _line_numbers(text: str) -> dict:
    out = {}
    section = None
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"\s*([A-Za-z_][\w]*)\s*[=:]", line)
        if m and section:
            out[(section, m.group(1))] = n
    return out


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    lines = _line_numbers(text)
    cfg = RunConfig()
    sections = {f.name: f for f in dataclasses.fields(cfg)}
    for name in parser.sections():
        if name not in sections:
            raise ConfigError(f"line {lines.get((name, None), '?')}: unknown section [{name}]")
        target = getattr(cfg, name)
        ftypes = {f.name: f.type for f in dataclasses.fields(target)}
        for key, raw in parser.items(name):
            if key not in ftypes:
                raise ConfigError(f"line {lines.get((name, key), '?')}: unknown key {key!r} in [{name}]")
            try:
                setattr(target, key, _convert(raw, ftypes[key]))
            except ValueError as exc:
                raise ConfigError(f"line {lines.get((name, key), '?')}: [{name}] {key}: {exc}") from exc
    return cfg.validate(lines)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text())


def dump_config(cfg: RunConfig) -> str:
    out = []
    for f in dataclasses.fields(cfg):
        out.append(f"[{f.name}]")
        sec = getattr(cfg, f.name)
        for g in dataclasses.fields(sec):
            v = getattr(sec, g.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{g.name} = {v}")
        out.append("")
    return "\n".join(out)


def write_lock(cfg: RunConfig, out_dir) -> Path:
    path = Path(out_dir) / "run.lock"
    path.write_text(dump_config(cfg), newline="\n")
    return path
