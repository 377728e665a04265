from .accumulator import ChainAccumulator, accumulate, batch_means_se, finalize
from .hmc import NutsConfig, NutsDiagnostics, leapfrog, nuts_run
from .mwg import MwgConfig, MwgDiagnostics, likelihood_delta, mwg_run
from .targets import CauchyProductTarget, GaussianTarget

__all__ = [
    "ChainAccumulator", "accumulate", "finalize", "batch_means_se",
    "NutsConfig", "NutsDiagnostics", "leapfrog", "nuts_run",
    "MwgConfig", "MwgDiagnostics", "likelihood_delta", "mwg_run",
    "GaussianTarget", "CauchyProductTarget",
]
