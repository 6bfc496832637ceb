"""Numerical laboratory for posterior contraction rates of density estimators.

Densities live on a midpoint grid over [0, 1]; priors are finitely supported,
so every posterior, covering number and alpha-entropy is computed exactly.
"""

from postrate.grid import DEFAULT_FLOOR, Grid, GridDensity, integrate, make_grid, normalize
from postrate.divergences import (
    DivergenceReport,
    divergence_report,
    hellinger,
    hstar,
    kl,
    sup_ratio,
    v_divergence,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_FLOOR",
    "Grid",
    "GridDensity",
    "integrate",
    "make_grid",
    "normalize",
    "DivergenceReport",
    "divergence_report",
    "hellinger",
    "hstar",
    "kl",
    "sup_ratio",
    "v_divergence",
]
