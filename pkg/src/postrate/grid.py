"""Midpoint quadrature grid on [0, 1] and densities represented on it."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np

DEFAULT_FLOOR = 1e-10
DEFAULT_M = 1024


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, 1] into ``m`` cells, evaluated at midpoints.

    Every cell carries Lebesgue measure ``1/m``, so quadrature against the
    grid is the midpoint rule.
    """

    m: int

    def __post_init__(self):
        if isinstance(self.m, bool) or not isinstance(self.m, (int, np.integer)):
            raise TypeError(f"grid size must be an integer, got {self.m!r}")
        if self.m < 2:
            raise ValueError(f"grid needs at least 2 cells, got m={self.m}")

    @cached_property
    def nodes(self) -> np.ndarray:
        x = (np.arange(1, self.m + 1) - 0.5) / self.m
        x.flags.writeable = False
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.m, 1.0 / self.m)
        w.flags.writeable = False
        return w

    @property
    def weight(self) -> float:
        return 1.0 / self.m

    def cell_index(self, x) -> np.ndarray:
        """Map points of [0, 1] to the index of the cell containing them."""
        x = np.asarray(x, dtype=float)
        if np.any((x < 0) | (x > 1)) or not np.all(np.isfinite(x)):
            raise ValueError("points must lie in [0, 1]")
        return np.minimum((x * self.m).astype(np.int64), self.m - 1)


def make_grid(m: int = DEFAULT_M) -> Grid:
    return Grid(int(m) if isinstance(m, np.integer) else m)


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Nonnegative nodal values that integrate to one on ``grid``.

    Build these through :func:`normalize`; the constructor only checks the
    invariants.
    """

    grid: Grid
    values: np.ndarray
    floor: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.m,):
            raise ValueError(f"expected {self.grid.m} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")
        if self.floor < 0:
            raise ValueError("floor must be nonnegative")
        if np.any(v < self.floor):
            raise ValueError("density values fall below the floor")
        total = float(v.sum()) / self.grid.m
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"density integrates to {total!r}, not 1")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.grid.m

    @cached_property
    def sqrt(self) -> np.ndarray:
        return np.sqrt(self.values)

    @cached_property
    def log(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.values)

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.values > 0))

    def with_label(self, label: str) -> "GridDensity":
        out = GridDensity(self.grid, self.values, self.floor, label)
        return out

    def __eq__(self, other):
        if not isinstance(other, GridDensity):
            return NotImplemented
        return (self.grid == other.grid and self.floor == other.floor
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def __repr__(self):
        name = f" {self.label!r}" if self.label else ""
        return f"<GridDensity{name} m={self.m} floor={self.floor:g}>"


def _water_fill(v: np.ndarray, floor: float) -> np.ndarray:
    """Scale ``v`` by c > 0 so that mean(max(c*v, floor)) == 1."""
    m = v.size
    if floor == 0.0:
        return v / (v.sum() / m)
    # the clamped set only grows as c shrinks, so this converges in <= m steps
    active = v > 0
    for _ in range(m + 1):
        n_low = m - int(active.sum())
        c = (1.0 - floor * n_low / m) / (v[active].sum() / m)
        new_active = c * v > floor
        if np.array_equal(new_active, active):
            break
        active = new_active
    else:  # pragma: no cover
        raise RuntimeError("floor clamp did not settle")
    out = np.where(active, c * v, floor)
    # absorb the last rounding into the unclamped part, keeping proportions
    out[active] *= (m - floor * (m - int(active.sum()))) / out[active].sum()
    return np.maximum(out, floor)


def normalize(values, grid: Grid, floor: float = 0.0, label: str = "") -> GridDensity:
    """Clamp ``values`` below at ``floor`` and rescale to a grid density.

    The rescaling is solved jointly with the clamp, so the result is exactly
    ``max(c * values, floor)`` for the unique ``c`` giving integral one, and
    every returned value is at least ``floor``.
    """
    v = np.asarray(values, dtype=float)
    if v.shape != (grid.m,):
        raise ValueError(f"expected {grid.m} values, got shape {v.shape}")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise ValueError("values must be finite and nonnegative")
    if not np.any(v > 0):
        raise ValueError("cannot normalize an all-zero vector")
    if not 0.0 <= floor < 1.0:
        raise ValueError(f"floor must lie in [0, 1), got {floor}")
    return GridDensity(grid, _water_fill(v, float(floor)), float(floor), label)


def uniform(grid: Grid, label: str = "uniform") -> GridDensity:
    return GridDensity(grid, np.ones(grid.m), 0.0, label)


def from_function(fn: Callable[[np.ndarray], np.ndarray], grid: Grid,
                  floor: float = 0.0, label: str = "") -> GridDensity:
    """Evaluate ``fn`` at the nodes and normalize."""
    return normalize(np.asarray(fn(grid.nodes), dtype=float), grid, floor, label)


def integrate(h: Union[Callable, np.ndarray], grid: Grid) -> float:
    """Midpoint quadrature of ``h`` (callable or nodal array) over [0, 1]."""
    vals = np.asarray(h(grid.nodes) if callable(h) else h, dtype=float)
    if vals.shape == ():
        vals = np.full(grid.m, float(vals))
    if vals.shape != (grid.m,):
        raise ValueError(f"expected {grid.m} nodal values, got shape {vals.shape}")
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"integrand is not finite at node {i} (x={grid.nodes[i]:.6g})")
    return float(vals.sum() / grid.m)


def same_grid(*densities: GridDensity) -> Grid:
    grid = densities[0].grid
    for d in densities[1:]:
        if d.grid != grid:
            raise ValueError(f"grid mismatch: m={grid.m} vs m={d.grid.m}")
    return grid
