"""Finitely supported priors over grid densities.

Infinite mixtures are truncated; the discarded mass is kept on the prior as
``tail_mass`` so that condition checks can count it against the sieve.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from postrate.families import BernsteinSpec, SmoothFamilySpec, bernstein_kernels, smooth_family_density
from postrate.grid import Grid, GridDensity, normalize, same_grid

DEFAULT_ATOM_CAP = 10**6


@dataclass(frozen=True, eq=False)
class AtomicPrior:
    atoms: tuple
    weights: np.ndarray
    labels: tuple = ()
    tail_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise ValueError("a prior needs at least one atom")
        same_grid(*atoms)
        w = np.array(self.weights, dtype=float)
        if w.shape != (len(atoms),):
            raise ValueError(f"{len(atoms)} atoms but {w.size} weights")
        if np.any(~(w > 0)):
            raise ValueError("prior weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"prior weights sum to {w.sum()!r}")
        labels = tuple(self.labels) or tuple(a.label or f"atom {i}" for i, a in enumerate(atoms))
        if len(labels) != len(atoms):
            raise ValueError("one label per atom")
        if not 0.0 <= self.tail_mass < 1.0:
            raise ValueError("tail mass must lie in [0, 1)")
        w.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.atoms)

    @property
    def grid(self) -> Grid:
        return self.atoms[0].grid

    @cached_property
    def values(self) -> np.ndarray:
        """Atom values stacked into an (atoms, m) array."""
        v = np.stack([a.values for a in self.atoms])
        v.flags.writeable = False
        return v

    @cached_property
    def log_values(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            v = np.log(self.values)
        v.flags.writeable = False
        return v

    @cached_property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)


def weighted_atoms(atoms: Sequence[GridDensity], weights, labels=(), **kw) -> AtomicPrior:
    """Prior with weights proportional to ``weights``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(~(w > 0)):
        raise ValueError("weights must be positive")
    return AtomicPrior(tuple(atoms), w / w.sum(), tuple(labels), **kw)


def uniform_atoms(atoms: Sequence[GridDensity], labels=()) -> AtomicPrior:
    atoms = tuple(atoms)
    if not atoms:
        raise ValueError("a prior needs at least one atom")
    return AtomicPrior(atoms, np.full(len(atoms), 1.0 / len(atoms)), tuple(labels))


def prior_mass(prior: AtomicPrior, predicate: Callable[[GridDensity], bool]) -> float:
    mask = np.fromiter((bool(predicate(a)) for a in prior.atoms), bool, len(prior))
    return float(prior.weights[mask].sum())


# --------------------------------------------------------------------------
# Sieve mixtures
# --------------------------------------------------------------------------

Levels = Union[Sequence[Sequence[GridDensity]], Callable[[int], Sequence[GridDensity]]]
LevelWeights = Union[Sequence[float], Callable[[int], float]]


@dataclass(frozen=True)
class SieveSpec:
    """Per-level atom lists and level weights ``a_j``, indexed from 1.

    Either field may be a callable of the level index for unbounded
    sequences; finite weight lists must sum to one.
    """

    levels: Levels
    level_weights: LevelWeights

    def __post_init__(self):
        if not callable(self.level_weights):
            a = [float(x) for x in self.level_weights]
            if not a or any(x <= 0 for x in a) or abs(math.fsum(a) - 1.0) > 1e-10:
                raise ValueError("level weights must be positive and sum to 1")
        if not callable(self.levels):
            if any(len(lv) == 0 for lv in self.levels):
                raise ValueError("every sieve level needs at least one atom")

    def level(self, j: int):
        return self.levels(j) if callable(self.levels) else self.levels[j - 1]

    def weight(self, j: int) -> float:
        return float(self.level_weights(j) if callable(self.level_weights) else self.level_weights[j - 1])

    def tail_after(self, t: int) -> float:
        if callable(self.level_weights):
            return max(0.0, 1.0 - math.fsum(self.weight(j) for j in range(1, t + 1)))
        return math.fsum(self.level_weights[t:])


def sieve_mixture(spec: SieveSpec, truncate_at: int) -> AtomicPrior:
    """Prior ``sum_j a_j * uniform(level j)`` truncated to levels ``<= truncate_at``."""
    if truncate_at < 1:
        raise ValueError("keep at least one level")
    if not callable(spec.levels):
        truncate_at = min(truncate_at, len(spec.levels))
    atoms, weights, labels = [], [], []
    for j in range(1, truncate_at + 1):
        level = list(spec.level(j))
        if not level:
            raise ValueError(f"sieve level {j} is empty")
        a = spec.weight(j)
        for i, atom in enumerate(level):
            atoms.append(atom)
            weights.append(a / len(level))
            labels.append(f"level={j},atom={i}")
    tail = spec.tail_after(truncate_at)
    return weighted_atoms(atoms, weights, labels, tail_mass=tail,
                          meta={"kind": "sieve", "levels": truncate_at})


# --------------------------------------------------------------------------
# Bernstein order-mixture prior
# --------------------------------------------------------------------------

def simplex_lattice(k: int, cells: int):
    """Points of the k-simplex with coordinates in {0, 1/(cells-1), ..., 1}."""
    steps = cells - 1
    # stars and bars: choose k-1 bar positions among steps + k - 1 slots
    for bars in itertools.combinations(range(steps + k - 1), k - 1):
        edges = (-1,) + bars + (steps + k - 1,)
        yield tuple((edges[i + 1] - edges[i] - 1) / steps for i in range(k))


def simplex_lattice_size(k: int, cells: int) -> int:
    return math.comb(cells - 1 + k - 1, k - 1)


def _rho_terms(rho, kmax: int):
    """Order weights up to kmax and the remaining tail, as given (unnormalized)."""
    if callable(rho):
        head = [float(rho(j)) for j in range(1, kmax + 1)]
        tail, j = 0.0, kmax + 1
        while j < kmax + 10_000:
            t = float(rho(j))
            tail += t
            if t <= 1e-18 * (sum(head) + tail):
                break
            j += 1
        return head, tail
    seq = [float(x) for x in rho]
    head = seq[:kmax] + [0.0] * max(0, kmax - len(seq))
    return head, math.fsum(seq[kmax:])


def tail_exponent(rho, kmax: int) -> float:
    """Largest c0 with rho(j) <= (1/j^j)^c0 for 2 <= j <= kmax."""
    head, _ = _rho_terms(rho, kmax)
    vals = [-math.log(head[j - 1]) / (j * math.log(j)) for j in range(2, kmax + 1) if head[j - 1] > 0]
    return min(vals) if vals else math.inf


def bernstein_prior(rho, kmax: int, weight_cells: int, grid: Grid,
                    atom_cap: int = DEFAULT_ATOM_CAP, floor: float = 0.0) -> AtomicPrior:
    """Mixture over orders ``k <= kmax`` of uniform priors on lattice Bernstein densities.

    ``rho`` is a weight function (callable or list, index 1 = order 1). The
    weight simplex of order k is replaced by its lattice with ``weight_cells``
    levels per coordinate, so order k contributes C(weight_cells + k - 2, k - 1)
    atoms sharing mass rho(k).
    """
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    if weight_cells < 2:
        raise ValueError("weight_cells must be >= 2")
    head, tail = _rho_terms(rho, kmax)
    if any(not (r > 0) for r in head):
        raise ValueError("rho must be positive on orders 1..kmax")
    count = sum(simplex_lattice_size(k, weight_cells) for k in range(1, kmax + 1))
    if count > atom_cap:
        raise ValueError(f"Bernstein lattice has {count} atoms, above the cap of {atom_cap}")

    atoms, weights, labels = [], [], []
    for k in range(1, kmax + 1):
        kernels = bernstein_kernels(k, grid)
        size = simplex_lattice_size(k, weight_cells)
        for cell, w in enumerate(simplex_lattice(k, weight_cells)):
            spec = BernsteinSpec(k, w)
            atoms.append(normalize(np.asarray(spec.weights) @ kernels, grid, floor,
                                   label=f"k={k},cell={cell}"))
            weights.append(head[k - 1] / size)
            labels.append(f"k={k},cell={cell}")
    total = math.fsum(head) + tail
    return weighted_atoms(atoms, weights, labels, tail_mass=tail / total,
                          meta={"kind": "bernstein", "kmax": kmax, "weight_cells": weight_cells,
                                "c0_max": tail_exponent(rho, kmax)})


# --------------------------------------------------------------------------
# Box-uniform prior on a smooth family, discretized on a lattice
# --------------------------------------------------------------------------

def box_lattice_prior(spec: SmoothFamilySpec, points: int, grid: Grid,
                      floor: float = 0.0) -> AtomicPrior:
    """Uniform prior on the ``points``-per-axis lattice of the parameter box."""
    if points < 2:
        raise ValueError("need at least 2 lattice points per axis")
    axes = [np.linspace(lo, hi, points) for lo, hi in spec.theta_box]
    thetas = list(itertools.product(*axes))
    if len(thetas) > DEFAULT_ATOM_CAP:
        raise ValueError(f"lattice has {len(thetas)} atoms, above the cap")
    atoms = [smooth_family_density(spec, t, grid, floor) for t in thetas]
    return AtomicPrior(tuple(atoms), np.full(len(atoms), 1.0 / len(atoms)),
                       tuple(a.label for a in atoms),
                       meta={"kind": "box_lattice", "thetas": [list(map(float, t)) for t in thetas]})
