"""JSON descriptions of densities and priors, and their builders.

Density specs::

    {"kind": "uniform"}
    {"kind": "beta", "a": 2, "b": 1}
    {"kind": "bernstein", "k": 3, "weights": [0.2, 0.3, 0.5]}
    {"kind": "spline_exp", "q": 2, "K": 4, "theta": [...], "M": 5}
    {"kind": "smooth", "d": 1, "theta_box": [[-1, 1]], "features": ["x"], "theta": [0.2]}
    {"kind": "values", "values": [...]}
    {"kind": "csv", "path": "f0.csv"}

Prior specs::

    {"kind": "atoms", "atoms": [<density>, ...], "weights": [...]}
    {"kind": "sieve", "levels": [[<density>, ...], ...], "level_weights": [...], "truncate_at": 3}
    {"kind": "bernstein", "kmax": 4, "weight_cells": 3, "rho": [...] | {"kind": "power_tail", "c0": 1}}
    {"kind": "box_lattice", "family": {"d": 1, "theta_box": [[-1, 1]], "features": ["x"]}, "points": 51}
    {"kind": "directory", "path": "prior_dir"}
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from postrate.families import (
    BernsteinSpec,
    SmoothFamilySpec,
    SplineExpSpec,
    bernstein_density,
    log_beta_pdf,
    smooth_family_density,
    spline_exp_density,
)
from postrate.grid import Grid, GridDensity, normalize, uniform
from postrate.priors import (
    AtomicPrior,
    SieveSpec,
    bernstein_prior,
    box_lattice_prior,
    sieve_mixture,
    uniform_atoms,
    weighted_atoms,
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _check_keys(spec, allowed: set, required: set, where: str):
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: expected a JSON object, got {type(spec).__name__}")
    unknown = sorted(set(spec) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key {unknown[0]!r}")
    missing = sorted(required - set(spec))
    if missing:
        raise ConfigError(f"{where}: missing key {missing[0]!r}")


_DENSITY_KEYS = {
    "uniform": (set(), set()),
    "beta": ({"a", "b"}, {"a", "b"}),
    "bernstein": ({"k", "weights"}, {"k", "weights"}),
    "spline_exp": ({"q", "K", "theta", "M"}, {"q", "K", "theta"}),
    "smooth": ({"d", "theta_box", "features", "beta", "theta"}, {"d", "theta_box", "features", "theta"}),
    "values": ({"values"}, {"values"}),
    "csv": ({"path"}, {"path"}),
}


def density_from_spec(spec: dict, grid: Grid, floor: float = 0.0, base_dir=None,
                      where: str = "density") -> GridDensity:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{where}: needs a 'kind'")
    kind = spec["kind"]
    if kind not in _DENSITY_KEYS:
        raise ConfigError(f"{where}: unknown kind {kind!r}")
    allowed, required = _DENSITY_KEYS[kind]
    _check_keys(spec, allowed | {"kind", "label"}, required, where)
    label = spec.get("label", "")
    try:
        if kind == "uniform":
            d = uniform(grid) if floor == 0 else normalize(np.ones(grid.m), grid, floor)
        elif kind == "beta":
            d = normalize(np.exp(log_beta_pdf(grid.nodes, float(spec["a"]), float(spec["b"]))), grid, floor)
        elif kind == "bernstein":
            d = bernstein_density(BernsteinSpec(int(spec["k"]), spec["weights"]), grid, floor)
        elif kind == "spline_exp":
            s = SplineExpSpec(int(spec["q"]), int(spec["K"]), spec["theta"], float(spec.get("M", math.inf)))
            d = spline_exp_density(s, grid, floor)
        elif kind == "smooth":
            d = smooth_family_density(_family(spec, where), spec["theta"], grid, floor)
        elif kind == "values":
            d = normalize(spec["values"], grid, floor)
        else:
            from postrate.storage import read_density_csv
            path = Path(spec["path"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            d = read_density_csv(path, floor)
            if d.grid != grid:
                raise ConfigError(f"{where}: {path} has m={d.grid.m}, expected {grid.m}")
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return d.with_label(label) if label else d


def _family(spec: dict, where: str) -> SmoothFamilySpec:
    return SmoothFamilySpec(int(spec["d"]), spec["theta_box"], tuple(spec["features"]),
                            float(spec.get("beta", 1.0)))


def _rho(spec, where: str):
    if isinstance(spec, list):
        return [float(x) for x in spec]
    _check_keys(spec, {"kind", "c0", "ratio"}, {"kind"}, where)
    if spec["kind"] == "power_tail":
        c0 = float(spec.get("c0", 1.0))
        return lambda j: j ** (-c0 * j)
    if spec["kind"] == "geometric":
        r = float(spec.get("ratio", 0.5))
        return lambda j: (1 - r) * r ** (j - 1)
    raise ConfigError(f"{where}: unknown rho kind {spec['kind']!r}")


_PRIOR_KEYS = {
    "atoms": ({"atoms", "weights"}, {"atoms"}),
    "sieve": ({"levels", "level_weights", "truncate_at"}, {"levels", "level_weights"}),
    "bernstein": ({"kmax", "weight_cells", "rho", "atom_cap"}, {"kmax", "weight_cells", "rho"}),
    "box_lattice": ({"family", "points"}, {"family", "points"}),
    "directory": ({"path"}, {"path"}),
}


def prior_from_spec(spec: dict, grid: Grid, floor: float = 0.0, base_dir=None,
                    where: str = "prior") -> AtomicPrior:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{where}: needs a 'kind'")
    kind = spec["kind"]
    if kind not in _PRIOR_KEYS:
        raise ConfigError(f"{where}: unknown kind {kind!r}")
    allowed, required = _PRIOR_KEYS[kind]
    _check_keys(spec, allowed | {"kind"}, required, where)
    try:
        if kind == "atoms":
            atoms = [density_from_spec(a, grid, floor, base_dir, f"{where}.atoms[{i}]")
                     for i, a in enumerate(spec["atoms"])]
            labels = [a.label or f"atom {i}" for i, a in enumerate(atoms)]
            if "weights" in spec:
                return weighted_atoms(atoms, spec["weights"], labels)
            return uniform_atoms(atoms, labels)
        if kind == "sieve":
            levels = [[density_from_spec(a, grid, floor, base_dir, f"{where}.levels[{j}][{i}]")
                       for i, a in enumerate(level)] for j, level in enumerate(spec["levels"])]
            lw = spec["level_weights"]
            if isinstance(lw, dict):
                _check_keys(lw, {"kind", "ratio"}, {"kind"}, f"{where}.level_weights")
                r = float(lw.get("ratio", 0.5))
                lw = lambda j, r=r: (1 - r) * r ** (j - 1)  # noqa: E731
            sieve = SieveSpec(levels, lw)
            return sieve_mixture(sieve, int(spec.get("truncate_at", len(levels))))
        if kind == "bernstein":
            return bernstein_prior(_rho(spec["rho"], f"{where}.rho"), int(spec["kmax"]),
                                   int(spec["weight_cells"]), grid,
                                   atom_cap=int(spec.get("atom_cap", 10**6)), floor=floor)
        if kind == "box_lattice":
            fam = spec["family"]
            _check_keys(fam, {"d", "theta_box", "features", "beta"}, {"d", "theta_box", "features"},
                        f"{where}.family")
            return box_lattice_prior(_family(fam, where), int(spec["points"]), grid, floor)
        from postrate.storage import load_prior
        path = Path(spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        prior = load_prior(path)
        if prior.grid != grid:
            raise ConfigError(f"{where}: {path} has m={prior.grid.m}, expected {grid.m}")
        return prior
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
