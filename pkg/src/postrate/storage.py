"""Files: density CSVs, prior directories, posterior snapshots, JSONL records.

Data files carry no timestamps, host names or absolute paths, so equal
inputs give byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from postrate.grid import GridDensity, make_grid, normalize
from postrate.posterior import PosteriorState
from postrate.priors import AtomicPrior


def _fmt(x: float) -> str:
    return repr(float(x))


def write_density_csv(density: GridDensity, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "value"])
        for x, v in zip(density.grid.nodes, density.values):
            w.writerow([_fmt(x), _fmt(v)])


def read_density_csv(path, floor: float = 0.0) -> GridDensity:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["node", "value"]:
        raise ValueError(f"{path}: expected header 'node,value'")
    values = [float(r[1]) for r in rows[1:]]
    grid = make_grid(len(values))
    nodes = np.array([float(r[0]) for r in rows[1:]])
    if not np.allclose(nodes, grid.nodes, atol=1e-12):
        raise ValueError(f"{path}: nodes are not the midpoints of a uniform grid")
    return normalize(values, grid, floor)


def save_prior(prior: AtomicPrior, directory, packed: bool = False) -> None:
    """``prior.json`` plus one CSV per atom, or a single ``atoms.csv`` when packed."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = {
        "m": prior.grid.m,
        "weights": [float(w) for w in prior.weights],
        "labels": list(prior.labels),
        "floors": [a.floor for a in prior.atoms],
        "tail_mass": prior.tail_mass,
        "packed": packed,
    }
    if packed:
        with open(directory / "atoms.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node"] + list(prior.labels))
            for i, x in enumerate(prior.grid.nodes):
                w.writerow([_fmt(x)] + [_fmt(v) for v in prior.values[:, i]])
    else:
        header["files"] = []
        for i, atom in enumerate(prior.atoms):
            name = f"atom_{i:06d}.csv"
            write_density_csv(atom, directory / name)
            header["files"].append(name)
    (directory / "prior.json").write_text(json.dumps(header, indent=1, sort_keys=True) + "\n")


def load_prior(directory) -> AtomicPrior:
    directory = Path(directory)
    header = json.loads((directory / "prior.json").read_text())
    grid = make_grid(int(header["m"]))
    floors = header.get("floors") or [0.0] * len(header["weights"])
    if header.get("packed"):
        with open(directory / "atoms.csv", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        cols = np.array([[float(v) for v in r[1:]] for r in rows]).T
        atoms = [normalize(c, grid, fl) for c, fl in zip(cols, floors)]
    else:
        atoms = [read_density_csv(directory / f, fl) for f, fl in zip(header["files"], floors)]
    atoms = [a.with_label(lbl) for a, lbl in zip(atoms, header["labels"])]
    w = np.asarray(header["weights"], dtype=float)
    return AtomicPrior(tuple(atoms), w / w.sum(), tuple(header["labels"]),
                       tail_mass=float(header.get("tail_mass", 0.0)))


def save_posterior(state: PosteriorState, path, header: dict = None) -> None:
    """CSV ``atom_label,log_weight`` and a JSON sidecar with n and seed lineage."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["atom_label", "log_weight"])
        for label, lw in zip(state.prior.labels, state.log_weights):
            w.writerow([label, _fmt(lw)])
    meta = {"n": state.n, "atoms": len(state.prior)}
    meta.update(header or {})
    path.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True) + "\n")


def read_posterior(path):
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["atom_label", "log_weight"]:
        raise ValueError(f"{path}: expected header 'atom_label,log_weight'")
    header = json.loads(path.with_suffix(".json").read_text())
    return header, [(r[0], float(r[1])) for r in rows[1:]]


def jsonable(x):
    """Replace non-finite floats by strings so the output stays strict JSON."""
    if isinstance(x, dict):
        return {k: jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps_line(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))
