"""Hellinger, modified Hellinger, Kullback-Leibler and V divergences on a grid.

All functionals are midpoint-rule integrals. ``sup_ratio`` is the nodal
maximum of ``f0/f``; on the discretized model that *is* the essential
supremum, which keeps the ratio well defined even where the continuous
ratio is unbounded on a null set.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from postrate.grid import GridDensity, same_grid


@dataclass(frozen=True)
class DivergenceReport:
    hellinger: float
    hstar: float
    kl: float
    v: float
    sup_ratio: float
    clamped: bool

    def to_json(self) -> str:
        # inf is not valid JSON; spell it out
        d = {k: (str(v) if isinstance(v, float) and math.isinf(v) else v)
             for k, v in asdict(self).items()}
        return json.dumps(d, sort_keys=True)


def hellinger(f: GridDensity, g: GridDensity) -> float:
    """Hellinger distance, the L2 distance between root densities (<= sqrt 2)."""
    grid = same_grid(f, g)
    d = f.sqrt - g.sqrt
    return math.sqrt(float(np.dot(d, d)) / grid.m)


def _hstar_terms(f0: GridDensity, f: GridDensity) -> np.ndarray:
    # (sqrt f0 - sqrt f)^2 * (2/3 sqrt(f0/f) + 1/3); 0/0 nodes contribute 0
    d2 = (f0.sqrt - f.sqrt) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        root_ratio = f0.sqrt / f.sqrt
        terms = d2 * (2.0 / 3.0 * root_ratio + 1.0 / 3.0)
    both_zero = (f0.values == 0) & (f.values == 0)
    terms[both_zero] = 0.0
    return terms


def hstar(f0: GridDensity, f: GridDensity) -> float:
    """Modified Hellinger distance H*(f0, f); not symmetric.

    The squared root difference is weighted by ``2/3 sqrt(f0/f) + 1/3``, which
    is what makes ``E_f0 sqrt(f0/f) = 1 + 1.5 H*^2`` hold exactly.
    """
    grid = same_grid(f0, f)
    zero = np.flatnonzero(f.values == 0)
    if zero.size:
        i = int(zero[0])
        raise ValueError(
            f"hstar needs f > 0 everywhere; f vanishes at node {i} (x={grid.nodes[i]:.6g})"
        )
    return math.sqrt(float(_hstar_terms(f0, f).sum()) / grid.m)


def hstar_or_inf(f0: GridDensity, f: GridDensity) -> float:
    """Like :func:`hstar` but returns inf instead of raising on zeros of f."""
    grid = same_grid(f0, f)
    return math.sqrt(float(_hstar_terms(f0, f).sum()) / grid.m)


def kl(f0: GridDensity, f: GridDensity) -> float:
    """Kullback-Leibler divergence K(f0, f); +inf when f0 charges a zero of f."""
    grid = same_grid(f0, f)
    p, q = f0.values, f.values
    support = p > 0
    if np.any(support & (q == 0)):
        return math.inf
    terms = p[support] * (np.log(p[support]) - np.log(q[support]))
    return float(terms.sum()) / grid.m


def v_divergence(f0: GridDensity, f: GridDensity) -> float:
    """Second moment of log(f0/f) under f0."""
    grid = same_grid(f0, f)
    p, q = f0.values, f.values
    support = p > 0
    if np.any(support & (q == 0)):
        return math.inf
    lr = np.log(p[support]) - np.log(q[support])
    return float((p[support] * lr * lr).sum()) / grid.m


def sup_ratio(f0: GridDensity, f: GridDensity) -> float:
    same_grid(f0, f)
    p, q = f0.values, f.values
    if np.any((p > 0) & (q == 0)):
        return math.inf
    support = q > 0
    return float(np.max(p[support] / q[support]))


def divergence_report(f0: GridDensity, f: GridDensity) -> DivergenceReport:
    return DivergenceReport(
        hellinger=hellinger(f0, f),
        hstar=hstar(f0, f),
        kl=kl(f0, f),
        v=v_divergence(f0, f),
        sup_ratio=sup_ratio(f0, f),
        clamped=bool(
            (f0.floor > 0 and np.any(f0.values == f0.floor))
            or (f.floor > 0 and np.any(f.values == f.floor))
        ),
    )


def hellinger_matrix(densities) -> np.ndarray:
    """Pairwise Hellinger distances between densities on one grid.

    Row differences are formed explicitly rather than through a Gram matrix;
    the Gram route loses ~1e-8 to cancellation near the diagonal, which is
    enough to flip ball-membership decisions.
    """
    densities = list(densities)
    if not densities:
        return np.zeros((0, 0))
    grid = same_grid(*densities)
    roots = np.stack([d.sqrt for d in densities])
    k = len(densities)
    out = np.zeros((k, k))
    for i in range(k - 1):
        diff = roots[i + 1:] - roots[i]
        out[i, i + 1:] = np.sqrt(np.einsum("ij,ij->i", diff, diff) / grid.m)
    return out + out.T
