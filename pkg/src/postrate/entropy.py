"""Covering numbers and Hausdorff alpha-entropy over finite atom sets.

Ball centres are restricted to the atoms of the prior. The true entropy
allows any integrable centre, so the values computed here are upper bounds
on it; every downstream check uses them in that conservative direction.

Ball membership is ``H(centre, f) <= delta``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from postrate.families import cover_to_partition
from postrate.priors import AtomicPrior

EXACT_COVER_MAX = 25
EXACT_PARTITION_MAX = 12
SLACK = 1e-10


@dataclass(frozen=True)
class CoveringReport:
    delta: float
    alpha: float
    blocks: tuple  # tuples of prior atom indices
    centers: tuple  # one prior atom index per block
    covering_number: int
    j_value: float
    method: str  # "exact" or "greedy"
    optimal: bool

    @property
    def atoms(self) -> frozenset:
        return frozenset(i for b in self.blocks for i in b)

    def to_dict(self, prior: AtomicPrior = None) -> dict:
        name = (lambda i: prior.labels[i]) if prior is not None else int
        return {
            "delta": self.delta,
            "alpha": self.alpha,
            "blocks": [[name(i) for i in b] for b in self.blocks],
            "centers": [name(c) for c in self.centers],
            "covering_number": self.covering_number,
            "j_value": self.j_value if math.isfinite(self.j_value) else str(self.j_value),
            "method": self.method,
            "optimal": self.optimal,
        }

    def to_json(self, prior: AtomicPrior = None) -> str:
        return json.dumps(self.to_dict(prior), sort_keys=True)


# --------------------------------------------------------------------------
# geometry: which centres cover which targets
# --------------------------------------------------------------------------

class _Balls:
    """Bitmask view of the delta-balls around every prior atom, restricted to targets."""

    def __init__(self, prior: AtomicPrior, targets, delta: float):
        if not delta > 0:
            raise ValueError(f"delta must be positive, got {delta}")
        self.delta = float(delta)
        self.targets = sorted(set(int(i) for i in targets))
        if self.targets and (self.targets[0] < 0 or self.targets[-1] >= len(prior)):
            raise IndexError("atom index outside the prior")
        self.mass = prior.weights[self.targets] if self.targets else np.zeros(0)
        roots = np.stack([a.sqrt for a in prior.atoms])
        m = prior.grid.m
        dist = np.empty((len(prior), len(self.targets)))
        for col, t in enumerate(self.targets):
            diff = roots - roots[t]
            dist[:, col] = np.sqrt(np.einsum("ij,ij->i", diff, diff) / m)
        dist[self.targets, range(len(self.targets))] = 0.0
        inside = dist <= delta
        masks = {}
        for c in range(len(prior)):
            bits = sum(1 << j for j in np.flatnonzero(inside[c]))
            if bits and bits not in masks:
                masks[bits] = c
        # keep only maximal balls; a dominated ball never helps a cover or a partition
        ordered = sorted(masks, key=lambda b: -bin(b).count("1"))
        maximal = []
        for b in ordered:
            if not any(b & ~big == 0 for big in maximal):
                maximal.append(b)
        self.masks = maximal
        self.center_of = masks
        self.full = (1 << len(self.targets)) - 1

    def center_for(self, block_bits: int) -> int:
        for b in self.masks:
            if block_bits & ~b == 0:
                return self.center_of[b]
        raise ValueError("block does not fit in any ball")

    def indices(self, bits: int) -> tuple:
        return tuple(self.targets[j] for j in range(len(self.targets)) if bits >> j & 1)


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _greedy_cover(balls: _Balls) -> list:
    chosen, uncovered = [], balls.full
    while uncovered:
        best = max(balls.masks, key=lambda b: _popcount(b & uncovered))
        chosen.append(best)
        uncovered &= ~best
    return chosen


def _exact_cover(balls: _Balls) -> list:
    """Minimum set cover by branch and bound, seeded with the greedy cover."""
    best = [_greedy_cover(balls)]
    n = len(balls.targets)
    containing = [[b for b in balls.masks if b >> e & 1] for e in range(n)]

    def search(uncovered: int, chosen: list):
        if not uncovered:
            if len(chosen) < len(best[0]):
                best[0] = list(chosen)
            return
        widest = max(_popcount(b & uncovered) for b in balls.masks)
        if len(chosen) + -(-_popcount(uncovered) // widest) >= len(best[0]):
            return
        # branch on the element with the fewest covering balls
        e = min((e for e in range(n) if uncovered >> e & 1), key=lambda e: len(containing[e]))
        for b in sorted(containing[e], key=lambda b: -_popcount(b & uncovered)):
            chosen.append(b)
            search(uncovered & ~b, chosen)
            chosen.pop()

    search(balls.full, [])
    return best[0]


def _report_from_cover(balls: _Balls, prior: AtomicPrior, cover: list, alpha: float,
                       method: str, optimal: bool) -> CoveringReport:
    part = cover_to_partition([set(balls.indices(b)) for b in cover])
    blocks, centers = [], []
    for ball, block in zip(cover, part.blocks):
        if block:
            blocks.append(tuple(sorted(block)))
            centers.append(balls.center_of[ball])
    return CoveringReport(
        delta=balls.delta, alpha=alpha, blocks=tuple(blocks), centers=tuple(centers),
        covering_number=len(cover), j_value=_j_of(blocks, prior, alpha), method=method,
        optimal=optimal,
    )


def _j_of(blocks, prior: AtomicPrior, alpha: float) -> float:
    if not blocks:
        return -math.inf
    return math.log(math.fsum(float(prior.weights[list(b)].sum()) ** alpha for b in blocks))


def _empty_report(delta: float, alpha: float) -> CoveringReport:
    return CoveringReport(delta, alpha, (), (), 0, -math.inf, "exact", True)


def _use_exact(method: str, n: int, limit: int) -> bool:
    if method == "auto":
        return n <= limit
    if method == "exact":
        return True
    if method == "greedy":
        return False
    raise ValueError(f"method must be auto, exact or greedy, got {method!r}")


def covering_number(atoms: Iterable[int], prior: AtomicPrior, delta: float,
                    method: str = "auto") -> CoveringReport:
    """Minimal number of delta-balls (atom centres) covering ``atoms``.

    Exact branch and bound up to 25 atoms, greedy above. The report's
    ``j_value`` is log N, the alpha = 0 entropy.
    """
    balls = _Balls(prior, atoms, delta)
    if not balls.targets:
        return _empty_report(float(delta), 0.0)
    exact = _use_exact(method, len(balls.targets), EXACT_COVER_MAX)
    cover = _exact_cover(balls) if exact else _greedy_cover(balls)
    return _report_from_cover(balls, prior, cover, 0.0, "exact" if exact else "greedy", exact)


# --------------------------------------------------------------------------
# Hausdorff alpha-entropy
# --------------------------------------------------------------------------

def _exact_partition(balls: _Balls, alpha: float):
    """Minimize sum(mass(B)^alpha) over partitions into feasible blocks.

    Dynamic programming over subsets: the block containing the lowest
    remaining atom is enumerated among feasible submasks.
    """
    n = len(balls.targets)
    size = 1 << n
    mass = np.zeros(size)
    for s in range(1, size):
        low = s & -s
        mass[s] = mass[s ^ low] + balls.mass[low.bit_length() - 1]
    feasible = bytearray(size)
    for b in balls.masks:
        sub = b
        while sub:
            feasible[sub] = 1
            sub = (sub - 1) & b
    cost = [0.0] * size
    choice = [0] * size
    powered = [0.0] + [float(mass[s]) ** alpha for s in range(1, size)]
    for s in range(1, size):
        low = s & -s
        rest = s ^ low
        best, arg = math.inf, 0
        sub = rest
        while True:
            blk = sub | low
            if feasible[blk]:
                c = powered[blk] + cost[s ^ blk]
                if c < best:
                    best, arg = c, blk
            if sub == 0:
                break
            sub = (sub - 1) & rest
        cost[s], choice[s] = best, arg
    blocks, s = [], balls.full
    while s:
        blocks.append(choice[s])
        s ^= choice[s]
    return blocks


def _anneal_partition(balls: _Balls, alpha: float, seed: int = 0, sweeps: int = 200):
    """Greedy cover turned partition, refined by single-atom moves under annealing."""
    n = len(balls.targets)
    part = cover_to_partition([{j for j in range(n) if b >> j & 1} for b in _greedy_cover(balls)])
    blocks = [sum(1 << j for j in blk) for blk in part.blocks if blk]
    weights = balls.mass

    def block_mass(bits):
        return float(sum(weights[j] for j in range(n) if bits >> j & 1))

    def fits(bits):
        return any(bits & ~b == 0 for b in balls.masks)

    def objective(bl):
        return math.fsum(block_mass(b) ** alpha for b in bl if b)

    rng = np.random.default_rng(seed)
    current = objective(blocks)
    best, best_blocks = current, list(blocks)
    temp0 = 0.05 * max(current, 1e-12)
    steps = sweeps * n
    for step in range(steps):
        temp = temp0 * (1.0 - step / steps) + 1e-15
        j = int(rng.integers(n))
        src = next(k for k, b in enumerate(blocks) if b >> j & 1)
        options = [k for k, b in enumerate(blocks) if k != src and fits(b | (1 << j))]
        if not options:
            continue
        dst = options[int(rng.integers(len(options)))]
        trial = list(blocks)
        trial[src] &= ~(1 << j)
        trial[dst] |= 1 << j
        value = objective(trial)
        if value <= current or rng.random() < math.exp(-(value - current) / temp):
            blocks = [b for b in trial if b]
            current = value
            if value < best - 1e-15:
                best, best_blocks = value, list(blocks)
    return best_blocks


def hausdorff_entropy(atoms: Iterable[int], prior: AtomicPrior, delta: float,
                      alpha: float, method: str = "auto") -> CoveringReport:
    """log of the minimal sum of prior-mass^alpha over delta-partitions of ``atoms``.

    Exact up to 12 atoms; above that a greedy partition refined by
    annealing, which can only overstate J (``optimal`` is then False).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    balls = _Balls(prior, atoms, delta)
    if not balls.targets:
        return _empty_report(float(delta), float(alpha))
    exact = _use_exact(method, len(balls.targets), EXACT_PARTITION_MAX)
    bits = _exact_partition(balls, alpha) if exact else _anneal_partition(balls, alpha)
    blocks = [balls.indices(b) for b in bits]
    centers = [balls.center_for(b) for b in bits]
    n_cover = covering_number(balls.targets, prior, delta).covering_number
    return CoveringReport(
        delta=float(delta), alpha=float(alpha), blocks=tuple(blocks), centers=tuple(centers),
        covering_number=n_cover, j_value=_j_of(blocks, prior, alpha),
        method="exact" if exact else "greedy", optimal=exact,
    )


def sandwich_audit(report: CoveringReport, prior: AtomicPrior, atoms: Iterable[int]) -> bool:
    """Check Pi(G)^alpha <= e^J <= Pi(G)^alpha N^(1-alpha) on an exact report."""
    if report.method != "exact":
        raise ValueError("only exact entropy reports satisfy the sandwich; refusing greedy input")
    atoms = sorted(set(atoms))
    if set(atoms) != set(report.atoms):
        raise ValueError("report does not cover the audited atom set")
    if not atoms:
        return True
    n_cover = covering_number(atoms, prior, report.delta)
    if not n_cover.optimal:
        raise ValueError("covering number is not exact for this atom set")
    a = report.alpha
    mass = float(prior.weights[atoms].sum())
    e_j = math.exp(report.j_value)
    return bool(mass ** a <= e_j + SLACK and e_j <= mass ** a * n_cover.covering_number ** (1 - a) + SLACK)


def subadditivity_check(prior: AtomicPrior, g1, g2, delta: float, alpha: float) -> bool:
    """e^J(g1 u g2) <= e^J(g1) + e^J(g2), and J grows with the set."""
    g1, g2 = set(g1), set(g2)
    union = g1 | g2
    if len(union) > EXACT_PARTITION_MAX:
        raise ValueError(f"union has {len(union)} atoms; exact entropy is limited to {EXACT_PARTITION_MAX}")
    e = {k: math.exp(hausdorff_entropy(g, prior, delta, alpha).j_value)
         for k, g in (("1", g1), ("2", g2), ("u", union))}
    return bool(e["u"] <= e["1"] + e["2"] + SLACK
                and e["1"] <= e["u"] + SLACK and e["2"] <= e["u"] + SLACK)
