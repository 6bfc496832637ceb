"""Concrete density families and the covering constructions built on them.

* Bernstein densities: mixtures of beta(j, k - j + 1) kernels.
* Log-spline exponential families of order 1 (histograms) and 2 (hat
  functions) on uniform knots.
* Smooth finite-dimensional exponential families with named features.
* The sup-norm-to-H* covering lift and the covering-to-partition recipe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np
from scipy.special import gammaln

from postrate.divergences import hellinger, hstar
from postrate.grid import Grid, GridDensity, normalize


# --------------------------------------------------------------------------
# Bernstein densities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BernsteinSpec:
    """Order ``k`` and the increments ``F(j/k) - F((j-1)/k)`` of the mixing cdf."""

    k: int
    weights: tuple

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"Bernstein order must be >= 1, got {self.k}")
        w = tuple(float(x) for x in self.weights)
        if len(w) != self.k:
            raise ValueError(f"order {self.k} needs {self.k} weights, got {len(w)}")
        if any(x < 0 for x in w) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError("Bernstein weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_cdf(cls, cdf: Callable[[float], float], k: int) -> "BernsteinSpec":
        edges = [cdf(j / k) for j in range(k + 1)]
        return cls(k, tuple(b - a for a, b in zip(edges[:-1], edges[1:])))

    def to_dict(self) -> dict:
        return {"kind": "bernstein", "k": self.k, "weights": list(self.weights)}


def log_beta_pdf(x: np.ndarray, a: float, b: float) -> np.ndarray:
    """log of the beta(a, b) density, via log-gamma so large orders stay finite."""
    with np.errstate(divide="ignore"):
        return (gammaln(a + b) - gammaln(a) - gammaln(b)
                + (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x))


def bernstein_kernels(k: int, grid: Grid) -> np.ndarray:
    """Rows j = 1..k hold beta(x; j, k - j + 1) at the nodes."""
    x = grid.nodes
    return np.stack([np.exp(log_beta_pdf(x, j, k - j + 1)) for j in range(1, k + 1)])


def bernstein_density(spec: BernsteinSpec, grid: Grid, floor: float = 0.0) -> GridDensity:
    vals = np.asarray(spec.weights) @ bernstein_kernels(spec.k, grid)
    return normalize(vals, grid, floor, label=f"bernstein k={spec.k}")


# --------------------------------------------------------------------------
# Log-spline exponential family, orders 1 and 2
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SplineExpSpec:
    """``f(x) = exp(sum_j theta_j B_j(x) - c(theta))`` with sum(theta) = 0."""

    q: int
    K: int
    theta: tuple
    M: float = math.inf

    def __post_init__(self):
        if self.q not in (1, 2):
            raise ValueError(f"only spline orders 1 and 2 are supported, got q={self.q}")
        if self.K < 1:
            raise ValueError("need at least one knot cell")
        th = tuple(float(t) for t in self.theta)
        if len(th) != self.dim:
            raise ValueError(f"order {self.q} with {self.K} cells needs {self.dim} coefficients")
        if abs(math.fsum(th)) > 1e-12:
            raise ValueError("spline coefficients must sum to zero")
        if any(abs(t) > self.M for t in th):
            raise ValueError(f"coefficient outside the box [-{self.M}, {self.M}]")
        object.__setattr__(self, "theta", th)

    @property
    def dim(self) -> int:
        return self.q + self.K - 1

    def to_dict(self) -> dict:
        d = {"kind": "spline_exp", "q": self.q, "K": self.K, "theta": list(self.theta)}
        if math.isfinite(self.M):
            d["M"] = self.M
        return d


def project_theta(theta) -> np.ndarray:
    """Orthogonal projection onto the sum-zero hyperplane."""
    theta = np.asarray(theta, dtype=float)
    return theta - theta.mean()


def spline_basis(q: int, K: int, grid: Grid) -> np.ndarray:
    """B-spline basis on uniform knots as a (q + K - 1, m) array.

    Order 1 gives cell indicators on [(k-1)/K, k/K); order 2 gives hat
    functions peaking at the knots j/K, j = 0..K. Both sum to one pointwise.
    """
    x = grid.nodes
    if q == 1:
        cell = np.minimum((x * K).astype(np.int64), K - 1)
        return (cell[None, :] == np.arange(K)[:, None]).astype(float)
    if q == 2:
        knots = np.arange(K + 1) / K
        return np.clip(1.0 - np.abs(x[None, :] - knots[:, None]) * K, 0.0, None)
    raise ValueError(f"only spline orders 1 and 2 are supported, got q={q}")


def spline_exp_density(spec: SplineExpSpec, grid: Grid, floor: float = 0.0) -> GridDensity:
    s = np.asarray(spec.theta) @ spline_basis(spec.q, spec.K, grid)
    # c(theta) is absorbed by normalize; shifting by the max only guards overflow
    return normalize(np.exp(s - s.max()), grid, floor, label=f"spline q={spec.q} K={spec.K}")


def log_sup_constant(q: int, K: int, grid: Grid, samples: int = 2000, seed: int = 0) -> float:
    """Empirical d with d * ||theta||_inf <= ||log f_theta||_inf on sum-zero theta."""
    rng = np.random.default_rng(seed)
    basis = spline_basis(q, K, grid)
    best = math.inf
    for _ in range(samples):
        th = project_theta(rng.normal(size=q + K - 1))
        s = th @ basis
        logf = s - np.log(np.mean(np.exp(s)))
        best = min(best, np.max(np.abs(logf)) / np.max(np.abs(th)))
    return float(best)


# --------------------------------------------------------------------------
# Smooth finite-dimensional family
# --------------------------------------------------------------------------

def _feature(name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Named bounded feature maps; ``power:p`` is x^p centred on [0, 1]."""
    kind, _, arg = name.partition(":")
    if kind == "x":
        return lambda x: x - 0.5
    if kind == "power":
        p = float(arg)
        return lambda x: x ** p - 1.0 / (p + 1.0)
    if kind == "cos":
        k = float(arg)
        return lambda x: np.cos(2 * np.pi * k * x)
    if kind == "sin":
        k = float(arg)
        return lambda x: np.sin(2 * np.pi * k * x)
    raise ValueError(f"unknown feature {name!r} (known: x, power:p, cos:k, sin:k)")


FeatureMap = Union[str, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class SmoothFamilySpec:
    """Exponential family ``exp(sum_i theta_i phi_i(x))`` over a parameter box."""

    d: int
    theta_box: tuple
    features: tuple
    beta: float = 1.0

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.theta_box)
        if len(box) != self.d or len(self.features) != self.d:
            raise ValueError(f"need {self.d} box intervals and {self.d} features")
        if any(not (lo < hi) or not (math.isfinite(lo) and math.isfinite(hi)) for lo, hi in box):
            raise ValueError("parameter box must be compact with nonempty interior")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        object.__setattr__(self, "theta_box", box)
        object.__setattr__(self, "features", tuple(self.features))

    def feature_matrix(self, grid: Grid) -> np.ndarray:
        rows = []
        for feat in self.features:
            fn = _feature(feat) if isinstance(feat, str) else feat
            rows.append(np.broadcast_to(np.asarray(fn(grid.nodes), dtype=float), (grid.m,)))
        return np.stack(rows)

    def in_box(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        lo, hi = np.array(self.theta_box).T
        return theta.shape == (self.d,) and bool(np.all((theta >= lo) & (theta <= hi)))

    def to_dict(self) -> dict:
        if not all(isinstance(f, str) for f in self.features):
            raise ValueError("only named features can be serialized")
        return {"d": self.d, "theta_box": [list(b) for b in self.theta_box],
                "features": list(self.features), "beta": self.beta}


def smooth_family_density(spec: SmoothFamilySpec, theta, grid: Grid,
                          floor: float = 0.0) -> GridDensity:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if not spec.in_box(theta):
        raise ValueError(f"theta={theta.tolist()} lies outside the parameter box {spec.theta_box}")
    s = theta @ spec.feature_matrix(grid)
    label = "theta=(" + ",".join(f"{t:.6g}" for t in theta) + ")"
    return normalize(np.exp(s - s.max()), grid, floor, label=label)


def measure_metric_equivalence(spec: SmoothFamilySpec, grid: Grid, samples: int = 1000,
                               seed: int = 0) -> tuple:
    """Empirical constants ``(a1, a2)`` of the metric equivalence

        a1 |t1 - t2|^beta <= H <= sqrt(3) H* <= a2 |t1 - t2|^beta

    a1 is the smallest ratio H/|dt|^beta and a2 the largest ratio
    sqrt(3) H*/|dt|^beta over uniform random pairs in the box, plus pairs
    along the least-informative direction of the feature covariance (where
    a degenerate family has H = 0).
    """
    if samples < 100:
        raise ValueError("need at least 100 sampled pairs")
    rng = np.random.default_rng(seed)
    lo, hi = np.array(spec.theta_box).T
    pairs = [(rng.uniform(lo, hi), rng.uniform(lo, hi)) for _ in range(samples)]

    feats = spec.feature_matrix(grid)
    centre = (lo + hi) / 2
    f_c = smooth_family_density(spec, centre, grid)
    cov = np.cov(feats, aweights=f_c.values, bias=True).reshape(spec.d, spec.d)
    direction = np.linalg.eigh(cov)[1][:, 0]
    half = 0.25 * np.min(hi - lo)
    for scale in (0.1, 0.5, 1.0):
        pairs.append((centre - scale * half * direction, centre + scale * half * direction))

    a1, a2 = math.inf, 0.0
    for t1, t2 in pairs:
        dist = float(np.linalg.norm(t1 - t2))
        if dist == 0.0:
            continue
        f1 = smooth_family_density(spec, t1, grid)
        f2 = smooth_family_density(spec, t2, grid)
        scale = dist ** spec.beta
        a1 = min(a1, hellinger(f1, f2) / scale)
        a2 = max(a2, math.sqrt(3.0) * hstar(f1, f2) / scale)
    if a1 < 1e-9:
        raise ValueError(f"degenerate family: H/|dtheta|^beta drops to {a1:.3g}")
    return a1, a2


# --------------------------------------------------------------------------
# Covering constructions
# --------------------------------------------------------------------------

def lift_sup_cover(gs: Sequence, eps: float, grid: Grid, floor: float = 0.0) -> list:
    """Turn sup-norm root-covering centres ``g_j`` into H* centres ``f_j``.

    ``f_j = (sqrt g_j + eps)^2 / integral``. Any density ``f`` with
    ``max |sqrt f - sqrt g_j| <= eps`` then has ``H*(f, f_j) <= 8 eps``.
    """
    if len(gs) == 0:
        raise ValueError("need at least one covering centre")
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    out = []
    for j, g in enumerate(gs):
        g = np.asarray(g.values if isinstance(g, GridDensity) else g, dtype=float)
        if g.shape != (grid.m,) or np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError(f"centre {j} must be a finite nonnegative nodal vector")
        out.append(normalize((np.sqrt(g) + eps) ** 2, grid, floor, label=f"lift {j}"))
    return out


class Partition(NamedTuple):
    blocks: list
    empty: tuple  # indices of blocks left empty by the recipe


def cover_to_partition(cover: Sequence, universe=None) -> Partition:
    """P_1 = O_1, P_i = O_i minus everything already assigned, all within the universe."""
    cover = [frozenset(o) for o in cover]
    union = frozenset().union(*cover) if cover else frozenset()
    universe = union if universe is None else frozenset(universe)
    missing = universe - union
    if missing:
        raise ValueError(f"cover misses elements {sorted(missing)}")
    taken: set = set()
    blocks = []
    for o in cover:
        p = (o - taken) & universe
        taken |= p
        blocks.append(p)
    return Partition(blocks, tuple(i for i, b in enumerate(blocks) if not b))
