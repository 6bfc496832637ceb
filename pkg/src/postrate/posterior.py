"""Exact Bayesian updating over atomic priors, in log space."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from postrate.grid import Grid, GridDensity, normalize, same_grid
from postrate.priors import AtomicPrior


@dataclass(frozen=True, eq=False)
class Sample:
    """i.i.d. observations in [0, 1] together with their grid cells.

    Likelihoods are evaluated at the cell midpoint, which is how the grid
    model discretizes ``f(X_i)``.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "cells", self.grid.cell_index(v))

    def __len__(self):
        return self.values.size

    @cached_property
    def counts(self) -> np.ndarray:
        return np.bincount(self.cells, minlength=self.grid.m)

    def head(self, n: int) -> "Sample":
        return Sample(self.grid, self.values[:n])


def sample_iid(f0: GridDensity, n: int, seed: int) -> Sample:
    """Inverse-cdf draws: a cell by its mass, then a uniform point inside it."""
    if n < 0:
        raise ValueError("sample size must be nonnegative")
    grid = f0.grid
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(f0.values)
    cdf /= cdf[-1]
    cells = np.searchsorted(cdf, rng.random(n), side="right")
    cells = np.minimum(cells, grid.m - 1)
    x = (cells + rng.random(n)) / grid.m
    return Sample(grid, np.clip(x, 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class PosteriorState:
    """Prior plus per-atom log-likelihood after ``n`` observations.

    ``counts`` is the histogram of observed cells, kept so the likelihood of
    any other density (e.g. the truth) can be evaluated on the same data.
    """

    prior: AtomicPrior
    loglik: np.ndarray
    n: int
    counts: np.ndarray

    @classmethod
    def initial(cls, prior: AtomicPrior) -> "PosteriorState":
        return cls(prior, np.zeros(len(prior)), 0, np.zeros(prior.grid.m, dtype=np.int64))

    @cached_property
    def log_weights(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            a = self.prior.log_weights + self.loglik
        return a - logsumexp(a)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights)
        return w / w.sum()


def _loglik_increment(prior: AtomicPrior, counts: np.ndarray) -> np.ndarray:
    seen = np.flatnonzero(counts)
    # -inf survives here: an atom vanishing at an observed node gets weight 0
    return (prior.log_values[:, seen] * counts[seen]).sum(axis=1)


def update(state: PosteriorState, sample: Sample) -> PosteriorState:
    if sample.grid != state.prior.grid:
        raise ValueError(f"sample grid m={sample.grid.m} differs from prior grid m={state.prior.grid.m}")
    inc = _loglik_increment(state.prior, sample.counts)
    loglik = state.loglik + inc
    if np.all(np.isneginf(loglik)):
        raise ValueError("every atom vanishes at some observation; posterior undefined")
    return PosteriorState(state.prior, loglik, state.n + len(sample), state.counts + sample.counts)


def posterior(prior: AtomicPrior, sample: Sample) -> PosteriorState:
    return update(PosteriorState.initial(prior), sample)


def posterior_mass(state: PosteriorState, predicate: Callable[[GridDensity], bool]) -> float:
    mask = np.fromiter((bool(predicate(a)) for a in state.prior.atoms), bool, len(state.prior))
    return float(state.weights[mask].sum())


def marginal_likelihood_ratio(state: PosteriorState, f0: GridDensity) -> float:
    """log of the prior integral of R_n(f) = prod f(X_i) / f0(X_i)."""
    same_grid(state.prior.atoms[0], f0)
    seen = np.flatnonzero(state.counts)
    if np.any(f0.values[seen] == 0):
        raise ValueError("f0 vanishes at an observed node")
    log_f0 = float(np.dot(state.counts[seen], np.log(f0.values[seen])))
    with np.errstate(invalid="ignore"):
        a = state.prior.log_weights + state.loglik
    return float(logsumexp(a)) - log_f0


def predictive_density(state: PosteriorState, block) -> GridDensity:
    """Posterior mixture of the atoms in ``block``, renormalized on the block."""
    idx = np.array(sorted(block), dtype=np.int64)
    if idx.size == 0:
        raise ValueError("block is empty")
    with np.errstate(invalid="ignore"):
        a = state.prior.log_weights[idx] + state.loglik[idx]
    if np.all(np.isneginf(a)):
        raise ValueError("block carries zero posterior mass")
    w = np.exp(a - logsumexp(a))
    mix = w @ state.prior.values[idx]
    floor = min(state.prior.atoms[i].floor for i in idx)
    return normalize(mix, state.prior.grid, floor, label="predictive")


def log_marginal_ratios(prior: AtomicPrior, f0: GridDensity, counts: np.ndarray) -> np.ndarray:
    """Batched log marginal likelihood ratios for rows of a (reps, m) count matrix."""
    counts = np.asarray(counts)
    if np.any((counts > 0) & (f0.values[None, :] == 0)):
        raise ValueError("f0 vanishes at an observed node")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = prior.log_values - np.log(f0.values)[None, :]
    log_ratio = np.where(np.isnan(log_ratio), 0.0, log_ratio)
    if np.isneginf(log_ratio).any():
        # fall back to exact per-row handling of zero atoms
        out = np.empty(counts.shape[0])
        for r, c in enumerate(counts):
            seen = np.flatnonzero(c)
            with np.errstate(invalid="ignore"):
                ll = (log_ratio[:, seen] * c[seen]).sum(axis=1)
            out[r] = logsumexp(prior.log_weights + ll)
        return out
    ll = counts @ log_ratio.T
    return logsumexp(prior.log_weights[None, :] + ll, axis=1)
