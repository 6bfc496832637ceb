import sys
from pathlib import Path

import numpy as np
import pytest

from postrate.grid import make_grid, normalize

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def grid():
    return make_grid(1024)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_density(rng, grid, floor=0.0, positive=True):
    """Smooth-ish random density: exp of a random low-frequency series."""
    x = grid.nodes
    coef = rng.normal(size=6)
    log_v = sum(c * np.cos(np.pi * (j + 1) * x) for j, c in enumerate(coef[:3]))
    log_v = log_v + sum(c * np.sin(np.pi * (j + 1) * x) for j, c in enumerate(coef[3:]))
    v = np.exp(log_v)
    if not positive:
        v[rng.random(grid.m) < 0.1] = 0.0
    return normalize(v, grid, floor)


def random_pairs(rng, grid, count):
    return [(random_density(rng, grid), random_density(rng, grid)) for _ in range(count)]


@pytest.fixture
def make_density(rng, grid):
    return lambda **kw: random_density(rng, grid, **kw)


def random_instance(rng, k, m=64):
    """(prior, delta) with k clustered atoms and delta at a distance quantile."""
    from postrate.divergences import hellinger_matrix
    from postrate.grid import make_grid
    from postrate.priors import weighted_atoms

    g = make_grid(m)
    x = g.nodes
    centres = rng.normal(size=(rng.integers(1, 4), 3))
    atoms = []
    for _ in range(k):
        c = centres[rng.integers(len(centres))] + rng.normal(scale=0.4, size=3)
        atoms.append(normalize(np.exp(c[0] * x + c[1] * np.cos(np.pi * x) + c[2] * x * x), g))
    prior = weighted_atoms(atoms, rng.uniform(0.2, 1.0, size=k))
    d = hellinger_matrix(atoms)
    upper = d[np.triu_indices(k, 1)]
    delta = float(np.quantile(upper, rng.uniform(0.1, 0.6))) if upper.size else 0.1
    return prior, max(delta, 1e-3)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
