
import numpy as np
import pytest

from oracles import simplex_points
from postrate.divergences import hstar
from postrate.families import BernsteinSpec, SmoothFamilySpec, bernstein_density
from postrate.grid import make_grid, normalize, uniform
from postrate.priors import (
    AtomicPrior,
    SieveSpec,
    bernstein_prior,
    box_lattice_prior,
    prior_mass,
    sieve_mixture,
    simplex_lattice,
    simplex_lattice_size,
    tail_exponent,
    uniform_atoms,
    weighted_atoms,
)


@pytest.fixture
def three(grid):
    x = grid.nodes
    return [uniform(grid), normalize(1 + x, grid), normalize(np.exp(3 * x), grid)]


class TestUniformAtoms:
    def test_single(self, grid):
        assert uniform_atoms([uniform(grid)]).weights.tolist() == [1.0]

    def test_four(self, three):
        p = uniform_atoms(three + three[:1])
        assert p.weights.tolist() == [0.25] * 4

    def test_duplicates_kept(self, grid):
        assert len(uniform_atoms([uniform(grid)] * 3)) == 3

    def test_validation(self, grid):
        with pytest.raises(ValueError):
            uniform_atoms([])
        with pytest.raises(ValueError):
            AtomicPrior((uniform(grid),), [0.5])
        with pytest.raises(ValueError):
            weighted_atoms([uniform(grid)] * 2, [1, 0])
        with pytest.raises(ValueError, match="mismatch"):
            uniform_atoms([uniform(grid), uniform(make_grid(8))])


class TestPriorMass:
    def test_trivial(self, three):
        p = uniform_atoms(three)
        assert prior_mass(p, lambda f: True) == pytest.approx(1.0)
        assert prior_mass(p, lambda f: False) == 0.0

    def test_w_ball(self, three):
        p = weighted_atoms(three, [0.5, 0.3, 0.2])
        f0 = three[0]
        hs = [hstar(f0, a) for a in three]
        # hand ordering: uniform < 1+x < e^{3x}
        assert hs[0] == 0 < hs[1] < hs[2]
        eps = (hs[1] + hs[2]) / 2
        assert prior_mass(p, lambda f: hstar(f0, f) <= eps) == pytest.approx(0.8)
        assert prior_mass(p, lambda f: hstar(f0, f) <= hs[1] / 2) == pytest.approx(0.5)


class TestSieve:
    def test_one_level(self, three):
        p = sieve_mixture(SieveSpec([three], [1.0]), 1)
        np.testing.assert_allclose(p.weights, uniform_atoms(three).weights)
        assert p.tail_mass == 0.0

    def test_two_levels(self, three):
        p = sieve_mixture(SieveSpec([three[:1], three[1:]], [0.5, 0.5]), 2)
        np.testing.assert_allclose(p.weights, [0.5, 0.25, 0.25])
        assert p.labels[1] == "level=2,atom=0"

    def test_geometric_tail(self, grid):
        spec = SieveSpec(lambda j: [uniform(grid)], lambda j: 2.0 ** -j)
        p = sieve_mixture(spec, 10)
        assert len(p) == 10
        assert p.tail_mass == pytest.approx(2.0 ** -10, rel=1e-12)
        assert p.weights.sum() == pytest.approx(1.0)

    def test_finite_truncation_tail(self, three):
        p = sieve_mixture(SieveSpec([three[:1], three[1:]], [0.75, 0.25]), 1)
        assert p.tail_mass == 0.25
        assert p.weights.tolist() == [1.0]


class TestLattice:
    @pytest.mark.parametrize("k,cells", [(1, 3), (2, 3), (3, 4), (4, 2), (5, 3)])
    def test_matches_oracle(self, k, cells):
        ours = sorted(simplex_lattice(k, cells))
        ref = sorted(simplex_points(k, cells))
        assert len(ours) == simplex_lattice_size(k, cells) == len(ref)
        np.testing.assert_allclose(ours, ref, atol=1e-15)


class TestBernsteinPrior:
    def test_kmax_one(self, grid):
        p = bernstein_prior([1.0], 1, 3, grid)
        assert len(p) == 1 and p.weights.tolist() == [1.0]
        np.testing.assert_allclose(p.atoms[0].values, 1.0, atol=1e-14)

    def test_hand_count(self, grid):
        p = bernstein_prior([1, 1], 2, 3, grid)
        assert len(p) == 4
        order = [lab.split(",")[0] for lab in p.labels]
        assert order == ["k=1", "k=2", "k=2", "k=2"]
        np.testing.assert_allclose(p.weights, [0.5, 1 / 6, 1 / 6, 1 / 6])
        # order-2 atoms are the lattice weights (0,1), (1/2,1/2), (1,0)
        expected = [bernstein_density(BernsteinSpec(2, w), grid) for w in [(0, 1), (0.5, 0.5), (1, 0)]]
        for got, want in zip(p.atoms[1:], expected):
            np.testing.assert_allclose(got.values, want.values, atol=1e-14)

    def test_c0_max(self, grid):
        p = bernstein_prior(lambda j: j ** (-j), 5, 2, grid)
        assert p.meta["c0_max"] == pytest.approx(1.0, abs=1e-12)
        assert tail_exponent(lambda j: j ** (-2.0 * j), 6) == pytest.approx(2.0)

    def test_tail_mass(self, grid):
        p = bernstein_prior([0.5, 0.25, 0.125, 0.125], 2, 2, grid)
        assert p.tail_mass == pytest.approx(0.25)

    def test_cap(self, grid):
        with pytest.raises(ValueError, match="cap"):
            bernstein_prior([1] * 8, 8, 10, grid, atom_cap=100)


class TestBoxLattice:
    def test_lattice(self, grid):
        spec = SmoothFamilySpec(1, [[-1, 1]], ["x"])
        p = box_lattice_prior(spec, 5, grid)
        assert len(p) == 5
        assert p.meta["thetas"] == [[-1.0], [-0.5], [0.0], [0.5], [1.0]]
        np.testing.assert_allclose(p.atoms[2].values, 1.0)
