import math

import numpy as np
import pytest

from conftest import random_density
from postrate.divergences import hellinger, hstar
from postrate.families import (
    BernsteinSpec,
    Partition,
    SmoothFamilySpec,
    SplineExpSpec,
    bernstein_density,
    bernstein_kernels,
    cover_to_partition,
    lift_sup_cover,
    log_sup_constant,
    measure_metric_equivalence,
    project_theta,
    smooth_family_density,
    spline_basis,
    spline_exp_density,
)
from postrate.grid import make_grid


@pytest.fixture(scope="module")
def line_family():
    return SmoothFamilySpec(1, [[-1, 1]], ["x"])


class TestBernstein:
    def test_order_one_is_uniform(self, grid):
        d = bernstein_density(BernsteinSpec(1, [1.0]), grid)
        np.testing.assert_allclose(d.values, 1.0, atol=1e-14)

    @pytest.mark.parametrize("k", [1, 2, 5, 17, 50])
    def test_uniform_weights_collapse(self, grid, k):
        d = bernstein_density(BernsteinSpec(k, [1 / k] * k), grid)
        assert np.max(np.abs(d.values - 1.0)) <= 1e-10

    def test_hand_value(self):
        # m=3 puts a node at x = 0.5; 0.3 * 2(1-x) + 0.7 * 2x = 1 there
        g = make_grid(3)
        raw = np.array([0.3, 0.7]) @ bernstein_kernels(2, g)
        assert raw[1] == pytest.approx(1.0, abs=1e-14)

    def test_kernels_integrate_to_one(self, grid):
        np.testing.assert_allclose(bernstein_kernels(12, grid).mean(axis=1), 1.0, atol=1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            BernsteinSpec(2, [0.5])
        with pytest.raises(ValueError):
            BernsteinSpec(2, [0.6, 0.6])
        with pytest.raises(ValueError):
            BernsteinSpec(0, [])

    def test_from_cdf(self):
        spec = BernsteinSpec.from_cdf(lambda x: x * x, 4)
        assert spec.weights == pytest.approx((1 / 16, 3 / 16, 5 / 16, 7 / 16))
        assert spec.to_dict()["kind"] == "bernstein"


class TestSplineExp:
    @pytest.mark.parametrize("q,K", [(1, 3), (2, 4)])
    def test_zero_theta(self, grid, q, K):
        d = spline_exp_density(SplineExpSpec(q, K, [0.0] * (q + K - 1)), grid)
        np.testing.assert_allclose(d.values, 1.0, atol=1e-14)

    def test_two_cells(self):
        t = math.log(2)
        d = spline_exp_density(SplineExpSpec(1, 2, [t, -t]), make_grid(2))
        np.testing.assert_allclose(d.values, [1.6, 0.4], atol=1e-14)
        # oracle: e^t / (e^t/2 + e^-t/2)
        assert d.values[0] == pytest.approx(math.exp(t) / (0.5 * math.exp(t) + 0.5 * math.exp(-t)))

    def test_scaling_to_zero(self, grid):
        th = project_theta([0.3, -1.0, 0.4, 0.2])
        d = spline_exp_density(SplineExpSpec(2, 3, th * 0.0), grid)
        np.testing.assert_allclose(d.values, 1.0, atol=1e-14)

    @pytest.mark.parametrize("q,K", [(1, 5), (2, 5)])
    def test_partition_of_unity(self, grid, q, K):
        np.testing.assert_allclose(spline_basis(q, K, grid).sum(axis=0), 1.0, atol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError, match="sum to zero"):
            SplineExpSpec(1, 2, [1.0, 0.0])
        with pytest.raises(ValueError, match="orders 1 and 2"):
            SplineExpSpec(3, 2, [0.0] * 4)
        with pytest.raises(ValueError, match="box"):
            SplineExpSpec(1, 2, [2.0, -2.0], M=1.0)

    def test_log_sup_constant(self, grid):
        d = log_sup_constant(1, 4, grid, samples=200)
        assert 0 < d <= 2.0


class TestSmoothFamily:
    def test_zero_theta(self, grid, line_family):
        np.testing.assert_allclose(smooth_family_density(line_family, [0.0], grid).values, 1.0)

    def test_same_theta(self, grid, line_family):
        f = smooth_family_density(line_family, [0.7], grid)
        g = smooth_family_density(line_family, [0.7], grid)
        assert hellinger(f, g) == 0.0

    def test_identifiable(self, grid):
        spec = SmoothFamilySpec(2, [[-1, 1], [-1, 1]], ["x", "cos:1"])
        ts = np.linspace(-1, 1, 5)
        thetas = [(a, b) for a in ts for b in ts]
        for i, t1 in enumerate(thetas):
            for t2 in thetas[i + 1:]:
                assert hellinger(smooth_family_density(spec, t1, grid),
                                 smooth_family_density(spec, t2, grid)) > 0

    def test_outside_box(self, grid, line_family):
        with pytest.raises(ValueError, match="outside"):
            smooth_family_density(line_family, [1.5], grid)

    def test_metric_equivalence(self, grid, line_family):
        a1, a2 = measure_metric_equivalence(line_family, grid, samples=500)
        assert 0 < a1 <= a2
        # brute force over 10^4 random pairs
        rng = np.random.default_rng(5)
        thetas = np.linspace(-1, 1, 201)
        dens = [smooth_family_density(line_family, [t], grid).sqrt for t in thetas]
        i, j = rng.integers(0, 201, size=(2, 10_000))
        keep = i != j
        h = np.sqrt(np.mean([(dens[a] - dens[b]) ** 2 for a, b in zip(i[keep], j[keep])], axis=1))
        brute = np.min(h / np.abs(thetas[i[keep]] - thetas[j[keep]]))
        assert brute > 0
        assert a1 == pytest.approx(brute, rel=0.05)

    def test_degenerate(self, grid):
        spec = SmoothFamilySpec(2, [[-1, 1], [-1, 1]], ["x", "x"])
        with pytest.raises(ValueError, match="degenerate"):
            measure_metric_equivalence(spec, grid, samples=100)

    def test_serializable(self, line_family):
        assert line_family.to_dict()["features"] == ["x"]


class TestLift:
    def test_uniform_stays_uniform(self, grid):
        (f,) = lift_sup_cover([np.ones(grid.m)], 0.1, grid)
        np.testing.assert_allclose(f.values, 1.0, atol=1e-14)

    def test_small_eps(self, rng, grid):
        g = random_density(rng, grid)
        (f,) = lift_sup_cover([g], 1e-3, grid)
        assert hstar(g, f) <= 8e-3

    @pytest.mark.parametrize("eps", [0.01, 0.1])
    def test_random(self, rng, grid, eps):
        for _ in range(10):
            f = random_density(rng, grid)
            u = rng.uniform(-eps, eps, grid.m)
            g = np.maximum(f.sqrt + u, 0.0) ** 2
            assert np.max(np.abs(np.sqrt(g) - f.sqrt)) <= eps
            (fj,) = lift_sup_cover([g], eps, grid)
            assert hstar(f, fj) <= 8 * eps + 1e-9

    def test_validation(self, grid):
        with pytest.raises(ValueError):
            lift_sup_cover([], 0.1, grid)
        with pytest.raises(ValueError):
            lift_sup_cover([np.ones(grid.m)], 0.0, grid)
        with pytest.raises(ValueError, match="centre 0"):
            lift_sup_cover([-np.ones(grid.m)], 0.1, grid)


class TestCoverToPartition:
    def test_overlap(self):
        p = cover_to_partition([{1, 2}, {2, 3}])
        assert p.blocks == [{1, 2}, {3}]
        assert p.empty == ()

    def test_disjoint_unchanged(self):
        assert cover_to_partition([{1}, {2, 3}]).blocks == [{1}, {2, 3}]

    def test_empty_block_flagged(self):
        assert cover_to_partition([{1}, {1}]) == Partition([{1}, set()], (1,))

    def test_universe(self):
        assert cover_to_partition([{1, 2}, {2, 3}], universe={2, 3}).blocks == [{2}, {3}]
        with pytest.raises(ValueError, match="misses"):
            cover_to_partition([{1}], universe={1, 4})
