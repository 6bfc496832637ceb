"""Acceptance criteria 1-9, one test each.

Every test records a one-line verdict that is printed in the pytest
terminal summary, whether it passes or fails.
"""

import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import ACCEPTANCE, random_density, random_instance
from oracles import brute_entropy, closed_forms, rate_multiplier_hand
from postrate.divergences import hellinger, hstar, kl, sup_ratio, v_divergence
from postrate.entropy import covering_number, hausdorff_entropy, sandwich_audit, subadditivity_check
from postrate.families import (
    BernsteinSpec,
    SmoothFamilySpec,
    bernstein_density,
    lift_sup_cover,
)
from postrate.grid import integrate, make_grid, normalize, uniform
from postrate.posterior import posterior, predictive_density, sample_iid
from postrate.priors import bernstein_prior, box_lattice_prior, uniform_atoms
from postrate.ratelab import (
    RateConstants,
    contraction_curve,
    count_inversions,
    curve_slope,
    rate_multiplier,
    verify_lemma1,
)


@contextmanager
def verdict(k):
    """Record PASS/FAIL for criterion k; the body fills ``info`` with details."""
    info = {}
    try:
        yield info
    except BaseException as exc:
        ACCEPTANCE[k] = (False, f"{info.get('detail', '')} [{type(exc).__name__}: {exc}]".strip())
        raise
    ACCEPTANCE[k] = (True, info.get("detail", ""))


@pytest.fixture(scope="module")
def pairs():
    rng = np.random.default_rng(1)
    g = make_grid(1024)
    return [(random_density(rng, g), random_density(rng, g)) for _ in range(200)]


def test_criterion_1_hstar_identity(pairs):
    with verdict(1) as info:
        start = time.perf_counter()
        worst = 0.0
        for f0, f in pairs:
            assert f0.strictly_positive and f.strictly_positive
            lhs = integrate(np.sqrt(f0.values / f.values) * f0.values, f0.grid)
            worst = max(worst, abs(lhs - 1.0 - 1.5 * hstar(f0, f) ** 2))
        elapsed = time.perf_counter() - start
        info["detail"] = f"max residual {worst:.2e} over 200 pairs in {elapsed:.2f}s"
        assert worst <= 1e-10
        assert elapsed < 5.0


def test_criterion_2_divergence_chain(pairs):
    with verdict(2) as info:
        worst_low = worst_high = -math.inf
        for f0, f in pairs:
            h, hs = hellinger(f0, f), hstar(f0, f)
            worst_low = max(worst_low, h / math.sqrt(3) - hs)
            worst_high = max(worst_high, hs - h * sup_ratio(f0, f) ** 0.25)
        g = make_grid(4096)
        u, lin = uniform(g), normalize(2 * g.nodes, g)
        cf = closed_forms()
        got = {"hellinger": hellinger(u, lin), "kl": kl(u, lin), "v": v_divergence(u, lin)}
        errs = {k: abs(got[k] - cf[k]) for k in got}
        info["detail"] = (f"smallest chain margin {-max(worst_low, worst_high):.2e}; "
                          + ", ".join(f"{k} {got[k]:.5f} (err {errs[k]:.1e})" for k in got))
        assert worst_low <= 1e-12 and worst_high <= 1e-12
        assert errs["hellinger"] <= 1e-3 and errs["kl"] <= 1e-3 and errs["v"] <= 2e-3


def test_criterion_3_entropy_oracle_and_sandwich():
    with verdict(3) as info:
        rng = np.random.default_rng(3)
        solver_time = 0.0
        start = time.perf_counter()
        worst = 0.0
        for _ in range(100):
            k = int(rng.integers(1, 11))
            prior, delta = random_instance(rng, k, m=64)
            alpha = float(rng.uniform())
            atoms = list(range(k))
            t0 = time.perf_counter()
            rep = hausdorff_entropy(atoms, prior, delta, alpha)
            rep0 = hausdorff_entropy(atoms, prior, delta, 0.0)
            n_cover = covering_number(atoms, prior, delta).covering_number
            ok_sandwich = sandwich_audit(rep, prior, atoms)
            cut = rng.random(k) < 0.5
            g1 = set(np.flatnonzero(cut).tolist()) or {0}
            g2 = set(np.flatnonzero(~cut).tolist()) or {k - 1}
            ok_sub = subadditivity_check(prior, g1, g2, delta, alpha)
            solver_time += time.perf_counter() - t0

            n_ref, j_ref = brute_entropy(prior.values, prior.weights, atoms, delta, alpha, prior.grid.m)
            worst = max(worst, abs(rep.j_value - j_ref))
            assert rep.optimal and rep.method == "exact"
            assert n_cover == n_ref
            mass = float(prior.weights.sum())
            e_j = math.exp(rep.j_value)
            assert mass ** alpha <= e_j + 1e-12 <= mass ** alpha * n_cover ** (1 - alpha) + 2e-12
            assert ok_sandwich
            assert abs(rep0.j_value - math.log(n_cover)) <= 1e-12
            assert ok_sub
        total = time.perf_counter() - start
        info["detail"] = (f"max |J - oracle| {worst:.1e} on 100 instances; solver {solver_time:.1f}s, "
                          f"with oracle {total:.1f}s")
        assert worst <= 1e-12
        assert solver_time < 60.0


def lemma1_configs():
    combos = list(itertools.product([20, 50, 100], [0.2, 0.3, 0.5], [0.5, 1.0, 2.0]))
    order = np.random.default_rng(4).permutation(len(combos))[:20]
    return [combos[i] for i in sorted(order)]


def test_criterion_4_lemma1_monte_carlo():
    with verdict(4) as info:
        g = make_grid(256)
        family = SmoothFamilySpec(1, [[-1, 1]], ["x"])
        priors = [
            (box_lattice_prior(family, 21, g), normalize(np.exp(0.037 * (g.nodes - 0.5)), g)),
            (bernstein_prior(lambda j: j ** (-j), 4, 3, g), normalize(np.exp(-((g.nodes - 0.45) ** 2)), g)),
        ]
        start = time.perf_counter()
        rows = []
        for i, (n, eps, c) in enumerate(lemma1_configs()):
            prior, f0 = priors[i % 2]
            res = verify_lemma1(prior, f0, n, eps, c, reps=10_000, seed=1000 * i)
            assert not res.vacuous and res.w_mass > 0
            rows.append(res)
        elapsed = time.perf_counter() - start
        failed = [r for r in rows if not r.passed]
        top = max(rows, key=lambda r: r.empirical_prob)
        info["detail"] = (f"{len(rows) - len(failed)}/20 configurations within bound + 3 sigma; "
                          f"largest frequency {top.empirical_prob:.4f} at n={top.n} eps={top.eps} c={top.c} "
                          f"(bound {top.bound:.4f}); {elapsed:.1f}s")
        assert len(rows) == 20 and not failed
        assert elapsed < 600


def test_criterion_5_covering_lift_and_bernstein_identity():
    with verdict(5) as info:
        rng = np.random.default_rng(5)
        g = make_grid(1024)
        worst = -math.inf
        trials = 0
        for eps in (0.01, 0.05, 0.1):
            for _ in range(50):
                f = random_density(rng, g)
                u = rng.uniform(-eps, eps, g.m)
                centre = np.maximum(f.sqrt + u, 0.0) ** 2
                assert np.max(np.abs(np.sqrt(centre) - f.sqrt)) <= eps
                (fj,) = lift_sup_cover([centre], eps, g)
                worst = max(worst, hstar(f, fj) / eps)
                assert hstar(f, fj) <= 8 * eps + 1e-9
                trials += 1
        dev = max(np.max(np.abs(bernstein_density(BernsteinSpec(k, [1 / k] * k), g).values - 1.0))
                  for k in range(1, 51))
        info["detail"] = (f"{trials} lifts, max H*/eps {worst:.3f} (limit 8); "
                          f"uniform Bernstein max deviation {dev:.1e} for k <= 50")
        assert dev <= 1e-10


def test_criterion_6_predictive_jensen():
    with verdict(6) as info:
        rng = np.random.default_rng(6)
        g = make_grid(512)
        worst = -math.inf
        checks = 0
        for trial in range(100):
            centre = random_density(rng, g)
            delta = float(rng.uniform(0.05, 0.4))
            block = []
            while len(block) < int(rng.integers(2, 6)):
                bump = rng.normal(scale=0.5) * np.cos(np.pi * rng.integers(1, 4) * g.nodes)
                cand = normalize(centre.values * np.exp(bump * rng.uniform(0, 1)), g)
                if hellinger(cand, centre) <= delta:
                    block.append(cand)
            others = [random_density(rng, g) for _ in range(3)]
            prior = uniform_atoms(block + others)
            idx = set(range(len(block)))
            for n in (0, 10, 100):
                truth = others[0] if trial % 2 else centre
                st = posterior(prior, sample_iid(truth, n, seed=trial * 7 + n))
                gap = hellinger(predictive_density(st, idx), centre) - delta
                worst = max(worst, gap)
                assert gap <= 1e-9
                checks += 1
        info["detail"] = f"{checks} block/n checks, max H(pred, centre) - delta = {worst:.3e}"


def test_criterion_7_contraction_trend():
    with verdict(7) as info:
        g = make_grid(1024)
        family = SmoothFamilySpec(1, [[-1, 1]], ["x"])
        prior = box_lattice_prior(family, 51, g)
        # truth sits between lattice points so the radius never collapses to zero
        from postrate.families import smooth_family_density
        f0 = smooth_family_density(family, [0.0148], g)
        ns = [2 ** k for k in range(6, 14)]
        start = time.perf_counter()
        pts = contraction_curve(prior, f0, ns, mass_target=0.5, reps=50, seed=0)
        elapsed = time.perf_counter() - start
        slope, inv = curve_slope(pts), count_inversions(pts)
        info["detail"] = (f"slope {slope:.3f} (window [-0.65, -0.35]), {inv} inversions, "
                          f"{elapsed:.1f}s; medians " + " ".join(f"{p.radius:.4f}" for p in pts))
        assert -0.65 <= slope <= -0.35
        assert inv <= 1
        assert elapsed < 900


def test_criterion_8_rate_multiplier():
    with verdict(8) as info:
        spots = [rate_multiplier(RateConstants("theorem2", 0.0, c1=2, c2=0)),
                 rate_multiplier(RateConstants("corollary1", 0.0, c1=0.5, c2=0.5, c3=0))]
        assert abs(spots[0] - 4.0) <= 1e-12 and abs(spots[1] - (2 + math.sqrt(2))) <= 1e-12
        vals = [0.25, 1.0, 3.0]
        worst, evaluated = 0.0, 0
        for which in ("theorem1", "corollary1", "theorem2"):
            for alpha in (0.0, 0.5):
                table = {}
                for c in itertools.product(vals, repeat=3):
                    r = rate_multiplier(RateConstants(which, alpha, c1=c[0], c2=c[1], c3=c[2]))
                    worst = max(worst, abs(r - rate_multiplier_hand(which, alpha, *c)))
                    table[c] = r
                    evaluated += 1
                for c, r in table.items():
                    for axis in range(3):
                        j = vals.index(c[axis])
                        if j + 1 < len(vals):
                            up = list(c)
                            up[axis] = vals[j + 1]
                            assert table[tuple(up)] >= r
            lo = rate_multiplier(RateConstants(which, 0.0, c1=1, c2=1, c3=1))
            hi = rate_multiplier(RateConstants(which, 0.5, c1=1, c2=1, c3=1))
            assert hi >= lo
        info["detail"] = f"spots {spots[0]:.12f}, {spots[1]:.12f}; {evaluated} grid points, max err {worst:.1e}"
        assert worst <= 1e-12


def test_criterion_9_cli_reproducibility(tmp_path):
    from pathlib import Path

    from postrate.cli import main
    with verdict(9) as info:
        configs = Path(__file__).resolve().parents[1] / "configs"
        names = ["divergence", "entropy", "lemma1", "conditions", "curve"]
        for name in names:
            for run in ("a", "b"):
                code = main([name, "--config", str(configs / f"{name}.json"), "--seed", "7",
                             "--out", str(tmp_path / f"{name}.{run}")])
                assert code == 0, f"{name} exited {code}"
            assert (tmp_path / f"{name}.a").read_bytes() == (tmp_path / f"{name}.b").read_bytes(), name
        for name in ("lemma1", "conditions", "curve"):
            for run in ("a", "b"):
                assert main(["report", "--in", str(tmp_path / f"{name}.a"),
                             "--out", str(tmp_path / f"{name}.csv.{run}")]) == 0
            assert (tmp_path / f"{name}.csv.a").read_bytes() == (tmp_path / f"{name}.csv.b").read_bytes()
        info["detail"] = f"{len(names)} subcommands and 3 reports byte-identical across two runs"
