"""Finite-n experiments around posterior contraction.

Almost-sure and in-probability limit statements cannot be checked at desk
scale. What is checked instead:

* the tail bound on the marginal likelihood ratio, by Monte Carlo;
* per-n arithmetic of every hypothesis of the rate theorems (a summable or
  vanishing term is reported as satisfied when it is at most one);
* the rate multiplier ``r`` each theorem promises;
* empirical posterior radii as a function of n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from postrate.divergences import hellinger, hstar_or_inf, kl, v_divergence
from postrate.entropy import hausdorff_entropy
from postrate.grid import GridDensity, same_grid
from postrate.posterior import log_marginal_ratios, sample_iid
from postrate.priors import AtomicPrior


# --------------------------------------------------------------------------
# constants and rate multipliers
# --------------------------------------------------------------------------

class Theorem(str, Enum):
    THEOREM1 = "theorem1"
    COROLLARY1 = "corollary1"
    THEOREM2 = "theorem2"
    THEOREM3 = "theorem3"
    THEOREM4 = "theorem4"

    @classmethod
    def parse(cls, name: str) -> "Theorem":
        key = name.strip().lower().split("/")[0]
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown theorem {name!r}") from None


# corollaries sharing hypotheses and conclusion form with a theorem
_ALIASES = {"corollary2": "theorem1", "corollary3": "theorem2",
            "corollary4": "theorem3", "corollary5": "theorem4"}


@dataclass(frozen=True)
class RateConstants:
    which: Theorem
    alpha: float = 0.0
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0

    def __post_init__(self):
        which = self.which if isinstance(self.which, Theorem) else Theorem.parse(self.which)
        object.__setattr__(self, "which", which)
        a, c0, c1, c2, c3 = self.alpha, self.c0, self.c1, self.c2, self.c3
        if not 0.0 <= a < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {a}")
        if min(c0, c1, c2, c3) < 0 and which is not Theorem.THEOREM3 and which is not Theorem.THEOREM4:
            raise ValueError("constants must be nonnegative")
        need = {
            Theorem.THEOREM1: [(c1 > 0, "c1 > 0"), (c2 > 0, "c2 > 0"), (c3 >= 0, "c3 >= 0")],
            Theorem.COROLLARY1: [(c1 >= 0, "c1 >= 0"), (c2 > 0, "c2 > 0"), (c3 >= 0, "c3 >= 0")],
            Theorem.THEOREM2: [(c1 > 0, "c1 > 0"), (c2 >= 0, "c2 >= 0")],
            Theorem.THEOREM3: [(0 < a, "0 < alpha"), (c1 < (1 - a) / 18, "c1 < (1 - alpha)/18")],
            Theorem.THEOREM4: [(0 < a, "0 < alpha"), (c1 < (1 - a) / 18, "c1 < (1 - alpha)/18"),
                               (c0 > 0, "c0 > 0"), (c0 > 0 and c2 > 1 / c0, "c2 > 1/c0")],
        }[which]
        failed = [msg for ok, msg in need if not ok]
        if failed:
            raise ValueError(f"{which.value} requires " + ", ".join(failed))


def rate_multiplier(constants: RateConstants) -> float:
    """Infimum of the admissible multipliers r of the contraction radius r*eps_n.

    The fixed-multiplier cases have an explicit threshold. ``theorem3`` needs
    a diverging multiplier and ``theorem4`` only an unspecified large one, so
    both return inf.
    """
    k = constants
    if k.alpha >= 1:
        raise ValueError("alpha must be < 1")
    a = k.alpha
    if k.which is Theorem.THEOREM1:
        inner = 3 * a + 2 * a * k.c2 + a * k.c3 + k.c1
    elif k.which is Theorem.COROLLARY1:
        inner = 3 * a + 2 * a * k.c2 + a * k.c3 + k.c1 + k.c2
    elif k.which is Theorem.THEOREM2:
        inner = 2 * a + a * k.c2 + k.c1
    else:
        return math.inf
    return 2.0 + math.sqrt(2.0 * inner / (1.0 - a))


# --------------------------------------------------------------------------
# neighbourhoods
# --------------------------------------------------------------------------

class NeighborhoodKind(str, Enum):
    WSTAR = "Wstar"
    KV = "KV"
    HELLINGER_COMPLEMENT = "HellingerComplement"


@dataclass(frozen=True)
class NeighborhoodSpec:
    kind: NeighborhoodKind
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "kind", NeighborhoodKind(self.kind))
        if not self.radius > 0:
            raise ValueError("neighbourhood radius must be positive")


def neighborhood_predicate(spec: NeighborhoodSpec, f0: GridDensity) -> Callable[[GridDensity], bool]:
    """W: H*(f0, f) <= r.  KV: K < r^2 and V < r^2.  Complement: H(f0, f) >= r."""
    r = spec.radius
    if spec.kind is NeighborhoodKind.WSTAR:
        return lambda f: hstar_or_inf(f0, f) <= r
    if spec.kind is NeighborhoodKind.KV:
        return lambda f: kl(f0, f) < r * r and v_divergence(f0, f) < r * r
    return lambda f: hellinger(f0, f) >= r


def _distances(prior: AtomicPrior, f0: GridDensity, fn) -> np.ndarray:
    same_grid(prior.atoms[0], f0)
    return np.array([fn(f0, a) for a in prior.atoms])


# --------------------------------------------------------------------------
# marginal likelihood tail bound
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Lemma1Result:
    n: int
    eps: float
    c: float
    reps: int
    empirical_prob: float
    bound: float
    stderr: float
    w_mass: float
    passed: bool
    vacuous: bool

    def __iter__(self):
        return iter((self.empirical_prob, self.bound, self.passed))


def lemma1_threshold(n: int, eps: float, c: float, w_mass: float) -> float:
    """log of e^{-n eps^2 (3 + 2c)} * Pi(W_eps)."""
    log_w = math.log(w_mass) if w_mass > 0 else -math.inf
    return -n * eps * eps * (3.0 + 2.0 * c) + log_w


def lemma1_log_ratios(prior: AtomicPrior, f0: GridDensity, n: int, seeds: Sequence[int],
                      chunk: int = 1000) -> np.ndarray:
    """log marginal likelihood ratio for one sample of size n per seed."""
    out = np.empty(len(seeds))
    for start in range(0, len(seeds), chunk):
        batch = seeds[start:start + chunk]
        counts = np.stack([sample_iid(f0, n, int(s)).counts for s in batch])
        out[start:start + len(batch)] = log_marginal_ratios(prior, f0, counts)
    return out


def verify_lemma1(prior: AtomicPrior, f0: GridDensity, n: int, eps: float, c: float,
                  reps: int = 10_000, seed: int = 0) -> Lemma1Result:
    """Monte Carlo frequency of the event

        log int R_n dPi <= -n eps^2 (3 + 2c) + log Pi(W_eps)

    against the bound e^{-n eps^2 c}, with a three-sigma binomial margin
    taken at the bound. Replication i uses seed ``seed + i``.
    """
    if reps < 1000:
        raise ValueError("need at least 1000 replications")
    if not (eps > 0 and c > 0):
        raise ValueError("eps and c must be positive")
    hs = _distances(prior, f0, hstar_or_inf)
    w_mass = float(prior.weights[hs <= eps].sum())
    bound = math.exp(-n * eps * eps * c)
    stderr = math.sqrt(bound * (1.0 - bound) / reps)
    if w_mass == 0.0:
        return Lemma1Result(n, eps, c, reps, 0.0, bound, stderr, 0.0, True, True)
    thresh = lemma1_threshold(n, eps, c, w_mass)
    log_r = lemma1_log_ratios(prior, f0, n, range(seed, seed + reps))
    prob = float(np.mean(log_r <= thresh))
    return Lemma1Result(n, eps, c, reps, prob, bound, stderr, w_mass,
                        prob <= bound + 3.0 * stderr, False)


# --------------------------------------------------------------------------
# hypothesis checkers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    rhs: float
    relation: str  # "<=" or ">="
    satisfied: bool
    detail: str = ""


@dataclass(frozen=True)
class ConditionReport:
    theorem: Theorem
    n: int
    eps: float
    conditions: tuple
    j_value: float
    j_exact: bool
    masses: dict = field(default_factory=dict)
    rate_multiplier: float = math.inf

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def _le(name, lhs, rhs, detail=""):
    return Condition(name, float(lhs), float(rhs), "<=", bool(lhs <= rhs), detail)


def _ge(name, lhs, rhs, detail=""):
    return Condition(name, float(lhs), float(rhs), ">=", bool(lhs >= rhs), detail)


def check_conditions(prior: AtomicPrior, f0: GridDensity, sieve, eps: float,
                     constants: RateConstants, n: int, jmax: int = None) -> ConditionReport:
    """Evaluate each hypothesis of the chosen theorem at a single n.

    The entropy is exact for sieves of up to 12 atoms and an upper bound
    otherwise, so a reported pass of the entropy condition is always
    genuine. Truncated prior tail mass is counted outside the sieve.
    """
    if not eps > 0 or n < 1:
        raise ValueError("need eps > 0 and n >= 1")
    sieve = sorted(set(int(i) for i in sieve))
    if sieve and (sieve[0] < 0 or sieve[-1] >= len(prior)):
        raise IndexError("sieve index outside the prior")
    k = constants
    w = prior.weights
    h = _distances(prior, f0, hellinger)
    hs = _distances(prior, f0, hstar_or_inf)
    kls = _distances(prior, f0, kl)
    vs = _distances(prior, f0, v_divergence)
    in_sieve = np.zeros(len(prior), bool)
    in_sieve[sieve] = True
    far = h >= eps
    tail = prior.tail_mass
    masses = {
        "A_minus_sieve": float(w[far & ~in_sieve].sum()) + tail,
        "outside_sieve": float(w[~in_sieve].sum()) + tail,
        "W": float(w[hs <= eps].sum()),
        "B": float(w[(kls < eps * eps) & (vs < eps * eps)].sum()),
    }
    ne2 = n * eps * eps
    ent = hausdorff_entropy(sieve, prior, eps, k.alpha)
    conds = []
    th = k.which
    if th in (Theorem.THEOREM1, Theorem.COROLLARY1, Theorem.THEOREM2):
        conds.append(_le("entropy", ent.j_value, k.c1 * ne2, "J(eps, G, alpha) <= c1 n eps^2"))
    if th is Theorem.THEOREM1:
        conds.append(_le("sieve_remainder", masses["A_minus_sieve"],
                         math.exp(-ne2 * (3 + 3 * k.c2 + k.c3)), "Pi(A_eps \\ G)"))
    elif th is Theorem.COROLLARY1:
        conds.append(_le("sieve_remainder", masses["outside_sieve"],
                         math.exp(-ne2 * (3 + 3 * k.c2 + k.c3)), "Pi(F \\ G)"))
    elif th is Theorem.THEOREM2:
        conds.append(_le("sieve_remainder", masses["A_minus_sieve"],
                         math.exp(-ne2 * (2 + k.c2)), "Pi(A_eps \\ G)"))
    if th in (Theorem.THEOREM1, Theorem.COROLLARY1):
        conds.append(_ge("prior_concentration", masses["W"], math.exp(-ne2 * k.c3),
                         "Pi(W_eps) >= exp(-c3 n eps^2)"))
    elif th is Theorem.THEOREM2:
        conds.append(_ge("prior_concentration", masses["B"], math.exp(-ne2 * k.c2),
                         "Pi(B_eps^2) >= exp(-c2 n eps^2)"))
    else:
        base = masses["B"] if th is Theorem.THEOREM3 else masses["W"]
        factor = 2.0 * ne2 if th is Theorem.THEOREM3 else ne2 * (3 + 2 * k.c2)
        rem = masses["A_minus_sieve"]
        lhs = 0.0 if rem == 0 else rem * math.exp(factor)
        conds.append(_le("sieve_remainder", lhs, base, "weighted remainder <= concentration mass"))
        log_base = math.log(base) if base > 0 else -math.inf
        top = jmax or int(math.ceil(math.sqrt(2.0) / eps))
        for j in range(1, top + 1):
            shell = [i for i in sieve if j * eps <= h[i] < 2 * j * eps]
            sj = hausdorff_entropy(shell, prior, j * eps / 3.0, k.alpha)
            conds.append(_le(f"shell_entropy j={j}", sj.j_value, k.c1 * j * j * ne2 + k.alpha * log_base,
                             f"{len(shell)} atoms, exact={sj.optimal}"))
    return ConditionReport(th, n, eps, tuple(conds), ent.j_value, ent.optimal, masses,
                           rate_multiplier(k))


# --------------------------------------------------------------------------
# contraction curves
# --------------------------------------------------------------------------

class CurvePoint(NamedTuple):
    n: int
    radius: float  # median over replications
    q25: float
    q75: float
    radii: tuple


def posterior_radius(log_weights: np.ndarray, dists: np.ndarray, mass_target: float) -> float:
    """Smallest rho with posterior mass of {H(f0, f) > rho} at most ``mass_target``."""
    order = np.argsort(dists, kind="stable")
    d = dists[order]
    w = np.exp(log_weights[order] - logsumexp(log_weights))
    suffix = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    candidates = np.concatenate([[0.0], np.unique(d)])
    beyond = suffix[np.searchsorted(d, candidates, side="right")]
    return float(candidates[np.argmax(beyond <= mass_target)])


def contraction_radii(prior: AtomicPrior, f0: GridDensity, ns: Sequence[int], mass_target: float,
                      seed: int) -> list:
    """Posterior radii at every n for one replication.

    The samples are nested: size-n data is the first n draws of one stream.
    """
    dists = _distances(prior, f0, hellinger)
    sample = sample_iid(f0, max(ns), seed)
    out = []
    for n in ns:
        counts = np.bincount(sample.cells[:n], minlength=prior.grid.m)
        seen = np.flatnonzero(counts)
        ll = (prior.log_values[:, seen] * counts[seen]).sum(axis=1)
        out.append(posterior_radius(prior.log_weights + ll, dists, mass_target))
    return out


def contraction_curve(prior: AtomicPrior, f0: GridDensity, ns: Sequence[int],
                      mass_target: float = 0.5, reps: int = 50, seed: int = 0) -> list:
    ns = [int(n) for n in ns]
    if any(b <= a for a, b in zip(ns, ns[1:])) or not ns or ns[0] < 0:
        raise ValueError("sample sizes must be nonnegative and increasing")
    if not 0 < mass_target < 1:
        raise ValueError("mass_target must lie in (0, 1)")
    table = np.array([contraction_radii(prior, f0, ns, mass_target, seed + r) for r in range(reps)])
    return [CurvePoint(n, float(np.median(col)), float(np.quantile(col, 0.25)),
                       float(np.quantile(col, 0.75)), tuple(map(float, col)))
            for n, col in zip(ns, table.T)]


def curve_slope(points: Sequence[CurvePoint]) -> float:
    """Least-squares slope of log median radius against log n."""
    n = np.array([p.n for p in points], dtype=float)
    r = np.array([p.radius for p in points])
    if np.any(r <= 0) or np.any(n <= 0):
        raise ValueError("slope needs positive radii and sample sizes")
    return float(np.polyfit(np.log(n), np.log(r), 1)[0])


def count_inversions(points: Sequence[CurvePoint]) -> int:
    """Number of consecutive increases of the median radius."""
    r = [p.radius for p in points]
    return sum(1 for a, b in zip(r, r[1:]) if b > a)


# --------------------------------------------------------------------------
# replicated experiments and their JSONL records
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentRecord:
    seed: int
    n: int
    eps: float
    experiment: str
    quantities: dict

    def to_line(self) -> str:
        from postrate.storage import dumps_line
        return dumps_line({"seed": self.seed, "n": self.n, "eps": self.eps,
                           "experiment": self.experiment, "quantities": self.quantities})

    @classmethod
    def from_line(cls, line: str) -> "ExperimentRecord":
        import json
        d = json.loads(line)
        return cls(int(d["seed"]), int(d["n"]), d["eps"], d["experiment"], d["quantities"])


def read_records(path) -> list:
    """Parse a JSONL file; a torn final line (interrupted write) is dropped."""
    from pathlib import Path
    lines = [ln for ln in Path(path).read_text().split("\n") if ln.strip()]
    records = []
    for i, line in enumerate(lines):
        try:
            records.append(ExperimentRecord.from_line(line))
        except (ValueError, KeyError, TypeError) as exc:
            if i == len(lines) - 1:
                break
            raise ValueError(f"{path}: record {i + 1} is malformed: {exc}") from exc
    return records


class _Setup(NamedTuple):
    grid: object
    prior: AtomicPrior
    f0: GridDensity


def _setup(config) -> _Setup:
    from postrate.grid import make_grid
    from postrate.specs import density_from_spec, prior_from_spec
    grid = make_grid(config.grid_m)
    prior = prior_from_spec(config.prior, grid, config.floor, config.base_dir)
    f0 = density_from_spec(config.f0, grid, config.floor, config.base_dir, "f0")
    return _Setup(grid, prior, f0)


def _lemma1_records(config, setup: _Setup, start: int) -> list:
    n, eps, c = config.n, float(config.eps), float(config.c)
    hs = _distances(setup.prior, setup.f0, hstar_or_inf)
    w_mass = float(setup.prior.weights[hs <= eps].sum())
    thresh = lemma1_threshold(n, eps, c, w_mass)
    bound = math.exp(-n * eps * eps * c)
    seeds = list(range(config.seed + start, config.seed + config.reps))
    log_r = lemma1_log_ratios(setup.prior, setup.f0, n, seeds) if seeds else []
    return [[ExperimentRecord(s, n, eps, "lemma1", {
        "c": c, "log_ratio": float(lr), "threshold": thresh, "log_w_mass":
        math.log(w_mass) if w_mass > 0 else -math.inf, "event": bool(lr <= thresh), "bound": bound})]
        for s, lr in zip(seeds, log_r)]


def _curve_records(config, setup: _Setup, start: int) -> list:
    out = []
    for rep in range(start, config.reps):
        s = config.seed + rep
        radii = contraction_radii(setup.prior, setup.f0, config.ns, config.mass_target, s)
        out.append([ExperimentRecord(s, n, None, "curve", {"radius": r, "mass_target": config.mass_target})
                    for n, r in zip(config.ns, radii)])
    return out


def _conditions_records(config, setup: _Setup, start: int) -> list:
    constants = RateConstants(**config.constants)
    sieve = range(len(setup.prior)) if config.sieve == "all" else config.sieve
    ns = config.ns if config.ns is not None else [config.n]
    out = []
    for i in range(start, len(ns)):
        rep = check_conditions(setup.prior, setup.f0, sieve, float(config.eps), constants, ns[i])
        q = {"theorem": rep.theorem.value, "j_value": rep.j_value, "j_exact": rep.j_exact,
             "rate_multiplier": rep.rate_multiplier, "masses": rep.masses,
             "all_satisfied": rep.all_satisfied,
             "conditions": {c.name: {"lhs": c.lhs, "rhs": c.rhs, "relation": c.relation,
                                     "satisfied": c.satisfied} for c in rep.conditions}}
        out.append([ExperimentRecord(config.seed + i, ns[i], float(config.eps), "conditions", q)])
    return out


_RUNNERS = {"lemma1": _lemma1_records, "curve": _curve_records, "conditions": _conditions_records}


def _replication_count(config) -> int:
    if config.experiment == "conditions":
        return len(config.ns) if config.ns is not None else 1
    return config.reps


def _per_replication(config) -> int:
    return len(config.ns) if config.experiment == "curve" else 1


def run_experiment(config) -> list:
    """Run ``config.experiment`` and append one JSONL line per record.

    When ``config.output_path`` already holds records of the same experiment,
    complete replications are kept and the run resumes after them.
    """
    from pathlib import Path
    if config.experiment not in _RUNNERS:
        raise ValueError(f"run_experiment handles lemma1, conditions and curve, not {config.experiment!r}")
    per = _per_replication(config)
    done: list = []
    path = Path(config.output_path) if config.output_path else None
    if path is not None and path.exists():
        existing = read_records(path)
        for rec in existing:
            if rec.experiment != config.experiment:
                raise ValueError(f"{path} holds {rec.experiment!r} records, not {config.experiment!r}")
        done = existing[: len(existing) // per * per]
        # rewrite without any torn or partial replication
        try:
            path.write_text("".join(r.to_line() + "\n" for r in done))
        except OSError as exc:
            raise OSError(f"{path}: cannot rewrite before resuming: {exc}") from exc
    start = len(done) // per
    total = _replication_count(config)
    if start >= total:
        return done
    setup = _setup(config)
    groups = _RUNNERS[config.experiment](config, setup, start)
    new = [rec for group in groups for rec in group]
    if path is not None:
        index = len(done)
        try:
            with open(path, "a") as fh:
                for rec in new:
                    fh.write(rec.to_line() + "\n")
                    index += 1
        except OSError as exc:
            raise OSError(f"{path}: write failed at record {index}: {exc}") from exc
    return done + new


def _quantile(values, q):
    return float(np.quantile(np.asarray(values, dtype=float), q))


def summarize(records: Sequence[ExperimentRecord]) -> tuple:
    """Aggregate records into (header, rows) of the experiment's summary CSV."""
    if not records:
        raise ValueError("no records to summarize")
    kinds = {r.experiment for r in records}
    if len(kinds) != 1:
        raise ValueError(f"mixed experiments in one file: {sorted(kinds)}")
    kind = kinds.pop()
    if kind == "curve":
        by_n: dict = {}
        for r in records:
            by_n.setdefault(r.n, []).append(float(r.quantities["radius"]))
        rows = [[n, len(v), float(np.median(v)), _quantile(v, 0.25), _quantile(v, 0.75)]
                for n, v in sorted(by_n.items())]
        return ["n", "reps", "median_radius", "q25", "q75"], rows
    if kind == "lemma1":
        groups: dict = {}
        for r in records:
            groups.setdefault((r.n, float(r.eps), float(r.quantities["c"])), []).append(r)
        rows = []
        for (n, eps, c), recs in sorted(groups.items()):
            reps = len(recs)
            prob = sum(bool(x.quantities["event"]) for x in recs) / reps
            bound = math.exp(-n * eps * eps * c)
            margin = 3.0 * math.sqrt(bound * (1.0 - bound) / reps)
            rows.append([n, eps, c, prob, bound, prob <= bound + margin])
        return ["n", "eps", "c", "empirical_prob", "bound", "pass"], rows
    if kind == "conditions":
        rows = []
        for r in records:
            for name, cnd in r.quantities["conditions"].items():
                rows.append([r.n, r.eps, name, cnd["lhs"], cnd["rhs"], cnd["satisfied"]])
        return ["n", "eps", "condition", "lhs", "rhs", "satisfied"], rows
    raise ValueError(f"no summary defined for {kind!r} records")
