"""Experiment configuration: a flat JSON object validated before any work."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from postrate.grid import DEFAULT_FLOOR, DEFAULT_M
from postrate.specs import ConfigError

EXPERIMENTS = ("divergence", "entropy", "lemma1", "conditions", "curve")

# key -> help text; shown by ``--help`` of every subcommand
KEY_DOCS = {
    "experiment": "which experiment the file configures (divergence, entropy, lemma1, conditions, curve)",
    "description": "free text, ignored",
    "grid_m": f"number of midpoint cells on [0, 1] (default {DEFAULT_M})",
    "floor": f"lower clamp applied to every density before logs are taken (default {DEFAULT_FLOOR:g})",
    "f0": "true density, a density spec such as {\"kind\": \"beta\", \"a\": 2, \"b\": 1}",
    "f": "second density for the divergence report",
    "prior": "prior spec (atoms, sieve, bernstein, box_lattice or directory)",
    "atoms": "prior atom indices forming the set G whose entropy is computed (default: all)",
    "sieve": "prior atom indices of the sieve G_n, or \"all\" (default: all)",
    "constants": "{\"which\": theorem1|corollary1|theorem2|theorem3|theorem4, \"alpha\", \"c0\".. \"c3\"}",
    "n": "sample size",
    "ns": "increasing list of sample sizes",
    "eps": "radius eps: H*-ball W_eps, K-V ball B_eps^2 and Hellinger complement A_eps",
    "c": "exponent c of the marginal likelihood tail bound exp(-n eps^2 c)",
    "delta": "Hellinger ball radius of the covering",
    "alpha": "exponent of the prior masses in the alpha-entropy, in [0, 1]",
    "reps": "number of independent replications",
    "seed": "base seed; replication i uses seed + i",
    "mass_target": "posterior mass allowed outside the reported radius (default 0.5)",
    "output_path": "where data files are written",
}

REQUIRED = {
    "divergence": ("f0", "f"),
    "entropy": ("prior", "delta", "alpha"),
    "lemma1": ("prior", "f0", "n", "eps", "c", "reps"),
    "conditions": ("prior", "f0", "eps", "constants"),
    "curve": ("prior", "f0", "ns", "reps"),
}


@dataclass
class ExperimentConfig:
    experiment: str
    description: str = ""
    grid_m: int = DEFAULT_M
    floor: float = DEFAULT_FLOOR
    f0: Optional[dict] = None
    f: Optional[dict] = None
    prior: Optional[dict] = None
    atoms: Optional[list] = None
    sieve: object = "all"
    constants: Optional[dict] = None
    n: Optional[int] = None
    ns: Optional[list] = None
    eps: Optional[float] = None
    c: Optional[float] = None
    delta: Optional[float] = None
    alpha: Optional[float] = None
    reps: int = 1
    seed: int = 0
    mass_target: float = 0.5
    output_path: Optional[str] = None
    base_dir: Optional[str] = field(default=None, repr=False)

    @classmethod
    def from_dict(cls, raw: dict, experiment: str = None, base_dir=None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(raw) - set(KEY_DOCS))
        if unknown:
            raise ConfigError(f"unknown config key {unknown[0]!r}")
        raw = dict(raw)
        if experiment is not None:
            if raw.get("experiment", experiment) != experiment:
                raise ConfigError(f"config is for {raw['experiment']!r}, not {experiment!r}")
            raw["experiment"] = experiment
        cfg = cls(**raw, base_dir=None if base_dir is None else str(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, experiment: str = None) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(raw, experiment, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}, got {self.experiment!r}")
        for key in REQUIRED[self.experiment]:
            if getattr(self, key) is None:
                raise ConfigError(f"{self.experiment} needs key {key!r}")
        if self.experiment == "conditions" and self.n is None and self.ns is None:
            raise ConfigError("conditions needs key 'n' or 'ns'")

        def check(key, ok, what):
            value = getattr(self, key)
            if value is not None and not ok(value):
                raise ConfigError(f"key {key!r} must be {what}, got {value!r}")

        is_int = lambda v: isinstance(v, int) and not isinstance(v, bool)  # noqa: E731
        is_num = lambda v: isinstance(v, (int, float)) and not isinstance(v, bool)  # noqa: E731
        check("grid_m", lambda v: is_int(v) and v >= 2, "an integer >= 2")
        check("floor", lambda v: is_num(v) and 0 <= v < 1, "a number in [0, 1)")
        check("n", lambda v: is_int(v) and v >= 0, "a nonnegative integer")
        check("ns", lambda v: isinstance(v, list) and v and all(is_int(x) and x >= 0 for x in v)
              and all(b > a for a, b in zip(v, v[1:])), "an increasing list of sample sizes")
        check("eps", lambda v: is_num(v) and v > 0, "a positive number")
        check("c", lambda v: is_num(v) and v > 0, "a positive number")
        check("delta", lambda v: is_num(v) and v > 0, "a positive number")
        check("alpha", lambda v: is_num(v) and 0 <= v <= 1, "a number in [0, 1]")
        check("reps", lambda v: is_int(v) and v >= 1, "a positive integer")
        check("seed", lambda v: is_int(v) and 0 <= v < 2**63, "a 64-bit nonnegative integer")
        check("mass_target", lambda v: is_num(v) and 0 < v < 1, "a number in (0, 1)")
        check("atoms", lambda v: isinstance(v, list) and all(is_int(x) for x in v), "a list of indices")
        check("sieve", lambda v: v == "all" or (isinstance(v, list) and all(is_int(x) for x in v)),
              "\"all\" or a list of indices")
        check("constants", lambda v: isinstance(v, dict), "a JSON object")
        if self.constants is not None:
            allowed = {"which", "alpha", "c0", "c1", "c2", "c3"}
            bad = sorted(set(self.constants) - allowed)
            if bad:
                raise ConfigError(f"constants: unknown key {bad[0]!r}")
            if "which" not in self.constants:
                raise ConfigError("constants: missing key 'which'")


def config_field_names():
    return [f.name for f in fields(ExperimentConfig) if f.name != "base_dir"]
