"""Command-line front end: JSON config in, JSON/JSONL/CSV data out.

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure.
Diagnostics go to stderr; data files depend only on (config, seed).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from postrate.config import EXPERIMENTS, KEY_DOCS, REQUIRED, ExperimentConfig
from postrate.specs import ConfigError

log = logging.getLogger("postrate")

FOOTER = ("Limit statements are checked through finite-n ingredients only: the "
          "likelihood-ratio tail bound, per-n condition arithmetic and median radius trends.")


def _key_help(experiment: str) -> str:
    required = set(REQUIRED.get(experiment, ()))
    lines = ["config keys (* = required):"]
    for key, doc in KEY_DOCS.items():
        mark = "*" if key in required else " "
        lines.append(f"  {mark} {key:<12} {doc}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="postrate", description=__doc__.splitlines()[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment", epilog=_key_help(name),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, metavar="PATH", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", metavar="PATH", help="override output_path")
        p.add_argument("--grid-m", type=int, dest="grid_m", help="override grid_m")
    p = sub.add_parser("report", help="aggregate a JSONL record file into a summary CSV",
                       epilog="curve columns: n,reps,median_radius,q25,q75\n"
                              "lemma1 columns: n,eps,c,empirical_prob,bound,pass\n"
                              "conditions columns: n,eps,condition,lhs,rhs,satisfied",
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--in", dest="inp", required=True, metavar="PATH", help="JSONL records")
    p.add_argument("--out", required=True, metavar="PATH", help="summary CSV")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config, args.command)
    for key in ("seed", "grid_m"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    if args.out is not None:
        cfg.output_path = args.out
    elif cfg.output_path is not None and not Path(cfg.output_path).is_absolute():
        cfg.output_path = str(Path(cfg.base_dir or ".") / cfg.output_path)
    cfg.validate()
    if cfg.output_path is None:
        raise ConfigError(f"{args.command} needs an output path (key 'output_path' or --out)")
    return cfg


def _write_json(obj, path) -> None:
    from postrate.storage import dumps_line
    Path(path).write_text(dumps_line(obj) + "\n")


def _setup_grid(cfg):
    from postrate.grid import make_grid
    return make_grid(cfg.grid_m)


def run_divergence(cfg: ExperimentConfig) -> None:
    from postrate.divergences import divergence_report
    from postrate.specs import density_from_spec
    grid = _setup_grid(cfg)
    f0 = density_from_spec(cfg.f0, grid, cfg.floor, cfg.base_dir, "f0")
    f = density_from_spec(cfg.f, grid, cfg.floor, cfg.base_dir, "f")
    Path(cfg.output_path).write_text(divergence_report(f0, f).to_json() + "\n")


def run_entropy(cfg: ExperimentConfig) -> None:
    from postrate.entropy import covering_number, hausdorff_entropy, sandwich_audit
    from postrate.specs import prior_from_spec
    grid = _setup_grid(cfg)
    prior = prior_from_spec(cfg.prior, grid, cfg.floor, cfg.base_dir)
    atoms = list(range(len(prior))) if cfg.atoms is None else cfg.atoms
    if atoms and (min(atoms) < 0 or max(atoms) >= len(prior)):
        raise ConfigError(f"key 'atoms': indices must lie in 0..{len(prior) - 1}")
    cover = covering_number(atoms, prior, cfg.delta)
    report = hausdorff_entropy(atoms, prior, cfg.delta, cfg.alpha)
    out = report.to_dict(prior)
    out["covering"] = cover.to_dict(prior)
    out["sandwich"] = sandwich_audit(report, prior, atoms) if report.optimal else None
    _write_json(out, cfg.output_path)


def run_records(cfg: ExperimentConfig) -> None:
    from postrate.ratelab import run_experiment
    records = run_experiment(cfg)
    log.info("%s: %d records in %s", cfg.experiment, len(records), cfg.output_path)


def run_report(inp, out) -> None:
    from postrate.ratelab import read_records, summarize
    from postrate.storage import jsonable
    header, rows = summarize(read_records(inp))
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in jsonable(row)])
    print(FOOTER, file=sys.stderr)


RUNNERS = {"divergence": run_divergence, "entropy": run_entropy,
           "lemma1": run_records, "conditions": run_records, "curve": run_records}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "report":
            run_report(args.inp, args.out)
        else:
            RUNNERS[args.command](_load(args))
    except ConfigError as exc:
        print(f"postrate {args.command}: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any failure maps to exit 2
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"postrate {args.command}: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
