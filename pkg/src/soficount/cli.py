"""Command-line entry point: ``soficount <subcommand> [options]``.

Every run that gets past config parsing writes ``manifest.json`` into the
output directory before any result file. Exit codes: 0 success, 2 config,
3 validation, 4 budget, 5 empty result.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .counting import BudgetExceeded, default_budget
from .groups import GroupError, GroupSpec
from .measure import PartitionError
from .pipeline import (
    MODES,
    EmptyResult,
    ValidationError,
    aggregate,
    grids_of,
    ks_compare,
    parse_config,
    run_cell_group,
    run_sweep,
    target_reference,
    validate_config,
)
from .serialize import CSV_COLUMNS, ConfigError, dumps, load_config, write_csv, write_json
from .sofic import build as build_sofic_map
from .sofic import defect_report, good_set
from .verify import SUITES, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_BUDGET, EXIT_EMPTY = 0, 2, 3, 4, 5
U64 = 1 << 64

# frozen columns first, extras appended
CELL_COLUMNS = CSV_COLUMNS + ("xi", "alpha", "value")
DEFECT_COLUMNS = ("d", "pair", "mult_defect", "free_defect")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < U64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _jobs(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("--jobs must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON or TOML config")
    common.add_argument("--seed", type=_seed, metavar="U64", help="seed; overrides the config seed")
    common.add_argument("--jobs", type=_jobs, default=1, metavar="N", help="worker threads (output does not depend on it)")
    common.add_argument("--mode", choices=MODES, help="override the config mode")
    common.add_argument("--out", default="out", metavar="DIR", help="output directory (default: out)")

    p = argparse.ArgumentParser(prog="soficount", description="Count finite models of measure-preserving actions.")
    p.add_argument("--version", action="version", version=f"soficount {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sofic-check", parents=[common], help="defects of a sofic builder over a d-grid")
    sub.add_parser("count", parents=[common], help="one cell: exact, Monte Carlo or bounds")
    sub.add_parser("estimate", parents=[common], help="full sweep and entropy aggregate")
    sub.add_parser("ks-compare", parents=[common], help="aggregates for two generating families")
    v = sub.add_parser("verify", parents=[common], help="run an invariant suite")
    v.add_argument("suite", help="one of: " + ", ".join(SUITES))
    v.add_argument("--quick", action="store_true", help="smaller instances where the suite supports it")
    return p


def _manifest(args, config_hash: str | None, seed: int | None, budget: int | None) -> dict:
    return {
        "subcommand": args.command,
        "config": None if args.config is None else str(Path(args.config)),
        "config_sha256": config_hash,
        "seed": seed,
        "out": str(Path(args.out)),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "budget": budget,
    }


def _start(args, config_hash: str | None, seed: int | None, budget: int | None = None) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "manifest.json", _manifest(args, config_hash, seed, budget))
    return out


def _load(args) -> tuple[dict, str]:
    if args.config is None:
        raise CliError(EXIT_CONFIG, "--config is required")
    return load_config(args.config)


def _sweep(args):
    raw, digest = _load(args)
    cfg = parse_config(raw)
    cfg = cfg.with_overrides(mode=args.mode, seed=args.seed)
    if cfg.mode == "mc" and cfg.seed is None:
        raise CliError(EXIT_CONFIG, "mc mode is stochastic: pass --seed (or set seed in the config)")
    if os.environ.get("SOFICOUNT_BUDGET") or cfg.budget is None:
        cfg = cfg.with_overrides(budget=default_budget())
    return cfg, digest


# subcommands --------------------------------------------------------------------

def _defect_config(raw: dict, seed: int | None):
    try:
        group = GroupSpec.from_json(raw["group"])
        spec = dict(raw["sofic"])
        d_grid = [int(d) for d in spec.pop("d_grid")]
        if "F" in raw:
            F = [group.canonical(s) for s in raw["F"]]
        else:
            F = group.ball(int(raw.get("radius", 1)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed sofic-check config: {exc}") from exc
    if seed is not None:
        spec["seed"] = seed
    if spec.get("builder") == "random_free" and "seed" not in spec:
        raise CliError(EXIT_CONFIG, "random_free builder is stochastic: pass --seed (or set sofic.seed)")
    return group, spec, d_grid, F


def cmd_sofic_check(args) -> int:
    raw, digest = _load(args)
    group, spec, d_grid, F = _defect_config(raw, args.seed)
    out = _start(args, digest, spec.get("seed"))
    if not d_grid or any(d < 1 for d in d_grid) or not F:
        raise ValidationError("sofic-check needs positive sizes in d_grid and a nonempty F")
    rows, summary = [], []
    for d in d_grid:
        try:
            sofic = build_sofic_map(spec, d, group)
        except (ValueError, GroupError) as exc:
            raise ValidationError(str(exc)) from exc
        rep = defect_report(sofic, F)
        for (s, t), m in rep.mult.items():
            pair = ",".join(json.dumps(group.element_to_json(x), separators=(",", ":")) for x in (s, t))
            rows.append({"d": d, "pair": pair, "mult_defect": m, "free_defect": rep.free.get((s, t))})
        summary.append({
            "d": d,
            "max_mult_defect": rep.max_mult(),
            "max_free_defect": rep.max_free(),
            "total_defect": rep.total(),
            "good_fraction": len(good_set(sofic, F)) / d,
        })
    write_csv(out / "defects.csv", rows, DEFECT_COLUMNS)
    write_json(out / "summary.json", {
        "group": group.to_json(),
        "sofic": spec,
        "F": [group.element_to_json(s) for s in F],
        "by_d": summary,
    })
    return EXIT_OK


def cmd_count(args) -> int:
    cfg, digest = _sweep(args)
    out = _start(args, digest, cfg.seed, cfg.budget)
    validate_config(cfg)
    shape = (len(cfg.xi_list), len(cfg.xi_list[0][1]), len(cfg.F_list), len(cfg.d_grid), len(cfg.delta_grid))
    if shape != (1, 1, 1, 1, 1):
        raise ValidationError("count takes a single cell: one xi, one alpha, one F, one d and one delta")
    group = run_cell_group(cfg, 0, 0, 0, cfg.d_grid[0], jobs=args.jobs, strict_budget=True)
    cell = group.cells[0]
    payload = cell.to_json()
    payload.update(payload.pop("result", {}))
    if group.stats is not None:
        payload["sample_stats"] = group.stats.to_json()
    write_json(out / "count.json", payload)
    write_csv(out / "cells.csv", [cell.row()], CELL_COLUMNS)
    return EXIT_OK


def _report(cfg, cells):
    return aggregate(cells, target_reference(cfg.system), grids_of(cfg))


def cmd_estimate(args) -> int:
    cfg, digest = _sweep(args)
    out = _start(args, digest, cfg.seed, cfg.budget)
    validate_config(cfg)
    cells, _ = run_sweep(cfg, jobs=args.jobs)
    write_csv(out / "cells.csv", [c.row() for c in cells], CELL_COLUMNS)
    report = _report(cfg, cells)
    write_json(out / "report.json", report.to_json())
    return EXIT_OK


def cmd_ks_compare(args) -> int:
    cfg, digest = _sweep(args)
    out = _start(args, digest, cfg.seed, cfg.budget)
    comp = ks_compare(cfg, jobs=args.jobs)
    rows = []
    for name, rep in zip(comp.names, comp.reports):
        rows += [dict(c.row(), family=name) for c in rep.cells]
    write_csv(out / "cells.csv", rows, CELL_COLUMNS + ("family",))
    write_json(out / "comparison.json", comp.to_json())
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise CliError(EXIT_CONFIG, f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    if args.seed is None:
        raise CliError(EXIT_CONFIG, "verify needs --seed")
    digest = None
    if args.config is not None:
        _, digest = load_config(args.config)
    out = _start(args, digest, args.seed)
    checks = run_suite(args.suite, seed=args.seed, quick=args.quick)
    passed = all(c.passed for c in checks)
    result = {"suite": args.suite, "seed": args.seed, "passed": passed, "checks": [c.to_json() for c in checks]}
    write_json(out / "verify.json", result)
    sys.stdout.write(dumps(result))
    return EXIT_OK if passed else 1


COMMANDS = {
    "sofic-check": cmd_sofic_check,
    "count": cmd_count,
    "estimate": cmd_estimate,
    "ks-compare": cmd_ks_compare,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        msg, code = str(exc), exc.code
    except ConfigError as exc:
        msg, code = f"config error: {exc}", EXIT_CONFIG
    except (ValidationError, GroupError, PartitionError) as exc:
        msg, code = f"validation error: {exc}", EXIT_VALIDATION
    except BudgetExceeded as exc:
        msg, code = f"budget exceeded: {exc} (set SOFICOUNT_BUDGET or the config budget to raise it)", EXIT_BUDGET
    except EmptyResult as exc:
        msg, code = f"empty result: {exc}", EXIT_EMPTY
    print(f"soficount {args.command}: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
