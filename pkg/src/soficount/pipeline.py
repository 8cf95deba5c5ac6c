"""Entropy sweeps: cells over (xi, alpha, F, delta, d), then the
limsup / inf / inf / inf / sup cascade over the configured grids.

Config schema (JSON or TOML)::

    group       {"kind": "Z"} | {"kind": "Z2"} | {"kind": "free", "rank": r}
                | {"kind": "finite", "table": [[...]], "generators": [...]}
    system      {"kind": "bernoulli", "weights": [...]}
                | {"kind": "finite", "weights": [...], "perms": [[...], ...]}
    partitions  name -> {"atoms": [[cells...], ...], "window": [elements]}
                or {"kind": "points" | "trivial", "window": [...]}
    sofic       {"builder": "cyclic"|"torus"|"regular"|"random_free",
                 "d_grid": [...], "seed": u64, "rank": r}
    xi_list     [{"xi": name, "alphas": [names...]}, ...]
    F_list      [[elements...], ...]           every F contains e
    delta_grid  [...]                          strictly decreasing
    mode        "exact" | "mc" | "bounds"
    trials, seed, proposal ("kappa"|"uniform"|"labeling"), bound_eps, budget
    families    (ks-compare only) [{"name": ..., "xi_list": [...],
                 "generating": bool}, ...]

Finite-system points are 0-based; Bernoulli cells are base symbols
(0-based) or, with a window, tuples of symbols.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import sofic as sofic_mod
from .counting import (
    BudgetExceeded,
    CountResult,
    SampleStats,
    bound_summary,
    count_exact,
    default_budget,
    mc_membership,
    stirling_upper_bound,
    typical_set_lower_bound,
)
from .groups import GroupError, GroupSpec
from .homspace import HomContext
from .measure import (
    MeasureSystem,
    PartitionError,
    PartitionSpec,
    is_generating,
    join_partition,
    refines,
    shannon_entropy,
    validate_system,
)
from .serialize import ConfigError

MODES = ("exact", "mc", "bounds")
XI_KEY = "xi"


class ValidationError(ValueError):
    """Config parsed but describes an invalid experiment."""


class EmptyResult(RuntimeError):
    """Every cell was skipped."""


# config -------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    group: GroupSpec
    system: MeasureSystem
    partitions: dict[str, PartitionSpec]
    sofic: dict
    d_grid: tuple[int, ...]
    xi_list: tuple[tuple[str, tuple[str, ...]], ...]
    F_list: tuple[tuple, ...]
    delta_grid: tuple[float, ...]
    mode: str = "mc"
    trials: int = 1000
    seed: int | None = None
    proposal: str = "kappa"
    bound_eps: float = 0.05
    budget: int | None = None
    families: tuple[dict, ...] = ()
    name: str = "sweep"

    def with_overrides(self, **kw) -> SweepConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_json(self) -> dict:
        g = self.group
        return {
            "name": self.name,
            "group": g.to_json(),
            "system": self.system.to_json(),
            "partitions": {k: p.to_json(g) for k, p in self.partitions.items()},
            "sofic": dict(self.sofic, d_grid=list(self.d_grid)),
            "xi_list": [{"xi": x, "alphas": list(a)} for x, a in self.xi_list],
            "F_list": [[g.element_to_json(s) for s in F] for F in self.F_list],
            "delta_grid": list(self.delta_grid),
            "mode": self.mode,
            "trials": self.trials,
            "seed": self.seed,
            "proposal": self.proposal,
            "bound_eps": self.bound_eps,
            "budget": self.budget,
        }


def _need(obj: dict, key: str, kind=None):
    if key not in obj:
        raise ConfigError(f"missing config key {key!r}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"config key {key!r} has the wrong type")
    return val


def parse_partition(obj: dict, system: MeasureSystem, group: GroupSpec) -> PartitionSpec:
    window = obj.get("window")
    if window is not None:
        window = tuple(group.canonical(w) for w in window)
        if system.kind != "bernoulli":
            raise ConfigError("windows apply only to Bernoulli partitions")
        if window == (group.identity,):
            window = None
    kind = obj.get("kind")
    if kind == "points":
        return PartitionSpec.points(system.size, window)
    if kind == "trivial":
        return PartitionSpec.trivial(system.size, window)
    atoms = _need(obj, "atoms", list)
    return PartitionSpec.from_atoms(atoms, system.size, window)


def _xi_list(raw) -> tuple[tuple[str, tuple[str, ...]], ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("xi_list must be a nonempty list")
    out = []
    for item in raw:
        if not isinstance(item, dict) or "xi" not in item:
            raise ConfigError("xi_list entries need an 'xi' key")
        alphas = item.get("alphas", [item["xi"]])
        if not isinstance(alphas, list) or not alphas:
            raise ConfigError("'alphas' must be a nonempty list")
        out.append((str(item["xi"]), tuple(str(a) for a in alphas)))
    return tuple(out)


def parse_config(obj: dict) -> SweepConfig:
    """Shape checks raise ConfigError; see :func:`validate_config` for semantics."""
    try:
        group = GroupSpec.from_json(_need(obj, "group", dict))
        system = MeasureSystem.from_json(_need(obj, "system", dict), group)
        parts_raw = _need(obj, "partitions", dict)
        partitions = {str(k): parse_partition(v, system, group) for k, v in parts_raw.items()}
        sof = dict(_need(obj, "sofic", dict))
        d_grid = tuple(int(d) for d in _need(sof, "d_grid", list))
        sof.pop("d_grid")
        F_list = tuple(tuple(group.canonical(s) for s in F) for F in _need(obj, "F_list", list))
        delta_grid = tuple(float(x) for x in _need(obj, "delta_grid", list))
        mode = str(obj.get("mode", "mc"))
        seed = obj.get("seed")
        budget = obj.get("budget")
        families = tuple(obj.get("families", ()))
        for fam in families:
            if not isinstance(fam, dict) or "xi_list" not in fam:
                raise ConfigError("each family needs an xi_list")
            _xi_list(fam["xi_list"])
        cfg = SweepConfig(
            group=group,
            system=system,
            partitions=partitions,
            sofic=sof,
            d_grid=d_grid,
            xi_list=_xi_list(obj["xi_list"]) if "xi_list" in obj or not families else (),
            F_list=F_list,
            delta_grid=delta_grid,
            mode=mode,
            trials=int(obj.get("trials", 1000)),
            seed=None if seed is None else int(seed),
            proposal=str(obj.get("proposal", "kappa")),
            bound_eps=float(obj.get("bound_eps", 0.05)),
            budget=None if budget is None else int(float(budget)),
            families=families,
            name=str(obj.get("name", "sweep")),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, GroupError, PartitionError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    return cfg


def validate_config(cfg: SweepConfig, xi_list=None) -> None:
    problems = validate_system(cfg.system, cfg.group)
    if cfg.system.kind == "bernoulli" and cfg.system.size < 1:
        problems.append("empty Bernoulli base")
    e = cfg.group.identity
    if not cfg.d_grid or any(d < 1 for d in cfg.d_grid):
        problems.append("d_grid must hold positive sizes")
    if not cfg.F_list:
        problems.append("F_list is empty")
    for F in cfg.F_list:
        if e not in F:
            problems.append(f"F {list(F)} does not contain the identity")
        if len(set(F)) != len(F):
            problems.append(f"F {list(F)} repeats an element")
    dg = cfg.delta_grid
    if not dg:
        problems.append("delta_grid is empty")
    if any(x < 0 for x in dg):
        problems.append("deltas must be nonnegative")
    if any(a <= b for a, b in zip(dg, dg[1:])):
        problems.append("delta_grid must be strictly decreasing")
    if cfg.trials < 1:
        problems.append("trials must be positive")
    if cfg.mode == "mc" and cfg.proposal not in ("kappa", "uniform", "labeling"):
        problems.append(f"unknown proposal {cfg.proposal!r}")
    for xi, alphas in xi_list if xi_list is not None else cfg.xi_list:
        if xi not in cfg.partitions:
            problems.append(f"unknown partition {xi!r}")
            continue
        for a in alphas:
            if a not in cfg.partitions:
                problems.append(f"unknown partition {a!r}")
            elif refines(cfg.partitions[a], cfg.partitions[xi], cfg.group) is None:
                problems.append(f"alpha {a!r} does not refine xi {xi!r}")
    for name, p in cfg.partitions.items():
        try:
            cfg.system.check_partition(p)
        except PartitionError as exc:
            problems.append(f"partition {name!r}: {exc}")
    if problems:
        raise ValidationError("; ".join(problems))


def build_sofic(cfg: SweepConfig, d: int) -> sofic_mod.SoficMap:
    spec = dict(cfg.sofic)
    if spec.get("builder") == "random_free" and "seed" not in spec:
        if cfg.seed is None:
            raise ConfigError("random_free builder needs a seed")
        spec["seed"] = cfg.seed
    s = sofic_mod.build(spec, d, cfg.group)
    if s.group != cfg.group:
        raise ValidationError("sofic builder produces a different group than the config")
    return s


# cells --------------------------------------------------------------------------

@dataclass
class CellRecord:
    xi: str
    alpha: str
    F_id: str
    delta: float
    d: int
    mode: str
    value: float | None
    result: CountResult | None = None
    skipped: bool = False
    reason: str = ""

    def row(self) -> dict:
        r = self.result
        out = {
            "mode": self.mode, "d": self.d, "delta": self.delta, "F-id": self.F_id,
            "xi": self.xi, "alpha": self.alpha, "value": self.value,
        }
        if self.skipped or r is None:
            out["flags"] = "skipped:" + self.reason
            return out
        out.update(
            log_count=r.log_count,
            restriction_log_count=r.restriction_log_count.get(XI_KEY),
            rate=r.rate,
            ci_low=None if r.ci_log is None else r.ci_log[0],
            ci_high=None if r.ci_log is None else r.ci_log[1],
            flags=";".join(r.flags),
        )
        return out

    def to_json(self) -> dict:
        out = {"xi": self.xi, "alpha": self.alpha, "F_id": self.F_id, "delta": self.delta, "d": self.d,
               "mode": self.mode, "value": self.value, "skipped": self.skipped}
        if self.skipped:
            out["reason"] = self.reason
        if self.result is not None:
            out["result"] = self.result.to_json()
        return out


@dataclass
class CellGroup:
    """All deltas for one (xi, alpha, F, d); they share samples in MC mode."""

    cells: list[CellRecord]
    stats: SampleStats | None = None
    ctx: HomContext | None = None


def _per_d(x: float | None, d: int) -> float | None:
    if x is None:
        return None
    return x / d if math.isfinite(x) else x


def _attach_analytic(cfg: SweepConfig, res: CountResult, xi_part: PartitionSpec, ctx: HomContext) -> None:
    weights = cfg.system.atom_measures(xi_part)
    d, delta = res.d, res.delta
    if delta > 0:
        res.bounds.setdefault("stirling_upper", stirling_upper_bound(weights, d, delta, cfg.bound_eps))
    base = cfg.system.kind == "bernoulli" and ctx.table.alpha.window is None
    if base and 0 < delta < 0.5 and xi_part.same_as(ctx.table.alpha):
        value, flags = typical_set_lower_bound(weights, d, delta)
        res.bounds.setdefault("typical_lower", value)
        res.flags += [f"typical:{f}" for f in flags if f"typical:{f}" not in res.flags]


def run_cell_group(cfg: SweepConfig, xi_i: int, alpha_i: int, F_i: int, d: int,
                   xi_list=None, jobs: int = 1, keep_ctx: bool = False,
                   strict_budget: bool = False) -> CellGroup:
    """All deltas of one (xi, alpha, F, d). A budget refusal marks the cells
    skipped unless ``strict_budget`` is set, in which case it propagates."""
    xi_list = cfg.xi_list if xi_list is None else xi_list
    xi, alphas = xi_list[xi_i]
    alpha = alphas[alpha_i]
    F = cfg.F_list[F_i]
    F_id = f"F{F_i}"
    deltas = list(cfg.delta_grid)
    sofic = build_sofic(cfg, d)
    table = join_partition(cfg.system, cfg.partitions[alpha], F)
    ctx = HomContext.build(sofic, cfg.system, cfg.partitions[alpha], F, {XI_KEY: cfg.partitions[xi]}, table=table)
    stats = None

    def skipped(reason: str) -> CellGroup:
        return CellGroup([CellRecord(xi, alpha, F_id, dl, d, cfg.mode, None, None, True, reason) for dl in deltas])

    try:
        if cfg.mode == "exact":
            results = count_exact(ctx, deltas, cfg.budget if cfg.budget is not None else default_budget(), jobs)
        elif cfg.mode == "mc":
            if cfg.seed is None:
                raise ConfigError("mc mode needs a seed")
            results, stats = mc_membership(ctx, deltas, cfg.trials, cfg.seed, key=(xi_i, alpha_i, F_i, d),
                                           proposal=cfg.proposal)
        else:
            results = [bound_summary(ctx, dl, XI_KEY, cfg.bound_eps) for dl in deltas]
    except BudgetExceeded as exc:
        if strict_budget:
            raise
        return skipped(f"budget ({exc})")
    cells = []
    for dl, res in zip(deltas, results):
        _attach_analytic(cfg, res, cfg.partitions[xi], ctx)
        rlog = res.restriction_log_count.get(XI_KEY, res.log_count)
        cells.append(CellRecord(xi, alpha, F_id, dl, d, cfg.mode, _per_d(rlog, d), res))
    return CellGroup(cells, stats, ctx if keep_ctx else None)


def run_cell(cfg: SweepConfig, xi: str, alpha: str, F_index: int, delta: float, d: int) -> CellRecord:
    """One (xi, alpha, F, delta, d) cell."""
    xi_i = next(i for i, (x, a) in enumerate(cfg.xi_list) if x == xi and alpha in a)
    alpha_i = cfg.xi_list[xi_i][1].index(alpha)
    sub = replace(cfg, delta_grid=(float(delta),))
    return run_cell_group(sub, xi_i, alpha_i, F_index, d).cells[0]


def run_sweep(cfg: SweepConfig, xi_list=None, jobs: int = 1,
              strict_budget: bool = False) -> tuple[list[CellRecord], dict]:
    """Every cell of the config, in stable (xi, alpha, F, d, delta) order."""
    xi_list = cfg.xi_list if xi_list is None else xi_list
    jobs_list = [(xi_i, a_i, F_i, d)
                 for xi_i, (_, alphas) in enumerate(xi_list)
                 for a_i in range(len(alphas))
                 for F_i in range(len(cfg.F_list))
                 for d in cfg.d_grid]

    def work(job):
        return run_cell_group(cfg, *job, xi_list=xi_list, strict_budget=strict_budget)

    if jobs > 1 and len(jobs_list) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            groups = list(pool.map(work, jobs_list))
    else:
        groups = [work(j) for j in jobs_list]
    cells = [c for g in groups for c in g.cells]
    stats = {job: g.stats for job, g in zip(jobs_list, groups) if g.stats is not None}
    return cells, stats


# aggregation --------------------------------------------------------------------

BOUND_KEYS = ("typical_lower", "stirling_upper", "lower", "upper", "witness_lower", "window_upper", "type_class_upper")


@dataclass
class EntropyReport:
    cells: list[CellRecord]
    limsup: dict[tuple, dict]
    by_alpha: dict[tuple, float]
    by_xi: dict[str, float]
    aggregate: float
    bound_aggregates: dict[str, float]
    target: float | None
    grids: dict
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "aggregate": self.aggregate,
            "bounds": self.bound_aggregates,
            "target": self.target,
            "by_xi": self.by_xi,
            "by_alpha": [{"xi": k[0], "alpha": k[1], "value": v} for k, v in sorted(self.by_alpha.items())],
            "limsup": [
                {"xi": k[0], "alpha": k[1], "F_id": k[2], "delta": k[3], **v}
                for k, v in sorted(self.limsup.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2], -kv[0][3]))
            ],
            "grids": self.grids,
            "warnings": self.warnings,
            "complete": not self.warnings,
            "cells": [c.to_json() for c in self.cells],
        }


def tail_half(ds: Sequence[int]) -> list[int]:
    ds = sorted(set(ds))
    return ds[len(ds) - math.ceil(len(ds) / 2):]


def _inf(values):
    vals = [v for v in values if v is not None]
    return min(vals) if vals else None


def _sup(values):
    vals = [v for v in values if v is not None]
    return max(vals) if vals else None


def aggregate(cells: Sequence[CellRecord], target: float | None = None, grids: dict | None = None) -> EntropyReport:
    """limsup proxy over the top half of the d-grid, then inf over delta,
    inf over F, inf over alpha, sup over xi. Bound columns follow the same
    cascade. Skipped cells are excluded with a warning."""
    live = [c for c in cells if not c.skipped]
    warn = []
    if len(live) < len(cells):
        warn.append(f"{len(cells) - len(live)} of {len(cells)} cells skipped; aggregate covers the remaining cells")
        warnings.warn(warn[-1])
    if not live:
        raise EmptyResult("all cells were skipped")
    all_ds = sorted({c.d for c in cells})
    top = set(tail_half(all_ds))
    keys: dict[tuple, list[CellRecord]] = {}
    for c in live:
        keys.setdefault((c.xi, c.alpha, c.F_id, c.delta), []).append(c)
    limsup = {}
    for k, group in keys.items():
        tail = [c for c in group if c.d in top]
        if not tail:
            warn.append(f"cell {k} has no resolved d in the top half of the grid")
            continue
        entry = {
            "value": max(c.value for c in tail),
            "trend": {str(c.d): c.value for c in sorted(group, key=lambda c: c.d)},
        }
        for b in BOUND_KEYS:
            vals = [_per_d(c.result.bounds.get(b), c.d) for c in tail if c.result is not None]
            if vals and all(v is not None for v in vals):
                entry[b] = max(vals)
        limsup[k] = entry
    if not limsup:
        raise EmptyResult("no cell has a resolved d in the top half of the grid")

    def cascade(field_: str):
        by_f: dict[tuple, list] = {}
        for (xi, a, F, _), e in limsup.items():
            by_f.setdefault((xi, a, F), []).append(e.get(field_))
        by_F = {k: (None if any(v is None for v in vs) else min(vs)) for k, vs in by_f.items()}
        by_a: dict[tuple, list] = {}
        for (xi, a, _), v in by_F.items():
            by_a.setdefault((xi, a), []).append(v)
        alpha_level = {k: (None if any(v is None for v in vs) else min(vs)) for k, vs in by_a.items()}
        by_x: dict[str, list] = {}
        for (xi, _), v in alpha_level.items():
            by_x.setdefault(xi, []).append(v)
        xi_level = {k: (None if any(v is None for v in vs) else min(vs)) for k, vs in by_x.items()}
        vals = list(xi_level.values())
        top_v = None if any(v is None for v in vals) else max(vals)
        return alpha_level, xi_level, top_v

    by_alpha, by_xi, agg = cascade("value")
    bounds = {}
    for b in BOUND_KEYS:
        _, _, v = cascade(b)
        if v is not None:
            bounds[b] = v
    return EntropyReport(list(cells), limsup, by_alpha, by_xi, agg, bounds, target, grids or {}, warn)


def bernoulli_reference(nu: Sequence[float]) -> float:
    return shannon_entropy(nu)


def target_reference(system: MeasureSystem) -> float:
    """H(nu) for Bernoulli shifts; 0 for actions on a finite set."""
    return bernoulli_reference(system.weights) if system.kind == "bernoulli" else 0.0


def grids_of(cfg: SweepConfig, xi_list=None) -> dict:
    g = cfg.group
    return {
        "d_grid": list(cfg.d_grid),
        "delta_grid": list(cfg.delta_grid),
        "F_list": {f"F{i}": [g.element_to_json(s) for s in F] for i, F in enumerate(cfg.F_list)},
        "xi_list": [{"xi": x, "alphas": list(a)} for x, a in (cfg.xi_list if xi_list is None else xi_list)],
        "sofic": cfg.sofic,
        "mode": cfg.mode,
    }


def estimate(cfg: SweepConfig, jobs: int = 1, xi_list=None) -> EntropyReport:
    validate_config(cfg, xi_list)
    cells, _ = run_sweep(cfg, xi_list, jobs)
    return aggregate(cells, target_reference(cfg.system), grids_of(cfg, xi_list))


# Kolmogorov-Sinai comparison ----------------------------------------------------

def family_generates(cfg: SweepConfig, family: dict) -> bool | None:
    """Whether the family's xi partitions generate; None if undecidable here."""
    names = [x for x, _ in _xi_list(family["xi_list"])]
    if cfg.system.kind == "finite":
        # The join of the family generates iff each translate-orbit refinement separates points.
        labels = np.zeros(cfg.system.size, dtype=np.int64)
        for nm in names:
            part = cfg.partitions[nm]
            _, labels = np.unique(np.stack([labels, part.labels], axis=1), axis=0, return_inverse=True)
            labels = labels.ravel()
        return is_generating(cfg.system, PartitionSpec(labels, cfg.system.size))
    base = PartitionSpec.points(cfg.system.size)
    if any(refines(cfg.partitions[nm], base, cfg.group) is not None for nm in names):
        return True
    return None


@dataclass
class Comparison:
    names: tuple[str, str]
    reports: tuple[EntropyReport, EntropyReport]

    @property
    def difference(self) -> float:
        a, b = (r.aggregate for r in self.reports)
        if a == b:
            return 0.0
        return abs(a - b)

    def to_json(self) -> dict:
        return {
            "families": list(self.names),
            "aggregates": [r.aggregate for r in self.reports],
            "difference": self.difference,
            "target": self.reports[0].target,
            "reports": {n: r.to_json() for n, r in zip(self.names, self.reports)},
        }


def ks_compare(cfg: SweepConfig, jobs: int = 1) -> Comparison:
    if len(cfg.families) != 2:
        raise ValidationError("ks-compare needs exactly two families")
    reports = []
    names = []
    for i, fam in enumerate(cfg.families):
        name = str(fam.get("name", f"family{i}"))
        gen = family_generates(cfg, fam)
        if gen is False:
            raise ValidationError(f"family {name!r} does not generate (its orbit does not separate points)")
        if gen is None and not fam.get("generating", False):
            raise ValidationError(f"family {name!r}: generation cannot be checked; mark it generating")
        xi_list = _xi_list(fam["xi_list"])
        sub = cfg
        if "F_list" in fam:
            sub = replace(sub, F_list=tuple(tuple(cfg.group.canonical(s) for s in F) for F in fam["F_list"]))
        if "delta_grid" in fam:
            sub = replace(sub, delta_grid=tuple(float(x) for x in fam["delta_grid"]))
        reports.append(estimate(sub, jobs, xi_list))
        names.append(name)
    return Comparison((names[0], names[1]), (reports[0], reports[1]))
