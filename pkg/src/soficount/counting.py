"""Exact, Monte Carlo and analytic counts of Hom sets.

Log-counts are natural logs; ``-inf`` marks an empty set (or, in Monte Carlo
mode, no valid sample).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any, Sequence

import numpy as np

from . import kernels
from .homspace import ALPHA, HomContext, HomLabeling, is_member, membership, restrict
from .measure import PartitionSpec, _entropy, conditional_entropy, shannon_entropy
from .rng import stream
from .sofic import good_set

NEG_INF = float("-inf")
DEFAULT_BUDGET = 10**8
CHUNK = 1 << 18
MAX_TYPES = 5_000_000
EXACT_TERMS = 20_000
Z95 = NormalDist().inv_cdf(0.975)


class BudgetExceeded(RuntimeError):
    def __init__(self, needed: int, budget: int, what: str = "labelings"):
        super().__init__(f"{what}: {needed} evaluations needed, enumeration budget is {budget}")
        self.needed = needed
        self.budget = budget


def default_budget() -> int:
    raw = os.environ.get("SOFICOUNT_BUDGET")
    if raw:
        return int(float(raw))
    return DEFAULT_BUDGET


def safe_log(x: int | float) -> float:
    return math.log(x) if x > 0 else NEG_INF


@dataclass
class CountResult:
    mode: str
    d: int
    delta: float
    log_count: float
    restriction_log_count: dict[str, float] = field(default_factory=dict)
    count: int | None = None
    restriction_counts: dict[str, int] = field(default_factory=dict)
    trials: int = 0
    valid: int = 0
    rate: float | None = None
    ci_rate: tuple[float, float] | None = None
    ci_log: tuple[float, float] | None = None
    bounds: dict[str, float] = field(default_factory=dict)
    proposal: str | None = None
    flags: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        out = {
            "mode": self.mode,
            "d": self.d,
            "delta": self.delta,
            "log_count": self.log_count,
            "restriction_log_count": dict(self.restriction_log_count),
            "flags": list(self.flags),
            "notes": list(self.notes),
        }
        if self.count is not None:
            out["count"] = str(self.count)
            out["restriction_counts"] = {k: str(v) for k, v in self.restriction_counts.items()}
        if self.mode == "mc":
            out.update(trials=self.trials, valid=self.valid, rate=self.rate, proposal=self.proposal,
                       ci_rate=list(self.ci_rate), ci_log=list(self.ci_log))
        if self.bounds:
            out["bounds"] = dict(self.bounds)
        return out


# exact enumeration --------------------------------------------------------------

def _fingerprint_codes(labels: np.ndarray, fpmap: np.ndarray, q: int) -> np.ndarray:
    fp = fpmap[labels]
    powers = np.int64(q) ** np.arange(labels.shape[1], dtype=np.int64)
    return fp @ powers


def _scan_chunk(ctx: HomContext, start: int, count: int, deltas: Sequence[float]):
    t = ctx.table
    max_mm, meas = kernels.enumerate_defects(t.m, ctx.d, start, count, ctx.inv, t.coord, t.e_pos, t.measures)
    return [start + np.flatnonzero(membership(max_mm, meas, ctx.d, dl)) for dl in deltas]


def enumerate_valid(ctx: HomContext, deltas: Sequence[float], budget: int | None = None, jobs: int = 1) -> list[np.ndarray]:
    """Indices (little-endian labeling codes) of all members, one array per delta."""
    budget = default_budget() if budget is None else budget
    total = ctx.m ** ctx.d
    if total > budget:
        raise BudgetExceeded(total, budget)
    starts = list(range(0, total, CHUNK))
    work = [(s, min(CHUNK, total - s)) for s in starts]
    if jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(lambda w: _scan_chunk(ctx, w[0], w[1], deltas), work))
    else:
        parts = [_scan_chunk(ctx, s, c, deltas) for s, c in work]
    return [np.concatenate([p[i] for p in parts]) if parts else np.zeros(0, np.int64) for i in range(len(deltas))]


def decode_labels(ctx: HomContext, indices: np.ndarray) -> np.ndarray:
    return kernels.decode(np.asarray(indices, dtype=np.int64), ctx.m, ctx.d)


def _exact_result(ctx: HomContext, delta: float, idx: np.ndarray) -> CountResult:
    rcounts = {}
    labels = decode_labels(ctx, idx) if idx.size else np.zeros((0, ctx.d), dtype=np.int64)
    for name in ctx.xi:
        if idx.size == 0:
            rcounts[name] = 0
        elif name == ALPHA and ctx.F == (ctx.sofic.group.identity,):
            rcounts[name] = int(idx.size)
        else:
            codes = _fingerprint_codes(labels, ctx.fingerprint_map(name), ctx.n_xi(name))
            rcounts[name] = int(np.unique(codes).size)
    n = int(idx.size)
    return CountResult("exact", ctx.d, float(delta), safe_log(n), {k: safe_log(v) for k, v in rcounts.items()},
                       count=n, restriction_counts=rcounts, flags=["enumerated"])


def enumerate_homs(ctx: HomContext, delta: float, budget: int | None = None, jobs: int = 1,
                   keep_models: bool = True) -> tuple[CountResult, list[HomLabeling]]:
    """Exhaustive |Hom| and |Hom|_xi for every registered xi, plus the members."""
    idx = enumerate_valid(ctx, [delta], budget, jobs)[0]
    res = _exact_result(ctx, delta, idx)
    models = [HomLabeling(ctx.d, row) for row in decode_labels(ctx, idx)] if keep_models and idx.size else []
    return res, models


def enumerate_multi(ctx: HomContext, deltas: Sequence[float], budget: int | None = None, jobs: int = 1) -> list[CountResult]:
    return [_exact_result(ctx, dl, idx) for dl, idx in zip(deltas, enumerate_valid(ctx, deltas, budget, jobs))]


# exact counting by type classes (F = {e}) ------------------------------------------

def compositions(d: int, m: int, limit: int = MAX_TYPES) -> np.ndarray:
    """All nonnegative integer vectors of length m summing to d, lexicographic."""
    total = math.comb(d + m - 1, m - 1)
    if total > limit:
        raise BudgetExceeded(total, limit, "type classes")
    rows = np.zeros((1, 0), dtype=np.int64)
    sums = np.zeros(1, dtype=np.int64)
    for _ in range(m - 1):
        # Append every value 0..d-sum to each partial row.
        reps = d - sums + 1
        starts = np.repeat(np.cumsum(reps) - reps, reps)
        col = np.arange(int(reps.sum()), dtype=np.int64) - starts
        rows = np.column_stack([np.repeat(rows, reps, axis=0), col])
        sums = np.repeat(sums, reps) + col
    return np.column_stack([rows, d - sums])


def multinomial(d: int, parts: Sequence[int]) -> int:
    out, left = 1, d
    for p in parts:
        out *= math.comb(left, int(p))
        left -= int(p)
    return out


def sum_multinomials(d: int, types: np.ndarray, exact_limit: int = EXACT_TERMS) -> tuple[int | None, float]:
    """Sum of d!/prod(t!) over the rows of ``types``: (exact integer or None, log)."""
    if types.shape[0] == 0:
        return 0, NEG_INF
    if types.shape[0] <= exact_limit:
        fact = [1] * (d + 1)
        for i in range(2, d + 1):
            fact[i] = fact[i - 1] * i
        total = 0
        for row in types.tolist():
            den = 1
            for v in row:
                den *= fact[v]
            total += fact[d] // den
        return total, math.log(total)
    lg = np.vectorize(math.lgamma, otypes=[float])
    logs = math.lgamma(d + 1) - lg(types + 1.0).sum(axis=1)
    top = logs.max()
    return None, float(top + math.log(np.exp(logs - top).sum()))


def _type_measure_defect(types: np.ndarray, mu: np.ndarray, d: int) -> np.ndarray:
    # Same accumulation order as the kernels, so boundary cases agree exactly.
    meas = np.zeros(types.shape[0])
    for a in range(types.shape[1]):
        meas += np.abs(types[:, a] / d - mu[a])
    return meas


def count_types(ctx: HomContext, deltas: Sequence[float], limit: int = MAX_TYPES) -> list[CountResult]:
    """Exact |Hom| and |Hom|_xi when F = {e}.

    Then condition (i) is vacuous and membership depends only on the label
    counts, so |Hom| is a sum of multinomials over admissible count vectors
    and |Hom|_xi sums multinomials over the xi-count vectors that have an
    admissible refinement.
    """
    if ctx.F != (ctx.sofic.group.identity,):
        raise ValueError("type-class counting needs F = {e}")
    d, mu = ctx.d, ctx.table.measures
    types = compositions(d, ctx.m, limit)
    meas = _type_measure_defect(types, mu, d)
    out = []
    for delta in deltas:
        ok = meas < delta
        counts: dict[str, int] = {}
        logs: dict[str, float] = {}
        flags = ["type-classes"]
        for name in ctx.xi:
            if name == ALPHA:
                xt = types[ok]
            else:
                onehot = np.zeros((ctx.m, ctx.n_xi(name)), dtype=np.int64)
                onehot[np.arange(ctx.m), ctx.coarse[name]] = 1
                xt = np.unique(types[ok] @ onehot, axis=0) if ok.any() else np.zeros((0, ctx.n_xi(name)), np.int64)
            exact, logs[name] = sum_multinomials(d, xt)
            if exact is None:
                flags.append(f"lgamma-sum:{name}")
            else:
                counts[name] = exact
        out.append(CountResult("exact", d, float(delta), logs[ALPHA], logs, count=counts.get(ALPHA),
                               restriction_counts=counts, flags=flags))
    return out


def count_exact(ctx: HomContext, deltas: Sequence[float], budget: int | None = None, jobs: int = 1) -> list[CountResult]:
    """Exact counts, by type classes when F = {e}, else by enumeration."""
    budget = default_budget() if budget is None else budget
    if ctx.F == (ctx.sofic.group.identity,):
        return count_types(ctx, deltas, limit=min(budget, MAX_TYPES))
    return enumerate_multi(ctx, deltas, budget, jobs)


# Monte Carlo -----------------------------------------------------------------

def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Continuity-corrected Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    denom = 2 * (n + z * z)
    if k == 0:
        lo = 0.0
    else:
        lo = (2 * n * p + z * z - 1 - z * math.sqrt(z * z - 2 - 1 / n + 4 * p * (n * (1 - p) + 1))) / denom
    if k == n:
        hi = 1.0
    else:
        hi = (2 * n * p + z * z + 1 + z * math.sqrt(z * z + 2 - 1 / n + 4 * p * (n * (1 - p) - 1))) / denom
    return max(0.0, lo), min(1.0, hi)


def _cdf(weights: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(np.asarray(weights, dtype=float))
    cdf[-1] = 1.0
    cdf[np.asarray(weights) == 0] = np.nan
    return np.fmax.accumulate(np.nan_to_num(cdf, nan=0.0))


def _draw(rng: np.random.Generator, cdf: np.ndarray, d: int) -> np.ndarray:
    return np.searchsorted(cdf, rng.random(d), side="right").astype(np.int64)


def sample_gamma(kappa: Sequence[float], d: int, seed: int, stream_index: int | Sequence[int] = 0) -> np.ndarray:
    """i.i.d. draws from kappa (inverse-CDF on uniform doubles) for one stream."""
    key = (stream_index,) if isinstance(stream_index, (int, np.integer)) else tuple(stream_index)
    kappa = np.asarray(kappa, dtype=float)
    shannon_entropy(kappa)  # validates
    return _draw(stream(seed, *key), _cdf(kappa), d)


def gamma_to_hom(gamma: Sequence[int], ctx: HomContext) -> HomLabeling:
    """phi_gamma: point k goes to the atom f with f(s) = gamma(sigma_s^{-1} k)."""
    g = np.asarray(gamma, dtype=np.int64)
    if g.shape != (ctx.d,):
        raise ValueError("gamma must have length d")
    if g.size and (g.min() < 0 or g.max() >= ctx.table.n):
        raise ValueError("gamma symbol outside alpha")
    return HomLabeling(ctx.d, kernels.gamma_labels(g[None, :], ctx.inv, ctx.table.n)[0])


@dataclass
class SampleStats:
    """Occupancies Z_f = |V ∩ Q_{gamma,f}| across samples."""

    d: int
    F_size: int
    z: np.ndarray
    expected: np.ndarray
    good_size: int

    @property
    def samples(self) -> int:
        return int(self.z.shape[0])

    @property
    def mean(self) -> np.ndarray:
        return self.z.mean(axis=0)

    @property
    def variance(self) -> np.ndarray:
        return self.z.var(axis=0, ddof=1) if self.samples > 1 else np.zeros(self.z.shape[1])

    def variance_bound(self) -> float:
        return float(self.d * self.F_size**2)

    def tail_frequency(self, t: float) -> np.ndarray:
        """Fraction of samples with |Z_f/d - E(Z_f)/d| > t, per f."""
        dev = np.abs(self.z / self.d - self.expected[None, :] / self.d)
        return (dev > t).mean(axis=0)

    def chebyshev_bound(self, t: float) -> float:
        return self.F_size**2 / (self.d * t * t)

    def to_json(self) -> dict[str, Any]:
        return {
            "d": self.d, "F_size": self.F_size, "samples": self.samples, "good_size": self.good_size,
            "mean": self.mean.tolist(), "variance": self.variance.tolist(), "expected": self.expected.tolist(),
            "variance_bound": self.variance_bound(),
        }


PROPOSALS = ("kappa", "uniform", "labeling")


def _mc_sampler(ctx: HomContext, proposal: str):
    """Return ``(draw, via_gamma, lift)``; ``lift`` maps a drawn base
    sequence to gamma and is only set for windowed Bernoulli alpha."""
    t = ctx.table
    system = ctx.system
    if proposal == "labeling":
        return lambda rng: rng.integers(0, t.m, ctx.d, dtype=np.int64), False, None
    if proposal == "uniform":
        n = t.n
        return lambda rng: rng.integers(0, n, ctx.d, dtype=np.int64), True, None
    if proposal != "kappa":
        raise ValueError(f"unknown proposal {proposal!r}")
    alpha = t.alpha
    if system.kind == "bernoulli" and alpha.window is not None:
        # Draw base symbols and read the alpha cylinder seen from each point.
        K = alpha.window
        inv = np.stack([ctx.sofic.evaluate(s).inverse.images for s in K])
        cdf = _cdf(system.weights)
        shape = (system.size,) * len(K)

        def lift(y):
            return alpha.labels[np.ravel_multi_index(tuple(y[inv]), shape)]

        return lambda rng: _draw(rng, cdf, ctx.d), True, lift
    cdf = _cdf(system.atom_measures(alpha))
    return lambda rng: _draw(rng, cdf, ctx.d), True, None


def window_coordinate(alpha: PartitionSpec, n: int) -> int | None:
    """Position of a window coordinate that every alpha atom pins down.

    If one exists, y -> phi_gamma(y) is injective (the labels give y back up
    to a bijection of the points), so counting valid y counts models.
    """
    k = len(alpha.window)
    coords = np.array(np.unravel_index(np.arange(n**k), (n,) * k))
    labels = np.asarray(alpha.labels)
    for c in range(k):
        pairs = np.unique(np.stack([labels, coords[c]]), axis=1)
        if pairs.shape[1] == np.unique(labels).size:
            return c
    return None


def _log_prob(weights: np.ndarray, rows: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return logw[rows].sum(axis=1)


def mc_membership(
    ctx: HomContext,
    deltas: Sequence[float] | float,
    trials: int,
    seed: int,
    key: Sequence[int] = (),
    proposal: str = "kappa",
    batch: int = 128,
    jobs: int = 1,
    track_stats: bool = True,
) -> tuple[list[CountResult], SampleStats | None]:
    """Sample labelings, test membership for each delta, estimate counts.

    Trial ``t`` draws from stream ``(seed, *key, t)``, so results do not
    depend on batching or ``jobs``, and all deltas share the same samples.

    Proposals: ``kappa`` draws gamma from the alpha-atom measures and maps it
    through phi_gamma; ``uniform`` draws gamma uniformly; ``labeling`` draws
    table labelings uniformly (and so estimates the full |Hom|).
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    deltas = [float(deltas)] if np.isscalar(deltas) else [float(x) for x in deltas]
    t = ctx.table
    d = ctx.d
    draw, via_gamma, lift = _mc_sampler(ctx, proposal)
    bern_kappa = proposal == "kappa" and ctx.system.kind == "bernoulli"
    base_kappa = bern_kappa and t.alpha.window is None
    # windowed alpha: the sample is a base sequence y, counted when injective
    window_ok = bern_kappa and lift is not None and window_coordinate(t.alpha, ctx.system.size) is not None
    if base_kappa:
        kappa = ctx.system.atom_measures(t.alpha)
    elif window_ok:
        kappa = np.asarray(ctx.system.weights, dtype=float)
    else:
        kappa = None
    H = _entropy(kappa) if kappa is not None else 0.0
    uniform_kappa = kappa is not None and np.allclose(kappa, kappa[0], rtol=0, atol=1e-15)
    track = track_stats and base_kappa and t.m <= 4096
    V = good_set(ctx.sofic, ctx.F) if track else None

    def run(rng_range):
        lo, hi = rng_range
        rows = np.stack([draw(stream(seed, *key, i)) for i in range(lo, hi)])
        gam = np.stack([lift(y) for y in rows]) if lift is not None else rows
        labels = kernels.gamma_labels(gam, ctx.inv, t.n) if via_gamma else gam
        max_mm, meas = kernels.labeling_defects(labels, ctx.inv, t.coord, t.e_pos, t.measures)
        ok = np.stack([membership(max_mm, meas, d, dl) for dl in deltas])
        logp = _log_prob(kappa, rows) if kappa is not None and not uniform_kappa else None
        z = None
        if track:
            lv = labels[:, V] + (t.m * np.arange(hi - lo, dtype=np.int64))[:, None]
            z = np.bincount(lv.ravel(), minlength=(hi - lo) * t.m).reshape(hi - lo, t.m)
        return ok, logp, z, labels

    ranges = [(i, min(i + batch, trials)) for i in range(0, trials, batch)]
    if jobs > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(run, ranges))
    else:
        parts = [run(r) for r in ranges]

    ok = np.concatenate([p[0] for p in parts], axis=1)
    logp = np.concatenate([p[1] for p in parts]) if parts[0][1] is not None else None
    stats = None
    if track:
        z = np.concatenate([p[2] for p in parts])
        stats = SampleStats(d, len(ctx.F), z, len(V) * t.measures, int(len(V)))

    results = []
    for j, delta in enumerate(deltas):
        valid = ok[j]
        k = int(valid.sum())
        rate = k / trials
        lo, hi = wilson_interval(k, trials)
        flags = [f"proposal:{proposal}"]
        notes = []
        if proposal == "labeling":
            scale = d * math.log(t.m)
            est, ci = scale + safe_log(rate), (scale + safe_log(lo), scale + safe_log(hi))
            flags.append("full-hom")
        elif proposal == "uniform" or uniform_kappa:
            scale = d * math.log(t.n if proposal == "uniform" else kappa.size)
            est, ci = scale + safe_log(rate), (scale + safe_log(lo), scale + safe_log(hi))
            flags.append("subclass")
        elif logp is not None:
            # Typical gammas have kappa^d(gamma) <= exp(-d(H - delta)), so
            # #valid typical gammas >= P(valid and typical) exp(d(H - delta)).
            typical = logp <= -d * (H - delta)
            kt = int((valid & typical).sum())
            plo, phi_ = wilson_interval(kt, trials)
            scale = d * (H - delta)
            est, ci = scale + safe_log(kt / trials), (scale + safe_log(plo), scale + safe_log(phi_))
            flags += ["subclass", "typical-lower-estimate"]
        else:
            est, ci = NEG_INF, (NEG_INF, NEG_INF)
            flags.append("rate-only")
            notes.append("no count scale for this proposal; only the validity rate is reported")
        if window_ok:
            flags.append("window-sequences")
        if k == 0:
            notes.append("no valid sample")
        res = CountResult("mc", d, delta, est, trials=trials, valid=k, rate=rate, ci_rate=(lo, hi), ci_log=ci,
                          proposal=proposal, flags=flags, notes=notes)
        results.append(res)

    # Restriction counts: the alpha restriction of phi_gamma is gamma itself,
    # so the subclass estimate carries over; for coarser xi, distinct
    # fingerprints and the largest possible fibre give lower estimates.
    all_labels = np.concatenate([p[3] for p in parts])
    for j, res in enumerate(results):
        valid_rows = all_labels[ok[j]]
        for name in ctx.xi:
            if valid_rows.shape[0] == 0:
                res.restriction_log_count[name] = NEG_INF
                continue
            distinct = np.unique(ctx.fingerprint_map(name)[valid_rows], axis=0).shape[0]
            same = name == ALPHA or _is_bijection(ctx.coarse[name])
            if same and proposal != "labeling":
                res.restriction_log_count[name] = res.log_count
                continue
            value = math.log(distinct)
            if name != ALPHA and proposal != "labeling" and res.log_count > NEG_INF:
                fib = max_fiber_log(ctx, name, res.delta)
                if fib is not None:
                    value = max(value, res.log_count - fib)
            res.restriction_log_count[name] = value
            res.restriction_counts[name] = distinct
    return results, stats


def _is_bijection(cmap: np.ndarray) -> bool:
    return np.unique(cmap).size == cmap.size


def max_fiber_log(ctx: HomContext, xi: str, delta: float, limit: int = MAX_TYPES) -> float | None:
    """log of the largest number of alpha-colourings refining one xi-colouring
    whose alpha counts satisfy the measure condition; None if too many types."""
    mu_a = ctx.system.atom_measures(ctx.table.alpha)
    cmap = ctx.coarse[xi]
    n = mu_a.shape[0]
    try:
        types = compositions(ctx.d, n, limit)
    except BudgetExceeded:
        return None
    ok = _type_measure_defect(types, mu_a, ctx.d) < delta
    if not ok.any():
        return None
    tt = types[ok].astype(float)
    lg = np.vectorize(math.lgamma)
    per_atom = lg(tt + 1.0)
    xi_tot = np.zeros((tt.shape[0], ctx.n_xi(xi)))
    for a in range(n):
        xi_tot[:, cmap[a]] += tt[:, a]
    logs = lg(xi_tot + 1.0).sum(axis=1) - per_atom.sum(axis=1)
    return float(logs.max()) + 1e-9


# analytic bounds --------------------------------------------------------------

def typical_set_lower_bound(kappa: Sequence[float], d: int, delta: float, floor: bool = True) -> tuple[float, list[str]]:
    """log(1 - 2 delta) + d (H(kappa) - delta), the lower bound for the phi_gamma
    subclass; asymptotic (sigma good and d large). Negative values are
    floored at 0 when ``floor`` since a constant labeling then counts."""
    if not 0 < delta < 0.5:
        raise ValueError("typical-set bound needs 0 < delta < 1/2")
    value = math.log(1 - 2 * delta) + d * (shannon_entropy(kappa) - delta)
    flags = ["asymptotic"]
    if floor and value < 0:
        value = 0.0
        flags.append("floored")
    return value, flags


def stirling_upper_bound(xi_weights: Sequence[float], d: int, delta: float, eps: float) -> float:
    """n log(2 delta d) + d (1 + eps)(H + eps), n = |xi|; valid for large d."""
    n = len(xi_weights)
    if delta <= 0 or eps <= 0:
        raise ValueError("delta and eps must be positive")
    return n * math.log(2 * delta * d) + d * (1 + eps) * (shannon_entropy(xi_weights) + eps)


def conditional_extension_bound(system, alpha: PartitionSpec, xi: PartitionSpec, d: int, delta: float, eps: float) -> float:
    """m log(2 delta d) + d (1 + eps)(H(alpha|xi) + delta + eps), m = |xi|."""
    h = conditional_entropy(system, alpha, xi)
    return xi.n_atoms * math.log(2 * delta * d) + d * (1 + eps) * (h + delta + eps)


def ball_count_bound(d: int, eps: float, xi_size: int) -> float:
    """|xi| log C(d, floor(eps d))."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return xi_size * math.log(math.comb(d, math.floor(eps * d)))


def _log_sum(logs: list[float]) -> float:
    top = max(logs)
    if top == NEG_INF:
        return NEG_INF
    return top + math.log(sum(math.exp(v - top) for v in logs))


def cyclic_model_shifts(ctx: HomContext) -> list[int] | None:
    """F as integers when sigma is an exact rotation model of Z, else None."""
    s = ctx.sofic
    if s.group.kind != "Z" or s.builder != "cyclic":
        return None
    return [int(x) for x in ctx.F]


def window_upper_bound(ctx: HomContext, delta: float) -> float | None:
    """Certified upper bound on log |Hom|_alpha for an exact rotation model.

    A point k is clean when its label has positive measure and agrees with
    the alpha-colouring x on every s-coordinate, x(k - s) = f_k(s). Each
    condition-(i) sum bounds the s-disagreements below delta d / 2 and the
    measure defect bounds the zero-measure mass below delta d / 2, so at most
    b = |F| (ceil(delta d / 2) - 1) points are unclean. Sweeping x from left
    to right, every clean window extends a (w-1)-block in at most D ways.
    """
    shifts = cyclic_model_shifts(ctx)
    if shifts is None:
        return None
    if delta <= 0:
        return NEG_INF
    d, n = ctx.d, ctx.table.n
    lo, hi = min(shifts), max(shifts)
    w = hi - lo + 1
    if w > d or n ** w > MAX_TYPES:
        return None
    b = len(shifts) * max(0, math.ceil(delta * d / 2) - 1)
    # Window positions: offset j holds x(k - hi + j), so coordinate s sits at hi - s.
    grid = np.indices((n,) * w).reshape(w, -1)
    atoms = np.ravel_multi_index(tuple(grid[[hi - s for s in shifts]]), (n,) * len(shifts))
    # F order in the table may differ from `shifts` order only by position in F.
    allowed = ctx.table.measures[atoms] > 0
    prefix = np.ravel_multi_index(tuple(grid[:-1]), (n,) * (w - 1)) if w > 1 else np.zeros(grid.shape[1], np.int64)
    D = int(np.bincount(prefix[allowed], minlength=n ** max(w - 1, 0)).max()) if allowed.any() else 0
    steps = d - w + 1
    terms = []
    for j in range(0, min(b, steps) + 1):
        if D == 0 and j < steps:
            continue
        terms.append(math.log(math.comb(d, j)) + j * math.log(n) + (steps - j) * (math.log(D) if D else 0.0))
    if not terms:
        return NEG_INF
    return (w - 1) * math.log(n) + _log_sum(terms)


def orbit_witness_lower(ctx: HomContext, delta: float, xi: str = ALPHA) -> tuple[float, int] | None:
    """log of the number of distinct xi-restrictions among orbit labelings
    k -> atom of T^k x (finite systems with a rotation model of Z)."""
    if ctx.system.kind != "finite" or cyclic_model_shifts(ctx) is None:
        return None
    pa = ctx.table.point_atoms
    T = ctx.system.act(1)
    seen = set()
    X = ctx.system.size
    for x in range(X):
        if ctx.system.weights[x] == 0:
            continue
        orbit = np.empty(ctx.d, dtype=np.int64)
        p = x
        for k in range(ctx.d):
            orbit[k] = pa[p]
            p = T[p]
        phi = HomLabeling(ctx.d, orbit)
        if is_member(phi, ctx, delta):
            seen.add(restrict(phi, ctx, xi).tobytes())
    if not seen:
        return None
    return math.log(len(seen)), len(seen)


def bound_summary(ctx: HomContext, delta: float, xi: str = ALPHA, eps: float = 0.05,
                  limit: int = MAX_TYPES) -> CountResult:
    """Certified bounds on log |Hom|_xi without sampling.

    ``log_count`` is the best certified upper bound: exact |Hom(xi, {e}, delta)|_xi
    (an upper bound by monotonicity) or the rotation-model window bound.
    """
    d = ctx.d
    part = ctx.xi[xi]
    xi_weights = ctx.system.atom_measures(part)
    bounds: dict[str, float] = {}
    flags: list[str] = ["bounds"]
    uppers = []
    if delta <= 0:
        return CountResult("bounds", d, float(delta), NEG_INF, {xi: NEG_INF}, bounds={"upper": NEG_INF}, flags=flags)
    try:
        types = compositions(d, part.n_atoms, limit)
        ok = _type_measure_defect(types, xi_weights, d) < delta
        bounds["type_class_upper"] = sum_multinomials(d, types[ok])[1]
        uppers.append(bounds["type_class_upper"])
    except BudgetExceeded:
        pass
    wb = window_upper_bound(ctx, delta)
    if wb is not None:
        bounds["window_upper"] = wb
        uppers.append(wb)
    bounds["stirling_upper"] = stirling_upper_bound(xi_weights, d, delta, eps)
    if 0 < eps < 1:
        bounds["ball_count"] = ball_count_bound(d, eps, part.n_atoms)
    lowers = []
    ow = orbit_witness_lower(ctx, delta, xi)
    if ow is not None:
        bounds["witness_lower"] = ow[0]
        lowers.append(ow[0])
    base = ctx.system.kind == "bernoulli" and ctx.table.alpha.window is None
    if base and xi == ALPHA and delta < 0.5:
        bounds["typical_lower"], tflags = typical_set_lower_bound(xi_weights, d, delta)
        flags += [f"typical:{f}" for f in tflags]
    if uppers:
        value = min(uppers)
        flags.append("certified-upper")
    else:
        value = bounds["stirling_upper"]
        flags.append("asymptotic-upper")
    bounds["upper"] = value
    bounds["lower"] = max(lowers) if lowers else bounds.get("typical_lower", NEG_INF)
    return CountResult("bounds", d, float(delta), value, {xi: value}, bounds=bounds, flags=flags)
