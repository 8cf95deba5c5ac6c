"""Invariant suites run by ``soficount verify``.

Each suite returns a list of :class:`Check` records with the observed
values; a suite passes when every check does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Any, Callable

import numpy as np

from .counting import (
    ball_count_bound,
    conditional_extension_bound,
    count_types,
    decode_labels,
    enumerate_homs,
    enumerate_valid,
    mc_membership,
    stirling_upper_bound,
    typical_set_lower_bound,
)
from .groups import GroupSpec, cyclic_table
from .homspace import (
    HomContext,
    HomLabeling,
    approximation_gap,
    atom_sets,
    build_theta,
    canonical_order,
    from_atom_sets,
    image,
    max_separated_size,
    rho_fingerprints,
    theta_errors,
)
from .measure import (
    MeasureSystem,
    PartitionSpec,
    conditional_entropy,
    partition_entropy,
)
from .rng import stream
from .sofic import (
    build_cyclic,
    build_random_free,
    build_regular,
    build_torus,
    defect_report,
)


@dataclass
class Check:
    name: str
    passed: bool
    observed: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "observed": self.observed}


# shared instances ---------------------------------------------------------------

def _z4_system() -> MeasureSystem:
    return MeasureSystem.finite([0.25] * 4, [[1, 2, 3, 0]])


def monotone_instances():
    """(system, sofic, alpha, alpha', xi, xi', F, F', deltas) chains."""
    b3 = MeasureSystem.bernoulli([0.2, 0.3, 0.5])
    pts3 = PartitionSpec.points(3)
    pair3 = PartitionSpec.from_atoms([[0], [1, 2]], 3)
    triv3 = PartitionSpec.trivial(3)
    z4 = _z4_system()
    pts4 = PartitionSpec.points(4)
    half4 = PartitionSpec.from_atoms([[0, 1], [2, 3]], 4)
    triv4 = PartitionSpec.trivial(4)
    b2 = MeasureSystem.bernoulli([0.5, 0.5])
    pts2 = PartitionSpec.points(2)
    triv2 = PartitionSpec.trivial(2)
    return [
        ("bernoulli3-d5", b3, build_cyclic(5), pair3, pts3, triv3, pair3, (0,), (0, 1), (0.9, 0.55)),
        ("bernoulli3-d4", b3, build_cyclic(4), pair3, pts3, triv3, pair3, (0,), (0, 1), (1.1, 0.7)),
        ("z4-d6", z4, build_cyclic(6), half4, pts4, triv4, half4, (0,), (0, 1), (0.8, 0.45)),
        ("z4-d8", z4, build_cyclic(8), half4, half4, triv4, half4, (0,), (0, 1), (0.6, 0.3)),
        ("bernoulli2-d7", b2, build_cyclic(7), pts2, pts2, triv2, pts2, (0,), (0, 1), (0.7, 0.35)),
        ("free-bernoulli2-d6", MeasureSystem.bernoulli([0.5, 0.5], GroupSpec.free(1)), build_random_free(1, 6, 11),
         pts2, pts2, triv2, pts2, ((),), ((), (1,)), (0.9, 0.5)),
    ]


# suites -------------------------------------------------------------------------

def suite_monotonicity(seed: int = 0, quick: bool = False) -> list[Check]:
    """Hom(alpha', F', delta') maps into Hom(alpha, F, delta) under the
    coarse table map, and |Hom|_xi >= |Hom'|_xi' for xi >= xi'."""
    checks = []
    for name, system, sofic, alpha, alpha2, xi_c, xi_f, F, F2, (dl, dl2) in monotone_instances():
        for a_small, a_big in ((alpha, alpha), (alpha, alpha2)):
            for Fa, Fb in ((F, F), (F, F2)):
                for d_big, d_small in ((dl, dl), (dl, dl2)):
                    small = HomContext.build(sofic, system, a_small, Fa, {"xi": xi_f, "xi'": xi_c})
                    big = HomContext.build(sofic, system, a_big, Fb, {"xi": xi_f, "xi'": xi_c})
                    idx_small = enumerate_valid(small, [d_big])[0]
                    idx_big = enumerate_valid(big, [d_small])[0]
                    tmap = big.table.map_to(small.table)
                    mapped = tmap[decode_labels(big, idx_big)] if idx_big.size else np.zeros((0, sofic.d), np.int64)
                    powers = np.int64(small.m) ** np.arange(sofic.d, dtype=np.int64)
                    codes = mapped @ powers
                    contained = bool(np.isin(codes, idx_small).all())
                    # restriction counts: finer xi on the larger set vs coarser xi' on the smaller one
                    labels_small = decode_labels(small, idx_small) if idx_small.size else np.zeros((0, sofic.d), np.int64)
                    labels_big = decode_labels(big, idx_big) if idx_big.size else np.zeros((0, sofic.d), np.int64)
                    r_xi = len({row.tobytes() for row in small.fingerprint_map("xi")[labels_small]})
                    r_xi2 = len({row.tobytes() for row in big.fingerprint_map("xi'")[labels_big]})
                    checks.append(Check(
                        f"{name}:F{len(Fa)}<=F{len(Fb)}:a{a_small.n_atoms}<=a{a_big.n_atoms}:delta{d_big}>={d_small}",
                        contained and r_xi >= r_xi2,
                        {"hom": int(idx_small.size), "hom_prime": int(idx_big.size), "contained": contained,
                         "restrict_xi": r_xi, "restrict_xi_prime_on_prime": r_xi2},
                    ))
    return checks


def suite_pseudometric(seed: int = 0, quick: bool = False) -> list[Check]:
    rng = stream(seed, 101)
    checks = []
    worst_tri = 0.0
    ok_sym = ok_zero = ok_sep = True
    n_trials = 200 if quick else 2000
    for _ in range(n_trials):
        d = int(rng.integers(1, 30))
        q = int(rng.integers(1, 5))
        a, b, c = (rng.integers(0, q, d) for _ in range(3))
        rab, rbc, rac = rho_fingerprints(a, b, q), rho_fingerprints(b, c, q), rho_fingerprints(a, c, q)
        worst_tri = max(worst_tri, rac - (rab + rbc))
        ok_sym &= rab == rho_fingerprints(b, a, q)
        ok_zero &= rho_fingerprints(a, a, q) == 0.0
        ok_sep &= (rab > 0) == (not np.array_equal(a, b))
    checks.append(Check("triangle", worst_tri <= 1e-12, {"worst_excess": worst_tri, "trials": n_trials}))
    checks.append(Check("symmetry", bool(ok_sym)))
    checks.append(Check("identity", bool(ok_zero)))
    checks.append(Check("positive-iff-restrictions-differ", bool(ok_sep)))
    return checks


def chebyshev_run(d: int = 1000, trials: int = 1000, seed: int = 0, F=(0, 1, -1), nu=(0.5, 0.5)):
    system = MeasureSystem.bernoulli(list(nu))
    ctx = HomContext.build(build_cyclic(d), system, PartitionSpec.points(len(nu)), F)
    _, stats = mc_membership(ctx, [0.1], trials, seed, key=(7,), proposal="kappa")
    return stats


def chebyshev_checks(stats, ts=(0.05, 0.1)) -> list[Check]:
    checks = []
    var = stats.variance
    vb = stats.variance_bound()
    checks.append(Check("variance<=d|F|^2", bool((var <= vb).all()),
                        {"max_variance": float(var.max()), "bound": vb, "patterns": int(var.size)}))
    T = stats.samples
    for t in ts:
        freq = stats.tail_frequency(t)
        bound = stats.chebyshev_bound(t)
        q = min(bound, 1.0)
        slack = 3.0 * math.sqrt(q * (1 - q) / T)
        checks.append(Check(f"tail(t={t})", bool((freq <= bound + slack).all()),
                            {"max_frequency": float(freq.max()), "bound": bound, "slack": slack}))
    return checks


def suite_chebyshev(seed: int = 0, quick: bool = False) -> list[Check]:
    stats = chebyshev_run(d=1000, trials=300 if quick else 1000, seed=seed)
    return chebyshev_checks(stats)


def suite_sandwich(seed: int = 0, quick: bool = False) -> list[Check]:
    """Exact type-class counts between the typical-set and Stirling bounds."""
    checks = []
    eps = 0.05
    for nu in ((0.5, 0.5), (0.3, 0.7), (0.2, 0.3, 0.5)):
        system = MeasureSystem.bernoulli(list(nu))
        alpha = PartitionSpec.points(len(nu))
        for d in ((1000,) if quick else (1000, 2000)):
            if len(nu) == 3 and d > 1000:
                continue
            ctx = HomContext.build(build_cyclic(d), system, alpha, [0])
            deltas = (0.2, 0.1, 0.05)
            for res in count_types(ctx, deltas):
                lo, _ = typical_set_lower_bound(nu, d, res.delta)
                hi = stirling_upper_bound(nu, d, res.delta, eps)
                checks.append(Check(f"nu={nu}:d={d}:delta={res.delta}", lo <= res.log_count <= hi,
                                    {"typical_lower": lo, "exact": res.log_count, "stirling_upper": hi}))
    return checks


def suite_chain_rule(seed: int = 0, quick: bool = False) -> list[Check]:
    rng = stream(seed, 202)
    worst = 0.0
    for _ in range(50 if quick else 300):
        N = int(rng.integers(2, 12))
        w = rng.dirichlet(np.ones(N))
        system = MeasureSystem.finite(w, [np.arange(N)])
        alpha = PartitionSpec(np.unique(rng.integers(0, N, N), return_inverse=True)[1].ravel(), N)
        k = alpha.n_atoms
        xi_of_atom = np.unique(rng.integers(0, max(1, k - 1), k), return_inverse=True)[1].ravel()
        xi = PartitionSpec(xi_of_atom[alpha.labels], N)
        lhs = partition_entropy(system, alpha)
        rhs = partition_entropy(system, xi) + conditional_entropy(system, alpha, xi)
        worst = max(worst, abs(lhs - rhs))
    checks = [Check("H(alpha)=H(xi)+H(alpha|xi)", worst <= 1e-9, {"max_abs_error": worst})]
    # extension bound vs exhaustive extension counts, d = 6, |xi| = 2, |alpha| = 4
    system = MeasureSystem.bernoulli([0.1, 0.2, 0.3, 0.4])
    alpha = PartitionSpec.points(4)
    xi = PartitionSpec.from_atoms([[0, 1], [2, 3]], 4)
    for delta, eps in ((0.3, 0.1), (0.5, 0.2)):
        ctx = HomContext.build(build_cyclic(6), system, alpha, [0], {"xi": xi})
        idx = enumerate_valid(ctx, [delta])[0]
        fps = ctx.fingerprint_map("xi")[decode_labels(ctx, idx)]
        _, fibers = np.unique(fps, axis=0, return_counts=True)
        bound = conditional_extension_bound(system, alpha, xi, 6, delta, eps)
        worst_fiber = int(fibers.max()) if fibers.size else 0
        checks.append(Check(f"extension-bound(delta={delta},eps={eps})", math.log(max(worst_fiber, 1)) <= bound,
                            {"max_extensions": worst_fiber, "exp_bound": math.exp(bound)}))
    return checks


def lemma_hom_instance(rng: np.random.Generator, eps: float):
    """Random finite space, source partition, and a target algebra within
    delta = eps / (4 n^2) of the source."""
    N = int(rng.integers(6, 13))
    n = int(rng.integers(2, 4))
    delta = eps / (4 * n * n)
    source_labels = np.concatenate([np.arange(n), rng.integers(0, n, N - n)])
    rng.shuffle(source_labels)
    # A few "noise" points get tiny mass and land in arbitrary target atoms.
    n_noise = int(rng.integers(0, 3))
    noise = rng.choice(N, size=n_noise, replace=False)
    w = rng.dirichlet(np.ones(N))
    if n_noise:
        tiny = rng.uniform(0.05, 0.9, n_noise) * delta / (n_noise + 1)
        w[noise] = 0.0
        w = w / w.sum() * (1.0 - tiny.sum())
        w[noise] = tiny
    # Target: split each source atom into 1-3 pieces, then reassign noise points.
    pieces = np.empty(N, dtype=np.int64)
    next_id = 0
    for a in range(n):
        pts = np.flatnonzero(source_labels == a)
        k = int(rng.integers(1, min(3, len(pts)) + 1))
        cut = rng.integers(0, k, len(pts))
        cut[:k] = np.arange(k)
        pieces[pts] = next_id + cut
        next_id += k
    for x in noise:
        pieces[x] = int(rng.integers(0, next_id))
    _, target_labels = np.unique(pieces, return_inverse=True)
    perm = rng.permutation(int(target_labels.max()) + 1)
    source = PartitionSpec(np.unique(source_labels, return_inverse=True)[1].ravel(), N)
    target = PartitionSpec(perm[target_labels.ravel()], N)
    return source, target, w, delta


def suite_lemma_hom(seed: int = 0, quick: bool = False, instances: int = 50, eps: float = 0.2) -> list[Check]:
    rng = stream(seed, 303)
    checks = []
    for i in range(10 if quick else instances):
        source, target, w, delta = lemma_hom_instance(rng, eps)
        gap = approximation_gap(source, target, w)
        exhaustive = build_theta(source, target, w, method="exhaustive")
        greedy = build_theta(source, target, w, method="greedy")
        errs = theta_errors(exhaustive, source, target, w)
        worst = max(errs.values())
        checks.append(Check(
            f"instance{i}",
            gap < delta and worst < eps and greedy.images == exhaustive.images and exhaustive.is_homomorphism(),
            {"gap": gap, "delta": delta, "max_error": worst, "eps": eps,
             "greedy_matches": greedy.images == exhaustive.images},
        ))
    return checks


def suite_representation(seed: int = 0, quick: bool = False) -> list[Check]:
    ok_round = ok_hom = True
    count = 0
    for d in range(1, 5 if quick else 6):
        for m in range(1, 5):
            if m**d > 4096:
                continue
            for labels in product(range(m), repeat=d):
                phi = HomLabeling(d, np.array(labels))
                sets = atom_sets(phi, m)
                union = np.concatenate(sets) if sets else np.zeros(0)
                ok_round &= from_atom_sets(sets, d) == phi and np.array_equal(np.sort(union), np.arange(d))
                for B in ((0,), tuple(range(m))[: m // 2 + 1]):
                    comp = tuple(a for a in range(m) if a not in B)
                    ok_hom &= np.array_equal(np.sort(np.concatenate([image(phi, B), image(phi, comp)])), np.arange(d))
                count += 1
    return [Check("round-trip", bool(ok_round), {"labelings": count}),
            Check("complements-and-unions", bool(ok_hom))]


def _defect_values(sofic, F):
    rep = defect_report(sofic, F)
    return rep.max_mult(), rep.max_free(), rep.total()


def suite_defects(seed: int = 12345, quick: bool = False) -> list[Check]:
    checks = []
    Z = GroupSpec.integers()
    for d in (10, 100, 1000):
        s = build_cyclic(d)
        m, f, t = _defect_values(s, Z.ball(2))
        checks.append(Check(f"cyclic-d{d}", t == 0.0, {"max_mult": m, "max_free": f}))
    for m_ in (2, 3, 6):
        s = build_regular(cyclic_table(m_))
        mm, f, t = _defect_values(s, range(m_))
        checks.append(Check(f"regular-Z/{m_}", t == 0.0, {"max_mult": mm, "max_free": f}))
    s3 = _s3_table()
    s = build_regular(s3)
    mm, f, t = _defect_values(s, range(6))
    checks.append(Check("regular-S3", t == 0.0, {"max_mult": mm, "max_free": f}))
    s = build_torus(7)
    mm, f, t = _defect_values(s, s.group.ball(2))
    checks.append(Check("torus-7", t == 0.0, {"max_mult": mm, "max_free": f}))
    ball = GroupSpec.free(2).ball(2)
    m500 = _defect_values(build_random_free(2, 500, seed), ball)
    checks.append(Check("random-free-d500<=0.05", max(m500[0], m500[1]) <= 0.05,
                        {"max_mult": m500[0], "max_free": m500[1], "seed": seed}))
    lo = _defect_values(build_random_free(2, 200, seed), ball)
    hi = _defect_values(build_random_free(2, 2000, seed), ball)
    checks.append(Check("random-free-d2000<d200", hi[2] < lo[2] and hi[1] < lo[1],
                        {"total_d200": lo[2], "total_d2000": hi[2], "max_free_d200": lo[1], "max_free_d2000": hi[1]}))
    return checks


def _s3_table():
    perms = list(permutations(range(3)))
    index = {p: i for i, p in enumerate(perms)}
    return [[index[tuple(a[b[k]] for k in range(3))] for b in perms] for a in perms]


def counting_bound_instances():
    b2 = MeasureSystem.bernoulli([0.5, 0.5])
    b3 = MeasureSystem.bernoulli([0.2, 0.3, 0.5])
    pts2, pts3 = PartitionSpec.points(2), PartitionSpec.points(3)
    pair3 = PartitionSpec.from_atoms([[0], [1, 2]], 3)
    z4 = _z4_system()
    half4 = PartitionSpec.from_atoms([[0, 1], [2, 3]], 4)
    return [
        ("bernoulli2-d8", b2, build_cyclic(8), pts2, pts2, (0, 1), 0.35),
        ("bernoulli2-d10", b2, build_cyclic(10), pts2, pts2, (0,), 0.15),
        ("bernoulli3-d6", b3, build_cyclic(6), pts3, pair3, (0,), 0.45),
        ("bernoulli3-d5", b3, build_cyclic(5), pts3, pts3, (0, 1), 0.85),
        ("z4-d8", z4, build_cyclic(8), half4, half4, (0, 1), 0.3),
    ]


def separated_checks(eps_grid=(0.1, 0.2, 0.3, 0.45)) -> list[Check]:
    checks = []
    for name, system, sofic, alpha, xi, F, delta in counting_bound_instances():
        ctx = HomContext.build(sofic, system, alpha, F, {"xi": xi})
        res, models = enumerate_homs(ctx, delta)
        fps = np.array([ctx.fingerprint_map("xi")[m.labels] for m in models]) if models else np.zeros((0, sofic.d), np.int64)
        uniq = np.unique(fps, axis=0) if fps.size else fps
        uniq = uniq[canonical_order(uniq)] if uniq.size else uniq
        count = res.restriction_counts["xi"]
        for eps in eps_grid:
            N = max_separated_size(uniq, eps, xi.n_atoms)
            ball = ball_count_bound(sofic.d, eps, xi.n_atoms)
            upper = N * math.exp(ball)
            checks.append(Check(f"{name}:eps={eps}", N <= count <= upper + 1e-9 * upper,
                                {"N_eps": N, "restriction_count": count, "N_eps_times_ball": upper}))
    return checks


def entropy_cap_checks(d_grid=(1000, 2000), deltas=(0.2, 0.05, 0.01), slack: float = 0.05) -> list[Check]:
    """(1/d) log |Hom|_xi, infimized over the delta grid, stays below H(xi) + slack."""
    checks = []
    cases = [
        ("nu=(1/2,1/2)", MeasureSystem.bernoulli([0.5, 0.5]), PartitionSpec.points(2), PartitionSpec.points(2)),
        ("nu=(0.3,0.7)", MeasureSystem.bernoulli([0.3, 0.7]), PartitionSpec.points(2), PartitionSpec.points(2)),
        ("nu=(0.2,0.3,0.5) xi={0|12}", MeasureSystem.bernoulli([0.2, 0.3, 0.5]), PartitionSpec.points(3),
         PartitionSpec.from_atoms([[0], [1, 2]], 3)),
    ]
    for name, system, alpha, xi in cases:
        H = partition_entropy(system, xi)
        for d in d_grid:
            ctx = HomContext.build(build_cyclic(d), system, alpha, [0], {"xi": xi})
            vals = [r.restriction_log_count["xi"] / d for r in count_types(ctx, deltas)]
            v = min(vals)
            checks.append(Check(f"{name}:d={d}", v <= H + slack,
                                {"inf_over_delta": v, "per_delta": dict(zip(map(str, deltas), vals)), "H_xi": H}))
    return checks


def suite_counting_bounds(seed: int = 0, quick: bool = False) -> list[Check]:
    return entropy_cap_checks(d_grid=(1000,) if quick else (1000, 2000)) + separated_checks()


SUITES: dict[str, Callable[..., list[Check]]] = {
    "monotonicity": suite_monotonicity,
    "pseudometric": suite_pseudometric,
    "chebyshev": suite_chebyshev,
    "sandwich": suite_sandwich,
    "chain-rule": suite_chain_rule,
    "lemma-hom": suite_lemma_hom,
    "representation": suite_representation,
    "defects": suite_defects,
    "counting-bounds": suite_counting_bounds,
}


def run_suite(name: str, seed: int = 0, quick: bool = False) -> list[Check]:
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](seed=seed, quick=quick)
