"""Homomorphisms Sigma(alpha_F) -> P_d stored as point labelings.

A homomorphism from the finite algebra generated by the atoms of alpha_F into
the power set of ``{0..d-1}`` is determined by which atom each point lands
in, so a :class:`HomLabeling` is just an array ``labels[k]`` of table-atom
indices. ``phi(B)`` for a union of atoms ``B`` is the set of points whose
label lies in ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

from . import kernels
from .groups import Element
from .measure import AtomTable, MeasureSystem, PartitionError, PartitionSpec, join_partition, refines
from .sofic import SoficMap

ALPHA = "alpha"
EXHAUSTIVE_LIMIT = 20
EXACT_SEPARATED_LIMIT = 500
DENSE_GRAPH = 0.4


@dataclass(frozen=True, eq=False)
class HomLabeling:
    d: int
    labels: np.ndarray

    def __post_init__(self):
        lab = np.ascontiguousarray(self.labels, dtype=np.int64)
        if lab.shape != (self.d,):
            raise ValueError("labeling length must be d")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    def to_list(self) -> list[int]:
        return (self.labels + 1).tolist()

    @classmethod
    def from_list(cls, labels: Sequence[int]) -> HomLabeling:
        arr = np.asarray(labels, dtype=np.int64) - 1
        return cls(arr.shape[0], arr)

    def __eq__(self, other):
        return isinstance(other, HomLabeling) and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())


@dataclass(frozen=True, eq=False)
class HomContext:
    sofic: SoficMap
    system: MeasureSystem
    table: AtomTable
    xi: dict[str, PartitionSpec]
    coarse: dict[str, np.ndarray]
    inv: np.ndarray
    fwd: np.ndarray
    _fp: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(
        cls,
        sofic: SoficMap,
        system: MeasureSystem,
        alpha: PartitionSpec,
        F: Sequence[Element],
        coarsenings: Mapping[str, PartitionSpec] | None = None,
        table: AtomTable | None = None,
    ) -> HomContext:
        if sofic.group != system.group:
            raise ValueError("sofic map and system act by different groups")
        table = table or join_partition(system, alpha, F)
        xi = {ALPHA: alpha}
        coarse = {ALPHA: np.arange(alpha.n_atoms)}
        for name, part in (coarsenings or {}).items():
            cmap = refines(alpha, part, system.group)
            if cmap is None:
                raise PartitionError(f"alpha does not refine the coarsening {name!r}")
            xi[name] = part
            coarse[name] = cmap
        fwd = np.stack([sofic.evaluate(s).images for s in table.F])
        inv = np.stack([sofic.evaluate(s).inverse.images for s in table.F])
        return cls(sofic, system, table, xi, coarse, np.ascontiguousarray(inv), np.ascontiguousarray(fwd))

    @property
    def d(self) -> int:
        return self.sofic.d

    @property
    def F(self) -> tuple:
        return self.table.F

    @property
    def m(self) -> int:
        return self.table.m

    def n_xi(self, name: str = ALPHA) -> int:
        return self.xi[name].n_atoms

    def fingerprint_map(self, name: str = ALPHA) -> np.ndarray:
        """Table atom -> xi atom (through the identity coordinate)."""
        fp = self._fp.get(name)
        if fp is None:
            fp = self.coarse[name][self.table.coord[self.table.e_pos]]
            self._fp[name] = fp
        return fp

    def check(self, phi: HomLabeling) -> None:
        if phi.d != self.d:
            raise ValueError(f"labeling has d={phi.d}, context has d={self.d}")
        if phi.labels.size and (phi.labels.min() < 0 or phi.labels.max() >= self.m):
            raise ValueError("label outside the atom table")


def density(subset: Iterable[int] | np.ndarray, d: int) -> float:
    """|subset| / d for a subset of {0..d-1}."""
    return len(np.unique(np.asarray(list(subset) if not isinstance(subset, np.ndarray) else subset))) / d


def atom_sets(phi: HomLabeling, m: int) -> list[np.ndarray]:
    """phi(P_a) for every table atom a; pairwise disjoint with union {0..d-1}."""
    order = np.argsort(phi.labels, kind="stable")
    bounds = np.searchsorted(phi.labels[order], np.arange(m + 1))
    return [np.sort(order[bounds[a]:bounds[a + 1]]) for a in range(m)]


def from_atom_sets(sets: Sequence[Iterable[int]], d: int) -> HomLabeling:
    """Inverse of :func:`atom_sets`; the sets must partition {0..d-1}."""
    labels = np.full(d, -1, dtype=np.int64)
    for a, s in enumerate(sets):
        s = np.asarray(list(s), dtype=np.int64)
        if (labels[s] != -1).any():
            raise ValueError("images of distinct atoms overlap")
        labels[s] = a
    if (labels < 0).any():
        raise ValueError("images do not cover {0..d-1}")
    return HomLabeling(d, labels)


def image(phi: HomLabeling, atoms: Iterable[int]) -> np.ndarray:
    """phi(B) for B the union of the given table atoms."""
    return np.flatnonzero(np.isin(phi.labels, np.fromiter(atoms, dtype=np.int64)))


def mismatch_counts(phi: HomLabeling, ctx: HomContext) -> np.ndarray:
    coord = ctx.table.coord
    e_lab = coord[ctx.table.e_pos][phi.labels]
    return np.array([np.count_nonzero(e_lab[ctx.inv[i]] != coord[i][phi.labels]) for i in range(len(ctx.F))])


def equivariance_defect(phi: HomLabeling, ctx: HomContext) -> dict[Element, float]:
    """sum_A |sigma_s phi(A) symdiff phi(sA)| / d for each s in F."""
    ctx.check(phi)
    mm = mismatch_counts(phi, ctx)
    return {s: 2.0 * int(c) / ctx.d for s, c in zip(ctx.F, mm)}


def measure_defect(phi: HomLabeling, ctx: HomContext) -> float:
    """sum over table atoms of |zeta(phi(P)) - mu(P)|."""
    ctx.check(phi)
    _, meas = kernels.labeling_defects(phi.labels[None, :], ctx.inv, ctx.table.coord, ctx.table.e_pos, ctx.table.measures)
    return float(meas[0])


def membership(max_mm: np.ndarray, meas: np.ndarray, d: int, delta: float) -> np.ndarray:
    """Strict-inequality membership from kernel outputs."""
    return (2.0 * max_mm / d < delta) & (meas < delta)


def is_member(phi: HomLabeling, ctx: HomContext, delta: float) -> bool:
    ctx.check(phi)
    max_mm, meas = kernels.labeling_defects(phi.labels[None, :], ctx.inv, ctx.table.coord, ctx.table.e_pos, ctx.table.measures)
    return bool(membership(max_mm, meas, ctx.d, delta)[0])


def restrict(phi: HomLabeling, ctx: HomContext, xi: str = ALPHA) -> np.ndarray:
    """Fingerprint of the restriction to Sigma(xi): point -> xi atom."""
    ctx.check(phi)
    return ctx.fingerprint_map(xi)[phi.labels]


def rho_fingerprints(fa: np.ndarray, fb: np.ndarray, n_xi: int) -> float:
    """max over xi atoms B of |phi(B) symdiff psi(B)| / d, from fingerprints."""
    diff = fa != fb
    if not diff.any():
        return 0.0
    per_atom = np.bincount(fa[diff], minlength=n_xi) + np.bincount(fb[diff], minlength=n_xi)
    return float(per_atom.max()) / fa.shape[0]


def rho(ctx: HomContext, xi: str, phi: HomLabeling, psi: HomLabeling) -> float:
    return rho_fingerprints(restrict(phi, ctx, xi), restrict(psi, ctx, xi), ctx.n_xi(xi))


def _rho_rows(fps: np.ndarray, row: np.ndarray, n_xi: int) -> np.ndarray:
    """rho from one fingerprint to each row of ``fps``."""
    d = row.shape[0]
    diff = fps != row[None, :]
    out = np.zeros(fps.shape[0])
    for b in range(n_xi):
        cnt = np.count_nonzero(diff & ((fps == b) | (row[None, :] == b)), axis=1)
        np.maximum(out, cnt / d, out=out)
    return out


def canonical_order(fingerprints: np.ndarray) -> np.ndarray:
    """Indices sorting fingerprint rows lexicographically."""
    fps = np.asarray(fingerprints)
    if fps.shape[0] == 0:
        return np.arange(0)
    return np.lexsort(fps.T[::-1])


def greedy_separated_fingerprints(fps: np.ndarray, eps: float, n_xi: int) -> list[int]:
    """Scan rows in order; keep a row iff its distance to every kept row is >= eps."""
    kept: list[int] = []
    for i in range(fps.shape[0]):
        if kept:
            dist = _rho_rows(fps[kept], fps[i], n_xi)
            if (dist < eps).any():
                continue
        kept.append(i)
    return kept


def greedy_separated(models: Sequence[HomLabeling], eps: float, ctx: HomContext, xi: str = ALPHA) -> list[HomLabeling]:
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not models:
        return []
    fps = np.stack([restrict(p, ctx, xi) for p in models])
    return [models[i] for i in greedy_separated_fingerprints(fps, eps, ctx.n_xi(xi))]


def _clique_cover(adj: np.ndarray) -> list[list[int]]:
    """Greedy cover of the edges of ``adj`` by cliques."""
    unc = np.triu(adj, 1)
    cliques = []
    while unc.any():
        i, j = map(int, np.argwhere(unc)[0])
        members = [i, j]
        cand = adj[i] & adj[j]
        while cand.any():
            c = np.flatnonzero(cand)
            score = (unc[members][:, c] | unc[c][:, members].T).sum(axis=0)
            v = int(c[np.argmax(score)])
            members.append(v)
            cand &= adj[v]
        cliques.append(members)
        idx = np.array(members)
        unc[np.ix_(idx, idx)] = False
    return cliques


def _max_clique(adj: np.ndarray) -> int:
    """Clique number by branch and bound with greedy colouring bounds."""
    nbr = [frozenset(np.flatnonzero(row).tolist()) for row in adj]
    best = 0

    def colour(P):
        classes: list[set] = []
        for v in sorted(P, key=lambda v: -len(nbr[v] & P)):
            for c in classes:
                if not nbr[v] & c:
                    c.add(v)
                    break
            else:
                classes.append({v})
        return [(v, k) for k, c in enumerate(classes, 1) for v in c]

    def expand(size, P):
        nonlocal best
        for v, bound in reversed(colour(P)):
            if size + bound <= best:
                return
            NP = P & nbr[v]
            if NP:
                expand(size + 1, NP)
            elif size + 1 > best:
                best = size + 1
            P = P - {v}

    expand(0, frozenset(range(adj.shape[0])))
    return best


def _max_independent_milp(adj: np.ndarray) -> int:
    k = adj.shape[0]
    cliques = _clique_cover(adj)
    if not cliques:
        return k
    rows = np.concatenate([np.full(len(c), q) for q, c in enumerate(cliques)])
    cols = np.concatenate([np.asarray(c) for c in cliques])
    A = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(len(cliques), k))
    res = milp(-np.ones(k), constraints=LinearConstraint(A, 0, 1), integrality=np.ones(k),
               bounds=Bounds(0, 1), options={"mip_rel_gap": 0.0})
    if res.status != 0:
        raise RuntimeError(f"separated-set program did not solve: {res.message}")
    return int(round(-res.fun))


def max_separated_size(fps: np.ndarray, eps: float, n_xi: int, limit: int = EXACT_SEPARATED_LIMIT) -> int:
    """Exact N_eps of a set of fingerprints.

    A separated set is an independent set of the graph joining fingerprints
    closer than eps. Sparse graphs go to a 0/1 program with one "at most one"
    row per clique of a greedy clique cover; dense ones to a clique search in
    the complement, where the answer is small and colouring bounds prune well.
    """
    fps = np.unique(np.asarray(fps), axis=0)
    k = fps.shape[0]
    if k == 0:
        return 0
    if k > limit:
        raise ValueError(f"exact N_eps limited to {limit} distinct restrictions, got {k}")
    adj = np.stack([_rho_rows(fps, fps[i], n_xi) < eps for i in range(k)])
    np.fill_diagonal(adj, False)
    if adj.mean() >= DENSE_GRAPH:
        comp = ~adj
        np.fill_diagonal(comp, False)
        return _max_clique(comp)
    return _max_independent_milp(adj)


# subalgebra maps --------------------------------------------------------------

@dataclass(frozen=True)
class SubalgebraMap:
    """theta: each source atom goes to a union of target atoms."""

    n_source: int
    n_target: int
    images: tuple[tuple[int, ...], ...]
    errors: tuple[float, ...] = ()
    exhaustive: bool = False

    @property
    def disjoint(self) -> bool:
        seen: set[int] = set()
        for img in self.images:
            if seen & set(img):
                return False
            seen |= set(img)
        return True

    @property
    def covering(self) -> bool:
        return set().union(*map(set, self.images)) == set(range(self.n_target))

    def is_homomorphism(self) -> bool:
        return self.disjoint and self.covering

    def target_to_source(self) -> np.ndarray:
        if not self.is_homomorphism():
            raise ValueError("theta images do not partition the target atoms")
        back = np.empty(self.n_target, dtype=np.int64)
        for a, img in enumerate(self.images):
            back[list(img)] = a
        return back

    def apply(self, source_atoms: Iterable[int]) -> tuple[int, ...]:
        return tuple(sorted(set().union(*(set(self.images[a]) for a in source_atoms))))


def _overlaps(source: PartitionSpec, target: PartitionSpec, mu: np.ndarray):
    if source.size != target.size or mu.shape != (source.size,):
        raise ValueError("partitions and measure live on different spaces")
    n, t = source.n_atoms, target.n_atoms
    inter = np.zeros((n, t))
    np.add.at(inter, (source.labels, target.labels), mu)
    return inter, inter.sum(axis=1), inter.sum(axis=0)


def approximation_gap(source: PartitionSpec, target: PartitionSpec, mu: Sequence[float]) -> float:
    """max over source atoms A of the best mu(A symdiff B), B a union of target atoms."""
    inter, _, mc = _overlaps(source, target, np.asarray(mu, dtype=float))
    return float(np.minimum(inter, mc[None, :] - inter).sum(axis=1).max())


def _best_union_exhaustive(avail: list[int], weight: np.ndarray, base: float) -> tuple[tuple[int, ...], float]:
    k = len(avail)
    w = weight[avail]
    best_val = np.inf
    best: list[tuple[int, ...]] = []
    chunk = 1 << 16
    for start in range(0, 1 << k, chunk):
        masks = np.arange(start, min(start + chunk, 1 << k), dtype=np.int64)
        bits = ((masks[:, None] >> np.arange(k)) & 1).astype(float)
        vals = base + bits @ w
        lo = vals.min()
        if lo < best_val:
            best_val, best = lo, []
        if lo == best_val:
            for mask in masks[vals == lo]:
                best.append(tuple(avail[j] for j in range(k) if (mask >> j) & 1))
    return min(best), float(best_val)


def _best_union_greedy(avail: list[int], weight: np.ndarray) -> tuple[int, ...]:
    # mu(U symdiff A) = mu(A) + sum_{C in U} (mu(C) - 2 mu(C & A)) is separable:
    # the minimizers are the negative-weight atoms plus any zero-weight atoms.
    must = [c for c in avail if weight[c] < 0]
    ties = [c for c in avail if weight[c] == 0]
    top = max(must) if must else -1
    return tuple(sorted(must + [c for c in ties if c < top]))


def build_theta(
    source: PartitionSpec,
    target: PartitionSpec,
    mu: Sequence[float],
    method: str = "auto",
) -> SubalgebraMap:
    """Greedy homomorphism Sigma(source) -> Sigma(target).

    Source atoms are taken in order; atom i < n-1 goes to the union of still
    unused target atoms minimizing mu(theta(A_i) symdiff A_i), ties broken by
    the lexicographically smallest index tuple. The last atom takes the rest.
    ``method`` is ``"exhaustive"``, ``"greedy"`` or ``"auto"`` (exhaustive when
    at most 2^20 candidate unions).
    """
    mu = np.asarray(mu, dtype=float)
    inter, ma, mc = _overlaps(source, target, mu)
    n, t = inter.shape
    used: set[int] = set()
    images: list[tuple[int, ...]] = []
    all_exhaustive = True
    for a in range(n - 1):
        avail = [c for c in range(t) if c not in used]
        weight = mc - 2.0 * inter[a]
        exhaustive = method == "exhaustive" or (method == "auto" and len(avail) <= EXHAUSTIVE_LIMIT)
        if exhaustive:
            img, _ = _best_union_exhaustive(avail, weight, float(ma[a]))
        else:
            img = _best_union_greedy(avail, weight)
            all_exhaustive = False
        images.append(img)
        used |= set(img)
    images.append(tuple(c for c in range(t) if c not in used))
    errors = tuple(
        float(mu[np.isin(target.labels, img) != (source.labels == a)].sum()) for a, img in enumerate(images)
    )
    return SubalgebraMap(n, t, tuple(images), errors, all_exhaustive and method != "greedy")


def theta_errors(theta: SubalgebraMap, source: PartitionSpec, target: PartitionSpec, mu: Sequence[float]) -> dict[tuple[int, ...], float]:
    """mu(theta(B) symdiff B) for every B in the algebra generated by source."""
    mu = np.asarray(mu, dtype=float)
    out = {}
    for r in range(source.n_atoms + 1):
        for atoms in combinations(range(source.n_atoms), r):
            in_b = np.isin(source.labels, atoms)
            in_t = np.isin(target.labels, theta.apply(atoms))
            out[atoms] = float(mu[in_b != in_t].sum())
    return out


def compose_hom(phi: HomLabeling, theta: SubalgebraMap) -> HomLabeling:
    """phi o theta: point k goes to the source atom whose image holds phi's label."""
    back = theta.target_to_source()
    if phi.labels.size and phi.labels.max() >= theta.n_target:
        raise ValueError("labeling uses atoms outside theta's target")
    return HomLabeling(phi.d, back[phi.labels])
