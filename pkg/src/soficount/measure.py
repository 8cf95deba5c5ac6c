"""Measure-preserving systems, partitions, joins and entropies.

Two kinds of system are supported:

* ``finite``: a finite set ``X = {0..N-1}`` with weights and one permutation
  of ``X`` per group generator;
* ``bernoulli``: the shift of the group on ``Y^G`` with product measure
  ``nu^G`` over a finite base ``Y = {0..n-1}``.

A partition of a Bernoulli system is a cylinder partition over a finite
window ``K`` of group elements: its atoms partition the patterns ``Y^K``.
The default window is ``(e,)``, i.e. a partition of the base alphabet.

All logarithms are natural.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Any, Iterable, Sequence

import numpy as np

from .groups import Element, GroupSpec

WEIGHT_TOL = 1e-9
MAX_CYLINDER_CONFIGS = 1 << 24


class PartitionError(ValueError):
    pass


# entropy ----------------------------------------------------------------------

def _entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def shannon_entropy(weights: Sequence[float]) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    w = np.asarray(weights, dtype=float)
    if (w < 0).any():
        raise ValueError("negative weight")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    return _entropy(w)


# partitions ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PartitionSpec:
    """Ordered partition of a finite cell space.

    ``labels[c]`` is the atom index of cell ``c``. For finite systems cells
    are the points of X. For Bernoulli systems cells are the patterns in
    ``Y^K`` (C order over ``window``); ``window=None`` stands for ``(e,)``.
    """

    labels: np.ndarray
    size: int
    window: tuple | None = None

    def __post_init__(self):
        lab = np.ascontiguousarray(self.labels, dtype=np.int64)
        k = 1 if self.window is None else len(self.window)
        if lab.shape != (self.size**k,):
            raise PartitionError("labels do not cover the cell space")
        if lab.size and (lab.min() < 0 or not np.array_equal(np.unique(lab), np.arange(lab.max() + 1))):
            raise PartitionError("atom indices must be 0..m-1 with no empty atom")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        if self.window is not None:
            if len(set(self.window)) != len(self.window):
                raise PartitionError("window elements must be distinct")

    @classmethod
    def from_atoms(cls, atoms: Iterable[Iterable[Any]], size: int, window: Sequence | None = None) -> PartitionSpec:
        """Atoms are point lists, or pattern lists for a Bernoulli window."""
        window = None if window is None else tuple(window)
        k = 1 if window is None else len(window)
        labels = np.full(size**k, -1, dtype=np.int64)
        atoms = [list(a) for a in atoms]
        for i, atom in enumerate(atoms):
            if not atom:
                raise PartitionError(f"atom {i} is empty")
            for cell in atom:
                if window is not None or isinstance(cell, (tuple, list)):
                    pattern = tuple(cell) if isinstance(cell, (tuple, list)) else (cell,)
                    if len(pattern) != k or any(not 0 <= int(v) < size for v in pattern):
                        raise PartitionError(f"bad pattern {cell!r}")
                    c = int(np.ravel_multi_index(tuple(int(v) for v in pattern), (size,) * k))
                else:
                    c = int(cell)
                    if not 0 <= c < size:
                        raise PartitionError(f"point {cell!r} outside the space")
                if labels[c] != -1:
                    raise PartitionError(f"atoms overlap at {cell!r}")
                labels[c] = i
        if (labels < 0).any():
            raise PartitionError("atoms do not cover the space")
        return cls(labels, size, window)

    @classmethod
    def points(cls, size: int, window: Sequence | None = None) -> PartitionSpec:
        k = 1 if window is None else len(window)
        return cls(np.arange(size**k), size, None if window is None else tuple(window))

    @classmethod
    def trivial(cls, size: int, window: Sequence | None = None) -> PartitionSpec:
        k = 1 if window is None else len(window)
        return cls(np.zeros(size**k, dtype=np.int64), size, None if window is None else tuple(window))

    @property
    def n_atoms(self) -> int:
        return int(self.labels.max()) + 1

    def __len__(self) -> int:
        return self.n_atoms

    def atoms(self) -> list[list]:
        """Atom cell lists (points, or pattern tuples when windowed)."""
        out: list[list] = [[] for _ in range(self.n_atoms)]
        k = 1 if self.window is None else len(self.window)
        for c, a in enumerate(self.labels.tolist()):
            if self.window is None:
                out[a].append(c)
            else:
                out[a].append(tuple(int(v) for v in np.unravel_index(c, (self.size,) * k)))
        return out

    def window_for(self, group: GroupSpec) -> tuple:
        return (group.identity,) if self.window is None else self.window

    def lift(self, window: tuple, group: GroupSpec) -> np.ndarray:
        """Labels of this partition on the patterns of a larger window."""
        own = self.window_for(group)
        if own == tuple(window):
            return self.labels
        pos = [window.index(w) for w in own]
        grid = np.indices((self.size,) * len(window)).reshape(len(window), -1)
        cells = np.ravel_multi_index(tuple(grid[pos]), (self.size,) * len(own))
        return self.labels[cells]

    def to_json(self, group: GroupSpec | None = None) -> dict:
        out: dict[str, Any] = {"atoms": [[list(c) if isinstance(c, tuple) else c for c in a] for a in self.atoms()]}
        if self.window is not None:
            out["window"] = [group.element_to_json(w) if group else w for w in self.window]
        return out

    def same_as(self, other: PartitionSpec) -> bool:
        return self.size == other.size and self.window == other.window and np.array_equal(self.labels, other.labels)


# systems ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeasureSystem:
    kind: str
    group: GroupSpec
    weights: np.ndarray
    perms: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        if self.kind not in ("finite", "bernoulli"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        w = np.asarray(self.weights, dtype=float).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        perms = tuple(np.asarray(p, dtype=np.int64).copy() for p in self.perms)
        for p in perms:
            p.setflags(write=False)
        object.__setattr__(self, "perms", perms)
        if self.kind == "finite" and len(perms) != self.group.rank:
            raise ValueError("finite systems need one permutation per generator")
        if self.kind == "bernoulli" and perms:
            raise ValueError("Bernoulli systems carry no point permutations")

    @classmethod
    def bernoulli(cls, weights: Sequence[float], group: GroupSpec | None = None) -> MeasureSystem:
        return cls("bernoulli", group or GroupSpec.integers(), np.asarray(weights, dtype=float))

    @classmethod
    def finite(cls, weights: Sequence[float], perms: Sequence[Sequence[int]], group: GroupSpec | None = None) -> MeasureSystem:
        return cls("finite", group or GroupSpec.integers(), np.asarray(weights, dtype=float), tuple(perms))

    @property
    def size(self) -> int:
        """|X| for finite systems, the base alphabet size for Bernoulli."""
        return int(self.weights.shape[0])

    def _generator(self, g: int) -> np.ndarray:
        p = self.perms[abs(g) - 1]
        if g > 0:
            return p
        inv = np.empty_like(p)
        inv[p] = np.arange(p.shape[0])
        return inv

    def act_word(self, word: Sequence[int]) -> np.ndarray:
        images = np.arange(self.size)
        for g in reversed(tuple(word)):
            self.group.check_generator(g)
            images = self._generator(g)[images]
        return images

    def act(self, element: Element) -> np.ndarray:
        """Point map of ``element`` on X (finite systems)."""
        if self.kind != "finite":
            raise ValueError("only finite systems act on points")
        return self.act_word(self.group.word(element))

    def cell_weights(self, window: Sequence | None = None) -> np.ndarray:
        """Measure of each cell of the partition cell space."""
        if self.kind == "finite":
            return self.weights
        k = 1 if window is None else len(window)
        w = np.ones(1)
        for _ in range(k):
            w = np.multiply.outer(w, self.weights).ravel()
        return w

    def atom_measures(self, part: PartitionSpec) -> np.ndarray:
        self.check_partition(part)
        return np.bincount(part.labels, weights=self.cell_weights(part.window), minlength=part.n_atoms)

    def check_partition(self, part: PartitionSpec) -> None:
        if part.size != self.size:
            raise PartitionError("partition does not match the system's space")
        if self.kind == "finite" and part.window is not None:
            raise PartitionError("finite-system partitions have no window")

    def to_json(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind, "weights": self.weights.tolist()}
        if self.kind == "finite":
            out["perms"] = [p.tolist() for p in self.perms]
        return out

    @classmethod
    def from_json(cls, obj: dict, group: GroupSpec) -> MeasureSystem:
        kind = obj.get("kind")
        if kind == "bernoulli":
            return cls.bernoulli(obj["weights"], group)
        if kind == "finite":
            return cls.finite(obj["weights"], obj["perms"], group)
        raise ValueError(f"unknown system kind {kind!r}")


def validate_system(system: MeasureSystem, group: GroupSpec | None = None) -> list[str]:
    """Diagnostics for weights, measure preservation and group relations."""
    problems: list[str] = []
    group = group or system.group
    w = system.weights
    if (w < 0).any():
        problems.append("negative weight")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        problems.append(f"weights sum to {w.sum():.12g}, not 1")
    if system.kind == "bernoulli":
        return problems
    if len(system.perms) != group.rank:
        problems.append("need one permutation per generator")
        return problems
    n = system.size
    for i, p in enumerate(system.perms, start=1):
        if p.shape != (n,) or not np.array_equal(np.sort(p), np.arange(n)):
            problems.append(f"generator {i} is not a permutation of X")
            return problems
    for i, p in enumerate(system.perms, start=1):
        bad = np.flatnonzero(np.abs(w[p] - w) > WEIGHT_TOL)
        if bad.size:
            problems.append(f"generator {i} does not preserve mu (first bad point {int(bad[0])})")
    for rel in group.relations:
        img = system.act_word(rel)
        moved = np.flatnonzero(img != np.arange(n))
        if moved.size:
            problems.append(f"relation {list(rel)} fails at point {int(moved[0])}")
    return problems


def refines(alpha: PartitionSpec, xi: PartitionSpec, group: GroupSpec | None = None) -> np.ndarray | None:
    """Map alpha-atom -> xi-atom if every alpha atom lies in one xi atom, else None."""
    if alpha.size != xi.size:
        return None
    if alpha.window == xi.window:
        a_lab, x_lab = alpha.labels, xi.labels
    else:
        if group is None:
            raise PartitionError("comparing windowed partitions needs the group")
        union = tuple(dict.fromkeys(alpha.window_for(group) + xi.window_for(group)))
        if alpha.size ** len(union) > MAX_CYLINDER_CONFIGS:
            raise PartitionError("window union too large")
        a_lab, x_lab = alpha.lift(union, group), xi.lift(union, group)
    m = alpha.n_atoms
    cmap = np.full(m, -1, dtype=np.int64)
    cmap[a_lab] = x_lab
    if not np.array_equal(cmap[a_lab], x_lab):
        return None
    return cmap


def conditional_entropy(system: MeasureSystem, alpha: PartitionSpec, xi: PartitionSpec) -> float:
    """H(alpha | xi) = sum over xi atoms B of mu(B) H(alpha restricted to B)."""
    cmap = refines(alpha, xi, system.group)
    if cmap is None:
        raise PartitionError("alpha does not refine xi")
    mu = system.atom_measures(alpha)
    total = 0.0
    for b in range(xi.n_atoms):
        mass = mu[cmap == b]
        mb = mass.sum()
        if mb > 0:
            total += mb * _entropy(mass / mb)
    return total


def partition_entropy(system: MeasureSystem, part: PartitionSpec) -> float:
    return _entropy(system.atom_measures(part))


# joins -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AtomTable:
    """The join alpha_F: atoms are functions f: F -> alpha, in C order over F.

    ``digits[i, j]`` is ``f_i(F[j])``; ``measures[i]`` is the measure of the
    atom ``P_f`` (intersection over s in F of ``s A_{f(s)}``). For finite
    systems ``point_atoms[x]`` is the atom containing the point ``x``.
    """

    alpha: PartitionSpec
    F: tuple
    n: int
    measures: np.ndarray
    group: GroupSpec
    point_atoms: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.n ** len(self.F)

    @cached_property
    def digits(self) -> np.ndarray:
        return np.array(list(product(range(self.n), repeat=len(self.F))), dtype=np.int64).reshape(self.m, len(self.F))

    @cached_property
    def coord(self) -> np.ndarray:
        return np.ascontiguousarray(self.digits.T)

    @property
    def e_pos(self) -> int:
        return self.F.index(self.group.identity)

    def index(self, f: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(v) for v in f), (self.n,) * len(self.F)))

    def map_to(self, coarser: AtomTable, alpha_map: np.ndarray | None = None) -> np.ndarray:
        """Atom map onto a table with a coarser alpha and a smaller F."""
        if alpha_map is None:
            alpha_map = refines(self.alpha, coarser.alpha, self.group)
            if alpha_map is None:
                raise PartitionError("alpha does not refine the coarser table's alpha")
        try:
            pos = [self.F.index(s) for s in coarser.F]
        except ValueError:
            raise PartitionError("coarser F is not a subset of F") from None
        sub = alpha_map[self.digits[:, pos]]
        return np.ravel_multi_index(tuple(sub.T), (coarser.n,) * len(coarser.F)).astype(np.int64)


def join_partition(system: MeasureSystem, alpha: PartitionSpec, F: Sequence[Element]) -> AtomTable:
    """Atoms and measures of alpha_F."""
    group = system.group
    system.check_partition(alpha)
    F = tuple(group.canonical(s) for s in F)
    if len(set(F)) != len(F):
        raise PartitionError("F has repeated elements")
    if group.identity not in F:
        raise PartitionError("F must contain the identity")
    n = alpha.n_atoms
    shape = (n,) * len(F)
    if system.kind == "finite":
        cols = []
        for s in F:
            inv = np.empty(system.size, dtype=np.int64)
            inv[system.act(s)] = np.arange(system.size)
            cols.append(alpha.labels[inv])  # x in sA  iff  s^{-1}x in A
        point_atoms = np.ravel_multi_index(tuple(cols), shape).astype(np.int64)
        measures = np.bincount(point_atoms, weights=system.weights, minlength=n ** len(F))
        return AtomTable(alpha, F, n, measures, group, point_atoms)
    if alpha.window is None:
        kappa = system.atom_measures(alpha)
        measures = np.ones(1)
        for _ in F:
            measures = np.multiply.outer(measures, kappa).ravel()
        return AtomTable(alpha, F, n, measures, group)
    # Windowed cylinders: z lies in sC iff (z(st))_{t in K} lies in C.
    K = alpha.window
    U = tuple(dict.fromkeys(group.multiply(s, t) for s in F for t in K))
    base = system.size
    if base ** len(U) > MAX_CYLINDER_CONFIGS:
        raise PartitionError("cylinder join too large to tabulate")
    grid = np.indices((base,) * len(U)).reshape(len(U), -1)
    prob = np.ones(grid.shape[1])
    for row in grid:
        prob *= system.weights[row]
    cols = []
    for s in F:
        pos = [U.index(group.multiply(s, t)) for t in K]
        cells = np.ravel_multi_index(tuple(grid[pos]), (base,) * len(K))
        cols.append(alpha.labels[cells])
    atom = np.ravel_multi_index(tuple(cols), shape)
    measures = np.bincount(atom, weights=prob, minlength=n ** len(F))
    return AtomTable(alpha, F, n, measures, group)


def generated_partition(system: MeasureSystem, part: PartitionSpec) -> np.ndarray:
    """Labels of the join of all translates of ``part`` (finite systems)."""
    labels = part.labels.copy()
    gens = [system._generator(g) for i in range(1, system.group.rank + 1) for g in (i, -i)]
    while True:
        keys = np.stack([labels] + [labels[p] for p in gens], axis=1)
        _, new = np.unique(keys, axis=0, return_inverse=True)
        new = new.ravel()
        if len(np.unique(new)) == len(np.unique(labels)):
            return new
        labels = new


def is_generating(system: MeasureSystem, part: PartitionSpec) -> bool:
    """Whether the translates of ``part`` separate the points of X."""
    if system.kind != "finite":
        raise ValueError("generation is only decidable here for finite systems")
    labels = generated_partition(system, part)
    return len(np.unique(labels)) == system.size
