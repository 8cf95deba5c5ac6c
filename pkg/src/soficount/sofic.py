"""Finite permutation models of groups and their defects.

A :class:`SoficMap` assigns a permutation of ``{0..d-1}`` to each generator.
Any other element acts by composing generator permutations along its
canonical word, so multiplicativity defects measure exactly how far the
model is from satisfying the group's relations.

Points are 0-based in memory. The JSON form stores permutation images
1-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Any, Iterable, Sequence

import numpy as np

from .groups import Element, GroupSpec, cyclic_table
from .rng import stream


@dataclass(frozen=True, eq=False)
class Permutation:
    images: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.images, dtype=np.int64)
        d = arr.shape[0]
        if arr.ndim != 1 or not np.array_equal(np.sort(arr), np.arange(d)):
            raise ValueError("images must be a bijection of {0..d-1}")
        arr.setflags(write=False)
        object.__setattr__(self, "images", arr)

    @classmethod
    def identity(cls, d: int) -> Permutation:
        return cls(np.arange(d))

    @classmethod
    def from_one_based(cls, images: Sequence[int]) -> Permutation:
        return cls(np.asarray(images, dtype=np.int64) - 1)

    @property
    def d(self) -> int:
        return self.images.shape[0]

    @cached_property
    def inverse(self) -> Permutation:
        inv = np.empty_like(self.images)
        inv[self.images] = np.arange(self.d)
        p = Permutation.__new__(Permutation)
        inv.setflags(write=False)
        object.__setattr__(p, "images", inv)
        p.__dict__["inverse"] = self
        return p

    def __call__(self, k):
        return self.images[k]

    def compose(self, other: Permutation) -> Permutation:
        """``self o other``: apply ``other`` first."""
        return Permutation(self.images[other.images])

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.images, np.arange(self.d)))

    def to_list(self, one_based: bool = True) -> list[int]:
        return (self.images + (1 if one_based else 0)).tolist()

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.images, other.images)

    def __hash__(self):
        return hash(self.images.tobytes())


@dataclass(frozen=True, eq=False)
class SoficMap:
    d: int
    group: GroupSpec
    perms: tuple[Permutation, ...]
    seed: int | None = None
    builder: str = "custom"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        if len(self.perms) != self.group.rank:
            raise ValueError("need one permutation per generator")
        for p in self.perms:
            if p.d != self.d:
                raise ValueError("generator permutation has the wrong size")

    def generator(self, g: int) -> Permutation:
        self.group.check_generator(g)
        p = self.perms[abs(g) - 1]
        return p if g > 0 else p.inverse

    def evaluate_word(self, word: Sequence[int]) -> Permutation:
        """Compose generator permutations along ``word`` (leftmost acts last)."""
        images = np.arange(self.d)
        for g in reversed(tuple(word)):
            images = self.generator(g).images[images]
        return Permutation(images)

    def evaluate(self, element: Element) -> Permutation:
        """The permutation assigned to a group element via its canonical word."""
        element = self.group.canonical(element)
        perm = self._cache.get(element)
        if perm is None:
            perm = self.evaluate_word(self.group.word(element))
            self._cache[element] = perm
        return perm

    def __eq__(self, other):
        return (
            isinstance(other, SoficMap)
            and self.d == other.d
            and self.group == other.group
            and self.perms == other.perms
            and self.seed == other.seed
        )

    def __hash__(self):
        return hash((self.d, self.perms))

    def to_json(self) -> dict[str, Any]:
        return {
            "d": self.d,
            "group": self.group.to_json(),
            "perms": [p.to_list(one_based=True) for p in self.perms],
            "seed": self.seed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> SoficMap:
        group = GroupSpec.from_json(obj["group"])
        perms = tuple(Permutation.from_one_based(p) for p in obj["perms"])
        return cls(int(obj["d"]), group, perms, obj.get("seed"), obj.get("builder", "custom"))


# builders -----------------------------------------------------------------

def build_cyclic(d: int) -> SoficMap:
    """Rotation model of Z on Z/dZ: the generator sends k to k+1 mod d."""
    if d < 1:
        raise ValueError("d must be positive")
    return SoficMap(d, GroupSpec.integers(), (Permutation(np.roll(np.arange(d), -1)),), builder="cyclic")


def build_torus(m: int) -> SoficMap:
    """Model of Z^2 on the m x m torus; point (i, j) is stored at i*m + j."""
    if m < 1:
        raise ValueError("m must be positive")
    idx = np.arange(m * m).reshape(m, m)
    x = np.roll(idx, -1, axis=0).ravel()
    y = np.roll(idx, -1, axis=1).ravel()
    return SoficMap(m * m, GroupSpec.z2(), (Permutation(x), Permutation(y)), builder="torus")


def build_regular(table: Sequence[Sequence[int]], generators: Sequence[int] | None = None) -> SoficMap:
    """Left regular representation of a finite group given by its table."""
    group = GroupSpec.finite(table, generators)
    tab = np.asarray(group.table, dtype=np.int64)
    perms = tuple(Permutation(tab[g]) for g in group.generators)
    return SoficMap(len(tab), group, perms, builder="regular")


def build_cyclic_group_regular(m: int) -> SoficMap:
    return build_regular(cyclic_table(m))


def build_random_free(rank: int, d: int, seed: int) -> SoficMap:
    """Independent uniform permutations; generator i uses stream (seed, i)."""
    if rank < 1 or d < 1:
        raise ValueError("rank and d must be positive")
    perms = tuple(Permutation(stream(seed, i).permutation(d)) for i in range(rank))
    return SoficMap(d, GroupSpec.free(rank), perms, seed=int(seed), builder="random_free")


def build(spec: dict[str, Any], d: int | None = None, group: GroupSpec | None = None) -> SoficMap:
    """Build from a config mapping ``{"builder": ..., ...}`` at size ``d``."""
    kind = spec.get("builder")
    if kind == "cyclic":
        return build_cyclic(int(d))
    if kind == "torus":
        m = int(round(int(d) ** 0.5))
        if m * m != int(d):
            raise ValueError(f"torus builder needs a square d, got {d}")
        return build_torus(m)
    if kind == "regular":
        if group is not None and group.kind == "finite":
            return build_regular(group.table, group.generators)
        return build_regular(spec["table"], spec.get("generators"))
    if kind == "random_free":
        rank = int(spec.get("rank", group.rank if group is not None else 1))
        if "seed" not in spec:
            raise ValueError("random_free builder needs a seed")
        return build_random_free(rank, int(d), int(spec["seed"]))
    raise ValueError(f"unknown sofic builder {kind!r}")


# defects ------------------------------------------------------------------

@dataclass(frozen=True)
class DefectReport:
    mult: dict[tuple[Element, Element], float]
    free: dict[tuple[Element, Element], float]

    def max_mult(self) -> float:
        return max(self.mult.values(), default=0.0)

    def max_free(self) -> float:
        return max(self.free.values(), default=0.0)

    def total(self) -> float:
        return float(sum(self.mult.values()) + sum(self.free.values()))


def defect_report(sofic: SoficMap, F: Iterable[Element]) -> DefectReport:
    """Multiplicativity defects over F x F and freeness defects over distinct pairs."""
    group = sofic.group
    F = [group.canonical(s) for s in F]
    if not F:
        raise ValueError("F must be nonempty")
    d = sofic.d
    mult = {}
    free = {}
    for s, t in product(F, repeat=2):
        ps, pt = sofic.evaluate(s), sofic.evaluate(t)
        pst = sofic.evaluate(group.multiply(s, t))
        mult[(s, t)] = float(np.count_nonzero(pst.images != ps.images[pt.images])) / d
        if s != t:
            free[(s, t)] = float(np.count_nonzero(ps.images == pt.images)) / d
    return DefectReport(mult, free)


def good_set(sofic: SoficMap, F: Iterable[Element]) -> np.ndarray:
    """Points v with sigma_s sigma_t(v) = sigma_st(v) for s, t in F and
    pairwise distinct sigma_s^{-1}(v); returned sorted, 0-based."""
    group = sofic.group
    F = list(dict.fromkeys(group.canonical(s) for s in F))
    if not F:
        raise ValueError("F must be nonempty")
    ok = np.ones(sofic.d, dtype=bool)
    for s, t in product(F, repeat=2):
        ps, pt = sofic.evaluate(s), sofic.evaluate(t)
        ok &= sofic.evaluate(group.multiply(s, t)).images == ps.images[pt.images]
    invs = [sofic.evaluate(s).inverse.images for s in F]
    for i in range(len(F)):
        for j in range(i + 1, len(F)):
            ok &= invs[i] != invs[j]
    return np.flatnonzero(ok)
