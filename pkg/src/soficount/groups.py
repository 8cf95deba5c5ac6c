"""Finitely generated groups with canonical element forms.

A word is a sequence of signed generator indices: ``+i`` is generator ``i``
(1-based) and ``-i`` its inverse. Each supported kind fixes a canonical form
for elements:

``Z``       integers, generator ``x``; the element ``n`` has word ``x^n``.
``Z2``      pairs ``(a, b)``, generators ``x, y``; word ``x^a y^b``.
``free``    freely reduced words (tuples of signed indices).
``finite``  element ids ``0..m-1`` of a multiplication table; the word of
            an element is its shortlex-first shortest word over the
            generators.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Any, Hashable, Sequence

Word = tuple[int, ...]
Element = Hashable

KINDS = ("Z", "Z2", "free", "finite")


class GroupError(ValueError):
    pass


def free_reduce(word: Sequence[int]) -> Word:
    out: list[int] = []
    for g in word:
        if g == 0:
            raise GroupError("generator index 0 is not allowed")
        if out and out[-1] == -g:
            out.pop()
        else:
            out.append(int(g))
    return tuple(out)


def invert_word(word: Sequence[int]) -> Word:
    return tuple(-g for g in reversed(word))


def check_table(table: Sequence[Sequence[int]]) -> list[str]:
    """Return the reasons ``table`` is not a group multiplication table."""
    m = len(table)
    problems = []
    if m == 0:
        return ["empty table"]
    for row in table:
        if len(row) != m or any(not 0 <= v < m for v in row):
            return ["table is not an m x m array over 0..m-1"]
    ident = [e for e in range(m) if all(table[e][x] == x and table[x][e] == x for x in range(m))]
    if not ident:
        problems.append("no identity element")
    else:
        e = ident[0]
        for a in range(m):
            if not any(table[a][b] == e and table[b][a] == e for b in range(m)):
                problems.append(f"element {a} has no inverse")
                break
    for a, b, c in product(range(m), repeat=3):
        if table[table[a][b]][c] != table[a][table[b][c]]:
            problems.append(f"not associative at ({a}, {b}, {c})")
            break
    return problems


def cyclic_table(m: int) -> list[list[int]]:
    return [[(a + b) % m for b in range(m)] for a in range(m)]


@dataclass(frozen=True, eq=False)
class GroupSpec:
    kind: str
    rank: int = 1
    table: tuple[tuple[int, ...], ...] | None = None
    generators: tuple[int, ...] | None = None
    _relations: tuple[Word, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GroupError(f"unknown group kind {self.kind!r}")
        if self.rank < 1:
            raise GroupError("generator count must be positive")
        if self.kind == "finite":
            if self.table is None or self.generators is None:
                raise GroupError("finite groups need a table and generators")
            problems = check_table(self.table)
            if problems:
                raise GroupError("invalid multiplication table: " + "; ".join(problems))
            if len(self.generators) != self.rank:
                raise GroupError("rank must equal the number of generators")
        for rel in self._relations:
            if not rel:
                raise GroupError("relations must be nonempty words")

    # constructors ---------------------------------------------------------
    @classmethod
    def integers(cls) -> GroupSpec:
        return cls("Z", 1)

    @classmethod
    def z2(cls) -> GroupSpec:
        return cls("Z2", 2, _relations=((1, 2, -1, -2),))

    @classmethod
    def free(cls, rank: int) -> GroupSpec:
        return cls("free", rank)

    @classmethod
    def finite(cls, table: Sequence[Sequence[int]], generators: Sequence[int] | None = None) -> GroupSpec:
        tab = tuple(tuple(int(v) for v in row) for row in table)
        problems = check_table(tab)
        if problems:
            raise GroupError("invalid multiplication table: " + "; ".join(problems))
        if generators is None:
            generators = _greedy_generators(tab)
        gens = tuple(int(g) for g in generators)
        return cls("finite", len(gens), tab, gens)

    # structure ------------------------------------------------------------
    @property
    def identity(self) -> Element:
        if self.kind == "Z":
            return 0
        if self.kind == "Z2":
            return (0, 0)
        if self.kind == "free":
            return ()
        return self._finite_identity

    @cached_property
    def _finite_identity(self) -> int:
        tab = self.table
        return next(e for e in range(len(tab)) if all(tab[e][x] == x for x in range(len(tab))))

    @cached_property
    def relations(self) -> tuple[Word, ...]:
        if self.kind != "finite":
            return self._relations
        # Multiplication-table presentation: g * h = gh for generators g.
        rels = []
        for gi, g in enumerate(self.generators, start=1):
            for h in range(len(self.table)):
                gh = self.table[g][h]
                rels.append((gi,) + self.word(h) + invert_word(self.word(gh)))
        return tuple(r for r in rels if r)

    def check_generator(self, g: int) -> None:
        if g == 0 or abs(g) > self.rank:
            raise GroupError(f"unknown generator index {g} (rank {self.rank})")

    def from_word(self, word: Sequence[int]) -> Element:
        for g in word:
            self.check_generator(g)
        if self.kind == "Z":
            return sum(1 if g > 0 else -1 for g in word)
        if self.kind == "Z2":
            a = sum((1 if g > 0 else -1) for g in word if abs(g) == 1)
            b = sum((1 if g > 0 else -1) for g in word if abs(g) == 2)
            return (a, b)
        if self.kind == "free":
            return free_reduce(word)
        x = self.identity
        for g in reversed(word):
            x = self.table[self._gen_element(g)][x]
        return x

    def _gen_element(self, g: int) -> int:
        el = self.generators[abs(g) - 1]
        return el if g > 0 else self._finite_inverse[el]

    @cached_property
    def _finite_inverse(self) -> tuple[int, ...]:
        e = self.identity
        m = len(self.table)
        return tuple(next(b for b in range(m) if self.table[a][b] == e) for a in range(m))

    @cached_property
    def _finite_words(self) -> dict[int, Word]:
        # Breadth-first search in generator order gives shortlex-first words.
        letters = []
        for i in range(1, self.rank + 1):
            letters += [i, -i]
        words = {self.identity: ()}
        queue = deque([self.identity])
        while queue:
            x = queue.popleft()
            for g in letters:
                y = self.table[x][self._gen_element(g)]
                if y not in words:
                    words[y] = words[x] + (g,)
                    queue.append(y)
        if len(words) != len(self.table):
            raise GroupError("generators do not generate the finite group")
        return words

    def word(self, element: Element) -> Word:
        element = self.canonical(element)
        if self.kind == "Z":
            n = element
            return (1,) * n if n >= 0 else (-1,) * (-n)
        if self.kind == "Z2":
            a, b = element
            return ((1,) * a if a >= 0 else (-1,) * (-a)) + ((2,) * b if b >= 0 else (-2,) * (-b))
        if self.kind == "free":
            return element
        return self._finite_words[element]

    def canonical(self, element: Any) -> Element:
        """Coerce a loosely typed element (e.g. parsed JSON) to canonical form."""
        if self.kind == "Z":
            if isinstance(element, bool) or int(element) != element:
                raise GroupError(f"{element!r} is not an integer")
            return int(element)
        if self.kind == "Z2":
            a, b = element
            return (int(a), int(b))
        if self.kind == "free":
            word = tuple(int(g) for g in element)
            for g in word:
                self.check_generator(g)
            red = free_reduce(word)
            return red
        el = int(element)
        if not 0 <= el < len(self.table):
            raise GroupError(f"element {element!r} outside the finite group")
        return el

    def multiply(self, a: Element, b: Element) -> Element:
        if self.kind == "Z":
            return a + b
        if self.kind == "Z2":
            return (a[0] + b[0], a[1] + b[1])
        if self.kind == "free":
            return free_reduce(a + b)
        return self.table[a][b]

    def inverse(self, a: Element) -> Element:
        if self.kind == "Z":
            return -a
        if self.kind == "Z2":
            return (-a[0], -a[1])
        if self.kind == "free":
            return invert_word(a)
        return self._finite_inverse[a]

    def ball(self, radius: int) -> list[Element]:
        """Distinct elements with canonical word length at most ``radius``."""
        letters = []
        for i in range(1, self.rank + 1):
            letters += [i, -i]
        seen = {self.identity: None}
        frontier = [self.identity]
        for _ in range(radius):
            nxt = []
            for x in frontier:
                for g in letters:
                    y = self.multiply(x, self.from_word((g,)))
                    if y not in seen:
                        seen[y] = None
                        nxt.append(y)
            frontier = nxt
        return list(seen)

    # serialization --------------------------------------------------------
    def element_to_json(self, element: Element) -> Any:
        if self.kind == "Z2":
            return list(element)
        if self.kind == "free":
            return list(element)
        return element

    def to_json(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "free":
            out["rank"] = self.rank
        if self.kind == "finite":
            out["table"] = [list(r) for r in self.table]
            out["generators"] = list(self.generators)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> GroupSpec:
        kind = obj.get("kind")
        if kind == "Z":
            return cls.integers()
        if kind == "Z2":
            return cls.z2()
        if kind == "free":
            return cls.free(int(obj.get("rank", 1)))
        if kind == "finite":
            return cls.finite(obj["table"], obj.get("generators"))
        raise GroupError(f"unknown group kind {kind!r}")

    def __eq__(self, other):
        if not isinstance(other, GroupSpec):
            return NotImplemented
        return self.to_json() == other.to_json()

    def __hash__(self):
        return hash(repr(self.to_json()))


def _greedy_generators(table) -> tuple[int, ...]:
    """Smallest-index greedy generating set: add x if it is not yet reached."""
    m = len(table)
    e = next(x for x in range(m) if all(table[x][y] == y for y in range(m)))
    gens: list[int] = []
    reached = {e}
    for x in range(m):
        if x in reached:
            continue
        gens.append(x)
        reached = _closure(table, gens, e)
        if len(reached) == m:
            break
    return tuple(gens)


def _closure(table, gens, e) -> set[int]:
    reached = {e}
    queue = deque([e])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = table[g][x]
            if y not in reached:
                reached.add(y)
                queue.append(y)
    return reached
