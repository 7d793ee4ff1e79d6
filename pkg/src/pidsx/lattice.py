"""Antichain lattice combinatorics.

Collections of source indices, antichains thereof, monotone 0/1 parthood
labellings, and the square linear system that ties per-antichain redundancies
to per-labelling atoms.  Everything here is pure combinatorics on immutable
values; no probability enters this module.

Canonical order convention (used for hashing, equality, and all enumeration
output): collections sort by ``(size, indices)``; antichains sort by
``(number of collections, element-wise collection keys)``.  The source count
is capped at ``MAX_SOURCES`` because the number of antichains grows like the
Dedekind numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import CapExceeded, IncompleteInput, ValidationError

MAX_SOURCES = 5

# antichains of non-empty collections over n sources (Dedekind-like counts)
ANTICHAIN_COUNTS = {1: 1, 2: 4, 3: 18, 4: 166, 5: 7579}


@dataclass(frozen=True, order=True)
class Collection:
    """A non-empty set of source indices, stored strictly increasing, 1-based."""

    sort_key: tuple = field(init=False, repr=False)
    indices: tuple[int, ...] = ()

    def __post_init__(self):
        idx = tuple(self.indices)
        if not idx:
            raise ValidationError("collection must be non-empty")
        if any(not isinstance(i, int) or i < 1 for i in idx):
            raise ValidationError(f"collection indices must be integers >= 1: {idx}")
        if any(a >= b for a, b in zip(idx, idx[1:])):
            raise ValidationError(f"collection indices must be strictly increasing: {idx}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "sort_key", (len(idx), idx))

    @classmethod
    def of(cls, indices) -> "Collection":
        return cls(indices=tuple(sorted(set(indices))))

    def issubset(self, other: "Collection") -> bool:
        return set(self.indices) <= set(other.indices)

    def union(self, other: "Collection") -> "Collection":
        return Collection.of(set(self.indices) | set(other.indices))

    def __str__(self):
        return "{" + ",".join(str(i) for i in self.indices) + "}"


@dataclass(frozen=True, order=True)
class Antichain:
    """A set of pairwise incomparable collections in canonical order."""

    sort_key: tuple = field(init=False, repr=False)
    collections: tuple[Collection, ...] = ()

    def __post_init__(self):
        cols = tuple(sorted(set(self.collections), key=lambda c: c.sort_key))
        if not cols:
            raise ValidationError("antichain must contain at least one collection")
        for a, b in combinations(cols, 2):
            if a.issubset(b) or b.issubset(a):
                raise ValidationError(f"collections {a} and {b} are comparable")
        object.__setattr__(self, "collections", cols)
        object.__setattr__(self, "sort_key", (len(cols), tuple(c.sort_key for c in cols)))

    @classmethod
    def of(cls, *collections) -> "Antichain":
        cols = [c if isinstance(c, Collection) else Collection.of(c) for c in collections]
        return cls(collections=tuple(cols))

    @classmethod
    def reduced(cls, collections) -> "Antichain":
        """Build an antichain from an arbitrary family by dropping supersets.

        Dropping a collection that contains another never changes the union
        event the antichain stands for, so this is the canonical form of any
        redundancy query.
        """
        cols = [c if isinstance(c, Collection) else Collection.of(c) for c in collections]
        kept = [c for c in cols if not any(o.issubset(c) and o != c for o in cols)]
        return cls(collections=tuple(kept))

    def max_index(self) -> int:
        return max(i for c in self.collections for i in c.indices)

    def __iter__(self):
        return iter(self.collections)

    def __len__(self):
        return len(self.collections)

    def __str__(self):
        return "".join(str(c) for c in self.collections)


def _check_cap(n: int):
    if not isinstance(n, int) or n < 1 or n > MAX_SOURCES:
        raise CapExceeded(f"source count must be in [1, {MAX_SOURCES}], got {n}")


def _all_collections(n: int) -> list[Collection]:
    cols = []
    for size in range(1, n + 1):
        for idx in combinations(range(1, n + 1), size):
            cols.append(Collection(indices=idx))
    return sorted(cols, key=lambda c: c.sort_key)


@lru_cache(maxsize=None)
def enumerate_antichains(n: int) -> tuple[Antichain, ...]:
    """All antichains of non-empty collections over ``{1..n}``, canonical order.

    Depth-first construction: collections are considered in canonical order
    and each antichain is emitted exactly once as its sorted tuple, so no
    post-hoc deduplication is needed.
    """
    _check_cap(n)
    cols = _all_collections(n)
    sets = [set(c.indices) for c in cols]
    out: list[Antichain] = []

    def extend(start: int, chosen: list[int]):
        for i in range(start, len(cols)):
            si = sets[i]
            if any(sets[j] <= si or si <= sets[j] for j in chosen):
                continue
            chosen.append(i)
            out.append(Antichain(collections=tuple(cols[j] for j in chosen)))
            extend(i + 1, chosen)
            chosen.pop()

    extend(0, [])
    return tuple(sorted(out, key=lambda a: a.sort_key))


@dataclass(frozen=True)
class ParthoodDistribution:
    """Monotone 0/1 labelling of all subsets of ``{1..n}``.

    Stored as the set of index tuples labelled 1; the empty set is always 0
    and the full set always 1.  ``minimal_ones`` recovers the antichain of
    minimal 1-labelled collections, which identifies the labelling uniquely.
    """

    n: int
    ones: frozenset

    def __post_init__(self):
        full = tuple(range(1, self.n + 1))
        if full not in self.ones:
            raise ValidationError("full source set must be labelled 1")
        if () in self.ones:
            raise ValidationError("empty set must be labelled 0")
        ones = self.ones
        # explicit monotonicity check (cheap at n <= 5)
        for sub in ones:
            ss = set(sub)
            for size in range(len(sub), self.n + 1):
                for sup in combinations(range(1, self.n + 1), size):
                    if ss <= set(sup) and sup not in ones:
                        raise ValidationError(f"labelling not monotone at {sub} vs {sup}")

    def value(self, collection) -> int:
        idx = tuple(collection.indices) if isinstance(collection, Collection) else tuple(sorted(collection))
        return 1 if idx in self.ones else 0

    def minimal_ones(self) -> Antichain:
        mins = [
            s for s in self.ones
            if not any(set(o) < set(s) for o in self.ones)
        ]
        return Antichain.of(*mins)

    @classmethod
    def from_antichain(cls, antichain: Antichain, n: int) -> "ParthoodDistribution":
        ones = set()
        members = [set(c.indices) for c in antichain]
        for size in range(1, n + 1):
            for sub in combinations(range(1, n + 1), size):
                if any(m <= set(sub) for m in members):
                    ones.add(sub)
        return cls(n=n, ones=frozenset(ones))

    def __str__(self):
        return f"atom[{self.minimal_ones()}]"


@lru_cache(maxsize=None)
def parthood_distributions(n: int) -> tuple[ParthoodDistribution, ...]:
    """All parthood distributions over n sources, ordered like their antichains.

    Generated through the minimal-1-sets bijection with antichains; the
    brute-force filter over all 2^(2^n) assignments is kept in the test suite
    as the independent oracle.
    """
    _check_cap(n)
    return tuple(ParthoodDistribution.from_antichain(a, n) for a in enumerate_antichains(n))


@dataclass
class LatticeResult:
    """Per-antichain redundancies and per-parthood atoms, both in bits."""

    n: int
    redundancies: dict
    atoms: dict

    def atom_by_antichain(self, antichain: Antichain):
        for f, v in self.atoms.items():
            if f.minimal_ones() == antichain:
                return v
        raise KeyError(str(antichain))


def _is_rational(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def _solve_fraction(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Exact Gaussian elimination with partial (first non-zero) pivoting."""
    m = [row[:] + [b] for row, b in zip(matrix, rhs)]
    size = len(m)
    for col in range(size):
        pivot = next((r for r in range(col, size) if m[r][col] != 0), None)
        if pivot is None:
            raise ValidationError("incidence system is singular")  # cannot happen for valid n
        m[col], m[pivot] = m[pivot], m[col]
        inv = Fraction(1, 1) / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(size):
            if r != col and m[r][col] != 0:
                factor = m[r][col]
                m[r] = [a - factor * b for a, b in zip(m[r], m[col])]
    return [row[-1] for row in m]


def invert_redundancy(redundancies: dict, n: int) -> dict:
    """Solve for atoms: redundancy(alpha) = sum of atoms whose labelling is 1 on
    every collection of alpha.

    The incidence matrix is square and invertible, so the solution is unique.
    Rational inputs are solved exactly with Fraction elimination; anything
    else goes through a dense float solve.
    """
    _check_cap(n)
    chains = enumerate_antichains(n)
    parthoods = parthood_distributions(n)
    missing = [a for a in chains if a not in redundancies]
    if missing:
        raise IncompleteInput(
            f"redundancies missing {len(missing)} antichain(s), e.g. {missing[0]}"
        )
    rows = []
    for alpha in chains:
        rows.append([
            1 if all(f.value(a) == 1 for a in alpha) else 0
            for f in parthoods
        ])
    rhs = [redundancies[a] for a in chains]
    if all(_is_rational(v) for v in rhs):
        sol = _solve_fraction(
            [[Fraction(v) for v in row] for row in rows],
            [Fraction(v) for v in rhs],
        )
    else:
        sol = np.linalg.solve(np.array(rows, dtype=float), np.array(rhs, dtype=float)).tolist()
    return dict(zip(parthoods, sol))


def recompose(atoms: dict, n: int) -> dict:
    """Sum atoms back into per-antichain redundancies (the forward system)."""
    _check_cap(n)
    out = {}
    for alpha in enumerate_antichains(n):
        total = 0
        for f, v in atoms.items():
            if all(f.value(a) == 1 for a in alpha):
                total += v
        out[alpha] = total
    return out
