"""Binary relations on finite sets, tolerances, congruences and congruence lattices.

A relation on ``{0..n-1}`` is stored as ``n`` integer bitmasks; bit ``j`` of row
``i`` is set iff ``(i, j)`` is in the relation.  Composition ORs together the
rows of the right factor selected by a row of the left factor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .algebra_core import FiniteAlgebra


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class BinaryRelation:
    size: int
    rows: tuple[int, ...]

    def __post_init__(self):
        if len(self.rows) != self.size:
            raise ValueError(f"relation on {self.size} elements needs {self.size} rows")

    @classmethod
    def identity(cls, n: int) -> "BinaryRelation":
        return cls(n, tuple(1 << i for i in range(n)))

    @classmethod
    def full(cls, n: int) -> "BinaryRelation":
        return cls(n, ((1 << n) - 1,) * n)

    @classmethod
    def empty(cls, n: int) -> "BinaryRelation":
        return cls(n, (0,) * n)

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]]) -> "BinaryRelation":
        rows = [0] * n
        for a, b in pairs:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"pair {(a, b)} outside universe of size {n}")
            rows[a] |= 1 << b
        return cls(n, tuple(rows))

    @classmethod
    def from_matrix(cls, m) -> "BinaryRelation":
        m = np.asarray(m, dtype=bool)
        n = m.shape[0]
        rows = []
        for i in range(n):
            r = 0
            for j in np.flatnonzero(m[i]):
                r |= 1 << int(j)
            rows.append(r)
        return cls(n, tuple(rows))

    def to_matrix(self) -> np.ndarray:
        m = np.zeros((self.size, self.size), dtype=bool)
        for a, b in self.pairs():
            m[a, b] = True
        return m

    def pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a, r in enumerate(self.rows) for b in _bits(r)]

    def __contains__(self, pair) -> bool:
        a, b = pair
        return bool(self.rows[a] >> b & 1)

    def __len__(self):
        return sum(bin(r).count("1") for r in self.rows)

    def __le__(self, other: "BinaryRelation") -> bool:
        _same(self, other)
        return all(a & ~b == 0 for a, b in zip(self.rows, other.rows))

    def __and__(self, other):
        return intersect(self, other)

    def __or__(self, other):
        return union(self, other)

    def __matmul__(self, other):
        return compose(self, other)

    def __str__(self):
        return "{" + ", ".join(f"({a},{b})" for a, b in self.pairs()) + "}"

    def is_reflexive(self) -> bool:
        return all(r >> i & 1 for i, r in enumerate(self.rows))

    def is_symmetric(self) -> bool:
        return self == converse(self)

    def is_transitive(self) -> bool:
        return compose(self, self) <= self


def _same(R: BinaryRelation, S: BinaryRelation) -> None:
    if R.size != S.size:
        raise ValueError(f"size mismatch: {R.size} vs {S.size}")


def compose(R: BinaryRelation, S: BinaryRelation) -> BinaryRelation:
    _same(R, S)
    out = []
    for r in R.rows:
        acc = 0
        for b in _bits(r):
            acc |= S.rows[b]
        out.append(acc)
    return BinaryRelation(R.size, tuple(out))


def compose_chain(R: BinaryRelation, S: BinaryRelation, n: int) -> BinaryRelation:
    """``R o S o R o S ...`` with ``n`` factors; 0 factors is the identity relation."""
    _same(R, S)
    if n < 0:
        raise ValueError("number of factors must be nonnegative")
    if n == 0:
        return BinaryRelation.identity(R.size)
    out = R
    for i in range(1, n):
        out = compose(out, S if i % 2 else R)
    return out


def compose_all(factors: Sequence[BinaryRelation], size: Optional[int] = None) -> BinaryRelation:
    if not factors:
        if size is None:
            raise ValueError("empty product needs an explicit size")
        return BinaryRelation.identity(size)
    out = factors[0]
    for f in factors[1:]:
        out = compose(out, f)
    return out


def relation_power(R: BinaryRelation, m: int) -> BinaryRelation:
    return compose_chain(R, R, m)


def intersect(R: BinaryRelation, S: BinaryRelation) -> BinaryRelation:
    _same(R, S)
    return BinaryRelation(R.size, tuple(a & b for a, b in zip(R.rows, S.rows)))


def union(R: BinaryRelation, S: BinaryRelation) -> BinaryRelation:
    _same(R, S)
    return BinaryRelation(R.size, tuple(a | b for a, b in zip(R.rows, S.rows)))


def converse(R: BinaryRelation) -> BinaryRelation:
    rows = [0] * R.size
    for a, r in enumerate(R.rows):
        for b in _bits(r):
            rows[b] |= 1 << a
    return BinaryRelation(R.size, tuple(rows))


def transitive_closure(R: BinaryRelation) -> BinaryRelation:
    rows = list(R.rows)
    for k in range(R.size):
        bit, rk = 1 << k, rows[k]
        for i in range(R.size):
            if rows[i] & bit:
                rows[i] |= rk
    return BinaryRelation(R.size, tuple(rows))


# -- compatibility -----------------------------------------------------------


def _images(A: FiniteAlgebra, pa: np.ndarray, pb: np.ndarray):
    """Yield, per operation, the pairs (f(a_1..a_k), f(b_1..b_k)) over all k-tuples of pairs."""
    n = A.size
    for sym, k in A.signature:
        tab = A.tables[sym].astype(np.int64)
        if k == 0:
            yield np.array([tab[0]]), np.array([tab[0]])
            continue
        la = np.zeros(1, dtype=np.int64)
        lb = np.zeros(1, dtype=np.int64)
        for _ in range(k):
            la = (la[:, None] * n + pa[None, :]).ravel()
            lb = (lb[:, None] * n + pb[None, :]).ravel()
        yield tab[la], tab[lb]


def is_compatible(A: FiniteAlgebra, R: BinaryRelation) -> bool:
    m = R.to_matrix()
    pa, pb = np.nonzero(m)
    for ia, ib in _images(A, pa.astype(np.int64), pb.astype(np.int64)):
        if not m[ia, ib].all():
            return False
    return True


def compatible_closure(A: FiniteAlgebra, R: BinaryRelation) -> BinaryRelation:
    """Least relation containing ``R`` that is closed under every operation of ``A``."""
    if R.size != A.size:
        raise ValueError("relation size differs from algebra size")
    m = R.to_matrix()
    while True:
        pa, pb = np.nonzero(m)
        grown = m.copy()
        for ia, ib in _images(A, pa.astype(np.int64), pb.astype(np.int64)):
            grown[ia, ib] = True
        if (grown == m).all():
            return BinaryRelation.from_matrix(m)
        m = grown


def is_tolerance(A: FiniteAlgebra, R: BinaryRelation) -> bool:
    return R.is_reflexive() and R.is_symmetric() and is_compatible(A, R)


def is_congruence(A: FiniteAlgebra, R: BinaryRelation) -> bool:
    return is_tolerance(A, R) and R.is_transitive()


def tolerance_generated(A: FiniteAlgebra, pairs: Iterable[tuple[int, int]]) -> BinaryRelation:
    """Least reflexive, symmetric, compatible relation containing ``pairs``."""
    pairs = list(pairs)
    R = union(BinaryRelation.identity(A.size), BinaryRelation.from_pairs(A.size, pairs))
    while True:
        S = compatible_closure(A, union(R, converse(R)))
        if S == R:
            return R
        R = S


# -- congruences -------------------------------------------------------------


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        # smaller root wins so representatives are block minima
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True

    def blocks(self) -> tuple[tuple[int, ...], ...]:
        groups: dict[int, list[int]] = {}
        for a in range(len(self.parent)):
            groups.setdefault(self.find(a), []).append(a)
        return tuple(sorted(tuple(g) for g in groups.values()))


@dataclass(frozen=True)
class Congruence:
    size: int
    blocks: tuple[tuple[int, ...], ...]

    @classmethod
    def from_blocks(cls, n: int, blocks: Iterable[Iterable[int]]) -> "Congruence":
        uf = UnionFind(n)
        for b in blocks:
            b = list(b)
            for x in b[1:]:
                uf.union(b[0], x)
        return cls(n, uf.blocks())

    @classmethod
    def from_relation(cls, R: BinaryRelation) -> "Congruence":
        if not (R.is_reflexive() and R.is_symmetric() and R.is_transitive()):
            raise ValueError("relation is not an equivalence relation")
        return cls.from_blocks(R.size, [list(_bits(r)) for r in R.rows])

    @classmethod
    def identity(cls, n: int) -> "Congruence":
        return cls(n, tuple((i,) for i in range(n)))

    @classmethod
    def full(cls, n: int) -> "Congruence":
        return cls(n, (tuple(range(n)),))

    @cached_property
    def labels(self) -> tuple[int, ...]:
        """Block number of each element, blocks numbered by least member."""
        lab = [0] * self.size
        for i, b in enumerate(self.blocks):
            for x in b:
                lab[x] = i
        return tuple(lab)

    @cached_property
    def rel(self) -> BinaryRelation:
        rows = [0] * self.size
        for b in self.blocks:
            mask = sum(1 << x for x in b)
            for x in b:
                rows[x] = mask
        return BinaryRelation(self.size, tuple(rows))

    @property
    def sort_key(self):
        # finest first; ties broken by the block-label string
        return (-len(self.blocks), self.labels)

    def related(self, a: int, b: int) -> bool:
        return self.labels[a] == self.labels[b]

    def __le__(self, other: "Congruence") -> bool:
        return self.rel <= other.rel

    def __str__(self):
        return "|".join(",".join(map(str, b)) for b in self.blocks)

    def as_list(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]


def meet_congruences(a: Congruence, b: Congruence) -> Congruence:
    if a.size != b.size:
        raise ValueError("size mismatch")
    groups: dict[tuple[int, int], list[int]] = {}
    for x in range(a.size):
        groups.setdefault((a.labels[x], b.labels[x]), []).append(x)
    return Congruence(a.size, tuple(sorted(tuple(g) for g in groups.values())))


def join_congruences(a: Congruence, b: Congruence) -> Congruence:
    if a.size != b.size:
        raise ValueError("size mismatch")
    return Congruence.from_blocks(a.size, a.blocks + b.blocks)


def join_all(cons: Sequence[Congruence], size: int) -> Congruence:
    blocks: list = []
    for c in cons:
        blocks.extend(c.blocks)
    return Congruence.from_blocks(size, blocks)


def congruence_generated(A: FiniteAlgebra, pairs: Iterable[tuple[int, int]]) -> Congruence:
    """Least congruence containing ``pairs``.

    Union-find over the universe; every pair that causes a merge is pushed
    through all basic translations (one argument varies, the others fixed).
    """
    n = A.size
    uf = UnionFind(n)
    queue = []
    for a, b in pairs:
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"pair {(a, b)} outside universe of size {n}")
        if uf.union(a, b):
            queue.append((a, b))
    shaped = [
        (A.tables[s].astype(np.int64).reshape((n,) * k), k) for s, k in A.signature if k > 0
    ]
    while queue:
        a, b = queue.pop()
        for tab, k in shaped:
            for pos in range(k):
                ua = np.take(tab, a, axis=pos).ravel()
                ub = np.take(tab, b, axis=pos).ravel()
                diff = ua != ub
                for u, v in zip(ua[diff].tolist(), ub[diff].tolist()):
                    if uf.union(u, v):
                        queue.append((u, v))
    return Congruence(n, uf.blocks())


@dataclass(frozen=True)
class CongruenceLattice:
    size: int
    elements: tuple[Congruence, ...]

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def index(self, c: Congruence) -> int:
        return self.elements.index(c)

    @property
    def bottom(self) -> Congruence:
        return Congruence.identity(self.size)

    @property
    def top(self) -> Congruence:
        return Congruence.full(self.size)


def all_congruences(A: FiniteAlgebra) -> CongruenceLattice:
    n = A.size
    principal = {congruence_generated(A, [(a, b)]) for a in range(n) for b in range(a + 1, n)}
    found = set(principal) | {Congruence.identity(n), Congruence.full(n)}
    frontier = list(found)
    while frontier:
        new = []
        current = list(found)
        for x in frontier:
            for y in current:
                j = join_congruences(x, y)
                if j not in found:
                    found.add(j)
                    new.append(j)
        frontier = new
    return CongruenceLattice(n, tuple(sorted(found, key=lambda c: c.sort_key)))


def modular_failure(L: CongruenceLattice):
    """Least triple (x, y, z) with x <= z and x+(y z) != (x+y) z, or None."""
    for x, y, z in itertools.product(L.elements, repeat=3):
        if x <= z:
            lhs = join_congruences(x, meet_congruences(y, z))
            rhs = meet_congruences(join_congruences(x, y), z)
            if lhs != rhs:
                return (x, y, z)
    return None


def distributive_failure(L: CongruenceLattice):
    """Least triple (x, y, z) with x (y+z) != x y + x z, or None."""
    for x, y, z in itertools.product(L.elements, repeat=3):
        lhs = meet_congruences(x, join_congruences(y, z))
        rhs = join_congruences(meet_congruences(x, y), meet_congruences(x, z))
        if lhs != rhs:
            return (x, y, z)
    return None


def is_modular(L: CongruenceLattice) -> bool:
    return modular_failure(L) is None


def is_distributive(L: CongruenceLattice) -> bool:
    return distributive_failure(L) is None


# -- enumeration of tolerances and reflexive compatible relations --------------

EXACT_TOLERANCE_LIMIT = 5


def all_tolerances(A: FiniteAlgebra) -> list[BinaryRelation]:
    """Every tolerance of ``A`` for ``A.size <= 5``; beyond that, those generated by <= 2 pairs."""
    n = A.size
    off = [(a, b) for a in range(n) for b in range(a + 1, n)]
    found = set()
    if n <= EXACT_TOLERANCE_LIMIT:
        base = BinaryRelation.identity(n)
        for mask in range(1 << len(off)):
            rows = list(base.rows)
            for i, (a, b) in enumerate(off):
                if mask >> i & 1:
                    rows[a] |= 1 << b
                    rows[b] |= 1 << a
            R = BinaryRelation(n, tuple(rows))
            if is_compatible(A, R):
                found.add(R)
    else:
        for seeds in itertools.chain.from_iterable(
            itertools.combinations(off, r) for r in range(3)
        ):
            found.add(tolerance_generated(A, seeds))
    return sorted(found, key=lambda R: (len(R), R.rows))


def reflexive_compatible_relations(A: FiniteAlgebra, max_seeds: int = 2) -> list[BinaryRelation]:
    """Compatible closures of the identity plus at most ``max_seeds`` seed pairs."""
    n = A.size
    offd = [(a, b) for a in range(n) for b in range(n) if a != b]
    delta = BinaryRelation.identity(n)
    found = set()
    for r in range(max_seeds + 1):
        for seeds in itertools.combinations(offd, r):
            found.add(compatible_closure(A, union(delta, BinaryRelation.from_pairs(n, seeds))))
    return sorted(found, key=lambda R: (len(R), R.rows))
