"""Term clones, free algebras and Maltsev levels.

The ``k``-ary clone of ``A`` is generated inside ``A^(A^k)`` from the ``k``
projections; it is the free algebra on ``k`` generators of the variety
generated by ``A``.  Levels are shortest paths from the first to the last
projection whose consecutive members agree on alternating slices.
"""

from __future__ import annotations

import itertools
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra_core import (
    App,
    FiniteAlgebra,
    Term,
    Var,
    check_budget,
    dtype_for,
    frozen,
    projection_tables,
    term_operation,
)
from .term_calculus import SequenceKind, TermOperation, check_sequence

DEFAULT_CLONE_CAP = 10**6
DEFAULT_LEVEL_CAP = 12
BATCH_ROWS = 1 << 16


class CapExceeded(RuntimeError):
    def __init__(self, cap, partial=None):
        super().__init__(f"clone generation stopped at cap {cap}")
        self.cap = cap
        self.partial = partial


class UnreliableOnPartialClone(RuntimeError):
    pass


class NotInClone(KeyError):
    pass


DENSE_KEY_LIMIT = 1 << 24


class _KeyIndex:
    """Table -> member index.

    Tables that fit in 62 bits get integer keys (row-major digits); small key
    spaces use a dense lookup array, otherwise a dict.  Wide tables fall back
    to ``bytes`` keys.
    """

    def __init__(self, n: int, L: int):
        self.n = n
        self.fast = n == 1 or L * (n - 1).bit_length() <= 62
        self.dense = None
        if self.fast and n**L <= DENSE_KEY_LIMIT:
            self.dense = np.full(n**L, -1, dtype=np.int64)
        self.index: dict = {}

    def keys(self, rows: np.ndarray):
        if not self.fast:
            return [r.tobytes() for r in rows]
        keys = np.zeros(rows.shape[0], dtype=np.int64)
        for c in range(rows.shape[1]):
            keys *= self.n
            keys += rows[:, c]
        return keys

    def key(self, row: np.ndarray):
        k = self.keys(np.asarray(row)[None, :])[0]
        return int(k) if self.fast else k

    def get(self, key) -> int:
        if self.dense is not None:
            v = int(self.dense[key])
            if v < 0:
                raise KeyError(key)
            return v
        return self.index[key]

    def add(self, key, i: int) -> None:
        if self.dense is not None:
            self.dense[key] = i
        else:
            self.index[key] = i

    def __contains__(self, key) -> bool:
        if self.dense is not None:
            return bool(self.dense[key] >= 0)
        return key in self.index

    def truncate(self, cap: int) -> None:
        if self.dense is not None:
            self.dense[self.dense >= cap] = -1
        else:
            self.index = {k: v for k, v in self.index.items() if v < cap}


@dataclass(eq=False)
class CloneSet:
    algebra: FiniteAlgebra
    arity: int
    tables: np.ndarray  # members x n**arity
    parents: list  # per member: ("var", i) or (symbol, arg member indices)
    projections: tuple[int, ...]
    complete: bool
    _index: _KeyIndex = field(repr=False, default=None)

    def __len__(self):
        return self.tables.shape[0]

    def operation(self, i: int) -> TermOperation:
        return TermOperation(self.arity, self.algebra.size, frozen(self.tables[i].copy()))

    def index_of(self, op) -> int:
        row = op.table if isinstance(op, TermOperation) else np.asarray(op)
        if len(row) != self.tables.shape[1]:
            raise NotInClone("table length does not match clone arity")
        try:
            return self._index.get(self._index.key(np.asarray(row, dtype=self.tables.dtype)))
        except KeyError:
            raise NotInClone("operation is not in the clone") from None

    def __contains__(self, op) -> bool:
        try:
            self.index_of(op)
        except NotInClone:
            return False
        return True

    def operations(self):
        return [self.operation(i) for i in range(len(self))]


def _apply_rows(tab: np.ndarray, n: int, args: list[np.ndarray]) -> np.ndarray:
    idx = args[0].astype(np.int64)
    for a in args[1:]:
        idx = idx * n + a
    return tab[idx]


def _round_batches(N: int, lo: int, k: int):
    """Argument-tuple blocks for one round, lexicographic, each with an index >= lo.

    Yields (prefix, j_start): the block is prefix + (j,) for j in [j_start, N).
    """
    if k == 1:
        yield (), lo
        return
    for prefix in itertools.product(range(N), repeat=k - 1):
        yield prefix, (0 if max(prefix) >= lo else lo)


def generate_clone(A: FiniteAlgebra, k: int, cap: int = DEFAULT_CLONE_CAP, threads: int = 1) -> CloneSet:
    """Breadth-first closure of the ``k`` projections under the basic operations.

    Members are inserted in a fixed order (round, then signature order, then
    lexicographic argument indices), so the result does not depend on
    ``threads``.  If ``cap`` is hit a partial clone is returned with
    ``complete=False``.

    When every binary operation is a term operation, every operation of every
    arity is one (Sierpinski), and the ``k``-ary clone is enumerated directly
    in table order; its members then carry no parent links and
    :func:`reconstruct_term` recovers terms by a targeted closure.
    """
    if cap < k:
        raise ValueError("cap must be at least the arity")
    n = A.size
    if k > 2 and n > 1 and _all_functions_fit(n, k, cap):
        binary = _closure(A, 2, min(cap, n ** (n * n)), threads)
        if binary.complete and len(binary) == n ** (n * n):
            return _full_clone(A, k)
    return _closure(A, k, cap, threads)


def _all_functions_fit(n: int, k: int, cap: int) -> bool:
    bits = n**k * (n - 1).bit_length()
    return bits <= 40 and n ** (n**k) <= cap


def _full_clone(A: FiniteAlgebra, k: int) -> CloneSet:
    n, L = A.size, A.size**k
    total = n**L
    check_budget(total * L, 1, f"all {k}-ary operations")
    keys = np.arange(total, dtype=np.int64)
    tables = np.empty((total, L), dtype=dtype_for(n))
    for c in range(L - 1, -1, -1):
        keys, tables[:, c] = np.divmod(keys, n)
    index = _KeyIndex(n, L)
    index.dense[:] = np.arange(total)
    proj = tuple(index.get(index.key(p)) for p in projection_tables(n, k))
    return CloneSet(A, k, frozen(tables), None, proj, True, index)


def _closure(A, k, cap, threads=1, targets=None) -> CloneSet:
    n = A.size
    L = n**k
    dt = dtype_for(n)
    check_budget(L * (k + 1), np.dtype(dt).itemsize, f"{k}-ary tables")
    total_functions = n**L if L * max(n - 1, 1).bit_length() < 4096 else None
    index = _KeyIndex(n, L)
    rows: list[np.ndarray] = []
    parents: list = []
    projections = []
    for i, p in enumerate(projection_tables(n, k)):
        key = index.key(p)
        if key not in index:
            index.add(key, len(rows))
            rows.append(p)
            parents.append(("var", i))
        projections.append(index.get(key))

    def done():
        return targets is not None and all(t in index for t in targets)

    ops = [(s, kk, A.tables[s]) for s, kk in A.signature]
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    complete = True
    lo = 0
    first_round = True
    try:
        while not done():
            M = np.vstack(rows)
            N = len(rows)
            for sym, kk, tab in ops:
                if kk == 0:
                    if first_round:
                        _absorb(index, rows, parents, np.full((1, L), tab[0], dtype=dt), [(sym, ())])
                    continue
                # blocks of argument tuples, computed (possibly in threads), merged in order
                blocks = _chunked(_round_batches(N, lo, kk), N, BATCH_ROWS)

                def compute(chunk, tab=tab):
                    outs, metas = [], []
                    for prefix, j0 in chunk:
                        js = np.arange(j0, N)
                        args = [np.broadcast_to(M[p], (len(js), L)) for p in prefix] + [M[js]]
                        outs.append(_apply_rows(tab, n, args).astype(dt, copy=False))
                        metas.append((prefix, j0))
                    res = np.vstack(outs) if outs else np.zeros((0, L), dtype=dt)
                    return res, metas, index.keys(res)

                results = _ordered_map(pool, compute, blocks) if pool else map(compute, blocks)
                for res, metas, keys in results:
                    _absorb(index, rows, parents, res, _LazyArgs(sym, metas, N), keys)
                    if len(rows) > cap:
                        del rows[cap:], parents[cap:]
                        index.truncate(cap)
                        complete = False
                        raise _Stop
                    if len(rows) == total_functions or done():
                        raise _Stop
            first_round = False
            lo = N
            if len(rows) == N:
                break
    except _Stop:
        pass
    finally:
        if pool:
            pool.shutdown()
    return CloneSet(A, k, frozen(np.vstack(rows)), parents, tuple(projections), complete, index)


class _Stop(Exception):
    pass


def _ordered_map(pool, fn, items, window=None):
    """Like ``pool.map`` but with at most ``window`` tasks in flight."""
    window = window or 2 * pool._max_workers
    pending = deque()
    for item in items:
        pending.append(pool.submit(fn, item))
        if len(pending) >= window:
            yield pending.popleft().result()
    while pending:
        yield pending.popleft().result()


def _chunked(batches, N, target):
    chunk, size = [], 0
    for b in batches:
        chunk.append(b)
        size += N - b[1]
        if size >= target:
            yield chunk
            chunk, size = [], 0
    if chunk:
        yield chunk


class _LazyArgs:
    """Parent link of row ``i`` of a result block, built only when needed."""

    def __init__(self, sym, metas, N):
        self.sym, self.metas = sym, metas
        self.starts = np.cumsum([0] + [N - j0 for _, j0 in metas])

    def __getitem__(self, i):
        b = int(np.searchsorted(self.starts, i, side="right")) - 1
        prefix, j0 = self.metas[b]
        return (self.sym, prefix + (j0 + i - int(self.starts[b]),))


def _absorb(index, rows, parents, res, args, keys=None):
    """Append unseen rows of ``res`` in order of first occurrence."""
    if keys is None:
        keys = index.keys(res)
    if index.dense is not None:
        cand = np.flatnonzero(index.dense[keys] < 0)
        if not len(cand):
            return
        _, first = np.unique(keys[cand], return_index=True)
        for i in np.sort(cand[first]).tolist():
            index.dense[keys[i]] = len(rows)
            rows.append(res[i])
            parents.append(args[i])
        return
    if index.fast:
        _, first = np.unique(keys, return_index=True)
        order = np.sort(first).tolist()
    else:
        order = range(len(keys))
    for i in order:
        key = int(keys[i]) if index.fast else keys[i]
        if key not in index.index:
            index.index[key] = len(rows)
            rows.append(res[i])
            parents.append(args[i])


def reconstruct_term(C: CloneSet, op) -> Term:
    """A term whose term operation is ``op``, rebuilt from the clone's parent links."""
    target = C.index_of(op)
    if C.parents is None:
        key = C._index.key(C.tables[target])
        C = _closure(C.algebra, C.arity, DEFAULT_CLONE_CAP, targets={key})
        target = C._index.get(key)
    memo: dict[int, Term] = {}

    def build(i):
        if i in memo:
            return memo[i]
        stack = [i]
        while stack:
            j = stack[-1]
            p = C.parents[j]
            if p[0] == "var":
                memo[j] = Var(p[1])
                stack.pop()
                continue
            todo = [a for a in p[1] if a not in memo]
            if todo:
                stack.extend(todo)
                continue
            memo[j] = App(p[0], tuple(memo[a] for a in p[1]))
            stack.pop()
        return memo[i]

    t = build(target)
    if not np.array_equal(term_operation(C.algebra, t, C.arity), C.tables[target]):
        raise AssertionError("reconstructed term does not induce the operation")
    return t


def free_algebra(A: FiniteAlgebra, k: int, cap: int = DEFAULT_CLONE_CAP, threads: int = 1):
    """The free algebra on ``k`` generators of V(A), with the generators' indices."""
    C = generate_clone(A, k, cap, threads)
    if not C.complete:
        raise CapExceeded(cap, C)
    return clone_to_algebra(C), list(C.projections)


def clone_to_algebra(C: CloneSet) -> FiniteAlgebra:
    A, n, N = C.algebra, C.algebra.size, len(C)
    M = C.tables
    ops = []
    for sym, kk in A.signature:
        check_budget(N**kk * max(M.shape[1], 8), 1, f"free algebra table {sym!r}")
        out = np.empty(N**kk, dtype=np.int64)
        flat = 0
        prefixes = itertools.product(range(N), repeat=max(kk - 1, 0)) if kk else [None]
        for prefix in prefixes:
            if kk == 0:
                row = np.full((1, M.shape[1]), A.tables[sym][0], dtype=M.dtype)
            else:
                args = [np.broadcast_to(M[p], M.shape) for p in prefix] + [M]
                row = _apply_rows(A.tables[sym], n, args)
            keys = C._index.keys(row)
            if C._index.dense is not None:
                idx = C._index.dense[keys]
            else:
                idx = [C._index.get(int(key) if C._index.fast else key) for key in keys]
            out[flat : flat + len(idx)] = idx
            flat += len(idx)
        ops.append((sym, kk, out))
    return FiniteAlgebra.from_tables(f"F_{A.name}({C.arity})", N, ops)


# -- levels ------------------------------------------------------------------


@dataclass
class LevelReport:
    algebra: str
    kind: SequenceKind
    level: Optional[int]
    cap: int
    witness: list = field(default_factory=list)
    witness_terms: Optional[list] = None
    exhausted: bool = False
    clone_size: int = 0

    @property
    def found(self) -> bool:
        return self.level is not None

    def to_dict(self) -> dict:
        return {
            "algebra": self.algebra,
            "kind": self.kind.value,
            "level": self.level,
            "cap": None if self.found else self.cap,
            "exhausted": self.exhausted,
            "clone_size": self.clone_size,
            "witness": [t.tolist() for t in self.witness],
            "witness_terms": None if self.witness_terms is None else [str(t) for t in self.witness_terms],
        }

    def __str__(self):
        if self.found:
            return f"{self.kind.value} level = {self.level}"
        if self.exhausted:
            return f"{self.kind.value} level: none (search space exhausted, cap {self.cap})"
        return f"{self.kind.value} level: none up to {self.cap}"


def _pattern_index(n: int, pattern) -> np.ndarray:
    v = max(pattern) + 1
    proj = projection_tables(n, v)
    idx = np.zeros(n**v, dtype=np.int64)
    for j in pattern:
        idx = idx * n + proj[j]
    return idx


def _groups(M: np.ndarray, idx: np.ndarray):
    """Group id of each member by its slice, and members per group in insertion order."""
    _, inv = np.unique(M[:, idx], axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(inv, kind="stable")
    bounds = np.flatnonzero(np.diff(inv[order])) + 1
    members = np.split(order, bounds)
    return inv, members


_LEVEL_SHAPES = {
    # (middle identity pattern, slice for even steps, slice for odd steps)
    SequenceKind.ALVIN: ((0, 1, 0), (0, 1, 1), (0, 0, 1)),
    SequenceKind.GUMM: ((0, 1, 0), (0, 1, 1), (0, 0, 1)),
    SequenceKind.JONSSON: ((0, 1, 0), (0, 0, 1), (0, 1, 1)),
    SequenceKind.DAY: ((0, 1, 1, 0), (0, 0, 1, 1), (0, 1, 1, 2)),
}


def level(A: FiniteAlgebra, kind, cap_n: int = DEFAULT_LEVEL_CAP, cap_clone: int = DEFAULT_CLONE_CAP, clone: Optional[CloneSet] = None, threads: int = 1) -> LevelReport:
    """Least ``n`` such that A has a sequence ``t_0..t_n`` of the given kind.

    Layered BFS over the clone from the first to the last projection finds
    the length; the witness is then the lexicographically least shortest path
    (by clone insertion index), so it is reproducible.
    """
    kind = SequenceKind.parse(kind)
    k = kind.arity
    C = clone if clone is not None else generate_clone(A, k, cap_clone, threads)
    if C.arity != k:
        raise ValueError(f"{kind.value} needs a {k}-ary clone, got {C.arity}-ary")
    if not C.complete:
        raise UnreliableOnPartialClone(
            f"{k}-ary clone of {A.name} is partial (cap {cap_clone}); minimality cannot be certified"
        )
    n = A.size
    M = C.tables
    middle, even, odd = _LEVEL_SHAPES[kind]
    x = projection_tables(n, 2)[0]
    admissible = (M[:, _pattern_index(n, middle)] == x).all(axis=1)
    slices = [_groups(M, _pattern_index(n, even)), _groups(M, _pattern_index(n, odd))]
    src, dst = C.projections[0], C.projections[-1]

    def finish(path):
        witness = [C.operation(i) for i in path]
        terms = [reconstruct_term(C, w) for w in witness]
        rep = LevelReport(A.name, kind, len(path) - 1, cap_n, witness, terms, clone_size=len(C))
        assert check_sequence(A, witness, kind).valid
        return rep

    def admissible_at(h):
        if kind is SequenceKind.GUMM and h == 1:
            return np.ones(len(M), dtype=bool)
        return admissible

    def _least_path(L):
        # alive[h]: members usable at position h that still reach dst in L - h steps
        alive = [None] * (L + 1)
        alive[L] = np.zeros(len(M), dtype=bool)
        alive[L][dst] = True
        for h in range(L - 1, 0, -1):
            inv = slices[h % 2][0]
            live_groups = np.zeros(int(inv.max()) + 1, dtype=bool)
            live_groups[inv[alive[h + 1]]] = True
            alive[h] = admissible_at(h) & live_groups[inv]
        path = [src]
        for h in range(L):
            inv, members = slices[h % 2]
            cand = members[int(inv[path[-1]])]
            path.append(int(cand[alive[h + 1][cand]].min()))
        return path

    if src == dst:
        return finish([src])
    seen = {(src, 0)}
    layer = [src]
    expanded: set = set()
    depth = 0
    while layer and depth < cap_n:
        par = depth % 2
        nxt = []
        inv, members = slices[par]
        for u in layer:
            g = int(inv[u])
            if (par, g) in expanded:
                continue
            expanded.add((par, g))
            for v in members[g].tolist():
                if v == dst:
                    return finish(_least_path(depth + 1))
                ok = admissible[v] or (kind is SequenceKind.GUMM and depth == 0)
                if ok and (v, 1 - par) not in seen:
                    seen.add((v, 1 - par))
                    nxt.append(v)
        layer = nxt
        depth += 1
    return LevelReport(A.name, kind, None, cap_n, exhausted=not layer, clone_size=len(C))
