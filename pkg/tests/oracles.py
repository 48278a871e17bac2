"""Slow, independent reference implementations used as test oracles.

Nothing here imports the package internals beyond the FiniteAlgebra
container: relations are sets of pairs, operations are plain tuples, and every
equation is checked by looping over elements.
"""

from __future__ import annotations

import itertools


def op_table(A, sym):
    return [int(v) for v in A.tables[sym]]


def apply(A, sym, args):
    n = A.size
    idx = 0
    for a in args:
        idx = idx * n + a
    return int(A.tables[sym][idx])


# -- relations as sets of pairs ------------------------------------------------


def compose(R, S):
    return {(a, c) for (a, b) in R for (b2, c) in S if b == b2}


def chain(R, S, n, size):
    out = {(a, a) for a in range(size)}
    for i in range(n):
        out = compose(out, R if i % 2 == 0 else S)
    return out


def closure(R):
    R = set(R)
    while True:
        new = R | compose(R, R)
        if new == R:
            return R
        R = new


def compatible(A, R):
    for sym, k in A.signature:
        for pairs in itertools.product(sorted(R), repeat=k):
            a = apply(A, sym, [p[0] for p in pairs])
            b = apply(A, sym, [p[1] for p in pairs])
            if (a, b) not in R:
                return False
    return True


def set_partitions(elems):
    if not elems:
        yield []
        return
    first, rest = elems[0], elems[1:]
    for p in set_partitions(rest):
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1 :]
        yield [[first]] + p


def partition_relation(blocks):
    return {(a, b) for blk in blocks for a in blk for b in blk}


def congruences(A):
    """All congruences as frozensets of pairs, by filtering every partition."""
    out = []
    for p in set_partitions(list(range(A.size))):
        R = partition_relation(p)
        if compatible(A, R):
            out.append(frozenset(R))
    return out


def tolerances(A):
    """All reflexive symmetric compatible relations."""
    n = A.size
    offdiag = [(a, b) for a in range(n) for b in range(a + 1, n)]
    out = []
    for bits in itertools.product((0, 1), repeat=len(offdiag)):
        R = {(a, a) for a in range(n)}
        for on, (a, b) in zip(bits, offdiag):
            if on:
                R |= {(a, b), (b, a)}
        if compatible(A, R):
            out.append(frozenset(R))
    return out


def least_congruence_containing(A, pairs):
    cands = [c for c in congruences(A) if set(pairs) <= c]
    return min(cands, key=len)


# -- terms and clones ------------------------------------------------------------


def eval_term(A, t, env):
    if hasattr(t, "index"):
        return env[t.index]
    return apply(A, t.symbol, [eval_term(A, s, env) for s in t.args])


def clone(A, k):
    """Term operations of arity k as tuples (row-major tables), by naive fixpoint."""
    n = A.size
    points = list(itertools.product(range(n), repeat=k))
    funcs = {tuple(p[i] for p in points) for i in range(k)}
    while True:
        new = set(funcs)
        for sym, ar in A.signature:
            if ar == 0:
                c = apply(A, sym, [])
                new.add(tuple(c for _ in points))
                continue
            for args in itertools.product(funcs, repeat=ar):
                new.add(tuple(apply(A, sym, [f[j] for f in args]) for j in range(len(points))))
        if new == funcs:
            return funcs
        funcs = new


def monotone_count(k):
    """Number of monotone Boolean functions of k variables (Dedekind numbers)."""
    points = list(itertools.product((0, 1), repeat=k))
    le = [(i, j) for i, p in enumerate(points) for j, q in enumerate(points) if all(a <= b for a, b in zip(p, q))]
    return sum(1 for f in itertools.product((0, 1), repeat=len(points)) if all(f[i] <= f[j] for i, j in le))


# -- sequences ------------------------------------------------------------------


def ev(f, n, *args):
    idx = 0
    for a in args:
        idx = idx * n + a
    return f[idx]


def _pair_ok(f, g, n, h, kind):
    """Edge equations between t_h and t_{h+1}."""
    xzz = (h % 2 == 0) != (kind == "jonsson")
    for x in range(n):
        for z in range(n):
            if xzz and ev(f, n, x, z, z) != ev(g, n, x, z, z):
                return False
            if not xzz and ev(f, n, x, x, z) != ev(g, n, x, x, z):
                return False
    return True


def _middle_ok(f, n):
    return all(ev(f, n, x, y, x) == x for x in range(n) for y in range(n))


def valid_sequence(seq, n, kind):
    """Direct equation check of a ternary sequence given as tuples."""
    L = len(seq) - 1
    proj_x = tuple(p[0] for p in itertools.product(range(n), repeat=3))
    proj_z = tuple(p[2] for p in itertools.product(range(n), repeat=3))
    if tuple(seq[0]) != proj_x or tuple(seq[-1]) != proj_z:
        return False
    first = 2 if kind == "gumm" else 1
    if not all(_middle_ok(seq[h], n) for h in range(first, L)):
        return False
    return all(_pair_ok(seq[h], seq[h + 1], n, h, kind) for h in range(L))


def brute_level(funcs, n, kind, nmax):
    """Least L <= nmax with a sequence t_0..t_L drawn from ``funcs``; memoized DFS."""
    funcs = list(funcs)
    proj_x = tuple(p[0] for p in itertools.product(range(n), repeat=3))
    proj_z = tuple(p[2] for p in itertools.product(range(n), repeat=3))
    if proj_x == proj_z:
        return 0
    first = 2 if kind == "gumm" else 1
    middle = [f for f in funcs if _middle_ok(f, n)]
    for L in range(1, nmax + 1):
        dead = set()

        def dfs(h, prev):
            # prev = t_{h-1}; choose t_h
            if h == L:
                return _pair_ok(prev, proj_z, n, L - 1, kind)
            if (h, prev) in dead:
                return False
            for f in (middle if h >= first else funcs):
                if _pair_ok(prev, f, n, h - 1, kind) and dfs(h + 1, f):
                    return True
            dead.add((h, prev))
            return False

        if dfs(1, proj_x):
            return L
    return None


def valid_day(seq, n):
    L = len(seq) - 1
    pts = list(itertools.product(range(n), repeat=4))
    if tuple(seq[0]) != tuple(p[0] for p in pts) or tuple(seq[-1]) != tuple(p[3] for p in pts):
        return False
    for f in seq:
        if any(ev(f, n, x, y, y, x) != x for x in range(n) for y in range(n)):
            return False
    for i in range(L):
        f, g = seq[i], seq[i + 1]
        if i % 2 == 0:
            if any(ev(f, n, x, x, w, w) != ev(g, n, x, x, w, w) for x in range(n) for w in range(n)):
                return False
        else:
            if any(ev(f, n, x, y, y, w) != ev(g, n, x, y, y, w) for x in range(n) for y in range(n) for w in range(n)):
                return False
    return True


def star(f, n):
    return tuple(ev(f, n, x, ev(f, n, x, y, y), ev(f, n, x, y, z)) for x, y, z in itertools.product(range(n), repeat=3))


def tm_holds(f, n, theta, m):
    power = {(a, a) for a in range(n)}
    for _ in range(m):
        power = compose(power, theta)
    return all((a, ev(f, n, a, a, c)) in theta for (a, c) in power)
