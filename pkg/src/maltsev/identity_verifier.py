"""Exhaustive checks of congruence and tolerance inclusions on a finite algebra.

Every check enumerates relation tuples in lexicographic order (congruences in
lattice order, tolerances in enumeration order) and pairs in lexicographic
order, so the first recorded violation is the least witness.  The only
variety-level decision here is :func:`decide_cd_variety`, which works in the
free algebra on three generators.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

from .algebra_core import FiniteAlgebra
from .clone_engine import DEFAULT_CLONE_CAP, CapExceeded, clone_to_algebra, generate_clone, level
from .relations import (
    BinaryRelation,
    Congruence,
    CongruenceLattice,
    all_congruences,
    all_tolerances,
    compose,
    compose_all,
    compose_chain,
    congruence_generated,
    intersect,
    join_all,
    join_congruences,
    meet_congruences,
    relation_power,
    transitive_closure,
)
from .term_calculus import PreconditionError, SequenceKind

MAX_STORED_VIOLATIONS = 50


@dataclass
class InclusionReport:
    tag: str
    checked_triples: int = 0
    violations: list = field(default_factory=list)
    violation_count: int = 0
    params: dict = field(default_factory=dict)
    labels: list = field(default_factory=list)  # printable names of the enumerated relations

    @property
    def holds(self) -> bool:
        return self.violation_count == 0

    def __bool__(self):
        return self.holds

    @property
    def witness(self):
        return self.violations[0] if self.violations else None

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "holds": self.holds,
            "checked_triples": self.checked_triples,
            "params": dict(self.params),
            "violation_count": self.violation_count,
            "violations": [
                {
                    "ids": list(v["ids"]),
                    "relations": [self.labels[i] for i in v["ids"]] if self.labels else None,
                    "pair": list(v["pair"]),
                    "side": v["side"],
                }
                for v in self.violations
            ],
        }

    def describe_witness(self) -> str:
        v = self.witness
        if v is None:
            return "none"
        rels = ", ".join(self.labels[i] for i in v["ids"]) if self.labels else str(v["ids"])
        return f"relations ({rels}), pair {tuple(v['pair'])}, {v['side']}"


def _diff(lhs: BinaryRelation, rhs: BinaryRelation):
    return [(a, b) for a, (l, r) in enumerate(zip(lhs.rows, rhs.rows)) if l & ~r for b in _bits(l & ~r)]


def _bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _run(report: InclusionReport, tuples, check: Callable, threads: int = 1):
    """Apply ``check(ids) -> [(side, pairs)]`` to every id tuple; aggregate in input order."""
    tuples = list(tuples)

    def work(ids):
        return ids, check(ids)

    if threads > 1 and len(tuples) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, tuples, chunksize=max(1, len(tuples) // (4 * threads))))
    else:
        results = [work(t) for t in tuples]
    for ids, found in results:
        report.checked_triples += 1
        for side, pairs in found:
            report.violation_count += len(pairs)
            for p in pairs:
                if len(report.violations) < MAX_STORED_VIOLATIONS:
                    report.violations.append({"ids": ids, "pair": p, "side": side})
    return report


def _inclusion(lhs, rhs, side="subset"):
    d = _diff(lhs, rhs)
    return [(side, d)] if d else []


def _equality(lhs, rhs):
    return _inclusion(lhs, rhs, "subset") + _inclusion(rhs, lhs, "superset")


class _Cons:
    """Congruence lattice with cached relations, meets and joins."""

    def __init__(self, A: FiniteAlgebra, lattice: Optional[CongruenceLattice] = None):
        self.L = lattice if lattice is not None else all_congruences(A)
        self.elems = list(self.L)
        self.rel = [c.rel for c in self.elems]
        self.labels = [str(c) for c in self.elems]
        self._meet = {}
        self._join = {}

    def meet(self, i, j) -> BinaryRelation:
        key = (min(i, j), max(i, j))
        if key not in self._meet:
            self._meet[key] = intersect(self.rel[i], self.rel[j])
        return self._meet[key]

    def join_of_meets(self, a, b, c) -> BinaryRelation:
        """``ab + ac`` as a relation."""
        key = (a, b, c)
        if key not in self._join:
            m1 = meet_congruences(self.elems[a], self.elems[b])
            m2 = meet_congruences(self.elems[a], self.elems[c])
            self._join[key] = join_congruences(m1, m2).rel
        return self._join[key]

    def triples(self):
        return itertools.product(range(len(self.elems)), repeat=3)


def check_cd_inclusion(A: FiniteAlgebra, n: int, lattice=None, threads: int = 1) -> InclusionReport:
    """``a(b o g) <= ag o ab o ...`` (n factors) for all congruence triples of ``A``."""
    C = _Cons(A, lattice)

    def check(ids):
        a, b, g = ids
        lhs = intersect(C.rel[a], compose(C.rel[b], C.rel[g]))
        return _inclusion(lhs, compose_chain(C.meet(a, g), C.meet(a, b), n))

    rep = InclusionReport("(CD)", params={"n": n}, labels=C.labels)
    return _run(rep, C.triples(), check, threads)


@lru_cache(maxsize=16)
def _free_cd_data(A: FiniteAlgebra, cap: int):
    C = generate_clone(A, 3, cap)
    if not C.complete:
        raise CapExceeded(cap, C)
    F = clone_to_algebra(C)
    x, y, z = C.projections
    alpha = congruence_generated(F, [(x, z)])
    beta = congruence_generated(F, [(x, y)])
    gamma = congruence_generated(F, [(y, z)])
    ag = meet_congruences(alpha, gamma).rel
    ab = meet_congruences(alpha, beta).rel
    return C, x, z, ag, ab


def decide_cd_variety(A: FiniteAlgebra, n: int, cap: int = DEFAULT_CLONE_CAP) -> bool:
    """Whether (CD) with ``n`` factors holds throughout the variety generated by ``A``.

    In ``F = F(x, y, z)`` take ``a = Cg(x,z)``, ``b = Cg(x,y)``, ``g = Cg(y,z)``;
    the inclusion holds in the variety iff ``(x, z)`` lies in ``ag o ab o ...``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    _, x, z, ag, ab = _free_cd_data(A, cap)
    return (x, z) in compose_chain(ag, ab, n)


def cd_chain_terms(A: FiniteAlgebra, n: int, cap: int = DEFAULT_CLONE_CAP) -> Optional[list]:
    """Ternary operations ``x = u_0, ..., u_n = z`` along an ``ag o ab o ...`` chain in F(3).

    These form an alvin sequence.  Returns None when no chain of length ``n`` exists.
    """
    if not decide_cd_variety(A, n, cap):
        return None
    C, x, z, ag, ab = _free_cd_data(A, cap)
    factors = [ag if i % 2 == 0 else ab for i in range(n)]
    # reach[i]: elements from which z is reachable using factors i..n-1
    reach = [0] * (n + 1)
    reach[n] = 1 << z
    for i in range(n - 1, -1, -1):
        reach[i] = sum(1 << a for a in range(len(C)) if factors[i].rows[a] & reach[i + 1])
    path, cur = [x], x
    for i in range(n):
        nxt = factors[i].rows[cur] & reach[i + 1]
        cur = (nxt & -nxt).bit_length() - 1  # least admissible successor
        path.append(cur)
    return [C.operation(i) for i in path]


def _gumm_level(A, gumm_level):
    if gumm_level is not None:
        return gumm_level
    rep = level(A, SequenceKind.GUMM)
    if not rep.found:
        raise PreconditionError(f"{A.name} has no Gumm terms ({rep})")
    return rep.level


def corollary6_k(clause: int, ell: int, n: int) -> Optional[int]:
    """Chain length on the right-hand side of each clause."""
    if clause == 1:
        return n
    if clause == 2:
        return 0 if n == 2 else (n - 2) * (ell - 1) + 1
    if clause == 3:
        return (n - 2) * (ell - 1) + 2
    if clause == 4:
        return ell * (n - 2) + 1
    raise ValueError(f"no clause {clause}")


def check_corollary6(A: FiniteAlgebra, clause: int, ell: int = 1, n: Optional[int] = None, gumm_level: Optional[int] = None, lattice=None, tolerances=None, threads: int = 1) -> InclusionReport:
    g = _gumm_level(A, gumm_level)
    if n is None:
        n = g
    if n < g:
        raise PreconditionError(f"n = {n} is below the Gumm level {g} of {A.name}")
    if clause in (2, 3, 4) and (ell < 1 or n < 2):
        raise PreconditionError("clauses (2)-(4) need ell >= 1 and n >= 2")
    k = corollary6_k(clause, ell, n)
    params = {"clause": clause, "ell": ell, "n": n, "k": k}
    tag = f"C6.{clause}"

    if clause == 4:
        tols = all_tolerances(A) if tolerances is None else list(tolerances)
        labels = [str(t) for t in tols]
        powers = [relation_power(t, ell) for t in tols]

        def check4(ids):
            p, t = ids
            lhs = intersect(tols[p], powers[t])
            return _inclusion(lhs, relation_power(intersect(tols[p], tols[t]), k))

        rep = InclusionReport(tag, params=params, labels=labels)
        return _run(rep, itertools.product(range(len(tols)), repeat=2), check4, threads)

    C = _Cons(A, lattice)
    R = C.rel

    def check(ids):
        a, b, c = ids
        if clause == 1:
            lhs = intersect(compose(R[b], R[c]), C.join_of_meets(a, b, c))
            rhs = compose_chain(C.meet(a, c), C.meet(a, b), n)
        elif clause == 2:
            lhs = intersect(R[a], compose_chain(R[b], R[c], ell))
            first = intersect(intersect(R[a], compose(R[b], R[c])), compose(R[c], R[b]))
            rhs = compose(first, compose_chain(C.meet(a, b), C.meet(a, c), k))
        else:
            lhs = intersect(compose_chain(R[b], R[c], ell), C.join_of_meets(a, b, c))
            rhs = compose_chain(C.meet(a, c), C.meet(a, b), k)
        return _inclusion(lhs, rhs)

    rep = InclusionReport(tag, params=params, labels=C.labels)
    return _run(rep, C.triples(), check, threads)


def check_tschantz_identity(A: FiniteAlgebra, lattice=None, threads: int = 1) -> InclusionReport:
    """``a(b + g) = a(b o g) o (ab + ag)`` for all congruence triples."""
    C = _Cons(A, lattice)
    R = C.rel

    def check(ids):
        a, b, c = ids
        lhs = intersect(R[a], join_congruences(C.elems[b], C.elems[c]).rel)
        rhs = compose(intersect(R[a], compose(R[b], R[c])), C.join_of_meets(a, b, c))
        return _equality(lhs, rhs)

    return _run(InclusionReport("Tschantz", labels=C.labels), C.triples(), check, threads)


def check_tip(A: FiniteAlgebra, tolerances=None, threads: int = 1) -> InclusionReport:
    """``Psi* Theta* = (Psi Theta)*`` for all pairs of tolerances."""
    tols = all_tolerances(A) if tolerances is None else list(tolerances)
    star = [transitive_closure(t) for t in tols]

    def check(ids):
        p, t = ids
        return _equality(intersect(star[p], star[t]), transitive_closure(intersect(tols[p], tols[t])))

    rep = InclusionReport("TIP", labels=[str(t) for t in tols])
    return _run(rep, itertools.product(range(len(tols)), repeat=2), check, threads)


def corollary11_sides(beta: Sequence[Sequence[Congruence]]):
    h, g = len(beta), len(beta[0])
    if h < 1 or g < 1 or any(len(row) != g for row in beta):
        raise ValueError("beta must be a nonempty h x g matrix")
    size = beta[0][0].size
    lhs = join_all(beta[0], size).rel
    chains = compose_all([c.rel for c in beta[0]])
    for row in beta[1:]:
        lhs = intersect(lhs, join_all(row, size).rel)
        chains = intersect(chains, compose_all([c.rel for c in row]))
    terms = []
    for f in itertools.product(range(g), repeat=h):
        m = beta[0][f[0]]
        for i in range(1, h):
            m = meet_congruences(m, beta[i][f[i]])
        terms.append(m)
    rhs = compose(chains, join_all(terms, size).rel)
    return lhs, rhs


def check_corollary11(A: FiniteAlgebra, beta: Sequence[Sequence[Congruence]]) -> InclusionReport:
    """Intersection of row joins equals (intersection of row chains) o (join over choice functions)."""
    for row in beta:
        for c in row:
            if c.size != A.size:
                raise ValueError("congruence size differs from algebra size")
    lhs, rhs = corollary11_sides(beta)
    rep = InclusionReport("C11", params={"h": len(beta), "g": len(beta[0])},
                          labels=[str(c) for row in beta for c in row])
    return _run(rep, [tuple(range(len(rep.labels)))], lambda ids: _equality(lhs, rhs))


def check_corollary11_all(A: FiniteAlgebra, h: int = 2, g: int = 2, lattice=None, threads: int = 1) -> InclusionReport:
    """:func:`check_corollary11` for every ``h x g`` matrix of congruences of ``A``."""
    C = _Cons(A, lattice)

    def check(ids):
        beta = [[C.elems[ids[i * g + j]] for j in range(g)] for i in range(h)]
        return _equality(*corollary11_sides(beta))

    rep = InclusionReport("C11", params={"h": h, "g": g}, labels=C.labels)
    return _run(rep, itertools.product(range(len(C.elems)), repeat=h * g), check, threads)


# -- bilateral alvin-style inclusions --------------------------------------------

ALPHA_GAMMA_BETA = "a(g.b)"
ALPHA_GAMMA_THEN_ALPHA_BETA = "ag.ab"


@dataclass
class PatternS:
    tags: tuple  # A_2 .. A_r

    def __post_init__(self):
        for t in self.tags:
            if t not in (ALPHA_GAMMA_BETA, ALPHA_GAMMA_THEN_ALPHA_BETA):
                raise ValueError(f"unknown factor tag {t!r}")
        self.tags = tuple(self.tags)

    @property
    def r(self) -> int:
        return len(self.tags) + 1

    def __str__(self):
        return " o ".join(("a(g.b)",) + self.tags) if self.tags else "a(g.b)"

    @classmethod
    def all_of_length(cls, r: int):
        return [cls(t) for t in itertools.product((ALPHA_GAMMA_BETA, ALPHA_GAMMA_THEN_ALPHA_BETA), repeat=r - 1)]


@dataclass
class Theorem12Report:
    pattern: PatternS
    S: InclusionReport
    S1: Optional[InclusionReport]
    Splus: Optional[InclusionReport]
    splus_applicable: bool

    @property
    def implication_ok(self) -> bool:
        """No counterexample to S => S1 (and S => S+ when applicable)."""
        if not self.S.holds:
            return True
        if self.S1 is None or not self.S1.holds:
            return False
        return not self.splus_applicable or (self.Splus is not None and self.Splus.holds)

    def to_dict(self) -> dict:
        return {
            "pattern": list(self.pattern.tags),
            "r": self.pattern.r,
            "scope": "per-algebra necessary condition",
            "S_holds": self.S.holds,
            "S1_holds": None if self.S1 is None else self.S1.holds,
            "Splus_holds": (None if self.Splus is None else self.Splus.holds) if self.splus_applicable else "not applicable",
            "implication_ok": self.implication_ok,
            "S": self.S.to_dict(),
            "S1": None if self.S1 is None else self.S1.to_dict(),
            "Splus": None if self.Splus is None else self.Splus.to_dict(),
        }


def check_theorem12(A: FiniteAlgebra, pattern, lattice=None, threads: int = 1) -> Theorem12Report:
    """Evaluate (S); if it holds, (S1); if also applicable, (S+).  Per-algebra only."""
    if not isinstance(pattern, PatternS):
        pattern = PatternS(tuple(pattern))
    C = _Cons(A, lattice)
    R = C.rel

    def factors(a, b, c):
        agb = intersect(R[a], compose(R[c], R[b]))
        agab = compose(C.meet(a, c), C.meet(a, b))
        return agb, agab, [agb if t == ALPHA_GAMMA_BETA else agab for t in pattern.tags]

    def side(which):
        def check(ids):
            a, b, c = ids
            lhs = intersect(R[a], compose(R[b], R[c]))
            agb, agab, rest = factors(a, b, c)
            if which == "S":
                chain = [agb] + rest
            elif which == "S1":
                chain = [agab] + rest
            else:
                chain = [agab] + rest[:-1] + [agab]
            return _inclusion(lhs, compose_all(chain))
        return check

    params = {"pattern": list(pattern.tags), "r": pattern.r}
    S = _run(InclusionReport("T12.S", params=params, labels=C.labels), C.triples(), side("S"), threads)
    applicable = pattern.r >= 2 and pattern.tags[-1] == ALPHA_GAMMA_BETA
    S1 = Splus = None
    if S.holds:
        S1 = _run(InclusionReport("T12.S1", params=params, labels=C.labels), C.triples(), side("S1"), threads)
        if applicable:
            Splus = _run(InclusionReport("T12.S+", params=params, labels=C.labels), C.triples(), side("S+"), threads)
    return Theorem12Report(pattern, S, S1, Splus, applicable)
