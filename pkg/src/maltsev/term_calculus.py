"""Term operations, Maltsev sequence checks and the star construction.

Sequences are lists of term operations ``t_0..t_n`` (ternary, or quaternary for
Day sequences).  Equation tags in reports follow the usual labels: A1-A5 for
alvin/Jonsson sequences, G1 for the Gumm middle identities, D1-D5 for Day
sequences, T_m and A_m for the absorption properties of ``s_1``.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .algebra_core import (
    FiniteAlgebra,
    Term,
    Var,
    dtype_for,
    frozen,
    index_tuple,
    projection_tables,
    substitute,
    term_operation,
    tuple_index,
)
from .relations import (
    BinaryRelation,
    all_tolerances,
    compose_all,
    converse,
    is_compatible,
    reflexive_compatible_relations,
    relation_power,
)


class SequenceKind(str, enum.Enum):
    JONSSON = "jonsson"
    ALVIN = "alvin"
    GUMM = "gumm"
    DAY = "day"

    @property
    def arity(self) -> int:
        return 4 if self is SequenceKind.DAY else 3

    @classmethod
    def parse(cls, s) -> "SequenceKind":
        if isinstance(s, cls):
            return s
        return cls(str(s).lower().replace("ó", "o"))


class SequenceError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class WitnessError(AssertionError):
    """A constructed witness failed the property it is supposed to have."""


@dataclass(frozen=True, eq=False)
class TermOperation:
    arity: int
    size: int
    table: np.ndarray

    def __post_init__(self):
        if len(self.table) != self.size**self.arity:
            raise ValueError(
                f"table length {len(self.table)} != {self.size}**{self.arity}"
            )
        if len(self.table) and int(np.max(self.table)) >= self.size:
            raise ValueError("table entry out of range")

    @classmethod
    def make(cls, size: int, arity: int, table) -> "TermOperation":
        return cls(arity, size, frozen(np.asarray(table, dtype=dtype_for(size))))

    @classmethod
    def projection(cls, size: int, arity: int, i: int) -> "TermOperation":
        return cls(arity, size, frozen(projection_tables(size, arity)[i]))

    @classmethod
    def from_term(cls, A: FiniteAlgebra, t: Term, arity: int) -> "TermOperation":
        return cls(arity, A.size, term_operation(A, t, arity))

    @cached_property
    def key(self) -> bytes:
        return self.table.tobytes()

    def __eq__(self, other):
        if not isinstance(other, TermOperation):
            return NotImplemented
        return (self.arity, self.size) == (other.arity, other.size) and self.key == other.key

    def __hash__(self):
        return hash((self.arity, self.size, self.key))

    def __call__(self, *args: int) -> int:
        return int(self.table[tuple_index(args, self.size)])

    def __repr__(self):
        return f"TermOperation(arity={self.arity}, size={self.size}, table={self.tolist()})"

    def tolist(self) -> list[int]:
        return [int(v) for v in self.table]

    def pattern(self, vars_: Sequence[int]) -> np.ndarray:
        """Values of ``t(x_{vars[0]}, ..., x_{vars[k-1]})`` over all assignments, row-major.

        E.g. ``pattern((0, 1, 1))`` is the binary slice ``(x, z) -> t(x, z, z)``.
        """
        if len(vars_) != self.arity:
            raise ValueError("pattern length must equal arity")
        v = max(vars_) + 1
        proj = projection_tables(self.size, v)
        idx = np.zeros(self.size**v, dtype=np.int64)
        for j in vars_:
            idx = idx * self.size + proj[j]
        return self.table[idx]


def projection_pattern(n: int, nvars: int, i: int) -> np.ndarray:
    return projection_tables(n, nvars)[i]


@dataclass(frozen=True)
class Violation:
    tag: str
    index: Optional[int]
    point: tuple[int, ...]
    lhs: int
    rhs: int

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "index": self.index,
            "point": list(self.point),
            "lhs": self.lhs,
            "rhs": self.rhs,
        }

    def __str__(self):
        h = "" if self.index is None else f" h={self.index}"
        return f"({self.tag}){h} at {self.point}: {self.lhs} != {self.rhs}"


@dataclass
class ValidityReport:
    violations: list[Violation] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    checked: int = 0

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.valid

    def tags(self) -> set[str]:
        return {v.tag for v in self.violations}

    def first(self) -> Optional[Violation]:
        return self.violations[0] if self.violations else None

    def to_dict(self, limit: int = 20) -> dict:
        return {
            "valid": self.valid,
            "checked": self.checked,
            "violation_count": len(self.violations),
            "violations": [v.to_dict() for v in self.violations[:limit]],
            "notes": list(self.notes),
        }


def _compare(report, tag, h, lhs, rhs, n, nvars):
    report.checked += len(lhs)
    for i in np.flatnonzero(lhs != rhs):
        report.violations.append(
            Violation(tag, h, index_tuple(int(i), n, nvars), int(lhs[i]), int(rhs[i]))
        )


# identity shapes: variable pattern per kind
_MIDDLE = (0, 1, 0)  # t(x,y,x) = x
_XZZ = (0, 1, 1)  # t(x,z,z)
_XXZ = (0, 0, 1)  # t(x,x,z)
_DAY_MIDDLE = (0, 1, 1, 0)  # m(x,y,y,x) = x
_DAY_EVEN = (0, 0, 1, 1)  # m(x,x,w,w)
_DAY_ODD = (0, 1, 1, 2)  # m(x,y,y,w)


def check_sequence(A: FiniteAlgebra, seq: Sequence[TermOperation], kind) -> ValidityReport:
    kind = SequenceKind.parse(kind)
    if not seq:
        raise SequenceError("empty sequence")
    for i, t in enumerate(seq):
        if t.size != A.size:
            raise SequenceError(f"t_{i} has size {t.size}, algebra has {A.size}")
        if t.arity != kind.arity:
            raise SequenceError(f"t_{i} has arity {t.arity}, {kind.value} needs {kind.arity}")
    n = len(seq) - 1
    size = A.size
    rep = ValidityReport()
    if kind is SequenceKind.DAY:
        _check_day(rep, seq, size)
    else:
        full = projection_tables(size, 3)
        _compare(rep, "A2", 0, seq[0].table, full[0], size, 3)
        x2 = projection_pattern(size, 2, 0)
        first_middle = 2 if kind is SequenceKind.GUMM else 1
        mtag = "G1" if kind is SequenceKind.GUMM else "A1"
        for h in range(first_middle, n):
            _compare(rep, mtag, h, seq[h].pattern(_MIDDLE), x2, size, 2)
        for h in range(n):
            xzz = (h % 2 == 0) != (kind is SequenceKind.JONSSON)
            pat, tag = (_XZZ, "A3") if xzz else (_XXZ, "A4")
            _compare(rep, tag, h, seq[h].pattern(pat), seq[h + 1].pattern(pat), size, 2)
        _compare(rep, "A5", n, seq[n].table, full[2], size, 3)
    rep.violations.sort(key=lambda v: (v.index if v.index is not None else -1, v.tag, v.point))
    if n <= 1 and size > 1:
        rep.notes.append("trivial variety: sequences of length <= 1 exist only for one-element algebras")
    return rep


def _check_day(rep, seq, size):
    n = len(seq) - 1
    full = projection_tables(size, 4)
    _compare(rep, "D2", 0, seq[0].table, full[0], size, 4)
    x2 = projection_pattern(size, 2, 0)
    for h in range(n + 1):
        _compare(rep, "D1", h, seq[h].pattern(_DAY_MIDDLE), x2, size, 2)
    for h in range(n):
        if h % 2 == 0:
            _compare(rep, "D3", h, seq[h].pattern(_DAY_EVEN), seq[h + 1].pattern(_DAY_EVEN), size, 2)
        else:
            _compare(rep, "D4", h, seq[h].pattern(_DAY_ODD), seq[h + 1].pattern(_DAY_ODD), size, 3)
    _compare(rep, "D5", n, seq[n].table, full[3], size, 4)


# -- star construction ---------------------------------------------------------


def star_operation(s: TermOperation) -> TermOperation:
    """``s*(x,y,z) = s(x, s(x,y,y), s(x,y,z))``, computed tablewise."""
    if s.arity != 3:
        raise SequenceError(f"star needs ternary operations, got arity {s.arity}")
    n = s.size
    X, Y, _ = projection_tables(n, 3)
    X = X.astype(np.int64)
    tab = s.table.astype(np.int64)
    syy = tab[(X * n + Y) * n + Y]
    out = tab[(X * n + syy) * n + tab]
    return TermOperation(3, n, frozen(out.astype(dtype_for(n))))


def star_transform(A: FiniteAlgebra, seq: Sequence[TermOperation]) -> list[TermOperation]:
    for t in seq:
        if t.size != A.size:
            raise SequenceError("operation size differs from algebra size")
    return [star_operation(s) for s in seq]


def double_star_transform(A: FiniteAlgebra, seq: Sequence[TermOperation]) -> list[TermOperation]:
    return star_transform(A, star_transform(A, seq))


_X, _Y, _Z = Var(0), Var(1), Var(2)


def star_term(t: Term) -> Term:
    """Symbolic star; copies of ``t`` are shared subtrees, not deep copies."""
    return substitute(t, [_X, substitute(t, [_X, _Y, _Y]), t])


def star_terms(terms: Sequence[Term]) -> list[Term]:
    return [star_term(t) for t in terms]


# -- absorption properties of s_1 ----------------------------------------------


def _absorbs(rep, tag, s1, X, R):
    for a, c in X.pairs():
        rep.checked += 1
        b = s1(a, a, c)
        if (a, b) not in R:
            rep.violations.append(Violation(tag, None, (a, c), a, b))


def check_tm(A: FiniteAlgebra, s1: TermOperation, theta: BinaryRelation, m: int) -> ValidityReport:
    """Every ``(a, c)`` in ``theta^m`` must satisfy ``a theta s1(a, a, c)``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if theta.size != A.size or s1.size != A.size:
        raise ValueError("size mismatch")
    if s1.arity != 3:
        raise SequenceError("s1 must be ternary")
    rep = ValidityReport()
    _absorbs(rep, f"T_{m}", s1, relation_power(theta, m), theta)
    return rep


FWD, CONV = "fwd", "conv"


def check_am(A: FiniteAlgebra, s1: TermOperation, R: BinaryRelation, pattern: Sequence[str]) -> ValidityReport:
    """``(a, c)`` in ``X_1 o ... o X_m`` (each ``X_j`` is ``R`` or its converse) implies ``a R s1(a,a,c)``."""
    if not pattern:
        raise ValueError("pattern must be nonempty")
    if R.size != A.size or s1.size != A.size:
        raise ValueError("size mismatch")
    if not R.is_reflexive():
        raise PreconditionError("relation is not reflexive")
    if not is_compatible(A, R):
        raise PreconditionError("relation is not compatible")
    Rc = converse(R)
    factors = []
    for p in pattern:
        if p not in (FWD, CONV):
            raise ValueError(f"pattern entries must be {FWD!r} or {CONV!r}, got {p!r}")
        factors.append(R if p == FWD else Rc)
    rep = ValidityReport()
    _absorbs(rep, f"A_{len(pattern)}", s1, compose_all(factors), R)
    return rep


def all_patterns(m: int) -> list[tuple[str, ...]]:
    return list(itertools.product((FWD, CONV), repeat=m))


def _require_valid(A, seq, kind):
    rep = check_sequence(A, seq, kind)
    if not rep.valid:
        raise SequenceError(f"input is not a valid {SequenceKind.parse(kind).value} sequence: {rep.first()}")


def build_tm_witness(A: FiniteAlgebra, seq: Sequence[TermOperation], m: int, kind="gumm", tolerances=None) -> list[TermOperation]:
    """Star the sequence ``m - 1`` times so that ``s_1`` has (T_m).

    The result is re-validated and its ``s_1`` checked on every tolerance in
    ``tolerances`` (default: all tolerances of ``A``).
    """
    kind = SequenceKind.parse(kind)
    if kind not in (SequenceKind.GUMM, SequenceKind.ALVIN):
        raise SequenceError("T_m witnesses are built from Gumm or alvin sequences")
    if m < 1:
        raise ValueError("m must be >= 1")
    _require_valid(A, seq, kind)
    out = list(seq)
    for _ in range(m - 1):
        out = star_transform(A, out)
    rep = check_sequence(A, out, kind)
    if not rep.valid:
        raise WitnessError(f"starred sequence lost validity: {rep.first()}")
    if len(out) > 1:
        for theta in all_tolerances(A) if tolerances is None else tolerances:
            r = check_tm(A, out[1], theta, m)
            if not r.valid:
                raise WitnessError(f"s_1 fails T_{m} on {theta}: {r.first()}")
    return out


def build_am_witness(A: FiniteAlgebra, seq: Sequence[TermOperation], m: int, kind="gumm", relations=None) -> list[TermOperation]:
    """Double-star the sequence ``m - 1`` times so that ``s_1`` has (A_m).

    Checked against every pattern of length ``m`` and every relation in
    ``relations`` (default: reflexive compatible relations of ``A`` generated
    by at most two seed pairs).
    """
    kind = SequenceKind.parse(kind)
    if kind not in (SequenceKind.GUMM, SequenceKind.ALVIN):
        raise SequenceError("A_m witnesses are built from Gumm or alvin sequences")
    if m < 1:
        raise ValueError("m must be >= 1")
    _require_valid(A, seq, kind)
    out = list(seq)
    for _ in range(m - 1):
        out = double_star_transform(A, out)
    rep = check_sequence(A, out, kind)
    if not rep.valid:
        raise WitnessError(f"double-starred sequence lost validity: {rep.first()}")
    if len(out) > 1:
        rels = reflexive_compatible_relations(A) if relations is None else relations
        for R in rels:
            for pat in all_patterns(m):
                r = check_am(A, out[1], R, pat)
                if not r.valid:
                    raise WitnessError(f"s_1 fails A_{m} pattern {pat} on {R}: {r.first()}")
    return out


# -- serialization -------------------------------------------------------------


def sequence_to_json(seq: Sequence[TermOperation]) -> str:
    return json.dumps([t.tolist() for t in seq])


def sequence_from_json(text: str, A: FiniteAlgebra, arity: int = 3) -> list[TermOperation]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SequenceError(f"parse error: {e}") from None
    if isinstance(data, dict):
        data = data.get("tables", data.get("witness"))
    if not isinstance(data, list) or not data or not all(isinstance(t, list) for t in data):
        raise SequenceError("sequence must be a nonempty JSON array of tables")
    out = []
    for i, tab in enumerate(data):
        if len(tab) != A.size**arity:
            raise SequenceError(f"table {i}: expected length {A.size**arity}, got {len(tab)}")
        if any((not isinstance(v, int)) or v < 0 or v >= A.size for v in tab):
            raise SequenceError(f"table {i}: entries must be integers in 0..{A.size - 1}")
        out.append(TermOperation.make(A.size, arity, tab))
    return out
