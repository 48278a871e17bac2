"""Named verification suites: each runs a batch of checks on one algebra.

A suite returns a :class:`SuiteReport` whose assertions carry one of the
statuses PASS, FAIL, SKIP (hypothesis of the statement not met) and
INCONCLUSIVE (a search cap was hit).  Reports serialize to JSON with sorted
keys and never depend on the thread count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

from .algebra_core import FiniteAlgebra, term_operation
from .clone_engine import (
    DEFAULT_CLONE_CAP,
    DEFAULT_LEVEL_CAP,
    CapExceeded,
    LevelReport,
    UnreliableOnPartialClone,
    level,
)
from .identity_verifier import (
    InclusionReport,
    PatternS,
    check_corollary6,
    check_corollary11_all,
    check_theorem12,
    check_tip,
    check_tschantz_identity,
    decide_cd_variety,
)
from .relations import all_congruences, all_tolerances
from .term_calculus import (
    SequenceKind,
    TermOperation,
    WitnessError,
    build_tm_witness,
    check_sequence,
    check_tm,
    star_terms,
)

PASS, FAIL, SKIP, INCONCLUSIVE = "PASS", "FAIL", "SKIP", "INCONCLUSIVE"

DAY_DEFAULT_MAX_SIZE = 2


@dataclass
class Assertion:
    label: str
    status: str
    detail: str = ""
    data: dict = field(default_factory=dict)

    def to_dict(self):
        return {"label": self.label, "status": self.status, "detail": self.detail, "data": self.data}

    def __str__(self):
        return f"{self.status}: {self.label}" + (f" ({self.detail})" if self.detail else "")


@dataclass
class SuiteReport:
    suite: str
    algebra: str
    params: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)

    def add(self, label, status, detail="", **data):
        self.assertions.append(Assertion(label, status, detail, data))

    def add_inclusion(self, label, rep: InclusionReport):
        detail = f"{rep.checked_triples} tuples checked"
        if not rep.holds:
            detail += f"; witness: {rep.describe_witness()}"
        self.add(label, PASS if rep.holds else FAIL, detail, report=rep.to_dict())

    @property
    def exit_code(self) -> int:
        statuses = {a.status for a in self.assertions}
        if FAIL in statuses:
            return 1
        if INCONCLUSIVE in statuses:
            return 3
        return 0

    def to_dict(self):
        return {
            "suite": self.suite,
            "algebra": self.algebra,
            "params": self.params,
            "exit_code": self.exit_code,
            "assertions": [a.to_dict() for a in self.assertions],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def __str__(self):
        head = f"suite {self.suite} on {self.algebra}"
        return "\n".join([head] + [f"  {a}" for a in self.assertions])


class Context:
    """Per-run cache of levels and relation spaces for one algebra."""

    def __init__(self, A: FiniteAlgebra, cap_n=DEFAULT_LEVEL_CAP, cap_clone=DEFAULT_CLONE_CAP,
                 threads=1, day_max_size: Optional[int] = DAY_DEFAULT_MAX_SIZE):
        self.A = A
        self.cap_n = cap_n
        self.cap_clone = cap_clone
        self.threads = threads
        self.day_max_size = day_max_size
        self._levels: dict = {}
        self._lattice = None
        self._tols = None

    def level(self, kind) -> LevelReport:
        """Level report, or raises CapExceeded / UnreliableOnPartialClone."""
        kind = SequenceKind.parse(kind)
        if kind not in self._levels:
            if kind is SequenceKind.DAY and self.day_max_size is not None and self.A.size > self.day_max_size:
                raise _DayTooLarge(self.A.size, self.day_max_size)
            self._levels[kind] = level(self.A, kind, self.cap_n, self.cap_clone, threads=self.threads)
        return self._levels[kind]

    @property
    def lattice(self):
        if self._lattice is None:
            self._lattice = all_congruences(self.A)
        return self._lattice

    @property
    def tolerances(self):
        if self._tols is None:
            self._tols = all_tolerances(self.A)
        return self._tols

    def is_cm(self) -> Optional[bool]:
        rep = self.level(SequenceKind.GUMM)
        return True if rep.found else (False if rep.exhausted else None)

    def is_cd(self) -> Optional[bool]:
        rep = self.level(SequenceKind.JONSSON)
        return True if rep.found else (False if rep.exhausted else None)


class _DayTooLarge(Exception):
    def __init__(self, size, limit):
        super().__init__(f"Day levels are limited to size <= {limit} (algebra has size {size})")


def _guard(report: SuiteReport, label: str, fn: Callable[[], None]):
    """Run ``fn``; cap hits become INCONCLUSIVE, Day-size refusals SKIP."""
    try:
        fn()
    except (CapExceeded, UnreliableOnPartialClone) as e:
        report.add(label, INCONCLUSIVE, str(e) or "clone cap reached")
    except _DayTooLarge as e:
        report.add(label, SKIP, str(e))


def _require(report: SuiteReport, label: str, flag: Optional[bool], what: str) -> bool:
    if flag is None:
        report.add(label, INCONCLUSIVE, f"could not decide whether the variety is {what} within the level cap")
        return False
    if not flag:
        report.add(label, SKIP, f"variety is not {what}")
        return False
    return True


def _level_str(rep: LevelReport):
    return rep.level if rep.found else ("none" if rep.exhausted else f"none up to {rep.cap}")


# -- suites ------------------------------------------------------------------


def suite_theorem4(ctx: Context, **_) -> SuiteReport:
    """Alvin level equals Gumm level for CD varieties; (CD) decided in F(3) agrees."""
    rep = SuiteReport("theorem4", ctx.A.name)

    def body():
        a = ctx.level(SequenceKind.ALVIN)
        g = ctx.level(SequenceKind.GUMM)
        data = {"alvin": a.level, "gumm": g.level}
        if not a.found:
            if not a.exhausted:
                rep.add("alvin level = gumm level", INCONCLUSIVE, f"alvin level none up to {a.cap}", **data)
            else:
                rep.add("alvin level = gumm level", SKIP, "variety is not CD (no alvin sequence exists)", **data)
            return
        ok = a.level == g.level
        rep.add(f"alvin level {a.level} = gumm level {g.level}", PASS if ok else FAIL, **data)
        answers = {n: decide_cd_variety(ctx.A, n, ctx.cap_clone) for n in range(a.level + 2)}
        least = min((n for n, v in answers.items() if v), default=None)
        ok = least == a.level and all(answers[n] == (n >= a.level) for n in answers)
        rep.add("(CD) in F(3) holds exactly from the alvin level on", PASS if ok else FAIL,
                f"least n = {least}", answers={str(n): v for n, v in answers.items()})

    _guard(rep, "alvin level = gumm level", body)
    return rep


def suite_theorem5(ctx: Context, m_max: int = 4, relatives=(), **_) -> SuiteReport:
    """Starred Gumm/alvin sequences whose s_1 satisfies (T_m), m <= m_max.

    ``relatives`` are further algebras of the same signature in the variety
    of ``ctx.A``; the symbolic witness terms are evaluated there and checked
    against all of their tolerances as well.
    """
    rep = SuiteReport("theorem5", ctx.A.name, {"m_max": m_max, "relatives": [B.name for B in relatives]})

    def body():
        for kind in (SequenceKind.GUMM, SequenceKind.ALVIN):
            lv = ctx.level(kind)
            label = f"{kind.value}: s_1 has (T_m) for m <= {m_max}"
            if not lv.found:
                rep.add(label, SKIP if lv.exhausted else INCONCLUSIVE, f"no {kind.value} sequence found")
                continue
            _theorem5_kind(rep, ctx, kind, lv, m_max, relatives)

    _guard(rep, "theorem5", body)
    return rep


def _theorem5_kind(rep, ctx, kind, lv, m_max, relatives):
    A = ctx.A
    terms = lv.witness_terms
    for m in range(1, m_max + 1):
        label = f"{kind.value} m={m}: starred sequence valid and s_1 has (T_{m})"
        try:
            out = build_tm_witness(A, lv.witness, m, kind, tolerances=ctx.tolerances)
        except WitnessError as e:
            rep.add(label, FAIL, str(e))
            continue
        checked = len(ctx.tolerances)
        failures = []
        if len(out) > 1:
            for B in relatives:
                t1 = terms
                for _ in range(m - 1):
                    t1 = star_terms(t1)
                seqB = [TermOperation(3, B.size, term_operation(B, t, 3)) for t in t1]
                if not check_sequence(B, seqB, kind).valid:
                    failures.append(f"{B.name}: evaluated sequence invalid")
                    continue
                for theta in all_tolerances(B):
                    checked += 1
                    r = check_tm(B, seqB[1], theta, m)
                    if not r.valid:
                        failures.append(f"{B.name}: {theta} {r.first()}")
        rep.add(label, FAIL if failures else PASS,
                f"{checked} tolerances checked" + (f"; {failures[0]}" if failures else ""),
                length=len(out) - 1, tolerances=checked)


def suite_remark9(ctx: Context, **_) -> SuiteReport:
    """The unstarred t_1 of a Gumm sequence already has (T_2)."""
    rep = SuiteReport("remark9", ctx.A.name)

    def body():
        lv = ctx.level(SequenceKind.GUMM)
        label = "untransformed t_1 has (T_2)"
        if not lv.found or lv.level < 1:
            rep.add(label, SKIP, "no Gumm sequence of positive length")
            return
        bad = [str(t) for t in ctx.tolerances if not check_tm(ctx.A, lv.witness[1], t, 2).valid]
        rep.add(label, FAIL if bad else PASS, f"{len(ctx.tolerances)} tolerances checked", failures=bad[:5])

    _guard(rep, "remark9", body)
    return rep


def suite_corollary6(ctx: Context, clause: Optional[int] = None, ell: Optional[int] = None,
                     n: Optional[int] = None, ell_max: int = 3, **_) -> SuiteReport:
    """Gumm-bounded inclusions with n defaulting to the computed Gumm level."""
    rep = SuiteReport("corollary6", ctx.A.name)

    def body():
        g = ctx.level(SequenceKind.GUMM)
        if not _require(rep, "Gumm terms exist", ctx.is_cm(), "congruence modular"):
            return
        nn = n if n is not None else max(g.level, 2)
        clauses = [clause] if clause else [1, 2, 3, 4]
        ells = [ell] if ell else list(range(1, ell_max + 1))
        rep.params.update({"n": nn, "clauses": clauses, "ells": ells, "gumm_level": g.level})
        for c in clauses:
            for e in ells if c != 1 else [1]:
                r = check_corollary6(ctx.A, c, e, nn, gumm_level=g.level, lattice=ctx.lattice,
                                     tolerances=ctx.tolerances if c == 4 else None, threads=ctx.threads)
                k = r.params["k"]
                label = f"C6.{c} n={nn}" + (f" ell={e} k={k}" if c != 1 else "")
                rep.add_inclusion(label, r)

    _guard(rep, "corollary6", body)
    return rep


def suite_tip(ctx: Context, **_) -> SuiteReport:
    """Tolerance intersection property and the Tschantz identity."""
    rep = SuiteReport("tip", ctx.A.name)

    def body():
        if not _require(rep, "Gumm terms exist", ctx.is_cm(), "congruence modular"):
            return
        rep.add_inclusion("TIP: Psi* Theta* = (Psi Theta)*", check_tip(ctx.A, ctx.tolerances, ctx.threads))
        rep.add_inclusion("Tschantz: a(b+g) = a(b.g) o (ab+ag)",
                          check_tschantz_identity(ctx.A, ctx.lattice, ctx.threads))

    _guard(rep, "tip", body)
    return rep


def suite_corollary11(ctx: Context, h: int = 2, g: int = 2, **_) -> SuiteReport:
    rep = SuiteReport("corollary11", ctx.A.name, {"h": h, "g": g})

    def body():
        if not _require(rep, "Gumm terms exist", ctx.is_cm(), "congruence modular"):
            return
        rep.add_inclusion(f"C11 over all {h}x{g} congruence matrices",
                          check_corollary11_all(ctx.A, h, g, ctx.lattice, ctx.threads))

    _guard(rep, "corollary11", body)
    return rep


def suite_theorem12(ctx: Context, r_max: int = 3, **_) -> SuiteReport:
    """S => S1 (and S+) on this algebra; a per-algebra necessary-condition check."""
    rep = SuiteReport("theorem12", ctx.A.name, {"r_max": r_max, "scope": "per-algebra necessary condition"})

    def body():
        if not _require(rep, "Jonsson terms exist", ctx.is_cd(), "congruence distributive"):
            return
        for r in range(1, r_max + 1):
            for p in PatternS.all_of_length(r):
                res = check_theorem12(ctx.A, p, ctx.lattice, ctx.threads)
                splus = ("n/a" if not res.splus_applicable else
                         "-" if res.Splus is None else res.Splus.holds)
                detail = f"S={res.S.holds} S1={None if res.S1 is None else res.S1.holds} S+={splus}"
                rep.add(f"T12 r={r} [{p}]: S => S1" + (" and S+" if res.splus_applicable else ""),
                        PASS if res.implication_ok else FAIL, detail, report=res.to_dict())

    _guard(rep, "theorem12", body)
    return rep


def suite_theorem8(ctx: Context, **_) -> SuiteReport:
    """For CD varieties with Day level r: Jonsson level <= r^2 - r + 2, alvin level <= r^2 - r + 1."""
    rep = SuiteReport("theorem8", ctx.A.name)

    def body():
        if not _require(rep, "Jonsson terms exist", ctx.is_cd(), "congruence distributive"):
            return
        d = ctx.level(SequenceKind.DAY)
        j = ctx.level(SequenceKind.JONSSON)
        a = ctx.level(SequenceKind.ALVIN)
        if not d.found or not a.found:
            rep.add("Day and alvin levels computed", INCONCLUSIVE, f"day {_level_str(d)}, alvin {_level_str(a)}")
            return
        r = d.level
        data = {"day": r, "jonsson": j.level, "alvin": a.level}
        rep.add(f"jonsson level {j.level} <= r^2-r+2 = {r * r - r + 2}",
                PASS if j.level <= r * r - r + 2 else FAIL, **data)
        rep.add(f"alvin level {a.level} <= r^2-r+1 = {r * r - r + 1}",
                PASS if a.level <= r * r - r + 1 else FAIL, **data)
        rep.add(f"jonsson level {j.level} <= alvin level + 1 = {a.level + 1}",
                PASS if j.level <= a.level + 1 else FAIL, **data)

    _guard(rep, "theorem8", body)
    return rep


def suite_remark7(ctx: Context, **_) -> SuiteReport:
    """Day level r <= 2n - 2 for Gumm level n >= 2, and n <= r^2 - r + 1."""
    rep = SuiteReport("remark7", ctx.A.name)

    def body():
        if not _require(rep, "Gumm terms exist", ctx.is_cm(), "congruence modular"):
            return
        g = ctx.level(SequenceKind.GUMM)
        d = ctx.level(SequenceKind.DAY)
        if not d.found:
            rep.add("Day level computed", INCONCLUSIVE, _level_str(d))
            return
        n, r = g.level, d.level
        data = {"gumm": n, "day": r}
        if n >= 2:
            rep.add(f"day level {r} <= 2n-2 = {2 * n - 2}", PASS if r <= 2 * n - 2 else FAIL, **data)
        else:
            rep.add("day level <= 2n-2", SKIP, f"gumm level {n} < 2 (trivial variety)", **data)
        rep.add(f"gumm level {n} <= r^2-r+1 = {r * r - r + 1}", PASS if n <= r * r - r + 1 else FAIL, **data)

    _guard(rep, "remark7", body)
    return rep


SUITES = {
    "theorem4": suite_theorem4,
    "theorem5": suite_theorem5,
    "remark9": suite_remark9,
    "corollary6": suite_corollary6,
    "tip": suite_tip,
    "corollary11": suite_corollary11,
    "theorem12": suite_theorem12,
    "theorem8": suite_theorem8,
    "remark7": suite_remark7,
}


def run_suite(name: str, A: FiniteAlgebra, *, threads: int = 1, cap_n: int = DEFAULT_LEVEL_CAP,
              cap_clone: int = DEFAULT_CLONE_CAP, day_max_size: Optional[int] = DAY_DEFAULT_MAX_SIZE,
              **params) -> SuiteReport:
    try:
        fn = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}") from None
    ctx = Context(A, cap_n, cap_clone, threads, day_max_size)
    return fn(ctx, **params)
