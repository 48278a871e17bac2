from __future__ import annotations

import itertools
import json

import pytest

import oracles as O
from maltsev.algebra_core import catalog, direct_power
from maltsev.clone_engine import level
from maltsev.identity_verifier import (
    ALPHA_GAMMA_BETA,
    ALPHA_GAMMA_THEN_ALPHA_BETA,
    PatternS,
    cd_chain_terms,
    check_cd_inclusion,
    check_corollary6,
    check_corollary11,
    check_corollary11_all,
    check_theorem12,
    check_tip,
    check_tschantz_identity,
    corollary6_k,
    decide_cd_variety,
)
from maltsev.relations import Congruence, all_congruences
from maltsev.term_calculus import PreconditionError, check_sequence

C3, Z2Z2, L2 = catalog("c3"), catalog("z2z2"), catalog("l2")
L2SQ = direct_power(L2, 2)


def cons(A):
    return [frozenset(c) for c in O.congruences(A)]


def join(a, b, n):
    return frozenset(O.closure(a | b))


def brute_cd(A, n):
    """Violating (alpha, beta, gamma, pair) tuples of (CD) by set arithmetic."""
    bad = []
    for a, b, g in itertools.product(cons(A), repeat=3):
        lhs = a & O.compose(b, g)
        rhs = O.chain(a & g, a & b, n, A.size)
        bad += [(a, b, g, p) for p in lhs - rhs]
    return bad


def test_cd_inclusion_c3_examples():
    rep = check_cd_inclusion(C3, 2)
    assert not rep.holds and rep.checked_triples == 64
    v = rep.witness
    L = all_congruences(C3)
    a, b, g = (L[i] for i in v["ids"])
    assert a == Congruence.full(3)
    assert b.as_list() == [[0, 1], [2]] and g.as_list() == [[0], [1, 2]]
    assert tuple(v["pair"]) == (0, 2)
    assert check_cd_inclusion(C3, 3).holds
    assert check_cd_inclusion(catalog("trivial1"), 0).holds


@pytest.mark.parametrize("name", ["c3", "l2", "z2z2", "z2mal", "b2"])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_cd_inclusion_matches_brute_force(name, n):
    A = catalog(name)
    rep = check_cd_inclusion(A, n)
    assert rep.violation_count == len(brute_cd(A, n))


def test_decide_cd_examples():
    assert decide_cd_variety(L2, 3) and not decide_cd_variety(L2, 2)
    assert decide_cd_variety(catalog("b2"), 2)
    assert decide_cd_variety(catalog("trivial1"), 0)


@pytest.mark.parametrize("name", ["l2", "c3", "b2", "z2mal", "z2z2", "trivial1"])
def test_decide_cd_monotone_and_agrees_with_level(name):
    A = catalog(name)
    answers = [decide_cd_variety(A, n) for n in range(7)]
    for lo, hi in zip(answers, answers[1:]):
        assert hi or not lo
    alvin = level(A, "alvin")
    least = next((n for n, v in enumerate(answers) if v), None)
    assert least == alvin.level
    for n in range(7):
        if answers[n]:
            assert check_cd_inclusion(A, n).holds


@pytest.mark.parametrize("name", ["l2", "c3", "b2"])
def test_cd_chain_gives_alvin_terms(name):
    A = catalog(name)
    n = level(A, "alvin").level
    seq = cd_chain_terms(A, n)
    assert len(seq) == n + 1 and check_sequence(A, seq, "alvin").valid
    assert cd_chain_terms(A, n - 1) is None


@pytest.mark.parametrize("name", ["c3", "z2z2", "l2"])
def test_inclusions_antitone_by_two(name):
    A = catalog(name)
    for n in range(0, 4):
        if check_cd_inclusion(A, n).holds:
            assert check_cd_inclusion(A, n + 2).holds


def test_gumm_bounded_examples():
    r = check_corollary6(Z2Z2, 1, n=2)
    assert r.holds and r.checked_triples == 125
    r = check_corollary6(C3, 3, ell=2, n=3)
    assert r.holds and r.params["k"] == 3
    for A in (C3, Z2Z2, L2):
        r = check_corollary6(A, 4, ell=1, n=max(2, level(A, "gumm").level))
        assert r.holds


def test_chain_length_formulas():
    assert corollary6_k(2, 3, 2) == 0
    assert corollary6_k(2, 3, 4) == (4 - 2) * (3 - 1) + 1
    assert corollary6_k(3, 2, 3) == 3
    assert corollary6_k(4, 3, 3) == 3 * 1 + 1
    with pytest.raises(ValueError):
        corollary6_k(5, 1, 2)


def test_gumm_bound_precondition():
    with pytest.raises(PreconditionError):
        check_corollary6(C3, 1, n=2)
    with pytest.raises(PreconditionError):
        check_corollary6(catalog("z2mal"), 2, ell=0, n=2)


def _brute_c6(A, clause, ell, n):
    size = A.size
    k = corollary6_k(clause, ell, n)
    bad = 0
    if clause == 4:
        tols = [frozenset(t) for t in O.tolerances(A)]
        for psi, theta in itertools.product(tols, repeat=2):
            lhs = psi & O.chain(theta, theta, ell, size)
            rhs = O.chain(psi & theta, psi & theta, k, size)
            bad += len(lhs - rhs)
        return bad
    for a, b, g in itertools.product(cons(A), repeat=3):
        ab, ag = a & b, a & g
        jn = join(ab, ag, size)
        if clause == 1:
            lhs = O.compose(b, g) & jn
            rhs = O.chain(ag, ab, n, size)
        elif clause == 2:
            lhs = a & O.chain(b, g, ell, size)
            first = a & O.compose(b, g) & O.compose(g, b)
            rhs = O.compose(first, O.chain(ab, ag, k, size))
        else:
            lhs = O.chain(b, g, ell, size) & jn
            rhs = O.chain(ag, ab, k, size)
        bad += len(lhs - rhs)
    return bad


@pytest.mark.parametrize("clause", [1, 2, 3, 4])
@pytest.mark.parametrize("name, n", [("c3", 3), ("z2z2", 2), ("c3", 2), ("l2", 2)])
@pytest.mark.parametrize("ell", [1, 2])
def test_gumm_bounded_matches_brute_force(clause, name, n, ell):
    A = catalog(name)
    rep = check_corollary6(A, clause, ell, n, gumm_level=n)
    assert rep.violation_count == _brute_c6(A, clause, ell, n)


def test_tschantz_and_tip():
    for A in (Z2Z2, C3, catalog("trivial1"), L2SQ):
        assert check_tschantz_identity(A).holds
        assert check_tip(A).holds


def test_tip_brute_force():
    for A in (C3, Z2Z2):
        tols = [frozenset(t) for t in O.tolerances(A)]
        for psi, theta in itertools.product(tols, repeat=2):
            assert O.closure(psi) & O.closure(theta) == O.closure(psi & theta)


def test_matrix_identity_examples():
    c = all_congruences(C3)
    b = [c[1], c[2]]
    assert check_corollary11(C3, [[c[1]]]).holds
    assert check_corollary11(C3, [b, b[::-1]]).holds
    atoms = [x for x in all_congruences(Z2Z2) if len(x.blocks) == 2]
    assert len(atoms) == 3
    assert check_corollary11(Z2Z2, [atoms[:2], atoms[1:]]).holds
    assert check_corollary11_all(Z2Z2).holds
    assert check_corollary11_all(C3).holds


def test_pattern_implication():
    rep = check_theorem12(C3, [ALPHA_GAMMA_THEN_ALPHA_BETA])
    assert rep.S.holds and rep.S1.holds and not rep.splus_applicable and rep.implication_ok
    d = rep.to_dict()
    assert d["Splus_holds"] == "not applicable" and d["scope"].startswith("per-algebra")
    rep = check_theorem12(L2SQ, [ALPHA_GAMMA_BETA])
    assert rep.splus_applicable and rep.implication_ok
    for p in PatternS.all_of_length(3):
        assert check_theorem12(catalog("trivial1"), p).implication_ok
    with pytest.raises(ValueError):
        PatternS(("bogus",))


def test_pattern_s_matches_brute_force():
    A = C3
    for p in PatternS.all_of_length(3):
        rep = check_theorem12(A, p)
        holds = True
        for a, b, g in itertools.product(cons(A), repeat=3):
            agb = a & O.compose(g, b)
            agab = O.compose(a & g, a & b)
            rhs = agb
            for t in p.tags:
                rhs = O.compose(rhs, agb if t == ALPHA_GAMMA_BETA else agab)
            if not (a & O.compose(b, g)) <= rhs:
                holds = False
        assert rep.S.holds == holds


def test_threads_do_not_change_reports():
    for fn in (lambda t: check_cd_inclusion(C3, 2, threads=t),
               lambda t: check_corollary6(Z2Z2, 4, 2, 2, threads=t),
               lambda t: check_tip(Z2Z2, threads=t),
               lambda t: check_corollary11_all(C3, threads=t)):
        assert json.dumps(fn(1).to_dict()) == json.dumps(fn(8).to_dict())


def test_report_json_shape():
    d = check_cd_inclusion(C3, 2).to_dict()
    assert d["tag"] == "(CD)" and d["holds"] is False
    v = d["violations"][0]
    assert v["relations"] == ["0,1,2", "0,1|2", "0|1,2"] and v["pair"] == [0, 2]
    assert check_corollary6(C3, 3, 2, 3).to_dict()["tag"] == "C6.3"
    assert check_tip(C3).to_dict()["tag"] == "TIP"
