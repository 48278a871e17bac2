from __future__ import annotations

import itertools

import pytest
from hypothesis import given, strategies as st

import oracles as O
from strategies import algebras, relations
from maltsev.algebra_core import CATALOG_NAMES, catalog, direct_power
from maltsev.relations import (
    BinaryRelation,
    Congruence,
    all_congruences,
    all_tolerances,
    compatible_closure,
    compose,
    compose_chain,
    congruence_generated,
    converse,
    distributive_failure,
    intersect,
    is_compatible,
    is_congruence,
    is_distributive,
    is_modular,
    is_tolerance,
    join_congruences,
    meet_congruences,
    reflexive_compatible_relations,
    relation_power,
    tolerance_generated,
    transitive_closure,
    union,
)

C3 = catalog("c3")
DELTA3 = BinaryRelation.identity(3)
LEQ3 = BinaryRelation.from_pairs(3, [(a, b) for a in range(3) for b in range(3) if a <= b])


def as_set(R):
    return set(R.pairs())


def test_compose_examples():
    a = congruence_generated(C3, [(0, 1)]).rel
    b = congruence_generated(C3, [(1, 2)]).rel
    assert (0, 2) in compose(a, b)
    assert compose(a, DELTA3) == a
    assert compose(DELTA3, DELTA3) == DELTA3


def test_compose_size_mismatch():
    with pytest.raises(ValueError):
        compose(DELTA3, BinaryRelation.identity(2))


def test_chain_conventions():
    a = congruence_generated(C3, [(0, 1)]).rel
    b = congruence_generated(C3, [(1, 2)]).rel
    assert compose_chain(a, b, 0) == DELTA3
    assert compose_chain(a, b, 1) == a
    assert compose_chain(a, b, 3) == BinaryRelation.full(3)
    assert relation_power(a, 0) == DELTA3 and relation_power(a, 1) == a


def test_tolerance_examples():
    theta = tolerance_generated(C3, [(0, 1), (1, 2)])
    assert (0, 2) not in theta and (0, 1) in theta and (1, 0) in theta
    assert relation_power(theta, 2) == BinaryRelation.full(3)
    assert tolerance_generated(C3, []) == DELTA3
    assert tolerance_generated(catalog("z2mal"), [(0, 1)]) == BinaryRelation.full(2)
    assert transitive_closure(theta) == BinaryRelation.full(3)


def test_converse_examples():
    assert converse(converse(LEQ3)) == LEQ3
    assert as_set(converse(LEQ3)) == {(a, b) for a in range(3) for b in range(3) if a >= b}


def test_compatible_closure_examples():
    assert compatible_closure(C3, LEQ3) == LEQ3
    l2 = catalog("l2")
    R = BinaryRelation.from_pairs(2, [(0, 1)])
    got = compatible_closure(l2, R)
    # oracle: close under meet/join applied to related pairs
    want = {(0, 1)}
    while True:
        new = set(want)
        for (a, b), (c, d) in itertools.product(want, repeat=2):
            new.add((min(a, c), min(b, d)))
            new.add((max(a, c), max(b, d)))
        if new == want:
            break
        want = new
    assert as_set(got) == want
    z = catalog("z2mal")
    R = union(BinaryRelation.identity(2), BinaryRelation.from_pairs(2, [(0, 1)]))
    got = compatible_closure(z, R)
    assert is_compatible(z, got) and O.compatible(z, as_set(got)) and R <= got


def test_congruence_generated_examples():
    assert congruence_generated(C3, []) == Congruence.identity(3)
    assert congruence_generated(C3, [(0, 1)]).as_list() == [[0, 1], [2]]
    assert congruence_generated(C3, [(0, 2)]) == Congruence.full(3)
    a = congruence_generated(C3, [(0, 1)])
    b = congruence_generated(C3, [(1, 2)])
    assert join_congruences(a, b) == Congruence.full(3)
    assert join_congruences(a, Congruence.identity(3)) == a
    assert join_congruences(a, a) == a


def test_congruence_lattices():
    assert len(all_congruences(catalog("trivial1"))) == 1
    L = all_congruences(C3)
    assert [c.as_list() for c in L] == [[[0], [1], [2]], [[0, 1], [2]], [[0], [1, 2]], [[0, 1, 2]]]
    assert len(all_congruences(catalog("z2z2"))) == 5
    assert is_distributive(L) and is_modular(L)
    K = all_congruences(catalog("z2z2"))
    assert is_modular(K) and not is_distributive(K)
    assert distributive_failure(K) is not None
    one = all_congruences(catalog("trivial1"))
    assert is_modular(one) and is_distributive(one)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_congruences_match_partition_filter(name):
    A = catalog(name)
    got = {frozenset(c.rel.pairs()) for c in all_congruences(A)}
    assert got == set(O.congruences(A))


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_tolerances_match_filter(name):
    A = catalog(name)
    got = {frozenset(t.pairs()) for t in all_tolerances(A)}
    assert got == set(O.tolerances(A))
    for t in all_tolerances(A):
        assert is_tolerance(A, t)


def test_l2_squared_lattice():
    P = direct_power(catalog("l2"), 2)
    got = {frozenset(c.rel.pairs()) for c in all_congruences(P)}
    assert got == set(O.congruences(P))
    assert is_distributive(all_congruences(P))


@pytest.mark.parametrize("name", ["c3", "z2z2", "b2"])
def test_join_is_limit_of_chains(name):
    L = all_congruences(catalog(name))
    for a, b in itertools.product(L, repeat=2):
        n = a.size
        assert join_congruences(a, b).rel == compose_chain(a.rel, b.rel, 2 * n)
        assert join_congruences(a, b).rel == transitive_closure(union(a.rel, b.rel))


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_lattice_closed(name):
    L = all_congruences(catalog(name))
    S = set(L)
    for a, b in itertools.product(L, repeat=2):
        assert meet_congruences(a, b) in S and join_congruences(a, b) in S


def test_reflexive_compatible_relations_c3():
    rels = reflexive_compatible_relations(C3)
    assert LEQ3 in rels and converse(LEQ3) in rels
    for R in rels:
        assert R.is_reflexive() and is_compatible(C3, R)


# -- properties -------------------------------------------------------------------


@given(st.integers(1, 4).flatmap(lambda n: st.tuples(relations(n), relations(n), relations(n))))
def test_compose_matches_pairs_and_is_associative(rs):
    R, S, T = rs
    assert as_set(compose(R, S)) == O.compose(as_set(R), as_set(S))
    assert compose(compose(R, S), T) == compose(R, compose(S, T))
    n = R.size
    assert compose(R, BinaryRelation.identity(n)) == R == compose(BinaryRelation.identity(n), R)


@given(st.integers(1, 4).flatmap(lambda n: st.tuples(relations(n), relations(n))))
def test_converse_antidistributes(rs):
    R, S = rs
    assert converse(compose(R, S)) == compose(converse(S), converse(R))
    assert converse(converse(R)) == R
    assert intersect(R, S) == R & S


@given(relations())
def test_transitive_closure_matches_oracle(R):
    assert as_set(transitive_closure(R)) == O.closure(as_set(R))


@given(st.integers(1, 4).flatmap(lambda n: st.tuples(relations(n), relations(n), st.integers(0, 5))))
def test_chain_matches_oracle(args):
    R, S, k = args
    assert as_set(compose_chain(R, S, k)) == O.chain(as_set(R), as_set(S), k, R.size)


@given(st.data())
def test_generated_relations_are_least(data):
    A = data.draw(algebras(sizes=(1, 2, 3), arities=(1, 2)))
    n = A.size
    pairs = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3))
    c = congruence_generated(A, pairs)
    assert is_congruence(A, c.rel)
    assert frozenset(c.rel.pairs()) == O.least_congruence_containing(A, pairs)
    t = tolerance_generated(A, pairs)
    assert is_tolerance(A, t)
    cands = [T for T in O.tolerances(A) if set(pairs) <= T]
    assert frozenset(t.pairs()) == min(cands, key=len)


@given(algebras(sizes=(1, 2, 3), arities=(1, 2)))
def test_all_congruences_random(A):
    got = {frozenset(c.rel.pairs()) for c in all_congruences(A)}
    assert got == set(O.congruences(A))
