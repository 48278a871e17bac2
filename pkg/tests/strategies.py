"""Hypothesis strategies for small random algebras and relations."""

from __future__ import annotations

from hypothesis import strategies as st

from maltsev.algebra_core import FiniteAlgebra
from maltsev.relations import BinaryRelation


@st.composite
def algebras(draw, sizes=(1, 2, 3), arities=(1, 2), max_ops=2):
    n = draw(st.sampled_from(sizes))
    count = draw(st.integers(1, max_ops))
    ops = []
    for i in range(count):
        k = draw(st.sampled_from(arities))
        tab = draw(st.lists(st.integers(0, n - 1), min_size=n**k, max_size=n**k))
        ops.append((f"f{i}", k, tab))
    return FiniteAlgebra.from_tables("rand", n, ops)


@st.composite
def relations(draw, size=None, reflexive=False):
    n = size if size is not None else draw(st.integers(1, 4))
    bits = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    pairs = [(a, b) for a in range(n) for b in range(n) if bits[a * n + b] or (reflexive and a == b)]
    return BinaryRelation.from_pairs(n, pairs)
