"""Finite algebras, symbolic terms and their evaluation.

Elements of an algebra of size ``n`` are the integers ``0..n-1``.  A ``k``-ary
operation table is a flat array of length ``n**k`` indexed row-major: the tuple
``(a_0, ..., a_{k-1})`` sits at ``sum(a_i * n**(k-1-i))``.  The same encoding is
used for term operations, slices and the universes of direct powers.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

DEFAULT_BUDGET_MB = 2048


class AlgebraError(ValueError):
    """Malformed or invalid algebra data."""


class BudgetExceeded(MemoryError):
    pass


def budget_bytes() -> int:
    mb = os.environ.get("MALT_BUDGET_MB")
    return int(float(mb) * 2**20) if mb else DEFAULT_BUDGET_MB * 2**20


def check_budget(entries: int, itemsize: int = 1, what: str = "table") -> None:
    need = entries * itemsize
    if need > budget_bytes():
        raise BudgetExceeded(
            f"{what} needs {need} bytes, budget is {budget_bytes()} (MALT_BUDGET_MB)"
        )


def dtype_for(n: int):
    if n <= 256:
        return np.uint8
    if n <= 65536:
        return np.uint16
    return np.int64


def frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Signature:
    symbols: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [s for s, _ in self.symbols]
        dup = {s for s in names if names.count(s) > 1}
        if dup:
            raise AlgebraError(f"duplicate operation symbol {sorted(dup)[0]!r}")
        for s, k in self.symbols:
            if k < 0:
                raise AlgebraError(f"operation {s!r} has negative arity {k}")

    def arity(self, symbol: str) -> int:
        for s, k in self.symbols:
            if s == symbol:
                return k
        raise KeyError(f"unknown operation symbol {symbol!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __len__(self):
        return len(self.symbols)


@dataclass(frozen=True, eq=False)
class FiniteAlgebra:
    name: str
    size: int
    signature: Signature
    tables: dict  # symbol -> read-only flat ndarray of length size**arity

    def __post_init__(self):
        if self.size < 1:
            raise AlgebraError(f"algebra {self.name!r}: size must be >= 1, got {self.size}")
        for sym, k in self.signature:
            if sym not in self.tables:
                raise AlgebraError(f"operation {sym!r}: missing table")
            tab = self.tables[sym]
            if len(tab) != self.size**k:
                raise AlgebraError(
                    f"operation {sym!r}: expected length {self.size**k}, got {len(tab)}"
                )
            bad = np.flatnonzero((np.asarray(tab) < 0) | (np.asarray(tab) >= self.size))
            if len(bad):
                i = int(bad[0])
                raise AlgebraError(
                    f"operation {sym!r}: entry {i} = {int(tab[i])} out of range 0..{self.size - 1}"
                )

    @classmethod
    def from_tables(cls, name: str, size: int, ops: Iterable[tuple[str, int, Sequence[int]]]):
        ops = list(ops)
        sig = Signature(tuple((s, k) for s, k, _ in ops))
        dt = dtype_for(size)
        tables = {}
        for s, k, tab in ops:
            arr = np.asarray(list(tab), dtype=np.int64)
            if arr.size and (arr.min() < 0 or arr.max() >= size):
                i = int(np.flatnonzero((arr < 0) | (arr >= size))[0])
                raise AlgebraError(
                    f"operation {s!r}: entry {i} = {int(arr[i])} out of range 0..{size - 1}"
                )
            tables[s] = frozen(arr.astype(dt))
        return cls(name, size, sig, tables)

    def op(self, symbol: str, *args: int) -> int:
        tab = self.tables[symbol]
        idx = 0
        for a in args:
            idx = idx * self.size + a
        return int(tab[idx])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "size": self.size,
            "operations": [
                {"name": s, "arity": k, "table": [int(v) for v in self.tables[s]]}
                for s, k in self.signature
            ],
        }

    def __repr__(self):
        ops = ", ".join(f"{s}/{k}" for s, k in self.signature)
        return f"FiniteAlgebra({self.name!r}, size={self.size}, ops=[{ops}])"


# -- terms -------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    index: int

    def __str__(self):
        return var_name(self.index)


@dataclass(frozen=True)
class App:
    symbol: str
    args: tuple = ()

    def __str__(self):
        if not self.args:
            return self.symbol
        return f"{self.symbol}({','.join(str(a) for a in self.args)})"


Term = Union[Var, App]

_VAR_NAMES = "xyzw"


def var_name(i: int) -> str:
    return _VAR_NAMES[i] if i < len(_VAR_NAMES) else f"x{i}"


def term_arity(t: Term) -> int:
    """1 + the largest variable index occurring in ``t`` (0 for ground terms)."""
    stack, top = [t], -1
    while stack:
        s = stack.pop()
        if isinstance(s, Var):
            top = max(top, s.index)
        else:
            stack.extend(s.args)
    return top + 1


def substitute(t: Term, images: Sequence[Term]) -> Term:
    """Replace ``Var(i)`` by ``images[i]``.  Substituted subterms are shared, not copied."""
    memo: dict[int, Term] = {}

    def go(s):
        key = id(s)
        if key in memo:
            return memo[key]
        if isinstance(s, Var):
            r = images[s.index]
        else:
            r = App(s.symbol, tuple(go(a) for a in s.args))
        memo[key] = r
        return r

    return go(t)


def term_size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(term_size(a) for a in t.args)


def check_term(sig: Signature, t: Term) -> None:
    stack = [t]
    while stack:
        s = stack.pop()
        if isinstance(s, App):
            try:
                k = sig.arity(s.symbol)
            except KeyError:
                raise AlgebraError(f"unknown operation symbol {s.symbol!r}") from None
            if k != len(s.args):
                raise AlgebraError(f"{s.symbol!r} has arity {k}, applied to {len(s.args)} args")
            stack.extend(s.args)


def evaluate_term(A: FiniteAlgebra, t: Term, assignment: Sequence[int]) -> int:
    need = term_arity(t)
    if len(assignment) < need:
        raise AlgebraError(f"assignment has {len(assignment)} values, term needs {need}")
    if isinstance(t, Var):
        return int(assignment[t.index])
    if t.symbol not in A.tables:
        raise AlgebraError(f"unknown operation symbol {t.symbol!r}")
    if A.signature.arity(t.symbol) != len(t.args):
        raise AlgebraError(f"{t.symbol!r} applied to {len(t.args)} args")
    return A.op(t.symbol, *(evaluate_term(A, a, assignment) for a in t.args))


def tuple_index(tup: Sequence[int], n: int) -> int:
    idx = 0
    for a in tup:
        idx = idx * n + a
    return idx


def index_tuple(idx: int, n: int, k: int) -> tuple[int, ...]:
    out = []
    for _ in range(k):
        idx, r = divmod(idx, n)
        out.append(r)
    return tuple(reversed(out))


def projection_tables(n: int, k: int) -> list[np.ndarray]:
    """The ``k`` projection tables of arity ``k`` on an ``n``-element set."""
    check_budget(n**k * k, np.dtype(dtype_for(n)).itemsize, "projection tables")
    idx = np.arange(n**k, dtype=np.int64)
    return [((idx // n ** (k - 1 - i)) % n).astype(dtype_for(n)) for i in range(k)]


def apply_table(table: np.ndarray, n: int, args: Sequence[np.ndarray]) -> np.ndarray:
    """Apply a basic operation pointwise to argument arrays (broadcasting allowed)."""
    if not args:
        return table[0]
    idx = np.asarray(args[0], dtype=np.int64)
    for a in args[1:]:
        idx = idx * n + a
    return table[idx]


def term_operation(A: FiniteAlgebra, t: Term, k: int) -> np.ndarray:
    """Table (length ``n**k``) of the ``k``-ary term operation induced by ``t``."""
    if term_arity(t) > k:
        raise AlgebraError(f"term uses {term_arity(t)} variables, arity {k} requested")
    check_term(A.signature, t)
    n = A.size
    proj = projection_tables(n, k)
    memo: dict[int, np.ndarray] = {}

    def go(s):
        key = id(s)
        if key in memo:
            return memo[key]
        if isinstance(s, Var):
            r = proj[s.index]
        else:
            r = apply_table(A.tables[s.symbol], n, [go(a) for a in s.args])
            if np.ndim(r) == 0:
                r = np.full(n**k, r, dtype=dtype_for(n))
        memo[key] = r
        return r

    return frozen(np.array(go(t), dtype=dtype_for(n)))


def direct_power(A: FiniteAlgebra, m: int) -> FiniteAlgebra:
    """``A**m`` with m-tuples encoded as row-major integers; operations act coordinatewise."""
    if m < 1:
        raise ValueError("exponent must be positive")
    n, N = A.size, A.size**m
    ops = []
    for sym, k in A.signature:
        check_budget(N**k, 8, f"direct power table {sym!r}")
        elems = np.arange(N**k, dtype=np.int64)
        # args[j] = the j-th argument of each tuple in A^m
        args = [(elems // N ** (k - 1 - j)) % N for j in range(k)]
        out = np.zeros(N**k, dtype=np.int64)
        for c in range(m):
            coord = [(a // n ** (m - 1 - c)) % n for a in args]
            out = out * n + apply_table(A.tables[sym].astype(np.int64), n, coord)
        ops.append((sym, k, out))
    name = A.name if m == 1 else f"{A.name}^{m}"
    return FiniteAlgebra.from_tables(name, N, ops)


# -- serialization -----------------------------------------------------------


def algebra_from_dict(data) -> FiniteAlgebra:
    if not isinstance(data, dict):
        raise AlgebraError("algebra must be a JSON object")
    try:
        name = data.get("name", "")
        size = data["size"]
        ops_raw = data.get("operations", [])
    except KeyError as e:
        raise AlgebraError(f"missing field {e.args[0]!r}") from None
    if not isinstance(size, int) or isinstance(size, bool):
        raise AlgebraError("size must be an integer")
    if size < 1:
        raise AlgebraError(f"size must be >= 1, got {size}")
    ops = []
    seen = set()
    for i, op in enumerate(ops_raw):
        try:
            sym, k, tab = op["name"], op["arity"], op["table"]
        except (KeyError, TypeError):
            raise AlgebraError(f"operation #{i}: needs name, arity and table") from None
        if sym in seen:
            raise AlgebraError(f"duplicate operation symbol {sym!r}")
        seen.add(sym)
        if not isinstance(k, int) or k < 0:
            raise AlgebraError(f"operation {sym!r}: bad arity {k!r}")
        if not isinstance(tab, list) or not all(isinstance(v, int) for v in tab):
            raise AlgebraError(f"operation {sym!r}: table must be a list of integers")
        if len(tab) != size**k:
            raise AlgebraError(f"operation {sym!r}: expected length {size**k}, got {len(tab)}")
        ops.append((sym, k, tab))
    return FiniteAlgebra.from_tables(str(name), size, ops)


def load_algebra(text: str) -> FiniteAlgebra:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise AlgebraError(f"parse error: {e}") from None
    return algebra_from_dict(data)


def dump_algebra(A: FiniteAlgebra, **extra) -> str:
    d = A.to_dict()
    d.update(extra)
    return json.dumps(d)


CATALOG_NAMES = ("trivial1", "l2", "b2", "c3", "z2mal", "z2z2")


def catalog(name: str) -> FiniteAlgebra:
    """One of the bundled example algebras."""
    if name not in CATALOG_NAMES:
        raise KeyError(f"no catalog algebra {name!r}")
    text = resources.files("maltsev").joinpath("catalog").joinpath(f"{name}.json").read_text()
    return load_algebra(text)


def load_algebra_file(path) -> FiniteAlgebra:
    """Load from a file; a missing ``catalog/<name>.json`` falls back to the bundled copy."""
    p = Path(path)
    if not p.exists() and p.parent.name == "catalog" and p.stem in CATALOG_NAMES:
        return catalog(p.stem)
    return load_algebra(p.read_text())
