"""Finite algebras, term sequences and congruence identities."""

from __future__ import annotations

from .algebra_core import (
    CATALOG_NAMES,
    AlgebraError,
    BudgetExceeded,
    FiniteAlgebra,
    Signature,
    catalog,
    direct_power,
    load_algebra,
    load_algebra_file,
)
from .clone_engine import CapExceeded, LevelReport, free_algebra, generate_clone, level, reconstruct_term
from .relations import BinaryRelation, Congruence, all_congruences, all_tolerances
from .term_calculus import SequenceKind, TermOperation, check_sequence, star_transform

__version__ = "0.1.0"
