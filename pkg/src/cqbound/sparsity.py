"""Polynomial-time decision of sparsity preservation.

A query preserves sparsity when its output can never exceed the largest
input relation.  The decision reduces to one tractable SAT instance per body
atom: a satisfying assignment is exactly a one-color valid coloring whose
color reaches the head but avoids that atom.  If some instance is
unsatisfiable the query is preserving; otherwise combining the per-atom
colorings (disjoint fresh colors) witnesses a ratio above one.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .coloring import Coloring, coloring_ratio, validate_coloring
from .errors import InputError
from .query import Query, Variable, VariableFD, reduce_fds, require_chased


@dataclass
class SatInstance:
    """Conjunction of negated units (c1), one positive clause (c2), and FD
    clauses of shape (lhs1 v lhs2 v ~rhs) or their shorter degenerations (c3).
    Variables are indices into ``variables``."""

    variables: tuple[Variable, ...]
    c1: frozenset[int]
    c2: frozenset[int]
    c3: tuple[tuple[frozenset[int], int], ...]  # (positive literals, negated literal)


@dataclass
class PassResult:
    satisfiable: bool
    assignment: dict[Variable, bool] | None
    passes: int


@dataclass
class SparsityResult:
    preserving: bool
    witness: Coloring | None = None
    lower_bound_exponent: Fraction | None = None
    failing_relation: int | None = None
    failing_relation_name: str | None = None


def build_sat(q: Query, fds: Iterable[VariableFD], i: int) -> SatInstance:
    """SAT instance whose models are one-color colorings coloring the head
    but not body atom ``i`` (0-based).  Requires binary-LHS FDs."""
    if not 0 <= i < len(q.body):
        raise InputError(f"atom index {i} out of range")
    atom_vars = frozenset(v.index for v in q.body[i].args)
    head_vars = frozenset(v.index for v in q.head.args)
    c3 = []
    for fd in sorted(fds, key=lambda f: f.sort_key()):
        if len(fd.lhs) > 2:
            raise InputError("build_sat requires binary-LHS FDs; apply reduce_fds first")
        c3.append((frozenset(v.index for v in fd.lhs), fd.rhs.index))
    return SatInstance(q.variables, atom_vars, head_vars - atom_vars, tuple(c3))


def solve_sat_pass(s: SatInstance) -> PassResult:
    """Decide a pass-solvable instance by propagating forced-false variables.

    Per pass: drop FD clauses whose negated variable is already false, strip
    false variables from positive positions, and when a clause reduces to a
    single negated literal force that variable false as well.  The loop halts
    as soon as a pass forces nothing new, after at most |variables| passes.
    Unsatisfiable exactly when the positive head clause loses all its
    variables; otherwise false on the forced set and true elsewhere is a
    model.
    """
    false_set = set(s.c1)
    positive = set(s.c2) - false_set
    clauses = [(set(pos) - false_set, neg) for pos, neg in s.c3]
    passes = 0
    changed = True
    while changed:
        changed = False
        passes += 1
        remaining = []
        for pos, neg in clauses:
            if neg in false_set:
                continue
            pos -= false_set
            if not pos:
                false_set.add(neg)
                positive.discard(neg)
                changed = True
            else:
                remaining.append((pos, neg))
        clauses = remaining
    if not positive:
        return PassResult(False, None, passes)
    assignment = {v: v.index not in false_set for v in s.variables}
    return PassResult(True, assignment, passes)


def is_sparsity_preserving(q: Query, fds: Iterable[VariableFD]) -> SparsityResult:
    """Decide whether |Q(D)| <= rmax(Q, D) holds for every FD-satisfying D.

    Works on the binary-LHS reduction of (q, fds); preserving iff some
    per-atom SAT instance is unsatisfiable.  Otherwise the union of the
    per-atom one-color models (fresh disjoint colors, projected back to the
    caller's variables) is a valid witness coloring with ratio above one, and
    the reported lower bound is m/(m-1) for m the input query's body length.
    """
    require_chased(q, "is_sparsity_preserving")
    fds = frozenset(fds)
    reduced_q, reduced_fds = reduce_fds(q, fds)

    models = []
    for i in range(len(reduced_q.body)):
        result = solve_sat_pass(build_sat(reduced_q, reduced_fds, i))
        if not result.satisfiable:
            return SparsityResult(
                preserving=True,
                failing_relation=i,
                failing_relation_name=reduced_q.body[i].relation,
            )
        models.append(result.assignment)

    by_name = {v.name: v for v in q.variables}
    labels: dict[Variable, set[int]] = {v: set() for v in q.variables}
    for color, model in enumerate(models):
        for var, is_true in model.items():
            if is_true and var.name in by_name:
                labels[by_name[var.name]].add(color)
    witness = Coloring({v: frozenset(c) for v, c in labels.items()})

    if validate_coloring(q, fds, witness):
        raise AssertionError("sparsity witness violates a functional dependency")
    ratio = coloring_ratio(q, witness)
    if ratio <= 1:
        raise AssertionError("sparsity witness ratio is not above one")
    m = len(q.body)
    return SparsityResult(
        preserving=False,
        witness=witness,
        lower_bound_exponent=Fraction(m, m - 1),
    )
