"""Brute-force query evaluation and the empirical side of the analysis:
FD checking, observed exponents, empirical entropy vectors, LP feasibility
verification, and the knitted-complexity statistic.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .errors import InputError, LimitError
from .instances import Database
from .lp import (
    DEFAULT_MAX_VARS,
    EQ,
    GE,
    Constraint,
    EntropyVector,
    atom_expression,
    build_size_lp,
)
from .query import Atom, Query, VariableFD

FEASIBILITY_SLACK = 1e-6
EQUALITY_SLACK = 1e-9


def evaluate(q: Query, db: Database) -> set[tuple[str, ...]]:
    """All head tuples of q over db, under set semantics.

    Nested-loop join over body atoms reordered by ascending relation size;
    the produced set does not depend on the order.
    """
    for atom in q.body:
        rel = db.relations.get(atom.relation)
        if rel is None:
            raise InputError(f"database lacks relation {atom.relation}")
        if rel.arity != len(atom.args):
            raise InputError(
                f"arity mismatch for {atom.relation}: query {len(atom.args)}, "
                f"database {rel.arity}"
            )

    atoms = sorted(q.body, key=lambda a: len(db.relations[a.relation].tuples))
    results: set[tuple[str, ...]] = set()
    head_args = q.head.args
    bound: dict = {}

    def extend(idx: int):
        if idx == len(atoms):
            results.add(tuple(bound[v] for v in head_args))
            return
        atom = atoms[idx]
        rel = db.relations[atom.relation]
        if all(v in bound for v in atom.args):
            if tuple(bound[v] for v in atom.args) in rel.tuples:
                extend(idx + 1)
            return
        for t in rel.tuples:
            fresh = {}
            for v, val in zip(atom.args, t):
                cur = bound.get(v)
                if cur is None:
                    cur = fresh.get(v)
                if cur is None:
                    fresh[v] = val
                elif cur != val:
                    break
            else:
                bound.update(fresh)
                extend(idx + 1)
                for v in fresh:
                    del bound[v]

    extend(0)
    return results


def rmax(q: Query, db: Database) -> int:
    """Tuple count of the largest input relation used by the body."""
    return max(len(db.relations[name].tuples) for name in {a.relation for a in q.body})


@dataclass(frozen=True)
class FDViolation:
    relation: str
    lhs_positions: tuple[int, ...]  # 0-based
    rhs_positions: tuple[int, ...]
    tuple_a: tuple[str, ...]
    tuple_b: tuple[str, ...]


def check_fds(db: Database, q: Query, fds: Iterable[VariableFD]) -> list[FDViolation]:
    """Report tuple pairs violating an instantiated FD, per relation.

    A variable FD applies to an atom when all its variables occur there; it
    then translates to column sets (every position carrying the variable).
    """
    positional = set()
    for atom in q.body:
        atom_vars = set(atom.args)
        for fd in fds:
            if fd.lhs <= atom_vars and fd.rhs in atom_vars:
                lhs_pos = tuple(p for p, v in enumerate(atom.args) if v in fd.lhs)
                rhs_pos = tuple(p for p, v in enumerate(atom.args) if v == fd.rhs)
                positional.add((atom.relation, lhs_pos, rhs_pos))

    violations = []
    for relation, lhs_pos, rhs_pos in sorted(positional):
        groups: dict = {}
        for t in sorted(db.relations[relation].tuples):
            key = tuple(t[p] for p in lhs_pos)
            val = tuple(t[p] for p in rhs_pos)
            prev = groups.get(key)
            if prev is None:
                groups[key] = (val, t)
            elif prev[0] != val:
                violations.append(FDViolation(relation, lhs_pos, rhs_pos, prev[1], t))
    return violations


def observed_exponent(output_size: int, rel_size: int) -> float | None:
    """log(output)/log(relation size), exact for small rational exponents.

    None when the base is below 2 or the output is empty.  Integer and
    small-denominator rational exponents are detected by exact integer
    arithmetic so values like 2.0 or 1.5 come out exactly.
    """
    if rel_size < 2 or output_size < 1:
        return None
    if output_size == 1:
        return 0.0
    power, e = rel_size, 1
    while power < output_size:
        power *= rel_size
        e += 1
    if power == output_size:
        return float(e)
    guess = Fraction(math.log(output_size) / math.log(rel_size)).limit_denominator(64)
    if guess > 0 and output_size**guess.denominator == rel_size**guess.numerator:
        return guess.numerator / guess.denominator
    return math.log(output_size) / math.log(rel_size)


def _entropy_of_masses(masses) -> float:
    h = 0.0
    for p in masses:
        fp = float(p)
        if fp > 0.0:
            h -= fp * math.log2(fp)
    return max(h, 0.0)


def table_entropy_vector(rows: Iterable[tuple]) -> EntropyVector:
    """Subset entropies (bits) of the uniform distribution over a tuple set."""
    rows = set(rows)
    if not rows:
        raise InputError("empty table has no entropy vector")
    k = len(next(iter(rows)))
    n = len(rows)
    values = {}
    for mask in range(1, 1 << k):
        idxs = [i for i in range(k) if mask >> i & 1]
        counts = Counter(tuple(r[i] for i in idxs) for r in rows)
        values[mask] = _entropy_of_masses(Fraction(c, n) for c in counts.values())
    return EntropyVector(k, values)


def empirical_entropy_vector(
    q: Query, db: Database, max_vars: int = DEFAULT_MAX_VARS
) -> EntropyVector:
    """Subset entropies (bits) of the canonical distribution on full results.

    The query is extended to output every variable; each full tuple gets mass
    (1 / #distinct head values) * (1 / #extensions of its head value), which
    makes the head marginal exactly uniform.  Uniform over everything when
    the head already covers all variables.
    """
    if q.k > max_vars:
        raise LimitError(f"{q.k} variables exceeds the limit of {max_vars}")
    full_query = Query(Atom("__full", q.variables), q.body, q.declarations, q.variables)
    rows = evaluate(full_query, db)
    if not rows:
        raise InputError("empty query output has no entropy vector")

    head_idx = sorted({v.index for v in q.head.args})
    head_counts = Counter(tuple(r[i] for i in head_idx) for r in rows)
    n_heads = len(head_counts)
    weights = {
        r: Fraction(1, n_heads * head_counts[tuple(r[i] for i in head_idx)]) for r in rows
    }

    values = {}
    for mask in range(1, 1 << q.k):
        idxs = [i for i in range(q.k) if mask >> i & 1]
        acc: dict = {}
        for r, w in weights.items():
            key = tuple(r[i] for i in idxs)
            acc[key] = acc.get(key, 0) + w
        values[mask] = _entropy_of_masses(acc.values())
    return EntropyVector(q.k, values)


def feasibility_check(
    q: Query,
    fds: Iterable[VariableFD],
    ev: EntropyVector,
    slack: float = FEASIBILITY_SLACK,
    eq_slack: float = EQUALITY_SLACK,
    max_vars: int = DEFAULT_MAX_VARS,
) -> list[tuple[Constraint, float]]:
    """Check the scaled empirical vector against every size-LP row.

    The vector is normalized by the largest body-atom entropy (a vacuous pass
    when that is zero, as with single-tuple relations); returns the violated
    constraints with their float values, empty when feasible within slack.
    """
    scale = max(float(ev.get(a.var_mask())) for a in q.body)
    if scale == 0.0:
        return []
    lp = build_size_lp(q, fds, max_vars)
    bad = []
    for c in lp.constraints:
        val = sum(float(coeff) * float(ev.get(m)) for m, coeff in c.form.items()) / scale
        bound = float(c.bound)
        if c.rel == EQ:
            ok = abs(val - bound) <= eq_slack
        elif c.rel == GE:
            ok = val >= bound - slack
        else:
            ok = val <= bound + slack
        if not ok:
            bad.append((c, val))
    return bad


def knitted_complexity(ev: EntropyVector) -> float:
    """Sum of absolute information atoms over their signed sum.

    Equals 1 exactly when the whole information diagram is nonnegative; the
    signed sum is the total entropy, so the value is undefined (raises) for
    an all-zero vector.
    """
    total_abs = 0.0
    total = 0.0
    for s in range(1, 1 << ev.k):
        a = float(ev.form_value(atom_expression(s, ev.k)))
        total_abs += abs(a)
        total += a
    if abs(total) < 1e-12:
        raise InputError("knitted complexity undefined: zero total entropy")
    return total_abs / total


@dataclass
class EvalReport:
    output_size: int
    rmax: int
    observed_exponent: float | None
    per_relation_exponents: dict[str, float] = field(default_factory=dict)
    entropy: EntropyVector | None = None
    knitted: float | None = None


def make_report(q: Query, db: Database, max_vars: int = DEFAULT_MAX_VARS) -> EvalReport:
    output = evaluate(q, db)
    biggest = rmax(q, db)
    report = EvalReport(len(output), biggest, observed_exponent(len(output), biggest))
    for name in sorted({a.relation for a in q.body}):
        e = observed_exponent(len(output), len(db.relations[name].tuples))
        if e is not None:
            report.per_relation_exponents[name] = e
    if output:
        report.entropy = empirical_entropy_vector(q, db, max_vars)
        try:
            report.knitted = knitted_complexity(report.entropy)
        except InputError:
            report.knitted = None
    return report


def report_to_json(report: EvalReport, q: Query) -> dict:
    names = tuple(v.name for v in q.variables)
    entropy = None
    if report.entropy is not None:
        entropy = {
            ",".join(names[i] for i in range(q.k) if mask >> i & 1): value
            for mask, value in report.entropy.items()
        }
    return {
        "output_size": report.output_size,
        "rmax": report.rmax,
        "observed_exponent": report.observed_exponent,
        "per_relation_exponents": report.per_relation_exponents,
        "entropy_bits": entropy,
        "knitted_complexity": report.knitted,
    }
