"""Variable colorings, the color-number LP, and conversions between the two.

A coloring assigns each query variable a finite set of abstract colors; it is
valid when every FD's right-hand side only carries colors already present on
the left-hand side.  The color number is the best ratio of head colors to the
largest per-atom color count, and equals the optimum of an entropy LP whose
information-diagram atoms are all forced nonnegative.  The two conversion
routines below realize both directions of that equality constructively and
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from math import lcm
from typing import Iterable

from .errors import InputError, LimitError
from .lp import (
    DEFAULT_MAX_VARS,
    GE,
    Constraint,
    EntropyVector,
    LinearProgram,
    _base_constraints,
    _check_scale,
    atom_expression,
    solve_exact,
)
from .query import Query, Variable, VariableFD, require_chased


@dataclass
class Coloring:
    """Map from variable to its (possibly empty) set of color ids."""

    labels: dict[Variable, frozenset[int]]

    def label(self, v: Variable) -> frozenset[int]:
        return self.labels.get(v, frozenset())

    def union_over(self, variables) -> frozenset[int]:
        out: frozenset[int] = frozenset()
        for v in variables:
            out |= self.label(v)
        return out

    def all_colors(self) -> frozenset[int]:
        return self.union_over(self.labels)

    def to_json(self, q: Query) -> dict[str, list[int]]:
        return {v.name: sorted(self.label(v)) for v in q.variables}

    @classmethod
    def from_json(cls, q: Query, obj: dict[str, list[int]]) -> "Coloring":
        known = {v.name: v for v in q.variables}
        labels = {}
        for name, colors in obj.items():
            if name not in known:
                raise InputError(f"coloring references unknown variable {name!r}")
            labels[known[name]] = frozenset(int(c) for c in colors)
        for v in q.variables:
            labels.setdefault(v, frozenset())
        return cls(labels)


@dataclass
class ColorNumberResult:
    value: Fraction
    witness: Coloring
    lp_vertex: EntropyVector


def validate_coloring(q: Query, fds: Iterable[VariableFD], col: Coloring) -> list[VariableFD]:
    """Return the FDs violated by ``col`` (empty list means valid)."""
    known = set(q.variables)
    for v in col.labels:
        if v not in known:
            raise InputError(f"coloring labels unknown variable {v.name!r}")
    violations = []
    for fd in sorted(fds, key=lambda f: f.sort_key()):
        if not col.label(fd.rhs) <= col.union_over(fd.lhs):
            violations.append(fd)
    return violations


def coloring_ratio(q: Query, col: Coloring) -> Fraction:
    """Head-color count over the largest per-atom color count."""
    head = len(col.union_over(q.head.var_set))
    widest = max(len(col.union_over(a.var_set)) for a in q.body)
    if widest == 0:
        raise InputError("ratio undefined: no body atom carries a color")
    return Fraction(head, widest)


def build_color_lp(
    q: Query, fds: Iterable[VariableFD], max_vars: int = DEFAULT_MAX_VARS
) -> LinearProgram:
    """Same objective, atom bounds and FD equalities as the size LP, but with
    one nonnegativity row per information-diagram atom (every nonempty subset)
    in place of the elemental Shannon block."""
    require_chased(q, "build_color_lp")
    _check_scale(q, max_vars)
    k = q.k
    rows = _base_constraints(q, fds)
    for s in range(1, 1 << k):
        rows.append(Constraint(atom_expression(s, k), GE, Fraction(0)))
    names = tuple(v.name for v in q.variables)
    return LinearProgram({q.head_mask: Fraction(1)}, rows, k, names)


def coloring_to_lp_point(q: Query, col: Coloring) -> EntropyVector:
    """Feasible point of the color LP realizing a valid coloring's ratio.

    Each color contributes mass 1/r to the atom of the exact variable set it
    sits on, where r is the largest per-atom color count; subset entropies
    are the sums of atoms meeting the subset.
    """
    r = max(len(col.union_over(a.var_set)) for a in q.body)
    if r == 0:
        raise InputError("cannot scale: no body atom carries a color")
    incidence: dict[int, int] = {}
    for color in sorted(col.all_colors()):
        mask = 0
        for v in q.variables:
            if color in col.label(v):
                mask |= 1 << v.index
        if mask:
            incidence[mask] = incidence.get(mask, 0) + 1
    values = {}
    for t in range(1, 1 << q.k):
        hits = sum(count for mask, count in incidence.items() if mask & t)
        if hits:
            values[t] = Fraction(hits, r)
    return EntropyVector(q.k, values)


def lp_point_to_coloring(q: Query, vertex: EntropyVector) -> Coloring:
    """Coloring read off a rational feasible point of the color LP.

    With q the common denominator of the point's atom values, every subset S
    receives q * atom(S) fresh colors on exactly the variables of S.  At an
    optimal vertex the resulting ratio equals the LP value exactly.
    """
    k = q.k
    atoms: dict[int, Fraction] = {}
    for s in range(1, 1 << k):
        val = vertex.form_value(atom_expression(s, k))
        if not isinstance(val, (Fraction, int)):
            raise InputError("lp_point_to_coloring needs an exact rational point")
        if val < 0:
            raise InputError(
                "point is infeasible for the color LP: negative information atom"
            )
        if val:
            atoms[s] = Fraction(val)
    denom = lcm(*(a.denominator for a in atoms.values())) if atoms else 1
    labels: dict[Variable, set[int]] = {v: set() for v in q.variables}
    next_color = 0
    for s in sorted(atoms):
        count = int(atoms[s] * denom)
        fresh = range(next_color, next_color + count)
        next_color += count
        for v in q.variables:
            if s >> v.index & 1:
                labels[v].update(fresh)
    return Coloring({v: frozenset(c) for v, c in labels.items()})


def color_number(
    q: Query, fds: Iterable[VariableFD], max_vars: int = DEFAULT_MAX_VARS
) -> ColorNumberResult:
    """Exact color number with a witness coloring achieving it.

    Solves the color LP, converts the optimal vertex into a coloring, and
    asserts the round trip: the witness is valid and its ratio equals the LP
    optimum as exact fractions.
    """
    fds = frozenset(fds)
    value, vertex = solve_exact(build_color_lp(q, fds, max_vars))
    witness = lp_point_to_coloring(q, vertex)
    if validate_coloring(q, fds, witness):
        raise AssertionError("round-trip witness violates a functional dependency")
    if coloring_ratio(q, witness) != value:
        raise AssertionError("round-trip witness ratio differs from the LP optimum")
    return ColorNumberResult(value, witness, vertex)


def brute_force_color_search(
    q: Query, fds: Iterable[VariableFD], max_colors: int
) -> Fraction:
    """Exhaustive best ratio over colorings with at most ``max_colors`` colors.

    Colorings are enumerated up to color renaming, as multisets of nonempty
    variable subsets (one subset per color: the variables carrying it).  Only
    a lower-bound oracle: the true color number may need more colors than the
    budget allows.
    """
    if q.k > 6 or max_colors > 4:
        raise LimitError("brute-force search limited to k <= 6, max_colors <= 4")
    fd_masks = [(fd.lhs_mask(), fd.rhs.index) for fd in sorted(fds, key=lambda f: f.sort_key())]
    atom_masks = [a.var_mask() for a in q.body]
    head_mask = q.head_mask
    best = Fraction(0)
    all_masks = range(1, 1 << q.k)
    for budget in range(1, max_colors + 1):
        for classes in combinations_with_replacement(all_masks, budget):
            ok = True
            for lhs, rhs in fd_masks:
                for m in classes:
                    if m >> rhs & 1 and not m & lhs:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            widest = max(sum(1 for m in classes if m & am) for am in atom_masks)
            if widest == 0:
                continue
            ratio = Fraction(sum(1 for m in classes if m & head_mask), widest)
            if ratio > best:
                best = ratio
    return best
