"""Entropy linear programs over subset variables.

LP variables are the joint entropies h(S) of nonempty subsets S of the query
variables, encoded as bitmasks over canonical variable indices.  Everything
is exact: coefficients, bounds and optima are `fractions.Fraction`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from . import simplex
from .errors import InputError, LimitError
from .query import Query, VariableFD, require_chased

DEFAULT_MAX_VARS = 16

LE, EQ, GE = "<=", "=", ">="

# A linear form is a sparse map: subset mask -> nonzero Fraction coefficient.
# The empty subset never appears (h(emptyset) = 0 by convention).
LinearForm = dict


def mask_of(variables) -> int:
    m = 0
    for v in variables:
        m |= 1 << v.index
    return m


def iter_subsets(mask: int):
    """All nonempty submasks of ``mask``, ascending."""
    sub = 0
    while True:
        sub = (sub - mask) & mask
        if sub == 0:
            return
        yield sub


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def _add(form: LinearForm, mask: int, coeff) -> None:
    if mask == 0:
        return
    c = form.get(mask, 0) + coeff
    if c == 0:
        form.pop(mask, None)
    else:
        form[mask] = c


@dataclass(frozen=True)
class Constraint:
    form: LinearForm
    rel: str  # one of LE, EQ, GE
    bound: Fraction

    def value(self, point: Callable[[int], Fraction]):
        return sum(c * point(m) for m, c in self.form.items())

    def holds_exactly(self, point) -> bool:
        v = self.value(point)
        if self.rel == LE:
            return v <= self.bound
        if self.rel == GE:
            return v >= self.bound
        return v == self.bound


@dataclass
class LinearProgram:
    """Maximize ``objective`` subject to ``constraints`` over h(S), S within [k]."""

    objective: LinearForm
    constraints: list[Constraint]
    k: int
    var_names: tuple[str, ...] = ()


class EntropyVector:
    """Values indexed by nonempty variable subsets; h(empty) is implicitly 0.

    Entries are exact fractions for LP vertices and floats (bits) for
    empirical vectors; missing masks read as zero.
    """

    def __init__(self, k: int, values: Mapping[int, object] | None = None):
        self.k = k
        self.values = dict(values or {})

    def get(self, mask: int):
        if mask == 0:
            return 0
        return self.values.get(mask, 0)

    __getitem__ = get

    def form_value(self, form: LinearForm):
        return sum(c * self.get(m) for m, c in form.items())

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (Fraction, int)) for v in self.values.values())

    def items(self):
        return sorted(self.values.items())

    def __repr__(self):
        return f"EntropyVector(k={self.k}, {len(self.values)} entries)"


def atom_expression(s: int, k: int) -> LinearForm:
    """Linear form of the information-diagram atom I(S | rest of [k]).

    Inclusion-exclusion over the subsets of S, conditioned on the complement:
    sum over nonempty T of S of (-1)^(|T|+1) h(T u comp) minus h(comp).  For a
    singleton S this is the conditional entropy h(S | rest); for larger S the
    value of the form can be negative.
    """
    if s == 0:
        raise InputError("information atom of the empty subset")
    full = (1 << k) - 1
    if s & ~full:
        raise InputError("subset outside the variable range")
    comp = full & ~s
    form: LinearForm = {}
    for t in iter_subsets(s):
        _add(form, t | comp, Fraction(1 if popcount(t) % 2 else -1))
    if comp:
        _add(form, comp, Fraction(-1))
    return form


def _base_constraints(q: Query, fds: Iterable[VariableFD]) -> list[Constraint]:
    """Atom bounds plus FD equalities: the block shared by both programs."""
    rows = []
    for atom in q.body:
        rows.append(Constraint({atom.var_mask(): Fraction(1)}, LE, Fraction(1)))
    for fd in sorted(fds, key=lambda f: f.sort_key()):
        lhs = fd.lhs_mask()
        form: LinearForm = {}
        _add(form, lhs | (1 << fd.rhs.index), Fraction(1))
        _add(form, lhs, Fraction(-1))
        rows.append(Constraint(form, EQ, Fraction(0)))
    return rows


def _check_scale(q: Query, max_vars: int):
    if q.k > max_vars:
        raise LimitError(
            f"{q.k} variables exceeds the limit of {max_vars} "
            f"(2^{q.k} LP variables); raise --max-vars to force the solve"
        )


def build_size_lp(
    q: Query, fds: Iterable[VariableFD], max_vars: int = DEFAULT_MAX_VARS
) -> LinearProgram:
    """The worst-case size-increase program.

    Maximize h(head variables) subject to h(atom) <= 1 per body atom, one
    equality per FD, and the elemental Shannon inequalities: h(x_i | rest) >= 0
    for each variable and I(x_i; x_j | x_S) >= 0 for each pair and each
    subset S of the remaining variables.  Monotonicity and submodularity are
    implied, so no further rows are emitted.
    """
    require_chased(q, "build_size_lp")
    _check_scale(q, max_vars)
    k = q.k
    full = (1 << k) - 1
    rows = _base_constraints(q, fds)

    for i in range(k):
        form: LinearForm = {full: Fraction(1)}
        _add(form, full & ~(1 << i), Fraction(-1))
        rows.append(Constraint(form, GE, Fraction(0)))

    for i in range(k):
        for j in range(i + 1, k):
            pair = (1 << i) | (1 << j)
            rest = full & ~pair
            s = 0
            while True:
                form = {}
                _add(form, s | (1 << i), Fraction(1))
                _add(form, s | (1 << j), Fraction(1))
                _add(form, s, Fraction(-1))
                _add(form, s | pair, Fraction(-1))
                rows.append(Constraint(form, GE, Fraction(0)))
                if s == rest:
                    break
                s = (s - rest) & rest

    names = tuple(v.name for v in q.variables)
    return LinearProgram({q.head_mask: Fraction(1)}, rows, k, names)


def solve_exact(lp: LinearProgram) -> tuple[Fraction, EntropyVector]:
    """Exact optimum and an optimal basic feasible point of ``lp``.

    Tailored to the entropy programs built in this package:

    * Variables are treated as nonnegative (implied by the emitted
      constraints in both program families, so the region is unchanged).
    * Homogeneous two-term equality rows are read as functional dependencies
      and presolved away by substituting h(S) := h(closure(S)); for these
      programs the inequality blocks make that substitution exact, and it
      typically collapses most of the subset lattice.
    * The remaining homogeneous inequality rows are activated lazily: the
      program is re-solved against a growing active set until the relaxed
      optimum satisfies every row (rows cutting an unbounded ray are
      activated the same way, most-violated first).

    The returned point is verified against every constraint of the original
    program before being handed back, and the whole procedure is
    deterministic.
    """
    closure, reduced = _fd_closure_presolve(lp)

    active: list[tuple[LinearForm, Fraction]] = []
    pool: list[tuple[LinearForm, Fraction]] = []
    for form, rel, bound in reduced:
        if rel == LE:
            le_rows = [(form, bound)]
        elif rel == GE:
            le_rows = [({m: -v for m, v in form.items()}, -bound)]
        else:
            if bound != 0:
                raise InputError("non-homogeneous equality constraints are unsupported")
            le_rows = [
                (dict(form), Fraction(0)),
                ({m: -v for m, v in form.items()}, Fraction(0)),
            ]
            active.extend(le_rows)
            continue
        for le_form, le_bound in le_rows:
            if le_bound < 0:
                raise InputError("constraint row with negative bound is unsupported")
            (active if le_bound != 0 else pool).append((le_form, le_bound))

    objective = _substitute(lp.objective, closure)
    pool_active = [False] * len(pool)

    while True:
        columns = sorted(set(objective) | {m for f, _ in active for m in f})
        col_of = {m: i for i, m in enumerate(columns)}
        c_dense = [objective.get(m, Fraction(0)) for m in columns]
        rows_dense = [
            ([form.get(m, Fraction(0)) for m in columns], bound) for form, bound in active
        ]
        res = simplex.maximize(c_dense, rows_dense)

        if res.status == simplex.UNBOUNDED:
            direction = {m: res.ray[i] for m, i in col_of.items() if res.ray[i]}
            fresh = _activate(pool, pool_active, active, direction)
            if not fresh:
                raise InputError("linear program is unbounded; malformed input")
            continue

        point = {m: res.x[i] for m, i in col_of.items() if res.x[i]}
        if not _activate(pool, pool_active, active, point):
            break

    vec = EntropyVector(
        lp.k,
        {
            mask: value
            for mask in range(1, 1 << lp.k)
            if (value := point.get(closure(mask), 0))
        },
    )
    for c in lp.constraints:
        if not c.holds_exactly(vec.get):
            raise AssertionError(f"solver returned an infeasible point ({c.rel} row)")
    value = vec.form_value(lp.objective)
    return value, vec


def _fd_closure_presolve(lp: LinearProgram):
    """Extract FD-shaped equality rows and substitute subset closures.

    A row  h(big) - h(small) = 0  with small a strict subset of big encodes
    "small determines big - small".  Every subset mask is replaced by its
    closure under all such rules; rows whose form cancels away are dropped
    and duplicate rows collapse (first occurrence kept).  Returns the closure
    function and the reduced rows as (form, rel, bound) triples.
    """
    rules: list[tuple[int, int]] = []
    for c in lp.constraints:
        if c.rel == EQ and c.bound == 0 and len(c.form) == 2:
            (m1, c1), (m2, c2) = c.form.items()
            if c1 == -c2:
                small, big = (m1, m2) if m1 & m2 == m1 else (m2, m1)
                if small & big == small and small != big:
                    rules.append((small, big))

    memo: dict[int, int] = {}

    def closure(mask: int) -> int:
        got = memo.get(mask)
        if got is not None:
            return got
        cur = mask
        changed = True
        while changed:
            changed = False
            for small, big in rules:
                if cur & small == small and cur | big != cur:
                    cur |= big
                    changed = True
        memo[mask] = cur
        return cur

    reduced = []
    seen = set()
    for c in lp.constraints:
        form = _substitute(c.form, closure)
        if not form:
            if (
                (c.rel == LE and c.bound < 0)
                or (c.rel == GE and c.bound > 0)
                or (c.rel == EQ and c.bound != 0)
            ):
                raise InputError("constraint reduced to an unsatisfiable constant row")
            continue
        key = (c.rel, c.bound, tuple(sorted(form.items())))
        if key in seen:
            continue
        seen.add(key)
        reduced.append((form, c.rel, c.bound))
    return closure, reduced


def _substitute(form: LinearForm, closure) -> LinearForm:
    out: LinearForm = {}
    for mask, coeff in form.items():
        _add(out, closure(mask), coeff)
    return out


def _dot(form: LinearForm, sparse_point: dict):
    return sum(coeff * sparse_point.get(m, 0) for m, coeff in form.items())


_ACTIVATION_BATCH = 128


def _activate(pool, pool_active, active, sparse_point) -> int:
    violated = []
    for idx, (form, _) in enumerate(pool):
        if not pool_active[idx]:
            excess = _dot(form, sparse_point)
            if excess > 0:
                violated.append((excess, idx))
    violated.sort(key=lambda t: (-t[0], t[1]))
    for _, idx in violated[:_ACTIVATION_BATCH]:
        pool_active[idx] = True
        active.append(pool[idx])
    return len(violated[:_ACTIVATION_BATCH])


def size_bound_exponent(
    q: Query, fds: Iterable[VariableFD], max_vars: int = DEFAULT_MAX_VARS
) -> Fraction:
    """The worst-case size-increase exponent s(Q): |Q(D)| <= rmax(Q,D)^s."""
    value, _ = solve_exact(build_size_lp(q, fds, max_vars))
    return value


def subset_name(mask: int, names: tuple[str, ...]) -> str:
    return "{" + ",".join(names[i] for i in range(len(names)) if mask >> i & 1) + "}"


def form_to_text(form: LinearForm, names: tuple[str, ...]) -> str:
    parts = []
    for mask in sorted(form):
        coeff = form[mask]
        sign = "-" if coeff < 0 else "+"
        mag = abs(coeff)
        term = f"h{subset_name(mask, names)}"
        if mag != 1:
            term = f"{mag}*{term}"
        parts.append(f"{sign} {term}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def lp_to_text(lp: LinearProgram) -> str:
    """Debug rendering: objective and rows with subsets as variable-name sets
    and coefficients as exact fractions."""
    names = lp.var_names or tuple(f"x{i}" for i in range(lp.k))
    lines = [f"maximize {form_to_text(lp.objective, names)}", "subject to"]
    for c in lp.constraints:
        lines.append(f"  {form_to_text(c.form, names)} {c.rel} {c.bound}")
    return "\n".join(lines) + "\n"
