"""Databases witnessing the lower bounds.

Two constructions: (1) from any valid coloring, a database whose output size
is N^(head colors) while every relation stays at N^(its color count); (2) the
secret-share gap family, whose true output exponent k/2 outruns every
coloring-based bound.  Values are opaque strings with an injective canonical
rendering, so relations are plain sets of string tuples.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable

from .coloring import Coloring, validate_coloring
from .errors import InputError, LimitError
from .query import Query, VarFDDecl, VariableFD, build_query, instantiate_fds

DEFAULT_TUPLE_CAP = 10**7


@dataclass(frozen=True)
class Relation:
    arity: int
    tuples: frozenset[tuple[str, ...]]

    def __post_init__(self):
        for t in self.tuples:
            if len(t) != self.arity:
                raise InputError(f"tuple arity {len(t)} != declared {self.arity}")

    def __len__(self):
        return len(self.tuples)


@dataclass
class Database:
    relations: dict[str, Relation]

    def to_json(self) -> dict:
        return {
            "relations": {
                name: {"arity": rel.arity, "tuples": sorted(map(list, rel.tuples))}
                for name, rel in sorted(self.relations.items())
            }
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Database":
        try:
            rels = obj["relations"]
        except (KeyError, TypeError):
            raise InputError("database JSON must have a 'relations' object") from None
        out = {}
        for name, spec in rels.items():
            tuples = frozenset(tuple(map(str, t)) for t in spec["tuples"])
            out[name] = Relation(int(spec["arity"]), tuples)
        return cls(out)


def composite_value(parts: Iterable[tuple[int, int]]) -> str:
    """Canonical rendering of an ordered list of (color, value) pairs."""
    return "[" + ",".join(f"c{c}={v}" for c, v in parts) + "]"


def worst_case_from_coloring(
    q: Query,
    fds: Iterable[VariableFD],
    col: Coloring,
    n: int,
    tuple_cap: int = DEFAULT_TUPLE_CAP,
) -> Database:
    """Database realizing output size N^(head colors) from a valid coloring.

    Conceptually one global table assigns each color an independent value in
    0..N-1; a body atom's relation holds one tuple per combination of values
    of the colors it sees, each attribute rendered as the ordered
    (color, value) list of its variable's label.  Coloring validity makes
    every instantiated FD hold, and |R_j| = N^(colors on atom j) exactly.

    Only supports queries in which each relation occurs in one body atom (the
    construction is stated for that case; a shared relation could otherwise
    collect tuple sets that jointly violate an FD).
    """
    if n < 1:
        raise InputError("N must be at least 1")
    violations = validate_coloring(q, fds, col)
    if violations:
        raise InputError(f"coloring is invalid; violates {violations[0]}")
    seen = set()
    for atom in q.body:
        if atom.relation in seen:
            raise InputError(
                "worst-case construction requires each relation to occur in "
                f"one body atom; {atom.relation} repeats"
            )
        seen.add(atom.relation)

    total = len(col.all_colors())
    if n**total > tuple_cap:
        raise LimitError(f"N^d = {n}**{total} exceeds the tuple cap {tuple_cap}")

    relations = {}
    for atom in q.body:
        palette = sorted(col.union_over(atom.var_set))
        tuples = set()
        for combo in product(range(n), repeat=len(palette)):
            value_of = dict(zip(palette, combo))
            tuples.add(
                tuple(
                    composite_value((c, value_of[c]) for c in sorted(col.label(v)))
                    for v in atom.args
                )
            )
        relations[atom.relation] = Relation(len(atom.args), frozenset(tuples))
    return Database(relations)


# ---------------------------------------------------------------------------
# The secret-share gap family


@dataclass
class GapFamily:
    k: int
    p: int
    query: Query
    fds: frozenset[VariableFD]

    @property
    def group_names(self) -> list[list[str]]:
        half = self.k // 2
        return [[f"X{i}_{j}" for i in range(1, self.k + 1)] for j in range(1, half + 1)]


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def smallest_prime_at_least(n: int) -> int:
    while not _is_prime(n):
        n += 1
    return n


def gap_query(k: int, p: int | None = None) -> GapFamily:
    """The k-variable-group query whose output exponent is k/2.

    k^2/2 variables X_i_j arranged in k/2 groups of k; body atom R_j spans
    group j, body atom T_i spans row i (one variable per group); the head
    returns everything.  Within each group, every set of k/2 variables
    determines each remaining one (larger left-hand sides are implied and not
    emitted).  Needs a prime p >= k to instantiate (defaults to the smallest).
    """
    if k % 2 or not 4 <= k <= 8:
        raise InputError("gap family needs an even k between 4 and 8")
    if p is None:
        p = smallest_prime_at_least(k)
    if not _is_prime(p) or p < k:
        raise InputError(f"p must be a prime >= k; got {p}")

    half = k // 2
    groups = [[f"X{i}_{j}" for i in range(1, k + 1)] for j in range(1, half + 1)]
    head_vars = [name for group in groups for name in group]
    body = [(f"R{j + 1}", groups[j]) for j in range(half)]
    body += [
        (f"T{i + 1}", [groups[j][i] for j in range(half)]) for i in range(k)
    ]

    decls = []
    for group in groups:
        for lhs_idx in combinations(range(k), half):
            lhs = tuple(group[i] for i in lhs_idx)
            for target in range(k):
                if target not in lhs_idx:
                    decls.append(VarFDDecl(lhs, group[target]))

    query = build_query(("Q", head_vars), body, decls)
    return GapFamily(k, p, query, instantiate_fds(query))


def gap_database(fam: GapFamily) -> Database:
    """Shamir-share database for a gap family: each group relation holds all
    evaluations of degree-< k/2 polynomials over F_p at points 0..k-1, so any
    k/2 coordinates determine the tuple; the row relations are full products
    of the per-variable value sets and never constrain the join.
    """
    k, p, half = fam.k, fam.p, fam.k // 2
    points = list(range(k))

    relations = {}
    for j in range(1, half + 1):
        tuples = set()
        for coeffs in product(range(p), repeat=half):
            shares = []
            for a in points:
                acc = 0
                for c in reversed(coeffs):
                    acc = (acc * a + c) % p
                shares.append(f"g{j}v{acc}")
            tuples.add(tuple(shares))
        relations[f"R{j}"] = Relation(k, frozenset(tuples))

    value_sets = [[f"g{j}v{v}" for v in range(p)] for j in range(1, half + 1)]
    for i in range(1, k + 1):
        tuples = frozenset(product(*value_sets))
        relations[f"T{i}"] = Relation(half, tuples)
    return Database(relations)
