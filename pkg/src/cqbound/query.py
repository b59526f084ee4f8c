"""Conjunctive query AST, the query-file parser, functional-dependency
instantiation, the simple-key chase, and the binary-LHS reduction.

A query is a nonrecursive datalog rule ``Q(u0) :- R1(u1), ..., Rn(um).``
together with per-relation key/FD declarations and optional variable-level
FD declarations.  All values are immutable; every transformation returns a
fresh :class:`Query`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import InputError, ParseError

RESERVED_PREFIX = "__"

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_INT = re.compile(r"[0-9]+")


@dataclass(frozen=True, order=True)
class Variable:
    """A query variable: unique name plus canonical position (order of first
    occurrence in the query text, head first)."""

    name: str
    index: int

    def __repr__(self):
        return f"Variable({self.name}@{self.index})"


@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple[Variable, ...]

    @property
    def var_set(self) -> frozenset[Variable]:
        return frozenset(self.args)

    def var_mask(self) -> int:
        m = 0
        for v in self.args:
            m |= 1 << v.index
        return m

    def __str__(self):
        return f"{self.relation}({','.join(v.name for v in self.args)})"


@dataclass(frozen=True)
class SimpleKey:
    """Declaration ``key R: p`` -- position p (1-based) is a key of R."""

    relation: str
    position: int


@dataclass(frozen=True)
class RelationFD:
    """Declaration ``fd R: i,j -> t`` with positions 1-based and t not in lhs.

    Compound right-hand sides are split into one RelationFD per target
    attribute before construction.
    """

    relation: str
    lhs: tuple[int, ...]
    rhs: int


@dataclass(frozen=True)
class VarFDDecl:
    """Declaration ``fd vars: X,Y -> Z`` -- an FD stated directly on query
    variables (by name).  Compound right-hand sides are pre-split."""

    lhs: tuple[str, ...]
    rhs: str


Declaration = Union[SimpleKey, RelationFD, VarFDDecl]


@dataclass(frozen=True)
class VariableFD:
    """A functional dependency instantiated at the level of query variables:
    a set of LHS variables determining a single RHS variable."""

    lhs: frozenset[Variable]
    rhs: Variable

    def __post_init__(self):
        if not self.lhs:
            raise InputError("functional dependency with empty left-hand side")
        if self.rhs in self.lhs:
            raise InputError(f"trivial functional dependency onto {self.rhs.name}")

    def lhs_mask(self) -> int:
        m = 0
        for v in self.lhs:
            m |= 1 << v.index
        return m

    def sort_key(self):
        return (tuple(sorted(v.index for v in self.lhs)), self.rhs.index)

    def __str__(self):
        names = ",".join(sorted(v.name for v in self.lhs))
        return f"{names} -> {self.rhs.name}"


@dataclass(frozen=True)
class Query:
    head: Atom
    body: tuple[Atom, ...]
    declarations: tuple[Declaration, ...]
    variables: tuple[Variable, ...]  # by canonical index

    @property
    def k(self) -> int:
        return len(self.variables)

    @property
    def head_mask(self) -> int:
        return self.head.var_mask()

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise InputError(f"unknown variable {name!r}")

    def relation_arity(self, name: str) -> int:
        for atom in (self.head, *self.body):
            if atom.relation == name:
                return len(atom.args)
        raise InputError(f"unknown relation {name!r}")

    def __str__(self):
        return query_to_text(self)


def build_query(
    head: tuple[str, Sequence[str]],
    body: Sequence[tuple[str, Sequence[str]]],
    declarations: Iterable[Declaration] = (),
) -> Query:
    """Construct a canonical Query from name-level data.

    Assigns variable indices by first occurrence (head scanned first), checks
    head/body containment, arity consistency per relation name, declaration
    positions, and the reserved ``__`` prefix.
    """
    if not body:
        raise InputError("query body must contain at least one atom")

    order: dict[str, int] = {}
    for _, names in (head, *body):
        for name in names:
            if name not in order:
                order[name] = len(order)
    variables = tuple(Variable(n, i) for n, i in sorted(order.items(), key=lambda kv: kv[1]))
    by_name = {v.name: v for v in variables}

    def mk_atom(rel: str, names: Sequence[str]) -> Atom:
        if not names:
            raise InputError(f"relation {rel!r} used with no arguments")
        return Atom(rel, tuple(by_name[n] for n in names))

    head_atom = mk_atom(*head)
    body_atoms = tuple(mk_atom(r, ns) for r, ns in body)

    body_names = {v.name for a in body_atoms for v in a.args}
    for v in head_atom.args:
        if v.name not in body_names:
            raise InputError(f"head variable {v.name} does not occur in the body")

    arities: dict[str, int] = {}
    for atom in (head_atom, *body_atoms):
        prev = arities.setdefault(atom.relation, len(atom.args))
        if prev != len(atom.args):
            raise InputError(
                f"relation {atom.relation} used with arities {prev} and {len(atom.args)}"
            )

    decls = tuple(declarations)
    for d in decls:
        if isinstance(d, SimpleKey):
            _check_position(arities, d.relation, d.position)
        elif isinstance(d, RelationFD):
            for p in (*d.lhs, d.rhs):
                _check_position(arities, d.relation, p)
            if d.rhs in d.lhs or not d.lhs:
                raise InputError(f"bad fd on {d.relation}: {d.lhs} -> {d.rhs}")
        elif isinstance(d, VarFDDecl):
            for n in (*d.lhs, d.rhs):
                if n not in by_name:
                    raise InputError(f"fd vars references unknown variable {n}")

    return Query(head_atom, body_atoms, decls, variables)


def _check_position(arities, relation, position):
    if relation not in arities:
        raise InputError(f"declaration references unknown relation {relation}")
    if not (1 <= position <= arities[relation]):
        raise InputError(
            f"position {position} out of range for {relation}/{arities[relation]}"
        )


# ---------------------------------------------------------------------------
# Parsing


class _LineCursor:
    def __init__(self, text: str, lineno: int):
        self.text = text
        self.lineno = lineno
        self.pos = 0

    def error(self, msg):
        raise ParseError(msg, self.lineno, self.pos + 1)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def done(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos : self.pos + 1]

    def literal(self, lit: str):
        self.skip_ws()
        if not self.text.startswith(lit, self.pos):
            self.error(f"expected {lit!r}")
        self.pos += len(lit)

    def try_literal(self, lit: str) -> bool:
        self.skip_ws()
        if self.text.startswith(lit, self.pos):
            self.pos += len(lit)
            return True
        return False

    def ident(self) -> str:
        self.skip_ws()
        m = _IDENT.match(self.text, self.pos)
        if not m:
            self.error("expected identifier")
        self.pos = m.end()
        name = m.group()
        if name.startswith(RESERVED_PREFIX):  # unreachable: regex needs a letter first
            self.error(f"names starting with {RESERVED_PREFIX!r} are reserved")
        return name

    def integer(self) -> int:
        self.skip_ws()
        m = _INT.match(self.text, self.pos)
        if not m:
            self.error("expected a positive integer")
        self.pos = m.end()
        return int(m.group())

    def ident_list(self) -> list[str]:
        out = [self.ident()]
        while self.try_literal(","):
            out.append(self.ident())
        return out

    def int_list(self) -> list[int]:
        out = [self.integer()]
        while self.try_literal(","):
            out.append(self.integer())
        return out


def parse_query(text: str) -> Query:
    """Parse a query file.

    Grammar (UTF-8, ``#`` starts a comment)::

        query:       Ident '(' VarList ')' ':-' Atom (',' Atom)* '.'
        key decl:    'key' RelName ':' PosInt
        fd decl:     'fd' RelName ':' PosList '->' PosList     (1-based)
        variable fd: 'fd' 'vars' ':' VarList '->' VarList

    The query rule may span several physical lines up to the closing dot.
    Exactly one query rule is required; declarations may appear anywhere.
    """
    head = None
    body: list[tuple[str, list[str]]] = []
    decls: list[Declaration] = []

    logical: list[tuple[str, int]] = []
    pending: list[str] = []
    pending_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if pending:
            pending.append(stripped)
            if stripped.endswith("."):
                logical.append((" ".join(pending), pending_line))
                pending = []
        elif _looks_like_rule_start(stripped) and not stripped.endswith("."):
            pending = [stripped]
            pending_line = lineno
        else:
            logical.append((stripped, lineno))
    if pending:
        raise ParseError("query rule is missing its terminating '.'", pending_line)

    for stmt, lineno in logical:
        cur = _LineCursor(stmt, lineno)
        keyword = _IDENT.match(stmt.lstrip())
        keyword = keyword.group() if keyword else ""
        if keyword == "key":
            cur.ident()
            rel = cur.ident()
            cur.literal(":")
            pos = cur.integer()
            decls.append(SimpleKey(rel, pos))
        elif keyword == "fd":
            cur.ident()
            name = cur.ident()
            cur.literal(":")
            if name == "vars":
                lhs = cur.ident_list()
                cur.literal("->")
                rhs = cur.ident_list()
                for target in rhs:
                    if target in lhs:
                        continue  # trivially satisfied once split
                    decls.append(VarFDDecl(tuple(lhs), target))
            else:
                lhs = cur.int_list()
                cur.literal("->")
                rhs = cur.int_list()
                for target in rhs:
                    if target in lhs:
                        continue
                    decls.append(RelationFD(name, tuple(lhs), target))
        else:
            if head is not None:
                cur.error("multiple query rules")
            head, body = _parse_rule(cur)
        if not cur.done():
            cur.error("trailing input")

    if head is None:
        raise ParseError("no query rule found", 1)
    try:
        return build_query(head, body, decls)
    except InputError as exc:
        raise ParseError(str(exc)) from exc


def _looks_like_rule_start(stmt: str) -> bool:
    first = _IDENT.match(stmt)
    if not first or first.group() in ("key", "fd"):
        return False
    return stmt[first.end() :].lstrip().startswith("(")


def _parse_rule(cur: _LineCursor):
    head_rel = cur.ident()
    cur.literal("(")
    head_vars = cur.ident_list()
    cur.literal(")")
    cur.literal(":-")
    body = []
    while True:
        rel = cur.ident()
        cur.literal("(")
        args = cur.ident_list()
        cur.literal(")")
        body.append((rel, args))
        if cur.try_literal(","):
            continue
        cur.literal(".")
        break
    return (head_rel, head_vars), body


def query_to_text(q: Query) -> str:
    """Render a query back into the file grammar (parse/print round-trips)."""
    lines = [f"{q.head} :- {', '.join(str(a) for a in q.body)}."]
    for d in q.declarations:
        if isinstance(d, SimpleKey):
            lines.append(f"key {d.relation}: {d.position}")
        elif isinstance(d, RelationFD):
            lines.append(f"fd {d.relation}: {','.join(map(str, d.lhs))} -> {d.rhs}")
        else:
            lines.append(f"fd vars: {','.join(d.lhs)} -> {d.rhs}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# FD instantiation


def instantiate_fds(q: Query) -> frozenset[VariableFD]:
    """Instantiate every declaration at every matching atom occurrence.

    Keys expand to one FD per non-key attribute; relation FDs substitute the
    atom's variables into their positions.  FDs that become trivially
    satisfied (rhs ends up in the lhs, possible with repeated variables) are
    dropped, and duplicates collapse.
    """
    out: set[VariableFD] = set()
    for decl in q.declarations:
        if isinstance(decl, VarFDDecl):
            lhs = frozenset(q.variable(n) for n in decl.lhs)
            rhs = q.variable(decl.rhs)
            if rhs not in lhs:
                out.add(VariableFD(lhs, rhs))
            continue
        for atom in q.body:
            if atom.relation != decl.relation:
                continue
            if isinstance(decl, SimpleKey):
                key_var = atom.args[decl.position - 1]
                for v in atom.args:
                    if v != key_var:
                        out.add(VariableFD(frozenset([key_var]), v))
            else:
                lhs = frozenset(atom.args[p - 1] for p in decl.lhs)
                rhs = atom.args[decl.rhs - 1]
                if rhs not in lhs:
                    out.add(VariableFD(lhs, rhs))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Chase (simple keys)


def chase(q: Query) -> Query:
    """Merge body atoms forced equal by simple keys, to a fixpoint.

    When two atoms of one relation share the variable at a keyed position,
    every variable of the earlier atom is replaced (throughout the query,
    head and declarations included) by the corresponding variable of the
    later atom, and the earlier atom is removed.  Atom pairs are scanned
    lexicographically by body position, so the result is deterministic; the
    produced query returns the same answers as the input on every database
    satisfying the keys.

    Only simple-key declarations drive the rewriting; compound-LHS FDs are
    ignored here and general-FD chasing is the caller's responsibility.
    """
    keyed: dict[str, list[int]] = {}
    for d in q.declarations:
        if isinstance(d, SimpleKey):
            keyed.setdefault(d.relation, []).append(d.position)

    head = (q.head.relation, [v.name for v in q.head.args])
    body = [(a.relation, [v.name for v in a.args]) for a in q.body]
    var_fds = [(list(d.lhs), d.rhs) for d in q.declarations if isinstance(d, VarFDDecl)]

    def substitute(old: str, new: str):
        nonlocal head, body, var_fds
        rep = lambda n: new if n == old else n
        head = (head[0], [rep(n) for n in head[1]])
        body = [(r, [rep(n) for n in ns]) for r, ns in body]
        var_fds = [([rep(n) for n in lhs], rep(rhs)) for lhs, rhs in var_fds]

    changed = True
    while changed:
        changed = False
        for j in range(len(body)):
            for k in range(j + 1, len(body)):
                rel_j, args_j = body[j]
                rel_k, args_k = body[k]
                if rel_j != rel_k:
                    continue
                positions = keyed.get(rel_j, ())
                if not any(args_j[p - 1] == args_k[p - 1] for p in positions):
                    continue
                # Position by position, replace the earlier atom's variable
                # by the later atom's, rereading both atoms after each step.
                for h in range(len(args_j)):
                    old, new = body[j][1][h], body[k][1][h]
                    if old != new:
                        substitute(old, new)
                del body[j]
                changed = True
                break
            if changed:
                break

    decls: list[Declaration] = [
        d for d in q.declarations if not isinstance(d, VarFDDecl)
    ]
    seen = set()
    for lhs, rhs in var_fds:
        if rhs in lhs:
            continue  # became trivially satisfied under the substitution
        key = (frozenset(lhs), rhs)
        if key not in seen:
            seen.add(key)
            decls.append(VarFDDecl(tuple(dict.fromkeys(lhs)), rhs))
    return build_query(head, body, decls)


def is_chased(q: Query) -> bool:
    """True when the simple-key chase leaves ``q`` syntactically unchanged."""
    c = chase(q)
    return c.head == q.head and c.body == q.body


def require_chased(q: Query, what: str):
    if not is_chased(q):
        raise InputError(
            f"{what} requires a chased query (run chase first); "
            "the simple-key chase would still rewrite this one"
        )


# ---------------------------------------------------------------------------
# Binary-LHS reduction


def reduce_fds(q: Query, fds: Iterable[VariableFD]) -> tuple[Query, frozenset[VariableFD]]:
    """Rewrite (query, FDs) so every FD has at most two LHS variables.

    Each FD ``X1..Xj -> Y`` with j >= 3 is replaced by a fresh variable Z,
    a fresh binary-ish relation over (X1, X2, Z) with FDs
    ``X1 X2 -> Z, Z -> X1, Z -> X2``, a fresh relation over (Z, X3..Xj, Y)
    with FD ``Z X3..Xj -> Y``, iterating until all LHS sizes are <= 2.  The
    output is at most polynomially larger; the simple-key chase fixpoint is
    preserved, and both LP optima are unchanged whenever each rewritten FD's
    variables co-occur in some body atom (always true for FDs instantiated
    from relation declarations -- free-standing ``fd vars`` declarations
    spanning several atoms lose that guarantee).

    Fresh names use the reserved ``__`` prefix, which the parser rejects, so
    they cannot collide with user names.
    """
    work = sorted(fds, key=lambda f: f.sort_key())
    if all(len(f.lhs) <= 2 for f in work):
        return q, frozenset(fds)

    head = (q.head.relation, [v.name for v in q.head.args])
    body = [(a.relation, [v.name for v in a.args]) for a in q.body]
    name_fds: list[tuple[tuple[str, ...], str]] = [
        (tuple(v.name for v in sorted(f.lhs, key=lambda v: v.index)), f.rhs.name)
        for f in work
    ]

    fresh_var = 0
    fresh_rel = 0
    i = 0
    while i < len(name_fds):
        lhs, rhs = name_fds[i]
        if len(lhs) <= 2:
            i += 1
            continue
        z = f"{RESERVED_PREFIX}z{fresh_var}"
        fresh_var += 1
        pair_rel = f"{RESERVED_PREFIX}aux{fresh_rel}"
        tail_rel = f"{RESERVED_PREFIX}aux{fresh_rel + 1}"
        fresh_rel += 2
        x1, x2, rest = lhs[0], lhs[1], lhs[2:]
        body.append((pair_rel, [x1, x2, z]))
        body.append((tail_rel, [z, *rest, rhs]))
        name_fds[i : i + 1] = [
            ((x1, x2), z),
            ((z,), x1),
            ((z,), x2),
            ((z, *rest), rhs),
        ]

    new_q = _build_unchecked(head, body, q.declarations)
    out: set[VariableFD] = set()
    for lhs, rhs in name_fds:
        out.add(VariableFD(frozenset(new_q.variable(n) for n in lhs), new_q.variable(rhs)))
    return new_q, frozenset(out)


def _build_unchecked(head, body, decls) -> Query:
    # Same as build_query but tolerates reserved names (used only for the
    # internally generated reduction output).
    order: dict[str, int] = {}
    for _, names in (head, *body):
        for name in names:
            if name not in order:
                order[name] = len(order)
    variables = tuple(Variable(n, i) for n, i in sorted(order.items(), key=lambda kv: kv[1]))
    by_name = {v.name: v for v in variables}
    head_atom = Atom(head[0], tuple(by_name[n] for n in head[1]))
    body_atoms = tuple(Atom(r, tuple(by_name[n] for n in ns)) for r, ns in body)
    return Query(head_atom, body_atoms, tuple(decls), variables)
