"""Command-line entry point.

One subcommand per analysis: chase, reduce-fds, bound, color, sparsity, gen,
gap, eval, verify.  Exit codes: 0 success, 1 analysis refusal (size caps) or
a failed verification, 2 input errors.  All diagnostics go to stderr; reports
go to stdout or --out, and identical inputs produce byte-identical JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .coloring import Coloring, color_number, coloring_ratio, validate_coloring
from .errors import CQBoundError, InputError, LimitError
from .evaluate import (
    check_fds,
    empirical_entropy_vector,
    evaluate,
    feasibility_check,
    knitted_complexity,
    make_report,
    report_to_json,
    rmax,
)
from .instances import (
    DEFAULT_TUPLE_CAP,
    Database,
    gap_database,
    gap_query,
    worst_case_from_coloring,
)
from .lp import DEFAULT_MAX_VARS, build_size_lp, lp_to_text, size_bound_exponent, solve_exact
from .query import (
    RESERVED_PREFIX,
    build_query,
    chase,
    instantiate_fds,
    parse_query,
    query_to_text,
    reduce_fds,
)
from .sparsity import is_sparsity_preserving


class VerifyError(CQBoundError):
    """An end-to-end invariant failed during `verify`."""


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except LimitError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 1
    except VerifyError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except (InputError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cqbound",
        description="Worst-case size bounds for conjunctive queries under "
        "functional dependencies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_, query_arg=True):
        p = sub.add_parser(name, help=help_)
        if query_arg:
            p.add_argument("query", help="query file (.cq)")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("table", "json"), default="table")
        p.set_defaults(handler=handler)
        return p

    add("chase", _cmd_chase, "apply the simple-key chase and print the query")
    add("reduce-fds", _cmd_reduce, "rewrite all FDs to at most two LHS variables")

    p = add("bound", _cmd_bound, "worst-case size-increase exponent s(Q)")
    p.add_argument("--max-vars", type=int, default=DEFAULT_MAX_VARS)
    p.add_argument("--dump-lp", help="also write the LP in text form here")

    p = add("color", _cmd_color, "color number with a witness coloring")
    p.add_argument("--max-vars", type=int, default=DEFAULT_MAX_VARS)
    p.add_argument("--dump-lp", help="also write the LP in text form here")

    add("sparsity", _cmd_sparsity, "decide whether the query preserves sparsity")

    p = add("gen", _cmd_gen, "generate a worst-case database from a coloring")
    p.add_argument("--N", type=int, required=True, help="values per color")
    p.add_argument("--coloring", help="coloring JSON (defaults to the LP witness)")
    p.add_argument("--max-vars", type=int, default=DEFAULT_MAX_VARS)
    p.add_argument("--tuple-cap", type=int, default=DEFAULT_TUPLE_CAP)

    p = sub.add_parser("gap", help="emit the secret-share gap family (query + database)")
    p.add_argument("--k", type=int, required=True, help="even group size, 4..8")
    p.add_argument("--p", type=int, default=None, help="prime >= k (default: smallest)")
    p.add_argument("--out-query", help="query file to write (default gap-k<k>.cq)")
    p.add_argument("--out-db", help="database file to write (default gap-k<k>-p<p>.json)")
    p.set_defaults(handler=_cmd_gap)

    p = add("eval", _cmd_eval, "evaluate a query over a database file")
    p.add_argument("database", help="database JSON file")
    p.add_argument("--csv", help="also dump the output relation as CSV here")
    p.add_argument("--max-vars", type=int, default=DEFAULT_MAX_VARS)

    p = add("verify", _cmd_verify, "end-to-end check: color, generate, evaluate, compare")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--max-vars", type=int, default=DEFAULT_MAX_VARS)
    p.add_argument("--tuple-cap", type=int, default=DEFAULT_TUPLE_CAP)

    return parser


# ---------------------------------------------------------------------------
# helpers


def _load_query(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_query(fh.read())


def _load_database(path: str) -> Database:
    with open(path, encoding="utf-8") as fh:
        return Database.from_json(json.load(fh))


def _emit(args, text: str):
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _round_floats(obj):
    if isinstance(obj, float):
        return round(obj, 9)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _json_text(payload: dict) -> str:
    return json.dumps(_round_floats(payload), sort_keys=True, indent=2) + "\n"


def _report(args, payload: dict, table_lines: list[str]):
    if args.format == "json":
        _emit(args, _json_text(payload))
    else:
        _emit(args, "\n".join(table_lines) + "\n")
    return 0


def _frac(f: Fraction) -> str:
    return str(f)


def _analysis_input(args):
    q = chase(_load_query(args.query))
    return q, instantiate_fds(q)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_chase(args) -> int:
    q = chase(_load_query(args.query))
    _emit(args, query_to_text(q))
    return 0


def _cmd_reduce(args) -> int:
    q, fds = _analysis_input(args)
    reduced, reduced_fds = reduce_fds(q, fds)
    reduced, reduced_fds = _externalize(reduced, reduced_fds)
    _emit(args, query_to_text(reduced))
    return 0


def _externalize(q, fds):
    """Rename reserved fresh names so the printed query parses again."""
    taken = {v.name for v in q.variables} | {a.relation for a in (q.head, *q.body)}

    def fresh(base):
        candidate, i = base, 0
        while candidate in taken:
            candidate = f"{base}{i}"
            i += 1
        taken.add(candidate)
        return candidate

    var_map = {
        v.name: fresh(v.name.removeprefix(RESERVED_PREFIX).upper())
        if v.name.startswith(RESERVED_PREFIX)
        else v.name
        for v in q.variables
    }
    rel_map = {
        a.relation: fresh(a.relation.removeprefix(RESERVED_PREFIX).capitalize())
        if a.relation.startswith(RESERVED_PREFIX)
        else a.relation
        for a in q.body
    }

    from .query import VarFDDecl

    head = (q.head.relation, [var_map[v.name] for v in q.head.args])
    body = [(rel_map[a.relation], [var_map[v.name] for v in a.args]) for a in q.body]
    decls = [
        VarFDDecl(
            tuple(sorted(var_map[v.name] for v in fd.lhs)), var_map[fd.rhs.name]
        )
        for fd in sorted(fds, key=lambda f: f.sort_key())
    ]
    new_q = build_query(head, body, decls)
    return new_q, instantiate_fds(new_q)


def _cmd_bound(args) -> int:
    q, fds = _analysis_input(args)
    lp = build_size_lp(q, fds, args.max_vars)
    if args.dump_lp:
        with open(args.dump_lp, "w", encoding="utf-8") as fh:
            fh.write(lp_to_text(lp))
    value, _ = solve_exact(lp)
    payload = {"size_bound_exponent": _frac(value), "variables": q.k}
    return _report(args, payload, [f"s(Q) = {_frac(value)}"])


def _cmd_color(args) -> int:
    q, fds = _analysis_input(args)
    if args.dump_lp:
        from .coloring import build_color_lp

        with open(args.dump_lp, "w", encoding="utf-8") as fh:
            fh.write(lp_to_text(build_color_lp(q, fds, args.max_vars)))
    res = color_number(q, fds, args.max_vars)
    witness = res.witness.to_json(q)
    payload = {"color_number": _frac(res.value), "witness": witness, "variables": q.k}
    return _report(
        args,
        payload,
        [f"C(Q) = {_frac(res.value)}", f"witness: {json.dumps(witness, sort_keys=True)}"],
    )


def _cmd_sparsity(args) -> int:
    q, fds = _analysis_input(args)
    res = is_sparsity_preserving(q, fds)
    if res.preserving:
        payload = {
            "preserving": True,
            "failing_relation": res.failing_relation,
            "failing_relation_name": res.failing_relation_name,
        }
        lines = [
            "preserving: true",
            f"failing relation: {res.failing_relation_name} "
            f"(atom {res.failing_relation})",
        ]
    else:
        witness = res.witness.to_json(q)
        payload = {
            "preserving": False,
            "witness": witness,
            "lower_bound_exponent": _frac(res.lower_bound_exponent),
        }
        lines = [
            "preserving: false",
            f"witness: {json.dumps(witness, sort_keys=True)}",
            f"lower bound exponent: {_frac(res.lower_bound_exponent)}",
        ]
    return _report(args, payload, lines)


def _cmd_gen(args) -> int:
    q, fds = _analysis_input(args)
    if args.coloring:
        with open(args.coloring, encoding="utf-8") as fh:
            col = Coloring.from_json(q, json.load(fh))
        if validate_coloring(q, fds, col):
            raise InputError("supplied coloring violates the declared FDs")
    else:
        col = color_number(q, fds, args.max_vars).witness
    db = worst_case_from_coloring(q, fds, col, args.N, args.tuple_cap)
    _emit(args, _json_text(db.to_json()))
    return 0


def _cmd_gap(args) -> int:
    fam = gap_query(args.k, args.p)
    db = gap_database(fam)
    query_path = args.out_query or f"gap-k{fam.k}.cq"
    db_path = args.out_db or f"gap-k{fam.k}-p{fam.p}.json"
    with open(query_path, "w", encoding="utf-8") as fh:
        fh.write(query_to_text(fam.query))
    with open(db_path, "w", encoding="utf-8") as fh:
        fh.write(_json_text(db.to_json()))
    print(f"wrote {query_path} and {db_path}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    q = _load_query(args.query)
    db = _load_database(args.database)
    report = make_report(q, db, args.max_vars)
    if args.csv:
        rows = sorted(evaluate(q, db))
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(",".join(v.name for v in q.head.args) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
    payload = report_to_json(report, q)
    lines = [
        f"output size: {report.output_size}",
        f"rmax: {report.rmax}",
        f"observed exponent: {report.observed_exponent}",
        f"knitted complexity: {report.knitted}",
    ]
    return _report(args, payload, lines)


def _cmd_verify(args) -> int:
    q, fds = _analysis_input(args)
    payload = run_verify(q, fds, args.N, args.max_vars, args.tuple_cap)
    lines = [
        f"color number: {payload['color_number']}",
        f"size bound: {payload['size_bound_exponent']}",
        f"|Q(D)| = {payload['output_size']}, rmax = {payload['rmax']}",
        f"observed exponent: {payload['observed_exponent']}",
        "all invariants hold",
    ]
    return _report(args, payload, lines)


def run_verify(q, fds, n: int, max_vars=DEFAULT_MAX_VARS, tuple_cap=DEFAULT_TUPLE_CAP) -> dict:
    """color -> generate -> evaluate -> compare; raises VerifyError on any
    broken invariant.  Returns the JSON payload."""
    res = color_number(q, fds, max_vars)
    db = worst_case_from_coloring(q, fds, res.witness, n, tuple_cap)

    if check_fds(db, q, fds):
        raise VerifyError("generated database violates a functional dependency")

    head_colors = len(res.witness.union_over(q.head.var_set))
    widest = max(len(res.witness.union_over(a.var_set)) for a in q.body)
    for atom in q.body:
        expected = n ** len(res.witness.union_over(atom.var_set))
        if len(db.relations[atom.relation]) != expected:
            raise VerifyError(f"|{atom.relation}| != N^(its color count)")

    output = evaluate(q, db)
    if len(output) != n**head_colors:
        raise VerifyError(f"|Q(D)| = {len(output)} != N^{head_colors}")
    biggest = rmax(q, db)
    if biggest != n**widest:
        raise VerifyError("rmax differs from N^(widest atom color count)")

    exponent = Fraction(head_colors, widest)
    if exponent != res.value:
        raise VerifyError("realized exponent differs from the color number")
    size_bound = size_bound_exponent(q, fds, max_vars)
    if exponent > size_bound:
        raise VerifyError("realized exponent exceeds the size bound")

    knitted = None
    if n >= 2:
        ev = empirical_entropy_vector(q, db, max_vars)
        bad = feasibility_check(q, fds, ev, max_vars=max_vars)
        if bad:
            raise VerifyError(f"empirical entropy vector violates {len(bad)} LP rows")
        knitted = knitted_complexity(ev)
        if abs(knitted - 1.0) > 1e-9:
            raise VerifyError(f"knitted complexity {knitted} != 1 on a coloring instance")

    return {
        "N": n,
        "color_number": _frac(res.value),
        "size_bound_exponent": _frac(size_bound),
        "output_size": len(output),
        "rmax": biggest,
        "observed_exponent": float(exponent) if biggest >= 2 else None,
        "relation_sizes": {name: len(rel) for name, rel in sorted(db.relations.items())},
        "knitted_complexity": knitted,
        "witness": res.witness.to_json(q),
    }


if __name__ == "__main__":
    sys.exit(main())
