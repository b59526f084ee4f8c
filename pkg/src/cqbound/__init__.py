"""Worst-case output-size bounds for conjunctive queries under functional
dependencies: entropy linear programs, the color number, polynomial-time
sparsity decision, and generators for concrete worst-case databases."""

from .coloring import (
    Coloring,
    ColorNumberResult,
    brute_force_color_search,
    build_color_lp,
    color_number,
    coloring_ratio,
    coloring_to_lp_point,
    lp_point_to_coloring,
    validate_coloring,
)
from .errors import CQBoundError, InputError, LimitError, ParseError
from .evaluate import (
    EvalReport,
    check_fds,
    empirical_entropy_vector,
    evaluate,
    feasibility_check,
    knitted_complexity,
    make_report,
    observed_exponent,
    rmax,
    table_entropy_vector,
)
from .instances import (
    Database,
    GapFamily,
    Relation,
    gap_database,
    gap_query,
    worst_case_from_coloring,
)
from .lp import (
    Constraint,
    EntropyVector,
    LinearProgram,
    atom_expression,
    build_size_lp,
    lp_to_text,
    size_bound_exponent,
    solve_exact,
)
from .query import (
    Atom,
    Query,
    RelationFD,
    SimpleKey,
    VarFDDecl,
    Variable,
    VariableFD,
    build_query,
    chase,
    instantiate_fds,
    parse_query,
    query_to_text,
    reduce_fds,
)
from .sparsity import (
    SatInstance,
    SparsityResult,
    build_sat,
    is_sparsity_preserving,
    solve_sat_pass,
)

__all__ = [n for n in dir() if not n.startswith("_")]
__version__ = "0.1.0"
