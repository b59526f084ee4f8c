"""Exact tableau simplex over nonnegative variables with integer pivoting.

Solves  max c.x  s.t.  A x <= b,  x >= 0  with every bound b_i >= 0, so the
all-slack basis is feasible from the start and no phase-1 is ever needed
(the entropy programs in this package always satisfy that after
normalization).

The tableau is kept as integers together with one global divisor q > 0: the
stored matrix is q times the real tableau, and q equals the determinant of
the current basis.  A pivot on (r, s) with pivot entry p (> 0) updates every
other row i as

    row_i <- (row_i * p - row_i[s] * row_r) / q        (division exact)

leaves the pivot row untouched, and sets q <- p.  Entries therefore stay
subdeterminants of the original integer data (no coefficient swell beyond
the Hadamard bound, and no rational-normalization cost).

Pricing starts with Dantzig's rule (most positive reduced cost, ties by
lowest index) and permanently switches to Bland's anti-cycling rule (lowest
improving index) once the iteration count passes a threshold, so termination
is guaranteed and every choice is deterministic.  The leaving row is the
minimum ratio with ties broken by lowest basic-variable index.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from .errors import InputError

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"


@dataclass
class Result:
    status: str
    x: list[Fraction] | None = None
    ray: list[Fraction] | None = None


def _scale_to_ints(coeffs, bound=None):
    vals = list(coeffs) + ([bound] if bound is not None else [])
    scale = lcm(*(Fraction(v).denominator for v in vals)) if vals else 1
    ints = [int(Fraction(v) * scale) for v in coeffs]
    if bound is None:
        return ints
    return ints, int(Fraction(bound) * scale)


def maximize(c, rows) -> Result:
    """``c``: objective coefficients; ``rows``: (coefficients, bound) pairs."""
    n = len(c)
    m = len(rows)
    width = n + m + 1
    rhs = width - 1

    tableau: list[list[int]] = []
    for i, (coeffs, bound) in enumerate(rows):
        if len(coeffs) != n:
            raise InputError("ragged constraint row")
        ints, b = _scale_to_ints(coeffs, bound)
        if b < 0:
            raise InputError("negative bound after normalization")
        row = ints + [0] * m + [b]
        row[n + i] = 1
        tableau.append(row)
    obj = _scale_to_ints(c) + [0] * m + [0]
    basis = list(range(n, n + m))
    q = 1
    bland_after = 100 + 5 * (m + n)
    pivots = 0

    while True:
        entering = -1
        if pivots < bland_after:
            best = 0
            for j in range(n + m):
                if obj[j] > best:
                    best = obj[j]
                    entering = j
        else:
            for j in range(n + m):
                if obj[j] > 0:
                    entering = j
                    break
        if entering < 0:
            x = [Fraction(0)] * n
            for i, bv in enumerate(basis):
                if bv < n:
                    x[bv] = Fraction(tableau[i][rhs], q)
            return Result(OPTIMAL, x=x)

        leaving = -1
        for i in range(m):
            a = tableau[i][entering]
            if a <= 0:
                continue
            if leaving < 0:
                leaving = i
                continue
            lhs = tableau[i][rhs] * tableau[leaving][entering]
            rhs_ = tableau[leaving][rhs] * a
            if lhs < rhs_ or (lhs == rhs_ and basis[i] < basis[leaving]):
                leaving = i

        if leaving < 0:
            ray = [Fraction(0)] * n
            if entering < n:
                ray[entering] = Fraction(1)
            for i, bv in enumerate(basis):
                if bv < n and tableau[i][entering]:
                    ray[bv] = Fraction(-tableau[i][entering], q)
            return Result(UNBOUNDED, ray=ray)

        _pivot(tableau, obj, basis, leaving, entering, q)
        q = tableau[leaving][entering]
        pivots += 1


def _pivot(tableau, obj, basis, r, s, q):
    prow = tableau[r]
    p = prow[s]
    for i, row in enumerate(tableau):
        if i == r:
            continue
        _eliminate(row, prow, s, p, q)
    _eliminate(obj, prow, s, p, q)
    basis[r] = s


def _eliminate(row, prow, s, p, q):
    f = row[s]
    if f:
        for j in range(len(row)):
            num = row[j] * p - f * prow[j]
            quo, rem = divmod(num, q)
            if rem:
                raise AssertionError("inexact division in integer pivoting")
            row[j] = quo
    elif p != q:
        for j in range(len(row)):
            num = row[j] * p
            quo, rem = divmod(num, q)
            if rem:
                raise AssertionError("inexact division in integer pivoting")
            row[j] = quo
