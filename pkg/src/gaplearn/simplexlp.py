"""Dense two-phase simplex over exact rationals, for small problems.

Solves ``max c.x  s.t.  A x <= b, x >= 0`` with Fraction arithmetic and
Bland's anti-cycling rule.  Tableaus are dense Python lists, so this is only
meant for the desk-scale programs solved here (tens of rows and columns).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = ["LPInfeasible", "LPUnbounded", "LPResult", "solve_lp", "solve_linear_system"]


class LPInfeasible(Exception):
    pass


class LPUnbounded(Exception):
    pass


@dataclass(frozen=True)
class LPResult:
    value: Fraction
    x: tuple[Fraction, ...]


def _frac_matrix(A: Sequence[Sequence]) -> list[list[Fraction]]:
    return [[Fraction(v) for v in row] for row in A]


def _pivot(tab: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    piv = tab[row][col]
    tab[row] = [v / piv for v in tab[row]]
    for i, r in enumerate(tab):
        if i != row and r[col] != 0:
            factor = r[col]
            tab[i] = [v - factor * p for v, p in zip(r, tab[row])]
    basis[row] = col


def _iterate(tab: list[list[Fraction]], basis: list[int], ncols: int) -> None:
    """Pivot to optimality; the last tableau row holds reduced costs."""
    obj = tab[-1]
    while True:
        enter = next((j for j in range(ncols) if obj[j] > 0), None)
        if enter is None:
            return
        best_row, best_ratio = None, None
        for i in range(len(tab) - 1):
            coeff = tab[i][enter]
            if coeff > 0:
                ratio = tab[i][-1] / coeff
                if (
                    best_ratio is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and basis[i] < basis[best_row])
                ):
                    best_row, best_ratio = i, ratio
        if best_row is None:
            raise LPUnbounded("objective unbounded above")
        _pivot(tab, basis, best_row, enter)
        obj = tab[-1]


def _price_out(
    tab: list[list[Fraction]], basis: list[int], costs: list[Fraction]
) -> None:
    """Install reduced costs for the given per-column costs in the last row."""
    width = len(tab[0])
    obj = costs + [Fraction(0)] * (width - len(costs))
    for i, bvar in enumerate(basis):
        cb = costs[bvar] if bvar < len(costs) else Fraction(0)
        if cb != 0:
            obj = [v - cb * w for v, w in zip(obj, tab[i])]
    tab[-1] = obj


def solve_lp(
    A: Sequence[Sequence], b: Sequence, c: Sequence
) -> LPResult:
    """Maximize ``c.x`` subject to ``A x <= b`` and ``x >= 0``.

    Raises :class:`LPInfeasible` / :class:`LPUnbounded` accordingly.
    """
    A = _frac_matrix(A)
    b = [Fraction(v) for v in b]
    c = [Fraction(v) for v in c]
    m, n = len(A), len(c)
    if any(len(row) != n for row in A) or len(b) != m:
        raise ValueError("inconsistent LP dimensions")

    # Rows with negative rhs are negated and receive an artificial variable.
    neg_rows = [i for i in range(m) if b[i] < 0]
    n_art = len(neg_rows)
    ncols = n + m + n_art
    tab: list[list[Fraction]] = []
    basis: list[int] = []
    art_of_row = {r: n + m + j for j, r in enumerate(neg_rows)}
    for i in range(m):
        sign = -1 if b[i] < 0 else 1
        row = [sign * v for v in A[i]]
        row += [Fraction(sign) if j == i else Fraction(0) for j in range(m)]
        row += [
            Fraction(1) if art_of_row.get(i) == n + m + j else Fraction(0)
            for j in range(n_art)
        ]
        row.append(sign * b[i])
        tab.append(row)
        basis.append(art_of_row.get(i, n + i))
    tab.append([Fraction(0)] * (ncols + 1))

    if n_art:
        costs = [Fraction(0)] * (n + m) + [Fraction(-1)] * n_art
        _price_out(tab, basis, costs)
        _iterate(tab, basis, ncols)
        if -tab[-1][-1] < 0:  # max of -sum(artificials) below zero
            raise LPInfeasible("constraints have no nonnegative solution")
        # Drive any degenerate artificial out of the basis.
        for i in range(m - 1, -1, -1):
            if basis[i] >= n + m:
                enter = next(
                    (j for j in range(n + m) if tab[i][j] != 0), None
                )
                if enter is None:
                    del tab[i]
                    del basis[i]
                else:
                    _pivot(tab, basis, i, enter)
        # Truncate artificial columns.
        for i in range(len(tab)):
            tab[i] = tab[i][: n + m] + [tab[i][-1]]
        ncols = n + m

    _price_out(tab, basis, c + [Fraction(0)] * m)
    _iterate(tab, basis, ncols)

    x = [Fraction(0)] * n
    for i, bvar in enumerate(basis):
        if bvar < n:
            x[bvar] = tab[i][-1]
    return LPResult(value=-tab[-1][-1], x=tuple(x))


def solve_linear_system(
    M: Sequence[Sequence[Fraction]], v: Sequence[Fraction]
) -> tuple[Fraction, ...] | None:
    """Unique exact solution of ``M x = v``, or None if M is singular."""
    n = len(v)
    aug = [[Fraction(x) for x in row] + [Fraction(v[i])] for i, row in enumerate(M)]
    for col in range(n):
        pivot_row = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot_row is None:
            return None
        aug[col], aug[pivot_row] = aug[pivot_row], aug[col]
        piv = aug[col][col]
        aug[col] = [x / piv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return tuple(row[-1] for row in aug)
