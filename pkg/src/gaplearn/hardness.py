"""Hard instances for learning from order-k comparisons.

Two constructions, both with exact rational parameters:

* ``hard_pair_instance(k)`` — a two-point support carrying two utility
  tables whose gap ratios are squeezed inside ``[1 - 1/k, 1]``.  No order-k
  query separates them, yet their population maximizers differ, so every
  decision rule suffers an excess risk of order 1/k against one of the two
  tables.

* ``adaptivity_gap_instance(k)`` — a three-point support on which the
  max-referenced dyadic estimator overestimates the rare point's tiny gap
  badly enough to flip the plug-in decision, while re-referencing that
  point's refinement against the middle point (or solving the robust game
  over the consistent set) recovers the optimal decision.

``indistinguishable`` is the checker both rest on: it exhaustively compares
responses of two gap vectors across every canonical reduced query.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .instances import (
    HypothesisClass,
    Point,
    TabularInstance,
    build_instance,
    excess_risk,
    induce_threshold_class,
)
from .oracle import enumerate_reduced_queries

__all__ = [
    "HardInstancePair",
    "AdaptivityGapBundle",
    "hard_pair_instance",
    "adaptivity_gap_instance",
    "indistinguishable",
]


@dataclass(frozen=True)
class HardInstancePair:
    """Shared support and weights carrying two k-indistinguishable utilities.

    ``risk_first_point`` is the excess risk of predicting the positive point
    correctly, evaluated under the first table (its worst case);
    ``risk_second_point`` is the mirror value under the second table.
    """

    order: int
    instance_a: TabularInstance
    instance_b: TabularInstance
    cls: HypothesisClass
    risk_first_point: Fraction
    risk_second_point: Fraction


def hard_pair_instance(k: int) -> HardInstancePair:
    """Two-point lower-bound construction at order k.

    Support {+1, -1} with weights ``3k/(6k+1)`` and ``(3k+1)/(6k+1)``; both
    tables give the positive point a unit gap, while the negative point's
    gap is ``1 - 1/(2(3k+1))`` in one table and ``1 - 2/(3k+1)`` in the
    other.  Both ratios sit inside [1 - 1/k, 1], so order-k queries cannot
    tell the tables apart.
    """
    if k < 2:
        raise ValueError("construction needs k >= 2")
    gamma_a = Fraction(1, 2 * (3 * k + 1))
    gamma_b = Fraction(2, 3 * k + 1)
    weights = [Fraction(3 * k, 6 * k + 1), Fraction(3 * k + 1, 6 * k + 1)]
    points = [Point("x+", +1.0), Point("x-", -1.0)]
    zero = Fraction(0)
    inst_a = build_instance(
        points, weights, [(zero, Fraction(1)), (zero, 1 - gamma_a)]
    )
    inst_b = build_instance(
        points, weights, [(zero, Fraction(1)), (zero, 1 - gamma_b)]
    )
    cls = induce_threshold_class(inst_a)
    first = tuple(1 if p.coord > 0 else 0 for p in inst_a.points)
    second = tuple(1 - v for v in first)
    risk_first = excess_risk(inst_a, first, cls)
    risk_second = excess_risk(inst_b, second, cls)
    assert risk_first == Fraction(1, 2 * (6 * k + 1))
    assert risk_second == Fraction(1, 6 * k + 1)
    return HardInstancePair(k, inst_a, inst_b, cls, risk_first, risk_second)


@dataclass(frozen=True)
class AdaptivityGapBundle:
    """Three-point construction exposing the plug-in's non-adaptivity.

    ``reference`` re-routes the third point's refinement to the second point
    instead of the maximal one; following that schedule (or playing the
    robust game) picks the decision that is optimal for every gap vector
    consistent with the oracle's answers.
    """

    order: int
    instance: TabularInstance
    cls: HypothesisClass
    p: Fraction
    reference: tuple[int, ...]
    plugin_risk: Fraction  # risk of the decision the max-referenced plug-in picks


def adaptivity_gap_instance(k: int) -> AdaptivityGapBundle:
    """Support {1, 2, -1} with gaps (1, 4/k, 2/k^2) and weights (p, p, 1-2p).

    At ``p = 1/(k+8)`` the sign-rule class's optimum predicts the two
    positive points, but the max-referenced estimate inflates the third
    point's gap from 2/k^2 to 2/k, flipping the plug-in to the other rule.
    The resulting excess risk is ``(k^2 + 2k - 12) / (k^2 (k + 8))``.
    Requires k > 10 (a power of two for the estimator, so k >= 16).
    """
    if k <= 10:
        raise ValueError("construction needs k > 10; use a power of two >= 16")
    p = Fraction(1, k + 8)
    points = [Point("x1", 1.0), Point("x2", 2.0), Point("x3", -1.0)]
    weights = [p, p, 1 - 2 * p]
    zero = Fraction(0)
    utility = [
        (zero, Fraction(1)),
        (zero, Fraction(4, k)),
        (zero, Fraction(2, k * k)),
    ]
    instance = build_instance(points, weights, utility)
    cls = induce_threshold_class(instance)
    reference = (0, 0, 1)  # third point refines against the second
    plugin_risk = Fraction(k * k + 2 * k - 12, k * k * (k + 8))
    return AdaptivityGapBundle(k, instance, cls, p, reference, plugin_risk)


def indistinguishable(
    gaps_a: Sequence[Fraction],
    gaps_b: Sequence[Fraction],
    k: int,
    cap: int = 10**6,
) -> tuple[bool, tuple[int, ...] | None]:
    """Whether two gap vectors answer every order-k query identically.

    Checks ``I[c . a >= 0] == I[c . b >= 0]`` for every canonical reduced
    query c.  Returns ``(True, None)`` or ``(False, witness)`` with the
    lexicographically smallest separating c.  Both vectors must describe
    utilities sharing the same labels, so that queries reduce to gap
    comparisons at all.
    """
    if len(gaps_a) != len(gaps_b):
        raise ValueError("gap vectors must have equal length")
    a = [Fraction(x) for x in gaps_a]
    b = [Fraction(x) for x in gaps_b]
    for c in enumerate_reduced_queries(len(a), k, cap=cap):
        dot_a = sum(ci * ai for ci, ai in zip(c, a))
        dot_b = sum(ci * bi for ci, bi in zip(c, b))
        if (dot_a >= 0) != (dot_b >= 0):
            return False, c
    return True, None
