"""Utility-gap elicitation through comparison queries.

The estimator never sees a numeric utility.  It first pins each point's
label with single-point comparisons, locates the point with the largest gap
by a linear tournament of two-point comparisons, and then runs a dyadic
refinement: at round t it asks whether k/2 copies of point i beat lambda
copies of its reference point, halving a bracket around the unknown ratio
``g_i / g_ref``.  Coefficients stay exact dyadic rationals relative to the
reference gap, so the largest gap itself is never needed numerically.

``estimate_gaps`` requires a noiseless oracle.  ``estimate_gaps_noisy``
repeats every query J times and takes majority votes, which restores the
noiseless behaviour with probability at least 1 - delta under a known bound
``eta < 1/2`` on the flip rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .oracle import ComparisonOracle, Query

__all__ = [
    "GapEstimate",
    "elicit_labels",
    "find_max_gap",
    "estimate_gaps",
    "estimate_gaps_noisy",
    "repeat_count",
]

PHASE_LABELS = "labels"
PHASE_MAX_GAP = "max-gap"
PHASE_REFINE = "refinement"


@dataclass(frozen=True)
class GapEstimate:
    """Output of a gap-elicitation run.

    ``coeffs[i]`` is a dyadic rational in (0, 1], an integer multiple of
    ``2**-depth``, read as "g_i is estimated at coeffs[i] times the gap of
    reference[i]".  With the default all-max reference the unit is the
    largest gap and ``coeffs[i_max] == 1``.  ``effective_coeffs`` folds
    reference chains down to multiples of the largest gap.
    """

    labels: tuple[int, ...]
    i_max: int
    coeffs: tuple[Fraction, ...]
    depth: int
    reference: tuple[int, ...]
    provenance: str = "noiseless"

    @property
    def n(self) -> int:
        return len(self.coeffs)

    def effective_coeffs(self) -> tuple[Fraction, ...]:
        """Coefficients expressed relative to the largest gap.

        Multiplies along reference chains (i -> reference[i] -> ...), which
        must terminate at ``i_max`` without cycles.
        """
        out: list[Fraction] = []
        for i in range(self.n):
            c = Fraction(1)
            j = i
            seen = {i}
            while j != self.i_max:
                c *= self.coeffs[j]
                j = self.reference[j]
                if j in seen:
                    raise ValueError("reference chain has a cycle")
                seen.add(j)
            out.append(c)
        return tuple(out)

    def scaled_gaps(self, unit: Fraction) -> tuple[Fraction, ...]:
        """Numeric gap estimates given the true largest gap (analysis path)."""
        return tuple(c * unit for c in self.effective_coeffs())


def _label_query(i: int) -> Query:
    return Query.single(i, 1, 0)


def _duel_query(champ: int, y_champ: int, rival: int, y_rival: int) -> Query:
    # Truth bit is I[g_champ >= g_rival].
    return Query(((champ, y_champ, 1 - y_champ), (rival, 1 - y_rival, y_rival)))


def _refine_query(
    i: int, y_i: int, ref: int, y_ref: int, half_k: int, lam: int
) -> Query:
    entries = [(i, y_i, 1 - y_i)] * half_k + [(ref, 1 - y_ref, y_ref)] * lam
    return Query(tuple(entries))


def elicit_labels(oracle: ComparisonOracle) -> tuple[int, ...]:
    """Per-point labels from n single-point comparisons (noiseless path)."""
    _require_noiseless(oracle)
    return tuple(
        oracle.answer(_label_query(i), PHASE_LABELS) for i in range(oracle.n_points)
    )


def find_max_gap(oracle: ComparisonOracle, labels: Sequence[int]) -> int:
    """Index of a maximal-gap point via a linear champion tournament.

    Uses n - 1 two-point comparisons; ties keep the current champion, so the
    returned index is the lowest one attaining the maximum.
    """
    _require_noiseless(oracle)
    champ = 0
    for rival in range(1, oracle.n_points):
        q = _duel_query(champ, labels[champ], rival, labels[rival])
        if oracle.answer(q, PHASE_MAX_GAP) == 0:
            champ = rival
    return champ


def _check_order(k: int) -> int:
    if k < 2 or k & (k - 1) != 0:
        raise ValueError(f"oracle order {k} must be a power of two >= 2")
    return int(math.log2(k)) - 1


def _require_noiseless(oracle: ComparisonOracle) -> None:
    if not oracle.config.noiseless:
        raise ValueError(
            "noiseless oracle required; use estimate_gaps_noisy for noisy oracles"
        )


def estimate_gaps(
    oracle: ComparisonOracle,
    reference: Sequence[int] | None = None,
) -> GapEstimate:
    """Dyadic gap estimation against a noiseless oracle.

    Runs ``log2(k) - 1`` refinement rounds after the label and max-gap
    phases, issuing one query per point per round (self-comparisons for the
    reference point included, to keep the budget deterministic).  The output
    overestimates every gap by at most ``2/k`` of the reference unit.

    ``reference`` optionally overrides the comparison target per point; the
    default compares every point against the maximal-gap point.  A custom
    reference must have a gap at least as large as the point it anchors, or
    the bracketing guarantee is void.
    """
    _require_noiseless(oracle)
    T = _check_order(oracle.k)
    labels = elicit_labels(oracle)
    i_max = find_max_gap(oracle, labels)
    refs = _resolve_reference(reference, i_max, oracle.n_points)

    half_k = oracle.k // 2
    coeffs = [Fraction(1)] * oracle.n_points
    for t in range(1, T + 1):
        step = Fraction(1, 2**t)
        for i in range(oracle.n_points):
            lam = half_k * (coeffs[i] - step)
            assert lam.denominator == 1 and 0 <= lam <= half_k
            q = _refine_query(i, labels[i], refs[i], labels[refs[i]], half_k, int(lam))
            if oracle.answer(q, PHASE_REFINE) == 0:
                coeffs[i] -= step
    return GapEstimate(labels, i_max, tuple(coeffs), T, refs, "noiseless")


def repeat_count(n: int, depth: int, eta: float, delta: float) -> int:
    """Majority-vote repetitions guaranteeing all updates correct w.p. 1 - delta.

    ``ceil((8 / (1 - 2 eta)^2) * ln(n * depth / delta))``, with the depth
    floored at one so degenerate schedules (k = 2) still get a usable count.
    """
    if not 0 <= eta < 0.5:
        raise ValueError("noise bound eta must lie in [0, 1/2)")
    if not 0 < delta < 1:
        raise ValueError("confidence delta must lie in (0, 1)")
    rounds = max(depth, 1)
    j = math.ceil(8.0 / (1.0 - 2.0 * eta) ** 2 * math.log(n * rounds / delta))
    return max(j, 1)


def estimate_gaps_noisy(
    oracle: ComparisonOracle,
    eta: float,
    delta: float,
    reference: Sequence[int] | None = None,
) -> GapEstimate:
    """Gap estimation under response noise bounded by ``eta``.

    Identical schedule to :func:`estimate_gaps`, with every query (labels
    and max-gap phases included) repeated J times and decided by majority
    vote.  With probability at least 1 - delta the output coincides with the
    noiseless run.
    """
    T = _check_order(oracle.k)
    n = oracle.n_points
    J = repeat_count(n, T, eta, delta)

    def majority(q: Query, phase: str) -> int:
        ones = sum(oracle.answer(q, phase) for _ in range(J))
        # Mean below one half reads as response 0; exact half keeps 1.
        return 1 if 2 * ones >= J else 0

    labels = tuple(majority(_label_query(i), PHASE_LABELS) for i in range(n))
    champ = 0
    for rival in range(1, n):
        q = _duel_query(champ, labels[champ], rival, labels[rival])
        if majority(q, PHASE_MAX_GAP) == 0:
            champ = rival
    refs = _resolve_reference(reference, champ, n)

    half_k = oracle.k // 2
    coeffs = [Fraction(1)] * n
    for t in range(1, T + 1):
        step = Fraction(1, 2**t)
        for i in range(n):
            lam = half_k * (coeffs[i] - step)
            assert lam.denominator == 1 and 0 <= lam <= half_k
            q = _refine_query(i, labels[i], refs[i], labels[refs[i]], half_k, int(lam))
            if majority(q, PHASE_REFINE) == 0:
                coeffs[i] -= step
    return GapEstimate(labels, champ, tuple(coeffs), T, refs, "noisy")


def _resolve_reference(
    reference: Sequence[int] | None, i_max: int, n: int
) -> tuple[int, ...]:
    if reference is None:
        return tuple(i_max for _ in range(n))
    refs = tuple(int(r) for r in reference)
    if len(refs) != n:
        raise ValueError("reference vector length mismatch")
    if any(not 0 <= r < n for r in refs):
        raise ValueError("reference index outside the support")
    return refs
