"""Finite-support decision problems with bounded per-point utilities.

A problem instance is a finite list of support points, a probability vector
over them, and a utility table ``u(x, y) in [0, 1]`` for binary decisions
``y in {0, 1}``.  Everything downstream (oracles, elicitation, learners,
games) consumes these instances.  All rational quantities are kept as exact
`fractions.Fraction` values so that analytic risk identities can be tested
bit-exactly; float views are derived on demand.

Conventions fixed here and relied on everywhere else:

* the per-point label is ``y_i = 1`` whenever ``u(x_i, 1) >= u(x_i, 0)``
  (ties break toward 1);
* the utility gap of a point is ``g_i = u(x_i, y_i) - u(x_i, 1 - y_i) >= 0``;
* hypothesis argmax ties break toward the lowest hypothesis index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "WEIGHT_TOLERANCE",
    "Point",
    "TabularInstance",
    "HypothesisClass",
    "EvaluationReport",
    "build_instance",
    "induce_threshold_class",
    "population_utility",
    "gap_utility",
    "excess_risk",
    "evaluate_class",
    "instance_to_json",
    "instance_from_json",
]

# Absolute tolerance for the "weights sum to one" validation.
WEIGHT_TOLERANCE = Fraction(1, 10**12)

Rational = int | float | Fraction


def _to_fraction(value: Rational) -> Fraction:
    """Exact conversion; floats map to their exact binary rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"expected a number, got {type(value).__name__}")


@dataclass(frozen=True)
class Point:
    """A support point: an opaque id plus an optional real coordinate.

    The coordinate is only used to induce one-dimensional threshold
    dichotomies; it plays no role in utilities or weights.
    """

    id: str
    coord: float | None = None


@dataclass(frozen=True)
class TabularInstance:
    """Validated finite-support instance with derived labels and gaps.

    Immutable after construction; safe to share across threads.
    """

    points: tuple[Point, ...]
    weights: tuple[Fraction, ...]
    utility: tuple[tuple[Fraction, Fraction], ...]  # (u(x,0), u(x,1)) per point
    labels: tuple[int, ...]
    gaps: tuple[Fraction, ...]

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def max_gap(self) -> Fraction:
        return max(self.gaps)

    def weights_array(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    def gaps_array(self) -> np.ndarray:
        return np.array([float(g) for g in self.gaps])

    def labels_array(self) -> np.ndarray:
        return np.array(self.labels, dtype=int)

    def scaled(self, factor: Rational) -> "TabularInstance":
        """Instance with every utility entry multiplied by ``factor`` in (0, 1]."""
        s = _to_fraction(factor)
        if not 0 < s <= 1:
            raise ValueError("scale factor must lie in (0, 1]")
        utility = [(u0 * s, u1 * s) for u0, u1 in self.utility]
        return build_instance(self.points, self.weights, utility)

    def with_gaps(self, gaps: Sequence[Rational]) -> "TabularInstance":
        """Same support with gap values replaced.

        The replacement keeps ``u(x, 1 - y) = 0`` and sets ``u(x, y)`` to the
        new gap.  Labels are preserved for strictly positive gaps; a zero
        gap at a 0-labelled point flips that label to 1 via the tie rule.
        """
        new_gaps = [_to_fraction(g) for g in gaps]
        if len(new_gaps) != self.n:
            raise ValueError("gap vector length mismatch")
        utility = []
        for label, g in zip(self.labels, new_gaps):
            if g < 0:
                raise ValueError("gaps must be nonnegative")
            utility.append((g, Fraction(0)) if label == 0 else (Fraction(0), g))
        return build_instance(self.points, self.weights, utility)


def build_instance(
    points: Sequence[Point | str],
    weights: Sequence[Rational],
    utility_table: Sequence[Sequence[Rational]],
) -> TabularInstance:
    """Validate raw inputs and derive labels and gaps.

    ``utility_table[i]`` is ``(u(x_i, 0), u(x_i, 1))``.  Raises ``ValueError``
    on dimension mismatch, utilities outside [0, 1], negative weights, or a
    weight vector that does not sum to one within ``WEIGHT_TOLERANCE``.
    """
    pts = tuple(p if isinstance(p, Point) else Point(id=str(p)) for p in points)
    n = len(pts)
    if n == 0:
        raise ValueError("instance needs at least one support point")
    if len(weights) != n or len(utility_table) != n:
        raise ValueError(
            f"dimension mismatch: {n} points, {len(weights)} weights, "
            f"{len(utility_table)} utility rows"
        )

    w = tuple(_to_fraction(x) for x in weights)
    if any(x < 0 for x in w):
        raise ValueError("weights must be nonnegative")
    total = sum(w)
    if abs(total - 1) > WEIGHT_TOLERANCE:
        raise ValueError(f"weights sum to {float(total)!r}, expected 1")

    utility: list[tuple[Fraction, Fraction]] = []
    for i, row in enumerate(utility_table):
        if len(row) != 2:
            raise ValueError(f"utility row {i} must have exactly two entries")
        u0, u1 = (_to_fraction(x) for x in row)
        if not (0 <= u0 <= 1 and 0 <= u1 <= 1):
            raise ValueError(f"utility out of range [0, 1] at point {i}")
        utility.append((u0, u1))

    # Label ties (u0 == u1) resolve to 1, so gaps are always >= 0.
    labels = tuple(1 if u1 >= u0 else 0 for u0, u1 in utility)
    gaps = tuple(
        (u1 - u0) if y == 1 else (u0 - u1) for (u0, u1), y in zip(utility, labels)
    )
    return TabularInstance(pts, w, tuple(utility), labels, gaps)


@dataclass(frozen=True)
class HypothesisClass:
    """A finite, deduplicated set of binary labelings of the support."""

    hypotheses: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.hypotheses:
            raise ValueError("hypothesis class must be non-empty")
        n = len(self.hypotheses[0])
        for h in self.hypotheses:
            if len(h) != n:
                raise ValueError("hypotheses must all have the same length")
            if any(v not in (0, 1) for v in h):
                raise ValueError("hypotheses must be binary labelings")

    @classmethod
    def from_labelings(cls, labelings: Iterable[Sequence[int]]) -> "HypothesisClass":
        seen: dict[tuple[int, ...], None] = {}
        for h in labelings:
            seen.setdefault(tuple(int(v) for v in h), None)
        return cls(tuple(seen.keys()))

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __getitem__(self, idx: int) -> tuple[int, ...]:
        return self.hypotheses[idx]

    def __iter__(self):
        return iter(self.hypotheses)

    def matrix(self) -> np.ndarray:
        return np.array(self.hypotheses, dtype=int)


def induce_threshold_class(instance: TabularInstance) -> HypothesisClass:
    """Dichotomies cut out by one-dimensional sign rules on point coordinates.

    For slope ``a in {-1, +1}`` the induced labeling is ``I[a * coord > 0]``
    (strictly positive maps to 1).  Duplicate labelings collapse.
    """
    coords = []
    for p in instance.points:
        if p.coord is None:
            raise ValueError(f"point {p.id!r} has no coordinate")
        coords.append(p.coord)
    labelings = [
        tuple(1 if a * c > 0 else 0 for c in coords) for a in (+1, -1)
    ]
    return HypothesisClass.from_labelings(labelings)


def population_utility(
    instance: TabularInstance,
    hypothesis: Sequence[int],
    utility: Sequence[Sequence[Rational]] | None = None,
) -> Fraction:
    """Expected utility sum(w_i * u(x_i, f(x_i))) under the instance weights.

    ``utility`` defaults to the instance's own table; pass an alternative
    table with the same shape to evaluate a different utility function on the
    same support.
    """
    if len(hypothesis) != instance.n:
        raise ValueError("hypothesis length mismatch")
    if utility is None:
        table = instance.utility
    else:
        if len(utility) != instance.n:
            raise ValueError("utility table length mismatch")
        table = tuple(
            (_to_fraction(row[0]), _to_fraction(row[1])) for row in utility
        )
    return sum(
        (w * table[i][int(hypothesis[i])] for i, w in enumerate(instance.weights)),
        Fraction(0),
    )


def gap_utility(
    instance: TabularInstance,
    hypothesis: Sequence[int],
    gaps: Sequence[Rational] | None = None,
    labels: Sequence[int] | None = None,
) -> Fraction:
    """Gap form sum(w_i * g_i * I[f(x_i) = y_i]).

    Differs from :func:`population_utility` by the hypothesis-independent
    constant sum(w_i * u(x_i, 1 - y_i)), so argmax sets agree.
    """
    if len(hypothesis) != instance.n:
        raise ValueError("hypothesis length mismatch")
    g = instance.gaps if gaps is None else tuple(_to_fraction(x) for x in gaps)
    y = instance.labels if labels is None else tuple(int(v) for v in labels)
    if len(g) != instance.n or len(y) != instance.n:
        raise ValueError("gap or label vector length mismatch")
    return sum(
        (
            w * g[i]
            for i, w in enumerate(instance.weights)
            if int(hypothesis[i]) == y[i]
        ),
        Fraction(0),
    )


def excess_risk(
    instance: TabularInstance,
    hypothesis: Sequence[int],
    cls: HypothesisClass,
    utility: Sequence[Sequence[Rational]] | None = None,
) -> Fraction:
    """Best-in-class expected utility minus the hypothesis's expected utility.

    Nonnegative whenever ``hypothesis`` belongs to ``cls``; an arbitrary
    labeling may have negative excess risk if it beats the whole class.
    """
    best = max(population_utility(instance, h, utility) for h in cls)
    return best - population_utility(instance, hypothesis, utility)


@dataclass(frozen=True)
class EvaluationReport:
    """Per-hypothesis population utilities and excess risks for one utility."""

    utilities: tuple[Fraction, ...]
    risks: tuple[Fraction, ...]
    best_index: int


def evaluate_class(
    instance: TabularInstance,
    cls: HypothesisClass,
    utility: Sequence[Sequence[Rational]] | None = None,
) -> EvaluationReport:
    utilities = tuple(population_utility(instance, h, utility) for h in cls)
    best = max(utilities)
    best_index = utilities.index(best)
    risks = tuple(best - u for u in utilities)
    return EvaluationReport(utilities, risks, best_index)


def instance_to_json(instance: TabularInstance) -> str:
    """Serialize to the package's interchange format.

    Numbers are emitted as floats with full 17-significant-digit precision,
    so float-valued instances survive a save/load round trip bit-exactly.
    """
    doc = {
        "points": [{"id": p.id, "coord": p.coord} for p in instance.points],
        "weights": [float(w) for w in instance.weights],
        "utility": [[float(u0), float(u1)] for u0, u1 in instance.utility],
    }
    return json.dumps(doc, indent=2)


def instance_from_json(text: str) -> TabularInstance:
    doc = json.loads(text)
    try:
        points = [Point(id=str(p["id"]), coord=p.get("coord")) for p in doc["points"]]
        weights = doc["weights"]
        utility = [(row[0], row[1]) for row in doc["utility"]]
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed instance document: {exc}") from exc
    return build_instance(points, weights, utility)
