"""Random instance generation for experiments and randomized test suites."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .instances import Point, TabularInstance, build_instance

__all__ = ["random_instance"]


def random_instance(
    rng: np.random.Generator,
    n: int,
    with_coords: bool = True,
    zero_base: bool = False,
) -> TabularInstance:
    """Instance with gaps uniform in (0, 1] and exactly normalized weights.

    Labels and the non-preferred base utilities are random unless
    ``zero_base`` forces ``u(x, 1 - y) = 0`` (then the preferred utility
    equals the gap).  Coordinates are nonzero reals so a sign-rule class can
    be induced.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    raw = [Fraction(float(v)) for v in rng.uniform(0.1, 1.0, size=n)]
    total = sum(raw)
    weights = [v / total for v in raw]

    gaps = 1.0 - rng.uniform(0.0, 1.0, size=n)  # uniform in (0, 1]
    labels = rng.integers(0, 2, size=n)
    utility = []
    for g, y in zip(gaps, labels):
        gap = Fraction(float(g))
        base = Fraction(0) if zero_base else Fraction(float(rng.uniform(0, float(1 - gap))))
        hi, lo = base + gap, base
        utility.append((lo, hi) if y == 1 else (hi, lo))

    points = []
    for i in range(n):
        coord = None
        if with_coords:
            coord = float(rng.uniform(0.1, 2.0)) * (1 if rng.random() < 0.5 else -1)
        points.append(Point(f"x{i}", coord))
    return build_instance(points, weights, utility)
