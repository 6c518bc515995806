"""Consistent-gap polytopes and the instance-adaptive randomized policy.

Answering every canonical reduced query at order k pins the true gap vector
down to a polytope inside [0, 1]^n.  A policy that must work for *every*
gap vector in that polytope plays a zero-sum game: it mixes over hypotheses
to minimize the worst-case excess risk while an adversary picks the
consistent gaps.  ``solve_robust_policy`` solves that game with a double
oracle: restricted matrix games alternate with exact best-response linear
programs over the polytope.

``local_modulus`` measures how far apart maximizers of two consistent gap
vectors can drift; halving the "lower" mode bounds every policy's risk from
below, while the "upper" mode bounds the solved game value from above.

Everything decision-relevant is exact rational arithmetic; grids and moduli
use floats.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import AmbiguousLabelError, CapacityError, SolverError
from .instances import HypothesisClass, TabularInstance
from .oracle import ComparisonOracle, enumerate_reduced_queries, query_from_coefficients
from .simplexlp import LPInfeasible, solve_lp

__all__ = [
    "ConsistentPolytope",
    "RobustPolicy",
    "build_polytope",
    "sample_polytope",
    "payoff",
    "solve_robust_policy",
    "local_modulus",
    "grid_game_value",
]

PHASE_ENUM = "robust-enumeration"
STRICT_EPS = Fraction(1, 10**9)

GapVector = tuple[Fraction, ...]


class ConsistentPolytope:
    """Gap vectors in [0, 1]^n consistent with recorded query responses.

    Each constraint is a canonical coefficient vector c with the noiseless
    response r; r = 1 means ``c . g >= 0`` and r = 0 means ``c . g < 0``,
    relaxed to ``c . g <= -eps`` so the region is closed for the solvers.
    """

    def __init__(
        self,
        n: int,
        constraints: Sequence[tuple[tuple[int, ...], int]],
        eps: Fraction = STRICT_EPS,
        point_indices: tuple[int, ...] | None = None,
    ):
        self.n = n
        self.constraints = tuple((tuple(c), int(r)) for c, r in constraints)
        self.eps = eps
        self.point_indices = point_indices or tuple(range(n))
        self._kept: list[tuple[tuple[Fraction, ...], Fraction]] | None = None
        self._vertices: tuple[GapVector, ...] | None = None

    # -- halfspace views ---------------------------------------------------

    def inequality_rows(self) -> list[tuple[tuple[Fraction, ...], Fraction]]:
        """All rows (a, beta) meaning a . g <= beta, box bounds included."""
        rows: list[tuple[tuple[Fraction, ...], Fraction]] = []
        for c, r in self.constraints:
            if r == 1:
                rows.append((tuple(Fraction(-v) for v in c), Fraction(0)))
            else:
                rows.append((tuple(Fraction(v) for v in c), -self.eps))
        for i in range(self.n):
            e = [Fraction(0)] * self.n
            e[i] = Fraction(1)
            rows.append((tuple(e), Fraction(1)))  # g_i <= 1
            e = [Fraction(0)] * self.n
            e[i] = Fraction(-1)
            rows.append((tuple(e), Fraction(0)))  # g_i >= 0
        return rows

    def rows_float(self) -> tuple[np.ndarray, np.ndarray]:
        rows = self.inequality_rows()
        A = np.array([[float(v) for v in a] for a, _ in rows])
        b = np.array([float(beta) for _, beta in rows])
        return A, b

    def contains(self, g: Sequence[Fraction]) -> bool:
        """Exact membership test."""
        if len(g) != self.n:
            raise ValueError("gap vector length mismatch")
        gv = [Fraction(x) for x in g]
        if any(x < 0 or x > 1 for x in gv):
            return False
        for c, r in self.constraints:
            dot = sum(ci * gi for ci, gi in zip(c, gv))
            if r == 1 and dot < 0:
                return False
            if r == 0 and dot > -self.eps:
                return False
        return True

    def contains_array(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Vectorized float membership for candidate grids."""
        A, b = self.rows_float()
        mask = np.ones(len(points), dtype=bool)
        chunk = 65536
        for start in range(0, len(points), chunk):
            block = points[start : start + chunk]
            mask[start : start + chunk] = (block @ A.T <= b + tol).all(axis=1)
        return mask

    # -- reduction, vertices, exact maximization ---------------------------

    def _deduped_rows(self) -> list[tuple[tuple[Fraction, ...], Fraction]]:
        """One row per direction, keeping the tightest offset."""
        best: dict[tuple[Fraction, ...], Fraction] = {}
        for a, beta in self.inequality_rows():
            denom_lcm = 1
            for v in a:
                denom_lcm = denom_lcm * v.denominator // gcd(denom_lcm, v.denominator)
            ints = [int(v * denom_lcm) for v in a]
            g = 0
            for v in ints:
                g = gcd(g, abs(v))
            if g == 0:
                continue
            scale = Fraction(denom_lcm, g)
            key = tuple(v * scale for v in a)
            val = beta * scale
            if key not in best or val < best[key]:
                best[key] = val
        return [(k, v) for k, v in sorted(best.items())]

    def _reduced_rows(self) -> list[tuple[tuple[Fraction, ...], Fraction]]:
        """Facet candidates via the polar-hull reduction, kept conservative.

        With a strict interior point, constraint i supports a facet exactly
        when its polar point ``a_i / (b_i - a_i . x0)`` is a vertex of the
        polar hull, so the hull's vertex set prunes thousands of redundant
        rows in one convex-hull call.  Float-precision drops are repaired by
        the exact verification loop in ``maximize``; polytopes without an
        interior fall back to a per-row LP filter.
        """
        if self._kept is not None:
            return self._kept
        rows = self._deduped_rows()
        if len(rows) <= 2 * self.n + 2:
            self._kept = rows
            return self._kept
        A = np.array([[float(v) for v in a] for a, _ in rows])
        b = np.array([float(beta) for _, beta in rows])
        center = self._chebyshev_center(A, b)
        if center is not None:
            from scipy.spatial import ConvexHull, QhullError

            slack = b - A @ center
            polar = A / slack[:, None]
            try:
                hull = ConvexHull(polar, qhull_options="QJ")
                self._kept = [rows[i] for i in sorted(hull.vertices)]
                return self._kept
            except QhullError:
                pass
        kept: list[tuple[tuple[Fraction, ...], Fraction]] = []
        for i, (a_i, beta_i) in enumerate(rows):
            others = np.ones(len(rows), dtype=bool)
            others[i] = False
            res = linprog(
                -A[i],
                A_ub=A[others],
                b_ub=b[others],
                bounds=[(0.0, 1.0)] * self.n,
                method="highs",
            )
            if res.status == 0 and -res.fun <= b[i] - 1e-7 * (1.0 + abs(b[i])):
                continue  # certified redundant
            kept.append((a_i, beta_i))
        self._kept = kept
        return kept

    def _chebyshev_center(self, A: np.ndarray, b: np.ndarray) -> np.ndarray | None:
        """Strictly interior point, or None when the interior is too thin."""
        norms = np.linalg.norm(A, axis=1)
        res = linprog(
            np.concatenate([np.zeros(self.n), [-1.0]]),
            A_ub=np.hstack([A, norms[:, None]]),
            b_ub=b,
            bounds=[(None, None)] * self.n + [(0.0, None)],
            method="highs",
        )
        if res.status != 0 or res.x[-1] <= 1e-9:
            return None
        return res.x[: self.n]

    def maximize(self, objective: Sequence[Fraction]) -> tuple[Fraction, GapVector]:
        """Exact maximum of a linear objective over the polytope.

        Solves a dense exact simplex over the reduced halfspace set, then
        verifies the optimum against every original constraint, re-adding
        violated rows and re-solving until the point is certified feasible.
        """
        obj = [Fraction(v) for v in objective]
        if len(obj) != self.n:
            raise ValueError("objective length mismatch")
        rows = list(self._reduced_rows())
        while True:
            A = [list(a) for a, _ in rows]
            b = [beta for _, beta in rows]
            try:
                res = solve_lp(A, b, obj)
            except LPInfeasible:
                raise LPInfeasible("consistent polytope is empty") from None
            g = res.x
            violated = [
                (a, beta)
                for a, beta in self.inequality_rows()
                if sum(ai * gi for ai, gi in zip(a, g)) > beta
            ]
            if not violated:
                self._kept = rows
                return res.value, g
            rows.extend(violated)

    def vertices(self) -> tuple[GapVector, ...]:
        """Exact vertices: feasible intersections of n reduced halfplanes."""
        if self._vertices is not None:
            return self._vertices
        from .simplexlp import solve_linear_system

        rows = self._reduced_rows()
        all_rows = self.inequality_rows()
        found: dict[GapVector, None] = {}
        for combo in itertools.combinations(range(len(rows)), self.n):
            M = [list(rows[i][0]) for i in combo]
            v = [rows[i][1] for i in combo]
            point = solve_linear_system(M, v)
            if point is None:
                continue
            if any(x < 0 or x > 1 for x in point):
                continue
            ok = all(
                sum(ai * gi for ai, gi in zip(a, point)) <= beta
                for a, beta in all_rows
            )
            if ok:
                found.setdefault(tuple(point), None)
        self._vertices = tuple(found.keys())
        return self._vertices


def build_polytope(
    oracle: ComparisonOracle,
    cap: int = 10**6,
    eps: Fraction = STRICT_EPS,
    max_support: int = 5,
    max_order: int = 16,
) -> ConsistentPolytope:
    """Answer every canonical reduced query and collect the constraints.

    Requires a noiseless oracle and strictly positive true gaps (a zero gap
    leaves its label ambiguous, which the gap parametrization cannot carry).
    Charges one ledger call per canonical query to the enumeration phase.
    The support/order guards keep the exhaustive enumeration at desk scale;
    raise them explicitly to go beyond, subject to the hard cap.
    """
    if not oracle.config.noiseless:
        raise ValueError("polytope construction requires a noiseless oracle")
    instance = oracle.instance
    if instance.n > max_support or oracle.k > max_order:
        raise CapacityError(
            f"polytope enumeration limited to {max_support} points at order "
            f"{max_order} by default (got n={instance.n}, k={oracle.k})"
        )
    if any(g == 0 for g in instance.gaps):
        raise AmbiguousLabelError(
            "zero utility gap: label is ambiguous under the gap parametrization"
        )
    constraints = []
    for c in enumerate_reduced_queries(instance.n, oracle.k, cap=cap):
        q = query_from_coefficients(c, instance.labels)
        r = oracle.answer(q, PHASE_ENUM)
        constraints.append((c, r))
    poly = ConsistentPolytope(instance.n, constraints, eps=eps)
    if not poly.contains(instance.gaps):
        raise ValueError("true gap vector violates the relaxed polytope")
    return poly


def sample_polytope(
    polytope: ConsistentPolytope, indices: Sequence[int]
) -> ConsistentPolytope:
    """Restrict to queries supported on the given sample indices."""
    idx = sorted(set(int(i) for i in indices))
    if not idx:
        raise ValueError("sample must be non-empty")
    if idx[0] < 0 or idx[-1] >= polytope.n:
        raise ValueError("sample index outside the support")
    pos = {orig: j for j, orig in enumerate(idx)}
    constraints = []
    for c, r in polytope.constraints:
        if all(v == 0 for i, v in enumerate(c) if i not in pos):
            projected = tuple(c[i] for i in idx)
            constraints.append((projected, r))
    return ConsistentPolytope(
        len(idx),
        constraints,
        eps=polytope.eps,
        point_indices=tuple(polytope.point_indices[i] for i in idx),
    )


def _utilities(
    weights: Sequence[Fraction],
    labels: Sequence[int],
    g: Sequence[Fraction],
    cls: HypothesisClass,
) -> list[Fraction]:
    return [
        sum(
            (w * gi for w, gi, hi, yi in zip(weights, g, h, labels) if hi == yi),
            Fraction(0),
        )
        for h in cls
    ]


def payoff(
    f: Sequence[int],
    g: Sequence[Fraction],
    weights: Sequence[Fraction],
    labels: Sequence[int],
    cls: HypothesisClass,
) -> Fraction:
    """Gap-form excess risk of hypothesis f when the true gaps are g."""
    vals = _utilities(weights, labels, [Fraction(x) for x in g], cls)
    own = sum(
        (w * Fraction(gi) for w, gi, hi, yi in zip(weights, g, f, labels) if hi == yi),
        Fraction(0),
    )
    return max(vals) - own


@dataclass(frozen=True)
class RobustPolicy:
    """Solved mixed policy for the consistent-gap game.

    ``adversary_support`` lists the generated columns as (gap vector, index
    of the adversary's paired best-response hypothesis, mixture weight).
    ``worst_case`` is the certified sup over the whole polytope of the
    policy's expected excess risk; it exceeds ``game_value`` by at most the
    convergence gap.
    """

    probabilities: tuple[Fraction, ...]
    game_value: Fraction
    worst_case: Fraction
    adversary_support: tuple[tuple[GapVector, int, Fraction], ...]
    convergence_gap: Fraction
    rounds: int

    def mean_adversary_gap(self) -> GapVector:
        n = len(self.adversary_support[0][0])
        mean = [Fraction(0)] * n
        for g, _, weight in self.adversary_support:
            for i in range(n):
                mean[i] += weight * g[i]
        return tuple(mean)


def _matrix_game(
    payoffs: list[list[Fraction]],
) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...], Fraction]:
    """Exact minimax of a nonnegative matrix game (rows minimize)."""
    F, J = len(payoffs), len(payoffs[0])
    rows = [[payoffs[f][j] for f in range(F)] + [Fraction(-1)] for j in range(J)]
    rows.append([Fraction(1)] * F + [Fraction(0)])
    rows.append([Fraction(-1)] * F + [Fraction(0)])
    rhs = [Fraction(0)] * J + [Fraction(1), Fraction(-1)]
    obj = [Fraction(0)] * F + [Fraction(-1)]
    res = solve_lp(rows, rhs, obj)
    p, value = res.x[:F], res.x[F]

    rows_a = [
        [-payoffs[f][j] for j in range(J)] + [Fraction(1)] for f in range(F)
    ]
    rows_a.append([Fraction(1)] * J + [Fraction(0)])
    rows_a.append([Fraction(-1)] * J + [Fraction(0)])
    rhs_a = [Fraction(0)] * F + [Fraction(1), Fraction(-1)]
    obj_a = [Fraction(0)] * J + [Fraction(1)]
    res_a = solve_lp(rows_a, rhs_a, obj_a)
    q, value_a = res_a.x[:J], res_a.x[J]
    assert value == value_a, "exact LP duality violated"
    return p, q, value


def solve_robust_policy(
    instance: TabularInstance,
    polytope: ConsistentPolytope,
    cls: HypothesisClass,
    tolerance: Fraction | float = Fraction(1, 10**6),
    max_rounds: int = 100,
) -> RobustPolicy:
    """Double-oracle solution of the consistent-gap zero-sum game.

    Alternates between (a) solving the restricted matrix game over the
    current adversary columns exactly and (b) best-response linear programs
    over the polytope for each hypothesis, adding the best new column.
    Terminates when the best response improves on the restricted game value
    by at most ``tolerance``; raises :class:`SolverError` past the round cap.
    Initial columns are the instance's true gaps plus every feasible box
    corner.
    """
    tol = Fraction(tolerance) if not isinstance(tolerance, Fraction) else tolerance
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    weights, labels = instance.weights, instance.labels
    if polytope.n != instance.n:
        raise ValueError("polytope dimension does not match the instance")

    columns: list[GapVector] = [tuple(instance.gaps)]
    for corner in itertools.product((Fraction(0), Fraction(1)), repeat=polytope.n):
        if polytope.contains(corner):
            columns.append(corner)
    seen = set(columns)

    mask = [
        [Fraction(1) if h[i] == labels[i] else Fraction(0) for i in range(instance.n)]
        for h in cls
    ]
    for round_no in range(1, max_rounds + 1):
        payoffs = [[payoff(cls[f], g, weights, labels, cls) for g in columns]
                   for f in range(len(cls))]
        p, q, value = _matrix_game(payoffs)

        covered = [
            sum(p[f] * mask[f][i] for f in range(len(cls)))
            for i in range(instance.n)
        ]
        best_val: Fraction | None = None
        best_point: GapVector | None = None
        for f2 in range(len(cls)):
            obj = [weights[i] * (mask[f2][i] - covered[i]) for i in range(instance.n)]
            val, point = polytope.maximize(obj)
            if best_val is None or val > best_val:
                best_val, best_point = val, point

        gap = best_val - value
        if gap <= tol:
            support = tuple(
                (g, _best_response_index(g, weights, labels, cls), q[j])
                for j, g in enumerate(columns)
            )
            return RobustPolicy(
                probabilities=p,
                game_value=value,
                worst_case=best_val,
                adversary_support=support,
                convergence_gap=gap,
                rounds=round_no,
            )
        if best_point in seen:
            # A repeated column cannot raise the restricted value further.
            raise SolverError("double oracle stalled on a repeated column")
        columns.append(best_point)
        seen.add(best_point)
    raise SolverError(f"double oracle did not converge in {max_rounds} rounds")


def _best_response_index(
    g: GapVector,
    weights: Sequence[Fraction],
    labels: Sequence[int],
    cls: HypothesisClass,
) -> int:
    vals = _utilities(weights, labels, g, cls)
    return vals.index(max(vals))


def _candidate_points(
    polytope: ConsistentPolytope,
    grid_step: Fraction,
    extra_points: Iterable[Sequence[Fraction]],
    max_grid: int = 5_000_000,
) -> tuple[np.ndarray, int]:
    """Vertices + extras (pinned) followed by the feasible grid points."""
    steps = int(1 / grid_step)
    if (steps + 1) ** polytope.n > max_grid:
        raise CapacityError(
            f"modulus grid of {(steps + 1) ** polytope.n} points exceeds the cap"
        )
    axes = [np.linspace(0.0, 1.0, steps + 1)] * polytope.n
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    grid = grid[polytope.contains_array(grid)]
    verts = np.array(
        [[float(v) for v in vert] for vert in polytope.vertices()]
    ).reshape(-1, polytope.n)
    extras = np.array(
        [[float(v) for v in point] for point in extra_points]
    ).reshape(-1, polytope.n)
    pinned = len(verts) + len(extras)
    return np.concatenate([verts, extras, grid], axis=0), pinned


def local_modulus(
    instance: TabularInstance,
    polytope: ConsistentPolytope,
    cls: HypothesisClass,
    mode: str,
    grid_step: Fraction = Fraction(1, 64),
    extra_points: Iterable[Sequence[Fraction]] = (),
    pair_budget: int = 4000,
) -> float:
    """Worst drift between maximizers of consistent gap vectors.

    The sup runs over candidate points: exact polytope vertices, a uniform
    grid refinement (vertex-only search misses selector switches on interior
    hyperplanes), and any caller-supplied extras.

    mode="upper": sup over pairs of U(f_{g1}; g1) - U(f_{g2}; g1).
    mode="lower": sup over pairs of U(f_{g1}; g1) - U(f_mid; g1) with
    f_mid the maximizer at the pair midpoint; halving this bounds every
    policy's worst-case risk from below.  The lower search walks explicit
    pairs and caps the candidate count at ``pair_budget`` (subsampling only
    ever shrinks the reported sup, which keeps that bound valid).
    """
    if mode not in ("lower", "upper"):
        raise ValueError("mode must be 'lower' or 'upper'")
    cand, pinned = _candidate_points(polytope, grid_step, extra_points)
    if len(cand) == 0:
        return 0.0
    w = instance.weights_array()
    M = cls.matrix()
    match = (M == instance.labels_array()[None, :]).astype(float)  # (F, n)
    V = (cand * w[None, :]) @ match.T  # (m, F)
    sel = V.argmax(axis=1)
    best = V[np.arange(len(V)), sel]

    if mode == "upper":
        achieved = np.unique(sel)
        return float((best - V[:, achieved].min(axis=1)).max())

    if len(cand) > pair_budget:
        stride = int(np.ceil(len(cand) / pair_budget))
        keep = np.zeros(len(cand), dtype=bool)
        keep[::stride] = True
        keep[:pinned] = True  # vertices and extras always stay
        V = V[keep]
        sel = sel[keep]
        best = best[keep]

    worst = 0.0
    chunk = 64
    for start in range(0, len(V), chunk):
        block = V[start : start + chunk]  # (b, F)
        sums = block[:, None, :] + V[None, :, :]  # (b, m, F)
        mid_sel = sums.argmax(axis=2)  # (b, m)
        drops = best[start : start + chunk, None] - np.take_along_axis(
            block, mid_sel, axis=1
        )
        worst = max(worst, float(drops.max()))
    return worst


def grid_game_value(
    instance: TabularInstance,
    polytope: ConsistentPolytope,
    cls: HypothesisClass,
    policy_step: float = 1e-3,
    gap_step: float = 1e-3,
) -> float:
    """Brute-force game value for two-hypothesis classes (validation only).

    Scans a policy grid against every feasible gap-grid point and returns
    min over policies of the worst expected excess risk.
    """
    if len(cls) != 2:
        raise ValueError("grid solver handles exactly two hypotheses")
    steps = int(round(1 / gap_step))
    axes = [np.linspace(0.0, 1.0, steps + 1)] * polytope.n
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    grid = grid[polytope.contains_array(grid)]
    w = instance.weights_array()
    match = (cls.matrix() == instance.labels_array()[None, :]).astype(float)
    V = (grid * w[None, :]) @ match.T  # (m, 2)
    top = V.max(axis=1)
    pay = top[:, None] - V  # payoff of each hypothesis per point
    qs = np.linspace(0.0, 1.0, int(round(1 / policy_step)) + 1)
    best = np.inf
    for q in qs:
        worst = (q * pay[:, 0] + (1 - q) * pay[:, 1]).max()
        best = min(best, worst)
    return float(best)
