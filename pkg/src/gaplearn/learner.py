"""Decision learners over elicited gaps, and the accompanying risk bounds.

Two learners share one argmax core: the oracle-free ERM (needs true gaps)
and the plug-in learner (consumes symbolic gap estimates).  Both maximize a
gap-weighted correct-prediction score, which agrees with full-utility
maximization up to a hypothesis-independent constant, and both break ties
toward the lowest hypothesis index.

`bound_report` is the analysis path: with ground truth in hand it evaluates
the uniform-convergence and estimation-error terms of the excess-risk
decomposition exactly and checks the measured risk against each bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .elicitation import GapEstimate
from .instances import (
    HypothesisClass,
    TabularInstance,
    excess_risk,
    population_utility,
)

__all__ = [
    "Sample",
    "population_sample",
    "draw_sample",
    "PluginResult",
    "BoundReport",
    "erm",
    "plugin",
    "plugin_from_gaps",
    "bound_report",
    "bound_report_table",
    "rademacher_mc",
    "rademacher_exact",
]


@dataclass(frozen=True)
class Sample:
    """An empirical measure on the support: indices plus rational weights.

    An i.i.d. draw of size m keeps the multiset as drawn (repeated indices,
    weight 1/m each) so that sign vectors in the Rademacher estimate get one
    independent sign per drawn point.  The population itself is a Sample
    carrying the instance weights.
    """

    indices: tuple[int, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if not self.indices:
            raise ValueError("sample must be non-empty")
        if len(self.indices) != len(self.weights):
            raise ValueError("sample index/weight length mismatch")


def population_sample(instance: TabularInstance) -> Sample:
    return Sample(tuple(range(instance.n)), instance.weights)


def draw_sample(instance: TabularInstance, size: int, rng: np.random.Generator) -> Sample:
    """I.i.d. draw of the given size from the instance weights."""
    if size < 1:
        raise ValueError("sample size must be >= 1")
    draws = rng.choice(instance.n, size=size, p=instance.weights_array())
    indices = tuple(sorted(int(d) for d in draws))
    return Sample(indices, (Fraction(1, size),) * size)


def _score(
    sample: Sample,
    labels: Sequence[int],
    gaps: Sequence[Fraction],
    hypothesis: Sequence[int],
) -> Fraction:
    return sum(
        (
            w * gaps[i]
            for i, w in zip(sample.indices, sample.weights)
            if int(hypothesis[i]) == int(labels[i])
        ),
        Fraction(0),
    )


def _argmax_scores(scores: Sequence[Fraction]) -> tuple[int, tuple[int, ...]]:
    best = max(scores)
    ties = tuple(i for i, s in enumerate(scores) if s == best)
    return ties[0], ties


def erm(
    sample: Sample,
    labels: Sequence[int],
    gaps: Sequence[Fraction],
    cls: HypothesisClass,
) -> int:
    """Index of the gap-weighted empirical utility maximizer.

    ``argmax_f sum_j w_j g_j I[f(x_j) = y_j]`` over the sampled points, ties
    to the lowest index.  Equals the full-form empirical maximizer because
    the two objectives differ by an f-independent constant.
    """
    scores = [_score(sample, labels, gaps, h) for h in cls]
    return _argmax_scores(scores)[0]


@dataclass(frozen=True)
class PluginResult:
    """Plug-in learner output: chosen hypothesis plus its argmax tie set."""

    chosen: int
    score: Fraction
    tie_set: tuple[int, ...]
    provenance: str


def plugin(
    sample: Sample,
    estimate: GapEstimate,
    cls: HypothesisClass,
) -> PluginResult:
    """Empirical maximizer against symbolic gap estimates.

    Uses the estimate's dyadic coefficients directly; the argmax is
    invariant to the unknown positive unit, so no numeric gap is needed.
    """
    if len(cls[0]) != estimate.n:
        raise ValueError("hypothesis length does not match the estimate")
    coeffs = estimate.effective_coeffs()
    scores = [_score(sample, estimate.labels, coeffs, h) for h in cls]
    chosen, ties = _argmax_scores(scores)
    return PluginResult(chosen, scores[chosen], ties, estimate.provenance)


def plugin_from_gaps(
    sample: Sample,
    labels: Sequence[int],
    gaps: Sequence[Fraction],
    cls: HypothesisClass,
) -> PluginResult:
    """Plug-in with explicit (e.g. ground-truth) gap values."""
    scores = [_score(sample, labels, gaps, h) for h in cls]
    chosen, ties = _argmax_scores(scores)
    return PluginResult(chosen, scores[chosen], ties, "ground-truth")


@dataclass(frozen=True)
class BoundReport:
    """Every term of the excess-risk decomposition, computed exactly.

    Bounds: ``bound_mismatch`` uses the prediction-mismatch fraction between
    the ERM and plug-in choices; ``bound_erm_error`` and ``bound_budget``
    use the ERM's weighted error fraction, the latter with the a-priori
    estimation budget ``2 * max_gap / k`` in place of the realized error.
    The signed estimation error is reported for transparency; it is
    nonpositive for upper estimates and is not a bound term.
    """

    excess_risk: Fraction
    uniform_convergence: Fraction
    estimation_error_abs: Fraction
    estimation_error_signed: Fraction
    mismatch_fraction: Fraction
    erm_error_fraction: Fraction
    bound_mismatch: Fraction
    bound_erm_error: Fraction
    bound_budget: Fraction | None
    erm_index: int
    plugin_index: int

    def to_dict(self) -> dict:
        out = {
            "excess_risk": float(self.excess_risk),
            "uniform_convergence": float(self.uniform_convergence),
            "estimation_error_abs": float(self.estimation_error_abs),
            "estimation_error_signed": float(self.estimation_error_signed),
            "mismatch_fraction": float(self.mismatch_fraction),
            "erm_error_fraction": float(self.erm_error_fraction),
            "bound_mismatch": float(self.bound_mismatch),
            "bound_erm_error": float(self.bound_erm_error),
            "bound_budget": None if self.bound_budget is None else float(self.bound_budget),
            "erm_index": self.erm_index,
            "plugin_index": self.plugin_index,
        }
        return out


def bound_report(
    instance: TabularInstance,
    sample: Sample,
    estimate: GapEstimate,
    cls: HypothesisClass,
    oracle_order: int | None = None,
) -> BoundReport:
    """Exact audit of the plug-in's excess risk against its upper bounds.

    Requires ground truth (the instance) and is meant for tests and
    analysis, not for the learner path.  ``oracle_order`` enables the
    budget-form bound ``2 * max_gap / k``.
    """
    if list(estimate.labels) != list(instance.labels):
        raise ValueError("estimate labels disagree with the instance")
    unit = instance.gaps[estimate.i_max]
    est_gaps = estimate.scaled_gaps(unit)

    plug = plugin(sample, estimate, cls)
    erm_idx = erm(sample, instance.labels, instance.gaps, cls)
    f_hat = cls[plug.chosen]
    f_erm = cls[erm_idx]

    risk = excess_risk(instance, f_hat, cls)

    # sup_f |U(f) - U_hat(f)|: population vs sample utility, full form.
    uc = Fraction(0)
    for h in cls:
        u_pop = population_utility(instance, h)
        u_emp = sum(
            (
                w * instance.utility[i][h[i]]
                for i, w in zip(sample.indices, sample.weights)
            ),
            Fraction(0),
        )
        uc = max(uc, abs(u_pop - u_emp))

    on_sample = [(i, w) for i, w in zip(sample.indices, sample.weights)]
    est_abs = max(abs(est_gaps[i] - instance.gaps[i]) for i, _ in on_sample)
    est_signed = max(instance.gaps[i] - est_gaps[i] for i, _ in on_sample)
    mismatch = sum((w for i, w in on_sample if f_erm[i] != f_hat[i]), Fraction(0))
    erm_err = sum(
        (w for i, w in on_sample if f_erm[i] != instance.labels[i]), Fraction(0)
    )

    bound_mismatch = 2 * uc + 2 * est_abs * mismatch
    bound_erm_error = 2 * uc + 2 * est_abs * erm_err
    bound_budget = None
    if oracle_order is not None:
        budget = Fraction(2, oracle_order) * instance.max_gap
        bound_budget = 2 * uc + budget * erm_err

    return BoundReport(
        excess_risk=risk,
        uniform_convergence=uc,
        estimation_error_abs=est_abs,
        estimation_error_signed=est_signed,
        mismatch_fraction=mismatch,
        erm_error_fraction=erm_err,
        bound_mismatch=bound_mismatch,
        bound_erm_error=bound_erm_error,
        bound_budget=bound_budget,
        erm_index=erm_idx,
        plugin_index=plug.chosen,
    )


def bound_report_table(
    instance: TabularInstance,
    sample: Sample,
    utility_estimate: Sequence[Sequence[Fraction]],
    cls: HypothesisClass,
) -> BoundReport:
    """Audit variant for a full estimated utility table.

    The plug-in here maximizes the estimated empirical utility directly and
    the estimation error is the on-sample sup norm
    ``max_i max_y |u(x_i, y) - est(x_i, y)|``.  Only the mismatch-form bound
    is meaningful for two-sided estimates; the ERM-error forms are reported
    with the sup norm for reference.
    """
    est = [
        (Fraction(row[0]), Fraction(row[1])) for row in utility_estimate
    ]
    if len(est) != instance.n:
        raise ValueError("estimated utility table length mismatch")

    def emp(table, h) -> Fraction:
        return sum(
            (
                w * table[i][h[i]]
                for i, w in zip(sample.indices, sample.weights)
            ),
            Fraction(0),
        )

    plug_scores = [emp(est, h) for h in cls]
    plug_idx, _ = _argmax_scores(plug_scores)
    erm_scores = [emp(instance.utility, h) for h in cls]
    erm_idx, _ = _argmax_scores(erm_scores)
    f_hat, f_erm = cls[plug_idx], cls[erm_idx]

    risk = excess_risk(instance, f_hat, cls)
    uc = Fraction(0)
    for h in cls:
        uc = max(uc, abs(population_utility(instance, h) - emp(instance.utility, h)))
    on_sample = list(zip(sample.indices, sample.weights))
    sup_err = max(
        max(abs(instance.utility[i][y] - est[i][y]) for y in (0, 1))
        for i, _ in on_sample
    )
    mismatch = sum((w for i, w in on_sample if f_erm[i] != f_hat[i]), Fraction(0))
    erm_err = sum(
        (w for i, w in on_sample if f_erm[i] != instance.labels[i]), Fraction(0)
    )
    est_gaps = [
        (est[i][1] - est[i][0]) if instance.labels[i] == 1 else (est[i][0] - est[i][1])
        for i in range(instance.n)
    ]
    signed = max(instance.gaps[i] - est_gaps[i] for i, _ in on_sample)
    return BoundReport(
        excess_risk=risk,
        uniform_convergence=uc,
        estimation_error_abs=sup_err,
        estimation_error_signed=signed,
        mismatch_fraction=mismatch,
        erm_error_fraction=erm_err,
        bound_mismatch=2 * uc + 2 * sup_err * mismatch,
        bound_erm_error=2 * uc + 2 * sup_err * erm_err,
        bound_budget=None,
        erm_index=erm_idx,
        plugin_index=plug_idx,
    )


def _class_utilities(
    instance: TabularInstance, sample: Sample, cls: HypothesisClass
) -> np.ndarray:
    """u(x_j, f(x_j)) per (sampled point, hypothesis), as floats."""
    rows = []
    for i in sample.indices:
        u0, u1 = instance.utility[i]
        rows.append([float(u1) if h[i] == 1 else float(u0) for h in cls])
    return np.array(rows)


def rademacher_mc(
    instance: TabularInstance,
    sample: Sample,
    cls: HypothesisClass,
    num_draws: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo empirical Rademacher complexity of the class on the sample.

    Averages ``max_f |(1/m) sum_j eps_j u(x_j, f(x_j))|`` over ``num_draws``
    uniform sign vectors; the inner sup is an exact max since the class is
    finite.  Returns (mean, standard error).  Sign draws are per sampled
    point with the sample's multiplicities folded into the weights.
    """
    if num_draws < 1:
        raise ValueError("num_draws must be >= 1")
    rng = np.random.default_rng(seed)
    m = len(sample.indices)
    w = np.array([float(x) for x in sample.weights])
    U = _class_utilities(instance, sample, cls)  # (m, |cls|)
    signs = rng.integers(0, 2, size=(num_draws, m)) * 2 - 1
    # (draws, |cls|): sum_j eps_j w_j u(x_j, f(x_j))
    vals = np.abs(signs @ (U * w[:, None]))
    sup = vals.max(axis=1)
    mean = float(sup.mean())
    stderr = float(sup.std(ddof=1) / np.sqrt(num_draws)) if num_draws > 1 else 0.0
    return mean, stderr


def rademacher_exact(
    instance: TabularInstance, sample: Sample, cls: HypothesisClass
) -> float:
    """Exact expectation over all 2^m sign vectors (test oracle, m <= 20)."""
    m = len(sample.indices)
    if m > 20:
        raise ValueError("exact enumeration limited to 20 sampled points")
    w = np.array([float(x) for x in sample.weights])
    U = _class_utilities(instance, sample, cls) * w[:, None]
    total = 0.0
    for mask in range(2**m):
        eps = np.array([1 if mask >> j & 1 else -1 for j in range(m)])
        total += np.abs(eps @ U).max()
    return total / 2**m
