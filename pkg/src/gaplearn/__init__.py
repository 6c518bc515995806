"""Learning binary decision rules when utilities are only available by comparison.

The pipeline: simulate a k-wise comparison oracle over a finite-support
instance, elicit per-point utility gaps as dyadic multiples of the unknown
largest gap, plug the estimates into an empirical utility maximizer, and
audit the resulting excess risk.  Hard-instance constructions and a robust
game solver over the consistent-gap polytope round out the toolkit.
"""

from .elicitation import (
    GapEstimate,
    elicit_labels,
    estimate_gaps,
    estimate_gaps_noisy,
    find_max_gap,
    repeat_count,
)
from .errors import (
    AmbiguousLabelError,
    CapacityError,
    ConfigError,
    GapLearnError,
    SolverError,
)
from .generate import random_instance
from .hardness import (
    AdaptivityGapBundle,
    HardInstancePair,
    adaptivity_gap_instance,
    hard_pair_instance,
    indistinguishable,
)
from .instances import (
    EvaluationReport,
    HypothesisClass,
    Point,
    TabularInstance,
    build_instance,
    evaluate_class,
    excess_risk,
    gap_utility,
    induce_threshold_class,
    instance_from_json,
    instance_to_json,
    population_utility,
)
from .learner import (
    BoundReport,
    PluginResult,
    Sample,
    bound_report,
    bound_report_table,
    draw_sample,
    erm,
    plugin,
    plugin_from_gaps,
    population_sample,
    rademacher_exact,
    rademacher_mc,
)
from .oracle import (
    ComparisonOracle,
    OracleConfig,
    Query,
    QueryLedger,
    enumerate_reduced_queries,
    query_from_coefficients,
    reduce_query,
)
from .robust import (
    ConsistentPolytope,
    RobustPolicy,
    build_polytope,
    grid_game_value,
    local_modulus,
    payoff,
    sample_polytope,
    solve_robust_policy,
)

__version__ = "0.1.0"
