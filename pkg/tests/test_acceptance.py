"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria execute.  Tolerances are pinned here, not configurable.
"""

import csv
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from gaplearn import (
    ComparisonOracle,
    HypothesisClass,
    OracleConfig,
    Query,
    adaptivity_gap_instance,
    bound_report,
    bound_report_table,
    build_polytope,
    draw_sample,
    estimate_gaps,
    estimate_gaps_noisy,
    excess_risk,
    grid_game_value,
    hard_pair_instance,
    indistinguishable,
    induce_threshold_class,
    local_modulus,
    plugin,
    population_sample,
    random_instance,
    reduce_query,
    solve_robust_policy,
)
from gaplearn.cli import fit_rate, main

F = Fraction


@contextmanager
def criterion(number: int, text: str):
    try:
        yield
    except BaseException:
        print(f"\n[FAIL] criterion {number}: {text}")
        raise
    print(f"\n[PASS] criterion {number}: {text}")


def test_criterion_1_estimation_error_and_query_budget():
    with criterion(1, "gap estimates within 2*max_gap/k with exact query budget"):
        rng = np.random.default_rng(101)
        started = time.perf_counter()
        orders = (2, 4, 8, 16, 32)
        for trial in range(1000):
            n = int(rng.integers(1, 9))
            k = orders[trial % 5]
            inst = random_instance(rng, n)
            oracle = ComparisonOracle(inst, OracleConfig(k=k))
            est = estimate_gaps(oracle)
            unit = inst.gaps[est.i_max]
            assert unit == inst.max_gap
            bound = F(2, k) * unit
            for ghat, g in zip(est.scaled_gaps(unit), inst.gaps):
                assert abs(ghat - g) <= bound  # exact, no tolerance
            T = int(math.log2(k)) - 1
            ledger = oracle.ledger.by_phase
            assert ledger.get("labels", 0) == n
            assert ledger.get("max-gap", 0) == n - 1
            assert ledger.get("refinement", 0) == n * T
            assert oracle.ledger.total == n + (n - 1) + n * T
        elapsed = time.perf_counter() - started
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


def test_criterion_2_noisy_recovery():
    with criterion(2, "noisy estimation reproduces noiseless output in >=190/200 runs"):
        started = time.perf_counter()
        rng = np.random.default_rng(202)
        inst = random_instance(rng, 4)
        reference = estimate_gaps(ComparisonOracle(inst, OracleConfig(k=8)))
        matches = 0
        for run in range(200):
            oracle = ComparisonOracle(
                inst, OracleConfig(k=8, noise=0.25, seed=10_000 + run)
            )
            est = estimate_gaps_noisy(oracle, eta=0.25, delta=0.05)
            if (
                est.coeffs == reference.coeffs
                and est.labels == reference.labels
                and est.i_max == reference.i_max
            ):
                matches += 1
        elapsed = time.perf_counter() - started
        assert matches >= 190, f"only {matches} of 200 runs matched"
        assert elapsed < 30.0, f"took {elapsed:.2f}s"


def test_criterion_3_risk_bound_audit():
    with criterion(3, "excess risk never exceeds any applicable bound on 1000 tuples"):
        rng = np.random.default_rng(303)
        orders = (4, 8, 16)
        for trial in range(500):  # elicited gap estimates (one-sided)
            n = int(rng.integers(2, 7))
            k = orders[trial % 3]
            inst = random_instance(rng, n)
            cls = induce_threshold_class(inst)
            if rng.random() < 0.5:
                extra = [
                    tuple(int(v) for v in rng.integers(0, 2, size=n)) for _ in range(2)
                ]
                cls = HypothesisClass.from_labelings(list(cls) + extra)
            est = estimate_gaps(ComparisonOracle(inst, OracleConfig(k=k)))
            sample = (
                population_sample(inst)
                if rng.random() < 0.3
                else draw_sample(inst, int(rng.integers(n, 3 * n + 1)), rng)
            )
            rep = bound_report(inst, sample, est, cls, oracle_order=k)
            assert rep.excess_risk <= rep.bound_mismatch
            assert rep.excess_risk <= rep.bound_erm_error
            assert rep.excess_risk <= rep.bound_budget
        for _ in range(500):  # arbitrary two-sided utility tables
            n = int(rng.integers(2, 7))
            inst = random_instance(rng, n)
            cls = HypothesisClass.from_labelings(
                list(induce_threshold_class(inst))
                + [tuple(int(v) for v in rng.integers(0, 2, size=n)) for _ in range(2)]
            )
            clip = lambda v: min(max(v, F(0)), F(1))
            table = [
                (
                    clip(u0 + F(float(rng.uniform(-0.3, 0.3)))),
                    clip(u1 + F(float(rng.uniform(-0.3, 0.3)))),
                )
                for u0, u1 in inst.utility
            ]
            sample = draw_sample(inst, int(rng.integers(n, 3 * n + 1)), rng)
            rep = bound_report_table(inst, sample, table, cls)
            assert rep.excess_risk <= rep.bound_mismatch


def test_criterion_4_two_point_lower_bound_family():
    with criterion(4, "hard pairs: k-indistinguishable, bit-exact risks, risk floor"):
        for k in (2, 4, 8, 16):
            pair = hard_pair_instance(k)
            same, _ = indistinguishable(
                pair.instance_a.gaps, pair.instance_b.gaps, k
            )
            assert same
            assert pair.risk_first_point == F(1, 2 * (6 * k + 1))
            assert pair.risk_second_point == F(1, 6 * k + 1)
            assert excess_risk(pair.instance_a, (1, 0), pair.cls) == pair.risk_first_point
            assert excess_risk(pair.instance_b, (0, 1), pair.cls) == pair.risk_second_point
            floor = F(1, 2 * (6 * k + 1))
            for h in pair.cls:
                worst = max(
                    excess_risk(pair.instance_a, h, pair.cls),
                    excess_risk(pair.instance_b, h, pair.cls),
                )
                assert worst >= floor


def test_criterion_5_three_point_adaptivity_gap():
    with criterion(5, "plug-in trap risk exact; alternate and robust recover optimum"):
        bundle = adaptivity_gap_instance(16)
        inst, cls = bundle.instance, bundle.cls
        sample = population_sample(inst)

        est = estimate_gaps(ComparisonOracle(inst, OracleConfig(k=16)))
        plug_choice = cls[plugin(sample, est, cls).chosen]
        assert plug_choice == (0, 0, 1)
        risk = excess_risk(inst, plug_choice, cls)
        assert risk == F(276, 6144)
        assert float(risk) == pytest.approx(0.04492, abs=5e-6)
        assert float(risk) != pytest.approx(1 / 16, abs=1e-3)  # not the loose 1/k

        est_alt = estimate_gaps(
            ComparisonOracle(inst, OracleConfig(k=16)), reference=bundle.reference
        )
        alt_choice = cls[plugin(sample, est_alt, cls).chosen]
        assert alt_choice == (1, 1, 0)

        oracle = ComparisonOracle(inst, OracleConfig(k=16))
        poly = build_polytope(oracle)
        policy = solve_robust_policy(inst, poly, cls)
        lookup = dict(zip(cls, policy.probabilities))
        assert lookup[(1, 1, 0)] == 1
        assert policy.worst_case == 0
        # the alternate choice is itself safe for every consistent gap vector
        alt_regret, _ = poly.maximize(
            [
                w * ((1 if (0, 0, 1)[i] == 1 else 0) - (1 if alt_choice[i] == 1 else 0))
                for i, w in enumerate(inst.weights)
            ]
        )
        assert alt_regret <= 0

        for k in (16, 32, 64):
            b = adaptivity_gap_instance(k)
            e = estimate_gaps(ComparisonOracle(b.instance, OracleConfig(k=k)))
            choice = b.cls[plugin(population_sample(b.instance), e, b.cls).chosen]
            r = excess_risk(b.instance, choice, b.cls)
            assert r == F(k * k + 2 * k - 12, k * k * (k + 8))
            ratio = float(r) * k
            assert 0.5 <= ratio <= 1.5


def test_criterion_6_modulus_sandwich():
    with criterion(6, "half lower modulus <= game value <= upper modulus, 100 instances"):
        started = time.perf_counter()
        rng = np.random.default_rng(606)
        for trial in range(100):
            n = 2 + trial % 2
            k = (2, 4, 8)[trial % 3]
            inst = random_instance(rng, n)
            cls = induce_threshold_class(inst)
            oracle = ComparisonOracle(inst, OracleConfig(k=k))
            poly = build_polytope(oracle)
            policy = solve_robust_policy(inst, poly, cls, tolerance=F(1, 10**6))
            extras = [g for g, _, _ in policy.adversary_support]
            extras.append(policy.mean_adversary_gap())
            lower = local_modulus(
                inst, poly, cls, "lower", grid_step=F(1, 64), extra_points=extras
            )
            upper = local_modulus(
                inst, poly, cls, "upper", grid_step=F(1, 64), extra_points=extras
            )
            value = float(policy.game_value)
            assert lower / 2 <= value + 1e-4, (trial, lower / 2, value)
            assert value <= upper + 1e-4, (trial, value, upper)
        elapsed = time.perf_counter() - started
        assert elapsed < 600.0, f"took {elapsed:.1f}s"


def test_criterion_7_error_rate_in_order(tmp_path):
    with criterion(7, "sweep error decays like 1/k: slope in [-1.6, -0.7]"):
        out = tmp_path / "sweep"
        config = tmp_path / "sweep.json"
        config.write_text(
            '{"experiment": "sweep-k", '
            '"instance": {"generator": {"n": 8, "seed": 707}}, '
            '"k": [4, 8, 16, 32], "trials": 50, "seed": 707, '
            f'"out": "{out}"}}'
        )
        assert main(["run", "--config", str(config)]) == 0
        csv_path = out / "sweep.csv"
        with open(csv_path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 200
        by_k: dict[int, list[float]] = {}
        for row in rows:
            k = int(row["k"])
            err = float(row["est_error"])
            assert err <= 2.0 / k  # per-row budget (max gap is at most 1)
            by_k.setdefault(k, []).append(err)
        means = [np.mean(by_k[k]) for k in sorted(by_k)]
        assert all(a > b for a, b in zip(means, means[1:]))  # decreasing in k

        result = fit_rate(str(csv_path))
        assert -1.6 <= result["slope"] <= -0.7, result

        # the exact budget series itself fits slope -1
        exact = tmp_path / "exact.csv"
        with open(exact, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "trial", "excess_risk", "est_error", "queries", "wall_ms"])
            for k in (4, 8, 16, 32):
                writer.writerow([k, 0, 0.0, 2 * 0.8 / k, 0, 0])
        assert abs(fit_rate(str(exact))["slope"] + 1.0) <= 1e-9


def test_criterion_8_raw_and_reduced_forms_agree():
    with criterion(8, "raw and reduced query evaluation agree on 10^4 random queries"):
        rng = np.random.default_rng(808)
        for _ in range(10_000):
            n = int(rng.integers(1, 6))
            k = int(rng.integers(1, 9))
            inst = random_instance(rng, n)
            oracle = ComparisonOracle(inst, OracleConfig(k=k))
            length = int(rng.integers(1, k + 1))
            entries = tuple(
                (
                    int(rng.integers(0, n)),
                    int(rng.integers(0, 2)),
                    int(rng.integers(0, 2)),
                )
                for _ in range(length)
            )
            q = Query(entries)
            raw_diff = F(0)
            for i, y1, y2 in entries:  # literal per-entry sum
                u0, u1 = inst.utility[i]
                raw_diff += (u1 if y1 else u0) - (u1 if y2 else u0)
            raw_bit = 1 if raw_diff >= 0 else 0
            c = reduce_query(q, inst.labels)
            reduced_dot = sum(int(ci) * gi for ci, gi in zip(c, inst.gaps))
            reduced_bit = 1 if reduced_dot >= 0 else 0
            assert raw_bit == reduced_bit == oracle.answer(q)


def test_criterion_9_game_solver_matches_grid_search():
    with criterion(9, "double-oracle value matches exhaustive grid within 5e-3"):
        rng = np.random.default_rng(909)
        for trial in range(20):
            inst = random_instance(rng, 2)
            cls = induce_threshold_class(inst)
            k = (2, 4)[trial % 2]
            oracle = ComparisonOracle(inst, OracleConfig(k=k))
            poly = build_polytope(oracle)
            policy = solve_robust_policy(inst, poly, cls)
            gv = grid_game_value(inst, poly, cls, policy_step=1e-3, gap_step=1e-3)
            assert abs(gv - float(policy.game_value)) <= 5e-3
