import io
import json
from fractions import Fraction

import numpy as np
import pytest

from gaplearn import (
    CapacityError,
    ComparisonOracle,
    OracleConfig,
    Point,
    Query,
    build_instance,
    enumerate_reduced_queries,
    query_from_coefficients,
    random_instance,
    reduce_query,
)

F = Fraction


def simple_instance():
    return build_instance(
        ["a", "b"], [0.5, 0.5], [(F(2, 10), F(7, 10)), (F(4, 10), F(0))]
    )


def two_point_pair_instance():
    return build_instance(
        [Point("x+", 1.0), Point("x-", -1.0)],
        [F(6, 13), F(7, 13)],
        [(F(0), F(1)), (F(0), F(13, 14))],
    )


class TestAnswer:
    def test_single_point_comparison(self):
        oracle = ComparisonOracle(simple_instance(), OracleConfig(k=2))
        assert oracle.answer(Query.single(0, 1, 0)) == 1
        assert oracle.answer(Query.single(1, 1, 0)) == 0

    def test_equal_sides_return_one(self):
        oracle = ComparisonOracle(simple_instance(), OracleConfig(k=2))
        q = Query(((0, 1, 1), (1, 0, 0)))
        assert oracle.answer(q) == 1

    def test_cross_point_comparison(self):
        oracle = ComparisonOracle(two_point_pair_instance(), OracleConfig(k=2))
        q = Query(((0, 1, 0), (1, 0, 1)))
        # gap(x+) = 1 >= gap(x-) = 13/14
        assert oracle.answer(q) == 1

    def test_query_too_long(self):
        oracle = ComparisonOracle(simple_instance(), OracleConfig(k=2))
        q = Query(((0, 1, 0), (0, 1, 0), (1, 1, 0)))
        with pytest.raises(ValueError, match="exceeds oracle order"):
            oracle.answer(q)

    def test_ledger_counts_every_call(self):
        oracle = ComparisonOracle(simple_instance(), OracleConfig(k=2))
        for _ in range(5):
            oracle.answer(Query.single(0, 1, 0), phase="labels")
        for _ in range(3):
            oracle.answer(Query.single(1, 1, 0), phase="max-gap")
        assert oracle.ledger.by_phase == {"labels": 5, "max-gap": 3}
        assert oracle.ledger.total == 8

    def test_transcript_lines(self):
        sink = io.StringIO()
        oracle = ComparisonOracle(simple_instance(), OracleConfig(k=2), transcript=sink)
        oracle.answer(Query.single(0, 1, 0), phase="labels")
        record = json.loads(sink.getvalue())
        assert record == {"phase": "labels", "c": [1, 0], "truth": 1, "response": 1}


class TestNoise:
    def test_invalid_constant_rate(self):
        with pytest.raises(ValueError, match=r"\[0, 1/2\)"):
            OracleConfig(k=2, noise=0.5)

    def test_callable_rate_validated_per_call(self):
        oracle = ComparisonOracle(
            simple_instance(), OracleConfig(k=2, noise=lambda q: 0.7)
        )
        with pytest.raises(ValueError, match="per-query noise rate"):
            oracle.answer(Query.single(0, 1, 0))

    def test_callable_rate_flips(self):
        oracle = ComparisonOracle(
            simple_instance(), OracleConfig(k=2, noise=lambda q: 0.4, seed=3)
        )
        q = Query.single(0, 1, 0)
        responses = [oracle.answer(q) for _ in range(200)]
        assert 0 in responses and 1 in responses

    def test_flip_frequency_within_three_sigma(self):
        eta = 0.25
        trials = 100_000
        oracle = ComparisonOracle(
            simple_instance(), OracleConfig(k=2, noise=eta, seed=11)
        )
        q = Query.single(0, 1, 0)  # truth = 1
        flips = sum(1 - oracle.answer(q) for _ in range(trials))
        se = (eta * (1 - eta) / trials) ** 0.5
        assert abs(flips / trials - eta) <= 3 * se

    def test_fresh_noise_per_repeated_query(self):
        oracle = ComparisonOracle(
            simple_instance(), OracleConfig(k=2, noise=0.4, seed=5)
        )
        q = Query.single(0, 1, 0)
        assert len({oracle.answer(q) for _ in range(50)}) == 2


class TestReduceQuery:
    def test_accumulates_signed_counts(self):
        q = Query(((0, 1, 0), (0, 1, 0), (1, 0, 1)))
        assert reduce_query(q, (1, 1)).tolist() == [2, -1]

    def test_cancelled_entry(self):
        q = Query(((0, 1, 1),))
        assert reduce_query(q, (1, 0)).tolist() == [0, 0]

    def test_refinement_shape(self):
        # k/2 copies of the point versus lambda flipped copies of the reference
        half_k, lam = 4, 3
        entries = [(0, 1, 0)] * half_k + [(1, 0, 1)] * lam
        c = reduce_query(Query(tuple(entries)), (1, 1))
        assert c.tolist() == [half_k, -lam]

    def test_reduced_matches_raw_on_random_queries(self):
        rng = np.random.default_rng(21)
        agree = 0
        trials = 10_000
        for _ in range(trials):
            inst = random_instance(rng, int(rng.integers(1, 6)))
            k = int(rng.integers(1, 9))
            oracle = ComparisonOracle(inst, OracleConfig(k=k))
            length = int(rng.integers(1, k + 1))
            entries = tuple(
                (int(rng.integers(0, inst.n)), int(rng.integers(0, 2)), int(rng.integers(0, 2)))
                for _ in range(length)
            )
            q = Query(entries)
            c = reduce_query(q, inst.labels)
            dot = sum(int(ci) * gi for ci, gi in zip(c, inst.gaps))
            agree += int(oracle.answer(q) == (1 if dot >= 0 else 0))
        assert agree == trials

    def test_query_from_coefficients_round_trips(self):
        rng = np.random.default_rng(22)
        inst = random_instance(rng, 4)
        for c in [(2, -1, 0, 1), (0, 0, -3, 0), (1, 1, 1, 1)]:
            q = query_from_coefficients(c, inst.labels)
            assert reduce_query(q, inst.labels).tolist() == list(c)


class TestScaleInvariance:
    def test_identical_transcripts_under_scaling(self):
        rng = np.random.default_rng(23)
        inst = random_instance(rng, 4)
        scaled = inst.scaled(F(1, 3))
        sink_a, sink_b = io.StringIO(), io.StringIO()
        oa = ComparisonOracle(inst, OracleConfig(k=8), transcript=sink_a)
        ob = ComparisonOracle(scaled, OracleConfig(k=8), transcript=sink_b)
        for _ in range(200):
            length = int(rng.integers(1, 9))
            entries = tuple(
                (int(rng.integers(0, 4)), int(rng.integers(0, 2)), int(rng.integers(0, 2)))
                for _ in range(length)
            )
            q = Query(entries)
            oa.answer(q)
            ob.answer(q)
        assert sink_a.getvalue() == sink_b.getvalue()


class TestEnumerate:
    def test_one_point_order_two(self):
        assert enumerate_reduced_queries(1, 2) == [(1,), (2,)]

    def test_two_points_order_one(self):
        assert enumerate_reduced_queries(2, 1) == [(0, 1), (1, 0)]

    def test_two_points_order_two(self):
        got = enumerate_reduced_queries(2, 2)
        assert got == [(0, 1), (0, 2), (1, -1), (1, 0), (1, 1), (2, 0)]

    def test_canonical_first_nonzero_positive(self):
        for c in enumerate_reduced_queries(3, 4):
            lead = next(v for v in c if v != 0)
            assert lead > 0

    def test_budget_respected(self):
        for c in enumerate_reduced_queries(3, 5):
            assert sum(abs(v) for v in c) <= 5

    def test_capacity_error(self):
        with pytest.raises(CapacityError):
            enumerate_reduced_queries(4, 6, cap=100)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            enumerate_reduced_queries(0, 2)
