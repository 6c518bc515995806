"""Simulated k-wise utility-comparison oracle with optional response noise.

A query names up to ``k`` support points (with repetition) together with two
candidate decision vectors.  The oracle's truth bit says whether the first
decision vector has cumulative utility at least as large as the second; ties
resolve to 1.  A noisy oracle flips the truth bit independently on every call
with a per-query probability strictly below one half.

Truth is evaluated in exact rational arithmetic, so repeated and rescaled
instances produce identical transcripts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, IO, Sequence

import numpy as np

from .errors import CapacityError
from .instances import TabularInstance

__all__ = [
    "Query",
    "OracleConfig",
    "QueryLedger",
    "ComparisonOracle",
    "reduce_query",
    "enumerate_reduced_queries",
    "query_from_coefficients",
]

# entry = (point index, decision under y1, decision under y2)
Entry = tuple[int, int, int]


@dataclass(frozen=True)
class Query:
    """A comparison query as a list of (point, y1, y2) entries.

    Repeating a point contributes its utility multiple times to both sides.
    The entry count is the query's length; the oracle enforces length <= k.
    """

    entries: tuple[Entry, ...]

    def __post_init__(self) -> None:
        for i, y1, y2 in self.entries:
            if y1 not in (0, 1) or y2 not in (0, 1):
                raise ValueError("decisions must be binary")
            if i < 0:
                raise ValueError("negative point index")

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def single(cls, i: int, y1: int, y2: int) -> "Query":
        return cls(((i, y1, y2),))


def reduce_query(query: Query, labels: Sequence[int]) -> np.ndarray:
    """Integer coefficient vector c with response(q) = I[c . g >= 0].

    ``c_i`` accumulates ``I[y1 = y_i] - I[y2 = y_i]`` over the entries at
    point i; entries with ``y1 = y2`` cancel.  Valid for every gap vector
    that shares the given labels, because per entry
    ``u(x, y1) - u(x, y2) = g_x * (I[y1 = y_x] - I[y2 = y_x])``.
    """
    c = np.zeros(len(labels), dtype=int)
    for i, y1, y2 in query.entries:
        if i >= len(labels):
            raise ValueError("entry index outside the support")
        y = labels[i]
        c[i] += (1 if y1 == y else 0) - (1 if y2 == y else 0)
    return c


def query_from_coefficients(c: Sequence[int], labels: Sequence[int]) -> Query:
    """A query realizing the reduced coefficient vector ``c``.

    Positive c_i puts |c_i| copies of (x_i, y_i, 1-y_i); negative c_i puts
    the flipped entry.  The query length is sum(|c_i|).
    """
    entries: list[Entry] = []
    for i, coeff in enumerate(c):
        y = int(labels[i])
        if coeff > 0:
            entries.extend([(i, y, 1 - y)] * coeff)
        elif coeff < 0:
            entries.extend([(i, 1 - y, y)] * (-coeff))
    return Query(tuple(entries))


@dataclass(frozen=True)
class OracleConfig:
    """Order, noise model, and seed for a simulated oracle.

    ``noise`` is either 0 (noiseless), a constant flip rate in [0, 1/2), or a
    callable mapping a query to its flip rate; callables must stay below 1/2
    and are checked per call.
    """

    k: int
    noise: float | Callable[[Query], float] = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("oracle order k must be >= 1")
        if isinstance(self.noise, (int, float)) and not 0 <= self.noise < 0.5:
            raise ValueError("noise rate must lie in [0, 1/2)")

    @property
    def noiseless(self) -> bool:
        return not callable(self.noise) and self.noise == 0


@dataclass
class QueryLedger:
    """Counts oracle calls, split by caller-supplied phase labels."""

    by_phase: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.by_phase.values())

    def charge(self, phase: str) -> None:
        self.by_phase[phase] = self.by_phase.get(phase, 0) + 1

    def snapshot(self) -> dict[str, int]:
        return dict(self.by_phase)


class ComparisonOracle:
    """One oracle handle per experiment run.

    The ledger and RNG mutate, so a handle belongs to a single thread;
    parallel sweeps should create independent handles with derived seeds.
    An optional ``transcript`` file-like sink receives one JSON line per
    call: ``{"phase": ..., "c": [...], "truth": 0|1, "response": 0|1}``.
    """

    def __init__(
        self,
        instance: TabularInstance,
        config: OracleConfig,
        transcript: IO[str] | None = None,
    ):
        self.instance = instance
        self.config = config
        self.ledger = QueryLedger()
        self.rng = np.random.default_rng(config.seed)
        self.transcript = transcript
        self._truth_cache: dict[tuple[Entry, ...], int] = {}

    @property
    def k(self) -> int:
        return self.config.k

    @property
    def n_points(self) -> int:
        return self.instance.n

    def truth(self, query: Query) -> int:
        """Noiseless truth bit I[u(x, y1) >= u(x, y2)], exact arithmetic."""
        cached = self._truth_cache.get(query.entries)
        if cached is not None:
            return cached
        counts: dict[Entry, int] = {}
        for entry in query.entries:
            counts[entry] = counts.get(entry, 0) + 1
        diff = Fraction(0)
        for (i, y1, y2), mult in counts.items():
            if y1 == y2:
                continue
            u0, u1 = self.instance.utility[i]
            diff += mult * ((u1 if y1 == 1 else u0) - (u1 if y2 == 1 else u0))
        bit = 1 if diff >= 0 else 0
        self._truth_cache[query.entries] = bit
        return bit

    def answer(self, query: Query, phase: str = "adhoc") -> int:
        """Possibly-flipped truth bit; increments the ledger.

        Each call draws fresh noise, even for repeated identical queries.
        """
        if len(query) > self.config.k:
            raise ValueError(
                f"query length {len(query)} exceeds oracle order {self.config.k}"
            )
        bit = self.truth(query)
        noise = self.config.noise
        rate = float(noise(query)) if callable(noise) else float(noise)
        if not 0 <= rate < 0.5:
            raise ValueError(f"per-query noise rate {rate} outside [0, 1/2)")
        response = bit
        if rate > 0 and self.rng.random() < rate:
            response = 1 - bit
        self.ledger.charge(phase)
        if self.transcript is not None:
            c = reduce_query(query, self.instance.labels)
            self.transcript.write(
                json.dumps(
                    {
                        "phase": phase,
                        "c": [int(x) for x in c],
                        "truth": bit,
                        "response": response,
                    }
                )
                + "\n"
            )
        return response


def enumerate_reduced_queries(
    n: int, k: int, cap: int = 10**6
) -> list[tuple[int, ...]]:
    """All canonical reduced queries on n points at order k.

    Canonical means: nonzero integer vectors c with sum(|c_i|) <= k whose
    first nonzero entry is positive (c and -c carry the same information up
    to the boundary convention).  Returned in lexicographic order.  Raises
    :class:`CapacityError` if more than ``cap`` vectors would be produced.
    """
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    out: list[tuple[int, ...]] = []

    def extend(prefix: list[int], budget: int, leading_zero: bool) -> None:
        pos = len(prefix)
        if pos == n:
            if not leading_zero:
                out.append(tuple(prefix))
                if len(out) > cap:
                    raise CapacityError(
                        f"reduced-query enumeration exceeds cap of {cap}"
                    )
            return
        # First nonzero entry must be positive; later entries range freely.
        lo = 0 if leading_zero else -budget
        for v in range(lo, budget + 1):
            extend(prefix + [v], budget - abs(v), leading_zero and v == 0)

    extend([], k, True)
    out.sort()
    return out
