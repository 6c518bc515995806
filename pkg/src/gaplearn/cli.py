"""Experiment runner: named, seeded experiments with CSV/JSON artifacts.

Subcommands: ``gen-instance`` (write a random instance), ``run`` (execute a
configured experiment), ``fit-rate`` (log-log slope of a sweep's mean
estimation error).  Configurations are single JSON documents checked
against a strict schema; unknown keys are errors.

Determinism: one master seed; each (k, trial) derives its own RNG stream,
so results do not depend on execution order.  CSV bodies are reproducible
byte-for-byte except for the wall-clock column.

Exit codes: 0 ok, 2 config error, 3 capacity error, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .elicitation import estimate_gaps, estimate_gaps_noisy
from .errors import CapacityError, ConfigError, GapLearnError, SolverError
from .generate import random_instance
from .hardness import adaptivity_gap_instance, hard_pair_instance, indistinguishable
from .instances import (
    HypothesisClass,
    TabularInstance,
    evaluate_class,
    excess_risk,
    induce_threshold_class,
    instance_from_json,
    instance_to_json,
)
from .learner import bound_report, draw_sample, plugin, population_sample
from .oracle import ComparisonOracle, OracleConfig
from .robust import build_polytope, local_modulus, solve_robust_policy

CSV_HEADER = ["k", "trial", "excess_risk", "est_error", "queries", "wall_ms"]

EXPERIMENTS = ("sweep-k", "gap-run", "lowerbound", "plugin-vs-robust", "robust", "bound-audit")

_SCHEMA: dict[str, set[str]] = {
    "sweep-k": {"experiment", "instance", "k", "eta", "delta", "trials", "seed", "class", "out"},
    "gap-run": {"experiment", "instance", "k", "eta", "delta", "seed", "class", "out"},
    "lowerbound": {"experiment", "k", "seed", "out"},
    "plugin-vs-robust": {"experiment", "k", "seed", "out"},
    "robust": {"experiment", "instance", "k", "seed", "tolerance", "class", "out"},
    "bound-audit": {"experiment", "trials", "seed", "n_max", "k", "out"},
}

_GENERATOR_KEYS = {"n", "seed", "coords", "zero_base"}


def _load_config(path: str, overrides: argparse.Namespace) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    exp = cfg.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    allowed = _SCHEMA[exp]
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for field in ("seed", "trials", "out"):
        value = getattr(overrides, field, None)
        if value is not None and field in allowed:
            cfg[field] = value
    cfg.setdefault("seed", 0)
    cfg.setdefault("out", ".")
    if "trials" in allowed:
        cfg.setdefault("trials", 1)
        if not isinstance(cfg["trials"], int) or cfg["trials"] < 1:
            raise ConfigError("trials must be an integer >= 1")
    if "eta" in allowed:
        cfg.setdefault("eta", 0.0)
        if not 0 <= float(cfg["eta"]) < 0.5:
            raise ConfigError("eta must lie in [0, 1/2)")
    if "delta" in allowed:
        cfg.setdefault("delta", 0.05)
        if not 0 < float(cfg["delta"]) < 1:
            raise ConfigError("delta must lie in (0, 1)")
    return cfg


def _effective_order(k, warnings: list[str]) -> int:
    """Dyadic-estimation experiments need powers of two; round down, warn."""
    if not isinstance(k, int) or k < 2:
        raise ConfigError(f"oracle order {k!r} must be an integer >= 2")
    if k & (k - 1) == 0:
        return k
    effective = 1 << (k.bit_length() - 1)
    warnings.append(f"oracle order {k} rounded down to {effective}")
    return effective


def _resolve_instance(cfg: dict) -> TabularInstance:
    spec = cfg.get("instance")
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError('instance must be {"path": ...} or {"generator": {...}}')
    if "path" in spec:
        try:
            return instance_from_json(Path(spec["path"]).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load instance: {exc}") from exc
    if "generator" in spec:
        params = spec["generator"]
        unknown = set(params) - _GENERATOR_KEYS
        if unknown:
            raise ConfigError(f"unknown generator keys: {', '.join(sorted(unknown))}")
        rng = np.random.default_rng(params.get("seed", 0))
        return random_instance(
            rng,
            int(params.get("n", 4)),
            with_coords=bool(params.get("coords", True)),
            zero_base=bool(params.get("zero_base", False)),
        )
    raise ConfigError('instance must be {"path": ...} or {"generator": {...}}')


def _resolve_class(cfg: dict, instance: TabularInstance) -> HypothesisClass:
    mode = cfg.get("class", "threshold")
    if mode == "threshold":
        try:
            return induce_threshold_class(instance)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if mode == "all":
        if instance.n > 12:
            raise ConfigError("class 'all' limited to 12 support points")
        hyps = [
            tuple(m >> i & 1 for i in range(instance.n)) for m in range(2**instance.n)
        ]
        return HypothesisClass.from_labelings(hyps)
    raise ConfigError("class must be 'threshold' or 'all'")


def _derived_rng(master: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master, *path]))


def _write_manifest(
    out: Path,
    cfg: dict,
    ledger_totals: dict,
    files: list[str],
    warnings: list[str] | None = None,
) -> None:
    canonical = json.dumps(cfg, sort_keys=True).encode()
    manifest = {
        "config_hash": hashlib.sha256(canonical).hexdigest(),
        "config": cfg,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": sys.version.split()[0],
        "ledger": ledger_totals,
        "artifacts": files,
        "warnings": warnings or [],
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _run_sweep(cfg: dict, out: Path) -> None:
    instance = _resolve_instance(cfg)
    cls = _resolve_class(cfg, instance)
    ks = cfg.get("k")
    if not isinstance(ks, list) or not ks:
        raise ConfigError("sweep-k needs a non-empty list under 'k'")
    warnings: list[str] = []
    ks = [_effective_order(k, warnings) for k in ks]
    eta, delta = float(cfg["eta"]), float(cfg["delta"])
    trials, master = cfg["trials"], int(cfg["seed"])
    sample = population_sample(instance)
    unit = instance.max_gap

    rows = []
    totals: dict[str, int] = {}
    for k in ks:
        for trial in range(trials):
            rng_seed = int(_derived_rng(master, k, trial).integers(0, 2**63))
            oracle = ComparisonOracle(instance, OracleConfig(k=k, noise=eta, seed=rng_seed))
            started = time.perf_counter()
            if eta == 0:
                est = estimate_gaps(oracle)
            else:
                est = estimate_gaps_noisy(oracle, eta, delta)
            choice = plugin(sample, est, cls)
            wall_ms = (time.perf_counter() - started) * 1000
            risk = excess_risk(instance, cls[choice.chosen], cls)
            est_gaps = est.scaled_gaps(unit)
            err = max(abs(e - g) for e, g in zip(est_gaps, instance.gaps))
            rows.append(
                {
                    "k": k,
                    "trial": trial,
                    "excess_risk": float(risk),
                    "est_error": float(err),
                    "queries": oracle.ledger.total,
                    "wall_ms": round(wall_ms, 3),
                }
            )
            for phase, count in oracle.ledger.by_phase.items():
                totals[phase] = totals.get(phase, 0) + count
    rows.sort(key=lambda r: (r["k"], r["trial"]))

    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_HEADER)
        writer.writeheader()
        writer.writerows(rows)
    _write_manifest(out, cfg, totals, ["sweep.csv"], warnings)
    print(f"wrote {path} ({len(rows)} rows)")


def _run_gap_run(cfg: dict, out: Path) -> None:
    instance = _resolve_instance(cfg)
    cls = _resolve_class(cfg, instance)
    warnings: list[str] = []
    k = _effective_order(cfg.get("k"), warnings)
    eta, delta = float(cfg["eta"]), float(cfg["delta"])
    oracle = ComparisonOracle(
        instance, OracleConfig(k=k, noise=eta, seed=int(cfg["seed"]))
    )
    est = estimate_gaps(oracle) if eta == 0 else estimate_gaps_noisy(oracle, eta, delta)
    choice = plugin(population_sample(instance), est, cls)
    doc = {
        "k": k,
        "labels": list(est.labels),
        "i_max": est.i_max,
        "coefficients": [str(c) for c in est.coeffs],
        "plugin_choice": list(cls[choice.chosen]),
        "excess_risk": float(excess_risk(instance, cls[choice.chosen], cls)),
        "ledger": oracle.ledger.snapshot(),
    }
    (out / "gap_run.json").write_text(json.dumps(doc, indent=2) + "\n")
    _write_manifest(out, cfg, oracle.ledger.snapshot(), ["gap_run.json"], warnings)
    print(json.dumps(doc, indent=2))


def _run_lowerbound(cfg: dict, out: Path) -> None:
    k = cfg.get("k")
    if not isinstance(k, int) or k < 2:
        raise ConfigError("lowerbound needs an integer k >= 2")
    pair = hard_pair_instance(k)
    same, witness = indistinguishable(
        pair.instance_a.gaps, pair.instance_b.gaps, k
    )
    (out / "instance_a.json").write_text(instance_to_json(pair.instance_a) + "\n")
    (out / "instance_b.json").write_text(instance_to_json(pair.instance_b) + "\n")
    with open(out / "risks.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hypothesis", "utility", "excess_risk"])
        for tag, inst in (("a", pair.instance_a), ("b", pair.instance_b)):
            report = evaluate_class(inst, pair.cls)
            for h, risk in zip(pair.cls, report.risks):
                writer.writerow(["".join(map(str, h)), tag, float(risk)])
    _write_manifest(
        out, cfg, {}, ["instance_a.json", "instance_b.json", "risks.csv"]
    )
    print(f"risk if first point favored: {pair.risk_first_point} "
          f"({float(pair.risk_first_point):.6f})")
    print(f"risk if second point favored: {pair.risk_second_point} "
          f"({float(pair.risk_second_point):.6f})")
    print(f"indistinguishable: {'true' if same else 'false'}")
    if witness is not None:
        print(f"separating query: {witness}")


def _run_plugin_vs_robust(cfg: dict, out: Path) -> None:
    warnings: list[str] = []
    k = _effective_order(cfg.get("k"), warnings)
    bundle = adaptivity_gap_instance(k)
    instance, cls = bundle.instance, bundle.cls
    sample = population_sample(instance)

    oracle = ComparisonOracle(instance, OracleConfig(k=k))
    est = estimate_gaps(oracle)
    plug = plugin(sample, est, cls)
    plug_risk = excess_risk(instance, cls[plug.chosen], cls)

    oracle_alt = ComparisonOracle(instance, OracleConfig(k=k))
    est_alt = estimate_gaps(oracle_alt, reference=bundle.reference)
    alt = plugin(sample, est_alt, cls)

    oracle_poly = ComparisonOracle(instance, OracleConfig(k=k))
    polytope = build_polytope(oracle_poly)
    policy = solve_robust_policy(instance, polytope, cls)

    doc = {
        "k": k,
        "optimal": list(cls[evaluate_class(instance, cls).best_index]),
        "plugin_choice": list(cls[plug.chosen]),
        "plugin_risk": float(plug_risk),
        "plugin_risk_exact": str(plug_risk),
        "alternate_choice": list(cls[alt.chosen]),
        "robust_policy": [str(p) for p in policy.probabilities],
        "robust_worst_case": float(policy.worst_case),
        "queries_used": oracle_poly.ledger.total,
    }
    (out / "plugin_vs_robust.json").write_text(json.dumps(doc, indent=2) + "\n")
    _write_manifest(
        out, cfg, oracle_poly.ledger.snapshot(), ["plugin_vs_robust.json"], warnings
    )
    print(json.dumps(doc, indent=2))


def _run_robust(cfg: dict, out: Path) -> None:
    instance = _resolve_instance(cfg)
    cls = _resolve_class(cfg, instance)
    k = cfg.get("k")
    if not isinstance(k, int) or k < 1:
        raise ConfigError("robust needs an integer k >= 1")
    tolerance = Fraction(str(cfg.get("tolerance", "1/1000000")))
    oracle = ComparisonOracle(instance, OracleConfig(k=k))
    polytope = build_polytope(oracle)
    policy = solve_robust_policy(instance, cls=cls, polytope=polytope, tolerance=tolerance)
    extras = [g for g, _, _ in policy.adversary_support]
    extras.append(policy.mean_adversary_gap())
    doc = {
        "game_value": float(policy.game_value),
        "policy": [float(p) for p in policy.probabilities],
        "lower_modulus": local_modulus(instance, polytope, cls, "lower", extra_points=extras),
        "upper_modulus": local_modulus(instance, polytope, cls, "upper", extra_points=extras),
        "queries_used": oracle.ledger.total,
    }
    (out / "robust.json").write_text(json.dumps(doc, indent=2) + "\n")
    _write_manifest(out, cfg, oracle.ledger.snapshot(), ["robust.json"])
    print(json.dumps(doc, indent=2))


def _run_bound_audit(cfg: dict, out: Path) -> None:
    trials, master = cfg["trials"], int(cfg["seed"])
    n_max = int(cfg.get("n_max", 6))
    ks = cfg.get("k", [4, 8, 16])
    if not isinstance(ks, list) or not ks:
        raise ConfigError("bound-audit needs a non-empty list under 'k'")
    warnings: list[str] = []
    ks = [_effective_order(k, warnings) for k in ks]
    violations = 0
    rows = []
    for trial in range(trials):
        rng = _derived_rng(master, trial)
        instance = random_instance(rng, int(rng.integers(2, n_max + 1)))
        k = ks[int(rng.integers(0, len(ks)))]
        oracle = ComparisonOracle(instance, OracleConfig(k=k))
        est = estimate_gaps(oracle)
        cls = induce_threshold_class(instance)
        sample = draw_sample(instance, int(rng.integers(instance.n, 3 * instance.n + 1)), rng)
        report = bound_report(instance, sample, est, cls, oracle_order=k)
        ok = (
            report.excess_risk <= report.bound_mismatch
            and report.excess_risk <= report.bound_erm_error
            and report.excess_risk <= report.bound_budget
        )
        violations += 0 if ok else 1
        row = report.to_dict()
        row.update({"trial": trial, "k": k, "ok": ok})
        rows.append(row)
    path = out / "bound_audit.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    _write_manifest(out, cfg, {}, ["bound_audit.csv"], warnings)
    print(f"audited {trials} tuples, violations: {violations}")


_RUNNERS = {
    "sweep-k": _run_sweep,
    "gap-run": _run_gap_run,
    "lowerbound": _run_lowerbound,
    "plugin-vs-robust": _run_plugin_vs_robust,
    "robust": _run_robust,
    "bound-audit": _run_bound_audit,
}


def fit_rate(csv_path: str) -> dict:
    """Least-squares slope of log(mean est_error) against log(k).

    Returns {"slope": ..., "residual": ..., "points": N} or
    {"rate": "undefined"} when every mean error is zero.
    """
    by_k: dict[int, list[float]] = {}
    try:
        with open(csv_path) as fh:
            for row in csv.DictReader(fh):
                by_k.setdefault(int(row["k"]), []).append(float(row["est_error"]))
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read sweep CSV: {exc}") from exc
    means = {k: float(np.mean(v)) for k, v in by_k.items()}
    nonzero = {k: m for k, m in means.items() if m > 0}
    if not nonzero:
        return {"rate": "undefined"}
    if len(nonzero) < 3:
        raise ConfigError("need >= 3 distinct k values with nonzero mean error")
    ks = np.array(sorted(nonzero))
    logs = np.log(np.array([nonzero[k] for k in ks]))
    logk = np.log(ks.astype(float))
    slope, intercept = np.polyfit(logk, logs, 1)
    residual = float(np.sqrt(np.mean((logs - (slope * logk + intercept)) ** 2)))
    return {"slope": float(slope), "residual": residual, "points": len(ks)}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gaplearn", description="comparison-based decision learning experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-instance", help="write a random instance as JSON")
    p_gen.add_argument("--n", type=int, default=4)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", type=str, default=None, help="output file (default stdout)")
    p_gen.add_argument("--zero-base", action="store_true")
    p_gen.add_argument("--no-coords", action="store_true")

    p_run = sub.add_parser("run", help="run a configured experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--trials", type=int, default=None)
    p_run.add_argument("--out", type=str, default=None)

    p_fit = sub.add_parser("fit-rate", help="log-log error rate of a sweep CSV")
    p_fit.add_argument("csv")

    args = parser.parse_args(argv)
    try:
        if args.command == "gen-instance":
            rng = np.random.default_rng(args.seed)
            inst = random_instance(rng, args.n, with_coords=not args.no_coords)
            text = instance_to_json(inst)
            if args.out:
                Path(args.out).write_text(text + "\n")
                print(f"wrote {args.out}")
            else:
                print(text)
        elif args.command == "run":
            cfg = _load_config(args.config, args)
            out = Path(cfg["out"])
            out.mkdir(parents=True, exist_ok=True)
            _RUNNERS[cfg["experiment"]](cfg, out)
        elif args.command == "fit-rate":
            print(json.dumps(fit_rate(args.csv), indent=2))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 4
    except GapLearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
