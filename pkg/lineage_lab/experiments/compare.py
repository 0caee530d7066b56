"""
Experiment drivers behind the command line.

Each driver takes a validated ExperimentConfig, runs simulations, spine
estimates and grid solves, and writes long-format CSV tables plus a JSON
summary to the output directory. Outputs depend only on the config and its
seed: replicas draw from ``SeedSequence(seed, spawn_key=(stream, replica))``
and results are gathered in replica order whatever the worker count.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from lineage_lab.functional.action import cost_profile
from lineage_lab.functional.paths import GridPath, skorohod_radius
from lineage_lab.parsers.config import AcceptanceSection, ConfigError, ExperimentConfig, build_scenario
from lineage_lab.scenario.scenario import Scenario
from lineage_lab.simulation.branching import (
    SimulationResult,
    count_tube,
    count_window,
    exponent,
    lineage_sup_distances,
    run,
)
from lineage_lab.simulation.feynman_kac import Always, PathPredicate, Tube, Window, estimate_mean_count
from lineage_lab.simulation.initial import PopulationCapError
from lineage_lab.solvers.variational import (
    ValueField,
    backtrack,
    continuity_spread,
    default_domain,
    default_v_max,
    hj_residual,
    solve,
    value_at,
)
from lineage_lab.utils.constants import (
    EXIT_OK,
    EXIT_STATISTICAL_FAILURE,
    STREAM_SIMULATION,
    STREAM_SPINES,
    WORKERS,
)
from lineage_lab.utils.io import write_csv, write_json
from lineage_lab.utils.sentinel import NEG_INF, Extended, is_infinite, to_float
from lineage_lab.utils.streams import replica_generator

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 20

EXPONENT_FIELDS = [
    "K",
    "t",
    "observable",
    "kind",
    "x",
    "radius",
    "replicas",
    "usable",
    "capped",
    "zero_fraction",
    "exponent_mean",
    "exponent_sd",
    "exponent_max",
    "fk_log_estimate",
    "fk_degenerate",
    "u0",
    "U",
    "u0_sup",
    "U_sup",
    "gap",
    "skorohod_radius",
    "holds",
    "note",
]


@dataclass(frozen=True)
class Observable:
    """A counted observable: a terminal window or a sup-norm tube around a path.

    Attributes:
        label: Name in reports.
        kind: "window" or "tube".
        x: Window centre, or the tube path's value at the horizon.
        radius: Window half-width delta or tube radius eps.
        reference: Tube centre path (tubes only).
    """

    label: str
    kind: str
    x: float
    radius: float
    reference: Optional[GridPath] = None

    def count(self, res: SimulationResult) -> int:
        if self.kind == "window":
            return count_window(res, self.x, self.radius)
        return count_tube(res, self.reference, self.radius)

    def predicate(self) -> PathPredicate:
        if self.kind == "window":
            return Window(self.x, self.radius)
        return Tube(self.reference, self.radius, self.label)


def config_observables(config: ExperimentConfig) -> List[Observable]:
    """Windows then tubes, in config order."""
    t = config.simulation.t
    observables = [Observable(w.label, "window", w.x, w.delta) for w in config.observables.windows]
    for tube in config.observables.tubes:
        reference = tube.reference(t)
        observables.append(Observable(tube.label, "tube", float(reference.value_at(t)), tube.eps, reference))
    return observables


@dataclass(frozen=True)
class ReplicaTask:
    config: ExperimentConfig
    K: float
    replica: int
    observables: Tuple[Observable, ...] = ()
    keep_distances: bool = False
    ancestry_path: Optional[str] = None

    @property
    def stream_index(self) -> int:
        """Replicas of different K draw from disjoint streams."""
        ks = self.config.simulation.K
        position = ks.index(self.K) if self.K in ks else 0
        return position * self.config.simulation.replicas + self.replica


@dataclass(frozen=True)
class ReplicaOutcome:
    """Summary of one simulated replica.

    Attributes:
        K: Population scale.
        replica: Replica index.
        capped: Whether the run (or its initial draw) exceeded the cap.
        alive: Live individuals at the end.
        initial: Initial individuals.
        events: Events processed.
        counts: Count per observable label.
        distances: Sup distances of the living lineages to each tube reference,
            when requested.
        stats: Run statistics as a plain mapping.
    """

    K: float
    replica: int
    capped: bool
    alive: int = 0
    initial: int = 0
    events: int = 0
    counts: Dict[str, int] = field(default_factory=dict)
    distances: Dict[str, np.ndarray] = field(default_factory=dict)
    stats: Dict[str, float] = field(default_factory=dict)


def _provenance(config: ExperimentConfig) -> Dict[str, Any]:
    """Resolved config for report headers; the output directory is left out so reports compare across runs."""
    return config.model_dump(mode="json", exclude={"output": {"directory"}})


@lru_cache(maxsize=8)
def _scenario_from_json(payload: str) -> Scenario:
    return build_scenario(ExperimentConfig.model_validate_json(payload))


def simulate_replica(task: ReplicaTask) -> ReplicaOutcome:
    """Run one replica and count every observable. Module-level so worker processes can import it."""
    config = task.config
    scenario = _scenario_from_json(config.model_dump_json())
    rng = replica_generator(config.simulation.seed, task.stream_index, STREAM_SIMULATION)
    try:
        res = run(scenario, task.K, config.simulation.t, rng, cap=config.simulation.cap, validate=False)
    except PopulationCapError as e:
        logger.warning(f"Replica {task.replica} at K={task.K:g} is unusable: {str(e)}")
        return ReplicaOutcome(K=task.K, replica=task.replica, capped=True)
    if task.ancestry_path is not None:
        res.dump_ancestry(task.ancestry_path)
    counts = {observable.label: observable.count(res) for observable in task.observables}
    distances = {}
    if task.keep_distances:
        for observable in task.observables:
            if observable.kind == "tube":
                distances[observable.label] = lineage_sup_distances(res, observable.reference)
    stats = asdict(res.stats)
    stats["compensated_count"] = float(res.alive_count - res.initial_count - res.stats.growth_compensator)
    return ReplicaOutcome(
        K=task.K,
        replica=task.replica,
        capped=res.capped,
        alive=res.alive_count,
        initial=res.initial_count,
        events=res.event_count,
        counts=counts,
        distances=distances,
        stats=stats,
    )


def map_ordered(fn: Callable, tasks: Sequence, workers: Optional[int] = None) -> List:
    """Apply fn to every task, in a process pool when more than one worker is configured."""
    workers = WORKERS if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(fn, tasks))
    return [fn(task) for task in tasks]


def run_replicas(
    config: ExperimentConfig,
    K: float,
    observables: Sequence[Observable] = (),
    keep_distances: bool = False,
    ancestry_dir: Optional[Path] = None,
    workers: Optional[int] = None,
) -> List[ReplicaOutcome]:
    """All replicas of one K, in replica order."""
    tasks = [
        ReplicaTask(
            config=config,
            K=float(K),
            replica=replica,
            observables=tuple(observables),
            keep_distances=keep_distances,
            ancestry_path=str(ancestry_dir / f"ancestry_K{K:g}_r{replica}.csv") if ancestry_dir else None,
        )
        for replica in range(config.simulation.replicas)
    ]
    start_time = time.time()
    outcomes = map_ordered(simulate_replica, tasks, workers)
    capped = sum(outcome.capped for outcome in outcomes)
    logger.info(
        f"Ran {len(outcomes)} replicas at K={K:g} ({capped} capped) in {time.time() - start_time:.2f} seconds"
    )
    return outcomes


@dataclass(frozen=True)
class ExponentSummary:
    """Exponents ln(count)/ln K of the usable replicas.

    The mean and spread are taken over replicas with a nonzero count; the
    share of zero counts is reported separately. The mean is NEG_INF when
    every usable replica has a zero count.
    """

    usable: int
    capped: int
    zero_fraction: float
    mean: Extended
    sd: float
    max: Extended


def summarize_exponents(counts: Sequence[int], K: float, capped: int = 0) -> ExponentSummary:
    exponents = [to_float(exponent(count, K)) for count in counts]
    finite = np.array([e for e in exponents if math.isfinite(e)], dtype=float)
    usable = len(exponents)
    zero_fraction = (usable - finite.size) / usable if usable else 1.0
    if finite.size == 0:
        return ExponentSummary(usable, capped, zero_fraction, NEG_INF, 0.0, NEG_INF)
    sd = float(np.std(finite, ddof=1)) if finite.size > 1 else 0.0
    return ExponentSummary(usable, capped, zero_fraction, float(np.mean(finite)), sd, float(np.max(finite)))


@dataclass
class SolvedFields:
    """Fields behind the predictions of one config."""

    constrained: Dict[float, ValueField]
    unconstrained: ValueField

    @property
    def u0(self) -> ValueField:
        return self.constrained[0.0]


def solve_fields(config: ExperimentConfig, scenario: Scenario) -> SolvedFields:
    """Solve at a=0, at every configured level and without constraint."""
    grid = config.grid
    if config.simulation.t > grid.T * (1 + 1e-12):
        raise ConfigError(f"simulation.t={config.simulation.t} exceeds the solver horizon grid.T={grid.T}")
    if grid.domain:
        domain = tuple(grid.domain)
    else:
        # One domain for every level: the unconstrained problem reaches farthest
        domain = default_domain(
            scenario, grid.T, grid.dx, NEG_INF, max(config.simulation.K), config.simulation.tail_tol
        )
    levels = sorted({0.0, *(float(a) for a in grid.a_levels)})

    def bound(a) -> float:
        v_max = grid.v_max or default_v_max(scenario, grid.T, grid.dt, a, domain)
        return max(v_max, grid.dx / grid.dt)

    constrained = {a: solve(scenario, a, grid.T, grid.dt, grid.dx, bound(a), domain) for a in levels}
    unconstrained = solve(scenario, NEG_INF, grid.T, grid.dt, grid.dx, bound(NEG_INF), domain)
    return SolvedFields(constrained, unconstrained)


def window_sup(field: ValueField, t: float, lo: float, hi: float) -> Extended:
    """Largest field value at time t over [lo, hi], NEG_INF if all masked."""
    lo = max(lo, float(field.x_grid[0]))
    hi = min(hi, float(field.x_grid[-1]))
    if lo > hi:
        return NEG_INF
    inside = field.x_grid[(field.x_grid >= lo) & (field.x_grid <= hi)]
    best: Extended = NEG_INF
    for x in (lo, hi, *inside):
        value = value_at(field, t, float(x))
        if not is_infinite(value) and (is_infinite(best) or value > best):
            best = value
    return best


def _point_value(field: ValueField, t: float, x: float) -> Extended:
    try:
        return value_at(field, t, x)
    except ValueError:
        return NEG_INF


@dataclass
class ExponentReport:
    """Rows of the compare table and the assertions they fail."""

    rows: List[Dict[str, Any]]
    failures: List[str]
    continuity: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.passed else EXIT_STATISTICAL_FAILURE


def _fail(row: Dict[str, Any], failures: List[str], message: str) -> None:
    row["holds"] = False
    row["note"] = "; ".join(filter(None, [row.get("note"), message]))
    failures.append(f"K={row['K']:g} {row['observable']}: {message}")


def check_rows(rows: List[Dict[str, Any]], config: ExperimentConfig) -> List[str]:
    """
    Check compare rows against the acceptance section, marking failing rows in place.

    Every row: no capped replicas, the mean exponent within the noise margin of
    U and the largest exponent within the noise margin of u_0. Window rows at the
    largest K: the gap to u_0 within tolerance (and shrinking in K if asked) or,
    where u_0 is masked, mostly empty replicas under a visible U and
    spine estimate.

    Returns:
        Failure messages, empty iff every assertion holds.
    """
    acceptance = config.acceptance
    failures: List[str] = []
    for row in rows:
        if row["capped"]:
            _fail(row, failures, f"{row['capped']} capped replicas make the row unusable")
        mean = row["exponent_mean"]
        if not is_infinite(mean) and not is_infinite(row["U_sup"]):
            if mean > row["U_sup"] + acceptance.noise_margin:
                _fail(row, failures, f"exponent {mean:.4f} exceeds U + {acceptance.noise_margin}")
        elif not is_infinite(mean):
            _fail(row, failures, f"exponent {mean:.4f} where U is masked")
        top_exponent = row["exponent_max"]
        if not is_infinite(top_exponent) and not is_infinite(row["u0_sup"]):
            if top_exponent > row["u0_sup"] + acceptance.noise_margin:
                _fail(row, failures, f"largest exponent {top_exponent:.4f} exceeds u_0 + {acceptance.noise_margin}")

    largest = max(row["K"] for row in rows) if rows else None
    by_observable: Dict[str, List[Dict[str, Any]]] = {}
    for row in rows:
        by_observable.setdefault(row["observable"], []).append(row)
    for label, group in by_observable.items():
        group.sort(key=lambda row: row["K"])
        if group[0]["kind"] != "window":
            continue
        top = group[-1]
        if top["K"] != largest or top["capped"]:
            continue
        if is_infinite(top["u0_sup"]):
            _check_masked(top, failures, acceptance)
            continue
        if is_infinite(top["exponent_mean"]) or abs(top["gap"]) > acceptance.exponent_tolerance:
            _fail(top, failures, f"gap to u_0 exceeds {acceptance.exponent_tolerance}")
        if acceptance.gap_decreasing and len(group) > 1:
            gaps = [row["gap"] for row in group]
            if any(g is None for g in gaps) or any(abs(b) >= abs(a) for a, b in zip(gaps, gaps[1:])):
                _fail(top, failures, f"gap to u_0 is not decreasing in K: {gaps}")
    return failures


def _check_masked(row: Dict[str, Any], failures: List[str], acceptance: AcceptanceSection) -> None:
    if row["zero_fraction"] < acceptance.masked_zero_fraction:
        _fail(
            row,
            failures,
            f"u_0 is masked but only {row['zero_fraction']:.3f} of replicas are extinct "
            f"(need {acceptance.masked_zero_fraction})",
        )
    if acceptance.masked_u_min is not None:
        visible = row["U_sup"]
        if is_infinite(visible) or visible < acceptance.masked_u_min:
            _fail(row, failures, f"u_0 is masked and U={visible} is below {acceptance.masked_u_min}")
    if acceptance.masked_fk_min is not None:
        estimate = row["fk_log_estimate"]
        if row["fk_degenerate"] or is_infinite(estimate) or estimate < acceptance.masked_fk_min:
            _fail(row, failures, f"u_0 is masked and the spine estimate {estimate} is below {acceptance.masked_fk_min}")


def run_compare(config: ExperimentConfig, workers: Optional[int] = None) -> ExponentReport:
    """
    Compare simulated exponents with the constrained and unconstrained fields.

    For every K and observable: simulate the replicas, summarize ln(count)/ln K,
    estimate the expected count with spines and read u_0 and U at the
    observable. Writes ``compare.csv`` and ``compare.json`` to the output
    directory.

    Args:
        config: Validated config.
        workers: Worker processes; defaults to LINEAGE_LAB_WORKERS.

    Returns:
        ExponentReport; its exit_code is 0 iff every assertion holds.
    """
    start_time = time.time()
    scenario = build_scenario(config)
    fields = solve_fields(config, scenario)
    observables = config_observables(config)
    t = config.simulation.t

    continuity = []
    for observable in observables:
        spread = continuity_spread({a: _point_value(f, t, observable.x) for a, f in fields.constrained.items()})
        continuity.append({"observable": observable.label, "values": spread.values, "spread": spread.spread})

    rows: List[Dict[str, Any]] = []
    for k_index, K in enumerate(config.simulation.K):
        outcomes = run_replicas(config, K, observables, workers=workers)
        usable = [outcome for outcome in outcomes if not outcome.capped]
        capped = len(outcomes) - len(usable)
        for p_index, observable in enumerate(observables):
            summary = summarize_exponents([o.counts[observable.label] for o in usable], K, capped)
            rng = replica_generator(config.simulation.seed, k_index * len(observables) + p_index, STREAM_SPINES)
            estimate = estimate_mean_count(
                scenario, K, t, observable.predicate(), config.estimation.n_spines, rng, config.simulation.tail_tol
            )
            lo, hi = observable.x - observable.radius, observable.x + observable.radius
            u0_sup = window_sup(fields.u0, t, lo, hi)
            gap = None
            if not is_infinite(summary.mean) and not is_infinite(u0_sup):
                gap = summary.mean - u0_sup
            rows.append(
                {
                    "K": float(K),
                    "t": t,
                    "observable": observable.label,
                    "kind": observable.kind,
                    "x": observable.x,
                    "radius": observable.radius,
                    "replicas": len(outcomes),
                    "usable": summary.usable,
                    "capped": capped,
                    "zero_fraction": summary.zero_fraction,
                    "exponent_mean": summary.mean,
                    "exponent_sd": summary.sd,
                    "exponent_max": summary.max,
                    "fk_log_estimate": estimate.log_estimate,
                    "fk_degenerate": estimate.degenerate,
                    "u0": _point_value(fields.u0, t, observable.x),
                    "U": _point_value(fields.unconstrained, t, observable.x),
                    "u0_sup": u0_sup,
                    "U_sup": window_sup(fields.unconstrained, t, lo, hi),
                    "gap": gap,
                    "skorohod_radius": skorohod_radius(observable.radius, observable.reference)
                    if observable.reference is not None
                    else None,
                    "holds": True,
                    "note": "",
                }
            )

    failures = check_rows(rows, config)
    report = ExponentReport(rows=rows, failures=failures, continuity=continuity)
    out = Path(config.output.directory)
    write_csv(out / "compare.csv", EXPONENT_FIELDS, rows)
    write_json(
        out / "compare.json",
        {
            "command": "compare",
            "config": _provenance(config),
            "scenario": scenario.describe(),
            "scenario_hash": scenario.scenario_hash,
            "fields": {
                "constrained": {str(a): f.describe() for a, f in fields.constrained.items()},
                "unconstrained": fields.unconstrained.describe(),
            },
            "continuity": continuity,
            "failures": failures,
            "exit_code": report.exit_code,
        },
    )
    for failure in failures:
        logger.warning(f"Assertion failed: {failure}")
    logger.info(f"Compare finished with {len(failures)} failures in {time.time() - start_time:.2f} seconds")
    return report


LINEAGE_FIELDS = [
    "K",
    "observable",
    "radius",
    "replicas",
    "used",
    "skipped",
    "window_exponent",
    "tube_exponent",
    "exponent_ratio",
    "exponent_diff",
    "median_distance",
    "holds",
    "note",
]

HISTOGRAM_FIELDS = ["K", "observable", "bin_lo", "bin_hi", "count"]


@dataclass
class LineageReport:
    rows: List[Dict[str, Any]]
    histogram: List[Dict[str, Any]]
    optimizers: Dict[str, GridPath]
    failures: List[str]

    @property
    def exit_code(self) -> int:
        return EXIT_OK if not self.failures else EXIT_STATISTICAL_FAILURE


def run_lineage_check(config: ExperimentConfig, workers: Optional[int] = None) -> LineageReport:
    """
    Check that the lineages of a window concentrate around the optimal trajectory.

    For every window (x, delta): backtrack f_o from the constrained field at
    (t, x), then count the lineages within sup distance delta of f_o and compare
    the exponent of that count with the window's. Replicas with an empty window
    are skipped. Writes ``lineage.csv``, ``lineage_histogram.csv``, one
    ``optimizer_<i>.csv`` per window and ``lineage.json``.

    Returns:
        LineageReport; exit_code 0 iff at the largest K every window's tube
        exponent lies within acceptance.lineage_tolerance of its window exponent.
    """
    start_time = time.time()
    scenario = build_scenario(config)
    fields = solve_fields(config, scenario)
    t = config.simulation.t
    out = Path(config.output.directory)
    tolerance = config.acceptance.lineage_tolerance

    windows: List[Observable] = []
    tubes: List[Observable] = []
    optimizers: Dict[str, GridPath] = {}
    failures: List[str] = []
    for index, window in enumerate(config.observables.windows):
        try:
            optimizer = backtrack(fields.u0, t, window.x)
        except ValueError as e:
            failures.append(f"{window.label}: no optimal trajectory ({str(e)})")
            continue
        optimizer.to_csv(out / f"optimizer_{index}.csv")
        optimizers[window.label] = optimizer
        windows.append(Observable(window.label, "window", window.x, window.delta))
        tubes.append(
            Observable(f"lineage:{window.label}", "tube", float(optimizer.values[-1]), window.delta, optimizer)
        )

    rows: List[Dict[str, Any]] = []
    histogram: List[Dict[str, Any]] = []
    largest = max(config.simulation.K)
    for K in config.simulation.K:
        outcomes = run_replicas(config, K, windows + tubes, keep_distances=True, workers=workers)
        for window, tube in zip(windows, tubes):
            used = [o for o in outcomes if not o.capped and o.counts[window.label] > 0]
            skipped = len(outcomes) - len(used)
            note = f"{skipped} extinct or capped replicas skipped" if skipped else ""
            window_summary = summarize_exponents([o.counts[window.label] for o in used], K)
            tube_summary = summarize_exponents([o.counts[tube.label] for o in used], K)
            distances = np.concatenate([o.distances[tube.label] for o in used]) if used else np.empty(0)
            edges = np.linspace(0.0, 4.0 * window.delta, HISTOGRAM_BINS + 1)
            counts, _ = np.histogram(np.minimum(distances, edges[-1]), bins=edges)
            for lo, hi, count in zip(edges[:-1], edges[1:], counts):
                histogram.append(
                    {"K": float(K), "observable": window.label, "bin_lo": lo, "bin_hi": hi, "count": int(count)}
                )
            ratio = diff = None
            if not used:
                row_ok = False
                note = "; ".join(filter(None, [note, "no replica with a nonzero window count"]))
            else:
                w, u = window_summary.mean, tube_summary.mean
                if is_infinite(u):
                    diff = NEG_INF
                    row_ok = False
                else:
                    ratio = u / w if w != 0 else None
                    diff = u - w
                    row_ok = abs(diff) <= tolerance
            row = {
                "K": float(K),
                "observable": window.label,
                "radius": window.delta,
                "replicas": len(outcomes),
                "used": len(used),
                "skipped": skipped,
                "window_exponent": window_summary.mean,
                "tube_exponent": tube_summary.mean,
                "exponent_ratio": ratio,
                "exponent_diff": diff,
                "median_distance": float(np.median(distances)) if distances.size else None,
                "holds": row_ok or K != largest,
                "note": note,
            }
            rows.append(row)
            if K == largest and not row_ok:
                failures.append(
                    f"K={K:g} {window.label}: tube exponent differs from window exponent by more than {tolerance}"
                )

    write_csv(out / "lineage.csv", LINEAGE_FIELDS, rows)
    write_csv(out / "lineage_histogram.csv", HISTOGRAM_FIELDS, histogram)
    write_json(
        out / "lineage.json",
        {
            "command": "lineage-check",
            "config": _provenance(config),
            "scenario_hash": scenario.scenario_hash,
            "failures": failures,
        },
    )
    for failure in failures:
        logger.warning(f"Assertion failed: {failure}")
    logger.info(f"Lineage check finished with {len(failures)} failures in {time.time() - start_time:.2f} seconds")
    return LineageReport(rows=rows, histogram=histogram, optimizers=optimizers, failures=failures)


SIMULATE_FIELDS = [
    "K",
    "replica",
    "capped",
    "initial",
    "alive",
    "events",
    "births_clonal",
    "births_mutant",
    "deaths",
    "occupation",
    "growth_compensator",
    "compensated_count",
]


def run_simulate(config: ExperimentConfig, workers: Optional[int] = None) -> List[ReplicaOutcome]:
    """Simulate every replica at every K and write ``simulate.csv`` (one row per replica)."""
    out = Path(config.output.directory)
    ancestry_dir = out / "ancestry" if config.output.dump_ancestry else None
    observables = config_observables(config)
    outcomes: List[ReplicaOutcome] = []
    for K in config.simulation.K:
        outcomes.extend(run_replicas(config, K, observables, ancestry_dir=ancestry_dir, workers=workers))
    labels = [observable.label for observable in observables]
    rows = [
        {
            "K": o.K,
            "replica": o.replica,
            "capped": o.capped,
            "initial": o.initial,
            "alive": o.alive,
            "events": o.events,
            **o.stats,
            **{f"count:{label}": o.counts.get(label) for label in labels},
        }
        for o in outcomes
    ]
    write_csv(out / "simulate.csv", SIMULATE_FIELDS + [f"count:{label}" for label in labels], rows)
    return outcomes


ESTIMATE_FIELDS = ["K", "t", "observable", "n_spines", "hits", "estimate", "std_error", "log_estimate", "degenerate"]


def run_estimate_mean(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """Spine estimates of the total count and of every observable; writes ``estimate_mean.csv``."""
    scenario = build_scenario(config)
    t = config.simulation.t
    targets: List[Tuple[str, PathPredicate]] = [("total", Always())]
    targets += [(observable.label, observable.predicate()) for observable in config_observables(config)]
    rows = []
    for k_index, K in enumerate(config.simulation.K):
        for p_index, (label, predicate) in enumerate(targets):
            rng = replica_generator(config.simulation.seed, k_index * len(targets) + p_index, STREAM_SPINES)
            estimate = estimate_mean_count(
                scenario, K, t, predicate, config.estimation.n_spines, rng, config.simulation.tail_tol
            )
            rows.append(
                {
                    "K": float(K),
                    "t": t,
                    "observable": label,
                    "n_spines": estimate.n_spines,
                    "hits": estimate.hits,
                    "estimate": estimate.estimate,
                    "std_error": estimate.std_error,
                    "log_estimate": estimate.log_estimate,
                    "degenerate": estimate.degenerate,
                }
            )
    write_csv(Path(config.output.directory) / "estimate_mean.csv", ESTIMATE_FIELDS, rows)
    return rows


SOLVE_FIELDS = ["observable", "t", "x", "a", "value", "window_sup", "min_running", "action"]


def _level_name(a: Extended) -> str:
    return "unconstrained" if is_infinite(a) else f"a{a:g}"


def run_solve(config: ExperimentConfig) -> SolvedFields:
    """
    Solve every field, write them with their metadata, and report values,
    optimal trajectories and cost profiles at the observables.
    """
    scenario = build_scenario(config)
    fields = solve_fields(config, scenario)
    out = Path(config.output.directory)
    t = config.simulation.t
    all_fields = [*fields.constrained.values(), fields.unconstrained]
    for f in all_fields:
        f.to_csv(out / f"field_{_level_name(f.a)}.csv")

    rows = []
    for index, observable in enumerate(config_observables(config)):
        lo, hi = observable.x - observable.radius, observable.x + observable.radius
        for f in all_fields:
            value = _point_value(f, t, observable.x)
            row = {
                "observable": observable.label,
                "t": t,
                "x": observable.x,
                "a": f.a,
                "value": value,
                "window_sup": window_sup(f, t, lo, hi),
                "min_running": None,
                "action": None,
            }
            if not is_infinite(value):
                path = backtrack(f, t, observable.x)
                if path.n_segments > 0:
                    profile = cost_profile(scenario, path)
                    profile.to_csv(out / f"profile_{_level_name(f.a)}_{index}.csv")
                    row["min_running"] = profile.min_running
                    row["action"] = profile.action
                path.to_csv(out / f"optimizer_{_level_name(f.a)}_{index}.csv")
            rows.append(row)
    residual, share = hj_residual(fields.unconstrained, scenario, config.grid.smoothness_threshold)
    write_csv(out / "solve.csv", SOLVE_FIELDS, rows)
    write_json(
        out / "solve.json",
        {
            "command": "solve",
            "config": _provenance(config),
            "scenario_hash": scenario.scenario_hash,
            "residual": {"max": residual, "tested_share": share},
        },
    )
    return fields

