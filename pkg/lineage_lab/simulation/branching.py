"""
Exact simulation of the birth-death-mutation process with full ancestry.

Every individual carries an exponential clock of rate Lambda(x) = b(x) + p(x) + d(x)
and the pending clocks sit in a min-heap. At a ring the event is a clonal birth,
a death or a mutant birth with probabilities b : d : p. A birth closes the
mother's record (fate REPRODUCED) and appends two records: the mother's
continuation with the same trait and the child, whose trait is the mother's
plus y / ln K with y drawn from the mutation kernel.

Times are stored in model units. Public results use rescaled time
s = model_time / ln K.
"""

import heapq
import logging
import math
import time
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from lineage_lab.functional.paths import GridPath, Interpolation
from lineage_lab.scenario.scenario import Scenario, ScenarioError
from lineage_lab.utils.constants import POPULATION_CAP
from lineage_lab.utils.io import write_csv
from lineage_lab.utils.sentinel import NEG_INF, Extended

from .initial import initial_profile

logger = logging.getLogger(__name__)

# Random numbers are drawn in blocks; the consumption order is fixed, so runs stay reproducible
_BLOCK = 4096

NO_PARENT = -1


class Fate(IntEnum):
    ALIVE = 0
    DIED = 1
    REPRODUCED = 2


@dataclass(frozen=True)
class Individual:
    """One record of the ancestry (model time)."""

    id: int
    parent: Optional[int]
    birth_time: float
    trait: float
    death_time: Optional[float]
    fate: Fate
    mutant: bool


@dataclass(frozen=True)
class RunStats:
    """Event counts and time integrals of one run (model time).

    Attributes:
        births_clonal: Clonal births.
        births_mutant: Mutant births.
        deaths: Deaths.
        occupation: ∫ <Z_s, 1> ds.
        growth_compensator: ∫ <Z_s, R> ds.
    """

    births_clonal: int
    births_mutant: int
    deaths: int
    occupation: float
    growth_compensator: float

    @property
    def births(self) -> int:
        return self.births_clonal + self.births_mutant


class Ancestry:
    """Append-only columnar store of individuals; ids are row indices.

    A parent's id is always smaller than its children's ids.
    """

    def __init__(
        self,
        parent: np.ndarray,
        birth_time: np.ndarray,
        trait: np.ndarray,
        death_time: np.ndarray,
        fate: np.ndarray,
        mutant: np.ndarray,
    ):
        self.parent = parent
        self.birth_time = birth_time
        self.trait = trait
        self.death_time = death_time
        self.fate = fate
        self.mutant = mutant
        for column in (parent, birth_time, trait, death_time, fate, mutant):
            column.setflags(write=False)

    def __len__(self) -> int:
        return self.parent.size

    def __getitem__(self, index: int) -> Individual:
        if not 0 <= index < len(self):
            raise KeyError(f"Unknown individual id {index}")
        parent = int(self.parent[index])
        death = float(self.death_time[index])
        return Individual(
            id=int(index),
            parent=None if parent == NO_PARENT else parent,
            birth_time=float(self.birth_time[index]),
            trait=float(self.trait[index]),
            death_time=None if math.isnan(death) else death,
            fate=Fate(int(self.fate[index])),
            mutant=bool(self.mutant[index]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Final population and ancestry of one run.

    Attributes:
        scenario_hash: Hash of the scenario description.
        K: Population scale.
        horizon_t: Requested horizon in rescaled time.
        end_time: Rescaled time at which the run stopped (horizon_t unless capped).
        ancestry: All records.
        alive: Sorted ids of the individuals alive at end_time.
        initial_count: N_0.
        event_count: Number of processed events.
        capped: Whether the live count exceeded the cap.
        stats: Event counts and time integrals.
    """

    scenario_hash: str
    K: float
    horizon_t: float
    end_time: float
    ancestry: Ancestry
    alive: np.ndarray
    initial_count: int
    event_count: int
    capped: bool
    stats: RunStats

    @property
    def log_k(self) -> float:
        return math.log(self.K)

    @property
    def alive_count(self) -> int:
        return int(self.alive.size)

    @property
    def alive_traits(self) -> np.ndarray:
        return self.ancestry.trait[self.alive]

    def dump_ancestry(self, path: Union[str, Path]) -> Path:
        """Write ``id,parent,birth_time,trait,death_time,fate`` rows in rescaled time."""
        ancestry = self.ancestry
        log_k = self.log_k

        def rows():
            for i in range(len(ancestry)):
                parent = int(ancestry.parent[i])
                death = float(ancestry.death_time[i])
                yield {
                    "id": i,
                    "parent": "" if parent == NO_PARENT else parent,
                    "birth_time": float(ancestry.birth_time[i]) / log_k,
                    "trait": float(ancestry.trait[i]),
                    "death_time": "" if math.isnan(death) else death / log_k,
                    "fate": Fate(int(ancestry.fate[i])).name.lower(),
                }

        return write_csv(path, ["id", "parent", "birth_time", "trait", "death_time", "fate"], rows())


class _Draws:
    """Buffered exponential, uniform and jump variates from one generator."""

    def __init__(self, rng: np.random.Generator, scenario: Scenario):
        self._rng = rng
        self._kernel = scenario.kernel
        self._exponential: List[float] = []
        self._uniform: List[float] = []
        self._jump: List[float] = []

    def exponential(self) -> float:
        if not self._exponential:
            self._exponential = self._rng.standard_exponential(_BLOCK).tolist()[::-1]
        return self._exponential.pop()

    def uniform(self) -> float:
        if not self._uniform:
            self._uniform = self._rng.random(_BLOCK).tolist()[::-1]
        return self._uniform.pop()

    def jump(self) -> float:
        if not self._jump:
            self._jump = self._kernel.sample_jumps(self._rng, _BLOCK).tolist()[::-1]
        return self._jump.pop()


def run(
    s: Scenario,
    K: float,
    t: float,
    rng: np.random.Generator,
    cap: int = POPULATION_CAP,
    initial_traits: Optional[Sequence[float]] = None,
    validate: bool = True,
) -> SimulationResult:
    """
    Simulate the population up to rescaled time t.

    Args:
        s: Scenario.
        K: Population scale, at least 2.
        t: Rescaled horizon; the model horizon is t ln K.
        rng: Random stream. The initial condition is drawn from it first unless
            ``initial_traits`` is given.
        cap: Largest live count; exceeding it stops the run with ``capped=True``.
        initial_traits: Explicit initial population.
        validate: Reject scenarios that violate the standing assumptions.

    Returns:
        SimulationResult.
    """
    if t < 0:
        raise ValueError(f"Horizon must be nonnegative, got {t}")
    if cap < 1:
        raise ValueError(f"Population cap must be at least 1, got {cap}")
    if K < 2:
        raise ValueError(f"K must be at least 2, got {K}")
    if validate:
        violations = s.validate()
        if violations:
            raise ScenarioError(f"Scenario {s.name} violates standing assumptions: {violations[0]}")

    start_time = time.time()
    log_k = math.log(K)
    horizon = t * log_k
    if initial_traits is None:
        initial_traits = initial_profile(s, K).sample(rng, cap)
    initial_traits = [float(x) for x in initial_traits]

    draws = _Draws(rng, s)
    parent: List[int] = []
    birth_time: List[float] = []
    trait: List[float] = []
    death_time: List[float] = []
    fate: List[int] = []
    mutant: List[bool] = []
    # Per-record event thresholds (clonal, clonal + death), total rate and growth rate
    thresholds: List[tuple] = []
    growth: List[float] = []
    queue: List[tuple] = []

    def rates_of(x: float) -> tuple:
        rates = s.rates_at(x)
        total = rates.lambda_total
        if total > 0:
            bounds = (rates.b / total, (rates.b + rates.d) / total)
        else:
            bounds = (0.0, 0.0)
        return bounds, total, rates.big_r

    def add(mother: int, now: float, x: float, is_mutant: bool, rates: tuple) -> None:
        index = len(parent)
        parent.append(mother)
        birth_time.append(now)
        trait.append(x)
        death_time.append(math.nan)
        fate.append(Fate.ALIVE)
        mutant.append(is_mutant)
        bounds, total, big_r = rates
        thresholds.append((bounds, total))
        growth.append(big_r)
        if total > 0:
            heapq.heappush(queue, (now + draws.exponential() / total, index))

    alive_count = 0
    growth_sum = 0.0
    for x in initial_traits:
        rates = rates_of(x)
        add(NO_PARENT, 0.0, x, False, rates)
        alive_count += 1
        growth_sum += rates[2]

    capped = alive_count > cap
    now = 0.0
    occupation = 0.0
    compensator = 0.0
    births_clonal = births_mutant = deaths = 0
    events = 0

    while queue and not capped:
        event_time, index = queue[0]
        if event_time > horizon:
            break
        heapq.heappop(queue)
        occupation += (event_time - now) * alive_count
        compensator += (event_time - now) * growth_sum
        now = event_time
        events += 1

        (clonal_bound, death_bound), _ = thresholds[index]
        draw = draws.uniform()
        death_time[index] = now
        if clonal_bound <= draw < death_bound:
            fate[index] = Fate.DIED
            deaths += 1
            alive_count -= 1
            growth_sum -= growth[index]
            continue

        fate[index] = Fate.REPRODUCED
        x = trait[index]
        mother_rates = ((clonal_bound, death_bound), thresholds[index][1], growth[index])
        add(index, now, x, False, mother_rates)
        if draw < clonal_bound:
            births_clonal += 1
            child_rates = mother_rates
            child = x
        else:
            births_mutant += 1
            child = x + draws.jump() / log_k
            child_rates = rates_of(child)
        add(index, now, child, draw >= clonal_bound, child_rates)
        alive_count += 1
        growth_sum += child_rates[2]
        if alive_count > cap:
            capped = True

    if capped:
        logger.warning(
            f"Run of {s.name} at K={K:g} capped at {alive_count} individuals "
            f"(rescaled time {now / log_k:.4f} of {t})"
        )
        end = now
    else:
        end = horizon
        occupation += (end - now) * alive_count
        compensator += (end - now) * growth_sum

    fate_array = np.array(fate, dtype=np.int8)
    ancestry = Ancestry(
        parent=np.array(parent, dtype=np.int64),
        birth_time=np.array(birth_time, dtype=float),
        trait=np.array(trait, dtype=float),
        death_time=np.array(death_time, dtype=float),
        fate=fate_array,
        mutant=np.array(mutant, dtype=bool),
    )
    alive = np.flatnonzero(fate_array == Fate.ALIVE)
    alive.setflags(write=False)
    stats = RunStats(births_clonal, births_mutant, deaths, occupation, compensator)
    logger.info(
        f"Simulated {s.name} at K={K:g}, t={t}: {len(initial_traits)} -> {alive.size} individuals, "
        f"{events} events in {time.time() - start_time:.2f} seconds"
    )
    return SimulationResult(
        scenario_hash=s.scenario_hash,
        K=float(K),
        horizon_t=float(t),
        end_time=end / log_k,
        ancestry=ancestry,
        alive=alive,
        initial_count=len(initial_traits),
        event_count=events,
        capped=capped,
        stats=stats,
    )


def _record_end(res: SimulationResult) -> np.ndarray:
    """Rescaled end of every record's life (end_time for the living)."""
    ends = res.ancestry.death_time / res.log_k
    return np.where(np.isnan(ends), res.end_time, ends)


def lineage(res: SimulationResult, individual: int) -> GridPath:
    """
    Ancestral trait path of an individual in rescaled time.

    The path is piecewise constant and right-continuous on [0, end], with end the
    individual's death time or the end of the run, and has a node at every
    mutant birth along the ancestry.
    """
    ancestry = res.ancestry
    if not 0 <= individual < len(ancestry):
        raise KeyError(f"Unknown individual id {individual}")
    end = float(_record_end(res)[individual])
    jumps = []
    current = individual
    while True:
        parent = int(ancestry.parent[current])
        if parent == NO_PARENT:
            break
        if ancestry.trait[current] != ancestry.trait[parent]:
            jumps.append((float(ancestry.birth_time[current]) / res.log_k, float(ancestry.trait[current])))
        current = parent
    root_trait = float(ancestry.trait[current])
    jumps.reverse()
    times = [0.0] + [time_ for time_, _ in jumps]
    values = [root_trait] + [value for _, value in jumps]
    if end > times[-1]:
        times.append(end)
        values.append(values[-1])
    return GridPath(np.array(times), np.array(values), Interpolation.PIECEWISE_CONSTANT)


def count_window(res: SimulationResult, x: float, delta: float) -> int:
    """Alive individuals with trait in [x - delta, x + delta]."""
    if not delta > 0:
        raise ValueError(f"Window half-width must be positive, got {delta}")
    traits = res.alive_traits
    return int(np.count_nonzero(np.abs(traits - x) <= delta))


class _RangeExtrema:
    """Sparse tables answering min and max over index ranges in O(1)."""

    def __init__(self, values: np.ndarray):
        self._min = [values]
        self._max = [values]
        width = 1
        while 2 * width <= values.size:
            low, high = self._min[-1], self._max[-1]
            self._min.append(np.minimum(low[:-width], low[width:]))
            self._max.append(np.maximum(high[:-width], high[width:]))
            width *= 2

    def query(self, lo: np.ndarray, hi: np.ndarray):
        """Min and max over [lo, hi) for ranges with hi > lo."""
        length = hi - lo
        level = np.floor(np.log2(length)).astype(int)
        low = np.empty(lo.size)
        high = np.empty(lo.size)
        for k in np.unique(level):
            rows = level == k
            left = lo[rows]
            right = hi[rows] - (1 << int(k))
            low[rows] = np.minimum(self._min[k][left], self._min[k][right])
            high[rows] = np.maximum(self._max[k][left], self._max[k][right])
        return low, high


def lineage_sup_distances(res: SimulationResult, f: GridPath, ids: Optional[Iterable[int]] = None) -> np.ndarray:
    """
    Sup-norm distance of lineages to a reference path, in one pass over the tree.

    Each record holds a constant trait on its life interval, so its distance to f
    is attained at an endpoint of that interval or at a node of f inside it; the
    distance of a lineage is the running maximum along its ancestry.

    Args:
        res: Simulation result.
        f: Reference path covering [0, end_time].
        ids: Individuals to report; defaults to the alive ones.

    Returns:
        Distances in the order of ``ids``.
    """
    if f.t0 > 0 or f.t_end < res.end_time - 1e-12 * max(res.end_time, 1.0):
        raise ValueError(f"Reference path must cover [0, {res.end_time}], got [{f.t0}, {f.t_end}]")
    ids = res.alive if ids is None else np.asarray(list(ids), dtype=np.int64)
    ancestry = res.ancestry
    if len(ancestry) == 0:
        return np.zeros(0)

    starts = ancestry.birth_time / res.log_k
    ends = np.minimum(_record_end(res), f.t_end)
    traits = ancestry.trait
    distance = np.maximum(np.abs(traits - f.value_at(starts)), np.abs(traits - f.left_limit(ends)))
    # Closed records hold their trait on [start, end); living ones also at the end time
    living = np.isnan(ancestry.death_time)
    distance[living] = np.maximum(distance[living], np.abs(traits[living] - f.value_at(ends[living])))

    lo = np.searchsorted(f.times, starts, side="right")
    hi = np.searchsorted(f.times, ends, side="left")
    inside = hi > lo
    if np.any(inside):
        low, high = _RangeExtrema(f.values).query(lo[inside], hi[inside])
        held = traits[inside]
        distance[inside] = np.maximum(distance[inside], np.maximum(high - held, held - low))

    parents = ancestry.parent.tolist()
    running = distance.tolist()
    for index, parent in enumerate(parents):
        if parent != NO_PARENT and running[parent] > running[index]:
            running[index] = running[parent]
    return np.asarray(running)[ids]


def count_tube(res: SimulationResult, f: GridPath, eps: float) -> int:
    """Alive individuals whose whole lineage stays within sup-distance eps of f."""
    if not eps > 0:
        raise ValueError(f"Tube radius must be positive, got {eps}")
    return int(np.count_nonzero(lineage_sup_distances(res, f) <= eps))


def exponent(count: int, K: float) -> Extended:
    """ln(count) / ln(K); NEG_INF for an empty set."""
    if count < 0:
        raise ValueError(f"Count must be nonnegative, got {count}")
    if K < 2:
        raise ValueError(f"K must be at least 2, got {K}")
    if count == 0:
        return NEG_INF
    return math.log(count) / math.log(K)


def compensated_count(res: SimulationResult) -> float:
    """<Z_t, 1> - <Z_0, 1> - ∫ <Z_s, R> ds (model time); a mean-zero martingale at t."""
    return res.alive_count - res.initial_count - res.stats.growth_compensator


def second_moment_ratio(counts: Sequence[float]) -> float:
    """E[N^2] / E[N]^2 over replicas."""
    values = np.asarray(counts, dtype=float)
    if values.size == 0:
        raise ValueError("second_moment_ratio needs at least one count")
    mean = float(np.mean(values))
    if mean == 0:
        raise ValueError("second_moment_ratio is undefined when every count is zero")
    return float(np.mean(values**2) / mean**2)
