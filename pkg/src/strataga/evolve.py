"""Generational elitist search over partitions of atomic strata.

Two engines share one loop. The classical engine treats the label vector
as a flat genome: single-point crossover plus per-gene resampling. The
grouping engine works on the list of groups instead: crossover injects a
section of one parent's group list into the other and repairs duplicates,
and an inversion operator reorders the group list without changing the
encoded partition, which biases what future crossovers keep together.

Group order convention: the groups of a chromosome are read in ascending
label order. Freshly renumbered chromosomes therefore list groups by first
appearance, while inversion encodes a deliberate different order by
reassigning the label values themselves.

Fitness is the allocation cost of the decoded partition (sample size under
the default cost model), so lower is better throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allocation import (
    Allocation,
    AllocationSettings,
    CostModel,
    DEFAULT_COST,
    DEFAULT_SETTINGS,
    bethel_allocate,
    variance_bounds,
)
from .errors import InvalidArgsError, LengthMismatchError, ZeroTotalError
from .strata import AtomicStrataSet, decode_partition


@dataclass
class Chromosome:
    """Integer label vector over the K atomic strata, labels in [1, K]."""

    labels: np.ndarray
    fitness: float | None = None
    n_groups: int | None = None  # cached stratum count of the decoded partition

    def copy(self) -> "Chromosome":
        return Chromosome(self.labels.copy(), self.fitness, self.n_groups)

    @property
    def size(self) -> int:
        return int(self.labels.size)


@dataclass(frozen=True)
class GaConfig:
    """Search parameters shared by both engines."""

    pop_size: int = 20
    iterations: int = 400
    elitism_rate: float = 0.2
    mutation_prob: float = 0.05
    inversion_prob: float = 0.05  # grouping engine only
    engine: str = "grouping"  # "classical" or "grouping"
    seed: int | None = None
    stop_at: float | None = None  # early stop once best fitness <= this

    def __post_init__(self):
        if self.pop_size < 2:
            raise ValueError("population size must be at least 2")
        if not 0 <= self.elitism_rate < 1:
            raise ValueError("elitism rate must lie in [0, 1)")
        for p in (self.mutation_prob, self.inversion_prob):
            if not 0 <= p <= 1:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.engine not in ("classical", "grouping"):
            raise ValueError("engine must be 'classical' or 'grouping'")
        if self.iterations < 1:
            raise ValueError("at least one iteration is required")

    @property
    def n_elite(self) -> int:
        return math.floor(self.elitism_rate * self.pop_size)


@dataclass
class RunResult:
    """Outcome of one domain's search."""

    best: Chromosome
    best_allocation: Allocation | None
    convergence: list[tuple[float, float]]  # (best, mean) per iteration
    chromosomes_generated: int
    iterations_run: int


def chromosomes_generated(pop_size: int, n_elite: int, iterations: int) -> int:
    """Chromosomes produced by a full elitist generational run.

    The initial population plus ``pop_size - n_elite`` new offspring in each
    of the remaining iterations.
    """
    if not (pop_size > n_elite >= 0):
        raise InvalidArgsError("need pop_size > n_elite >= 0")
    if iterations < 1:
        raise InvalidArgsError("need at least one iteration")
    return pop_size + (pop_size - n_elite) * (iterations - 1)


def init_population(k: int, pop_size: int, rng: np.random.Generator) -> list[Chromosome]:
    """Random initial population: labels i.i.d. uniform on [1, K]."""
    if k < 1:
        raise InvalidArgsError("need at least one atomic stratum")
    if pop_size < 2:
        raise InvalidArgsError("population size must be at least 2")
    return [
        Chromosome(rng.integers(1, k + 1, size=k, dtype=np.int64))
        for _ in range(pop_size)
    ]


def evaluate(
    chrom: Chromosome,
    atoms: AtomicStrataSet,
    cv_limits,
    cost: CostModel = DEFAULT_COST,
    settings: AllocationSettings = DEFAULT_SETTINGS,
) -> float:
    """Fitness of a chromosome: allocation cost of its decoded partition.

    The value (and the stratum count) is cached on the chromosome. A zero
    target total makes the CV constraint meaningless, which is reported as
    an infinite fitness rather than an exception so a search can continue.
    """
    if chrom.fitness is not None:
        return chrom.fitness
    strat = decode_partition(chrom.labels, atoms)
    chrom.n_groups = strat.n_strata
    try:
        bounds = variance_bounds(strat, cv_limits)
        alloc = bethel_allocate(strat, bounds, cost, settings)
    except ZeroTotalError:
        chrom.fitness = math.inf
        return chrom.fitness
    chrom.fitness = alloc.cost
    return chrom.fitness


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def renumber(chrom: Chromosome) -> Chromosome:
    """Canonicalize labels to 1..H by first appearance; idempotent."""
    labels = chrom.labels
    _, first_idx, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return Chromosome((rank[inverse] + 1).astype(np.int64))


def ga_crossover(p1: Chromosome, p2: Chromosome, rng: np.random.Generator) -> Chromosome:
    """Single-point crossover on the flat label vectors."""
    if p1.size != p2.size:
        raise LengthMismatchError(p1.size, p2.size)
    k = p1.size
    if k < 2:
        return Chromosome(p1.labels.copy())
    cut = int(rng.integers(1, k))  # cut after position `cut`, in [1, K-1]
    child = np.concatenate([p1.labels[:cut], p2.labels[cut:]])
    return Chromosome(child)


def group_view(labels: np.ndarray) -> list[tuple[int, list[int]]]:
    """Groups of a chromosome as (label, member indices), ascending label."""
    order = np.argsort(labels, kind="stable")
    groups: list[tuple[int, list[int]]] = []
    for idx in order.tolist():
        lab = int(labels[idx])
        if groups and groups[-1][0] == lab:
            groups[-1][1].append(idx)
        else:
            groups.append((lab, [idx]))
    return groups


def _labels_from_groups(groups: list[list[int]], k: int) -> np.ndarray:
    """Label vector whose groups, read in ascending label, are ``groups``."""
    labels = np.empty(k, dtype=np.int64)
    for pos, members in enumerate(groups):
        labels[members] = pos + 1
    return labels


def _pick_section(n: int, rng: np.random.Generator) -> tuple[int, int]:
    """Two distinct cut points over n groups: a non-empty slice [a, b)."""
    a, b = sorted(rng.choice(n + 1, size=2, replace=False).tolist())
    return int(a), int(b)


def _inject(donor: list[list[int]], a: int, b: int,
            host: list[list[int]], at: int, k: int) -> np.ndarray:
    """Insert donor[a:b] into host at position ``at`` and repair duplicates."""
    section = [list(g) for g in donor[a:b]]
    injected = set()
    for g in section:
        injected.update(g)
    repaired = []
    for pos, g in enumerate(host):
        if pos == at:
            repaired.extend(section)
        kept = [i for i in g if i not in injected]
        if kept:
            repaired.append(kept)
    if at == len(host):
        repaired.extend(section)
    return _labels_from_groups(repaired, k)


def gga_crossover(p1: Chromosome, p2: Chromosome, rng: np.random.Generator) -> Chromosome:
    """Group-injection crossover.

    A contiguous section of the first parent's group list is inserted into
    the second parent's group list, at the start of a section chosen there
    the same way. Members of the injected groups are deleted from the
    groups they occupied before, emptied groups are dropped, and labels are
    reassigned consecutively along the resulting group order.
    """
    if p1.size != p2.size:
        raise LengthMismatchError(p1.size, p2.size)
    donor = [g for _, g in group_view(p1.labels)]
    host = [g for _, g in group_view(p2.labels)]
    a, b = _pick_section(len(donor), rng)
    at, _ = _pick_section(len(host), rng)
    return Chromosome(_inject(donor, a, b, host, at, p1.size))


def mutate(chrom: Chromosome, prob: float, rng: np.random.Generator) -> Chromosome:
    """Per-gene resampling within the chromosome's current label range.

    Each gene is independently replaced, with probability ``prob``, by a
    uniform draw from [1, max label]; the maximum is taken once before any
    gene changes. Resampling a gene to its current value is allowed.
    """
    labels = chrom.labels.copy()
    if labels.size == 0 or prob == 0:
        return Chromosome(labels)
    g_max = int(labels.max())
    hit = rng.random(labels.size) < prob
    n_hit = int(hit.sum())
    if n_hit:
        labels[hit] = rng.integers(1, g_max + 1, size=n_hit, dtype=np.int64)
    return Chromosome(labels)


def _invert_section(groups: list[list[int]], a: int, b: int, k: int) -> np.ndarray:
    reordered = groups[:a] + groups[a:b][::-1] + groups[b:]
    return _labels_from_groups(reordered, k)


def invert(chrom: Chromosome, prob: float, rng: np.random.Generator) -> Chromosome:
    """Reverse a random section of the group order, with probability ``prob``.

    The encoded partition is unchanged; only the group order (carried by
    the label values) is, which alters what later crossovers treat as a
    contiguous section.
    """
    if prob > 0 and rng.random() < prob:
        groups = [g for _, g in group_view(chrom.labels)]
        a, b = _pick_section(len(groups), rng)
        return Chromosome(_invert_section(groups, a, b, chrom.size))
    return Chromosome(chrom.labels.copy())


# ---------------------------------------------------------------------------
# generational loop
# ---------------------------------------------------------------------------


def _sort_population(population: list[Chromosome]) -> list[Chromosome]:
    # ascending (fitness, stratum count); stable, so insertion order breaks ties
    return sorted(population, key=lambda c: (c.fitness, c.n_groups))


def evolve_domain(
    atoms: AtomicStrataSet,
    cv_limits,
    cost: CostModel = DEFAULT_COST,
    alloc_settings: AllocationSettings = DEFAULT_SETTINGS,
    config: GaConfig = GaConfig(),
    rng: np.random.Generator | None = None,
) -> RunResult:
    """Run the configured engine on one domain's atomic strata.

    Each iteration evaluates and sorts the population ascending by fitness,
    copies the first ``E = floor(e * p)`` chromosomes unchanged, and fills
    the remaining slots with offspring of parents drawn uniformly from the
    whole previous generation. Offspring pass through crossover, then
    mutation, then (grouping engine) inversion. Runs for the configured
    number of iterations, or stops as soon as ``stop_at`` is reached.

    Args:
        atoms: the domain's atomic strata.
        cv_limits: per-target CV upper limits for this domain.
        cost: cost model used by the fitness evaluation.
        alloc_settings: allocation solver knobs.
        config: engine and loop parameters.
        rng: optional generator; defaults to one seeded from ``config.seed``.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    k = atoms.size
    n_elite = config.n_elite
    grouping = config.engine == "grouping"

    population = init_population(k, config.pop_size, rng)
    generated = len(population)
    for chrom in population:
        evaluate(chrom, atoms, cv_limits, cost, alloc_settings)
    population = _sort_population(population)

    convergence: list[tuple[float, float]] = []

    def log_generation():
        fits = [c.fitness for c in population]
        convergence.append((population[0].fitness, float(np.mean(fits))))

    log_generation()
    iterations_run = 1

    def done() -> bool:
        return (
            config.stop_at is not None
            and population[0].fitness <= config.stop_at
        )

    while iterations_run < config.iterations and not done():
        elites = [population[i].copy() for i in range(n_elite)]
        offspring = []
        for _ in range(config.pop_size - n_elite):
            i, j = rng.integers(0, config.pop_size, size=2)
            p1, p2 = population[int(i)], population[int(j)]
            child = gga_crossover(p1, p2, rng) if grouping else ga_crossover(p1, p2, rng)
            child = mutate(child, config.mutation_prob, rng)
            if grouping:
                child = invert(child, config.inversion_prob, rng)
            evaluate(child, atoms, cv_limits, cost, alloc_settings)
            offspring.append(child)
        generated += len(offspring)
        population = _sort_population(elites + offspring)
        log_generation()
        iterations_run += 1

    best = population[0]
    best_allocation = None
    if math.isfinite(best.fitness):
        strat = decode_partition(best.labels, atoms)
        best_allocation = bethel_allocate(
            strat, variance_bounds(strat, cv_limits), cost, alloc_settings
        )
    return RunResult(
        best=best.copy(),
        best_allocation=best_allocation,
        convergence=convergence,
        chromosomes_generated=generated,
        iterations_run=iterations_run,
    )
