"""Exhaustive certification of small instances.

Every set partition of the K atomic strata is enumerated once, as a
restricted growth string (the label of element i never exceeds one plus
the maximum label before it), and scored with the same fitness as the
genetic engines. The stream is O(K) in memory; the count is the K-th Bell
number, so a hard guard refuses K > 15 unless explicitly overridden.
"""

from __future__ import annotations

from typing import Iterator

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
from .errors import InvalidArgsError, PartitionTooLargeError
from .evolve import Chromosome, evaluate
from .strata import AtomicStrataSet, decode_partition

MAX_ENUMERABLE = 15


def bell_number(k: int) -> int:
    """K-th Bell number via the Bell triangle."""
    if k < 0:
        raise InvalidArgsError("k must be non-negative")
    row = [1]
    for _ in range(k - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]


def enumerate_partitions(k: int, *, allow_large: bool = False) -> Iterator[np.ndarray]:
    """Yield every partition of {1..k} once, as canonical 1-based labels.

    Partitions appear in restricted-growth order, starting from the single
    all-ones grouping and ending with the all-singletons one.

    Raises:
        PartitionTooLargeError: if ``k`` exceeds the enumeration guard and
            ``allow_large`` was not set.
    """
    if k < 1:
        raise InvalidArgsError("k must be at least 1")
    if k > MAX_ENUMERABLE and not allow_large:
        raise PartitionTooLargeError(k, bell_number(k))
    labels = np.ones(k, dtype=np.int64)
    prefix_max = np.ones(k, dtype=np.int64)  # max label among positions 0..i-1, 1 at 0
    while True:
        yield labels.copy()
        j = k - 1
        while j > 0 and labels[j] > prefix_max[j]:
            j -= 1
        if j == 0:
            return
        labels[j] += 1
        cap = max(prefix_max[j], labels[j])
        for t in range(j + 1, k):
            labels[t] = 1
            prefix_max[t] = cap


def brute_force_optimum(
    atoms: AtomicStrataSet,
    cv_limits,
    cost: CostModel = DEFAULT_COST,
    settings: AllocationSettings = DEFAULT_SETTINGS,
    *,
    allow_large: bool = False,
) -> tuple[Chromosome, Allocation | None]:
    """Certify the global optimum by scoring every partition.

    Uses the same evaluation as the genetic engines; ties are resolved like
    the generational sort, preferring fewer strata and then the earlier
    enumeration position.
    """
    best: Chromosome | None = None
    for labels in enumerate_partitions(atoms.size, allow_large=allow_large):
        chrom = Chromosome(labels)
        evaluate(chrom, atoms, cv_limits, cost, settings)
        if best is None or (chrom.fitness, chrom.n_groups) < (best.fitness, best.n_groups):
            best = chrom
    alloc = None
    if np.isfinite(best.fitness):
        strat = decode_partition(best.labels, atoms)
        alloc = bethel_allocate(strat, variance_bounds(strat, cv_limits), cost, settings)
    return best, alloc
