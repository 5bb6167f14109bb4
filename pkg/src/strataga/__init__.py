"""Joint stratification and minimum sample allocation search.

Builds atomic strata from the cross-classification of categorical
auxiliary variables, then searches the partitions of those cells for the
stratification whose minimum-cost allocation meets per-domain CV limits
on every target estimate. Ships a grouping genetic engine, a classical
genetic baseline and an exhaustive oracle for small instances.
"""

from .allocation import (
    Allocation,
    AllocationSettings,
    CostModel,
    PrecisionConstraints,
    bethel_allocate,
    realized_cv,
    total_cost,
    variance_bounds,
)
from .errors import StratagaError
from .evaluate import DesignEvaluation, draw_stratified_sample, expected_cv
# the chromosome-fitness function stays at strataga.evolve.evaluate so the
# package attribute `evaluate` keeps pointing at the sampling submodule
from .evolve import (
    Chromosome,
    GaConfig,
    RunResult,
    chromosomes_generated,
    evolve_domain,
    ga_crossover,
    gga_crossover,
    init_population,
    invert,
    mutate,
    renumber,
)
from .frame import DomainFrame, Frame, FrameSchema, discretize, load_frame, split_domains
from .oracle import bell_number, brute_force_optimum, enumerate_partitions
from .strata import (
    AtomicStrataSet,
    AtomicStratum,
    Stratification,
    StratumStats,
    build_atomic_strata,
    decode_partition,
    merge_group,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "AllocationSettings",
    "AtomicStrataSet",
    "AtomicStratum",
    "Chromosome",
    "CostModel",
    "DesignEvaluation",
    "DomainFrame",
    "Frame",
    "FrameSchema",
    "GaConfig",
    "PrecisionConstraints",
    "RunResult",
    "Stratification",
    "StratumStats",
    "StratagaError",
    "bell_number",
    "bethel_allocate",
    "brute_force_optimum",
    "build_atomic_strata",
    "chromosomes_generated",
    "decode_partition",
    "discretize",
    "draw_stratified_sample",
    "enumerate_partitions",
    "evolve_domain",
    "expected_cv",
    "ga_crossover",
    "gga_crossover",
    "init_population",
    "invert",
    "load_frame",
    "merge_group",
    "mutate",
    "realized_cv",
    "renumber",
    "split_domains",
    "total_cost",
    "variance_bounds",
]
