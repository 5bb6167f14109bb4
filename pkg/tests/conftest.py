import numpy as np
import pytest

from strataga.datasets import iris_frame
from strataga.frame import split_domains
from strataga.strata import AtomicStrataSet, Stratification, build_atomic_strata


@pytest.fixture(scope="session")
def iris():
    return iris_frame()


@pytest.fixture(scope="session")
def iris_domain(iris):
    return split_domains(iris)[0]


@pytest.fixture(scope="session")
def iris_atoms(iris_domain):
    return build_atomic_strata(iris_domain)


def random_instance(rng, max_h=20, max_g=5, allow_zero_sd=True):
    """Random per-stratum population stats for allocation tests."""
    h = int(rng.integers(1, max_h + 1))
    g = int(rng.integers(1, max_g + 1))
    sizes = rng.integers(1, 400, size=h).astype(float)
    means = rng.uniform(0.5, 60.0, size=(h, g))
    sds = rng.uniform(0.0 if allow_zero_sd else 0.05, 1.0, size=(h, g)) * means
    if allow_zero_sd and h > 1:
        # sprinkle exact-zero-variance strata, singletons included
        wipe = rng.random(h) < 0.15
        sds[wipe] = 0.0
        sizes[int(rng.integers(0, h))] = float(rng.integers(1, 3))
    sds[sizes == 1] = 0.0
    return sizes, means, sds


def as_stratification(sizes, means, sds):
    """Wrap raw per-stratum arrays in a Stratification for the allocator."""
    h = len(sizes)
    atoms = AtomicStrataSet(
        domain="synthetic",
        keys=tuple(f"cell{i}" for i in range(h)),
        key_tuples=tuple((f"cell{i}",) for i in range(h)),
        key_codes=np.arange(h, dtype=np.int64)[:, None],
        pop_sizes=np.asarray(sizes, dtype=np.int64),
        means=np.asarray(means, dtype=float),
        sds=np.asarray(sds, dtype=float),
    )
    return Stratification(
        pop_sizes=np.asarray(sizes, dtype=float),
        means=np.asarray(means, dtype=float),
        sds=np.asarray(sds, dtype=float),
        group_ids=np.arange(h, dtype=np.int64),
        source_labels=np.arange(1, h + 1, dtype=np.int64),
        atoms=atoms,
    )
