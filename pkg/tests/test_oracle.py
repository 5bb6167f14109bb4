import numpy as np
import pytest

from strataga.errors import InvalidArgsError, PartitionTooLargeError
from strataga.evolve import Chromosome, evaluate, renumber
from strataga.oracle import bell_number, brute_force_optimum, enumerate_partitions


def recursive_partitions(k):
    """Independent enumeration: extend partitions element by element."""
    if k == 1:
        return [[1]]
    out = []
    for smaller in recursive_partitions(k - 1):
        top = max(smaller)
        for lab in range(1, top + 2):
            out.append(smaller + [lab])
    return out


BELL = {1: 1, 2: 2, 3: 5, 4: 15, 5: 52, 6: 203, 7: 877, 8: 4140, 15: 1382958545}


def test_bell_numbers():
    for k, value in BELL.items():
        assert bell_number(k) == value


def test_enumeration_k3_exact_order():
    got = [labels.tolist() for labels in enumerate_partitions(3)]
    assert got == [[1, 1, 1], [1, 1, 2], [1, 2, 1], [1, 2, 2], [1, 2, 3]]


def test_enumeration_counts_match_bell():
    for k in range(1, 9):
        assert sum(1 for _ in enumerate_partitions(k)) == bell_number(k)


def test_enumeration_is_canonical_and_duplicate_free():
    for k in (1, 4, 6):
        seen = set()
        for labels in enumerate_partitions(k):
            c = Chromosome(labels)
            assert renumber(c).labels.tolist() == labels.tolist()
            key = tuple(labels.tolist())
            assert key not in seen
            seen.add(key)


def test_enumeration_matches_recursive_oracle():
    got = sorted(tuple(p.tolist()) for p in enumerate_partitions(5))
    want = sorted(tuple(p) for p in recursive_partitions(5))
    assert got == want
    assert len(got) == 52


def test_enumeration_guard():
    with pytest.raises(PartitionTooLargeError) as err:
        list(enumerate_partitions(16))
    assert "10480142147" in str(err.value)  # message carries the Bell estimate
    with pytest.raises(InvalidArgsError):
        list(enumerate_partitions(0))


def test_guard_override_is_honoured():
    gen = enumerate_partitions(16, allow_large=True)
    assert next(gen).tolist() == [1] * 16


def test_single_cell_instance(iris_atoms):
    from conftest import as_stratification

    strat = as_stratification([60.0], [[4.0]], [[1.5]])
    best, alloc = brute_force_optimum(strat.atoms, [0.05])
    assert best.labels.tolist() == [1]
    assert alloc.total_n >= 2


def test_iris_brute_force_optimum(iris_atoms):
    best, alloc = brute_force_optimum(iris_atoms, [0.05, 0.05])
    assert alloc.total_n == 11
    assert best.fitness == 11.0
    assert (alloc.realized_cv <= 0.05).all()


def test_brute_force_equals_min_over_enumeration(iris_atoms):
    rng = np.random.default_rng(21)
    from conftest import as_stratification, random_instance

    for _ in range(5):
        sizes, means, sds = random_instance(rng, max_h=5, max_g=2, allow_zero_sd=False)
        atoms = as_stratification(sizes, means, sds).atoms
        best, alloc = brute_force_optimum(atoms, [0.1] * means.shape[1])
        fits = []
        for labels in enumerate_partitions(atoms.size):
            fits.append(evaluate(Chromosome(labels), atoms, [0.1] * means.shape[1]))
        assert best.fitness == min(fits)
        assert len(fits) == bell_number(atoms.size)
