"""Atomic strata construction and chromosome decoding.

Atomic strata are the cells of the cross-classification of the auxiliary
variables, restricted to combinations that actually occur in the domain.
A candidate stratification is an integer label vector over the atomic
strata; decoding pools the per-cell moments into aggregate strata without
touching the unit-level frame again, which keeps the grouping search cheap.

All statistics use the population convention (divisor N), so a singleton
cell has zero standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .errors import EmptyGroupError, LabelOutOfRangeError, LengthMismatchError
from .frame import DomainFrame

# Relative slack for clamping pooled variances that dip below zero
# through floating-point cancellation.
_VAR_CLAMP_RTOL = 1e-12


@dataclass(frozen=True)
class AtomicStratum:
    """One realized auxiliary-value combination with its summary stats."""

    key: str
    key_tuple: tuple
    size: int
    means: np.ndarray  # (G,)
    sds: np.ndarray  # (G,)
    domain: object

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("atomic strata must contain at least one record")


@dataclass
class AtomicStrataSet:
    """All atomic strata of one domain, in lexicographic key order.

    ``pop_sizes``, ``means`` and ``sds`` are column-aligned arrays over the
    ``size`` K cells; the per-cell first and second moments are cached so a
    decode is a pair of segmented sums. Immutable after construction.
    """

    domain: object
    keys: tuple[str, ...]
    key_tuples: tuple[tuple, ...]
    key_codes: np.ndarray  # (K, M) interned aux codes per cell
    pop_sizes: np.ndarray  # (K,)
    means: np.ndarray  # (K, G)
    sds: np.ndarray  # (K, G)
    _moment1: np.ndarray = field(init=False, repr=False)  # N_k * M_kg
    _moment2: np.ndarray = field(init=False, repr=False)  # N_k * (S_kg^2 + M_kg^2)
    _row_lookup: dict | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        n = self.pop_sizes.astype(float)
        self._moment1 = n[:, None] * self.means
        self._moment2 = n[:, None] * (self.sds**2 + self.means**2)

    @property
    def size(self) -> int:
        return len(self.keys)

    @property
    def n_targets(self) -> int:
        return self.means.shape[1]

    @property
    def total_pop(self) -> int:
        return int(self.pop_sizes.sum())

    @property
    def strata(self) -> list[AtomicStratum]:
        return [
            AtomicStratum(
                key=self.keys[k],
                key_tuple=self.key_tuples[k],
                size=int(self.pop_sizes[k]),
                means=self.means[k].copy(),
                sds=self.sds[k].copy(),
                domain=self.domain,
            )
            for k in range(self.size)
        ]

    def atomic_index_of(self, x_codes: np.ndarray) -> np.ndarray:
        """Map rows of interned aux codes to their atomic stratum index."""
        if self._row_lookup is None:
            self._row_lookup = {
                tuple(row): k for k, row in enumerate(self.key_codes.tolist())
            }
        try:
            return np.fromiter(
                (self._row_lookup[tuple(r)] for r in x_codes.tolist()),
                dtype=np.int64,
                count=len(x_codes),
            )
        except KeyError as exc:
            raise KeyError(f"auxiliary combination {exc} not present in this set") from exc


@dataclass(frozen=True)
class StratumStats:
    """Pooled statistics of one aggregate stratum."""

    size: int
    means: np.ndarray  # (G,)
    sds: np.ndarray  # (G,)
    members: tuple[int, ...]  # atomic stratum indices, 0-based


@dataclass
class Stratification:
    """A decoded partition of the atomic strata with pooled statistics.

    The per-stratum arrays are ordered by first appearance of each label
    in the source chromosome. ``atoms`` keeps a reference to the set the
    partition was decoded from, so downstream consumers (cost weighting,
    sample drawing) can reach the cell-level detail. Treated as immutable
    after construction; the member lists are materialized lazily because
    the fitness path never reads them.
    """

    pop_sizes: np.ndarray  # (H,)
    means: np.ndarray  # (H, G)
    sds: np.ndarray  # (H, G)
    group_ids: np.ndarray  # (K,) stratum id of each atomic stratum, 0-based
    source_labels: np.ndarray  # (K,)
    atoms: AtomicStrataSet
    _members: tuple[tuple[int, ...], ...] | None = field(
        default=None, init=False, repr=False, compare=False
    )

    @property
    def n_strata(self) -> int:
        return int(self.pop_sizes.size)

    @property
    def n_targets(self) -> int:
        return self.means.shape[1]

    @property
    def members(self) -> tuple[tuple[int, ...], ...]:
        """Atomic-stratum indices of each stratum (0-based)."""
        if self._members is None:
            order = np.argsort(self.group_ids, kind="stable")
            bounds = np.cumsum(np.bincount(self.group_ids, minlength=self.n_strata))
            self._members = tuple(
                tuple(order[lo:hi].tolist())
                for lo, hi in zip(np.concatenate(([0], bounds[:-1])), bounds)
            )
        return self._members

    @property
    def strata(self) -> list[StratumStats]:
        return [
            StratumStats(
                size=int(self.pop_sizes[h]),
                means=self.means[h].copy(),
                sds=self.sds[h].copy(),
                members=self.members[h],
            )
            for h in range(self.n_strata)
        ]


def build_atomic_strata(df: DomainFrame, schema=None) -> AtomicStrataSet:
    """Cross-classify a domain's rows by their auxiliary values.

    Only combinations with at least one record are materialized. Cells are
    ordered lexicographically by their category tuple, and each key string
    is the ``*``-joined concatenation of the original category labels.

    Args:
        df: domain rows.
        schema: accepted for symmetry with the loading API; the layout is
            already carried by the DomainFrame.
    """
    if df.n_rows == 0:
        raise ValueError("domain frame has no rows")
    codes, inverse = np.unique(df.x, axis=0, return_inverse=True)
    k = codes.shape[0]
    g = df.y.shape[1]
    sizes = np.bincount(inverse, minlength=k).astype(np.int64)
    s1 = np.zeros((k, g))
    s2 = np.zeros((k, g))
    np.add.at(s1, inverse, df.y)
    np.add.at(s2, inverse, df.y**2)
    means = s1 / sizes[:, None]
    variances = np.maximum(s2 / sizes[:, None] - means**2, 0.0)

    key_tuples = []
    for row in codes:
        key_tuples.append(tuple(df.x_categories[m][c] for m, c in enumerate(row)))
    keys = tuple("*".join(str(v) for v in kt) for kt in key_tuples)
    return AtomicStrataSet(
        domain=df.domain,
        keys=keys,
        key_tuples=tuple(key_tuples),
        key_codes=codes,
        pop_sizes=sizes,
        means=means,
        sds=np.sqrt(variances),
    )


def _pool(sizes, means, sds):
    """Exact two-moment pooling of population-convention group stats."""
    n = float(sizes.sum())
    m1 = (sizes[:, None] * means).sum(axis=0)
    m2 = (sizes[:, None] * (sds**2 + means**2)).sum(axis=0)
    mean = m1 / n
    var = m2 / n - mean**2
    var = np.where(var >= 0, var, np.where(-var <= _VAR_CLAMP_RTOL * m2 / n, 0.0, var))
    return n, mean, np.sqrt(np.maximum(var, 0.0))


def merge_group(members: Sequence[AtomicStratum]) -> StratumStats:
    """Pool a non-empty group of atomic strata into one stratum.

    Pooling uses the exact identity on the first two moments, so the result
    equals a direct recomputation over the concatenated raw records up to
    floating-point rounding.

    Raises:
        EmptyGroupError: for an empty member list.
    """
    members = list(members)
    if not members:
        raise EmptyGroupError("cannot merge zero atomic strata")
    sizes = np.array([m.size for m in members], dtype=float)
    means = np.vstack([m.means for m in members])
    sds = np.vstack([m.sds for m in members])
    n, mean, sd = _pool(sizes, means, sds)
    return StratumStats(
        size=int(n),
        means=mean,
        sds=sd,
        members=tuple(range(len(members))),
    )


def first_appearance_groups(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Group ids (0-based) per element, numbered by first label appearance."""
    _, first_idx, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse], order.size


def decode_partition(labels, atoms: AtomicStrataSet) -> Stratification:
    """Decode a chromosome into a stratification over ``atoms``.

    Atomic strata sharing a label form one stratum; strata are emitted in
    order of first label appearance. Pooled statistics come from the cached
    cell moments (no pass over the frame).

    Raises:
        LengthMismatchError: if the label vector length is not K.
        LabelOutOfRangeError: if any label falls outside [1, K].
    """
    labels = np.asarray(labels, dtype=np.int64)
    k = atoms.size
    if labels.shape != (k,):
        raise LengthMismatchError(k, int(labels.size))
    if labels.size and (labels.min() < 1 or labels.max() > k):
        offender = labels[(labels < 1) | (labels > k)][0]
        raise LabelOutOfRangeError(int(offender), k)

    gid, h = first_appearance_groups(labels)
    sizes = np.bincount(gid, weights=atoms.pop_sizes, minlength=h)
    g = atoms.n_targets
    m1 = np.empty((h, g))
    m2 = np.empty((h, g))
    for col in range(g):
        m1[:, col] = np.bincount(gid, weights=atoms._moment1[:, col], minlength=h)
        m2[:, col] = np.bincount(gid, weights=atoms._moment2[:, col], minlength=h)
    means = m1 / sizes[:, None]
    var = m2 / sizes[:, None] - means**2
    var = np.where(var >= 0, var, np.where(-var <= _VAR_CLAMP_RTOL * m2 / sizes[:, None], 0.0, var))

    return Stratification(
        pop_sizes=sizes,
        means=means,
        sds=np.sqrt(np.maximum(var, 0.0)),
        group_ids=gid,
        source_labels=labels.copy(),
        atoms=atoms,
    )


def export_atomic_strata(atoms: AtomicStrataSet, sink: IO[str]) -> None:
    """Write the cell table as delimited text: key, N, means, SDs, domain."""
    g = atoms.n_targets
    header = ["STRATUM_KEY", "N"]
    header += [f"M{i + 1}" for i in range(g)]
    header += [f"S{i + 1}" for i in range(g)]
    header.append("DOMAIN")
    sink.write(",".join(header) + "\n")
    for k in range(atoms.size):
        row = [atoms.keys[k], str(int(atoms.pop_sizes[k]))]
        row += [repr(float(v)) for v in atoms.means[k]]
        row += [repr(float(v)) for v in atoms.sds[k]]
        row.append(str(atoms.domain))
        sink.write(",".join(row) + "\n")
