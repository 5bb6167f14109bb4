"""Population frame loading, variable roles, discretization and domain splits.

A frame is the unit-level input: one record per population element, with
numeric target variables, categorical auxiliary variables and a domain
label. Category values are interned to small integer codes internally;
the original labels are kept for reporting and for building stratum keys.

All containers here are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np
import pandas as pd

from .errors import (
    EmptyFrameError,
    KTooLargeError,
    MissingColumnError,
    MissingValueError,
    ValueParseError,
)

# Tokens treated as missing when reading delimited text.
MISSING_TOKENS = frozenset({"", "NA", "NaN"})


@dataclass(frozen=True)
class FrameSchema:
    """Assigns variable roles to columns of a delimited input.

    Args:
        target_columns: ordered numeric survey variables (at least one).
        aux_columns: ordered categorical variables used to build atomic
            strata (at least one).
        domain_column: column holding the administrative domain label.
        id_column: optional record identifier column.
    """

    target_columns: tuple[str, ...]
    aux_columns: tuple[str, ...]
    domain_column: str
    id_column: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "target_columns", tuple(self.target_columns))
        object.__setattr__(self, "aux_columns", tuple(self.aux_columns))
        if not self.target_columns:
            raise ValueError("at least one target column is required")
        if not self.aux_columns:
            raise ValueError("at least one auxiliary column is required")
        roles = [*self.target_columns, *self.aux_columns, self.domain_column]
        if self.id_column is not None:
            roles.append(self.id_column)
        if len(set(roles)) != len(roles):
            raise ValueError("schema lists a column in more than one role")

    @property
    def n_targets(self) -> int:
        return len(self.target_columns)

    @property
    def n_aux(self) -> int:
        return len(self.aux_columns)


@dataclass(frozen=True)
class Frame:
    """Immutable population frame with interned categories.

    Fields:
        y: (N, G) float array of target values.
        x: (N, M) int array of auxiliary category codes; column ``m`` codes
            index into ``x_categories[m]``.
        domain: (N,) int array of domain codes into ``domain_labels``.
        x_categories: per auxiliary column, the sorted original labels.
        domain_labels: sorted original domain labels.
        ids: optional per-row identifiers.
    """

    y: np.ndarray
    x: np.ndarray
    domain: np.ndarray
    x_categories: tuple[tuple, ...]
    domain_labels: tuple
    schema: FrameSchema
    ids: tuple | None = None

    @property
    def n_rows(self) -> int:
        return self.y.shape[0]

    @property
    def n_targets(self) -> int:
        return self.y.shape[1]

    @classmethod
    def from_arrays(cls, y, x, domain, schema: FrameSchema, ids=None) -> "Frame":
        """Build a frame from in-memory columns, interning categories.

        ``y`` must be (N, G) numeric, ``x`` (N, M) of hashable category
        values, ``domain`` (N,) of hashable labels. Category codes follow
        the sorted order of the distinct values in each column, so the
        lexicographic order of code tuples matches the order of the
        original label tuples.
        """
        y = np.asarray(y, dtype=float)
        if y.ndim != 2 or y.shape[1] != schema.n_targets:
            raise ValueError("y must be (N, G) matching the schema targets")
        n = y.shape[0]
        if n < 1:
            raise EmptyFrameError("frame has no rows")
        if not np.isfinite(y).all():
            raise ValueError("target values must be finite")

        x = np.asarray(x, dtype=object)
        if x.ndim != 2 or x.shape != (n, schema.n_aux):
            raise ValueError("x must be (N, M) matching the schema auxiliaries")
        codes = np.empty((n, schema.n_aux), dtype=np.int64)
        cats = []
        for m in range(schema.n_aux):
            col_cats, col_codes = _intern(x[:, m])
            cats.append(col_cats)
            codes[:, m] = col_codes

        domain = np.asarray(domain, dtype=object)
        if domain.shape != (n,):
            raise ValueError("domain must be a length-N vector")
        dom_labels, dom_codes = _intern(domain)

        return cls(
            y=y,
            x=codes,
            domain=dom_codes,
            x_categories=tuple(cats),
            domain_labels=dom_labels,
            schema=schema,
            ids=tuple(ids) if ids is not None else None,
        )


@dataclass(frozen=True)
class DomainFrame:
    """Rows of a frame sharing one domain label."""

    domain: object
    y: np.ndarray
    x: np.ndarray
    x_categories: tuple[tuple, ...]
    schema: FrameSchema
    ids: tuple | None = None

    @property
    def n_rows(self) -> int:
        return self.y.shape[0]


def _intern(values: np.ndarray) -> tuple[tuple, np.ndarray]:
    """Map values to codes following the sorted order of distinct values."""
    cats = sorted(set(values.tolist()))
    lookup = {v: i for i, v in enumerate(cats)}
    codes = np.fromiter((lookup[v] for v in values.tolist()), dtype=np.int64, count=len(values))
    return tuple(cats), codes


def load_frame(
    source: str | IO,
    schema: FrameSchema,
    *,
    delimiter: str = ",",
    on_bad: str = "error",
) -> Frame:
    """Read a delimited text frame (header row mandatory, UTF-8).

    Rows with a missing or unparsable target, auxiliary or domain value are
    rejected: with ``on_bad="error"`` (default) the first offence aborts
    with a typed error; with ``on_bad="drop"`` offending rows are dropped.

    Args:
        source: path or open file object.
        schema: column roles.
        delimiter: field separator (default comma).
        on_bad: ``"error"`` or ``"drop"``.

    Raises:
        MissingColumnError, ValueParseError, MissingValueError,
        EmptyFrameError.
    """
    if on_bad not in ("error", "drop"):
        raise ValueError("on_bad must be 'error' or 'drop'")
    raw = pd.read_csv(
        source, sep=delimiter, dtype=str, keep_default_na=False, encoding="utf-8"
    )
    for name in (*schema.target_columns, *schema.aux_columns, schema.domain_column):
        if name not in raw.columns:
            raise MissingColumnError(name)
    if schema.id_column is not None and schema.id_column not in raw.columns:
        raise MissingColumnError(schema.id_column)
    if len(raw) == 0:
        raise EmptyFrameError("no data rows below the header")

    checked = [*schema.target_columns, *schema.aux_columns, schema.domain_column]
    bad = np.zeros(len(raw), dtype=bool)
    for name in checked:
        col_missing = raw[name].str.strip().isin(MISSING_TOKENS).to_numpy()
        if col_missing.any() and on_bad == "error":
            row = int(np.flatnonzero(col_missing)[0])
            raise MissingValueError(row + 1, name)
        bad |= col_missing

    y = np.empty((len(raw), schema.n_targets), dtype=float)
    for g, name in enumerate(schema.target_columns):
        parsed = pd.to_numeric(raw[name], errors="coerce").to_numpy(dtype=float)
        broken = np.isnan(parsed) & ~bad
        if broken.any():
            if on_bad == "error":
                row = int(np.flatnonzero(broken)[0])
                raise ValueParseError(row + 1, name, raw[name].iloc[row])
            bad |= broken
        y[:, g] = parsed

    keep = ~bad
    if not keep.any():
        raise EmptyFrameError("all rows were dropped")
    y = y[keep]
    x = raw[list(schema.aux_columns)].to_numpy(dtype=object)[keep]
    domain = raw[schema.domain_column].to_numpy(dtype=object)[keep]
    ids = None
    if schema.id_column is not None:
        ids = raw[schema.id_column].to_numpy(dtype=object)[keep].tolist()
    return Frame.from_arrays(y, x, domain, schema, ids=ids)


def split_domains(frame: Frame) -> list[DomainFrame]:
    """Split a frame into one DomainFrame per distinct domain label.

    The result is ordered by sorted domain label and the row subsets
    partition the frame exactly.
    """
    out = []
    for code, label in enumerate(frame.domain_labels):
        mask = frame.domain == code
        idx = np.flatnonzero(mask)
        ids = tuple(frame.ids[i] for i in idx) if frame.ids is not None else None
        out.append(
            DomainFrame(
                domain=label,
                y=frame.y[mask],
                x=frame.x[mask],
                x_categories=frame.x_categories,
                schema=frame.schema,
                ids=ids,
            )
        )
    return out


def discretize(values: Sequence[float], k: int) -> np.ndarray:
    """Cluster 1-D values into at most ``k`` classes, minimizing within-class SSE.

    Solved exactly by dynamic programming over the sorted distinct values
    (the optimal 1-D grouping is contiguous in value), so the result is
    deterministic: no iterative seeding is involved. Equal inputs always
    share a label and labels are numbered 1..k in ascending value order.

    Args:
        values: non-empty sequence of real numbers.
        k: number of classes, 1 <= k <= number of distinct values.

    Returns:
        int array of labels (1-based), aligned with the input order.

    Raises:
        KTooLargeError: if ``k`` exceeds the distinct-value count.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise ValueError("values must be a non-empty 1-D sequence")
    if not np.isfinite(vals).all():
        raise ValueError("values must be finite")
    uniq, inverse = np.unique(vals, return_inverse=True)
    d = uniq.size
    if k < 1:
        raise ValueError("k must be positive")
    if k > d:
        raise KTooLargeError(k, d)
    if k == 1:
        return np.ones(vals.size, dtype=np.int64)

    counts = np.bincount(inverse).astype(float)
    # prefix sums over distinct values, weighted by multiplicity
    w = np.concatenate(([0.0], np.cumsum(counts)))
    wv = np.concatenate(([0.0], np.cumsum(counts * uniq)))
    wv2 = np.concatenate(([0.0], np.cumsum(counts * uniq * uniq)))

    def sse(i: int, j: int) -> float:
        # within-cluster sum of squares for distinct values i..j inclusive
        n = w[j + 1] - w[i]
        s = wv[j + 1] - wv[i]
        q = wv2[j + 1] - wv2[i]
        return q - s * s / n

    prev = np.array([sse(0, j) for j in range(d)])
    split = np.zeros((k, d), dtype=np.int64)

    for c in range(1, k):
        cur = np.full(d, np.inf)

        def fill(lo: int, hi: int, opt_lo: int, opt_hi: int):
            # divide and conquer over the monotone argmin of the DP layer
            if lo > hi:
                return
            mid = (lo + hi) // 2
            best, best_i = np.inf, opt_lo
            for i in range(opt_lo, min(mid, opt_hi) + 1):
                cand = prev[i - 1] + sse(i, mid) if i >= 1 else np.inf
                if cand < best:
                    best, best_i = cand, i
            cur[mid] = best
            split[c, mid] = best_i
            fill(lo, mid - 1, opt_lo, best_i)
            fill(mid + 1, hi, best_i, opt_hi)

        fill(c, d - 1, 1, d - 1)
        prev = cur

    # recover cluster boundaries right-to-left
    labels_d = np.empty(d, dtype=np.int64)
    j = d - 1
    for c in range(k - 1, -1, -1):
        i = split[c, j] if c > 0 else 0
        labels_d[i : j + 1] = c + 1
        j = i - 1
    return labels_d[inverse]
