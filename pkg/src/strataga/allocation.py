"""Minimum sample allocation under coefficient-of-variation constraints.

Given a stratification, find the cheapest integer allocation whose
estimator-of-total CV stays below the per-target limits. The continuous
relaxation is solved by the classical multiplier fixed point for convex
multivariate allocation: standardize each constraint so it reads
``sum_h a_hg / n_h <= 1``, blend the constraints with normalized
multipliers, apply the closed-form stationary allocation for the blend,
and update each multiplier by the squared slack of its constraint until
the multipliers stop moving. The continuous solution is then ceiled,
clamped to ``[min_units, N_h]`` and, if clamping broke feasibility,
repaired greedily.

This is the hot path of the grouping search: one call per candidate
partition. The multiplier loop runs as a jitted kernel when numba is
available (with an equivalent vectorized fallback) and the whole call
allocates only O(H*G) scratch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised via the fallback test
    numba = None

from .errors import AllocationMismatchError, ZeroTotalError
from .strata import Stratification

# Feasibility margin used during integer repair: constraints are pushed
# at least this far (relatively) below the limit so that an independent
# recomputation of the CV can never see a violation through rounding.
_CV_MARGIN = 1e-12


@dataclass(frozen=True)
class PrecisionConstraints:
    """Upper CV limits, one row per domain, one column per target."""

    limits: np.ndarray  # (D, G)
    domains: tuple | None = None  # optional row labels, sorted like the frame

    def __post_init__(self):
        limits = np.atleast_2d(np.asarray(self.limits, dtype=float))
        object.__setattr__(self, "limits", limits)
        if not (limits > 0).all():
            raise ValueError("CV limits must be strictly positive")
        if self.domains is not None and len(self.domains) != limits.shape[0]:
            raise ValueError("one row of limits per domain is required")

    def row_for(self, domain) -> np.ndarray:
        if self.domains is None:
            if self.limits.shape[0] != 1:
                raise ValueError("unlabeled constraint matrix must have a single row")
            return self.limits[0]
        try:
            return self.limits[self.domains.index(domain)]
        except ValueError:
            raise KeyError(f"no constraint row for domain {domain!r}") from None


@dataclass(frozen=True)
class CostModel:
    """Linear survey cost: fixed part plus a per-interview rate.

    ``unit`` is a scalar rate, or a per-atomic-stratum vector that gets
    aggregated to each stratum as the population-weighted mean of its
    member cells. Defaults (0, 1) make cost equal to sample size.
    """

    fixed: float = 0.0
    unit: float | np.ndarray = 1.0

    def __post_init__(self):
        if self.fixed < 0:
            raise ValueError("fixed cost must be non-negative")
        if np.ndim(self.unit) == 0:
            if float(self.unit) <= 0:
                raise ValueError("unit cost must be positive")
        else:
            unit = np.asarray(self.unit, dtype=float)
            if (unit <= 0).any():
                raise ValueError("unit costs must be positive")
            object.__setattr__(self, "unit", unit)

    def stratum_rates(self, strat: Stratification) -> np.ndarray:
        """Per-stratum interview rates for a decoded stratification."""
        h = strat.n_strata
        if np.ndim(self.unit) == 0:
            return np.full(h, float(self.unit))
        unit = self.unit
        if unit.shape != (strat.atoms.size,):
            raise ValueError(
                f"per-cell cost vector has length {unit.shape[0]}, "
                f"expected {strat.atoms.size}"
            )
        sizes = strat.atoms.pop_sizes.astype(float)
        rates = np.empty(h)
        for i, mem in enumerate(strat.members):
            idx = np.asarray(mem)
            rates[i] = (sizes[idx] * unit[idx]).sum() / sizes[idx].sum()
        return rates


@dataclass(frozen=True)
class AllocationSettings:
    """Solver knobs for the allocation kernel."""

    min_units: int = 2
    max_iter: int = 200
    tol: float = 1e-10

    def __post_init__(self):
        if self.min_units < 1:
            raise ValueError("min_units must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_SETTINGS = AllocationSettings()
DEFAULT_COST = CostModel()


@dataclass(frozen=True)
class Allocation:
    """Integer allocation with its realized precision and cost.

    ``converged`` is False when the multiplier iteration hit its cap; the
    allocation is still feasible (rounding and repair ran as usual), the
    flag only records that the continuous stage stopped early.
    """

    n: np.ndarray  # (H,) int
    total_n: int
    realized_cv: np.ndarray  # (G,)
    cost: float
    continuous_n: np.ndarray  # (H,) pre-rounding solution
    continuous_cost: float
    converged: bool = True


def estimator_totals(strat: Stratification) -> np.ndarray:
    """Population totals of each target, T_g = sum_h N_h * mean_hg."""
    return (strat.pop_sizes[:, None] * strat.means).sum(axis=0)


def variance_bounds(strat: Stratification, cv_limits) -> np.ndarray:
    """Convert CV limits into variance bounds V_g = (U_g * T_g)^2.

    Raises:
        ZeroTotalError: if some target total is zero (its CV is undefined).
    """
    limits = np.asarray(cv_limits, dtype=float)
    totals = estimator_totals(strat)
    if limits.shape != totals.shape:
        raise ValueError("one CV limit per target is required")
    for g, t in enumerate(totals):
        if t == 0.0:
            raise ZeroTotalError(g)
    return (limits * totals) ** 2


def realized_cv(strat: Stratification, n) -> np.ndarray:
    """CV of the estimated totals at an integer allocation.

    CV_g = sqrt(sum_h N_h^2 (1 - n_h/N_h) S_hg^2 / n_h) / T_g, i.e. the
    without-replacement variance with finite population correction.
    """
    n = np.asarray(n, dtype=float)
    sizes = strat.pop_sizes.astype(float)
    if n.shape != sizes.shape:
        raise AllocationMismatchError(
            f"allocation has {n.size} strata, stratification has {sizes.size}"
        )
    if (n < 1).any() or (n > sizes).any():
        raise AllocationMismatchError("each n_h must lie in [1, N_h]")
    totals = estimator_totals(strat)
    for g, t in enumerate(totals):
        if t == 0.0:
            raise ZeroTotalError(g)
    var = _variances(sizes, strat.sds**2, n)
    return np.sqrt(var) / totals


def total_cost(n, cost: CostModel, strat: Stratification | None = None) -> float:
    """Total survey cost of an allocation under the linear model."""
    n = np.asarray(n, dtype=float)
    if np.ndim(cost.unit) == 0:
        return float(cost.fixed + float(cost.unit) * n.sum())
    if strat is None:
        raise ValueError("per-cell unit costs require the stratification")
    return float(cost.fixed + (cost.stratum_rates(strat) * n).sum())


def _variances(sizes, s2, n):
    # sum_h N_h^2 (1/n_h - 1/N_h) S_hg^2 per target
    factor = sizes**2 * (1.0 / n - 1.0 / sizes)
    return np.maximum(factor @ s2, 0.0)


def bethel_allocate(
    strat: Stratification,
    bounds,
    cost: CostModel = DEFAULT_COST,
    settings: AllocationSettings = DEFAULT_SETTINGS,
) -> Allocation:
    """Minimum-cost integer allocation meeting all variance bounds.

    Stages: (1) multiplier fixed point on the continuous relaxation,
    (2) ceiling to integers, (3) clamp to ``[min(min_units, N_h), N_h]``,
    (4) verify the realized CVs and greedily repair any violation by
    raising the stratum with the best variance reduction per unit cost.

    A zero bound forces a census of every stratum (zero variance is only
    reachable at n_h = N_h). Never raises for slow multiplier convergence;
    the result is flagged via ``converged`` instead.

    Args:
        strat: decoded stratification.
        bounds: per-target variance upper bounds, e.g. from
            :func:`variance_bounds`.
        cost: linear cost model (defaults to cost == sample size).
        settings: solver knobs.
    """
    bounds = np.asarray(bounds, dtype=float)
    sizes = strat.pop_sizes.astype(float)
    s2 = strat.sds**2
    if bounds.shape != (strat.n_targets,):
        raise ValueError("one variance bound per target is required")
    if (bounds < 0).any():
        raise ValueError("variance bounds must be non-negative")
    rates = cost.stratum_rates(strat)
    lower = np.minimum(float(settings.min_units), sizes)

    if (bounds == 0.0).any():
        # census: the finite population correction zeroes every term
        n = sizes.copy()
        return Allocation(
            n=n.astype(np.int64),
            total_n=int(n.sum()),
            realized_cv=np.zeros(strat.n_targets),
            cost=total_cost(n, cost, strat),
            continuous_n=n,
            continuous_cost=float(cost.fixed + (rates * n).sum()),
            converged=True,
        )

    # standardized constraint coefficients: sum_h a_hg / n_h <= 1
    denom = bounds + (sizes[:, None] * s2).sum(axis=0)
    a = (sizes**2)[:, None] * s2 / denom

    if not a.any():
        # no variance anywhere: the floor is the whole answer
        n = lower.copy()
        return Allocation(
            n=n.astype(np.int64),
            total_n=int(n.sum()),
            realized_cv=np.zeros(strat.n_targets),
            cost=total_cost(n, cost, strat),
            continuous_n=n,
            continuous_cost=float(cost.fixed + (rates * n).sum()),
            converged=True,
        )

    cont, converged = _multiplier_fixed_point(a, rates, settings)
    continuous_cost = float(cost.fixed + (rates * cont).sum())

    n = np.ceil(cont - 1e-9 * np.maximum(1.0, cont))
    n = np.clip(n, lower, sizes)

    # verify against the same CV formula callers will recompute with,
    # then repair: raise the stratum with the largest reduction of the
    # most-violated constraint's variance per unit cost
    totals = estimator_totals(strat)
    for g, t in enumerate(totals):
        if t == 0.0:
            raise ZeroTotalError(g)
    abs_totals = np.abs(totals)
    cv_limits = np.sqrt(bounds) / abs_totals
    while True:
        cvs = np.sqrt(_variances(sizes, s2, n)) / abs_totals
        violated = cvs > cv_limits * (1.0 - _CV_MARGIN)
        if not violated.any():
            break
        worst = int(np.argmax(cvs / cv_limits))
        gain = sizes**2 * s2[:, worst] * (1.0 / n - 1.0 / (n + 1.0)) / rates
        gain[n >= sizes] = -np.inf
        pick = int(np.argmax(gain))
        if not np.isfinite(gain[pick]):
            break  # census everywhere; CVs are zero on the next check
        n[pick] += 1.0

    return Allocation(
        n=n.astype(np.int64),
        total_n=int(n.sum()),
        realized_cv=np.sqrt(_variances(sizes, s2, n)) / totals,
        cost=total_cost(n, cost, strat),
        continuous_n=cont,
        continuous_cost=continuous_cost,
        converged=converged,
    )


def _fixed_point_numpy(a, sqrt_c, max_iter, tol):
    """Vectorized multiplier iteration; reference implementation."""
    n_targets = a.shape[1]
    alpha = np.full(n_targets, 1.0 / n_targets)
    converged = False
    for _ in range(max_iter):
        x = np.sqrt(a @ alpha)
        n = x / sqrt_c * (sqrt_c * x).sum()
        # strata with zero blended variance contribute nothing to any
        # active constraint; mask them out of the slack computation
        inv_n = np.divide(1.0, n, out=np.zeros_like(n), where=n > 0.0)
        slack = inv_n @ a
        updated = alpha * slack**2
        total = updated.sum()
        if total <= 0.0:
            converged = True
            break
        updated /= total
        delta = np.abs(updated - alpha).max()
        alpha = updated
        if delta < tol:
            converged = True
            break
    x = np.sqrt(a @ alpha)
    n = x / sqrt_c * (sqrt_c * x).sum()
    return n, converged


def _fixed_point_loops(a, sqrt_c, max_iter, tol):  # pragma: no cover - jit source
    h, g = a.shape
    alpha = np.full(g, 1.0 / g)
    updated = np.empty(g)
    n = np.empty(h)
    converged = False
    for _ in range(max_iter):
        total_cx = 0.0
        for i in range(h):
            blend = 0.0
            for j in range(g):
                blend += a[i, j] * alpha[j]
            x = np.sqrt(blend)
            n[i] = x / sqrt_c[i]
            total_cx += sqrt_c[i] * x
        for j in range(g):
            slack = 0.0
            for i in range(h):
                value = n[i] * total_cx
                if value > 0.0:
                    slack += a[i, j] / value
            updated[j] = alpha[j] * slack * slack
        total = 0.0
        for j in range(g):
            total += updated[j]
        if total <= 0.0:
            converged = True
            break
        delta = 0.0
        for j in range(g):
            updated[j] /= total
            diff = abs(updated[j] - alpha[j])
            if diff > delta:
                delta = diff
            alpha[j] = updated[j]
        if delta < tol:
            converged = True
            break
    total_cx = 0.0
    for i in range(h):
        blend = 0.0
        for j in range(g):
            blend += a[i, j] * alpha[j]
        x = np.sqrt(blend)
        n[i] = x / sqrt_c[i]
        total_cx += sqrt_c[i] * x
    for i in range(h):
        n[i] *= total_cx
    return n, converged


if numba is not None:
    _fixed_point_jit = numba.njit(cache=True)(_fixed_point_loops)
else:  # pragma: no cover
    _fixed_point_jit = None


def _multiplier_fixed_point(a, rates, settings: AllocationSettings):
    """Solve min sum c_h n_h s.t. sum_h a_hg/n_h <= 1 for all g, n_h > 0."""
    sqrt_c = np.sqrt(rates)
    if _fixed_point_jit is not None:
        return _fixed_point_jit(
            np.ascontiguousarray(a), sqrt_c, settings.max_iter, settings.tol
        )
    return _fixed_point_numpy(a, sqrt_c, settings.max_iter, settings.tol)
