"""Kernel SHAP attributions and attribution-to-explanation selection.

kernel_shap fits the weighted linear regression over feature coalitions
(baseline substitution for switched-off features); the empty and full
coalitions enter as equality constraints, so the efficiency axiom holds
by construction. exact_shapley is the subset-enumeration oracle used to
validate it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateSystem, TooManyFeatures

EXACT_SHAPLEY_LIMIT = 12


@dataclass(frozen=True)
class Attribution:
    """Per-feature contributions phi with f(v) = base_value + sum(phi)."""

    phi: np.ndarray
    base_value: float
    nsamples: int
    seed: int

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        phi.flags.writeable = False
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class SelectionRule:
    """Keep the smallest top-|phi| prefix holding `tau` of the total mass."""

    tau: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")


def _masked_input(z: np.ndarray, v: np.ndarray, baseline: np.ndarray) -> np.ndarray:
    return np.where(z, v, baseline)


def _kernel_size_distribution(m: int) -> np.ndarray:
    sizes = np.arange(1, m)
    weights = (m - 1) / (sizes * (m - sizes))
    return weights / weights.sum()


def kernel_shap(
    f: Callable[[np.ndarray], float],
    v: Sequence[float],
    baseline: Sequence[float],
    nsamples: int,
    seed: int,
) -> Attribution:
    """Shapley-value estimate via kernel-weighted least squares.

    Coalition rows are sampled from the Shapley kernel (all 2^m - 2 proper
    coalitions are enumerated once when the budget allows, which makes the
    solution exact); the constrained normal equations are solved through
    their KKT system so the efficiency residual is zero up to solver
    precision. Deterministic given the seed.
    """
    v = np.asarray(v, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    m = v.size
    if baseline.size != m:
        raise DegenerateSystem("explained point and baseline sizes differ")
    if nsamples < m + 2:
        raise DegenerateSystem(f"nsamples must be at least m + 2 = {m + 2}")

    base_value = float(f(baseline.copy()))
    full_value = float(f(v.copy()))
    delta = full_value - base_value

    rows: dict[tuple[int, ...], float] = {}
    if m > 1:
        if nsamples >= 2**m:
            for mask in range(1, 2**m - 1):
                z = tuple((mask >> i) & 1 for i in range(m))
                s = sum(z)
                rows[z] = (m - 1) / (math.comb(m, s) * s * (m - s))
        else:
            rng = np.random.default_rng(seed)
            size_probs = _kernel_size_distribution(m)
            for _ in range(nsamples - 2):
                size = int(rng.choice(np.arange(1, m), p=size_probs))
                members = rng.choice(m, size=size, replace=False)
                z = np.zeros(m, dtype=np.int64)
                z[members] = 1
                key = tuple(z)
                rows[key] = rows.get(key, 0.0) + 1.0

    coalitions = np.array(sorted(rows), dtype=np.float64).reshape(len(rows), m)
    weights = np.array([rows[key] for key in sorted(rows)])
    values = np.array(
        [float(f(_masked_input(z.astype(bool), v, baseline))) for z in coalitions]
    )

    # Constrained weighted least squares through the KKT system.
    design = coalitions * weights[:, None]
    lhs = np.zeros((m + 1, m + 1))
    lhs[:m, :m] = 2.0 * coalitions.T @ design
    lhs[:m, m] = 1.0
    lhs[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[:m] = 2.0 * design.T @ (values - base_value)
    rhs[m] = delta
    try:
        solution = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as error:
        raise DegenerateSystem(f"regression system is singular: {error}") from error
    if not np.isfinite(solution).all():
        raise DegenerateSystem("regression produced non-finite attributions")
    return Attribution(solution[:m], base_value, nsamples, seed)


def exact_shapley(
    f: Callable[[np.ndarray], float],
    v: Sequence[float],
    baseline: Sequence[float],
) -> Attribution:
    """Exact Shapley values by enumerating all coalitions (m <= 12)."""
    v = np.asarray(v, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    m = v.size
    if m > EXACT_SHAPLEY_LIMIT:
        raise TooManyFeatures(f"exact enumeration capped at {EXACT_SHAPLEY_LIMIT} features")

    values = np.empty(2**m)
    for mask in range(2**m):
        z = np.array([(mask >> i) & 1 for i in range(m)], dtype=bool)
        values[mask] = float(f(_masked_input(z, v, baseline)))

    factorial = math.factorial
    phi = np.zeros(m)
    for i in range(m):
        for mask in range(2**m):
            if mask & (1 << i):
                continue
            s = bin(mask).count("1")
            weight = factorial(s) * factorial(m - s - 1) / factorial(m)
            phi[i] += weight * (values[mask | (1 << i)] - values[mask])
    return Attribution(phi, float(values[0]), 2**m, 0)


def select_explanation(attribution: Attribution, rule: SelectionRule) -> frozenset[int]:
    """Smallest |phi|-descending prefix reaching tau of the attribution mass."""
    magnitude = np.abs(attribution.phi)
    total = magnitude.sum()
    if total == 0.0:
        return frozenset()
    order = sorted(range(magnitude.size), key=lambda i: (-magnitude[i], i))
    chosen: list[int] = []
    cumulative = 0.0
    for index in order:
        chosen.append(index)
        cumulative += magnitude[index]
        if cumulative >= rule.tau * total:
            break
    return frozenset(chosen)
