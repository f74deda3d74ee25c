"""Sound robustness oracle over epsilon-boxes.

decide_stable answers: can the predicted class change anywhere in the box
spanned by the free features around the instance? Interval bound
propagation certifies sub-boxes, a deterministic gradient/corner attack
hunts for concrete counterexamples, and branch-and-bound splits whatever
remains. Stable and Counterexample are definitive; Unknown only appears
when the search hits its resolution floor or box budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import (
    DimensionMismatch,
    InternalInvariantError,
    InvalidEpsilon,
    TooLarge,
)
from .nn import Image, MlpModel, RELU, forward, forward_batch, grad

STABLE = "stable"
COUNTEREXAMPLE = "counterexample"
UNKNOWN = "unknown"

BRUTE_FORCE_GUARD = 10**7


@dataclass(frozen=True)
class Box:
    """Axis-aligned search region inside the unit hypercube."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise DimensionMismatch("box bounds must be matching vectors")
        if (lower > upper).any() or lower.min(initial=0.0) < 0.0 or upper.max(initial=1.0) > 1.0:
            raise DimensionMismatch("box must satisfy 0 <= lower <= upper <= 1")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


@dataclass(frozen=True)
class RobustnessQuery:
    """Is the class stable over points agreeing with v on `fixed` and lying
    within eps (L-infinity) of v on the remaining features?"""

    model: MlpModel
    v: Image
    fixed: frozenset[int]
    eps: float
    target_class: int
    norm: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "fixed", frozenset(self.fixed))
        if not 0.0 < self.eps <= 1.0:
            raise InvalidEpsilon(f"eps must be in (0, 1], got {self.eps}")
        if self.norm != np.inf:
            raise InvalidEpsilon("only the L-infinity norm is supported")
        if any(i < 0 or i >= self.v.num_features for i in self.fixed):
            raise DimensionMismatch("fixed index out of range")
        if self.v.num_features != self.model.input_dim:
            raise DimensionMismatch("instance does not match model input size")

    def box(self) -> Box:
        lower = self.v.pixels.copy()
        upper = self.v.pixels.copy()
        free = np.ones(self.v.num_features, dtype=bool)
        free[list(self.fixed)] = False
        lower[free] = np.maximum(0.0, lower[free] - self.eps)
        upper[free] = np.minimum(1.0, upper[free] + self.eps)
        return Box(lower, upper)


@dataclass(frozen=True)
class StabilityVerdict:
    status: str
    counterexample: np.ndarray | None = None
    reason: str | None = None
    boxes_processed: int = 0

    @property
    def is_stable(self) -> bool:
        return self.status == STABLE


def _ibp_core(model: MlpModel, lower: np.ndarray, upper: np.ndarray):
    for layer in model.layers:
        positive = np.maximum(layer.weight, 0.0)
        negative = np.minimum(layer.weight, 0.0)
        new_lower = positive @ lower + negative @ upper + layer.bias
        new_upper = positive @ upper + negative @ lower + layer.bias
        if layer.activation == RELU:
            new_lower = np.maximum(new_lower, 0.0)
            new_upper = np.maximum(new_upper, 0.0)
        lower, upper = new_lower, new_upper
    return lower, upper


def ibp_bounds(model: MlpModel, box: Box) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise logit bounds, sound for every point in the box.

    Affine layers split the weight matrix by sign; ReLU clamps both
    bounds at zero.
    """
    if box.lower.shape != (model.input_dim,):
        raise DimensionMismatch("box does not match model input size")
    return _ibp_core(model, box.lower, box.upper)


def class_margin(model: MlpModel, x: np.ndarray, target_class: int) -> float:
    """logit_c minus the best other logit; <= 0 means not (strictly) class c."""
    logits = forward(model, x)
    others = np.delete(logits, target_class)
    return float(logits[target_class] - others.max())


def _batch_margins(model: MlpModel, points: np.ndarray, target_class: int) -> np.ndarray:
    logits = forward_batch(model, points)
    target = logits[:, target_class].copy()
    logits[:, target_class] = -np.inf
    return target - logits.max(axis=1)


def _margin_ibp_bound(model: MlpModel, lower, upper, target_class: int) -> float:
    """Sound lower bound on min over the box of logit_c - max_{k != c} logit_k.

    Interval arithmetic runs through all layers but the last, then through
    the last layer's row differences W_c - W_k directly; the differenced
    form cancels shared hidden contributions and is never looser than
    subtracting separate per-logit bounds.
    """
    for layer in model.layers[:-1]:
        positive = np.maximum(layer.weight, 0.0)
        negative = np.minimum(layer.weight, 0.0)
        new_lower = positive @ lower + negative @ upper + layer.bias
        new_upper = positive @ upper + negative @ lower + layer.bias
        if layer.activation == RELU:
            new_lower = np.maximum(new_lower, 0.0)
            new_upper = np.maximum(new_upper, 0.0)
        lower, upper = new_lower, new_upper
    last = model.layers[-1]
    diff_weight = last.weight[target_class] - last.weight
    diff_bias = last.bias[target_class] - last.bias
    bounds = (
        np.maximum(diff_weight, 0.0) @ lower
        + np.minimum(diff_weight, 0.0) @ upper
        + diff_bias
    )
    bounds[target_class] = np.inf
    return float(bounds.min())


def _pgd_points(model, centre, lower, upper, target_class):
    x = centre.copy()
    step = (upper - lower) / 4.0
    points = []
    for _ in range(12):
        _, g = grad(model, x, target_class)
        x = np.clip(x + step * np.sign(g), lower, upper)
        points.append(x.copy())
        step *= 0.8
    return points


def decide_stable(
    query: RobustnessQuery,
    resolution: float = 1e-3,
    max_boxes: int = 400000,
) -> StabilityVerdict:
    """Branch-and-bound stability decision over the query box.

    Each box is certified Stable when the IBP margin bound is strictly
    positive, refuted by any candidate point whose margin is strictly
    negative (candidates: centre, box corners, a gradient-sign corner, and
    projected gradient steps at the root), and split along its widest free
    dimension otherwise. Boxes whose widest free width falls below
    ``resolution`` (or a search that exceeds ``max_boxes``) leave the
    verdict Unknown, never Stable.
    """
    if resolution <= 0.0:
        raise InvalidEpsilon("resolution must be positive")
    root = query.box()
    model, c = query.model, query.target_class

    stack = [(root.lower.copy(), root.upper.copy(), True)]
    unknown_reason = None
    boxes = 0
    while stack:
        lower, upper, is_root = stack.pop()
        boxes += 1
        if boxes > max_boxes:
            unknown_reason = "box-budget-exhausted"
            break

        if _margin_ibp_bound(model, lower, upper, c) > 0.0:
            continue

        centre = (lower + upper) / 2.0
        _, input_grad = grad(model, centre, c)
        # Ascending the class-c loss pushes toward the decision boundary.
        corner = np.where(input_grad > 0, upper, lower)
        candidates = [corner, centre, lower, upper]
        if is_root:
            candidates.extend(_pgd_points(model, centre, lower, upper, c))
        margins = _batch_margins(model, np.stack(candidates), c)
        hits = np.nonzero(margins < 0.0)[0]
        if hits.size:
            return _counterexample(query, candidates[hits[0]], boxes)

        # Split a widest free dimension; ties (all free dims at eps = 1)
        # go to the one the network is most sensitive to at the centre.
        widths = upper - lower
        max_width = widths.max()
        if max_width < resolution:
            unknown_reason = "resolution-exhausted"
            continue
        widest = widths >= max_width * (1.0 - 1e-9)
        sensitivity = np.where(widest, np.abs(input_grad), -1.0)
        split_dim = int(np.argmax(sensitivity))
        mid = (lower[split_dim] + upper[split_dim]) / 2.0
        left_upper = upper.copy()
        left_upper[split_dim] = mid
        right_lower = lower.copy()
        right_lower[split_dim] = mid
        stack.append((right_lower, upper, False))
        stack.append((lower, left_upper, False))

    if unknown_reason is not None:
        return StabilityVerdict(UNKNOWN, reason=unknown_reason, boxes_processed=boxes)
    return StabilityVerdict(STABLE, boxes_processed=boxes)


def _counterexample(query: RobustnessQuery, point: np.ndarray, boxes: int) -> StabilityVerdict:
    root = query.box()
    inside = (point >= root.lower - 1e-12).all() and (point <= root.upper + 1e-12).all()
    margin = class_margin(query.model, point, query.target_class)
    if not inside or margin >= 0.0:
        raise InternalInvariantError("counterexample failed its validity check")
    point = np.clip(point, root.lower, root.upper)
    point.flags.writeable = False
    return StabilityVerdict(COUNTEREXAMPLE, counterexample=point, boxes_processed=boxes)


def brute_force_stable(query: RobustnessQuery, levels: int) -> StabilityVerdict:
    """Exhaustive grid oracle: exact on the levels^|free| grid.

    Free dimensions each take ``levels`` evenly spaced values across their
    interval (endpoints included); the first grid point with a strictly
    negative margin is returned as the counterexample.
    """
    if levels < 2:
        raise TooLarge("grid needs at least 2 levels")
    root = query.box()
    model, c = query.model, query.target_class
    free = [i for i in range(query.v.num_features) if i not in query.fixed]
    total = levels ** len(free)
    if total > BRUTE_FORCE_GUARD:
        raise TooLarge(f"{levels}^{len(free)} grid points exceed the enumeration guard")

    grids = [np.linspace(root.lower[i], root.upper[i], levels) for i in free]
    chunk = 1 << 15
    base = query.v.pixels
    for start in range(0, total, chunk):
        count = min(chunk, total - start)
        ks = np.arange(start, start + count, dtype=np.int64)
        points = np.tile(base, (count, 1))
        for position, feature in enumerate(reversed(free)):
            digits = (ks // (levels**position)) % levels
            points[:, feature] = grids[len(free) - 1 - position][digits]
        logits = forward_batch(model, points)
        target = logits[:, c].copy()
        logits[:, c] = -np.inf
        margins = target - logits.max(axis=1)
        bad = np.nonzero(margins < 0.0)[0]
        if bad.size:
            return _counterexample(query, points[bad[0]], boxes=0)
    return StabilityVerdict(STABLE)
