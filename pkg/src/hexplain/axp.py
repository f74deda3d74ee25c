"""Deletion-based abductive explanations over the pixels of one input.

The extractor walks the features in a heuristic order, tentatively frees
each one, and keeps it exactly when the robustness oracle cannot certify
stability without it. Unknown verdicts keep the feature too (soundness
over minimality) and are counted so the caller can see the loss.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import PredictionMismatch
from .nn import Image, MlpModel, predict_label
from .verify import COUNTEREXAMPLE, STABLE, UNKNOWN, RobustnessQuery, decide_stable

RASTER = "raster"
CENTRE_DISTANCE = "centre-distance"
SATURATION_LIGHTNESS = "saturation-lightness"
COMPOSITE = "composite"

HEURISTICS = (RASTER, CENTRE_DISTANCE, SATURATION_LIGHTNESS, COMPOSITE)


@dataclass(frozen=True)
class FeatureOrder:
    """A traversal order: the first features are the first elimination tries."""

    permutation: tuple[int, ...]
    heuristic: str


@dataclass(frozen=True)
class AxpResult:
    features: frozenset[int]
    oracle_calls: int
    unknown_kept: int
    elapsed: float


def _centre_distances(x: Image) -> np.ndarray:
    rows = (np.arange(x.num_features) // x.channels) // x.width
    cols = (np.arange(x.num_features) // x.channels) % x.width
    centre_row, centre_col = (x.height - 1) / 2.0, (x.width - 1) / 2.0
    return np.hypot(rows - centre_row, cols - centre_col)


def _brightness(x: Image) -> np.ndarray:
    """Per-feature brightness: the max over its pixel's channels."""
    per_pixel = x.pixels.reshape(-1, x.channels).max(axis=1)
    return np.repeat(per_pixel, x.channels)


def order_features(x: Image, heuristic: str = COMPOSITE) -> FeatureOrder:
    """Deterministic feature traversal for the deletion loop.

    Centre distance is descending (far pixels are dropped first),
    brightness ascending (dark pixels are dropped first); ties always fall
    back to the feature index.
    """
    indices = range(x.num_features)
    if heuristic == RASTER:
        order = tuple(indices)
    elif heuristic == CENTRE_DISTANCE:
        distance = _centre_distances(x)
        order = tuple(sorted(indices, key=lambda i: (-distance[i], i)))
    elif heuristic == SATURATION_LIGHTNESS:
        brightness = _brightness(x)
        order = tuple(sorted(indices, key=lambda i: (brightness[i], i)))
    elif heuristic == COMPOSITE:
        distance = _centre_distances(x)
        brightness = _brightness(x)
        order = tuple(sorted(indices, key=lambda i: (-distance[i], brightness[i], i)))
    else:
        raise ValueError(f"unknown heuristic {heuristic!r}")
    return FeatureOrder(order, heuristic)


def extract_axp(
    model: MlpModel,
    x: Image,
    target_class: int,
    eps: float,
    order: FeatureOrder | None = None,
    resolution: float = 1e-3,
    max_boxes: int = 400000,
) -> AxpResult:
    """Subset-minimal feature set keeping the prediction stable in the
    eps-ball (minimal whenever no verdict came back Unknown)."""
    if predict_label(model, x) != target_class:
        raise PredictionMismatch(
            f"model predicts {predict_label(model, x)}, not {target_class}"
        )
    if order is None:
        order = order_features(x)

    start = time.perf_counter()
    kept = set(range(x.num_features))
    calls = 0
    unknown_kept = 0
    for feature in order.permutation:
        tentative = kept - {feature}
        verdict = decide_stable(
            RobustnessQuery(model, x, frozenset(tentative), eps, target_class),
            resolution=resolution,
            max_boxes=max_boxes,
        )
        calls += 1
        if verdict.status == STABLE:
            kept = tentative
        elif verdict.status == UNKNOWN:
            unknown_kept += 1
        else:
            assert verdict.status == COUNTEREXAMPLE
    return AxpResult(
        features=frozenset(kept),
        oracle_calls=calls,
        unknown_kept=unknown_kept,
        elapsed=time.perf_counter() - start,
    )
