"""Hierarchical explanation orchestration.

Stage 1 finds a minimal set of neural inputs responsible for the symbolic
decision; stage 2 explains each of those inputs over its own pixels,
independently of the others. The union, keyed by input index, is the
hierarchical explanation; verify_minimality certifies both levels against
brute-force oracles at desk scale.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .axp import COMPOSITE, extract_axp, order_features
from .errors import (
    DimensionMismatch,
    EmptyInput,
    InternalInvariantError,
    MalformedInput,
    SchemaError,
    UnsupportedMode,
)
from .nn import Image, MlpModel, forward, predict_label
from .shap import SelectionRule, kernel_shap, select_explanation
from .tasks import TaskSpec, check_labels, eval_task, explain_symbolic, sufficient
from .util import atomic_write_text, derive_seed
from .verify import COUNTEREXAMPLE, RobustnessQuery, brute_force_stable

HX_FORMAL = "hx-formal"
HX_SHAP = "hx-shap"
PIPELINE_SHAP = "pipeline-shap"
NN_SHAP = "nn-shap"

METHODS = (HX_FORMAL, HX_SHAP, PIPELINE_SHAP, NN_SHAP)

REPORT_SCHEMA = "hexplain-report/1"

DEFAULT_SHAP_SAMPLES = 1024


@dataclass(frozen=True)
class PipelineModel:
    """The composed classifier: one shared per-input net plus a symbolic task."""

    neural: MlpModel
    task: TaskSpec

    def __post_init__(self):
        if self.neural.output_dim != self.task.num_classes:
            raise DimensionMismatch(
                f"net has {self.neural.output_dim} outputs, task needs {self.task.num_classes}"
            )

    @property
    def n(self) -> int:
        return self.task.n


@dataclass(frozen=True)
class Instance:
    """n input images plus metadata; ground-truth labels when generated."""

    images: tuple[Image, ...]
    task: TaskSpec
    seed: int
    true_labels: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        if len(self.images) != self.task.n:
            raise MalformedInput(
                f"{len(self.images)} images for a task needing {self.task.n}"
            )
        first = self.images[0]
        for image in self.images:
            if (image.width, image.height, image.channels) != (
                first.width,
                first.height,
                first.channels,
            ):
                raise MalformedInput("instance images must share dimensions")
        if self.true_labels is not None:
            object.__setattr__(self, "true_labels", tuple(self.true_labels))


@dataclass(frozen=True)
class ExplanationReport:
    task: str
    method: str
    eps: float | None
    decision: object
    labels: tuple[int, ...]
    symbolic_set: tuple[int, ...]
    per_input: dict[int, tuple[int, ...]]
    features_per_input: int
    unknown_kept: int
    timings: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.per_input) != set(self.symbolic_set):
            raise InternalInvariantError("per-input keys must match the symbolic set")

    @property
    def union_size(self) -> int:
        return sum(len(pixels) for pixels in self.per_input.values())


def predict(pipeline: PipelineModel, instance: Instance):
    """Per-input argmax labels, then the symbolic evaluation.

    Malformed predicted label tuples (pacman cardinality violations) are
    reported as errors, never silently repaired.
    """
    if instance.images[0].num_features != pipeline.neural.input_dim:
        raise DimensionMismatch("instance image size does not match the model")
    labels = tuple(predict_label(pipeline.neural, image) for image in instance.images)
    return eval_task(pipeline.task, labels), labels


def _softmax_probability(model: MlpModel, x, class_index: int) -> float:
    logits = forward(model, x)
    shifted = np.exp(logits - logits.max())
    return float(shifted[class_index] / shifted.sum())


def explain_hierarchical(
    pipeline: PipelineModel,
    instance: Instance,
    method: str = HX_FORMAL,
    eps: float | None = None,
    tau: float = 0.9,
    nsamples: int = DEFAULT_SHAP_SAMPLES,
    resolution: float = 1e-3,
    max_boxes: int = 400000,
    nn_model: MlpModel | None = None,
    parallelism: int = 1,
) -> ExplanationReport:
    """Assemble a hierarchical explanation report for one instance.

    hx-formal and hx-shap run the two-stage route (symbolic set first,
    then per-input pixels); pipeline-shap and nn-shap attribute over all
    pixels of the flattened instance against an end-to-end predictor and
    report every input as symbolic.
    """
    if method not in METHODS:
        raise UnsupportedMode(f"unknown method {method!r}")
    timings: dict[str, float] = {}
    started = time.perf_counter()
    decision, labels = predict(pipeline, instance)
    timings["predict"] = time.perf_counter() - started

    task = pipeline.task
    if method in (HX_FORMAL, HX_SHAP):
        stage1 = time.perf_counter()
        mode = "smallest-mus" if task.kind == "lex" else "deletion"
        symbolic_set = explain_symbolic(task, labels, decision, mode=mode)
        timings["symbolic"] = time.perf_counter() - stage1

        stage2 = time.perf_counter()
        per_input, unknown_kept = _explain_inputs(
            pipeline,
            instance,
            labels,
            sorted(symbolic_set),
            method,
            eps,
            tau,
            nsamples,
            resolution,
            max_boxes,
            parallelism,
        )
        timings["neural"] = time.perf_counter() - stage2
    else:
        stage2 = time.perf_counter()
        symbolic_set = frozenset(range(task.n))
        per_input = _explain_flat(
            pipeline, instance, decision, method, tau, nsamples, nn_model
        )
        unknown_kept = 0
        timings["neural"] = time.perf_counter() - stage2

    timings["total"] = time.perf_counter() - started
    return ExplanationReport(
        task=task.to_string(),
        method=method,
        eps=eps if method == HX_FORMAL else None,
        decision=decision,
        labels=labels,
        symbolic_set=tuple(sorted(symbolic_set)),
        per_input=per_input,
        features_per_input=instance.images[0].num_features,
        unknown_kept=unknown_kept,
        timings=timings,
    )


def _explain_inputs(
    pipeline,
    instance,
    labels,
    members,
    method,
    eps,
    tau,
    nsamples,
    resolution,
    max_boxes,
    parallelism,
):
    def explain_one(j: int) -> tuple[tuple[int, ...], int]:
        image = instance.images[j]
        if method == HX_FORMAL:
            if eps is None:
                raise UnsupportedMode("hx-formal needs an eps")
            result = extract_axp(
                pipeline.neural,
                image,
                labels[j],
                eps,
                order_features(image, COMPOSITE),
                resolution=resolution,
                max_boxes=max_boxes,
            )
            return tuple(sorted(result.features)), result.unknown_kept
        baseline = np.zeros(image.num_features)
        attribution = kernel_shap(
            lambda x: _softmax_probability(pipeline.neural, x, labels[j]),
            image.pixels,
            baseline,
            nsamples,
            seed=derive_seed(instance.seed, "hx-shap", j),
        )
        selected = select_explanation(attribution, SelectionRule(tau))
        return tuple(sorted(selected)), 0

    if parallelism > 1 and len(members) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(explain_one, members))
    else:
        results = [explain_one(j) for j in members]
    per_input = {j: pixels for j, (pixels, _) in zip(members, results)}
    unknown_kept = sum(unknown for _, unknown in results)
    return per_input, unknown_kept


def _explain_flat(pipeline, instance, decision, method, tau, nsamples, nn_model):
    task = pipeline.task
    per_image = instance.images[0].num_features
    flat = np.concatenate([image.pixels for image in instance.images])
    baseline = np.zeros(flat.size)
    width, height, channels = (
        instance.images[0].width,
        instance.images[0].height,
        instance.images[0].channels,
    )

    if method == PIPELINE_SHAP:

        def end_to_end(x: np.ndarray) -> float:
            labels = []
            for j in range(task.n):
                part = Image(
                    width, height, channels, x[j * per_image : (j + 1) * per_image]
                )
                labels.append(predict_label(pipeline.neural, part))
            try:
                return 1.0 if eval_task(task, tuple(labels)) == decision else 0.0
            except MalformedInput:
                return 0.0

        f = end_to_end
    else:
        if nn_model is None:
            raise UnsupportedMode("nn-shap needs the whole-image baseline model")
        if nn_model.input_dim != flat.size:
            raise DimensionMismatch("whole-image model does not match the instance")
        predicted = predict_label(nn_model, flat)

        def f(x: np.ndarray) -> float:
            return _softmax_probability(nn_model, x, predicted)

    attribution = kernel_shap(
        f, flat, baseline, nsamples, seed=derive_seed(instance.seed, method)
    )
    selected = select_explanation(attribution, SelectionRule(tau))
    per_input = {j: [] for j in range(task.n)}
    for feature in sorted(selected):
        per_input[feature // per_image].append(feature % per_image)
    return {j: tuple(pixels) for j, pixels in per_input.items()}


def verify_minimality(
    pipeline: PipelineModel,
    instance: Instance,
    report: ExplanationReport,
    levels: int = 3,
) -> bool:
    """Desk-scale certification: the symbolic set is minimal-sufficient and
    every per-input pixel set is grid-stable and per-feature minimal."""
    if report.method != HX_FORMAL:
        raise UnsupportedMode("only hx-formal reports are certifiable")
    if report.unknown_kept != 0:
        raise UnsupportedMode("reports with unknown verdicts are not certifiable")
    decision, labels = predict(pipeline, instance)
    if labels != tuple(report.labels) or decision != report.decision:
        raise MalformedInput("report does not match the pipeline's prediction")

    task = pipeline.task
    symbolic = frozenset(report.symbolic_set)
    if not sufficient(task, labels, symbolic, decision):
        return False
    for j in symbolic:
        if sufficient(task, labels, symbolic - {j}, decision):
            return False

    for j, pixels in report.per_input.items():
        fixed = frozenset(pixels)
        image = instance.images[j]
        query = RobustnessQuery(pipeline.neural, image, fixed, report.eps, labels[j])
        if not brute_force_stable(query, levels).is_stable:
            return False
        for feature in fixed:
            probe = RobustnessQuery(
                pipeline.neural, image, fixed - {feature}, report.eps, labels[j]
            )
            if brute_force_stable(probe, levels).status != COUNTEREXAMPLE:
                return False
    return True


# ----------------------------------------------------------------------
# summary statistics


@dataclass(frozen=True)
class StatsTable:
    rows: tuple[dict, ...]

    def render(self) -> str:
        headers = (
            "method",
            "count",
            "min|X|",
            "avg|X|",
            "max|X|",
            "min%Y",
            "avg%Y",
            "max%Y",
            "min%X",
            "avg%X",
            "max%X",
            "avg time (s)",
        )
        table = [headers]
        for row in self.rows:
            table.append(
                (
                    row["method"],
                    str(row["count"]),
                    str(row["min_union"]),
                    f"{row['avg_union']:.2f}",
                    str(row["max_union"]),
                    f"{row['min_symbolic_pct']:.2f}",
                    f"{row['avg_symbolic_pct']:.2f}",
                    f"{row['max_symbolic_pct']:.2f}",
                    f"{row['min_union_pct']:.2f}",
                    f"{row['avg_union_pct']:.2f}",
                    f"{row['max_union_pct']:.2f}",
                    f"{row['avg_time']:.2f}",
                )
            )
        widths = [max(len(line[col]) for line in table) for col in range(len(headers))]
        lines = [
            "  ".join(cell.rjust(width) for cell, width in zip(line, widths))
            for line in table
        ]
        return "\n".join(lines)


def summarize(reports: Sequence[ExplanationReport]) -> StatsTable:
    """Per-method size and timing statistics over a homogeneous corpus."""
    if not reports:
        raise EmptyInput("no reports to summarize")
    task = TaskSpec.from_string(reports[0].task)
    if any(report.task != reports[0].task for report in reports):
        raise EmptyInput("reports mix different tasks")

    groups: dict[str, list[ExplanationReport]] = {}
    for report in reports:
        tag = report.method
        if report.eps is not None:
            tag = f"{report.method}(eps={report.eps:g})"
        groups.setdefault(tag, []).append(report)

    rows = []
    for tag in sorted(groups):
        members = groups[tag]
        unions = [r.union_size for r in members]
        symbolic_pct = [100.0 * len(r.symbolic_set) / task.n for r in members]
        union_pct = [
            100.0 * r.union_size / (task.n * r.features_per_input) for r in members
        ]
        rows.append(
            {
                "method": tag,
                "count": len(members),
                "min_union": min(unions),
                "avg_union": sum(unions) / len(members),
                "max_union": max(unions),
                "min_symbolic_pct": min(symbolic_pct),
                "avg_symbolic_pct": sum(symbolic_pct) / len(members),
                "max_symbolic_pct": max(symbolic_pct),
                "min_union_pct": min(union_pct),
                "avg_union_pct": sum(union_pct) / len(members),
                "max_union_pct": max(union_pct),
                "avg_time": sum(r.timings.get("total", 0.0) for r in members)
                / len(members),
            }
        )
    return StatsTable(tuple(rows))


# ----------------------------------------------------------------------
# report files


def _decision_to_json(value):
    if isinstance(value, bool):
        return value
    if value == math.inf:
        return "unreachable"
    return int(value)


def _decision_from_json(raw):
    if isinstance(raw, bool):
        return raw
    if raw == "unreachable":
        return math.inf
    return int(raw)


def write_report(report: ExplanationReport, path) -> None:
    payload = {
        "schema": REPORT_SCHEMA,
        "task": report.task,
        "method": report.method,
        "eps": report.eps,
        "decision": _decision_to_json(report.decision),
        "labels": list(report.labels),
        "symbolic_set": list(report.symbolic_set),
        "per_input": {str(j): list(pixels) for j, pixels in report.per_input.items()},
        "features_per_input": report.features_per_input,
        "unknown_kept": report.unknown_kept,
        "union_size": report.union_size,
        "timings": report.timings,
    }
    atomic_write_text(path, json.dumps(payload) + "\n")


def read_report(path) -> ExplanationReport:
    with open(path, "r", encoding="ascii") as stream:
        payload = json.load(stream)
    if not isinstance(payload, dict) or payload.get("schema") != REPORT_SCHEMA:
        raise SchemaError(f"not a {REPORT_SCHEMA} document")
    report = ExplanationReport(
        task=payload["task"],
        method=payload["method"],
        eps=payload["eps"],
        decision=_decision_from_json(payload["decision"]),
        labels=tuple(payload["labels"]),
        symbolic_set=tuple(payload["symbolic_set"]),
        per_input={
            int(j): tuple(pixels) for j, pixels in payload["per_input"].items()
        },
        features_per_input=int(payload["features_per_input"]),
        unknown_kept=int(payload["unknown_kept"]),
        timings=dict(payload["timings"]),
    )
    if report.union_size != payload["union_size"]:
        raise SchemaError("union_size does not match the per-input sets")
    return report
