"""Benchmark corpus generation: synthetic glyphs, instances, and IDX data.

The glyph renderer draws parametric sprites (digits for the string tasks,
cell icons for the grid task) on any resolution, with seeded stroke
jitter and additive noise, so the whole test corpus is hermetic. Real
MNIST-style data can be loaded from IDX files instead when available.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    MalformedInput,
    SchemaError,
    TruncatedFile,
)
from .hier import Instance
from .nn import Image
from .tasks import ACTOR, EMPTY, FLAG, GHOST, TaskSpec
from .util import atomic_write_text, derive_seed

INSTANCE_SCHEMA = "hexplain-instance/1"

DIGIT_SYMBOLS = ("digit0", "digit1")
CELL_SYMBOLS = ("empty", "ghost", "actor", "flag")

# Default sprite resolutions: digits for lex/regex, cells for pacman.
DIGIT_SIZE = 10
CELL_SIZE = 8

DEFAULT_JITTER = 0.04
DEFAULT_NOISE = 0.05


@dataclass(frozen=True)
class GlyphParams:
    symbol: str
    width: int = DIGIT_SIZE
    height: int = DIGIT_SIZE
    channels: int = 1
    jitter: float = 0.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.symbol not in DIGIT_SYMBOLS + CELL_SYMBOLS:
            raise MalformedInput(f"unknown glyph symbol {self.symbol!r}")
        if self.width < 3 or self.height < 3 or self.channels < 1:
            raise MalformedInput("glyphs need at least 3x3 pixels")
        if self.jitter < 0:
            raise MalformedInput("jitter must be non-negative")
        if not 0 <= self.noise < 0.3:
            raise MalformedInput("noise amplitude must lie in [0, 0.3)")


def render_glyph(params: GlyphParams) -> Image:
    """Deterministic sprite plus seeded additive noise, clamped to [0,1]."""
    rng = np.random.default_rng(params.seed)
    # Pixel-centre coordinates normalized to [0, 1].
    ys = (np.arange(params.height) + 0.5) / params.height
    xs = (np.arange(params.width) + 0.5) / params.width
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    j = lambda scale=1.0: params.jitter * scale * rng.uniform(-1.0, 1.0)

    if params.symbol == "digit1":
        column = 0.5 + j()
        half_width = max(0.11, 0.56 / params.width)
        ink = (np.abs(xx - column) <= half_width) & (np.abs(yy - (0.5 + j())) <= 0.36)
    elif params.symbol == "digit0":
        # Chebyshev ring: keeps a closed outline with a hole down to 4x4.
        cx, cy = 0.5 + j(), 0.5 + j()
        radius = np.maximum(np.abs(xx - cx), np.abs(yy - cy) * 0.85)
        ink = (radius >= 0.18 + j(0.5)) & (radius <= 0.38 + j(0.5))
    elif params.symbol == "empty":
        ink = np.zeros_like(xx, dtype=bool)
    elif params.symbol == "ghost":
        cx, head_y = 0.5 + j(), 0.38 + j()
        head = np.hypot(xx - cx, yy - head_y) <= 0.32
        body = (np.abs(xx - cx) <= 0.32) & (yy >= head_y) & (yy <= 0.88 + j())
        eyes = (np.hypot(xx - (cx - 0.14), yy - head_y) <= 0.08) | (
            np.hypot(xx - (cx + 0.14), yy - head_y) <= 0.08
        )
        legs = (yy >= 0.72) & (np.abs((xx - cx + 0.32) % 0.22 - 0.11) <= 0.045)
        ink = (head | body) & ~eyes & ~legs
    elif params.symbol == "actor":
        cx, cy = 0.5 + j(), 0.5 + j()
        disc = np.hypot(xx - cx, yy - cy) <= 0.34
        mouth = (xx > cx) & (np.abs(yy - cy) <= 0.8 * (xx - cx))
        ink = disc & ~mouth
    else:  # flag
        pole_x = 0.3 + j()
        pole = (np.abs(xx - pole_x) <= 0.06) & (yy >= 0.12) & (yy <= 0.88 + j())
        banner = (
            (xx >= pole_x)
            & (yy >= 0.12)
            & (yy <= 0.48 + j(0.5))
            & (xx <= pole_x + 0.55 * (1.0 - (yy - 0.12) / 0.36))
        )
        ink = pole | banner

    pixels = ink.astype(np.float64)
    if params.noise > 0:
        pixels = pixels + rng.uniform(-params.noise, params.noise, size=pixels.shape)
    pixels = np.clip(pixels, 0.0, 1.0)
    if params.channels > 1:
        pixels = np.repeat(pixels[:, :, None], params.channels, axis=2)
    return Image(params.width, params.height, params.channels, pixels.reshape(-1))


def _symbol_for(task: TaskSpec, label: int) -> str:
    if task.kind == "pacman":
        return CELL_SYMBOLS[label]
    return DIGIT_SYMBOLS[label]


def _glyph_size(task: TaskSpec, size: int | None) -> int:
    if size is not None:
        return size
    return CELL_SIZE if task.kind == "pacman" else DIGIT_SIZE


def gen_instance(
    task: TaskSpec,
    seed: int,
    glyph_size: int | None = None,
    jitter: float = DEFAULT_JITTER,
    noise: float = DEFAULT_NOISE,
) -> Instance:
    """One seeded instance: ground-truth labels plus rendered glyphs.

    Lex/regex draw uniform random bits; pacman places the actor, the flag,
    and eight ghosts on distinct cells of the grid.
    """
    rng = np.random.default_rng(derive_seed(seed, "labels", task.to_string()))
    if task.kind == "pacman":
        cells = rng.choice(task.n, size=min(10, task.n), replace=False)
        labels = [EMPTY] * task.n
        labels[cells[0]] = ACTOR
        labels[cells[1]] = FLAG
        for cell in cells[2:]:
            labels[cell] = GHOST
        labels = tuple(labels)
    else:
        labels = tuple(int(b) for b in rng.integers(0, 2, size=task.n))

    size = _glyph_size(task, glyph_size)
    images = tuple(
        render_glyph(
            GlyphParams(
                symbol=_symbol_for(task, label),
                width=size,
                height=size,
                jitter=jitter,
                noise=noise,
                seed=derive_seed(seed, "glyph", position),
            )
        )
        for position, label in enumerate(labels)
    )
    return Instance(images=images, task=task, seed=seed, true_labels=labels)


def gen_benchmark(
    task: TaskSpec,
    count: int,
    seed: int,
    glyph_size: int | None = None,
    jitter: float = DEFAULT_JITTER,
    noise: float = DEFAULT_NOISE,
    unique: bool = True,
) -> list[Instance]:
    """A benchmark set, by default with unique label combinations
    (rejection sampling over the label tuples).

    ``unique=False`` lifts the restriction, which is required when the
    requested count exceeds the task's label space (e.g. more than 64
    instances of lex1-6).
    """
    seen = set()
    instances = []
    attempt = 0
    while len(instances) < count:
        if attempt > 100 * count + 1000:
            raise MalformedInput(
                f"could not draw {count} unique label combinations for {task.to_string()}"
            )
        instance = gen_instance(
            task, derive_seed(seed, "instance", attempt), glyph_size, jitter, noise
        )
        attempt += 1
        if unique:
            if instance.true_labels in seen:
                continue
            seen.add(instance.true_labels)
        instances.append(instance)
    return instances


def gen_dataset(
    kind: str,
    count: int,
    seed: int,
    glyph_size: int | None = None,
    jitter: float = DEFAULT_JITTER,
    noise: float = DEFAULT_NOISE,
) -> list[tuple[Image, int]]:
    """Labeled glyphs for training the per-input classifier.

    ``kind`` is "digits" (labels 0/1) or "cells" (labels E/G/P/F), cycling
    uniformly through the classes so the dataset is balanced.
    """
    if kind == "digits":
        symbols = DIGIT_SYMBOLS
        size = glyph_size if glyph_size is not None else DIGIT_SIZE
    elif kind == "cells":
        symbols = CELL_SYMBOLS
        size = glyph_size if glyph_size is not None else CELL_SIZE
    else:
        raise MalformedInput(f"unknown dataset kind {kind!r}")
    dataset = []
    for index in range(count):
        label = index % len(symbols)
        image = render_glyph(
            GlyphParams(
                symbol=symbols[label],
                width=size,
                height=size,
                jitter=jitter,
                noise=noise,
                seed=derive_seed(seed, "dataset", kind, index),
            )
        )
        dataset.append((image, label))
    return dataset


def gen_whole_image_dataset(
    task: TaskSpec,
    count: int,
    seed: int,
    glyph_size: int | None = None,
    jitter: float = DEFAULT_JITTER,
    noise: float = DEFAULT_NOISE,
) -> list[tuple[Image, int]]:
    """Flattened-instance dataset for the whole-image baseline model:
    each tiled instance is labeled with its ground-truth decision class."""
    from .render import tile_instance
    from .tasks import decision_to_class, eval_task

    dataset = []
    for instance in gen_benchmark(
        task, count, seed, glyph_size, jitter, noise, unique=False
    ):
        decision = eval_task(task, instance.true_labels)
        dataset.append((tile_instance(instance), decision_to_class(task, decision)))
    return dataset


# ----------------------------------------------------------------------
# instance files


def write_instance(instance: Instance, path) -> None:
    first = instance.images[0]
    payload = {
        "schema": INSTANCE_SCHEMA,
        "task": instance.task.to_string(),
        "seed": instance.seed,
        "width": first.width,
        "height": first.height,
        "channels": first.channels,
        "labels": list(instance.true_labels) if instance.true_labels else None,
        "images": [image.pixels.tolist() for image in instance.images],
    }
    atomic_write_text(path, json.dumps(payload) + "\n")


def read_instance(path) -> Instance:
    with open(path, "r", encoding="ascii") as stream:
        payload = json.load(stream)
    if not isinstance(payload, dict) or payload.get("schema") != INSTANCE_SCHEMA:
        raise SchemaError(f"not a {INSTANCE_SCHEMA} document")
    task = TaskSpec.from_string(payload["task"])
    width, height, channels = payload["width"], payload["height"], payload["channels"]
    images = tuple(
        Image(width, height, channels, np.array(pixels, dtype=np.float64))
        for pixels in payload["images"]
    )
    if len(images) != task.n:
        raise SchemaError(f"instance has {len(images)} images for task {task.to_string()}")
    labels = payload.get("labels")
    return Instance(
        images=images,
        task=task,
        seed=int(payload["seed"]),
        true_labels=tuple(labels) if labels is not None else None,
    )


# ----------------------------------------------------------------------
# IDX (MNIST-style) loading

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def load_idx(images_path, labels_path, keep_labels: Sequence[int] | None = None):
    """Parse big-endian IDX image/label files into a labeled dataset.

    Pixels are unsigned bytes scaled to [0, 1]. ``keep_labels`` filters the
    dataset (e.g. {0, 1} for the binary digit tasks).
    """
    with open(images_path, "rb") as stream:
        image_data = stream.read()
    with open(labels_path, "rb") as stream:
        label_data = stream.read()

    if len(image_data) < 16:
        raise TruncatedFile("image file shorter than its header")
    magic, count, rows, cols = struct.unpack(">IIII", image_data[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise BadMagic(f"image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    if len(image_data) < 16 + count * rows * cols:
        raise TruncatedFile("image file ends before the declared pixel payload")

    if len(label_data) < 8:
        raise TruncatedFile("label file shorter than its header")
    label_magic, label_count = struct.unpack(">II", label_data[:8])
    if label_magic != IDX_LABELS_MAGIC:
        raise BadMagic(
            f"label magic 0x{label_magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
        )
    if len(label_data) < 8 + label_count:
        raise TruncatedFile("label file ends before the declared labels")
    if count != label_count:
        raise CountMismatch(f"{count} images but {label_count} labels")

    pixels = np.frombuffer(
        image_data, dtype=np.uint8, count=count * rows * cols, offset=16
    ).reshape(count, rows * cols)
    labels = np.frombuffer(label_data, dtype=np.uint8, count=count, offset=8)

    dataset = []
    for raw, label in zip(pixels, labels):
        if keep_labels is not None and int(label) not in keep_labels:
            continue
        dataset.append((Image(cols, rows, 1, raw / 255.0), int(label)))
    return dataset
