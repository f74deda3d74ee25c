"""Instance tiling and explanation-mask rendering to binary Netpbm files.

Masks show the explanation pixels of an input at full brightness over a
x0.25-dimmed copy; instances are tiled side by side (strings) or as the
grid (pacman). Grayscale images are written as binary PGM (P5), 3-channel
ones as binary PPM (P6), bit-exact and reproducible.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import DimensionMismatch, SchemaError
from .hier import Instance
from .nn import Image
from .util import atomic_write_bytes

DIM_FACTOR = 0.25


def mask_overlay(image: Image, features: Iterable[int]) -> Image:
    """Explanation pixels keep their value; everything else is dimmed."""
    selected = sorted(set(features))
    if selected and (selected[0] < 0 or selected[-1] >= image.num_features):
        raise DimensionMismatch("mask feature index out of range")
    pixels = image.pixels * DIM_FACTOR
    pixels[selected] = image.pixels[selected]
    return Image(image.width, image.height, image.channels, pixels)


def tile_images(images: list[Image], columns: int) -> Image:
    """Tile equally-sized images into a grid, row-major, `columns` wide."""
    if not images:
        raise DimensionMismatch("nothing to tile")
    first = images[0]
    rows = (len(images) + columns - 1) // columns
    height, width = rows * first.height, columns * first.width
    canvas = np.zeros((height, width, first.channels))
    for index, image in enumerate(images):
        row, col = divmod(index, columns)
        block = image.pixels.reshape(image.height, image.width, image.channels)
        canvas[
            row * first.height : (row + 1) * first.height,
            col * first.width : (col + 1) * first.width,
        ] = block
    return Image(width, height, first.channels, canvas.reshape(-1))


def instance_columns(instance: Instance) -> int:
    if instance.task.kind == "pacman":
        return instance.task.width
    return instance.task.n


def tile_instance(instance: Instance) -> Image:
    """The instance as one image: a strip of digits or the pacman grid."""
    return tile_images(list(instance.images), instance_columns(instance))


def tile_explanation(instance: Instance, per_input: dict[int, tuple[int, ...]]) -> Image:
    """Whole-instance mask: inputs outside the symbolic set are fully dimmed."""
    overlays = [
        mask_overlay(image, per_input.get(index, ()))
        for index, image in enumerate(instance.images)
    ]
    return tile_images(overlays, instance_columns(instance))


# ----------------------------------------------------------------------
# binary Netpbm


def write_netpbm(image: Image, path) -> None:
    """PGM (P5) for grayscale, PPM (P6) for 3-channel images."""
    if image.channels == 1:
        magic = b"P5"
    elif image.channels == 3:
        magic = b"P6"
    else:
        raise DimensionMismatch(f"cannot encode {image.channels}-channel images")
    levels = np.clip(np.rint(image.pixels * 255.0), 0, 255).astype(np.uint8)
    header = magic + f"\n{image.width} {image.height}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + levels.tobytes())


def read_netpbm(path) -> Image:
    with open(path, "rb") as stream:
        payload = stream.read()
    fields: list[bytes] = []
    position = 0
    while len(fields) < 4 and position < len(payload):
        while position < len(payload) and payload[position : position + 1].isspace():
            position += 1
        if payload[position : position + 1] == b"#":
            while position < len(payload) and payload[position] != 0x0A:
                position += 1
            continue
        start = position
        while position < len(payload) and not payload[position : position + 1].isspace():
            position += 1
        fields.append(payload[start:position])
    position += 1  # single whitespace after maxval
    if len(fields) != 4 or fields[0] not in (b"P5", b"P6"):
        raise SchemaError("not a binary PGM/PPM file")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise SchemaError("only 8-bit Netpbm files are supported")
    channels = 1 if fields[0] == b"P5" else 3
    expected = width * height * channels
    raster = payload[position : position + expected]
    if len(raster) != expected:
        raise SchemaError("Netpbm raster is truncated")
    pixels = np.frombuffer(raster, dtype=np.uint8) / 255.0
    return Image(width, height, channels, pixels)
