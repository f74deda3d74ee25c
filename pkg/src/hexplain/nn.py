"""Small dense ReLU classifiers: forward pass, analytic gradients, SGD.

Everything is plain numpy with float64 weights. Training, forward and
gradient evaluation are bit-reproducible given the same seed and inputs;
the model file format keeps full decimal precision so a save/load round
trip is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, SchemaError

RELU, IDENTITY = "relu", "identity"

MODEL_SCHEMA = "hexplain-mlp/1"


@dataclass(frozen=True)
class Image:
    """A [0,1]-normalized raster image, row-major and channel-interleaved."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64).reshape(-1)
        if pixels.size != self.width * self.height * self.channels:
            raise DimensionMismatch(
                f"{pixels.size} pixels for {self.width}x{self.height}x{self.channels}"
            )
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            raise DimensionMismatch("pixel values must lie in [0, 1]")
        pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @property
    def num_features(self) -> int:
        return self.pixels.size


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str

    def __post_init__(self):
        weight = np.asarray(self.weight, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise DimensionMismatch("layer weight/bias shapes do not match")
        if self.activation not in (RELU, IDENTITY):
            raise DimensionMismatch(f"unknown activation {self.activation!r}")
        weight.flags.writeable = False
        bias.flags.writeable = False
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)


@dataclass(frozen=True)
class MlpModel:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DimensionMismatch("model needs at least one layer")
        for before, after in zip(layers, layers[1:]):
            if after.weight.shape[1] != before.weight.shape[0]:
                raise DimensionMismatch("consecutive layer dimensions do not chain")
        if layers[-1].activation != IDENTITY:
            raise DimensionMismatch("final activation must be identity")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    epochs: int
    batch_size: int
    seed: int

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise EmptyDataset("training hyperparameters must be positive")


def _as_vector(model: MlpModel, x) -> np.ndarray:
    vector = x.pixels if isinstance(x, Image) else np.asarray(x, dtype=np.float64)
    if vector.shape != (model.input_dim,):
        raise DimensionMismatch(
            f"input of size {vector.size} for model expecting {model.input_dim}"
        )
    return vector


def forward(model: MlpModel, x) -> np.ndarray:
    """Logits for one input (an Image or a flat feature vector)."""
    value = _as_vector(model, x)
    for layer in model.layers:
        value = layer.weight @ value + layer.bias
        if layer.activation == RELU:
            value = np.maximum(value, 0.0)
    return value


def forward_batch(model: MlpModel, xs: np.ndarray) -> np.ndarray:
    """Logits for a (batch, input_dim) matrix of inputs."""
    value = np.asarray(xs, dtype=np.float64)
    if value.ndim != 2 or value.shape[1] != model.input_dim:
        raise DimensionMismatch(f"batch shape {value.shape} does not match model")
    for layer in model.layers:
        value = value @ layer.weight.T + layer.bias
        if layer.activation == RELU:
            value = np.maximum(value, 0.0)
    return value


def predict_label(model: MlpModel, x) -> int:
    """Argmax class with lowest-index tie-break."""
    return int(np.argmax(forward(model, x)))


def softmax_cross_entropy(logits: np.ndarray, target: int) -> float:
    shifted = logits - logits.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[target])


def grad(model: MlpModel, x, target: int) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Gradients of the softmax cross-entropy loss at (x, target).

    Returns per-layer (d_weight, d_bias) pairs plus the gradient with
    respect to the input vector (used by the counterexample search).
    """
    vector = _as_vector(model, x)
    if not 0 <= target < model.output_dim:
        raise DimensionMismatch(f"target {target} out of range")

    activations = [vector]
    pre_relu = []
    value = vector
    for layer in model.layers:
        z = layer.weight @ value + layer.bias
        pre_relu.append(z)
        value = np.maximum(z, 0.0) if layer.activation == RELU else z
        activations.append(value)

    logits = activations[-1]
    shifted = np.exp(logits - logits.max())
    delta = shifted / shifted.sum()
    delta[target] -= 1.0

    weight_grads: list[tuple[np.ndarray, np.ndarray]] = []
    for index in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[index]
        weight_grads.append((np.outer(delta, activations[index]), delta.copy()))
        delta = layer.weight.T @ delta
        if index > 0 and model.layers[index - 1].activation == RELU:
            delta = delta * (pre_relu[index - 1] > 0)
    weight_grads.reverse()
    return weight_grads, delta


def init_model(input_dim: int, hidden: Sequence[int], output_dim: int, seed: int) -> MlpModel:
    """Seeded uniform(-s, s) weights with s = 1/sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    dims = [input_dim, *hidden, output_dim]
    layers = []
    for position, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        scale = 1.0 / np.sqrt(fan_in)
        weight = rng.uniform(-scale, scale, size=(fan_out, fan_in))
        activation = IDENTITY if position == len(dims) - 2 else RELU
        layers.append(Layer(weight, np.zeros(fan_out), activation))
    return MlpModel(tuple(layers))


def train(
    dataset: Sequence[tuple[Image, int]],
    cfg: TrainConfig,
    hidden: Sequence[int] = (10, 10),
    num_classes: int | None = None,
) -> MlpModel:
    """Mini-batch SGD on softmax cross-entropy; deterministic per seed."""
    if not dataset:
        raise EmptyDataset("training requires at least one example")
    xs = np.stack([image.pixels for image, _ in dataset])
    ys = np.array([label for _, label in dataset], dtype=np.int64)
    if num_classes is None:
        num_classes = int(ys.max()) + 1

    model = init_model(xs.shape[1], hidden, num_classes, cfg.seed)
    weights = [layer.weight.copy() for layer in model.layers]
    biases = [layer.bias.copy() for layer in model.layers]
    activations = [layer.activation for layer in model.layers]
    rng = np.random.default_rng(cfg.seed + 1)

    for _ in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(dataset), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            x, y = xs[batch], ys[batch]

            cache = [x]
            masks = []
            value = x
            for w, b, act in zip(weights, biases, activations):
                z = value @ w.T + b
                if act == RELU:
                    masks.append(z > 0)
                    value = np.maximum(z, 0.0)
                else:
                    masks.append(None)
                    value = z
                cache.append(value)

            shifted = np.exp(value - value.max(axis=1, keepdims=True))
            delta = shifted / shifted.sum(axis=1, keepdims=True)
            delta[np.arange(len(batch)), y] -= 1.0
            delta /= len(batch)

            for index in range(len(weights) - 1, -1, -1):
                d_weight = delta.T @ cache[index]
                d_bias = delta.sum(axis=0)
                if index > 0:
                    delta = delta @ weights[index]
                    if masks[index - 1] is not None:
                        delta = delta * masks[index - 1]
                weights[index] -= cfg.learning_rate * d_weight
                biases[index] -= cfg.learning_rate * d_bias

    return MlpModel(
        tuple(
            Layer(w, b, act)
            for w, b, act in zip(weights, biases, activations)
        )
    )


def accuracy(model: MlpModel, dataset: Sequence[tuple[Image, int]]) -> float:
    if not dataset:
        raise EmptyDataset("accuracy over an empty dataset")
    xs = np.stack([image.pixels for image, _ in dataset])
    ys = np.array([label for _, label in dataset])
    return float((forward_batch(model, xs).argmax(axis=1) == ys).mean())


# ----------------------------------------------------------------------
# model file round-trip


def save_model(model: MlpModel, path) -> None:
    payload = {
        "schema": MODEL_SCHEMA,
        "layers": [
            {
                "activation": layer.activation,
                "weight": layer.weight.tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in model.layers
        ],
    }
    with open(path, "w", encoding="ascii") as stream:
        json.dump(payload, stream)
        stream.write("\n")


def load_model(path) -> MlpModel:
    with open(path, "r", encoding="ascii") as stream:
        payload = json.load(stream)
    if not isinstance(payload, dict) or payload.get("schema") != MODEL_SCHEMA:
        raise SchemaError(f"not a {MODEL_SCHEMA} document")
    layers = tuple(
        Layer(
            np.array(entry["weight"], dtype=np.float64),
            np.array(entry["bias"], dtype=np.float64),
            entry["activation"],
        )
        for entry in payload["layers"]
    )
    return MlpModel(layers)
