"""Query-counted black-box interface to serialized feed-forward classifiers.

The attacker side of the package only ever sees ``query`` / ``predict_class``
plus a counter; weights never leave this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExhaustedError, ModelFormatError

ACTIVATIONS = ("relu", "softmax", "identity")

DEFAULT_PIXEL_BOUNDS = (-0.5, 0.5)


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (rows, cols), applied as weights @ x + bias
    bias: np.ndarray  # (rows,)
    activation: str


@dataclass(frozen=True)
class ClassifierModel:
    """Immutable dense feed-forward network ending in a softmax layer."""

    layers: tuple[Layer, ...]
    input_shape: tuple[int, int, int]
    num_classes: int


@dataclass
class InputTensor:
    """Image-like input: flat (h*w*c) array with every entry in [l, u]."""

    shape: tuple[int, int, int]
    data: np.ndarray
    bounds: tuple[float, float] = DEFAULT_PIXEL_BOUNDS

    def __post_init__(self):
        h, w, c = self.shape
        if h < 1 or w < 1 or c < 1:
            raise ValueError(f"invalid image shape {self.shape}")
        self.data = np.asarray(self.data, dtype=np.float64).ravel()
        if self.data.size != h * w * c:
            raise ValueError(
                f"data length {self.data.size} does not match shape {self.shape}"
            )
        l, u = self.bounds
        if not l < u:
            raise ValueError(f"invalid bounds {self.bounds}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("input contains non-finite entries")
        if self.data.min() < l or self.data.max() > u:
            raise ValueError(f"input entries outside [{l}, {u}]")

    @property
    def n(self) -> int:
        h, w, c = self.shape
        return h * w * c


@dataclass
class QueryCounter:
    """Per-attack evaluation budget; single-owner, never shared."""

    budget: int
    count: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be positive")

    @property
    def remaining(self) -> int:
        return self.budget - self.count

    @property
    def exhausted(self) -> bool:
        return self.count >= self.budget

    def charge(self) -> None:
        if self.exhausted:
            raise BudgetExhaustedError(
                f"query budget of {self.budget} evaluations exhausted"
            )
        self.count += 1


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def _activate(z: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "softmax":
        return _softmax(z)
    return z


def forward(model: ClassifierModel, x: InputTensor) -> np.ndarray:
    """Uncounted forward pass; for harness bookkeeping and final verification only."""
    if x.shape != model.input_shape:
        raise ValueError(
            f"input shape {x.shape} does not match model shape {model.input_shape}"
        )
    z = x.data
    for layer in model.layers:
        z = _activate(layer.weights @ z + layer.bias, layer.activation)
    return z


def query(model: ClassifierModel, x: InputTensor, counter: QueryCounter) -> np.ndarray:
    """Evaluate the classifier once, charging exactly one unit of budget.

    Returns the post-softmax probability vector of length ``num_classes``.
    """
    if x.shape != model.input_shape:
        raise ValueError(
            f"input shape {x.shape} does not match model shape {model.input_shape}"
        )
    counter.charge()
    return forward(model, x)


def predict_class(model: ClassifierModel, x: InputTensor, counter: QueryCounter) -> int:
    """Counted argmax query; ties break to the lowest class index."""
    return int(np.argmax(query(model, x, counter)))


def _reject_constant(token: str):
    raise ModelFormatError(f"non-finite literal {token!r} in file")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh, parse_constant=_reject_constant)
    except OSError as exc:
        raise ModelFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{path}: top-level value must be an object")
    return obj


def _as_finite_array(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ModelFormatError(f"{what} must be a flat list of reals")
    if not np.all(np.isfinite(arr)):
        # json itself admits 1e999-style overflow to inf
        raise ModelFormatError(f"{what} contains non-finite values")
    return arr


def load_model(path: str) -> ClassifierModel:
    """Load and validate a weights file (see README for the schema)."""
    obj = _load_json(path)
    try:
        shape = tuple(int(v) for v in obj["input_shape"])
        raw_layers = obj["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: missing or malformed field: {exc}") from exc
    if len(shape) != 3 or any(v < 1 for v in shape):
        raise ModelFormatError(f"{path}: input_shape must be three positive ints")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ModelFormatError(f"{path}: layers must be a non-empty list")

    layers = []
    prev_dim = shape[0] * shape[1] * shape[2]
    for idx, spec in enumerate(raw_layers):
        try:
            rows, cols = int(spec["rows"]), int(spec["cols"])
            activation = spec["activation"]
            weights = _as_finite_array(spec["weights"], f"layer {idx} weights")
            bias = _as_finite_array(spec["bias"], f"layer {idx} bias")
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"{path}: layer {idx} malformed: {exc}") from exc
        if rows < 1 or cols < 1:
            raise ModelFormatError(f"{path}: layer {idx} has non-positive dims")
        if activation not in ACTIVATIONS:
            raise ModelFormatError(
                f"{path}: layer {idx} has unknown activation {activation!r}"
            )
        if weights.size != rows * cols:
            raise ModelFormatError(
                f"{path}: layer {idx} expects {rows * cols} weights, got {weights.size}"
            )
        if bias.size != rows:
            raise ModelFormatError(
                f"{path}: layer {idx} expects {rows} bias entries, got {bias.size}"
            )
        if cols != prev_dim:
            raise ModelFormatError(
                f"{path}: layer {idx} input dim {cols} does not chain with {prev_dim}"
            )
        layers.append(Layer(weights.reshape(rows, cols), bias, activation))
        prev_dim = rows

    if layers[-1].activation != "softmax":
        raise ModelFormatError(f"{path}: final activation must be softmax")
    return ClassifierModel(tuple(layers), shape, layers[-1].weights.shape[0])
