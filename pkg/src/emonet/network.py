"""Feed-forward sigmoid network: representation, forward pass, weight init, model files.

Every weight matrix has shape ``(fan_in + 1, fan_out)``; the last row holds the
bias weights, fed by a constant input of 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MODEL_HEADER = "emonet-model 1"

# exp() overflows float64 past ~709
_EXP_LIMIT = 700.0


def sigmoid(x, sigma: float):
    """Parameterized logistic ``1 / (1 + exp(-sigma * x))``.

    Works on scalars and arrays. Very large arguments saturate to exactly 0 or 1
    instead of overflowing.
    """
    z = np.clip(sigma * np.asarray(x, dtype=float), -_EXP_LIMIT, _EXP_LIMIT)
    out = 1.0 / (1.0 + np.exp(-z))
    return float(out) if out.ndim == 0 else out


def sigmoid_derivative(y, sigma: float):
    """Derivative of :func:`sigmoid` written in terms of its output ``y``."""
    y = np.asarray(y, dtype=float)
    out = sigma * y * (1.0 - y)
    return float(out) if out.ndim == 0 else out


def _with_bias(a: np.ndarray) -> np.ndarray:
    ones = np.ones(a.shape[:-1] + (1,))
    return np.concatenate([a, ones], axis=-1)


def propagate(weights: Sequence[np.ndarray], sigma: float, x) -> list[np.ndarray]:
    """Forward pass through an arbitrary stack of layers.

    ``x`` may be a single vector or a batch of row vectors. Returns the
    activations of every non-input layer, output last.
    """
    a = np.asarray(x, dtype=float)
    if a.shape[-1] + 1 != weights[0].shape[0]:
        raise ValueError(
            f"input has {a.shape[-1]} features, network expects {weights[0].shape[0] - 1}"
        )
    activations = []
    for w in weights:
        a = sigmoid(_with_bias(a) @ w, sigma)
        a = np.asarray(a)
        activations.append(a)
    return activations


def layer_shapes(input_size: int, hidden_sizes: Sequence[int], output_size: int) -> list[tuple[int, int]]:
    sizes = [input_size, *hidden_sizes, output_size]
    return [(sizes[i] + 1, sizes[i + 1]) for i in range(len(sizes) - 1)]


def init_weights(
    shapes: Sequence[tuple[int, int]],
    low: float = -0.5,
    high: float = 0.5,
    threshold: float = math.inf,
    rng: np.random.Generator | int | None = None,
) -> list[np.ndarray]:
    """Draw uniform weights in ``[low, high]``, redrawing any with ``|w| > threshold``."""
    if not low < high:
        raise ValueError(f"empty init range [{low}, {high}]")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if min(high, threshold) - max(low, -threshold) <= 0:
        raise ValueError(
            f"no weight in [{low}, {high}] satisfies |w| <= {threshold}"
        )
    rng = np.random.default_rng(rng)
    weights = []
    for shape in shapes:
        w = rng.uniform(low, high, size=shape)
        bad = np.abs(w) > threshold
        while bad.any():
            w[bad] = rng.uniform(low, high, size=int(bad.sum()))
            bad = np.abs(w) > threshold
        weights.append(w)
    return weights


@dataclass
class Network:
    input_size: int
    hidden_sizes: tuple[int, ...]
    output_size: int
    weights: list[np.ndarray]
    sigma: float = 1.0
    # free-form key/value metadata carried through model files
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if not 1 <= len(self.hidden_sizes) <= 2:
            raise ValueError("a network has one or two hidden layers")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        expected = layer_shapes(self.input_size, self.hidden_sizes, self.output_size)
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        got = [w.shape for w in self.weights]
        if got != expected:
            raise ValueError(f"weight shapes {got} do not match layer sizes {expected}")

    @classmethod
    def create(
        cls,
        input_size: int,
        hidden_sizes: Sequence[int],
        output_size: int,
        sigma: float = 1.0,
        init_range: tuple[float, float] = (-0.5, 0.5),
        threshold: float = math.inf,
        seed: int | None = None,
    ) -> "Network":
        shapes = layer_shapes(input_size, hidden_sizes, output_size)
        weights = init_weights(shapes, *init_range, threshold=threshold, rng=seed)
        return cls(input_size, tuple(hidden_sizes), output_size, weights, sigma)

    @property
    def sizes(self) -> list[int]:
        return [self.input_size, *self.hidden_sizes, self.output_size]

    def copy(self) -> "Network":
        return Network(
            self.input_size,
            self.hidden_sizes,
            self.output_size,
            [w.copy() for w in self.weights],
            self.sigma,
            dict(self.meta),
        )

    def predict(self, x) -> np.ndarray:
        """Output-layer activations for one vector or a batch."""
        return forward(self, x)[-1]


def forward(net: Network, x) -> list[np.ndarray]:
    """Activations of every hidden layer and the output layer (output last)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_size:
        raise ValueError(f"expected {net.input_size} inputs, got {x.shape[-1]}")
    return propagate(net.weights, net.sigma, x)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_model(net: Network, path) -> None:
    lines = [MODEL_HEADER]
    for key, value in net.meta.items():
        if any(c.isspace() for c in key) or "\n" in value:
            raise ValueError(f"unsupported metadata entry {key!r}")
        lines.append(f"meta {key} {value}")
    lines.append(f"sigma {_fmt(net.sigma)}")
    lines.append("layers " + " ".join(str(s) for s in net.sizes))
    for w in net.weights:
        for row in w:
            lines.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> Network:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != MODEL_HEADER:
        raise ValueError(f"{path}: line 1: not a model file (expected {MODEL_HEADER!r})")
    meta: dict[str, str] = {}
    sigma = None
    sizes = None
    pos = 1
    while pos < len(text) and sizes is None:
        line = text[pos]
        pos += 1
        key, _, rest = line.partition(" ")
        try:
            if key == "meta":
                k, _, v = rest.partition(" ")
                meta[k] = v
            elif key == "sigma":
                sigma = float(rest)
            elif key == "layers":
                sizes = [int(s) for s in rest.split()]
            else:
                raise ValueError(f"unexpected entry {key!r}")
        except ValueError as exc:
            raise ValueError(f"{path}: line {pos}: {exc}") from None
    if sigma is None or sizes is None or len(sizes) < 3:
        raise ValueError(f"{path}: missing sigma or layers line")
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        rows = []
        for _ in range(fan_in + 1):
            if pos >= len(text):
                raise ValueError(f"{path}: truncated weight matrix")
            pos += 1
            try:
                row = [float(v) for v in text[pos - 1].split()]
            except ValueError:
                raise ValueError(f"{path}: line {pos}: bad number") from None
            if len(row) != fan_out:
                raise ValueError(f"{path}: line {pos}: expected {fan_out} values, got {len(row)}")
            rows.append(row)
        weights.append(np.array(rows, dtype=float))
    if any(line.strip() for line in text[pos:]):
        raise ValueError(f"{path}: line {pos + 1}: trailing data")
    return Network(sizes[0], tuple(sizes[1:-1]), sizes[-1], weights, sigma, meta)
