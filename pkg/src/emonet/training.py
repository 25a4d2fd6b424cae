"""Online back-propagation with momentum for one- and two-hidden-layer networks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .network import Network, propagate, sigmoid_derivative

# per-pattern error above this (or non-finite) aborts training
DIVERGENCE_LIMIT = 1e6


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"training diverged in epoch {epoch} (pattern error {value})")
        self.epoch = epoch
        self.value = value


@dataclass(frozen=True)
class HyperParams:
    alpha: float = 0.3
    momentum: float = 0.5
    sigma: float = 1.0
    hidden_sizes: tuple[int, ...] = (10,)
    max_epochs: int = 500
    patience: int = 20
    weight_clip: float | None = None
    seed: int = 0
    init_range: tuple[float, float] = (-0.5, 0.5)
    init_threshold: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not self.alpha > 0:
            raise ValueError(f"learning rate must be positive, got {self.alpha}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 1 <= len(self.hidden_sizes) <= 2 or min(self.hidden_sizes) < 1:
            raise ValueError(f"bad hidden sizes {self.hidden_sizes}")
        if self.patience < 1 or self.max_epochs < 1:
            raise ValueError("patience and max_epochs must be at least 1")
        if self.weight_clip is not None and not self.weight_clip > 0:
            raise ValueError("weight_clip must be positive")

    def make_network(self, input_size: int, output_size: int) -> Network:
        return Network.create(
            input_size,
            self.hidden_sizes,
            output_size,
            sigma=self.sigma,
            init_range=self.init_range,
            threshold=self.init_threshold,
            seed=self.seed,
        )


@dataclass
class TrainingState:
    net: Network
    previous_deltas: list[np.ndarray] = field(default_factory=list)
    epoch: int = 0
    best_accuracy: float = 0.0
    epochs_since_improvement: int = 0

    def __post_init__(self):
        if not self.previous_deltas:
            self.previous_deltas = [np.zeros_like(w) for w in self.net.weights]
        if [d.shape for d in self.previous_deltas] != [w.shape for w in self.net.weights]:
            raise ValueError("previous_deltas do not match the weight shapes")


def error(targets, outputs) -> float:
    """Half the summed squared residual."""
    t = np.asarray(targets, dtype=float)
    y = np.asarray(outputs, dtype=float)
    if t.shape != y.shape:
        raise ValueError(f"target shape {t.shape} != output shape {y.shape}")
    return 0.5 * float(np.sum((t - y) ** 2))


def _deltas(weights, sigma, x, t):
    """Layer inputs (with bias) and error signals, output layer last."""
    acts = propagate(weights, sigma, x)
    y = acts[-1]
    t = np.asarray(t, dtype=float)
    if t.shape != y.shape:
        raise ValueError(f"target has {t.shape[-1]} entries, network has {y.shape[-1]} outputs")
    inputs = [np.append(x, 1.0)] + [np.append(a, 1.0) for a in acts[:-1]]
    delta = (t - y) * sigmoid_derivative(y, sigma)
    signals = [delta]
    # weights are read before any update, as in the textbook step
    for layer in range(len(weights) - 1, 0, -1):
        delta = sigmoid_derivative(acts[layer - 1], sigma) * (weights[layer][:-1] @ delta)
        signals.append(delta)
    signals.reverse()
    return inputs, signals, y


def error_gradient(weights: Sequence[np.ndarray], sigma: float, x, t) -> list[np.ndarray]:
    """Analytic dE/dW for every weight matrix, for a single pattern."""
    inputs, signals, _ = _deltas(weights, sigma, np.asarray(x, dtype=float), t)
    return [-np.outer(a, d) for a, d in zip(inputs, signals)]


def weight_deltas(weights, previous, sigma, x, t, alpha, momentum) -> tuple[list[np.ndarray], float]:
    """Momentum weight changes for one pattern; returns (deltas, pattern error).

    ``delta_w = alpha * delta * activation + momentum * previous_delta_w``.
    Works for any depth, including a bare single-layer perceptron.
    """
    inputs, signals, y = _deltas(weights, sigma, np.asarray(x, dtype=float), t)
    deltas = [alpha * np.outer(a, d) + momentum * p for a, d, p in zip(inputs, signals, previous)]
    return deltas, error(t, y)


def backprop_step(state: TrainingState, x, target, hp: HyperParams) -> TrainingState:
    """Apply one online update for a single pattern (mutates and returns ``state``)."""
    net = state.net
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_size,):
        raise ValueError(f"expected {net.input_size} inputs, got shape {x.shape}")
    deltas, _ = weight_deltas(
        net.weights, state.previous_deltas, net.sigma, x, target, hp.alpha, hp.momentum
    )
    for w, d in zip(net.weights, deltas):
        w += d
        if hp.weight_clip is not None:
            np.clip(w, -hp.weight_clip, hp.weight_clip, out=w)
    state.previous_deltas = deltas
    return state


def accuracy(net: Network, X, T) -> float:
    """Fraction of patterns whose output argmax matches the target argmax."""
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        return 0.0
    y = net.predict(X)
    return float(np.mean(np.argmax(y, axis=1) == np.argmax(np.asarray(T), axis=1)))


@dataclass
class TrainResult:
    network: Network
    accuracy_trace: list[float]
    best_epoch: int
    pattern_updates: int

    @property
    def epochs(self) -> int:
        return len(self.accuracy_trace)

    def epochs_to_reach(self, threshold: float) -> int | None:
        for i, acc in enumerate(self.accuracy_trace, start=1):
            if acc >= threshold:
                return i
        return None

    def trace_lines(self) -> list[str]:
        return [f"{i},{acc!r}" for i, acc in enumerate(self.accuracy_trace, start=1)]


def train(X, T, hp: HyperParams, net: Network | None = None) -> TrainResult:
    """Online momentum back-propagation in the given pattern order.

    Stops after ``hp.max_epochs`` epochs, after ``hp.patience`` epochs without a
    strict gain in training accuracy, or once every pattern is classified
    correctly. Returns the weights of the best-accuracy epoch.
    """
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("training needs a non-empty 2-D pattern array")
    if len(X) != len(T):
        raise ValueError(f"{len(X)} patterns but {len(T)} targets")
    if net is None:
        net = hp.make_network(X.shape[1], T.shape[1])
    else:
        net = net.copy()
    state = TrainingState(net)
    best = net.copy()
    best_epoch = 0
    trace: list[float] = []
    best_acc = -1.0
    updates = 0
    for epoch in range(1, hp.max_epochs + 1):
        state.epoch = epoch
        for x, t in zip(X, T):
            deltas, e = weight_deltas(
                net.weights, state.previous_deltas, net.sigma, x, t, hp.alpha, hp.momentum
            )
            if not (e <= DIVERGENCE_LIMIT) or not all(np.isfinite(d).all() for d in deltas):
                raise TrainingDiverged(epoch, e)
            for w, d in zip(net.weights, deltas):
                w += d
                if hp.weight_clip is not None:
                    np.clip(w, -hp.weight_clip, hp.weight_clip, out=w)
            state.previous_deltas = deltas
            updates += 1
        acc = accuracy(net, X, T)
        trace.append(acc)
        if acc > best_acc:
            best_acc = acc
            best = net.copy()
            best_epoch = epoch
            state.epochs_since_improvement = 0
        else:
            state.epochs_since_improvement += 1
        state.best_accuracy = best_acc
        if best_acc >= 1.0 or state.epochs_since_improvement >= hp.patience:
            break
    return TrainResult(best, trace, best_epoch, updates)
