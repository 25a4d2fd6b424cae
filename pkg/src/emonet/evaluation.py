"""Output decisions, label smoothing and confusion-matrix scoring."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import CategoryScheme, Dataset
from .network import Network


def normalize_output(raw) -> np.ndarray:
    """One-hot vector at the argmax; ties go to the lowest index."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.size == 0:
        raise ValueError("need a non-empty output vector")
    out = np.zeros_like(raw)
    out[int(np.argmax(raw))] = 1.0
    return out


def median_filter(labels: Sequence[int], window: int = 3) -> list[int]:
    """Centred running median of integer label codes within one sequence.

    Near the ends the window is clipped to the sequence. A clipped window of
    even size has two middle values; the frame keeps its own label when it is
    one of them, otherwise the lower one is taken.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"median window must be an odd number >= 3, got {window}")
    codes = [int(v) for v in labels]
    half = window // 2
    out = []
    for i, own in enumerate(codes):
        vals = sorted(codes[max(0, i - half):i + half + 1])
        k = len(vals)
        if k % 2:
            out.append(vals[k // 2])
        else:
            lo, hi = vals[k // 2 - 1], vals[k // 2]
            out.append(own if own in (lo, hi) else lo)
    return out


def median_filter_sequences(labels: Sequence[int], sequence_ids: Sequence, window: int = 3) -> list[int]:
    """Median-filter each run of equal ``sequence_ids`` separately."""
    if len(labels) != len(sequence_ids):
        raise ValueError("labels and sequence ids differ in length")
    out: list[int] = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or sequence_ids[i] != sequence_ids[start]:
            out.extend(median_filter(labels[start:i], window))
            start = i
    return out


@dataclass
class ConfusionMatrix:
    categories: tuple[str, ...]
    counts: np.ndarray  # rows: true class, columns: predicted class

    def __post_init__(self):
        self.categories = tuple(self.categories)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.categories)
        if self.counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}")
        if (self.counts < 0).any():
            raise ValueError("negative count")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def rates(self) -> np.ndarray:
        """Row-normalized rates; empty rows stay zero."""
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def format_table(self, decimals: int = 2) -> str:
        """Aligned percentage table with one row per true class."""
        rates = self.rates() * 100
        width = max(8, max(len(c) for c in self.categories) + 1, decimals + 5)
        head = " " * width + "".join(c.rjust(width) for c in self.categories)
        lines = [head]
        for name, row in zip(self.categories, rates):
            lines.append(name.ljust(width) + "".join(f"{v:.{decimals}f}".rjust(width) for v in row))
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["true\\predicted," + ",".join(self.categories)]
        for name, row in zip(self.categories, self.counts):
            lines.append(name + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def confusion(true_labels: Sequence[int], predicted_labels: Sequence[int], categories: Sequence[str]) -> ConfusionMatrix:
    """Count (true, predicted) pairs; labels are category indices."""
    if len(true_labels) != len(predicted_labels):
        raise ValueError("true and predicted label lists differ in length")
    k = len(categories)
    t = np.asarray(true_labels, dtype=int)
    p = np.asarray(predicted_labels, dtype=int)
    if t.size and (t.min() < 0 or p.min() < 0 or t.max() >= k or p.max() >= k):
        raise ValueError("label index outside the category range")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(tuple(categories), counts)


def average_rate(cm: ConfusionMatrix) -> float:
    """Unweighted mean of the per-class recognition rates (matrix diagonal)."""
    rows = cm.counts.sum(axis=1)
    for name, n in zip(cm.categories, rows):
        if n == 0:
            raise ValueError(f"class {name!r} never occurs in the true labels")
    return float(np.mean(np.diag(cm.counts) / rows))


@dataclass
class Evaluation:
    matrix: ConfusionMatrix
    average_rate: float
    accuracy: float
    predictions: list[int]
    outputs: np.ndarray


def predict_indices(net: Network, X) -> np.ndarray:
    return np.argmax(net.predict(np.asarray(X, dtype=float)), axis=1)


def evaluate(
    net: Network,
    test: Dataset,
    categories: CategoryScheme,
    median_window: int | None = None,
    normalize: bool = True,
) -> Evaluation:
    """Score a network on labeled frames.

    Each frame is assigned the category with the highest output. With
    ``median_window`` the per-frame decisions are median-filtered within each
    sequence before scoring. ``normalize`` only controls whether the returned
    ``outputs`` are one-hot or raw activations.
    """
    if len(test) == 0:
        raise ValueError("empty test set")
    if net.output_size != len(categories):
        raise ValueError(
            f"network has {net.output_size} outputs but there are {len(categories)} categories"
        )
    raw = net.predict(test.features())
    pred = [int(i) for i in np.argmax(raw, axis=1)]
    truth = [categories.index(f.label) for f in test.frames]
    if median_window:
        pred = median_filter_sequences(pred, [f.sequence_id for f in test.frames], median_window)
    cm = confusion(truth, pred, categories.names)
    present = cm.counts.sum(axis=1) > 0
    rate = float(np.mean(np.diag(cm.rates())[present]))
    outputs = np.array([normalize_output(r) for r in raw]) if normalize else raw
    return Evaluation(cm, rate, cm.accuracy(), pred, outputs)
