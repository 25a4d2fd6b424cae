"""Labeled Motion-Unit frame data: file I/O and the data-preparation transforms.

A :class:`Dataset` is an ordered list of frames. Its sequences are the maximal
runs of consecutive frames sharing a ``sequence_id``, so transforms that
reorder frames (balancing) keep a usable sequence view for per-sequence
post-processing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

N_MU = 12

MU_DESCRIPTIONS = (
    "vertical movement of the center of upper lip",
    "vertical movement of the center of lower lip",
    "horizontal movement of left mouth corner",
    "vertical movement of left mouth corner",
    "horizontal movement of right mouth corner",
    "vertical movement of right mouth corner",
    "vertical movement of right brow",
    "vertical movement of left brow",
    "lifting of right cheek",
    "lifting of left cheek",
    "blinking of right eye",
    "blinking of left eye",
)

FILE_HEADER = "# sequence_id,frame_index," + ",".join(f"mu{i}" for i in range(1, N_MU + 1)) + ",label"


class Emotion(IntEnum):
    NEUTRAL = 1
    JOY = 2
    SURPRISE = 3
    ANGRY = 4
    DISGUST = 5
    FEAR = 6
    SAD = 7

    @classmethod
    def parse(cls, value) -> "Emotion":
        if isinstance(value, str) and not value.strip().lstrip("-").isdigit():
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown emotion {value!r}") from None
        code = int(value)
        if not 1 <= code <= 7:
            raise ValueError(f"emotion label {code} outside 1..7")
        return cls(code)


class DatasetFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Frame:
    sequence_id: str
    frame_index: int
    features: tuple[float, ...]
    label: Emotion


@dataclass(frozen=True)
class LabeledSequence:
    sequence_id: str
    frames: tuple[Frame, ...]

    @property
    def labels(self) -> list[Emotion]:
        return [f.label for f in self.frames]


class Dataset:
    def __init__(self, frames: Iterable[Frame] = ()):
        self.frames: tuple[Frame, ...] = tuple(frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __eq__(self, other) -> bool:
        return isinstance(other, Dataset) and self.frames == other.frames

    def __repr__(self) -> str:
        return f"Dataset({len(self.frames)} frames, {len(self.sequences())} sequences)"

    def sequences(self) -> list[LabeledSequence]:
        runs: list[LabeledSequence] = []
        start = 0
        for i in range(1, len(self.frames) + 1):
            if i == len(self.frames) or self.frames[i].sequence_id != self.frames[start].sequence_id:
                if i > start:
                    runs.append(LabeledSequence(self.frames[start].sequence_id, self.frames[start:i]))
                start = i
        return runs

    def sequence_ids(self) -> list[str]:
        return list(dict.fromkeys(f.sequence_id for f in self.frames))

    def features(self) -> np.ndarray:
        return np.array([f.features for f in self.frames], dtype=float).reshape(len(self.frames), -1)

    def labels(self) -> np.ndarray:
        return np.array([int(f.label) for f in self.frames], dtype=int)

    def class_counts(self) -> dict[Emotion, int]:
        counts: dict[Emotion, int] = {}
        for f in self.frames:
            counts[f.label] = counts.get(f.label, 0) + 1
        return dict(sorted(counts.items()))


def _format_row(f: Frame) -> str:
    values = ",".join(repr(float(v)) for v in f.features)
    return f"{f.sequence_id},{f.frame_index},{values},{int(f.label)}"


def dumps(ds: Dataset) -> str:
    return "\n".join([FILE_HEADER, *(_format_row(f) for f in ds.frames)]) + "\n"


def save(ds: Dataset, path) -> None:
    Path(path).write_text(dumps(ds))


def loads(text: str, path="<string>") -> Dataset:
    """Parse the dataset text format, keeping the file's frame order.

    Frame indices must increase within each contiguous run of one sequence id,
    and no (sequence id, frame index) pair may occur twice. Reordered files,
    such as balanced or shuffled training sets, are therefore accepted.
    """
    frames = []
    seen: set[tuple[str, int]] = set()
    prev: tuple[str, int] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != N_MU + 3:
            raise DatasetFormatError(path, lineno, f"expected {N_MU + 3} fields, got {len(parts)}")
        seq_id = parts[0]
        if not seq_id:
            raise DatasetFormatError(path, lineno, "empty sequence id")
        try:
            index = int(parts[1])
        except ValueError:
            raise DatasetFormatError(path, lineno, f"bad frame index {parts[1]!r}") from None
        try:
            values = tuple(float(v) for v in parts[2:-1])
        except ValueError:
            raise DatasetFormatError(path, lineno, "bad motion-unit value") from None
        if not all(math.isfinite(v) for v in values):
            raise DatasetFormatError(path, lineno, "non-finite motion-unit value")
        try:
            label = Emotion.parse(parts[-1])
        except ValueError as exc:
            raise DatasetFormatError(path, lineno, str(exc)) from None
        if prev is not None and prev[0] == seq_id and index <= prev[1]:
            raise DatasetFormatError(
                path, lineno, f"frame index {index} not increasing in sequence {seq_id!r}"
            )
        if (seq_id, index) in seen:
            raise DatasetFormatError(path, lineno, f"duplicate frame {index} of sequence {seq_id!r}")
        seen.add((seq_id, index))
        prev = (seq_id, index)
        frames.append(Frame(seq_id, index, values, label))
    return Dataset(frames)


def load(path) -> Dataset:
    return loads(Path(path).read_text(), path)


def take_peak_frames(ds: Dataset, neutral_count: int = 3, peak_count: int = 3) -> Dataset:
    """Keep the first neutral frames and a window centred on the middle of the emotion span."""
    kept: list[Frame] = []
    for seq in ds.sequences():
        frames = seq.frames
        span_start = 0
        while span_start < len(frames) and frames[span_start].label == Emotion.NEUTRAL:
            span_start += 1
        if any(f.label == Emotion.NEUTRAL for f in frames[span_start:]):
            raise ValueError(
                f"sequence {seq.sequence_id!r}: neutral frames after the expression started"
            )
        kept.extend(frames[:min(neutral_count, span_start)])
        span_len = len(frames) - span_start
        if span_len and peak_count:
            width = min(peak_count, span_len)
            centre = span_start + span_len // 2
            lo = centre - peak_count // 2
            lo = max(span_start, min(lo, len(frames) - width))
            kept.extend(frames[lo:lo + width])
    return Dataset(kept)


def exclude_labels(ds: Dataset, labels: Iterable) -> Dataset:
    drop = {Emotion.parse(label) for label in labels}
    return Dataset(f for f in ds.frames if f.label not in drop)


def exclude_neutral(ds: Dataset) -> Dataset:
    return exclude_labels(ds, [Emotion.NEUTRAL])


def sort_and_balance(ds: Dataset, seed: int | None = None, sample: bool = False) -> Dataset:
    """Truncate every present class to the smallest class count, grouped by label code.

    By default the first frames of each class (in dataset order) are kept; with
    ``sample=True`` a seeded random subset is kept instead, still in dataset order.
    """
    by_class: dict[Emotion, list[Frame]] = {}
    for f in ds.frames:
        by_class.setdefault(f.label, []).append(f)
    if not by_class:
        return Dataset()
    m = min(len(v) for v in by_class.values())
    rng = np.random.default_rng(seed)
    out: list[Frame] = []
    for label in sorted(by_class):
        frames = by_class[label]
        if sample:
            idx = np.sort(rng.choice(len(frames), size=m, replace=False))
            out.extend(frames[i] for i in idx)
        else:
            out.extend(frames[:m])
    return Dataset(out)


def shuffle(ds: Dataset, seed: int | None = None) -> Dataset:
    """Seeded frame-level permutation (training order only; breaks sequences)."""
    order = np.random.default_rng(seed).permutation(len(ds.frames))
    return Dataset(ds.frames[i] for i in order)


def split(ds: Dataset, fraction: float = 0.7, by: str = "sequence", seed: int | None = None) -> tuple[Dataset, Dataset]:
    """Partition into (train, test), holding out whole sequences or single frames."""
    if not 0 < fraction < 1:
        raise ValueError(f"split fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    if by == "sequence":
        ids = ds.sequence_ids()
        n_train = math.floor(fraction * len(ids) + 0.5)
        chosen = {ids[i] for i in rng.permutation(len(ids))[:n_train]}
        in_train = [f.sequence_id in chosen for f in ds.frames]
    elif by == "frame":
        n_train = math.floor(fraction * len(ds.frames) + 0.5)
        chosen_idx = set(rng.permutation(len(ds.frames))[:n_train].tolist())
        in_train = [i in chosen_idx for i in range(len(ds.frames))]
    else:
        raise ValueError(f"split mode must be 'sequence' or 'frame', got {by!r}")
    train = Dataset(f for f, keep in zip(ds.frames, in_train) if keep)
    test = Dataset(f for f, keep in zip(ds.frames, in_train) if not keep)
    if not len(train) or not len(test):
        raise ValueError("split leaves the train or test side empty")
    return train, test


@dataclass(frozen=True)
class CategoryScheme:
    """Output categories and the mapping from emotion labels to output nodes."""

    names: tuple[str, ...]
    mapping: Mapping[Emotion, int]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "mapping", {Emotion(k): int(v) for k, v in self.mapping.items()})
        if sorted(set(self.mapping.values())) != list(range(len(self.names))):
            raise ValueError("every category needs at least one label and indices must be dense")

    def __len__(self) -> int:
        return len(self.names)

    def __hash__(self):
        return hash((self.names, tuple(sorted(self.mapping.items()))))

    @classmethod
    def from_labels(cls, labels: Iterable) -> "CategoryScheme":
        codes = sorted({Emotion.parse(label) for label in labels})
        return cls(tuple(c.name.lower() for c in codes), {c: i for i, c in enumerate(codes)})

    @classmethod
    def seven(cls) -> "CategoryScheme":
        return cls.from_labels(Emotion)

    @classmethod
    def four(cls) -> "CategoryScheme":
        # sad is left unmapped: drop it (exclude_labels) before building targets
        E = Emotion
        return cls(
            ("neutral", "positive", "surprise", "negative"),
            {E.NEUTRAL: 0, E.JOY: 1, E.SURPRISE: 2, E.ANGRY: 3, E.DISGUST: 3, E.FEAR: 3},
        )

    @classmethod
    def one_vs_rest(cls, label) -> "CategoryScheme":
        target = Emotion.parse(label)
        name = target.name.lower()
        return cls((name, f"not {name}"), {e: 0 if e == target else 1 for e in Emotion})

    @classmethod
    def parse(cls, text: str) -> "CategoryScheme":
        """``seven``, ``six`` (no neutral), ``four``, ``vs:<emotion>`` or a comma list of emotions."""
        text = text.strip().lower()
        if text == "seven":
            return cls.seven()
        if text == "six":
            return cls.from_labels(e for e in Emotion if e != Emotion.NEUTRAL)
        if text == "four":
            return cls.four()
        if text.startswith("vs:"):
            return cls.one_vs_rest(text[3:])
        return cls.from_labels(part for part in text.split(",") if part)

    def index(self, label) -> int:
        try:
            return self.mapping[Emotion(label)]
        except KeyError:
            raise ValueError(f"label {Emotion(label).name.lower()} is not in categories {self.names}") from None

    def covers(self, label) -> bool:
        return Emotion(label) in self.mapping

    def restrict(self, ds: Dataset) -> Dataset:
        """Drop frames whose label has no category."""
        return Dataset(f for f in ds.frames if self.covers(f.label))


def to_training_pairs(ds: Dataset, categories: CategoryScheme) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and one-hot targets (one column per category)."""
    X = ds.features()
    T = np.zeros((len(ds), len(categories)))
    for row, f in enumerate(ds.frames):
        T[row, categories.index(f.label)] = 1.0
    return X, T


def from_arrays(
    features: Sequence[Sequence[float]],
    labels: Sequence[int],
    sequence_ids: Sequence[str] | None = None,
) -> Dataset:
    """Build a dataset from parallel arrays; frame indices count up within each sequence."""
    if sequence_ids is None:
        sequence_ids = ["s0"] * len(labels)
    counters: dict[str, int] = {}
    frames = []
    for x, label, sid in zip(features, labels, sequence_ids):
        counters[sid] = counters.get(sid, 0) + 1
        frames.append(Frame(sid, counters[sid], tuple(float(v) for v in x), Emotion(int(label))))
    return Dataset(frames)
