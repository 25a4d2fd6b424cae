"""Synthetic Motion-Unit sequences traced by Bezier curves.

Each sequence starts with a neutral prefix and then every MU follows a cubic
Bezier rise from 0 to the template apex, followed by the mirrored fall. The
apex frame sits at the middle of the emotion span.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import N_MU, Dataset, Emotion, Frame

# fraction-of-apex control values for the rise half; a quick onset then a plateau
DEFAULT_PROFILE = (0.0, 1.0, 1.0, 1.0)


def bernstein(i: int, n: int, u: float) -> float:
    """Bernstein basis polynomial ``C(n, i) u^i (1 - u)^(n - i)``."""
    if not 0 <= i <= n:
        raise ValueError(f"need 0 <= i <= n, got i={i}, n={n}")
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    return math.comb(n, i) * u**i * (1.0 - u) ** (n - i)


def bezier_eval(control_points: Sequence[float], u: float) -> float:
    """Point on the 1-D Bezier curve with the given control values."""
    b = [float(c) for c in control_points]
    if len(b) < 2:
        raise ValueError("a Bezier curve needs at least two control points")
    n = len(b) - 1
    return sum(bi * bernstein(i, n, u) for i, bi in enumerate(b))


@dataclass(frozen=True)
class EmotionTemplate:
    label: Emotion
    apex: tuple[float, ...]
    # one rise profile per MU, each from 0 to 1 (fractions of the apex value)
    control_points: tuple[tuple[float, ...], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "label", Emotion.parse(self.label))
        object.__setattr__(self, "apex", tuple(float(v) for v in self.apex))
        if len(self.apex) != N_MU:
            raise ValueError(f"apex needs {N_MU} values")
        if any(abs(v) > 2.0 for v in self.apex):
            raise ValueError("apex values must stay within [-2, 2]")
        cps = self.control_points or (DEFAULT_PROFILE,) * N_MU
        cps = tuple(tuple(float(c) for c in p) for p in cps)
        if len(cps) != N_MU or any(len(p) < 2 for p in cps):
            raise ValueError(f"need {N_MU} control profiles of at least two points")
        object.__setattr__(self, "control_points", cps)

    def trajectory(self, span: int) -> np.ndarray:
        """Noise-free MU values for an emotion span of ``span`` frames, shape (span, 12)."""
        centre = span // 2
        out = np.empty((span, N_MU))
        for k in range(span):
            if k <= centre:
                u = (k + 1) / (centre + 1)
            else:
                u = 1.0 - (k - centre) / (span - centre)
            for m in range(N_MU):
                cps = [self.apex[m] * c for c in self.control_points[m]]
                out[k, m] = bezier_eval(cps, u)
        return out


@dataclass(frozen=True)
class SynthConfig:
    frames_per_sequence: int = 20
    neutral_prefix: int = 5
    noise_std: float = 0.1
    sequences_per_emotion: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.frames_per_sequence < 1:
            raise ValueError("frames_per_sequence must be positive")
        if not 0 <= self.neutral_prefix < self.frames_per_sequence:
            raise ValueError("neutral_prefix must be smaller than frames_per_sequence")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


def default_templates() -> list[EmotionTemplate]:
    """Seven hand-set templates following the MU directions of each expression.

    Index: 1/2 upper/lower lip, 3-6 mouth corners (h, v, h, v), 7/8 brows,
    9/10 cheeks, 11/12 eye closure. Magnitudes are synthetic.
    """
    E = Emotion
    #            mu1   mu2   mu3   mu4   mu5   mu6   mu7   mu8   mu9  mu10  mu11  mu12
    apexes = {
        E.NEUTRAL: (0.0,) * N_MU,
        E.JOY: (0.3, -0.3, -0.7, 1.3, 0.7, 1.3, 0.0, 0.0, 1.2, 1.2, 0.3, 0.3),
        E.SURPRISE: (0.4, -1.6, 0.0, 0.0, 0.0, 0.0, 1.6, 1.6, 0.0, 0.0, -0.6, -0.6),
        E.ANGRY: (-0.5, 0.5, 0.3, -0.3, -0.3, -0.3, -1.4, -1.4, 0.0, 0.0, 0.7, 0.7),
        E.DISGUST: (1.2, 0.4, 0.0, -0.6, 0.0, -0.6, -0.6, -0.6, 0.9, 0.9, 0.4, 0.4),
        E.FEAR: (0.0, -0.8, -0.9, -0.3, 0.9, -0.3, 0.9, 0.9, 0.0, 0.0, -0.5, -0.5),
        E.SAD: (-0.2, 0.4, 0.0, -1.2, 0.0, -1.2, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5),
    }
    return [EmotionTemplate(label, apex) for label, apex in apexes.items()]


def load_templates(path) -> list[EmotionTemplate]:
    """Read ``label,mu1,...,mu12`` lines (``#`` comments allowed)."""
    templates = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != N_MU + 1:
            raise ValueError(f"{path}:{lineno}: expected label and {N_MU} values")
        try:
            templates.append(EmotionTemplate(parts[0], tuple(float(v) for v in parts[1:])))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not templates:
        raise ValueError(f"{path}: no templates")
    return templates


def generate(templates: Sequence[EmotionTemplate], cfg: SynthConfig) -> Dataset:
    """Labeled sequences, interleaved across templates (one of each, then the next round)."""
    if not templates:
        raise ValueError("no templates given")
    if cfg.sequences_per_emotion < 1:
        raise ValueError("sequences_per_emotion must be at least 1")
    rng = np.random.default_rng(cfg.seed)
    span = cfg.frames_per_sequence - cfg.neutral_prefix
    clean = {t.label: t.trajectory(span) for t in templates}
    frames = []
    for r in range(cfg.sequences_per_emotion):
        for t in templates:
            seq_id = f"{t.label.name.lower()}-{r:03d}"
            values = np.vstack([np.zeros((cfg.neutral_prefix, N_MU)), clean[t.label]])
            if cfg.noise_std > 0:
                values = values + rng.normal(0.0, cfg.noise_std, size=values.shape)
            for k, row in enumerate(values):
                label = Emotion.NEUTRAL if k < cfg.neutral_prefix else t.label
                frames.append(Frame(seq_id, k + 1, tuple(float(v) for v in row), label))
    return Dataset(frames)
