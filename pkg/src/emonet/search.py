"""Stepped grid sweeps over learning rate, momentum, sigma and hidden sizes.

Combinations are tried in a fixed order: hidden sizes outermost, then sigma,
then alpha, with momentum innermost. Whenever the validation rate strictly
beats the best so far, a record is appended to the log.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .dataset import CategoryScheme, Dataset, to_training_pairs
from .evaluation import evaluate
from .training import HyperParams, TrainingDiverged, train

log = logging.getLogger(__name__)

RECORD_FIELDS = ("sigma", "alpha", "lambda", "hidden_sizes", "train_rate", "test_rate", "seed")


def grid(lo: float, hi: float, step: float) -> list[float]:
    """``lo, lo + step, ...`` up to and including ``hi`` (rounded to 12 decimals)."""
    if lo > hi:
        raise ValueError(f"range [{lo}, {hi}] is empty")
    if not step > 0:
        raise ValueError("step must be positive")
    count = math.floor((hi - lo) / step + 1e-9) + 1
    return [round(float(lo + i * step), 12) for i in range(count)]


@dataclass(frozen=True)
class SearchSpace:
    sigma_range: tuple[float, float, float] = (1.0, 1.0, 1.0)
    alpha_range: tuple[float, float, float] = (0.3, 0.3, 0.1)
    lambda_range: tuple[float, float, float] = (0.5, 0.5, 0.1)
    hidden_size_candidates: tuple[tuple[int, ...], ...] = ((10,),)
    # consecutive non-improving combos before stopping; None sweeps everything
    patience_turns: int | None = None
    epochs: int = 500
    # per-run early stop on training accuracy (see HyperParams.patience)
    train_patience: int = 20

    def __post_init__(self):
        object.__setattr__(
            self, "hidden_size_candidates", tuple(tuple(int(h) for h in c) for c in self.hidden_size_candidates)
        )
        if not self.hidden_size_candidates:
            raise ValueError("no hidden-size candidates")
        for r in (self.sigma_range, self.alpha_range, self.lambda_range):
            grid(*r)
        if self.patience_turns is not None and self.patience_turns < 1:
            raise ValueError("patience_turns must be at least 1")


def enumerate_grid(space: SearchSpace, seed: int = 0) -> list[HyperParams]:
    combos = []
    for sizes in space.hidden_size_candidates:
        for sigma in grid(*space.sigma_range):
            for alpha in grid(*space.alpha_range):
                for lam in grid(*space.lambda_range):
                    combos.append(
                        HyperParams(
                            alpha=alpha,
                            momentum=lam,
                            sigma=sigma,
                            hidden_sizes=sizes,
                            max_epochs=space.epochs,
                            patience=space.train_patience,
                            seed=seed,
                        )
                    )
    if not combos:
        raise ValueError("the search space is empty")
    return combos


@dataclass(frozen=True)
class SearchRecord:
    hyperparams: HyperParams
    train_rate: float
    test_rate: float
    seed: int
    timestamp: str | None = None


@dataclass
class SearchResult:
    best: SearchRecord | None
    records: list[SearchRecord]
    evaluated: int
    skipped: list[HyperParams] = field(default_factory=list)


def _run_combo(args):
    hp, X, T, validation, categories, median_window = args
    try:
        result = train(X, T, hp)
    except TrainingDiverged as exc:
        return hp, None, str(exc)
    train_rate = result.accuracy_trace[result.best_epoch - 1]
    score = evaluate(result.network, validation, categories, median_window=median_window)
    return hp, (train_rate, score.average_rate), None


def search(
    space: SearchSpace,
    train_set: Dataset,
    validation: Dataset,
    categories: CategoryScheme,
    seed: int = 0,
    median_window: int | None = None,
    workers: int = 1,
    timestamps: bool = True,
) -> SearchResult:
    """Train one network per grid point and keep the best validation average rate.

    Diverged runs are logged and skipped. Ties keep the earlier combination.
    With ``workers > 1`` every combination is trained in a process pool and
    the results replayed in grid order, so the outcome matches a serial run.
    """
    if not len(train_set) or not len(validation):
        raise ValueError("search needs non-empty train and validation sets")
    X, T = to_training_pairs(train_set, categories)
    combos = enumerate_grid(space, seed)
    jobs = [(hp, X, T, validation, categories, median_window) for hp in combos]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = iter(pool.map(_run_combo, jobs))
    else:
        outcomes = (_run_combo(job) for job in jobs)

    best: SearchRecord | None = None
    records: list[SearchRecord] = []
    skipped: list[HyperParams] = []
    evaluated = 0
    stale = 0
    for hp, scores, failure in outcomes:
        evaluated += 1
        if failure is not None:
            log.warning("skipping %s: %s", hp, failure)
            skipped.append(hp)
            stale += 1
        else:
            train_rate, test_rate = scores
            if best is None or test_rate > best.test_rate:
                stamp = datetime.now(timezone.utc).isoformat(timespec="seconds") if timestamps else None
                best = SearchRecord(hp, train_rate, test_rate, seed, stamp)
                records.append(best)
                stale = 0
            else:
                stale += 1
        if space.patience_turns is not None and stale >= space.patience_turns:
            break
    return SearchResult(best, records, evaluated, skipped)


def format_sizes(sizes: Sequence[int]) -> str:
    return "x".join(str(s) for s in sizes)


def parse_sizes(text: str) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in text.lower().replace(" ", "").split("x"))
    if not 1 <= len(sizes) <= 2 or min(sizes) < 1:
        raise ValueError(f"bad hidden sizes {text!r}")
    return sizes


def format_record(rec: SearchRecord) -> str:
    hp = rec.hyperparams
    fields = [
        repr(hp.sigma),
        repr(hp.alpha),
        repr(hp.momentum),
        format_sizes(hp.hidden_sizes),
        repr(rec.train_rate),
        repr(rec.test_rate),
        str(rec.seed),
    ]
    if rec.timestamp:
        fields.append(rec.timestamp)
    return ",".join(fields)


def save_records(records: Sequence[SearchRecord], path, append: bool = True) -> None:
    """Write records one per line; an existing file is appended to."""
    path = Path(path)
    fresh = not append or not path.exists() or path.stat().st_size == 0
    with path.open("w" if not append else "a") as fh:
        if fresh:
            fh.write("# " + ",".join(RECORD_FIELDS) + "[,timestamp]\n")
        for rec in records:
            fh.write(format_record(rec) + "\n")


def load_records(path) -> list[SearchRecord]:
    records = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) not in (7, 8):
            raise ValueError(f"{path}:{lineno}: expected 7 or 8 fields, got {len(parts)}")
        try:
            hp = HyperParams(
                alpha=float(parts[1]),
                momentum=float(parts[2]),
                sigma=float(parts[0]),
                hidden_sizes=parse_sizes(parts[3]),
                seed=int(parts[6]),
            )
            rec = SearchRecord(hp, float(parts[4]), float(parts[5]), int(parts[6]),
                               parts[7] if len(parts) == 8 else None)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if not (0 <= rec.train_rate <= 1 and 0 <= rec.test_rate <= 1):
            raise ValueError(f"{path}:{lineno}: rates must lie in [0, 1]")
        records.append(rec)
    return records


def load_best(path, **overrides) -> HyperParams:
    """Hyperparameters of the last (best) record; ``overrides`` replace other knobs."""
    records = load_records(path)
    if not records:
        raise ValueError(f"{path}: no records")
    hp = records[-1].hyperparams
    return replace(hp, **overrides) if overrides else hp


def rebuild_best(result: SearchResult, train_set: Dataset, categories: CategoryScheme):
    """Retrain the winning configuration (deterministic, so weights match the search run)."""
    if result.best is None:
        raise ValueError("no successful combination to rebuild")
    X, T = to_training_pairs(train_set, categories)
    return train(X, T, result.best.hyperparams).network
