"""Derivative-free minimizers (Powell direction set, downhill simplex) and a
Powell-based network trainer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .network import Network, layer_shapes, propagate
from .training import HyperParams, accuracy

GOLDEN = (1 + math.sqrt(5)) / 2
_GOLD_FRACTION = 2 - GOLDEN  # 0.381966...


class Minimum(NamedTuple):
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int


@dataclass
class CountingObjective:
    """Wraps an objective and counts its evaluations."""

    fn: Callable[[np.ndarray], float]
    evaluations: int = 0
    best: float = math.inf
    trace: list[tuple[int, float]] = field(default_factory=list)

    def __call__(self, x) -> float:
        self.evaluations += 1
        v = float(self.fn(np.asarray(x, dtype=float)))
        if v < self.best:
            self.best = v
            self.trace.append((self.evaluations, v))
        return v


def _bracket(g, fa, step, max_expansions):
    """Golden-ratio expansion from t=0 until the minimum along ``g`` is bracketed."""
    a, b = 0.0, step
    fb = g(b)
    if fb > fa:
        a, b, fa, fb = b, a, fb, fa
    c = b + GOLDEN * (b - a)
    fc = g(c)
    for _ in range(max_expansions):
        if fc >= fb:
            return (a, c) if a < c else (c, a)
        a, b, fa, fb = b, c, fb, fc
        c = b + GOLDEN * (b - a)
        fc = g(c)
    return None


def _golden(g, lo, hi, tol):
    x1 = lo + _GOLD_FRACTION * (hi - lo)
    x2 = hi - _GOLD_FRACTION * (hi - lo)
    f1, f2 = g(x1), g(x2)
    while hi - lo > tol * (1.0 + abs(x1) + abs(x2)):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = lo + _GOLD_FRACTION * (hi - lo)
            f1 = g(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = hi - _GOLD_FRACTION * (hi - lo)
            f2 = g(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def line_minimize(
    f: Callable[[np.ndarray], float],
    point,
    direction,
    tol: float = 1e-8,
    f0: float | None = None,
    max_expansions: int = 100,
) -> tuple[float, float]:
    """Minimize ``f(point + t * direction)`` over the scalar ``t``.

    Brackets by golden-ratio expansion from ``t = 0`` then refines by golden
    section. Returns ``(0, f(point))`` when no lower value is found or the
    minimum cannot be bracketed.
    """
    point = np.asarray(point, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if not np.any(direction):
        raise ValueError("direction must be nonzero")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if f0 is None:
        f0 = f(point)

    def g(t):
        return f(point + t * direction)

    bracket = _bracket(g, f0, 1.0, max_expansions)
    if bracket is None:
        return 0.0, f0
    t, ft = _golden(g, bracket[0], bracket[1], tol)
    if not ft < f0:
        return 0.0, f0
    return t, ft


def _fractional_change(old: float, new: float, tiny: float = 1e-25) -> float:
    return 2.0 * abs(old - new) / (abs(old) + abs(new) + tiny)


def powell_minimize(
    f: Callable[[np.ndarray], float],
    start,
    init_directions=None,
    ftol: float = 1e-8,
    max_iters: int = 200,
    line_tol: float = 1e-8,
    callback: Callable[[np.ndarray, float], bool] | None = None,
) -> Minimum:
    """Powell's direction-set method, basic cycle.

    Each cycle line-minimizes along every direction in turn, drops the first
    direction, appends the net displacement of the cycle and minimizes along
    it. Stops when a cycle lowers ``f`` by a fractional amount below ``ftol``,
    after ``max_iters`` cycles, or when ``callback(point, value)`` (invoked
    after every line minimization) returns True.
    """
    counter = f if isinstance(f, CountingObjective) else CountingObjective(f)
    p = np.array(start, dtype=float).ravel()
    n = p.size
    if n < 1:
        raise ValueError("dimension must be at least 1")
    if ftol <= 0:
        raise ValueError("ftol must be positive")
    if init_directions is None:
        dirs = np.eye(n)
    else:
        dirs = np.array(init_directions, dtype=float)
        if dirs.shape != (n, n):
            raise ValueError(f"need {n} directions of dimension {n}")
        if not np.all(np.any(dirs, axis=1)):
            raise ValueError("zero vector in the initial direction set")
    evals_before = counter.evaluations
    fp = counter(p)
    if not math.isfinite(fp):
        raise ValueError("objective is not finite at the start point")

    def line(point, fval, d):
        t, fnew = line_minimize(counter, point, d, tol=line_tol, f0=fval)
        new = point + t * d if t else point
        stop = callback is not None and callback(new, fnew)
        return new, fnew, stop

    it = 0
    while it < max_iters:
        it += 1
        p0, f0 = p.copy(), fp
        for i in range(n):
            p, fp, stop = line(p, fp, dirs[i])
            if stop:
                return Minimum(p, fp, it, counter.evaluations - evals_before)
        new_dir = p - p0
        if np.any(new_dir):
            dirs = np.vstack([dirs[1:], new_dir])
            p, fp, stop = line(p, fp, new_dir)
            if stop:
                return Minimum(p, fp, it, counter.evaluations - evals_before)
        if _fractional_change(f0, fp) <= ftol:
            break
    return Minimum(p, fp, it, counter.evaluations - evals_before)


def simplex_minimize(
    f: Callable[[np.ndarray], float],
    start,
    edge: float = 1.0,
    ftol: float = 1e-10,
    max_iters: int = 20000,
    callback: Callable[[np.ndarray, np.ndarray], None] | None = None,
) -> Minimum:
    """Nelder-Mead downhill simplex in any dimension.

    The initial simplex is ``start`` plus ``start + edge * e_i``. Uses the
    standard reflection (1), expansion (2), contraction (0.5) and shrink (0.5)
    coefficients. Terminates when the fractional spread of function values
    over the simplex drops below ``ftol``.
    """
    counter = f if isinstance(f, CountingObjective) else CountingObjective(f)
    x0 = np.array(start, dtype=float).ravel()
    n = x0.size
    if n < 1:
        raise ValueError("dimension must be at least 1")
    if not edge > 0:
        raise ValueError("edge must be positive")
    evals_before = counter.evaluations
    pts = np.vstack([x0, x0 + edge * np.eye(n)])
    vals = np.array([counter(p) for p in pts])
    if not np.all(np.isfinite(vals)):
        raise ValueError("objective is not finite on the initial simplex")

    it = 0
    while it < max_iters:
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        if callback is not None:
            callback(pts.copy(), vals.copy())
        if _fractional_change(vals[-1], vals[0], tiny=1e-10) < ftol:
            break
        it += 1
        centroid = pts[:-1].mean(axis=0)
        worst = pts[-1]
        xr = centroid + (centroid - worst)
        fr = counter(xr)
        if fr < vals[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = counter(xe)
            if fe < fr:
                pts[-1], vals[-1] = xe, fe
            else:
                pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            # outside contraction
            xc = centroid + 0.5 * (xr - centroid)
            fc = counter(xc)
            if fc <= fr:
                pts[-1], vals[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = counter(xc)
            if fc < vals[-1]:
                pts[-1], vals[-1] = xc, fc
                continue
        pts[1:] = pts[0] + 0.5 * (pts[1:] - pts[0])
        vals[1:] = [counter(p) for p in pts[1:]]
    best = int(np.argmin(vals))
    return Minimum(pts[best].copy(), float(vals[best]), it, counter.evaluations - evals_before)


def flatten_weights(net_or_weights) -> np.ndarray:
    """Concatenate weight matrices layer by layer, row-major, bias row last."""
    weights = net_or_weights.weights if isinstance(net_or_weights, Network) else net_or_weights
    return np.concatenate([np.asarray(w, dtype=float).ravel() for w in weights])


def unflatten_weights(vector, shapes: Sequence[tuple[int, int]]) -> list[np.ndarray]:
    vector = np.asarray(vector, dtype=float)
    total = sum(r * c for r, c in shapes)
    if vector.shape != (total,):
        raise ValueError(f"vector has {vector.size} entries, shapes need {total}")
    out, pos = [], 0
    for r, c in shapes:
        out.append(vector[pos:pos + r * c].reshape(r, c).copy())
        pos += r * c
    return out


def total_error_objective(X, T, shapes, sigma: float) -> Callable[[np.ndarray], float]:
    """Summed half-squared error over a whole dataset as a function of flat weights."""
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)

    def objective(v):
        y = propagate(unflatten_weights(v, shapes), sigma, X)[-1]
        return 0.5 * float(np.sum((T - y) ** 2))

    return objective


def random_directions(n: int, rng, scale: float = 0.01) -> np.ndarray:
    rng = np.random.default_rng(rng)
    dirs = rng.uniform(-scale, scale, size=(n, n))
    for i in range(n):
        while not np.any(dirs[i]):
            dirs[i] = rng.uniform(-scale, scale, size=n)
    return dirs


@dataclass
class PowellTrainResult:
    network: Network
    start_value: float
    final_value: float
    evaluations: int
    iterations: int
    trace: list[tuple[int, float]]
    accuracy: float
    reached_target: bool

    def trace_lines(self) -> list[str]:
        return [f"{n},{v!r}" for n, v in self.trace]


def powell_train(
    X,
    T,
    hp: HyperParams,
    start: Network | None = None,
    random_init_directions: bool = False,
    ftol: float = 1e-8,
    max_iters: int = 200,
    target_accuracy: float | None = None,
) -> PowellTrainResult:
    """Train by minimizing the total dataset error over all weights with Powell's method.

    ``start`` warm-starts from existing weights (e.g. a back-propagation result).
    With ``target_accuracy`` set, stops as soon as the training accuracy reaches it.
    """
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("training needs a non-empty 2-D pattern array")
    net = start.copy() if start is not None else hp.make_network(X.shape[1], T.shape[1])
    shapes = layer_shapes(net.input_size, net.hidden_sizes, net.output_size)
    counter = CountingObjective(total_error_objective(X, T, shapes, net.sigma))
    x0 = flatten_weights(net)
    dirs = random_directions(x0.size, hp.seed) if random_init_directions else None

    reached = False

    def check(point, value):
        nonlocal reached
        if target_accuracy is None:
            return False
        probe = Network(net.input_size, net.hidden_sizes, net.output_size,
                        unflatten_weights(point, shapes), net.sigma)
        reached = accuracy(probe, X, T) >= target_accuracy
        return reached

    start_value = counter(x0)
    if check(x0, start_value):
        res = Minimum(x0, start_value, 0, 0)
    else:
        res = powell_minimize(counter, x0, dirs, ftol=ftol, max_iters=max_iters, callback=check)
    trained = Network(net.input_size, net.hidden_sizes, net.output_size,
                      unflatten_weights(res.x, shapes), net.sigma, dict(net.meta))
    return PowellTrainResult(
        network=trained,
        start_value=start_value,
        final_value=res.fun,
        evaluations=counter.evaluations,
        iterations=res.iterations,
        trace=list(counter.trace),
        accuracy=accuracy(trained, X, T),
        reached_target=reached,
    )
