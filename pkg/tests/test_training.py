import numpy as np
import pytest

from conftest import random_net_weights
from emonet.network import Network, propagate
from emonet.training import (
    HyperParams,
    TrainingDiverged,
    TrainingState,
    accuracy,
    backprop_step,
    error,
    error_gradient,
    train,
    weight_deltas,
)

XOR_X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
XOR_T = np.array([[1, 0], [0, 1], [0, 1], [1, 0]], dtype=float)


def test_error_examples(rng):
    assert error([1, 0, 1], [1, 0, 1]) == 0.0
    assert error([1, 0], [0.5, 0.5]) == 0.25
    t, y = rng.random(7), rng.random(7)
    naive = 0.0
    for a, b in zip(t, y):
        naive += (a - b) * (a - b)
    assert error(t, y) == pytest.approx(naive / 2, abs=1e-12)
    assert error(t, y) == error(t, 2 * t - y)
    with pytest.raises(ValueError):
        error([1, 0], [1, 0, 0])


def test_perceptron_step_by_hand():
    # y = 0.5, delta = (1 - 0.5) * 0.25 = 0.125, delta_w = 0.125 * x
    w = [np.zeros((2, 1))]
    deltas, e = weight_deltas(w, [np.zeros((2, 1))], 1.0, [1.0], [1.0], alpha=1.0, momentum=0.0)
    assert e == 0.125
    np.testing.assert_array_equal(deltas[0], [[0.125], [0.125]])


def _fd_gradient(weights, sigma, x, t, h=1e-6):
    grads = []
    for w in weights:
        g = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            old = w[idx]
            w[idx] = old + h
            up = error(t, propagate(weights, sigma, x)[-1])
            w[idx] = old - h
            down = error(t, propagate(weights, sigma, x)[-1])
            w[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


@pytest.mark.parametrize("sizes", [(3, 4, 2), (5, 3, 4, 2), (12, 6, 7), (12, 5, 4, 7)])
def test_gradient_matches_finite_differences(rng, sizes):
    for _ in range(3):
        weights = random_net_weights(rng, sizes)
        sigma = rng.uniform(0.3, 2.0)
        x = rng.uniform(-2, 2, size=sizes[0])
        t = np.eye(sizes[-1])[rng.integers(sizes[-1])]
        for a, n in zip(error_gradient(weights, sigma, x, t), _fd_gradient(weights, sigma, x, t)):
            diff = np.abs(a - n)
            rel = diff / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-300)
            assert np.all((rel < 1e-4) | (diff < 1e-7))


def test_momentum_recurrence_on_frozen_weights(rng):
    weights = random_net_weights(rng, (4, 3, 2))
    x, t = rng.normal(size=4), np.array([0.0, 1.0])
    zero = [np.zeros_like(w) for w in weights]
    first, _ = weight_deltas(weights, zero, 1.0, x, t, alpha=0.2, momentum=0.7)
    second, _ = weight_deltas(weights, first, 1.0, x, t, alpha=0.2, momentum=0.7)
    for a, b in zip(first, second):
        np.testing.assert_allclose(b, a * 1.7, rtol=1e-12)


def test_small_step_never_increases_pattern_error(rng):
    hp = HyperParams(alpha=1e-3, momentum=0.0, sigma=1.0)
    for depth in [(6,), (5, 4)]:
        for seed in range(10):
            net = Network.create(12, depth, 7, init_range=(-1, 1), seed=seed)
            x = rng.uniform(-2, 2, size=12)
            t = np.eye(7)[seed % 7]
            before = error(t, net.predict(x))
            backprop_step(TrainingState(net), x, t, hp)
            assert error(t, net.predict(x)) <= before


def test_backprop_step_updates_in_place_and_checks_shapes():
    net = Network.create(3, (2,), 2, seed=0)
    state = TrainingState(net)
    old = [w.copy() for w in net.weights]
    backprop_step(state, [0.1, 0.2, 0.3], [1.0, 0.0], HyperParams())
    assert any(not np.array_equal(a, b) for a, b in zip(old, net.weights))
    assert [d.shape for d in state.previous_deltas] == [w.shape for w in net.weights]
    with pytest.raises(ValueError):
        backprop_step(state, [0.1, 0.2], [1.0, 0.0], HyperParams())
    with pytest.raises(ValueError):
        backprop_step(state, [0.1, 0.2, 0.3], [1.0, 0.0, 0.0], HyperParams())


def test_weight_clip_bounds_weights():
    net = Network.create(2, (3,), 2, seed=0)
    state = TrainingState(net)
    hp = HyperParams(alpha=5.0, momentum=0.0, weight_clip=0.6)
    for _ in range(50):
        for x, t in zip(XOR_X, XOR_T):
            backprop_step(state, x, t, hp)
    assert all(np.abs(w).max() <= 0.6 for w in net.weights)


def test_hyperparam_validation():
    for bad in [dict(alpha=0), dict(momentum=1.0), dict(momentum=-0.1), dict(sigma=0),
                dict(hidden_sizes=()), dict(hidden_sizes=(3, 3, 3)), dict(patience=0)]:
        with pytest.raises(ValueError):
            HyperParams(**bad)


def test_xor_learns_for_most_seeds():
    solved = 0
    for seed in range(10):
        hp = HyperParams(alpha=0.5, momentum=0.5, sigma=1.0, hidden_sizes=(4,),
                         max_epochs=10000, patience=10000, seed=seed)
        result = train(XOR_X, XOR_T, hp)
        solved += accuracy(result.network, XOR_X, XOR_T) == 1.0
    assert solved >= 8


def test_single_pattern_overfits():
    X = np.array([[0.3, -1.2, 0.8]])
    T = np.array([[0.0, 1.0, 0.0]])
    result = train(X, T, HyperParams(hidden_sizes=(3,), seed=5))
    assert result.accuracy_trace[-1] == 1.0
    assert accuracy(result.network, X, T) == 1.0


def test_training_is_deterministic(small_pairs):
    X, T = small_pairs
    hp = HyperParams(alpha=0.2, momentum=0.4, sigma=1.0, hidden_sizes=(6,), max_epochs=5, seed=9)
    a, b = train(X, T, hp), train(X, T, hp)
    assert a.accuracy_trace == b.accuracy_trace
    assert all(np.array_equal(p, q) for p, q in zip(a.network.weights, b.network.weights))


def test_best_epoch_snapshot(small_pairs):
    X, T = small_pairs
    hp = HyperParams(alpha=2.0, momentum=0.9, sigma=3.0, hidden_sizes=(5,), max_epochs=30, patience=30)
    result = train(X, T, hp)
    assert accuracy(result.network, X, T) == max(result.accuracy_trace)
    assert result.accuracy_trace[result.best_epoch - 1] == max(result.accuracy_trace)
    assert result.pattern_updates == result.epochs * len(X)


def test_patience_stops_training():
    X = np.array([[0.0], [0.0]])
    T = np.array([[1.0, 0.0], [0.0, 1.0]])  # contradictory: accuracy is stuck at 0.5
    result = train(X, T, HyperParams(hidden_sizes=(2,), max_epochs=500, patience=7))
    assert result.epochs == 8
    assert result.best_epoch == 1


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        train(np.zeros((0, 3)), np.zeros((0, 2)), HyperParams())


@pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
def test_divergence_names_epoch():
    # sigmoid outputs are bounded, so only non-finite weights can blow up the error
    net = Network.create(2, (3,), 2, seed=0)
    net.weights[0][0, 0] = np.inf
    with pytest.raises(TrainingDiverged) as info:
        train(XOR_X, XOR_T, HyperParams(hidden_sizes=(3,), max_epochs=3), net=net)
    assert info.value.epoch == 1
    assert "epoch 1" in str(info.value)


def test_trace_lines_format(small_pairs):
    X, T = small_pairs
    result = train(X, T, HyperParams(hidden_sizes=(4,), max_epochs=3, patience=3))
    lines = result.trace_lines()
    assert len(lines) == result.epochs
    epoch, acc = lines[0].split(",")
    assert epoch == "1" and float(acc) == result.accuracy_trace[0]
