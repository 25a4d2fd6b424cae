import numpy as np
import pytest

from emonet.dataset import CategoryScheme, split, to_training_pairs
from emonet.network import Network
from emonet.synth import SynthConfig, default_templates, generate


def random_net_weights(rng, sizes, scale=1.0):
    return [rng.uniform(-scale, scale, size=(a + 1, b)) for a, b in zip(sizes[:-1], sizes[1:])]


def oracle_network(scheme: CategoryScheme) -> Network:
    """Hand-wired net whose output k wins exactly when the first feature equals k.

    Hidden unit j switches on for x0 > j - 0.5; output j reads the step
    between hidden units j and j + 1.
    """
    k = len(scheme)
    W1 = np.zeros((13, k))
    W1[0, :] = 1.0
    W1[12, :] = 0.5 - np.arange(k)
    W2 = np.zeros((k + 1, k))
    for j in range(k):
        W2[j, j] = 1.0
        if j + 1 < k:
            W2[j + 1, j] = -1.0
    W2[k, :] = -0.5
    return Network(12, (k,), k, [W1, W2], sigma=20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic():
    return generate(default_templates(), SynthConfig(noise_std=0.1, sequences_per_emotion=6, seed=3))


@pytest.fixture(scope="session")
def synthetic_split(synthetic):
    return split(synthetic, 0.7, "sequence", seed=0)


@pytest.fixture(scope="session")
def seven():
    return CategoryScheme.seven()


@pytest.fixture(scope="session")
def small_pairs(synthetic, seven):
    """A short, mixed-order slice of the synthetic data as (X, T)."""
    X, T = to_training_pairs(synthetic, seven)
    idx = np.random.default_rng(0).permutation(len(X))[:140]
    return X[idx], T[idx]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
