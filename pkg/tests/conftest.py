import numpy as np
import pytest

from twrelay.channel import complex_gaussian


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape, variance=1.0):
    return complex_gaussian(rng, shape, variance)


def within_3se(samples, expected):
    samples = np.asarray(samples)
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    return abs(samples.mean() - expected) <= 3 * se
