from __future__ import annotations

import numpy as np
import pytest

from ifcx.channel import ChannelSpec, CompositionPair, z_channel


def random_channel(rng: np.random.Generator, sizes=(2, 2, 2), floor: float = 0.0) -> ChannelSpec:
    a, b, y = sizes
    q1 = rng.dirichlet(np.ones(y), size=a * b) + floor
    q1 /= q1.sum(axis=1, keepdims=True)
    q2 = rng.dirichlet(np.ones(y), size=a * b)
    return ChannelSpec(a, b, y, y, q1, q2)


def random_comps(rng: np.random.Generator, a: int = 2, b: int = 2, low: float = 0.15) -> CompositionPair:
    def one(k):
        v = low + rng.uniform(size=k)
        return v / v.sum()

    return CompositionPair(one(a), one(b))


def random_joint(rng: np.random.Generator, shape=(2, 2, 2), sparse: bool = False) -> np.ndarray:
    t = rng.dirichlet(np.full(int(np.prod(shape)), 0.7)).reshape(shape)
    if sparse:
        t[rng.uniform(size=shape) < 0.25] = 0.0
        if t.sum() == 0:
            t.flat[0] = 1.0
        t /= t.sum()
    return t


@pytest.fixture(scope="session")
def zch() -> ChannelSpec:
    return z_channel(0.01)


@pytest.fixture(scope="session")
def uniform() -> CompositionPair:
    return CompositionPair.uniform(2, 2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
