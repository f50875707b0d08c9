import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mklkit.datagen import SyntheticSpec, generate
from mklkit.kernels import GramSet

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_psd(rng, m, rank=None):
    B = rng.standard_normal((m, rank or m))
    return B @ B.T


def random_labels(rng, m):
    y = np.where(rng.random(m) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return y


def two_kernel_instance(seed=0, m=40, noise=False):
    """Kernel 0 separates the classes; kernel 1 is informative too, or pure noise."""
    rng = np.random.default_rng(seed)
    y = np.repeat([1.0, -1.0], m // 2)
    X0 = rng.standard_normal((3, m)) + 1.2 * y[None, :]
    X1 = rng.standard_normal((3, m)) + (0.0 if noise else 0.6) * y[None, :]
    return GramSet([X0.T @ X0, X1.T @ X1], y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_instance():
    return generate(SyntheticSpec(l=4, m=40, n=4, tau=2, p=4, seed=3))


def normalized(inst):
    """Training grams scaled to unit mean diagonal and test slices scaled alike."""
    g = inst.grams
    f = np.array([g.m / np.trace(k.entries) for k in g.kernels])
    scaled = GramSet([k.entries * fk for k, fk in zip(g.kernels, f)], g.labels,
                     descriptor_of=dict(inst.provenance))
    return scaled, inst.test_slices * f[:, None, None]


def informative_noise_split(seed=0, m=60, shift=1.0):
    """Linear kernel 0 sees class-shifted features, kernel 1 pure noise; with test slices."""
    rng = np.random.default_rng(seed)
    y = np.repeat([1, -1], m // 2)
    feats = []
    for s in (shift, 0.0):
        feats.append(rng.standard_normal((3, 2 * m)) + s * np.r_[y, y][None, :])
    grams = [X[:, :m].T @ X[:, :m] for X in feats]
    slices = np.stack([X[:, :m].T @ X[:, m:] for X in feats])
    return GramSet(grams, y), slices, y.copy()
