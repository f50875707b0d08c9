"""Synthetic kernels with a tunable amount of redundancy.

Two Gaussian classes (identity covariance) in ``n`` dimensions. The features
are cut into ``p`` disjoint blocks; the first ``p`` kernels see blocks
``0..p-1`` and the remaining ``l - p`` each copy a block chosen uniformly with
replacement. Every kernel applies its own random map ``A_k`` of shape
``(tau * n/p, n/p)`` before taking inner products, so
``K_k = X_k' A_k' A_k X_k``. ``rho = p / l`` is the redundancy knob: ``rho = 1``
means no two kernels share features, ``p = 1`` means they all do.

Random streams come from numpy's counter-based Philox generator keyed by
``sha256("<seed>:<purpose>")``, so each purpose (means, points, provenance,
transforms) is reproducible independently of the others.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .kernels import GramSet, write_index_pairs, write_kmx, write_labels, write_matrix_csv


def substream(seed: int, purpose: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{int(seed)}:{purpose}".encode()).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SyntheticSpec:
    l: int = 10
    m: int = 150
    n: int = 20
    tau: int = 4
    p: int = 10
    seed: int = 0
    delta: float = 1.5

    def __post_init__(self):
        if self.l < 1 or self.n < 1 or self.tau < 1:
            raise ValidationError("l, n and tau must be positive")
        if not 1 <= self.p <= self.l:
            raise ValidationError(f"p must lie in [1, l], got p={self.p}, l={self.l}")
        if self.n % self.p:
            raise ValidationError(f"p={self.p} must divide n={self.n}")
        if self.m < 2 or self.m % 2:
            raise ValidationError("m must be even and >= 2")
        if not self.delta >= 0:
            raise ValidationError("delta must be nonnegative")

    @property
    def rho(self) -> float:
        return self.p / self.l

    @property
    def group_size(self) -> int:
        return self.n // self.p


@dataclass
class SyntheticInstance:
    spec: SyntheticSpec
    grams: GramSet
    test_slices: np.ndarray
    test_labels: np.ndarray
    provenance: dict
    means: np.ndarray
    train_features: np.ndarray = field(repr=False)
    test_features: np.ndarray = field(repr=False)

    @property
    def train_labels(self) -> np.ndarray:
        return self.grams.labels


def _balanced_labels(count: int) -> np.ndarray:
    return np.concatenate([np.ones(count // 2, dtype=int), -np.ones(count // 2, dtype=int)])


def generate(spec: SyntheticSpec) -> SyntheticInstance:
    """Draw ``m`` training and ``m`` test points and build all ``l`` kernels."""
    n, m, p, l = spec.n, spec.m, spec.p, spec.l
    u = substream(spec.seed, "means").standard_normal(n)
    mu = spec.delta * u / np.linalg.norm(u)

    pts = substream(spec.seed, "points")
    y_tr, y_te = _balanced_labels(m), _balanced_labels(m)
    X_tr = mu[:, None] * y_tr[None, :] + pts.standard_normal((n, m))
    X_te = mu[:, None] * y_te[None, :] + pts.standard_normal((n, m))

    copies = substream(spec.seed, "provenance").integers(0, p, size=l - p)
    provenance = {k: k for k in range(p)}
    provenance.update({p + i: int(gid) for i, gid in enumerate(copies)})

    size = spec.group_size
    tf = substream(spec.seed, "transforms")
    grams, slices = [], []
    for k in range(l):
        rows = slice(provenance[k] * size, (provenance[k] + 1) * size)
        A = tf.standard_normal((spec.tau * size, size))
        Z_tr, Z_te = A @ X_tr[rows], A @ X_te[rows]
        K = Z_tr.T @ Z_tr
        grams.append(0.5 * (K + K.T))
        slices.append(Z_tr.T @ Z_te)
    gs = GramSet(grams, y_tr, recipes=[f"synthetic(group={provenance[k]})" for k in range(l)])
    return SyntheticInstance(spec=spec, grams=gs, test_slices=np.stack(slices), test_labels=y_te,
                             provenance=provenance, means=mu, train_features=X_tr,
                             test_features=X_te)


def rho_sweep(base: SyntheticSpec, p_values) -> list[SyntheticInstance]:
    """One instance per ``p``; all share ``base.seed`` so the points coincide."""
    return [generate(replace(base, p=int(p))) for p in p_values]


def write_instance(inst: SyntheticInstance, directory, binary: bool = False) -> Path:
    """Dump an instance as kernel/label/provenance files under ``directory``.

    Training grams go to ``kernel_<k>.csv`` (or ``.kmx``), train-by-test
    slices to ``test_kernel_<k>.csv``.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for k, g in enumerate(inst.grams.kernels):
        if binary:
            write_kmx(out / f"kernel_{k}.kmx", g.entries)
        else:
            write_matrix_csv(out / f"kernel_{k}.csv", g.entries)
        write_matrix_csv(out / f"test_kernel_{k}.csv", inst.test_slices[k])
    write_labels(out / "train_labels.txt", inst.train_labels)
    write_labels(out / "test_labels.txt", inst.test_labels)
    write_index_pairs(out / "provenance.csv", inst.provenance)
    return out
