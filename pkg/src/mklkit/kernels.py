"""Gram matrix construction, validation, PSD repair and file formats.

Datapoints are stored as *columns* of a feature matrix, so a feature matrix
of shape ``(n, m)`` holds ``m`` points in ``n`` dimensions and the linear
kernel is ``X.T @ X``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import IrreparableMatrixError, MatrixValidationError, ValidationError

SYMMETRY_RTOL = 1e-12
DEFAULT_RIDGE = 1e-8
MAX_DOUBLINGS = 20
KMX_MAGIC = b"KMX1"

KERNEL_KINDS = ("linear", "polynomial", "gaussian", "from_distance")


@dataclass(frozen=True)
class KernelRecipe:
    """How to turn raw features into a gram matrix.

    ``gaussian`` uses ``exp(-||x - x'||^2 / (2 sigma^2))``; ``from_distance``
    uses ``exp(-d / scale)`` on chi-squared distances between columns (or on a
    user-supplied distance matrix, see :func:`gram_from_distance`).
    """

    kind: str = "linear"
    degree: int = 2
    offset: float = 1.0
    sigma: float = 1.0
    scale: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValidationError("polynomial degree must be an integer >= 1")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ValidationError("gaussian width sigma must be > 0")
        if self.scale is not None and not self.scale > 0:
            raise ValidationError("distance scale must be > 0")

    def describe(self) -> str:
        if self.kind == "linear":
            return "linear"
        if self.kind == "polynomial":
            return f"polynomial(degree={self.degree},offset={self.offset!r})"
        if self.kind == "gaussian":
            return f"gaussian(sigma={self.sigma!r})"
        return f"from_distance(scale={self.scale!r})"


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    ridge_applied: float = 0.0

    @property
    def m(self) -> int:
        return self.entries.shape[0]


@dataclass
class GramSet:
    """Stack of ``l`` training gram matrices sharing ``m`` points and labels.

    ``descriptor_of`` optionally maps kernel index to descriptor index, the
    grouping used by composite kernel learning.
    """

    kernels: list
    labels: np.ndarray
    descriptor_of: Mapping[int, int] | None = None
    recipes: list = field(default_factory=list)

    def __post_init__(self):
        self.kernels = [k if isinstance(k, GramMatrix) else GramMatrix(np.asarray(k, dtype=float))
                        for k in self.kernels]
        self.labels = np.asarray(self.labels)
        if len(self.kernels) < 1:
            raise ValidationError("a GramSet needs at least one kernel")
        m = self.labels.shape[0]
        for k, g in enumerate(self.kernels):
            if g.entries.shape != (m, m):
                raise ValidationError(
                    f"kernel {k} has shape {g.entries.shape}, expected ({m}, {m})")
        if self.descriptor_of is not None:
            self.descriptor_of = {int(k): int(j) for k, j in dict(self.descriptor_of).items()}
            if set(self.descriptor_of) != set(range(len(self.kernels))):
                raise ValidationError("descriptor grouping must cover every kernel exactly once")

    @property
    def l(self) -> int:
        return len(self.kernels)

    @property
    def m(self) -> int:
        return self.labels.shape[0]

    @property
    def matrices(self) -> np.ndarray:
        """All gram matrices stacked into shape ``(l, m, m)``."""
        return np.stack([g.entries for g in self.kernels])

    def groups(self) -> list[list[int]]:
        """Kernel indices per descriptor, descriptors ordered by id.

        Without a grouping every kernel is its own descriptor.
        """
        if self.descriptor_of is None:
            return [[k] for k in range(self.l)]
        ids = sorted(set(self.descriptor_of.values()))
        return [[k for k in range(self.l) if self.descriptor_of[k] == j] for j in ids]

    def subset(self, idx) -> "GramSet":
        """Restrict to the training points ``idx`` (rows and columns)."""
        idx = np.asarray(idx)
        return GramSet([GramMatrix(g.entries[np.ix_(idx, idx)], g.ridge_applied) for g in self.kernels],
                       self.labels[idx], self.descriptor_of, list(self.recipes))

    def select_kernels(self, ks: Sequence[int]) -> "GramSet":
        ks = list(ks)
        grouping = None
        if self.descriptor_of is not None:
            grouping = {new: self.descriptor_of[old] for new, old in enumerate(ks)}
        recipes = [self.recipes[k] for k in ks] if self.recipes else []
        return GramSet([self.kernels[k] for k in ks], self.labels, grouping, recipes)


def binary_labels(labels) -> np.ndarray:
    """Return labels as a float +-1 vector, raising if any entry is not +-1."""
    y = np.asarray(labels, dtype=float).ravel()
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValidationError("binary labels must be +1 or -1")
    return y


def _check_features(features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValidationError("features must be an (n, m) matrix with m >= 1")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features contain non-finite values")
    return X


def chi2_distance(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise chi-squared distance between columns of ``A`` and ``B``.

    ``d(a, b) = 1/2 sum_i (a_i - b_i)^2 / (a_i + b_i)``, terms with a zero
    denominator dropped. Inputs must be nonnegative (histograms).
    """
    if np.any(A < 0) or np.any(B < 0):
        raise ValidationError("chi-squared distance needs nonnegative features")
    a = A.T[:, None, :]
    b = B.T[None, :, :]
    num = (a - b) ** 2
    den = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(den > 0, num / den, 0.0)
    return 0.5 * terms.sum(axis=2)


def _kernel_block(A: np.ndarray, B: np.ndarray, recipe: KernelRecipe, scale=None) -> np.ndarray:
    if recipe.kind == "linear":
        return A.T @ B
    if recipe.kind == "polynomial":
        return (A.T @ B + recipe.offset) ** int(recipe.degree)
    if recipe.kind == "gaussian":
        sq = (A * A).sum(0)[:, None] + (B * B).sum(0)[None, :] - 2.0 * (A.T @ B)
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-sq / (2.0 * recipe.sigma ** 2))
    return np.exp(-chi2_distance(A, B) / scale)


def build_gram(features, recipe: KernelRecipe = KernelRecipe()) -> GramMatrix:
    """Gram matrix of the columns of ``features`` under ``recipe``.

    The result is symmetric by construction; it is *not* ridge repaired
    except for the ``from_distance`` kind, which goes through
    :func:`gram_from_distance`.
    """
    X = _check_features(features)
    if recipe.kind == "from_distance":
        return gram_from_distance(chi2_distance(X, X), recipe.scale)
    G = _kernel_block(X, X, recipe)
    G = 0.5 * (G + G.T)
    return GramMatrix(G)


def build_cross_gram(train_features, test_features, recipe: KernelRecipe = KernelRecipe(),
                     scale: float | None = None) -> np.ndarray:
    """Kernel slice of shape ``(m_train, m_test)`` for prediction.

    For ``from_distance`` the training scale must be supplied (either on the
    recipe or as ``scale``) so that train and test use the same bandwidth.
    """
    A = _check_features(train_features)
    B = _check_features(test_features)
    if A.shape[0] != B.shape[0]:
        raise ValidationError("train and test features differ in dimension")
    if recipe.kind == "from_distance":
        scale = recipe.scale if recipe.scale is not None else scale
        if scale is None:
            raise ValidationError("from_distance cross kernels need the training scale")
        return _kernel_block(A, B, recipe, scale)
    return _kernel_block(A, B, recipe)


def default_distance_scale(dist: np.ndarray) -> float:
    """Mean off-diagonal distance, the default bandwidth for ``exp(-d/scale)``."""
    m = dist.shape[0]
    if m < 2:
        return 1.0
    mean = (dist.sum() - np.trace(dist)) / (m * (m - 1))
    return float(mean) if mean > 0 else 1.0


def gram_from_distance(dist, scale: float | None = None, ridge: float = DEFAULT_RIDGE) -> GramMatrix:
    """Turn a precomputed distance matrix into a repaired gram ``exp(-d/scale)``."""
    D = np.asarray(dist, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValidationError("distance matrix must be square")
    if not np.all(np.isfinite(D)):
        raise ValidationError("distance matrix contains non-finite values")
    if np.any(D < 0):
        raise ValidationError("distances must be nonnegative")
    if not is_symmetric(D):
        raise ValidationError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0):
        raise ValidationError("distance matrix must have a zero diagonal")
    if scale is None:
        scale = default_distance_scale(D)
    elif not scale > 0:
        raise ValidationError("distance scale must be > 0")
    G = np.exp(-D / scale)
    return repair_psd(GramMatrix(0.5 * (G + G.T)), ridge)


def kernel_from_distance(dist, scale: float) -> np.ndarray:
    """Unrepaired ``exp(-d/scale)`` for rectangular train-by-test distances."""
    D = np.asarray(dist, dtype=float)
    if np.any(D < 0) or not np.all(np.isfinite(D)):
        raise ValidationError("distances must be finite and nonnegative")
    return np.exp(-D / scale)


def is_symmetric(A: np.ndarray, rtol: float = SYMMETRY_RTOL) -> bool:
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    return bool(np.max(np.abs(A - A.T), initial=0.0) <= rtol * scale)


def psd_tolerance(A: np.ndarray) -> float:
    """Eigenvalue slack attributable to rounding in ``eigvalsh``."""
    norm = float(np.max(np.abs(A))) * A.shape[0] if A.size else 0.0
    return 10.0 * A.shape[0] * np.finfo(float).eps * max(norm, 1.0)


def min_eigenvalue(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(A)[0])


def is_psd(A: np.ndarray) -> bool:
    return min_eigenvalue(A) >= -psd_tolerance(A)


def repair_psd(g: GramMatrix | np.ndarray, ridge: float = DEFAULT_RIDGE) -> GramMatrix:
    """Add the smallest ridge from ``{0, e, 2e, 4e, ...}`` that makes ``g`` PSD.

    ``ridge_applied`` on the result accumulates any ridge already present, so
    repairing twice reports the same total.
    """
    if not isinstance(g, GramMatrix):
        g = GramMatrix(np.asarray(g, dtype=float))
    A = g.entries
    if not np.all(np.isfinite(A)):
        raise MatrixValidationError("gram matrix contains non-finite values")
    if not is_symmetric(A):
        raise MatrixValidationError("gram matrix is not symmetric")
    if not ridge > 0:
        raise ValidationError("ridge must be > 0")
    lam = min_eigenvalue(A)
    tol = psd_tolerance(A)
    if lam >= -tol:
        return g
    delta = ridge
    for _ in range(MAX_DOUBLINGS + 1):
        if lam + delta >= 0:
            return GramMatrix(A + delta * np.eye(A.shape[0]), g.ridge_applied + delta)
        delta *= 2
    raise IrreparableMatrixError(
        f"minimum eigenvalue {lam:.3e} needs more than 2^{MAX_DOUBLINGS} * {ridge:g} ridge")


def trace_normalize(g: GramMatrix) -> GramMatrix:
    """Scale ``g`` so its mean diagonal entry is 1 (opt-in)."""
    tr = float(np.trace(g.entries))
    if not tr > 0:
        raise MatrixValidationError("cannot trace-normalize a matrix with nonpositive trace")
    return GramMatrix(g.entries * (g.m / tr), g.ridge_applied * (g.m / tr))


# ---------------------------------------------------------------------------
# file formats


def write_matrix_csv(path, A) -> None:
    """Write ``m=<rows>`` (or ``m=<rows>,n=<cols>`` if not square) then rows."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    r, c = A.shape
    header = f"m={r}" if r == c else f"m={r},n={c}"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in A:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        fields = dict(part.split("=", 1) for part in header.split(","))
        try:
            r = int(fields["m"])
            c = int(fields.get("n", r))
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"{path}: bad matrix header {header!r}") from exc
        rows = [line for line in fh if line.strip()]
    if len(rows) != r:
        raise ValidationError(f"{path}: header says {r} rows, found {len(rows)}")
    A = np.array([[float(v) for v in line.split(",")] for line in rows], dtype=float)
    if A.shape != (r, c):
        raise ValidationError(f"{path}: expected shape ({r}, {c}), got {A.shape}")
    return A


def write_kmx(path, A) -> None:
    A = np.asarray(A, dtype="<f8")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("binary gram cache holds square matrices only")
    with open(path, "wb") as fh:
        fh.write(KMX_MAGIC)
        fh.write(struct.pack("<Q", A.shape[0]))
        fh.write(np.ascontiguousarray(A).tobytes(order="C"))


def read_kmx(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != KMX_MAGIC:
        raise ValidationError(f"{path}: not a KMX1 gram cache")
    (m,) = struct.unpack("<Q", data[4:12])
    body = data[12:]
    if len(body) != 8 * m * m:
        raise ValidationError(f"{path}: truncated gram cache")
    return np.frombuffer(body, dtype="<f8").reshape(m, m).astype(float)


def read_matrix(path) -> np.ndarray:
    """Read either format, dispatching on the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    return read_kmx(path) if head == KMX_MAGIC else read_matrix_csv(path)


def write_labels(path, labels) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(labels).ravel():
            fh.write(f"{int(v)}\n")


def read_labels(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([int(line) for line in fh if line.strip()], dtype=int)


def write_index_pairs(path, mapping: Mapping[int, int]) -> None:
    """CSV lines ``kernel_index,other_index`` (grouping and provenance files)."""
    with open(path, "w") as fh:
        for k in sorted(mapping):
            fh.write(f"{k},{mapping[k]}\n")


def read_index_pairs(path) -> dict[int, int]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            k, j = line.split(",")
            out[int(k)] = int(j)
    return out
