import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mklkit.errors import IrreparableMatrixError, MatrixValidationError, ValidationError
from mklkit.kernels import (GramMatrix, GramSet, KernelRecipe, build_cross_gram, build_gram,
                            chi2_distance, gram_from_distance, is_psd, is_symmetric,
                            min_eigenvalue, read_index_pairs, read_labels, read_matrix,
                            read_matrix_csv, read_kmx, repair_psd, trace_normalize,
                            write_index_pairs, write_kmx, write_labels, write_matrix_csv)

RECIPES = [KernelRecipe("linear"), KernelRecipe("polynomial", degree=3, offset=0.5),
           KernelRecipe("gaussian", sigma=0.7), KernelRecipe("from_distance", scale=2.0)]


def test_gaussian_two_points_hand_value():
    # |0 - sqrt 2|^2 / (2 * 1) = 1
    G = build_gram(np.array([[0.0, np.sqrt(2.0)]]), KernelRecipe("gaussian", sigma=1.0)).entries
    assert G[0, 1] == pytest.approx(0.36787944117144233, abs=1e-15)
    assert G[0, 0] == G[1, 1] == 1.0


def test_gaussian_identical_points_give_one():
    X = np.ones((3, 4))
    G = build_gram(X, KernelRecipe("gaussian", sigma=0.1)).entries
    assert np.all(G == 1.0)


def test_linear_on_orthonormal_columns_is_identity(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    assert np.allclose(build_gram(Q[:, :4]).entries, np.eye(4), atol=1e-12)


def test_linear_equals_xtx(rng):
    X = rng.standard_normal((5, 9))
    G = build_gram(X).entries
    assert np.max(np.abs(G - X.T @ X)) <= 1e-12 * np.max(np.abs(X.T @ X))


def test_polynomial_matches_formula(rng):
    X = rng.standard_normal((3, 5))
    G = build_gram(X, KernelRecipe("polynomial", degree=2, offset=1.0)).entries
    assert np.allclose(G, (X.T @ X + 1.0) ** 2)


def test_nonfinite_features_rejected():
    with pytest.raises(ValidationError):
        build_gram(np.array([[0.0, np.nan]]))


@pytest.mark.parametrize("bad", [dict(kind="rbf"), dict(kind="gaussian", sigma=0.0),
                                 dict(kind="polynomial", degree=0),
                                 dict(kind="from_distance", scale=-1.0)])
def test_recipe_validation(bad):
    with pytest.raises(ValidationError):
        KernelRecipe(**bad)


@given(seed=st.integers(0, 2**31 - 1), m=st.integers(1, 50), k=st.integers(0, len(RECIPES) - 1))
def test_every_recipe_symmetric_and_psd_after_repair(seed, m, k):
    rng = np.random.default_rng(seed)
    X = np.abs(rng.standard_normal((4, m)))
    g = repair_psd(build_gram(X, RECIPES[k]))
    assert is_symmetric(g.entries)
    assert is_psd(g.entries)


def test_cross_gram_consistent_with_gram(rng):
    X = np.abs(rng.standard_normal((3, 6)))
    for r in RECIPES[:3]:
        assert np.allclose(build_cross_gram(X, X, r), build_gram(X, r).entries)
    r = KernelRecipe("from_distance", scale=1.5)
    assert np.allclose(build_cross_gram(X, X, r), np.exp(-chi2_distance(X, X) / 1.5))
    with pytest.raises(ValidationError):
        build_cross_gram(X, X, KernelRecipe("from_distance"))


def test_chi2_distance_by_hand():
    a = np.array([[1.0], [0.0], [2.0]])
    b = np.array([[3.0], [0.0], [2.0]])
    # 0.5 * (4 / 4 + 0 + 0)
    assert chi2_distance(a, b)[0, 0] == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        chi2_distance(-a, b)


def test_distance_examples():
    G = gram_from_distance(np.zeros((3, 3)), scale=1.0)
    assert np.allclose(G.entries, 1.0)
    mu = 2.5
    G = gram_from_distance(np.array([[0.0, mu], [mu, 0.0]]), scale=mu)
    assert G.entries[0, 1] == pytest.approx(np.exp(-1.0))
    with pytest.raises(ValidationError):
        gram_from_distance(np.array([[0.0, -1.0], [-1.0, 0.0]]))
    with pytest.raises(ValidationError):
        gram_from_distance(np.array([[1.0, 1.0], [1.0, 0.0]]))


@given(seed=st.integers(0, 2**31 - 1))
def test_random_distance_gives_psd(seed):
    rng = np.random.default_rng(seed)
    D = np.abs(rng.standard_normal((3, 3)))
    D = D + D.T
    np.fill_diagonal(D, 0.0)
    G = gram_from_distance(D)
    assert np.linalg.eigvalsh(G.entries)[0] >= 0.0


def test_repair_examples(rng):
    g = repair_psd(np.eye(4))
    assert g.ridge_applied == 0.0 and np.array_equal(g.entries, np.eye(4))

    g = repair_psd(np.diag([1.0, -1e-9]), ridge=1e-8)
    assert g.ridge_applied == 1e-8
    assert np.linalg.eigvalsh(g.entries)[0] >= 0.0

    v = rng.standard_normal(5)
    g = repair_psd(np.outer(v, v))
    assert g.ridge_applied == 0.0


def test_repair_doubles_to_smallest_sufficient_ridge():
    g = repair_psd(np.diag([1.0, -5e-8]), ridge=1e-8)
    assert g.ridge_applied == 8e-8


def test_repair_is_idempotent(rng):
    A = rng.standard_normal((6, 6))
    A = A + A.T
    once = repair_psd(A, ridge=1e-3)
    twice = repair_psd(once, ridge=1e-3)
    assert twice.ridge_applied == once.ridge_applied
    assert np.array_equal(twice.entries, once.entries)


def test_repair_errors():
    with pytest.raises(IrreparableMatrixError):
        repair_psd(np.diag([1.0, -1.0]), ridge=1e-8)
    with pytest.raises(MatrixValidationError):
        repair_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_trace_normalize(rng):
    A = np.diag([2.0, 4.0])
    g = trace_normalize(GramMatrix(A))
    assert np.trace(g.entries) == pytest.approx(2.0)
    with pytest.raises(MatrixValidationError):
        trace_normalize(GramMatrix(np.zeros((2, 2))))


def test_gramset_invariants(rng):
    K = np.eye(3)
    with pytest.raises(ValidationError):
        GramSet([K, np.eye(4)], np.ones(3))
    with pytest.raises(ValidationError):
        GramSet([], np.ones(3))
    with pytest.raises(ValidationError):
        GramSet([K, K], np.ones(3), descriptor_of={0: 0})
    g = GramSet([K, 2 * K, 3 * K], [1, -1, 1], descriptor_of={0: 1, 1: 0, 2: 1})
    assert g.groups() == [[1], [0, 2]]
    s = g.select_kernels([2, 0])
    assert s.descriptor_of == {0: 1, 1: 1}
    sub = g.subset([0, 2])
    assert sub.m == 2 and np.array_equal(sub.labels, [1, 1])


@given(arrays(np.float64, (4, 4), elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_csv_round_trip_exact(A):
    import tempfile, os
    with tempfile.TemporaryDirectory() as d:
        p = os.path.join(d, "k.csv")
        write_matrix_csv(p, A)
        assert np.array_equal(read_matrix_csv(p), A)
        q = os.path.join(d, "k.kmx")
        write_kmx(q, A)
        assert np.array_equal(read_kmx(q), A)
        assert np.array_equal(read_matrix(q), A) and np.array_equal(read_matrix(p), A)


def test_csv_header_and_rectangular(tmp_path, rng):
    A = rng.standard_normal((3, 3))
    write_matrix_csv(tmp_path / "a.csv", A)
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "m=3"
    B = rng.standard_normal((3, 5))
    write_matrix_csv(tmp_path / "b.csv", B)
    assert np.array_equal(read_matrix_csv(tmp_path / "b.csv"), B)


def test_kmx_layout(tmp_path):
    A = np.arange(4.0).reshape(2, 2)
    write_kmx(tmp_path / "a.kmx", A)
    raw = (tmp_path / "a.kmx").read_bytes()
    assert raw[:4] == b"KMX1"
    assert int.from_bytes(raw[4:12], "little") == 2
    assert np.array_equal(np.frombuffer(raw[12:], "<f8"), [0.0, 1.0, 2.0, 3.0])


def test_bad_files_raise(tmp_path):
    (tmp_path / "bad.csv").write_text("m=2\n1,2\n")
    with pytest.raises(ValidationError):
        read_matrix_csv(tmp_path / "bad.csv")
    (tmp_path / "bad.kmx").write_bytes(b"KMX1" + (3).to_bytes(8, "little") + b"\0" * 8)
    with pytest.raises(ValidationError):
        read_kmx(tmp_path / "bad.kmx")


def test_labels_and_pairs_round_trip(tmp_path):
    write_labels(tmp_path / "y.txt", [1, -1, 3])
    assert read_labels(tmp_path / "y.txt").tolist() == [1, -1, 3]
    write_index_pairs(tmp_path / "g.csv", {1: 0, 0: 2})
    assert (tmp_path / "g.csv").read_text() == "0,2\n1,0\n"
    assert read_index_pairs(tmp_path / "g.csv") == {0: 2, 1: 0}


def test_min_eigenvalue_oracle(rng):
    A = rng.standard_normal((5, 5))
    A = A + A.T
    assert min_eigenvalue(A) == pytest.approx(np.linalg.eigvals(A).real.min())
