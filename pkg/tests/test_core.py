import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mdfusion import (
    ClassSpecError,
    CorpusError,
    FunctionClass,
    KernelConfig,
    MomentSet,
    TrainingCorpus,
    estimate_moments,
    feature_map,
    linear_basis,
    pseudo_inverse,
)
from mdfusion.core import as_rows


# ---- pseudo-inverse ---------------------------------------------------------


def test_pinv_identity():
    np.testing.assert_array_equal(pseudo_inverse(np.eye(2), 1e-12), np.eye(2))


def test_pinv_rank_one():
    # sigma = 2 with u = v = (1, 1)/sqrt(2): pinv = u u^T / 2
    np.testing.assert_allclose(pseudo_inverse([[1.0, 1.0], [1.0, 1.0]], 1e-12), np.full((2, 2), 0.25), atol=1e-15)


def test_pinv_zero_matrix():
    np.testing.assert_array_equal(pseudo_inverse(np.zeros((3, 2))), np.zeros((2, 3)))


def test_pinv_rejects_non_finite():
    with pytest.raises(ValueError):
        pseudo_inverse([[1.0, np.nan], [0.0, 1.0]])


def test_pinv_drops_small_singular_values():
    m = np.diag([1.0, 1e-12])
    np.testing.assert_array_equal(pseudo_inverse(m), np.diag([1.0, 0.0]))
    np.testing.assert_array_equal(pseudo_inverse(np.diag([1.0, 1e-3]), abs_tol=1e-2), np.diag([1.0, 0.0]))


@st.composite
def matrices(draw):
    rows = draw(st.integers(1, 20))
    cols = draw(st.integers(1, 20))
    rank = draw(st.integers(0, min(rows, cols)))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((rows, rows)))
    v, _ = np.linalg.qr(rng.standard_normal((cols, cols)))
    s = np.zeros(min(rows, cols))
    s[:rank] = draw(arrays(np.float64, (rank,), elements=st.floats(0.1, 10.0)))
    return (u[:, : s.size] * s) @ v[: s.size, :]


@settings(max_examples=150, deadline=None)
@given(matrices())
def test_pinv_penrose_conditions(m):
    p = pseudo_inverse(m)
    np.testing.assert_allclose(m @ p @ m, m, atol=1e-9)
    np.testing.assert_allclose(p @ m @ p, p, atol=1e-9)


def test_pinv_subnormal_matrix_is_finite():
    p = pseudo_inverse([[1e-310]])
    assert np.all(np.isfinite(p))


# ---- moments ----------------------------------------------------------------


def test_moments_single_pair():
    ms = estimate_moments([(1.0, 2.0)])
    np.testing.assert_array_equal(ms.get("A", "B"), [[2.0]])
    assert ms.count("A", "B") == 1


def test_moments_symmetric_pair():
    ms = estimate_moments([(1.0, 1.0), (-1.0, -1.0)])
    np.testing.assert_array_equal(ms.get("A", "B"), [[1.0]])


def test_moments_independent_normals_near_zero():
    rng = np.random.default_rng(11)
    a, b = rng.standard_normal(100_000), rng.standard_normal(100_000)
    g = estimate_moments(list(zip(a, b))).get("A", "B")
    assert abs(g[0, 0]) <= 0.02


def test_moments_errors():
    with pytest.raises(CorpusError, match="no samples"):
        estimate_moments([])
    with pytest.raises(CorpusError, match="sample 2"):
        estimate_moments([([1.0, 2.0], 1.0), ([0.0, 1.0], 2.0), ([1.0], 3.0)])


def test_moments_reverse_key_is_transpose():
    ms = estimate_moments([([1.0, 2.0], [3.0]), ([0.5, -1.0], [2.0])], roles=("X", "Y"))
    np.testing.assert_array_equal(ms.get("Y", "X"), ms.get("X", "Y").T)


pair_lists = st.lists(
    st.tuples(
        arrays(np.float64, (2,), elements=st.floats(-1e3, 1e3)),
        arrays(np.float64, (3,), elements=st.floats(-1e3, 1e3)),
    ),
    min_size=1,
    max_size=30,
)


@settings(max_examples=80, deadline=None)
@given(pair_lists, st.randoms(use_true_random=False))
def test_moments_permutation_invariant(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    np.testing.assert_array_equal(estimate_moments(pairs).get("A", "B"), estimate_moments(shuffled).get("A", "B"))


@settings(max_examples=80, deadline=None)
@given(pair_lists)
def test_moments_swapped_pairs_give_exact_transpose(pairs):
    g = estimate_moments(pairs).get("A", "B")
    gt = estimate_moments([(b, a) for a, b in pairs]).get("A", "B")
    np.testing.assert_array_equal(gt, g.T)


def test_moment_set_validation():
    with pytest.raises(ValueError):
        MomentSet({("X", "X"): np.array([[1.0, 2.0], [0.0, 1.0]])}, {("X", "X"): 3})
    with pytest.raises(ValueError):
        MomentSet({("X", "X"): np.array([[-1.0]])}, {("X", "X"): 3})


# ---- classes, maps, corpus ---------------------------------------------------


def test_feature_maps():
    x = np.array([[1.0, -2.0], [3.0, 0.5]])
    np.testing.assert_array_equal(feature_map("square")(x), x**2)
    np.testing.assert_array_equal(feature_map("pow:3")(x), x**3)
    np.testing.assert_array_equal(feature_map("coord:1")(x), x[:, [1]])
    np.testing.assert_array_equal(feature_map("constant")(x), np.ones_like(x))
    with pytest.raises(ClassSpecError):
        feature_map("bogus")


def test_linear_basis_spans_coordinate_maps():
    maps = linear_basis(2, 2)
    assert [m.name for m in maps] == ["lin[0,0]", "lin[0,1]", "lin[1,0]", "lin[1,1]"]
    np.testing.assert_array_equal(maps[1](np.array([[3.0, 5.0]])), [[5.0, 0.0]])


def test_function_class_rules():
    with pytest.raises(ClassSpecError):
        FunctionClass.basis([])
    with pytest.raises(ClassSpecError):
        FunctionClass("linear", (feature_map("identity"),))
    assert FunctionClass.nonparametric().kernel == KernelConfig()
    assert FunctionClass.all_functions().kind.value == "nonparametric"
    with pytest.raises(ClassSpecError):
        KernelConfig(bandwidth_constant=0.0)


def test_corpus_from_pairs_and_swap():
    c = TrainingCorpus.from_pairs([], [([1.0], 2.0)] * 5, [([0.0], [1.0])] * 10, dims=(1, 1, 1))
    assert c.cardinalities() == {"L1": 0, "L2": 5, "U": 10}
    s = c.swapped()
    assert (s.L1, s.L2) == (5, 0)
    np.testing.assert_array_equal(s.unlabeled_x1, c.unlabeled_x2)


def test_corpus_validation():
    with pytest.raises(CorpusError):
        TrainingCorpus(np.zeros((2, 1)), np.zeros((3, 1)), np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
    with pytest.raises(CorpusError):
        TrainingCorpus(np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((0, 1)))
    with pytest.raises(CorpusError):
        TrainingCorpus(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((1, 1)), np.zeros((1, 1)))


def test_corpus_arrays_are_read_only():
    c = TrainingCorpus.from_pairs([(1.0, 1.0)], [(1.0, 1.0)], [(1.0, 1.0)])
    with pytest.raises(ValueError):
        c.labeled1_x[0, 0] = 5.0


def test_as_rows_shapes():
    assert as_rows(3.0, 1)[0].shape == (1, 1)
    arr, single = as_rows([1.0, 2.0, 3.0], 1)
    assert arr.shape == (3, 1) and not single
    arr, single = as_rows([1.0, 2.0], 2)
    assert arr.shape == (1, 2) and single
    with pytest.raises(CorpusError):
        as_rows([[1.0, 2.0]], 3)
