import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import cw_matrix, sine_matrix
from orthospin import interactions as ia
from orthospin.errors import DimensionError, InvalidSizeError


def test_curie_weiss_entries():
    J = ia.build_curie_weiss(4)
    np.testing.assert_array_equal(J.entries, cw_matrix(4))
    assert J.kind is ia.Kind.CURIE_WEISS
    assert not J.keeps_diagonal


def test_curie_weiss_n_minus_one_normalization():
    J = ia.build_curie_weiss(5, normalization="n-1")
    assert J.entries[0, 1] == 0.25
    with pytest.raises(ValueError):
        ia.build_curie_weiss(5, normalization="bogus")


@pytest.mark.parametrize("n", [0, 1, -3])
def test_too_small_rejected(n):
    with pytest.raises(InvalidSizeError):
        ia.build_curie_weiss(n)
    with pytest.raises(InvalidSizeError):
        ia.build_sine(n)


def test_sine_matches_loop_formula():
    for n in (2, 5, 10, 17):
        np.testing.assert_allclose(ia.build_sine(n).entries, sine_matrix(n), atol=1e-14)


@pytest.mark.parametrize("n", range(2, 41))
def test_sine_orthogonal_and_traces(n):
    J = ia.build_sine(n)
    assert ia.orthogonality_defect(J) <= 1e-10
    tr, tr2 = ia.trace_identities(J)
    assert abs(tr - n % 2) <= 1e-12
    if n % 2:
        assert abs(tr2 - 1.0) <= 1e-12
    else:
        # the diagonal Gauss sum for even n: 1 - (2|m) / sqrt(m), m = 2n + 1,
        # with (2|m) the Jacobi symbol
        m = 2 * n + 1
        jacobi = 1 if m % 8 in (1, 7) else -1
        assert abs(tr2 - (1.0 - jacobi / math.sqrt(m))) <= 1e-12


def test_sine_trace_of_squares_is_one_for_all_n():
    # stated for every n; holds only for odd n (see the closed form above)
    bad = [n for n in range(2, 41) if abs(ia.trace_identities(ia.build_sine(n))[1] - 1.0) > 1e-12]
    assert bad == []


def test_stated_values():
    J = ia.build_curie_weiss(4).entries
    assert J[0, 1] == 0.25 and J[0, 0] == 0
    assert ia.build_curie_weiss(2).entries[0, 1] == 0.5
    assert math.isclose(ia.build_curie_weiss(10).entries[0].sum(), 0.9, rel_tol=1e-15)
    assert abs(ia.build_sine(3).entries[0, 0] - 2 / math.sqrt(7) * math.sin(2 * math.pi / 7)) <= 1e-15
    assert abs(ia.build_sine(3).entries[0, 0] - 0.59101) < 1e-5
    assert abs(ia.trace_identities(ia.build_sine(5))[0] - 1) <= 1e-12
    tr, tr2 = ia.trace_identities(ia.build_sine(7))
    assert abs(tr - 1) <= 1e-12 and abs(tr2 - 1) <= 1e-12
    assert abs(ia.trace_identities(ia.build_sine(8))[0]) <= 1e-12
    assert ia.trace_identities(ia.build_curie_weiss(5)) == (0.0, 0.0)
    assert ia.orthogonality_defect(ia.build_sine(21)) <= 1e-10
    assert ia.orthogonality_defect(ia.custom(np.eye(4))) == 0.0
    cw4 = ia.build_curie_weiss(4)
    assert math.isclose(ia.orthogonality_defect(cw4), 1 - 3 / 16)


def test_random_orthogonal_all_plus_is_identity():
    J = ia.build_random_orthogonal(6, [1] * 6, 99)
    assert np.max(np.abs(J.entries - np.eye(6))) <= 1e-12
    a = ia.build_random_orthogonal(4, [1, -1, -1, 1], 2 ** 63 - 5).entries
    b = ia.build_random_orthogonal(4, [1, -1, -1, 1], 2 ** 63 - 5).entries
    assert a.tobytes() == b.tobytes()


def test_sine_is_exactly_symmetric():
    a = ia.build_sine(23).entries
    assert np.array_equal(a, a.T)


def test_matrices_are_read_only():
    J = ia.build_sine(5)
    with pytest.raises(ValueError):
        J.entries[0, 0] = 1.0


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 12), seed=st.integers(0, 2 ** 63 - 1), data=st.data())
def test_random_orthogonal_properties(n, seed, data):
    signs = data.draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n))
    J = ia.build_random_orthogonal(n, signs, seed)
    assert ia.orthogonality_defect(J) <= 1e-10
    assert np.array_equal(J.entries, J.entries.T)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(J.entries)), np.sort(signs), atol=1e-10)
    # pure function of (n, signs, seed)
    assert np.array_equal(J.entries, ia.build_random_orthogonal(n, signs, seed).entries)


def test_random_orthogonal_bad_signs():
    with pytest.raises(DimensionError):
        ia.build_random_orthogonal(4, [1, -1, 1], 0)
    with pytest.raises(ValueError):
        ia.build_random_orthogonal(3, [1, 2, 1], 0)


def test_random_orthogonal_trace_follows_signs():
    J = ia.build_random_orthogonal(9, ia.alternating_signs(9), 7)
    tr, tr2 = ia.trace_identities(J)
    assert abs(tr - 1.0) <= 1e-12


def test_haar_columns_uniform_on_sphere():
    # E[O_11^2] = 1/n for Haar measure
    rng = np.random.default_rng(3)
    vals = [ia.haar_orthogonal(5, rng)[0, 0] ** 2 for _ in range(4000)]
    assert abs(np.mean(vals) - 0.2) < 0.01


def test_orthogonality_defect_detects_non_orthogonal():
    J = ia.custom(np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert math.isclose(ia.orthogonality_defect(J), 1.0)


def test_validation():
    with pytest.raises(DimensionError):
        ia.custom(np.ones((2, 3)))
    with pytest.raises(ValueError):
        ia.custom(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        ia.custom(np.array([[0.0, np.nan], [np.nan, 0.0]]))
    with pytest.raises(ValueError):
        ia.InteractionMatrix(np.eye(3) * 2, ia.Kind.SINE, ia.SelfInteraction.KEEP_DIAGONAL)


def test_zero_diagonal_stored_as_zero():
    J = ia.custom(np.ones((3, 3)), ia.SelfInteraction.ZERO_DIAGONAL)
    assert np.all(np.diag(J.entries) == 0)


def test_csv_round_trip(tmp_path):
    J = ia.build_random_orthogonal(6, ia.alternating_signs(6), 11)
    path = tmp_path / "J.csv"
    ia.save_csv(J, path)
    back = ia.load_csv(path, ia.Kind.RANDOM_ORTHOGONAL)
    assert np.array_equal(back.entries, J.entries)
    assert path.read_text().count("\n") == 6
