import itertools
import warnings
from math import comb

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from singhyp.errors import DegenerateInput, DomainError
from singhyp.exterior import (exterior_generator, exterior_power, exterior_power_batch,
                              induced_splitting, multi_indices, plane_to_pvector)

A19 = np.diag([-3.0, 2.0, 4.0, 10.0])
finite = st.floats(-2.0, 2.0, allow_nan=False)


def minor_oracle(A, rows, cols):
    return np.linalg.det(A[np.ix_([r - 1 for r in rows], [c - 1 for c in cols])])


def test_multi_indices_small_cases():
    assert list(multi_indices(3, 3).tuples) == [(1, 2, 3)]
    assert list(multi_indices(4, 2).tuples) == [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
    assert list(multi_indices(5, 1).tuples) == [(i,) for i in range(1, 6)]


@pytest.mark.parametrize("n,p", [(3, 0), (3, 4), (0, 1)])
def test_multi_indices_rejects_bad_order(n, p):
    with pytest.raises(DomainError):
        multi_indices(n, p)


@given(st.integers(1, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))))
def test_multi_indices_invariants(np_):
    n, p = np_
    b = multi_indices(n, p)
    tuples = list(b.tuples)
    assert len(b) == len(tuples) == comb(n, p)
    assert tuples == sorted(tuples)
    assert all(all(1 <= i <= n for i in t) and list(t) == sorted(set(t)) for t in tuples)


def test_exterior_power_identity_and_diagonal_cases():
    for p in range(1, 5):
        assert np.array_equal(exterior_power(np.eye(4), p).matrix, np.eye(comb(4, p)))
    np.testing.assert_allclose(exterior_power(A19, 2).matrix,
                               np.diag([-6.0, -12.0, -30.0, 8.0, 20.0, 40.0]), atol=1e-12)
    np.testing.assert_allclose(exterior_power(A19, 3).matrix,
                               np.diag([-24.0, -60.0, -120.0, 80.0]), atol=1e-12)
    np.testing.assert_array_equal(exterior_power(A19, 1).matrix, A19)


def test_exterior_power_entries_are_minors():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(5, 5))
    for p in (2, 3):
        M = exterior_power(A, p).matrix
        tuples = list(multi_indices(5, p).tuples)
        for a, I in enumerate(tuples):
            for b, J in enumerate(tuples):
                assert M[a, b] == pytest.approx(minor_oracle(A, I, J), abs=1e-12)


def test_exterior_power_rejects_non_square_and_large():
    with pytest.raises(DomainError):
        exterior_power(np.ones((2, 3)), 1)
    with pytest.raises(DomainError):
        exterior_power(np.eye(13), 2)


@given(arrays(float, (4, 4), elements=finite), arrays(float, (4, 4), elements=finite),
       st.sampled_from([2, 3]))
def test_functoriality(A, B, p):
    lhs = exterior_power(A @ B, p).matrix
    PA, PB = exterior_power(A, p).matrix, exterior_power(B, p).matrix
    scale = max(1.0, np.linalg.norm(PA) * np.linalg.norm(PB))
    assert np.linalg.norm(lhs - PA @ PB) <= 1e-10 * scale


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@given(arrays(float, (4, 4), elements=finite))
def test_top_power_is_determinant(A):
    M = exterior_power(A, 4).matrix
    assert M.shape == (1, 1)
    assert M[0, 0] == pytest.approx(np.linalg.det(A), abs=1e-10)


def test_batch_matches_single():
    rng = np.random.default_rng(0)
    As = rng.normal(size=(7, 4, 4))
    out = exterior_power_batch(As, 2)
    for A, M in zip(As, out):
        np.testing.assert_allclose(M, exterior_power(A, 2).matrix, atol=1e-12)


def test_generator_example_spectrum():
    G2 = exterior_generator(A19, 2)
    labels = list(G2.basis.tuples)
    ev = dict(zip(labels, np.diag(G2.matrix)))
    assert sorted(round(ev[t], 9) for t in labels if 1 in t) == [-1, 1, 7]
    assert sorted(round(ev[t], 9) for t in labels if 1 not in t) == [6, 12, 14]
    np.testing.assert_array_equal(G2.matrix, np.diag(np.diag(G2.matrix)))
    G3 = exterior_generator(A19, 3)
    ev3 = dict(zip(G3.basis.tuples, np.diag(G3.matrix)))
    assert sorted(v for t, v in ev3.items() if 1 in t) == [3, 9, 11]
    assert ev3[(2, 3, 4)] == 16
    assert not exterior_generator(np.zeros((3, 3)), 2).matrix.any()


@given(arrays(float, (4, 4), elements=st.floats(-0.25, 0.25)), st.floats(0.0, 1.0),
       st.sampled_from([1, 2, 3, 4]))
def test_generator_exponentiates_to_power(A, t, p):
    lhs = scipy.linalg.expm(t * exterior_generator(A, p).matrix)
    rhs = exterior_power(scipy.linalg.expm(t * A), p).matrix
    assert np.abs(lhs - rhs).max() <= 1e-8


def test_generator_spectrum_is_sums_of_eigenvalues():
    rng = np.random.default_rng(5)
    lam = rng.normal(size=4)
    V = rng.normal(size=(4, 4))
    A = V @ np.diag(lam) @ np.linalg.inv(V)
    ev = np.sort(np.linalg.eigvals(exterior_generator(A, 2).matrix).real)
    sums = np.sort([lam[i] + lam[j] for i, j in itertools.combinations(range(4), 2)])
    np.testing.assert_allclose(ev, sums, atol=1e-9)


def test_plane_to_pvector_examples():
    e = np.eye(4)
    v = plane_to_pvector([e[1], e[2]])
    labels = list(multi_indices(4, 2).tuples)
    assert v[labels.index((2, 3))] == 1.0 and np.abs(v).sum() == 1.0
    np.testing.assert_allclose(plane_to_pvector([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]), [0, 1, 1])
    with pytest.warns(DegenerateInput):
        z = plane_to_pvector([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    assert not z.any()


@given(arrays(float, (3, 5), elements=finite), st.floats(-3, 3).filter(lambda c: abs(c) > 1e-3))
def test_pvector_norm_is_volume_and_scales(V, c):
    gram = np.linalg.det(V @ V.T)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateInput)
        w = plane_to_pvector(V)
        W = V.copy()
        W[0] *= c
        wc = plane_to_pvector(W)
    assert np.linalg.norm(w) == pytest.approx(np.sqrt(max(gram, 0.0)), abs=1e-9)
    np.testing.assert_allclose(wc, c * w, atol=1e-9)


def test_induced_splitting_examples():
    e = np.eye(4)
    ind = induced_splitting(e[:1], e[1:], 2)
    assert set(ind.F_labels) == {(2, 3), (2, 4), (3, 4)}
    assert set(ind.E_labels) == {(1, 2), (1, 3), (1, 4)}
    ind = induced_splitting(e[:2], e[2:], 2)
    assert (ind.E_tilde.shape[1], ind.F_tilde.shape[1]) == (5, 1)
    top = induced_splitting(e[:1], e[1:], 4)
    assert (top.E_tilde.shape[1], top.F_tilde.shape[1]) == (1, 0)


def test_induced_splitting_dimensions_and_rejection():
    rng = np.random.default_rng(2)
    B = rng.normal(size=(5, 5))
    for k in range(1, 6):
        ind = induced_splitting(B[:2], B[2:], k)
        assert ind.E_tilde.shape[1] + ind.F_tilde.shape[1] == comb(5, k)
        assert ind.F_tilde.shape[1] == comb(3, k)
    with pytest.raises(DomainError):
        induced_splitting(B[:2], np.vstack([B[2:4], B[0]]), 2)
