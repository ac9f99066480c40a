import numpy as np
import pytest
import scipy.fft
from hypothesis import given, settings
from hypothesis import strategies as st

from bsblfm.dictionary import dct_dictionary, effective_operator
from bsblfm.sensing import SparseBinaryMatrix, encode_stream, generate


def test_dimension_one():
    np.testing.assert_array_equal(dct_dictionary(1).matrix, [[1.0]])


def test_dc_atom():
    x = dct_dictionary(8).synthesize(np.eye(8)[0])
    np.testing.assert_allclose(x, np.full(8, 1 / np.sqrt(8)), atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 8, 33, 512])
def test_matches_scipy_orthonormal_idct(n):
    theta = np.random.default_rng(n).standard_normal(n)
    D = dct_dictionary(n)
    np.testing.assert_allclose(D.synthesize(theta), scipy.fft.idct(theta, norm="ortho"), atol=1e-12)
    np.testing.assert_allclose(D.matrix.T @ D.matrix, np.eye(n), atol=1e-10)


@settings(max_examples=30)
@given(st.integers(1, 64), st.integers(0, 1000))
def test_norm_preserved_and_invertible(n, seed):
    theta = np.random.default_rng(seed).standard_normal(n)
    D = dct_dictionary(n)
    x = D.synthesize(theta)
    assert abs(np.linalg.norm(x) - np.linalg.norm(theta)) < 1e-12 * max(1.0, np.linalg.norm(theta))
    np.testing.assert_allclose(D.analyze(x), theta, atol=1e-10)


def test_identity_like_phi_returns_dictionary():
    # m = n is not compressive, so build the matrix directly
    phi = SparseBinaryMatrix(m=8, n=8, k=1, cols=np.arange(8)[:, None])
    D = dct_dictionary(8)
    np.testing.assert_array_equal(effective_operator(phi, D), D.matrix)


def test_identity_dictionary_gives_dense_phi():
    phi = generate(8, 16, 2, 1)
    np.testing.assert_array_equal(effective_operator(phi, np.eye(16)), phi.dense())


def test_rows_are_sums_of_dictionary_rows():
    phi = generate(8, 16, 2, 4)
    D = dct_dictionary(16)
    np.testing.assert_allclose(effective_operator(phi, D), phi.dense() @ D.matrix, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_two_evaluation_orders(seed):
    phi = generate(12, 32, 3, seed)
    D = dct_dictionary(32)
    theta = np.random.default_rng(seed).standard_normal(32)
    np.testing.assert_allclose(effective_operator(phi, D) @ theta,
                               encode_stream(phi, D.synthesize(theta)).values, atol=1e-9)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        effective_operator(generate(4, 8, 1, 0), dct_dictionary(16))
    with pytest.raises(ValueError):
        dct_dictionary(0)
