import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from baytomo.wavelets import block_offsets, build_dwt
from haar_oracle import haar_fwt


def test_two_by_two_blocks():
    d = build_dwt(2)
    assert np.allclose(d.forward(np.array([[1.0, -1], [1, -1]])), [0, 2, 0, 0])
    assert np.allclose(d.forward(np.array([[1.0, 1], [-1, -1]])), [0, 0, 2, 0])
    assert np.allclose(d.forward(np.array([[1.0, -1], [-1, 1]])), [0, 0, 0, 2])
    assert np.allclose(d.forward(np.ones((2, 2))), [2, 0, 0, 0])


@pytest.mark.parametrize("side,levels", [(8, None), (8, 1), (16, 2), (32, None)])
def test_orthonormal(side, levels):
    D = build_dwt(side, levels).matrix
    err = abs(D.T @ D - sp.identity(side * side)).max()
    assert err < 1e-12


@settings(max_examples=25, deadline=None)
@given(logside=st.integers(1, 5), data=st.data())
def test_matches_recursive_transform(logside, data):
    side = 1 << logside
    levels = data.draw(st.integers(1, logside))
    seed = data.draw(st.integers(0, 2**31))
    X = np.random.default_rng(seed).standard_normal((side, side))
    d = build_dwt(side, levels)
    assert np.allclose(d.forward(X), haar_fwt(X, levels), atol=1e-12)
    assert np.allclose(d.inverse(d.forward(X)).reshape(side, side), X, atol=1e-12)


def test_block_offsets_layout():
    offs = block_offsets(8, 2)
    assert offs["a"] == 0
    assert offs[(2, 1)] == 4 and offs[(2, 2)] == 8 and offs[(2, 3)] == 12
    assert offs[(1, 1)] == 16 and offs[(1, 3)] == 48


def test_column_is_sparse_column():
    d = build_dwt(8)
    rows, vals = d.column(19)
    dense = d.matrix.toarray()[:, 19]
    assert np.allclose(dense[rows], vals)
    assert np.count_nonzero(dense) == rows.size == 1 + 3 * 3


def test_rejects_bad_sizes():
    with pytest.raises(ValueError):
        build_dwt(12)
    with pytest.raises(ValueError):
        build_dwt(8, 4)
