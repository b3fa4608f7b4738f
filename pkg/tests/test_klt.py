import numpy as np
import pytest
import scipy.linalg

from jointrdot.errors import EmptyInput
from jointrdot.graphs import column_samples, row_samples
from jointrdot.klt import descending_eigenbasis, sample_covariance, secondary_klt, separable_klt
from jointrdot.linalg import fix_signs


def test_sample_covariance_has_no_mean_removal():
    x = np.array([[1.0, 1.0], [3.0, 3.0]])
    est = sample_covariance(x)
    np.testing.assert_array_equal(est.matrix, [[5.0, 5.0], [5.0, 5.0]])
    assert est.sample_count == 2 and est.dim == 2
    with pytest.raises(EmptyInput):
        sample_covariance(np.zeros((0, 3)))


def test_descending_eigenbasis_against_lapack(rng):
    a = rng.standard_normal((6, 6))
    s = a @ a.T
    w, v = scipy.linalg.eigh(s)
    ref = fix_signs(v[:, ::-1])
    assert np.abs(descending_eigenbasis(s) - ref).max() < 1e-9


def test_separable_klt_uses_column_and_row_statistics(rng):
    b = rng.standard_normal((300, 5, 5)) * np.array([3.0, 1.0, 0.5, 2.0, 0.1])[:, None]
    col, row = separable_klt(b)
    s_col = column_samples(b).T @ column_samples(b) / (300 * 5)
    s_row = row_samples(b).T @ row_samples(b) / (300 * 5)
    np.testing.assert_allclose(col, descending_eigenbasis(s_col), atol=1e-12)
    np.testing.assert_allclose(row, descending_eigenbasis(s_row), atol=1e-12)
    # strongest column direction is the row with the largest scale
    assert np.argmax(np.abs(col[:, 0])) == 0


def test_secondary_klt_rank_one():
    z = np.zeros((10, 4))
    z[:, 2] = np.linspace(-3, 3, 10)
    t = secondary_klt(z)
    np.testing.assert_allclose(t[:, 0], [0, 0, 1, 0], atol=1e-12)


def test_secondary_klt_decorrelates(rng):
    z = rng.standard_normal((2000, 6)) @ rng.standard_normal((6, 6))
    t = secondary_klt(z)
    c = t.T @ (z.T @ z / 2000) @ t
    assert np.abs(c - np.diag(np.diag(c))).max() < 1e-8 * np.abs(c).max()
    assert np.all(np.diff(np.diag(c)) <= 1e-9)
