import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from transhash.numerics import (gaussian_kernel, gaussian_kernel_matrix, matmul,
                                pairwise_sq_dists, sigmoid, softplus, tanh_elementwise)

finite = st.floats(-1e6, 1e6, allow_nan=False)


class TestMatmul:
    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), m), m)

    def test_orthogonal(self):
        assert matmul([[1.0, 0.0]], [[0.0], [1.0]]).tolist() == [[0.0]]

    def test_shape_error_names_shapes(self):
        with pytest.raises(ValueError, match=r"\(3, 4\).*\(5, 2\)"):
            matmul(np.ones((3, 4)), np.ones((5, 2)))

    def test_associative(self, rng):
        for _ in range(20):
            a, b, c = (rng.standard_normal(s) for s in ((3, 4), (4, 5), (5, 2)))
            np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)),
                                       rtol=1e-9, atol=1e-12)


class TestTanh:
    def test_values(self):
        assert tanh_elementwise(np.zeros((1, 1)))[0, 0] == 0.0
        # mpmath tanh(1) to 40 digits
        assert tanh_elementwise([[1.0]])[0, 0] == pytest.approx(0.7615941559557648881, abs=1e-15)

    def test_saturation_stays_open(self):
        v = tanh_elementwise([[50.0, -50.0, 1e300]])
        assert 1 - 1e-9 < v[0, 0] < 1
        assert -1 < v[0, 1] < -1 + 1e-9
        assert v[0, 2] < 1

    @given(finite)
    def test_open_interval(self, x):
        v = tanh_elementwise([[x]])[0, 0]
        assert -1 < v < 1


class TestSigmoid:
    def test_zero(self):
        assert sigmoid(0.0) == 0.5

    def test_stable_tails(self):
        lo = sigmoid(-1000.0)
        assert 0 <= lo <= 1e-300 and not math.isnan(lo)
        assert sigmoid(1000.0) == 1.0
        assert np.all(np.isfinite(sigmoid(np.array([-710.0, 710.0]))))

    @given(st.floats(-700, 700))
    def test_symmetry(self, x):
        assert sigmoid(x) + sigmoid(-x) == pytest.approx(1.0, abs=1e-12)

    def test_monotone(self):
        x = np.linspace(-40, 40, 2001)
        assert np.all(np.diff(sigmoid(x)) >= 0)

    def test_softplus_matches_naive(self):
        x = np.linspace(-30, 30, 61)
        np.testing.assert_allclose(softplus(x), np.log1p(np.exp(x)), rtol=1e-12)
        assert softplus(1000.0) == 1000.0


class TestGaussianKernel:
    def test_same_point(self):
        assert gaussian_kernel([0.3, -2.0], [0.3, -2.0], 0.7) == 1.0

    def test_scalar_oracles(self):
        assert gaussian_kernel([0.0], [1.0], 1.0) == pytest.approx(0.36787944117144232, rel=1e-15)
        assert gaussian_kernel([0.0, 0.0], [3.0, 4.0], 0.1) == pytest.approx(
            0.082084998623898795, rel=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            gaussian_kernel([0.0], [1.0, 2.0], 1.0)

    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            gaussian_kernel([0.0], [1.0], 0.0)

    @given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3),
           st.floats(1e-3, 10))
    def test_symmetric_and_bounded(self, a, b, gamma):
        k = gaussian_kernel(a, b, gamma)
        assert k == gaussian_kernel(b, a, gamma)
        assert 0 <= k <= 1

    def test_matrix_matches_scalar(self, rng):
        a, b = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
        k = gaussian_kernel_matrix(a, b, 0.4)
        for i in range(4):
            for j in range(5):
                assert k[i, j] == pytest.approx(gaussian_kernel(a[i], b[j], 0.4), rel=1e-14)

    def test_sq_dists_exactly_symmetric(self, rng):
        a, b = rng.standard_normal((30, 7)), rng.standard_normal((20, 7))
        np.testing.assert_array_equal(pairwise_sq_dists(a, b), pairwise_sq_dists(b, a).T)
        np.testing.assert_array_equal(pairwise_sq_dists(a, b, chunk=3), pairwise_sq_dists(a, b))
