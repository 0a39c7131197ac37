import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

from boundopt import cccp, numerics
from boundopt.exceptions import DimensionError, NumericError, SingularMatrixError


class TestEig:
    def test_identity(self):
        s = numerics.eig(np.eye(3))
        np.testing.assert_allclose(s.eigenvalues, [1, 1, 1])
        assert s.spectral_radius == 1.0

    def test_diagonal(self):
        assert numerics.eig(np.diag([0.5, 0.268])).spectral_radius == pytest.approx(0.5)

    def test_golden_ratio_companion(self):
        root = brentq(lambda x: x * x - x - 1, 1, 2)
        s = numerics.eig([[1.0, 1.0], [1.0, 0.0]])
        assert s.spectral_radius == pytest.approx(root, abs=1e-12)

    def test_sorted_by_modulus_with_vectors(self):
        m = np.array([[0.1, 0.0, 0.0], [0.0, -0.9, 0.0], [0.0, 0.0, 0.5]])
        s = numerics.eig(m, vectors=True)
        np.testing.assert_allclose(np.abs(s.eigenvalues), [0.9, 0.5, 0.1])
        for k in range(3):
            np.testing.assert_allclose(m @ s.vectors[:, k], s.eigenvalues[k] * s.vectors[:, k], atol=1e-12)

    def test_lambda_max_is_largest_real_part(self):
        assert numerics.eig(np.diag([-0.9, 0.3])).lambda_max == pytest.approx(0.3)

    @pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[np.nan, 0], [0, 1]])])
    def test_rejects_bad_input(self, bad):
        with pytest.raises((DimensionError, NumericError)):
            numerics.eig(bad)

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, (4, 4), elements=st.floats(-3, 3)))
    def test_radius_matches_numpy(self, m):
        assert numerics.eig(m).spectral_radius == pytest.approx(np.max(np.abs(np.linalg.eigvals(m))), abs=1e-9)


class TestSolve:
    def test_identity(self):
        np.testing.assert_allclose(numerics.solve(np.eye(2), [1, 2]), [1, 2])

    def test_diagonal(self):
        np.testing.assert_allclose(numerics.solve(np.diag([2.0, 4.0]), [2, 4]), [1, 1])

    def test_residual(self):
        m, b = np.array([[4.0, 1.0], [1.0, 3.0]]), np.array([1.0, 2.0])
        assert np.linalg.norm(m @ numerics.solve(m, b) - b) <= 1e-12

    def test_singular_reports_condition(self):
        with pytest.raises(SingularMatrixError) as err:
            numerics.solve([[1.0, 2.0], [2.0, 4.0]], [1, 1])
        assert err.value.condition is None or err.value.condition > 1e12

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            numerics.solve(np.eye(2), [1, 2, 3])


class TestFiniteDifferences:
    def test_identity_jacobian(self):
        np.testing.assert_allclose(numerics.fd_jacobian(lambda x: x, np.array([0.3, -2.0, 5.0])), np.eye(3), atol=1e-9)

    def test_linear_map(self):
        A = np.array([[1.0, 2.0], [-3.0, 0.5], [0.0, 4.0]])
        np.testing.assert_allclose(numerics.fd_jacobian(lambda x: A @ x, np.zeros(2)), A, atol=1e-10)

    def test_cccp_step_at_negative_minimum(self):
        x_star = brentq(lambda x: 4 * x ** 3 - 6 * x + 2, -2.0, -1.0)
        J = numerics.fd_jacobian(lambda x: cccp.cccp_step(cccp.QUARTIC_BENCH["dec1"], x), np.array([x_star]))
        assert J.shape == (1, 1)
        assert J[0, 0] == pytest.approx(6 / (12 * x_star ** 2), rel=1e-5)
        assert J[0, 0] == pytest.approx(0.268, abs=1e-3)

    def test_hessian_of_quadratic(self):
        A = np.array([[2.0, 0.5], [0.5, 1.0]])
        np.testing.assert_allclose(numerics.fd_hessian(lambda x: A @ x, np.array([1.0, -1.0])), A, atol=1e-9)

    def test_hessian_of_quartic_at_one(self):
        g = lambda x: 4 * x ** 3 - 6 * x + 2
        np.testing.assert_allclose(numerics.fd_hessian(g, np.array([1.0])), [[6.0]], atol=1e-6)

    def test_hessian_of_constant(self):
        np.testing.assert_allclose(numerics.fd_hessian(lambda x: np.zeros(2), np.ones(2)), np.zeros((2, 2)))

    def test_non_finite_names_coordinate(self):
        with pytest.raises(NumericError, match="coordinate 1"), np.errstate(divide="ignore"):
            numerics.fd_jacobian(lambda x: np.log(x), np.array([1.0, 1e-3]), h=1e-3)

    def test_rejects_non_positive_step(self):
        with pytest.raises(ValueError):
            numerics.fd_jacobian(lambda x: x, np.ones(2), h=0.0)


def test_cosine():
    assert numerics.cosine([1, 0], [2, 0]) == 1.0
    assert numerics.cosine([1, 0], [0, 3]) == 0.0
    assert np.isnan(numerics.cosine([0, 0], [1, 0]))
