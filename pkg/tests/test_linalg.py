import math

import numpy as np
import pytest

from gafadapt.linalg import (
    NotFactorizableError,
    NotSymmetricError,
    cholesky_psd,
    log_det_psd,
    symmetrize,
    wrap_angle,
)


class TestCholeskyPsd:
    def test_identity_needs_no_jitter(self):
        chol, eps = cholesky_psd(np.eye(2), 1e-12)
        np.testing.assert_allclose(chol, np.eye(2))
        assert eps == 0.0

    def test_diagonal_square_roots(self):
        chol, eps = cholesky_psd(np.diag([4.0, 9.0]))
        np.testing.assert_allclose(chol, np.diag([2.0, 3.0]))
        assert eps == 0.0

    def test_rank_deficient_psd_uses_small_jitter(self):
        m = np.ones((2, 2))
        chol, eps = cholesky_psd(m, 1e-12)
        assert 0.0 < eps <= 1e-8
        recon = chol @ chol.T
        assert np.linalg.norm(recon - (m + eps * np.eye(2)), "fro") < 1e-9

    def test_reconstruction_property_random_psd(self):
        rng = np.random.default_rng(314)
        for _ in range(50):
            n = rng.integers(1, 5)
            a = rng.standard_normal((n, n))
            m = a @ a.T
            chol, eps = cholesky_psd(m)
            err = np.linalg.norm(chol @ chol.T - (m + eps * np.eye(n)), "fro")
            assert err / max(1.0, np.linalg.norm(m, "fro")) < 1e-9

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetricError):
            cholesky_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_ladder_exhaustion(self):
        with pytest.raises(NotFactorizableError):
            cholesky_psd(-np.eye(2), 1e-12)


class TestLogDetPsd:
    def test_identity(self):
        assert log_det_psd(np.eye(3)) == pytest.approx(0.0, abs=1e-12)

    def test_diag_e(self):
        assert log_det_psd(np.diag([math.e, math.e])) == pytest.approx(2.0, abs=1e-12)

    def test_two_by_two(self):
        m = np.array([[2.0, 1.0], [1.0, 2.0]])
        # oracle: direct determinant 2*2 - 1*1 = 3
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        assert log_det_psd(m) == pytest.approx(math.log(det), abs=1e-12)

    def test_scaled_identity_family(self):
        for alpha in (0.1, 1.0, 10.0):
            for n in (1, 2, 4):
                got = log_det_psd(alpha * np.eye(n))
                assert abs(got - n * math.log(alpha)) < 1e-10


class TestWrapAngle:
    def test_basic_cases(self):
        assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2, abs=1e-12)
        assert wrap_angle(math.pi) == math.pi
        assert wrap_angle(-math.pi) == math.pi

    def test_range_and_idempotency(self):
        rng = np.random.default_rng(99)
        values = rng.uniform(-50.0, 50.0, size=2000)
        wrapped = wrap_angle(values)
        assert np.all(wrapped > -math.pi)
        assert np.all(wrapped <= math.pi)
        np.testing.assert_array_equal(wrap_angle(wrapped), wrapped)

    def test_two_pi_periodicity(self):
        rng = np.random.default_rng(7)
        a = rng.uniform(-math.pi, math.pi, size=64)
        base = wrap_angle(a)
        for k in (-1000, -37, -1, 1, 41, 1000):
            shifted = wrap_angle(a + 2.0 * math.pi * k)
            np.testing.assert_allclose(shifted, base, atol=1e-10)

    def test_scalar_returns_float(self):
        assert isinstance(wrap_angle(0.3), float)


class TestSymmetrize:
    def test_off_diagonal_average(self):
        got = symmetrize(np.array([[1.0, 2.0], [0.0, 1.0]]))
        np.testing.assert_allclose(got, np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_symmetric_fixed_point(self):
        m = np.array([[2.0, -1.0], [-1.0, 3.0]])
        np.testing.assert_array_equal(symmetrize(m), m)

    def test_zero(self):
        np.testing.assert_array_equal(symmetrize(np.zeros((3, 3))), np.zeros((3, 3)))
