"""fft2/ifft2 against a direct O(N^4) DFT oracle, plus grid validation."""

import numpy as np
import pytest

from onn4f import fourier
from onn4f.fourier import ShapeError, fft2, hadamard, ifft2, intensity, l2_norm_sq


def dft_basis(n: int, sign: float) -> np.ndarray:
    """Centered unitary DFT matrix: E[u, x] = exp(sign*2pi*i*(u-c)(x-c)/n)/sqrt(n)."""
    c = n // 2
    k = np.arange(n) - c
    return np.exp(sign * -2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def direct_fft2(x: np.ndarray) -> np.ndarray:
    e = dft_basis(x.shape[-1], +1.0)
    return e @ x @ e.T


def direct_ifft2(x: np.ndarray) -> np.ndarray:
    e = dft_basis(x.shape[-1], -1.0)
    return e @ x @ e.T


def random_field(rng, *shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestFft2:
    def test_zeros(self, kernel_backend):
        assert np.array_equal(fft2(np.zeros((8, 8), complex)), np.zeros((8, 8)))

    @pytest.mark.parametrize("n", [4, 8, 16, 64])
    def test_constant_is_centered_delta(self, kernel_backend, n):
        c = 0.7 - 0.2j
        spec = fft2(np.full((n, n), c))
        expected = np.zeros((n, n), complex)
        expected[n // 2, n // 2] = c * n
        np.testing.assert_allclose(spec, expected, atol=1e-12)

    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_matches_direct_dft(self, kernel_backend, n, rng):
        x = random_field(rng, n, n)
        np.testing.assert_allclose(fft2(x), direct_fft2(x), atol=1e-10)

    def test_norm_preserved_vs_oracle(self, kernel_backend, rng):
        x = random_field(rng, 16, 16)
        spec = fft2(x)
        oracle = direct_fft2(x)
        assert abs(l2_norm_sq(spec) - l2_norm_sq(x)) <= 1e-12 * l2_norm_sq(x)
        np.testing.assert_allclose(spec, oracle, atol=1e-10)

    def test_linearity(self, kernel_backend, rng):
        x, y = random_field(rng, 16, 16), random_field(rng, 16, 16)
        a, b = 1.3 - 0.4j, -0.7 + 2.1j
        lhs = fft2(a * x + b * y)
        rhs = a * fft2(x) + b * fft2(y)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * np.abs(rhs).max())

    def test_batch_axis_matches_loop(self, kernel_backend, rng):
        xb = random_field(rng, 5, 16, 16)
        batched = fft2(xb)
        for i in range(5):
            np.testing.assert_allclose(batched[i], fft2(xb[i]), atol=1e-13)

    @pytest.mark.parametrize("shape", [(8, 4), (6, 6), (8,), (0, 0)])
    def test_rejects_bad_grids(self, kernel_backend, shape):
        with pytest.raises(ShapeError):
            fft2(np.zeros(shape, complex))


class TestIfft2:
    def test_round_trip(self, kernel_backend, rng):
        x = random_field(rng, 64, 64)
        back = ifft2(fft2(x))
        assert np.abs(back - x).max() < 1e-12 * np.abs(x).max()

    def test_round_trip_other_order(self, kernel_backend, rng):
        x = random_field(rng, 32, 32)
        back = fft2(ifft2(x))
        assert np.abs(back - x).max() < 1e-12 * np.abs(x).max()

    def test_zeros(self, kernel_backend):
        assert np.array_equal(ifft2(np.zeros((8, 8), complex)), np.zeros((8, 8)))

    def test_centered_impulse_becomes_constant(self, kernel_backend):
        imp = np.zeros((8, 8), complex)
        imp[4, 4] = 1.0
        np.testing.assert_allclose(ifft2(imp), np.full((8, 8), 1 / 8), atol=1e-14)

    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_matches_direct_inverse_dft(self, kernel_backend, n, rng):
        x = random_field(rng, n, n)
        np.testing.assert_allclose(ifft2(x), direct_ifft2(x), atol=1e-10)


class TestParseval:
    def test_random_fields(self, kernel_backend, rng):
        for _ in range(10):
            x = random_field(rng, 64, 64)
            a, b = l2_norm_sq(x), l2_norm_sq(fft2(x))
            assert abs(a - b) <= 1e-10 * a


class TestHadamard:
    def test_ones_identity(self, rng):
        a = random_field(rng, 8, 8)
        np.testing.assert_array_equal(hadamard(a, np.ones((8, 8), complex)), a)

    def test_zeros_absorb(self, rng):
        a = random_field(rng, 8, 8)
        assert not np.any(hadamard(a, np.zeros((8, 8), complex)))

    def test_complex_product(self):
        a = np.full((4, 4), 1 + 1j)
        b = np.full((4, 4), 1 - 1j)
        np.testing.assert_allclose(hadamard(a, b), np.full((4, 4), 2 + 0j))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            hadamard(np.zeros((8, 8), complex), np.zeros((4, 4), complex))


class TestIntensity:
    def test_known_modulus(self, kernel_backend):
        field = np.full((4, 4), 3 + 4j)
        np.testing.assert_allclose(intensity(field), np.full((4, 4), 25.0))

    def test_zeros(self, kernel_backend):
        assert not np.any(intensity(np.zeros((4, 4), complex)))

    def test_sum_is_squared_norm(self, kernel_backend, rng):
        x = random_field(rng, 16, 16)
        assert intensity(x).sum() == pytest.approx(l2_norm_sq(x), rel=1e-12)

    def test_non_negative(self, kernel_backend, rng):
        assert intensity(random_field(rng, 16, 16)).min() >= 0


class TestValidation:
    def test_as_field_casts(self):
        out = fourier.as_field(np.ones((4, 4)))
        assert out.dtype == np.complex128 and out.flags.c_contiguous

    def test_as_real_grid_rejects_complex(self):
        with pytest.raises(TypeError):
            fourier.as_real_grid(np.ones((4, 4), complex))
