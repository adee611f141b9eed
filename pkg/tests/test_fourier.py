"""FFT helpers vs a direct DFT-summation oracle."""
import numpy as np

from cmrpipe.artifacts import dc_index, fft2_centered, ifft2_centered

from conftest import dft2_direct


def test_round_trip_is_identity(rng):
    for shape in [(8, 8), (9, 7), (16, 12)]:
        image = rng.normal(size=shape)
        back = ifft2_centered(fft2_centered(image)).real
        assert np.allclose(back, image, atol=1e-12)


def test_matches_direct_dft(rng):
    for shape in [(8, 8), (8, 10), (12, 9)]:
        image = rng.normal(size=shape)
        k = fft2_centered(image)
        oracle = dft2_direct(image)
        assert np.allclose(k, oracle, atol=1e-9)


def test_dc_is_scaled_sum(rng):
    image = rng.normal(size=(10, 14))
    k = fft2_centered(image)
    h, w = image.shape
    assert np.isclose(k[dc_index(image.shape)], image.sum() / np.sqrt(h * w))


def test_constant_image_has_single_peak():
    image = np.full((8, 8), 3.0)
    k = fft2_centered(image)
    mask = np.ones_like(k, dtype=bool)
    mask[dc_index(image.shape)] = False
    assert np.allclose(k[mask], 0.0, atol=1e-12)
    assert np.isclose(k[dc_index(image.shape)].real, 3.0 * 8.0)


def test_orthonormal_scaling_preserves_energy(rng):
    image = rng.normal(size=(16, 16))
    k = fft2_centered(image)
    assert np.isclose(np.sum(np.abs(k) ** 2), np.sum(image ** 2))
