"""Artifact transforms vs closed-form and spatial-domain oracles."""
import numpy as np
import pytest

from cmrpipe import ParameterError, Slice2D
from cmrpipe.artifacts import (
    BiasFieldParams,
    GammaParams,
    GhostingParams,
    MotionParams,
    RandomBiasField,
    RandomGamma,
    RandomGhosting,
    RandomMotion,
    apply_bias_field,
    apply_gamma,
    apply_ghosting,
    apply_motion,
    bias_field_image,
)
from cmrpipe.artifacts.transforms import rigid_transform_2d


def make_slice(rng, shape=(32, 32), spacing=(1.0, 1.0)):
    return Slice2D(rng.normal(size=shape), spacing)


# ---------------------------------------------------------------------------
# neutral parameters reproduce the input
# ---------------------------------------------------------------------------

class TestNeutralIdentity:
    def test_motion_zero_transforms(self, rng):
        slc = make_slice(rng)
        out = apply_motion(slc, MotionParams(num_transforms=0))
        assert np.allclose(out.data, slc.data, atol=1e-12)

    def test_ghosting_zero_intensity(self, rng):
        slc = make_slice(rng)
        out = apply_ghosting(slc, GhostingParams(num_ghosts=5, intensity=0.0))
        assert np.allclose(out.data, slc.data, atol=1e-12)

    def test_ghosting_zero_ghosts(self, rng):
        slc = make_slice(rng)
        out = apply_ghosting(slc, GhostingParams(num_ghosts=0, intensity=0.8))
        assert np.allclose(out.data, slc.data, atol=1e-12)

    def test_bias_zero_coefficients(self, rng):
        slc = make_slice(rng)
        n = (3 + 1) * (3 + 2) // 2
        out = apply_bias_field(slc, BiasFieldParams(coefficients=(0.0,) * n, order=3))
        assert np.allclose(out.data, slc.data, atol=1e-12)

    def test_gamma_zero_log(self, rng):
        slc = make_slice(rng)
        out = apply_gamma(slc, GammaParams(log_gamma=0.0))
        assert np.allclose(out.data, slc.data, atol=1e-12)


# ---------------------------------------------------------------------------
# motion
# ---------------------------------------------------------------------------

class TestMotion:
    def test_uniform_translation_matches_roll_interior(self, rng):
        # every k-space line from the translated image = pure spatial shift;
        # compare against np.roll away from the clamped edges
        image = rng.normal(size=(32, 32))
        slc = Slice2D(image, (1.0, 1.0))
        shift = (3, -2)
        params = MotionParams(
            num_transforms=1,
            rotations=(0.0,),
            translations=((float(shift[0]), float(shift[1])),),
            times=(1e-9,),
        )
        out = apply_motion(slc, params, keep_center=False)
        expected = np.roll(image, shift, axis=(0, 1))
        interior = (slice(5, -5), slice(5, -5))
        assert np.allclose(out.data[interior], expected[interior], atol=1e-3)

    def test_translation_respects_spacing(self, rng):
        # 4 mm at 2 mm spacing is a 2 pixel shift
        image = rng.normal(size=(24, 24))
        slc = Slice2D(image, (2.0, 2.0))
        params = MotionParams(
            num_transforms=1, rotations=(0.0,), translations=((4.0, 0.0),),
            times=(1e-9,),
        )
        out = apply_motion(slc, params, keep_center=False)
        expected = np.roll(image, 2, axis=0)
        interior = (slice(4, -4), slice(4, -4))
        assert np.allclose(out.data[interior], expected[interior], atol=1e-3)

    def test_segments_come_from_expected_spectra(self, rng):
        # lines before the break belong to the original spectrum, lines
        # after it to the moved image's spectrum; compose them inline and
        # compare the resulting images
        image = rng.normal(size=(16, 16))
        slc = Slice2D(image, (1.0, 1.0))
        params = MotionParams(
            num_transforms=1, rotations=(7.0,), translations=((1.5, -2.0),),
            times=(0.75,), axis=0,
        )
        out = apply_motion(slc, params, keep_center=False)
        moved = rigid_transform_2d(image, (1.0, 1.0), 7.0, (1.5, -2.0))

        def spectrum(im):
            return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(im), norm="ortho"))

        k_mixed = spectrum(image).copy()
        b = round(0.75 * 16)
        k_mixed[b:] = spectrum(moved)[b:]
        expected = np.fft.fftshift(
            np.fft.ifft2(np.fft.ifftshift(k_mixed), norm="ortho")).real
        assert np.allclose(out.data, expected, atol=1e-10)

    def test_keep_center_protects_central_segment(self, rng):
        # with the break right before the center, keep_center must source
        # the central segment from the original image
        image = rng.normal(size=(16, 16))
        slc = Slice2D(image, (1.0, 1.0))
        params = MotionParams(
            num_transforms=1, rotations=(0.0,), translations=((5.0, 5.0),),
            times=(0.25,), axis=0,
        )
        protected = apply_motion(slc, params, keep_center=True)
        assert np.allclose(protected.data, image, atol=1e-10)

    def test_rotation_changes_image(self, rng):
        # break after the central line so keep_center leaves the tail
        # segment corrupted
        slc = make_slice(rng, shape=(24, 24))
        params = MotionParams(
            num_transforms=1, rotations=(10.0,), translations=((0.0, 0.0),),
            times=(0.6,), axis=0,
        )
        out = apply_motion(slc, params)
        assert not np.allclose(out.data, slc.data, atol=1e-3)

    def test_output_is_real_valued(self, rng):
        slc = make_slice(rng)
        params = MotionParams(
            num_transforms=2, rotations=(4.0, -6.0),
            translations=((1.0, 2.0), (-2.0, 0.5)), times=(0.3, 0.6),
        )
        out = apply_motion(slc, params)
        assert out.data.dtype == np.float64

    def test_param_validation(self):
        with pytest.raises(ParameterError):
            MotionParams(num_transforms=1, rotations=(1.0,),
                         translations=((0.0, 0.0),), times=(1.5,))
        with pytest.raises(ParameterError):
            MotionParams(num_transforms=2, rotations=(1.0, 2.0),
                         translations=((0.0, 0.0), (0.0, 0.0)), times=(0.6, 0.3))
        with pytest.raises(ParameterError):
            MotionParams(num_transforms=1, rotations=(), translations=(), times=())
        with pytest.raises(ParameterError):
            MotionParams(num_transforms=1, rotations=(1.0,),
                         translations=((0.0, 0.0),), times=(0.5,), axis=2)


class TestRigidTransform:
    def test_integer_translation_matches_roll(self, rng):
        image = rng.normal(size=(20, 20))
        out = rigid_transform_2d(image, (1.0, 1.0), 0.0, (3.0, -2.0))
        expected = np.roll(image, (3, -2), axis=(0, 1))
        assert np.allclose(out[4:-4, 4:-4], expected[4:-4, 4:-4], atol=1e-10)

    def test_rotation_is_about_slice_center(self):
        # the center pixel of an odd-sized slice is a fixed point
        image = np.zeros((21, 21))
        image[10, 10] = 5.0
        out = rigid_transform_2d(image, (1.0, 1.0), 30.0, (0.0, 0.0))
        assert out[10, 10] == pytest.approx(5.0, abs=1e-9)

    def test_full_turn_is_identity(self, rng):
        image = rng.normal(size=(16, 16))
        out = rigid_transform_2d(image, (1.0, 1.0), 360.0, (0.0, 0.0))
        assert np.allclose(out, image, atol=1e-9)

    def test_anisotropic_spacing_rotation_moves_in_mm(self):
        # rotating the content by +90 deg maps a point at (+4 mm, 0) to
        # (0, +4 mm) in slice mm, whatever the pixel grid
        spacing = (2.0, 1.0)
        image = np.zeros((17, 33))
        image[8 + 2, 16] = 1.0  # +4 mm along axis 0 (2 mm/px)
        out = rigid_transform_2d(image, spacing, 90.0, (0.0, 0.0))
        # +4 mm along axis 1 at 1 mm/px is 4 px right of center
        assert out[8, 16 + 4] == pytest.approx(1.0, abs=1e-6)


# ---------------------------------------------------------------------------
# ghosting
# ---------------------------------------------------------------------------

def comb_scaled_spectrum(image, params):
    """Hand-rolled expected spectrum: explicit per-line loop."""
    k = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(image), norm="ortho"))
    n = k.shape[params.axis]
    center = n // 2
    dc = (k.shape[0] // 2, k.shape[1] // 2)
    dc_value = k[dc]
    out = k.copy()
    for line in range(n):
        offset = line - center
        if offset % params.num_ghosts != 0:
            continue
        if abs(offset) < params.restore_center * n / 2.0:
            continue
        sel = (line, slice(None)) if params.axis == 0 else (slice(None), line)
        out[sel] = out[sel] * (1.0 - params.intensity)
    out[dc] = dc_value
    return out


class TestGhosting:
    def test_impulse_matches_comb_spectrum(self, rng):
        image = np.zeros((16, 16))
        image[8, 8] = 1.0
        params = GhostingParams(num_ghosts=4, intensity=0.7, axis=0,
                                restore_center=0.0)
        out = apply_ghosting(Slice2D(image, (1.0, 1.0)), params)
        expected_k = comb_scaled_spectrum(image, params)
        k_out = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(out.data), norm="ortho"))
        assert np.allclose(k_out, expected_k, atol=1e-9)

    def test_matches_roll_average_closed_form(self, rng):
        # keeping every g-th line (g | n) equals averaging g copies rolled
        # by n/g; subtracting that scaled comb and restoring DC gives
        # out = x - i * avg_rolls(x) + i * mean(x)
        g = 4
        image = rng.normal(size=(16, 16))
        params = GhostingParams(num_ghosts=g, intensity=0.6, axis=0,
                                restore_center=0.0)
        out = apply_ghosting(Slice2D(image, (1.0, 1.0)), params)
        rolls = sum(np.roll(image, m * (16 // g), axis=0) for m in range(g)) / g
        expected = image - 0.6 * rolls + 0.6 * image.mean()
        assert np.allclose(out.data, expected, atol=1e-9)

    def test_mean_preserved_by_dc_restore(self, rng):
        slc = make_slice(rng, shape=(24, 24))
        out = apply_ghosting(slc, GhostingParams(num_ghosts=3, intensity=0.9))
        assert out.data.mean() == pytest.approx(slc.data.mean(), abs=1e-9)

    def test_restore_center_spares_central_lines(self, rng):
        image = rng.normal(size=(20, 20))
        params_spared = GhostingParams(num_ghosts=1, intensity=1.0, axis=0,
                                       restore_center=0.5)
        out = apply_ghosting(Slice2D(image, (1.0, 1.0)), params_spared)
        k_out = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(out.data), norm="ortho"))
        k_in = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(image), norm="ortho"))
        # central band of 0.5 * 20 = 10 lines (offsets -4..5) is untouched
        assert np.allclose(k_out[6:15], k_in[6:15], atol=1e-9)
        # k=0 line well outside the band is zeroed
        assert np.allclose(k_out[0], 0.0, atol=1e-9)

    def test_axis_one_scales_columns(self, rng):
        image = rng.normal(size=(12, 12))
        params = GhostingParams(num_ghosts=2, intensity=1.0, axis=1,
                                restore_center=0.0)
        out = apply_ghosting(Slice2D(image, (1.0, 1.0)), params)
        expected_k = comb_scaled_spectrum(image, params)
        k_out = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(out.data), norm="ortho"))
        assert np.allclose(k_out, expected_k, atol=1e-9)

    def test_param_validation(self):
        with pytest.raises(ParameterError):
            GhostingParams(num_ghosts=-1, intensity=0.5)
        with pytest.raises(ParameterError):
            GhostingParams(num_ghosts=2, intensity=1.5)
        with pytest.raises(ParameterError):
            GhostingParams(num_ghosts=2, intensity=0.5, axis=3)


# ---------------------------------------------------------------------------
# bias field
# ---------------------------------------------------------------------------

class TestBiasField:
    def test_field_matches_monomial_oracle(self, rng):
        order = 3
        n = (order + 1) * (order + 2) // 2
        coeffs = tuple(float(c) for c in rng.uniform(-0.5, 0.5, size=n))
        params = BiasFieldParams(coefficients=coeffs, order=order)
        shape = (11, 7)
        field = bias_field_image(shape, params)

        xs = np.linspace(-1.0, 1.0, shape[0])
        ys = np.linspace(-1.0, 1.0, shape[1])
        for i in [0, 3, 10]:
            for j in [0, 4, 6]:
                acc = 0.0
                idx = 0
                for p in range(order + 1):
                    for q in range(order + 1 - p):
                        acc += coeffs[idx] * xs[i] ** p * ys[j] ** q
                        idx += 1
                assert field[i, j] == pytest.approx(np.exp(acc), rel=1e-12)

    def test_field_is_positive(self, rng):
        n = (3 + 1) * (3 + 2) // 2
        params = BiasFieldParams(coefficients=tuple(rng.uniform(-2, 2, size=n)))
        assert np.all(bias_field_image((16, 16), params) > 0)

    def test_multiplicative(self, rng):
        slc = make_slice(rng, shape=(8, 8))
        n = (2 + 1) * (2 + 2) // 2
        params = BiasFieldParams(coefficients=tuple(rng.uniform(-0.3, 0.3, size=n)),
                                 order=2)
        out = apply_bias_field(slc, params)
        field = bias_field_image((8, 8), params)
        assert np.allclose(out.data, slc.data * field, atol=1e-12)

    def test_constant_term_only(self, rng):
        slc = make_slice(rng)
        params = BiasFieldParams(coefficients=(0.5,), order=0)
        out = apply_bias_field(slc, params)
        assert np.allclose(out.data, slc.data * np.exp(0.5), atol=1e-12)

    def test_coefficient_count_checked(self):
        with pytest.raises(ParameterError):
            BiasFieldParams(coefficients=(1.0, 2.0), order=3)


# ---------------------------------------------------------------------------
# gamma
# ---------------------------------------------------------------------------

class TestGamma:
    def test_matches_power_law_formula(self, rng):
        image = rng.uniform(10.0, 50.0, size=(9, 9))
        log_gamma = 0.4
        out = apply_gamma(Slice2D(image, (1.0, 1.0)), GammaParams(log_gamma))
        lo, hi = image.min(), image.max()
        expected = ((image - lo) / (hi - lo)) ** np.exp(log_gamma) * (hi - lo) + lo
        assert np.allclose(out.data, expected, atol=1e-12)

    def test_preserves_range(self, rng):
        slc = make_slice(rng)
        out = apply_gamma(slc, GammaParams(log_gamma=-0.3))
        assert out.data.min() == pytest.approx(slc.data.min(), abs=1e-12)
        assert out.data.max() == pytest.approx(slc.data.max(), abs=1e-12)

    def test_monotone_in_input(self, rng):
        slc = make_slice(rng)
        out = apply_gamma(slc, GammaParams(log_gamma=0.25))
        a = slc.data.reshape(-1)
        b = out.data.reshape(-1)
        order = np.argsort(a)
        assert np.all(np.diff(b[order]) >= -1e-12)

    def test_constant_slice_unchanged(self):
        slc = Slice2D(np.full((6, 6), 4.2), (1.0, 1.0))
        out = apply_gamma(slc, GammaParams(log_gamma=0.8))
        assert np.array_equal(out.data, slc.data)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

class TestSamplers:
    def test_same_seed_same_params(self):
        for sampler in [RandomMotion(), RandomGhosting(), RandomBiasField(),
                        RandomGamma()]:
            a = sampler.sample(np.random.default_rng(42))
            b = sampler.sample(np.random.default_rng(42))
            assert a == b

    def test_motion_bounds(self, rng):
        sampler = RandomMotion(num_transforms=3, degrees=5.0, translation=2.0)
        for _ in range(50):
            p = sampler.sample(rng)
            assert p.num_transforms == 3
            assert all(abs(r) <= 5.0 for r in p.rotations)
            assert all(abs(t) <= 2.0 for pair in p.translations for t in pair)
            assert all(0.0 < t < 1.0 for t in p.times)
            assert all(b > a for a, b in zip(p.times, p.times[1:]))
            assert p.axis in (0, 1)

    def test_ghosting_bounds(self, rng):
        sampler = RandomGhosting(num_ghosts=(4, 10), intensity=(0.5, 1.0))
        seen = set()
        for _ in range(200):
            p = sampler.sample(rng)
            assert 4 <= p.num_ghosts <= 10
            assert 0.5 <= p.intensity <= 1.0
            seen.add(p.num_ghosts)
        assert seen == set(range(4, 11))  # inclusive bounds all reachable

    def test_bias_bounds(self, rng):
        sampler = RandomBiasField(order=2, coefficient_range=0.1)
        p = sampler.sample(rng)
        assert len(p.coefficients) == 6
        assert all(abs(c) <= 0.1 for c in p.coefficients)

    def test_gamma_bounds(self, rng):
        sampler = RandomGamma(log_gamma_range=0.2)
        for _ in range(50):
            assert abs(sampler.sample(rng).log_gamma) <= 0.2

    def test_get_params_round_trip(self):
        sampler = RandomMotion(num_transforms=4, degrees=2.0, translation=1.0)
        clone = RandomMotion(**sampler.get_params())
        assert clone.get_params() == sampler.get_params()
