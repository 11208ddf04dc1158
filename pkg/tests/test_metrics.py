"""PSNR/SSIM image metrics and the evaluation report."""
import numpy as np
import pytest

from scenefactory.core import ImageBuffer
from scenefactory.errors import DimensionMismatch
from scenefactory.metrics import PSNR_CAP_DB, EvalReport, psnr, ssim


def gradient_image(h=64, w=64):
    u, v = np.meshgrid(np.linspace(0, 1, w), np.linspace(0, 1, h))
    return ImageBuffer(np.stack([u, v, 0.5 * (u + v)], axis=-1))


def img(arr):
    return ImageBuffer(np.asarray(arr, dtype=np.float32))


class TestPsnr:
    def test_known_value(self):
        """Uniform 0.1 error -> MSE 0.01 -> exactly 20 dB."""
        a = img(np.zeros((32, 32, 3)))
        b = img(np.full((32, 32, 3), 0.1))
        assert abs(psnr(a, b) - 20.0) < 1e-6

    def test_identical_images_hit_cap(self):
        image = gradient_image()
        assert psnr(image, image) == PSNR_CAP_DB

    def test_monotone_in_noise(self):
        rng = np.random.default_rng(0)
        base = gradient_image()
        values = []
        for sigma in (0.01, 0.02, 0.05, 0.1):
            noisy = img(np.clip(
                base.pixels + rng.normal(0, sigma, base.pixels.shape), 0, 1))
            values.append(psnr(base, noisy))
        assert values == sorted(values, reverse=True)

    def test_symmetric(self):
        a = gradient_image()
        rng = np.random.default_rng(1)
        b = img(np.clip(a.pixels + rng.normal(0, 0.05, a.pixels.shape), 0, 1))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionMismatch):
            psnr(img(np.zeros((4, 4, 3))), img(np.zeros((4, 5, 3))))


class TestSsim:
    def test_identical_images(self):
        image = gradient_image()
        assert ssim(image, image) == pytest.approx(1.0, abs=1e-9)

    def test_bounded_and_low_for_noise(self):
        rng = np.random.default_rng(2)
        a = img(rng.uniform(0, 1, (48, 48, 3)))
        b = img(rng.uniform(0, 1, (48, 48, 3)))
        s = ssim(a, b)
        assert -1.0 <= s <= 1.0
        assert s < 0.5  # unrelated noise images barely correlate

    def test_monotone_in_noise(self):
        rng = np.random.default_rng(3)
        base = gradient_image()
        values = []
        for sigma in (0.02, 0.05, 0.1, 0.2):
            noisy = img(np.clip(
                base.pixels + rng.normal(0, sigma, base.pixels.shape), 0, 1))
            values.append(ssim(base, noisy))
        assert values == sorted(values, reverse=True)

    def test_constant_shift_penalized_less_than_noise(self):
        """A small uniform brightness shift preserves structure; noise of
        the same MSE does not."""
        rng = np.random.default_rng(4)
        base = gradient_image().pixels * 0.8
        shifted = img(base + 0.05)
        noisy = img(np.clip(
            base + rng.choice([-0.05, 0.05], base.shape), 0, 1))
        assert ssim(img(base), shifted) > ssim(img(base), noisy)

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionMismatch):
            ssim(img(np.zeros((8, 8, 3))), img(np.zeros((8, 9, 3))))


class TestEvalReport:
    def test_means(self):
        r = EvalReport()
        a = gradient_image()
        r.add_view(a, a)
        assert r.mean_psnr == PSNR_CAP_DB
        assert r.mean_ssim == pytest.approx(1.0, abs=1e-9)

    def test_empty_means_are_zero(self):
        r = EvalReport()
        assert r.mean_psnr == 0.0 and r.mean_ssim == 0.0

    def test_json_document(self):
        r = EvalReport()
        a = gradient_image()
        r.add_view(a, a)
        r.chamfer = 0.01
        r.stage_seconds["train"] = 12.5
        doc = r.to_json()
        assert doc["view_psnr"] == [PSNR_CAP_DB]
        assert doc["mean_psnr"] == PSNR_CAP_DB
        assert doc["chamfer"] == 0.01
        assert doc["stage_seconds"]["train"] == 12.5
