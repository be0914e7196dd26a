"""Metric identities, symmetry, and direct-formula oracles."""

import numpy as np
import pytest

from sinr.metrics import PSNR_CAP, psnr, sam, ssim, uqi


def rng_pair(seed, h=16, w=16, d=3):
    rng = np.random.default_rng(seed)
    return rng.random((h, w, d)), rng.random((h, w, d))


# ---------------------------------------------------------------------------
# psnr
# ---------------------------------------------------------------------------

def test_psnr_identical_capped():
    a, _ = rng_pair(0)
    assert psnr(a, a) == PSNR_CAP


def test_psnr_constant_error():
    a = np.zeros((8, 8, 2))
    b = np.full((8, 8, 2), 0.1)
    np.testing.assert_allclose(psnr(a, b), 20.0, atol=1e-12)


def test_psnr_matches_scalar_loop_oracle():
    a, b = rng_pair(1, h=5, w=4, d=3)
    total = 0.0
    for i in range(5):
        for j in range(4):
            for k in range(3):
                total += (a[i, j, k] - b[i, j, k]) ** 2
    expect = 10.0 * np.log10(1.0 / (total / (5 * 4 * 3)))
    np.testing.assert_allclose(psnr(a, b), expect, atol=1e-10)


def test_psnr_strictly_decreasing_with_noise():
    rng = np.random.default_rng(2)
    a = rng.random((16, 16, 4))
    unit = rng.standard_normal(a.shape)
    values = [psnr(a, a + amp * unit) for amp in (0.01, 0.05, 0.1)]
    assert values[0] > values[1] > values[2]


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))


# ---------------------------------------------------------------------------
# ssim
# ---------------------------------------------------------------------------

def test_ssim_identical_is_one():
    a, _ = rng_pair(3)
    assert abs(ssim(a, a) - 1.0) <= 1e-12


def test_ssim_anticorrelated_binary():
    rng = np.random.default_rng(4)
    a = (rng.random((16, 16, 1)) > 0.5).astype(np.float64)
    assert ssim(a, 1.0 - a) < 0.5


def _ssim_loop_oracle(x, y):
    # direct windowed-statistics evaluation, one window at a time
    size, sigma = 11, 1.5
    r = np.arange(size) - 5.0
    g = np.exp(-(r**2) / (2 * sigma**2))
    win = np.outer(g, g)
    win /= win.sum()
    c1, c2 = 0.01**2, 0.03**2
    h, w = x.shape
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            px = x[i:i + size, j:j + size]
            py = y[i:i + size, j:j + size]
            mx = (win * px).sum()
            my = (win * py).sum()
            vx = (win * px * px).sum() - mx * mx
            vy = (win * py * py).sum() - my * my
            cxy = (win * px * py).sum() - mx * my
            vals.append(
                (2 * mx * my + c1) * (2 * cxy + c2)
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(vals))


def test_ssim_matches_direct_oracle():
    rng = np.random.default_rng(5)
    x = rng.random((16, 16))
    y = np.clip(x + 0.2 * rng.standard_normal((16, 16)), 0, 1)
    got = ssim(x[:, :, None], y[:, :, None])
    np.testing.assert_allclose(got, _ssim_loop_oracle(x, y), atol=1e-8)


def test_ssim_small_image_fallback():
    a, b = rng_pair(6, h=5, w=5, d=2)
    value = ssim(a, b)
    assert -1.0 <= value <= 1.0
    assert abs(ssim(a, a) - 1.0) <= 1e-12


def test_ssim_symmetry():
    a, b = rng_pair(7)
    assert abs(ssim(a, b) - ssim(b, a)) <= 1e-12


# ---------------------------------------------------------------------------
# sam
# ---------------------------------------------------------------------------

def test_sam_identical_is_zero():
    a, _ = rng_pair(8)
    assert abs(sam(a, a)) <= 1e-12


def test_sam_scale_invariance_per_pixel():
    rng = np.random.default_rng(9)
    a = rng.random((8, 8, 5)) + 0.1
    scale = rng.uniform(0.5, 5.0, size=(8, 8))
    b = a * scale[:, :, None]
    assert abs(sam(a, b)) <= 1e-12


def test_sam_orthogonal_spectra():
    a = np.zeros((4, 4, 2))
    b = np.zeros((4, 4, 2))
    a[:, :, 0] = 1.0
    b[:, :, 1] = 1.0
    np.testing.assert_allclose(sam(a, b), np.pi / 2, atol=1e-12)


def test_sam_skips_zero_norm_pixels():
    a = np.zeros((2, 2, 3))
    b = np.zeros((2, 2, 3))
    a[0, 0] = [1.0, 0.0, 0.0]
    b[0, 0] = [1.0, 0.0, 0.0]
    value, skipped = sam(a, b, with_count=True)
    assert value == 0.0
    assert skipped == 3


def test_sam_matches_arccos_for_moderate_angles():
    rng = np.random.default_rng(10)
    a = rng.random((6, 6, 4)) + 0.05
    b = rng.random((6, 6, 4)) + 0.05
    sa = a.reshape(-1, 4)
    sb = b.reshape(-1, 4)
    cosines = np.sum(sa * sb, axis=1) / (
        np.linalg.norm(sa, axis=1) * np.linalg.norm(sb, axis=1)
    )
    expect = float(np.mean(np.arccos(np.clip(cosines, -1, 1))))
    np.testing.assert_allclose(sam(a, b), expect, atol=1e-10)


def test_sam_symmetry():
    a, b = rng_pair(11)
    assert abs(sam(a, b) - sam(b, a)) <= 1e-12


# ---------------------------------------------------------------------------
# uqi
# ---------------------------------------------------------------------------

def test_uqi_identical_is_one():
    a, _ = rng_pair(12)
    assert abs(uqi(a, a) - 1.0) <= 1e-12


def test_uqi_constant_identical_degenerate():
    a = np.full((16, 16, 2), 0.4)
    assert abs(uqi(a, a) - 1.0) <= 1e-12


def test_uqi_mean_shift_below_one():
    rng = np.random.default_rng(13)
    a = rng.random((16, 16, 1))
    assert uqi(a, a + 0.3) < 1.0


def _uqi_loop_oracle(x, y):
    size = 8
    h, w = x.shape
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            px = x[i:i + size, j:j + size].ravel()
            py = y[i:i + size, j:j + size].ravel()
            mx, my = px.mean(), py.mean()
            vx = px.var(ddof=1)
            vy = py.var(ddof=1)
            cxy = ((px - mx) * (py - my)).sum() / (len(px) - 1)
            den = (vx + vy) * (mx * mx + my * my)
            if den != 0.0:
                vals.append(4 * cxy * mx * my / den)
            elif np.array_equal(px, py):
                vals.append(1.0)
    return float(np.mean(vals))


def test_uqi_matches_direct_oracle():
    rng = np.random.default_rng(14)
    x = rng.random((16, 16))
    y = np.clip(x + 0.1 * rng.standard_normal((16, 16)), 0, 1)
    np.testing.assert_allclose(
        uqi(x[:, :, None], y[:, :, None]), _uqi_loop_oracle(x, y), atol=1e-8
    )


def test_uqi_small_image_fallback():
    a, b = rng_pair(15, h=5, w=5, d=2)
    assert -1.0 <= uqi(a, b) <= 1.0
    assert abs(uqi(a, a) - 1.0) <= 1e-12


def test_uqi_symmetry():
    a, b = rng_pair(16)
    assert abs(uqi(a, b) - uqi(b, a)) <= 1e-12
