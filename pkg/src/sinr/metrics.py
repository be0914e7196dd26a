"""Image quality metrics for radiance cubes.

PSNR over the whole cube, per-band windowed SSIM and UQI, and the mean
per-pixel spectral angle. All four accept two cubes of identical shape
and return plain floats; inputs may be HsiCube instances or raw arrays.
"""

from __future__ import annotations

import numpy as np

from .cassi import HsiCube

__all__ = ["psnr", "ssim", "sam", "uqi", "PSNR_CAP"]

PSNR_CAP = 100.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
UQI_WINDOW = 8


def _data(x) -> np.ndarray:
    arr = x.data if isinstance(x, HsiCube) else np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"metrics expect H x W x D data, got shape {arr.shape}")
    return arr


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = _data(a), _data(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE) over the whole cube, capped at 100 dB."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_band(x: np.ndarray, y: np.ndarray, c1: float, c2: float) -> float:
    h, w = x.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        # global-statistics fallback for small images
        mx, my = x.mean(), y.mean()
        vx, vy = x.var(), y.var()
        cxy = ((x - mx) * (y - my)).mean()
        return float(
            (2 * mx * my + c1) * (2 * cxy + c2)
            / ((mx * mx + my * my + c1) * (vx + vy + c2))
        )
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    from numpy.lib.stride_tricks import sliding_window_view

    wx = sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW))
    wy = sliding_window_view(y, (SSIM_WINDOW, SSIM_WINDOW))
    mx = np.tensordot(wx, win, axes=([2, 3], [0, 1]))
    my = np.tensordot(wy, win, axes=([2, 3], [0, 1]))
    mxx = np.tensordot(wx * wx, win, axes=([2, 3], [0, 1]))
    myy = np.tensordot(wy * wy, win, axes=([2, 3], [0, 1]))
    mxy = np.tensordot(wx * wy, win, axes=([2, 3], [0, 1]))
    vx = mxx - mx * mx
    vy = myy - my * my
    cxy = mxy - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def ssim(a, b, peak: float = 1.0) -> float:
    """Mean windowed structural similarity over bands.

    11x11 Gaussian window (sigma 1.5), stability constants K1=0.01 and
    K2=0.03 on the given dynamic range.
    """
    a, b = _pair(a, b)
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    return float(np.mean([
        _ssim_band(a[:, :, n], b[:, :, n], c1, c2) for n in range(a.shape[2])
    ]))


def sam(a, b, with_count: bool = False):
    """Mean spectral angle (radians) between per-pixel spectra.

    Pixels whose spectrum has zero norm in either cube are skipped;
    `with_count=True` also returns how many were skipped. The angle is
    evaluated as 2*atan2(|u - v|, |u + v|) on unit spectra, which is the
    arccos of the normalized inner product computed in a form that stays
    exact for identical and positively rescaled spectra.
    """
    a, b = _pair(a, b)
    sa = a.reshape(-1, a.shape[2])
    sb = b.reshape(-1, b.shape[2])
    na = np.linalg.norm(sa, axis=1)
    nb = np.linalg.norm(sb, axis=1)
    valid = (na > 0.0) & (nb > 0.0)
    skipped = int(np.count_nonzero(~valid))
    if not np.any(valid):
        return (0.0, skipped) if with_count else 0.0
    ua = sa[valid] / na[valid, None]
    ub = sb[valid] / nb[valid, None]
    diff = np.linalg.norm(ua - ub, axis=1)
    summ = np.linalg.norm(ua + ub, axis=1)
    angles = 2.0 * np.arctan2(diff, summ)
    mean = float(np.mean(angles))
    return (mean, skipped) if with_count else mean


def _uqi_band(x: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    """Sum of per-window quality values and the number of valid windows."""
    h, w = x.shape
    if h < UQI_WINDOW or w < UQI_WINDOW:
        windows_x = x.reshape(1, 1, h, w)
        windows_y = y.reshape(1, 1, h, w)
        n = h * w
    else:
        from numpy.lib.stride_tricks import sliding_window_view

        windows_x = sliding_window_view(x, (UQI_WINDOW, UQI_WINDOW))
        windows_y = sliding_window_view(y, (UQI_WINDOW, UQI_WINDOW))
        n = UQI_WINDOW * UQI_WINDOW
    mx = windows_x.mean(axis=(2, 3))
    my = windows_y.mean(axis=(2, 3))
    dx = windows_x - mx[:, :, None, None]
    dy = windows_y - my[:, :, None, None]
    vx = (dx * dx).sum(axis=(2, 3)) / (n - 1)
    vy = (dy * dy).sum(axis=(2, 3)) / (n - 1)
    cxy = (dx * dy).sum(axis=(2, 3)) / (n - 1)
    den = (vx + vy) * (mx * mx + my * my)
    total = 0.0
    count = 0
    it = np.nditer(den, flags=["multi_index"])
    for d in it:
        i, j = it.multi_index
        if d != 0.0:
            total += 4.0 * cxy[i, j] * mx[i, j] * my[i, j] / float(d)
            count += 1
        elif np.array_equal(windows_x[i, j], windows_y[i, j]):
            # degenerate but identical windows count as perfect quality
            total += 1.0
            count += 1
    return total, count


def uqi(a, b) -> float:
    """Universal quality index over 8x8 sliding windows, mean over bands.

    Degenerate windows (zero combined variance or zero mean energy)
    contribute 1 when the two windows are identical and are skipped
    otherwise.
    """
    a, b = _pair(a, b)
    values = []
    for band in range(a.shape[2]):
        total, count = _uqi_band(a[:, :, band], b[:, :, band])
        if count:
            values.append(total / count)
    return float(np.mean(values)) if values else 1.0
