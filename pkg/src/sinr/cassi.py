"""Compressive snapshot imaging forward model and its exact adjoint.

A scene cube is masked by a binary coded aperture, each band is sheared
sideways by a dispersion step, and the detector integrates over bands
into a single 2-D measurement. The adjoint reverses the shear per band
and re-applies the mask; the model input initializer crops each band's
detector window and masks it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mask",
    "HsiCube",
    "Measurement",
    "make_mask",
    "modulate",
    "shear",
    "integrate",
    "forward_cassi",
    "adjoint_cassi",
    "init_input",
]

DEFAULT_SHIFT_STEP = 2


@dataclass(frozen=True)
class Mask:
    """Binary coded aperture over the scene's spatial extent."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {v.shape}")
        if not np.all((v == 0.0) | (v == 1.0)):
            raise ValueError("mask entries must be exactly 0 or 1")
        if not np.any(v):
            raise ValueError("mask must contain at least one open pixel")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class HsiCube:
    """Dense H x W x D radiance cube with its wavelength grid (nm)."""

    data: np.ndarray
    wavelengths: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        if d.ndim != 3:
            raise ValueError(f"cube data must be H x W x D, got shape {d.shape}")
        if wl.ndim != 1 or len(wl) != d.shape[2]:
            raise ValueError("wavelength grid length must match band count")
        if len(wl) > 1 and not np.all(np.diff(wl) > 0):
            raise ValueError("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(d)):
            raise ValueError("cube values must be finite")
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "wavelengths", wl)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def bands(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Measurement:
    """Detector image of width W + d*(D-1) for a W-wide, D-band scene."""

    data: np.ndarray
    shift_step: int

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError(f"measurement must be 2-D, got shape {d.shape}")
        if self.shift_step < 0:
            raise ValueError("shift step must be non-negative")
        object.__setattr__(self, "data", d)

    def scene_width(self, bands: int) -> int:
        w = self.data.shape[1] - self.shift_step * (bands - 1)
        if w < 1:
            raise ValueError(
                f"measurement width {self.data.shape[1]} too small for "
                f"{bands} bands at shift step {self.shift_step}"
            )
        return w


def make_mask(height: int, width: int, seed: int) -> Mask:
    """Seeded i.i.d. Bernoulli(0.5) coded aperture."""
    rng = np.random.default_rng(seed)
    values = rng.integers(0, 2, size=(height, width)).astype(np.float64)
    if not values.any():
        values[0, 0] = 1.0  # only reachable for tiny masks
    return Mask(values)


def modulate(cube: HsiCube, mask: Mask) -> HsiCube:
    """Apply the coded aperture to every band."""
    if mask.shape != cube.data.shape[:2]:
        raise ValueError(
            f"mask shape {mask.shape} != cube spatial shape {cube.data.shape[:2]}"
        )
    return HsiCube(cube.data * mask.values[:, :, None], cube.wavelengths)


def shear(cube: HsiCube, d: int) -> np.ndarray:
    """Embed band n at column offset d*n; vacated columns are zero.

    The first band is the dispersion reference, so offsets grow linearly
    with the band index. Output is H x (W + d*(D-1)) x D.
    """
    if d < 0:
        raise ValueError("shift step must be non-negative")
    h, w, nb = cube.data.shape
    out = np.zeros((h, w + d * (nb - 1), nb))
    for n in range(nb):
        out[:, d * n:d * n + w, n] = cube.data[:, :, n]
    return out


def integrate(sheared: np.ndarray) -> np.ndarray:
    """Detector summation over bands."""
    return sheared.sum(axis=2)


def forward_cassi(cube: HsiCube, mask: Mask, d: int = DEFAULT_SHIFT_STEP) -> Measurement:
    """Mask, shear, and integrate a cube into one detector image."""
    return Measurement(integrate(shear(modulate(cube, mask), d)), d)


def adjoint_cassi(y: Measurement, mask: Mask, bands: int,
                  wavelengths: np.ndarray | None = None) -> HsiCube:
    """Exact adjoint of :func:`forward_cassi` for a given band count."""
    d = y.shift_step
    h, wide = y.data.shape
    w = y.scene_width(bands)
    if mask.shape != (h, w):
        raise ValueError(f"mask shape {mask.shape} incompatible with ({h}, {w})")
    out = np.empty((h, w, bands))
    for n in range(bands):
        out[:, :, n] = y.data[:, d * n:d * n + w] * mask.values
    if wavelengths is None:
        wavelengths = np.arange(bands, dtype=np.float64)
    return HsiCube(out, wavelengths)


def init_input(y: Measurement, mask: Mask, bands: int,
               wavelengths: np.ndarray | None = None) -> HsiCube:
    """Reverse the dispersion to build the reconstruction input.

    Each band's detector window is cropped back to the scene frame and
    re-masked, yielding an H x W x D cube.
    """
    return adjoint_cassi(y, mask, bands, wavelengths)
