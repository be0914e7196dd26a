"""Synthetic scenes, augmentation, and supervision sampling.

Scenes are continuous functions of (row, col, wavelength): a sum of
spatial Gaussian blobs, each carrying a spectral profile that is itself
a small Gaussian mixture. Because the scene is analytic it can be
rendered at any band count, which is what makes out-of-scale ground
truth possible. Rendering is deterministic per (scene, size, bands).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cassi import HsiCube

__all__ = [
    "SpectralPeak",
    "Blob",
    "SceneSpec",
    "wavelength_grid",
    "render_scene",
    "random_scene",
    "make_dataset",
    "augment",
    "sample_bands",
]

LAMBDA_MIN = 450.0
LAMBDA_MAX = 650.0


@dataclass(frozen=True)
class SpectralPeak:
    """One Gaussian component of a blob's emission spectrum."""

    center_nm: float
    width_nm: float
    weight: float


@dataclass(frozen=True)
class Blob:
    """Spatial Gaussian footprint with its spectral profile."""

    row: float
    col: float
    radius: float
    amplitude: float
    peaks: tuple[SpectralPeak, ...]


@dataclass(frozen=True)
class SceneSpec:
    """Analytic scene: renderable at any spatial size and band count."""

    seed: int
    blobs: tuple[Blob, ...]
    lambda_min: float = LAMBDA_MIN
    lambda_max: float = LAMBDA_MAX


def wavelength_grid(lam_min: float, lam_max: float, bands: int) -> np.ndarray:
    """Cell-centered wavelengths: lam_min + (k + 0.5) * span / bands."""
    step = (lam_max - lam_min) / bands
    return lam_min + (np.arange(bands) + 0.5) * step


def render_scene(spec: SceneSpec, height: int, width: int, bands: int) -> HsiCube:
    """Evaluate the scene on a pixel grid at `bands` wavelengths.

    Radiance is clipped to [0, 1] and rounded to the float32 grid so
    rendered cubes survive container round-trips bit-exactly.
    """
    wl = wavelength_grid(spec.lambda_min, spec.lambda_max, bands)
    data = np.zeros((height, width, bands))
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]
    for blob in spec.blobs:
        footprint = blob.amplitude * np.exp(
            -((rows - blob.row) ** 2 + (cols - blob.col) ** 2)
            / (2.0 * blob.radius**2)
        )
        profile = np.zeros(bands)
        for peak in blob.peaks:
            profile += peak.weight * np.exp(
                -((wl - peak.center_nm) ** 2) / (2.0 * peak.width_nm**2)
            )
        data += footprint[:, :, None] * profile[None, None, :]
    data = np.clip(data, 0.0, 1.0)
    data = data.astype(np.float32).astype(np.float64)
    return HsiCube(data, wl)


def render_scene_at(spec: SceneSpec, row: int, col: int, wavelength: float) -> float:
    """Single-point analytic evaluation; the oracle for render_scene."""
    total = 0.0
    for blob in spec.blobs:
        footprint = blob.amplitude * np.exp(
            -((row - blob.row) ** 2 + (col - blob.col) ** 2)
            / (2.0 * blob.radius**2)
        )
        profile = 0.0
        for peak in blob.peaks:
            profile += peak.weight * np.exp(
                -((wavelength - peak.center_nm) ** 2) / (2.0 * peak.width_nm**2)
            )
        total += footprint * profile
    return float(np.float32(min(max(total, 0.0), 1.0)))


def random_scene(seed: int, height: int = 16, width: int = 16) -> SceneSpec:
    """Draw a scene with a few blobs mixing broad and narrow spectra.

    Narrow spectral peaks are deliberately under-resolved at coarse band
    counts, so finer renderings carry genuinely new information.
    """
    rng = np.random.default_rng(seed)
    blobs = []
    for _ in range(int(rng.integers(2, 5))):
        peaks = []
        for _ in range(int(rng.integers(1, 4))):
            peaks.append(
                SpectralPeak(
                    center_nm=float(rng.uniform(LAMBDA_MIN + 10, LAMBDA_MAX - 10)),
                    width_nm=float(rng.uniform(8.0, 55.0)),
                    weight=float(rng.uniform(0.3, 1.0)),
                )
            )
        blobs.append(
            Blob(
                row=float(rng.uniform(0, height - 1)),
                col=float(rng.uniform(0, width - 1)),
                radius=float(rng.uniform(1.5, max(height, width) * 0.45)),
                amplitude=float(rng.uniform(0.4, 1.0)),
                peaks=tuple(peaks),
            )
        )
    return SceneSpec(seed=seed, blobs=tuple(blobs))


def make_dataset(
    seed: int,
    n_train: int = 64,
    n_test: int = 16,
    height: int = 16,
    width: int = 16,
) -> tuple[list[SceneSpec], list[SceneSpec]]:
    """Derive per-scene seeds from one master seed."""
    root = np.random.default_rng(seed)
    scene_seeds = root.integers(0, 1 << 62, size=n_train + n_test)
    scenes = [random_scene(int(s), height, width) for s in scene_seeds]
    return scenes[:n_train], scenes[n_train:]


def augment(cube: HsiCube, rng: np.random.Generator) -> HsiCube:
    """Random flips and a 90-degree rotation; bands are untouched.

    Rotation is skipped for non-square patches. Draws happen in a fixed
    order (hflip, vflip, rotation) so a seeded generator reproduces the
    same augmentation stream.
    """
    data = cube.data
    hflip = rng.random() < 0.5
    vflip = rng.random() < 0.5
    quarter_turns = int(rng.integers(0, 4))
    if hflip:
        data = data[:, ::-1, :]
    if vflip:
        data = data[::-1, :, :]
    if quarter_turns and data.shape[0] == data.shape[1]:
        data = np.rot90(data, k=quarter_turns, axes=(0, 1))
    return HsiCube(np.ascontiguousarray(data), cube.wavelengths)


def sample_bands(bands: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform subset of band indices supervised by the loss."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    count = max(1, int(round(fraction * bands)))
    if count >= bands:
        return np.arange(bands)
    return np.sort(rng.choice(bands, size=count, replace=False))
