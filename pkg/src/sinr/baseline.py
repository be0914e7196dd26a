"""Fixed-interpolation baseline: encoder plus linear spectral resampling.

The encoder's latent field is projected to one scalar per voxel and the
resulting cube is linearly interpolated along the spectral axis to the
requested band count. Spatial size never changes in this task, so the
volumetric interpolation degenerates to per-pixel 1-D interpolation
over bands; recorded here so comparisons against the implicit head stay
honest about what the baseline actually computes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .encoder import (
    DEFAULT_BLOCKS,
    DEFAULT_CHANNELS,
    EncoderParams,
    encode,
    init_encoder_params,
)
from .model import make_coords

__all__ = ["TrilinearParams", "init_trilinear_params", "trilinear_reconstruct"]


@dataclass(frozen=True)
class TrilinearParams:
    encoder: EncoderParams
    head_w: np.ndarray
    head_b: np.ndarray


def init_trilinear_params(
    rng: np.random.Generator,
    channels: int = DEFAULT_CHANNELS,
    blocks: int = DEFAULT_BLOCKS,
) -> TrilinearParams:
    bound = np.sqrt(6.0 / channels)
    return TrilinearParams(
        encoder=init_encoder_params(rng, channels=channels, blocks=blocks),
        head_w=rng.uniform(-bound, bound, size=(channels, 1)),
        head_b=np.zeros(1),
    )


def trilinear_reconstruct(
    fy: ad.Tensor | np.ndarray,
    p: TrilinearParams,
    bands_out: int,
    tape: ad.Tape | None = None,
) -> ad.Tensor:
    """Project latents to a cube, then lerp it to `bands_out` bands.

    At matching band counts the interpolation stage is an exact
    identity, so the output equals the projected encoder field.
    """
    if isinstance(fy, np.ndarray):
        if tape is None:
            raise ValueError("a tape is required when fy is a raw array")
        fy = tape.constant(fy)
    h, w, d_in = fy.shape
    z = encode(fy, p.encoder)
    field = ad.linear(z, p.head_w, p.head_b)
    out = ad.interp_linear_spectral(field, make_coords(bands_out).values)
    return ad.reshape(out, (h, w, bands_out))
