"""Convolutional encoder producing per-voxel latent codes.

A lift convolution takes the single-channel initialized cube to C
feature channels, a stack of residual blocks refines them spatially,
and a per-pixel linear layer over each band's 3-band spectral
neighborhood mixes inter-band context into every latent code. Spatial
and spectral extents are preserved throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

__all__ = ["ResBlockParams", "EncoderParams", "init_encoder_params", "encode"]

DEFAULT_CHANNELS = 16
DEFAULT_BLOCKS = 2


@dataclass(frozen=True)
class ResBlockParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass(frozen=True)
class EncoderParams:
    lift_w: np.ndarray
    lift_b: np.ndarray
    blocks: tuple[ResBlockParams, ...]
    mix_w: np.ndarray
    mix_b: np.ndarray

    @property
    def channels(self) -> int:
        return self.lift_w.shape[3]


def _he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_encoder_params(
    rng: np.random.Generator,
    channels: int = DEFAULT_CHANNELS,
    blocks: int = DEFAULT_BLOCKS,
) -> EncoderParams:
    if channels < 1 or blocks < 1:
        raise ValueError("encoder needs at least one channel and one block")
    c = channels
    res = tuple(
        ResBlockParams(
            w1=_he_uniform(rng, (3, 3, c, c), 9 * c),
            b1=np.zeros(c),
            w2=_he_uniform(rng, (3, 3, c, c), 9 * c),
            b2=np.zeros(c),
        )
        for _ in range(blocks)
    )
    return EncoderParams(
        lift_w=_he_uniform(rng, (3, 3, 1, c), 9),
        lift_b=np.zeros(c),
        blocks=res,
        mix_w=_he_uniform(rng, (3 * c, c), 3 * c),
        mix_b=np.zeros(c),
    )


def encode(x: ad.Tensor, p: EncoderParams) -> ad.Tensor:
    """Map an [H, W, D] cube tensor to [H, W, D, C] latent codes."""
    h, w, d = x.shape
    z = ad.conv_spatial(ad.reshape(x, (h, w, d, 1)), p.lift_w, p.lift_b)
    for blk in p.blocks:
        y = ad.conv_spatial(z, blk.w1, blk.b1)
        y = ad.conv_spatial(ad.relu(y), blk.w2, blk.b2)
        z = ad.add(z, y)
    return ad.linear(ad.spectral_neighbors(z), p.mix_w, p.mix_b)
