"""Spectral implicit head: attention, coordinate encoding, and decoding.

The head queries a continuous spectral signal: latent codes are
resampled to the requested band coordinates, spectral-wise attention
mixes information across all bands (each band is one token), and a
per-query MLP decodes latent features, the raw coordinate, its
sinusoidal lifting, and the magnification ratio into radiance.
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

__all__ = [
    "SpectralCoords",
    "make_coords",
    "SwaParams",
    "FceParams",
    "RhParams",
    "SinrParams",
    "init_sinr_params",
    "init_fce_omegas",
    "rh_input_dim",
    "swa_forward",
    "fce_forward",
    "sinr_forward",
]

RH_WIDTH = 256
DEFAULT_FCE_DIM = 12
FCE_INIT_MODES = ("literal", "pow2")


@dataclass(frozen=True)
class SpectralCoords:
    """Strictly increasing band coordinates normalized to [-1, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if len(v) == 0:
            raise ValueError("coordinate grid must be non-empty")
        if len(v) > 1 and not np.all(np.diff(v) > 0):
            raise ValueError("coordinates must be strictly increasing")
        if v[0] < -1.0 or v[-1] > 1.0:
            raise ValueError("coordinates must lie in [-1, 1]")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


def make_coords(bands: int) -> SpectralCoords:
    """Cell-centered grid on [-1, 1]: x_k = -1 + (2k + 1) / bands."""
    if bands < 1:
        raise ValueError("band count must be positive")
    return SpectralCoords(-1.0 + (2.0 * np.arange(bands) + 1.0) / bands)


@dataclass(frozen=True)
class SwaParams:
    """Per-channel attention over bands plus a band-order encoder.

    sigma is stored as log(sigma) so the attention temperature stays
    positive under unconstrained updates.
    """

    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    log_sigma: np.ndarray
    pos_lin_w: np.ndarray
    pos_lin_b: np.ndarray
    pos_conv1_w: np.ndarray
    pos_conv1_b: np.ndarray
    pos_conv2_w: np.ndarray
    pos_conv2_b: np.ndarray


@dataclass(frozen=True)
class FceParams:
    """Trainable frequencies of the sinusoidal coordinate lifting."""

    omegas: np.ndarray


@dataclass(frozen=True)
class RhParams:
    """Three affine layers decoding each query to one intensity."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray


@dataclass(frozen=True)
class SinrParams:
    encoder: EncoderParams
    swa: SwaParams
    fce: FceParams
    rh: RhParams
    use_swa: bool = True
    use_fce: bool = True
    use_sf: bool = True

    @property
    def fce_dim(self) -> int:
        return self.fce.omegas.shape[0]


def rh_input_dim(channels: int, fce_dim: int, use_fce: bool, use_sf: bool) -> int:
    """Latent channels + raw coordinate + lifted coordinate + scale."""
    return channels + 1 + (2 * fce_dim if use_fce else 0) + (1 if use_sf else 0)


def init_fce_omegas(fce_dim: int, mode: str = "literal") -> np.ndarray:
    """Initial frequencies: 2*e^i, or pi*2^i with --fce-init pow2."""
    if mode not in FCE_INIT_MODES:
        raise ValueError(f"unknown fce init {mode!r}, expected one of {FCE_INIT_MODES}")
    i = np.arange(1, fce_dim + 1, dtype=np.float64)
    if mode == "literal":
        return 2.0 * np.exp(i)
    return np.pi * 2.0**i


def _he_uniform(rng, shape, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_sinr_params(
    rng: np.random.Generator,
    channels: int = DEFAULT_CHANNELS,
    blocks: int = DEFAULT_BLOCKS,
    fce_dim: int = DEFAULT_FCE_DIM,
    fce_init: str = "literal",
    use_swa: bool = True,
    use_fce: bool = True,
    use_sf: bool = True,
) -> SinrParams:
    c = channels
    swa = SwaParams(
        wq=_he_uniform(rng, (c, c), c),
        bq=np.zeros(c),
        wk=_he_uniform(rng, (c, c), c),
        bk=np.zeros(c),
        wv=_he_uniform(rng, (c, c), c),
        bv=np.zeros(c),
        log_sigma=np.array([-0.5 * np.log(c)]),
        pos_lin_w=_he_uniform(rng, (c, c), c),
        pos_lin_b=np.zeros(c),
        pos_conv1_w=_he_uniform(rng, (3, 3, c, c), 9 * c),
        pos_conv1_b=np.zeros(c),
        pos_conv2_w=_he_uniform(rng, (3, 3, c, c), 9 * c),
        pos_conv2_b=np.zeros(c),
    )
    cin = rh_input_dim(c, fce_dim if use_fce else 0, use_fce, use_sf)
    rh = RhParams(
        w1=_he_uniform(rng, (cin, RH_WIDTH), cin),
        b1=np.zeros(RH_WIDTH),
        w2=_he_uniform(rng, (RH_WIDTH, RH_WIDTH), RH_WIDTH),
        b2=np.zeros(RH_WIDTH),
        w3=_he_uniform(rng, (RH_WIDTH, 1), RH_WIDTH),
        b3=np.zeros(1),
    )
    return SinrParams(
        encoder=init_encoder_params(rng, channels=c, blocks=blocks),
        swa=swa,
        fce=FceParams(omegas=init_fce_omegas(fce_dim if use_fce else 0, fce_init)),
        rh=rh,
        use_swa=use_swa,
        use_fce=use_fce,
        use_sf=use_sf,
    )


def _band_order_encoding(v: ad.Tensor, p: SwaParams) -> ad.Tensor:
    """Positional term added to the attention output.

    The band axis is folded into the column axis before the shared 3x3
    kernels run, so every band is convolved together with its spectral
    neighbors; that is what injects band-order information (and is why
    this term is not permutation-equivariant across bands).
    """
    h, w, d, c = v.shape
    y = ad.linear(v, p.pos_lin_w, p.pos_lin_b)
    y = ad.reshape(y, (h, w * d, 1, c))
    y = ad.conv_spatial(y, p.pos_conv1_w, p.pos_conv1_b)
    y = ad.conv_spatial(ad.relu(y), p.pos_conv2_w, p.pos_conv2_b)
    return ad.reshape(y, (h, w, d, c))


def swa_forward(z_hr: ad.Tensor, p: SwaParams, use_pos: bool = True) -> ad.Tensor:
    """Attention across bands with each channel vector as one token.

    Queries and keys come from the spatially pooled field; values keep
    full spatial resolution. Each query row of the attention map sums
    to one over the key bands.
    """
    h, w, d, c = z_hr.shape
    pooled = ad.reshape(ad.avg_pool_spatial(z_hr), (d, c))
    q = ad.linear(pooled, p.wq, p.bq)
    k = ad.linear(pooled, p.wk, p.bk)
    v = ad.linear(z_hr, p.wv, p.bv)
    sigma = ad.exp(p.log_sigma)
    weights = ad.softmax(ad.mul(ad.matmul(q, ad.permute(k, (1, 0))), sigma), axis=1)
    vm = ad.reshape(ad.permute(v, (2, 0, 1, 3)), (d, h * w * c))
    mixed = ad.reshape(ad.matmul(weights, vm), (d, h, w, c))
    out = ad.permute(mixed, (1, 2, 0, 3))
    if use_pos:
        out = ad.add(out, _band_order_encoding(v, p))
    return out


def attention_weights(z_hr: ad.Tensor, p: SwaParams) -> ad.Tensor:
    """The band-by-band attention map alone (rows sum to one)."""
    d, c = z_hr.shape[2], z_hr.shape[3]
    pooled = ad.reshape(ad.avg_pool_spatial(z_hr), (d, c))
    q = ad.linear(pooled, p.wq, p.bq)
    k = ad.linear(pooled, p.wk, p.bk)
    sigma = ad.exp(p.log_sigma)
    return ad.softmax(ad.mul(ad.matmul(q, ad.permute(k, (1, 0))), sigma), axis=1)


def fce_forward(coords: SpectralCoords, omegas: ad.Tensor) -> ad.Tensor:
    """Lift each coordinate to interleaved (cos, sin) pairs.

    Output row k is [cos(w_1 x_k), sin(w_1 x_k), ..., cos(w_L x_k),
    sin(w_L x_k)], one column pair per frequency; differentiable in the
    frequencies.
    """
    tape = omegas.tape
    if tape is None:
        raise ValueError("omegas must be bound to a tape")
    d = len(coords)
    n_freq = omegas.shape[0]
    phase = ad.outer(tape.constant(coords.values), omegas)
    c = ad.reshape(ad.cos(phase), (d, n_freq, 1))
    s = ad.reshape(ad.sin(phase), (d, n_freq, 1))
    return ad.reshape(ad.concat([c, s], axis=2), (d, 2 * n_freq))


def sinr_forward(
    fy: ad.Tensor | np.ndarray,
    p: SinrParams,
    bands_out: int,
    tape: ad.Tape | None = None,
) -> ad.Tensor:
    """Reconstruct an [H, W, D'] cube from an [H, W, D] initialized input.

    `p` must already be bound to the active tape (see params.bind); raw
    array inputs are attached as constants.
    """
    if isinstance(fy, np.ndarray):
        if tape is None:
            raise ValueError("a tape is required when fy is a raw array")
        fy = tape.constant(fy)
    h, w, d_in = fy.shape
    z = encode(fy, p.encoder)
    coords = make_coords(bands_out)
    z_hr = ad.interp_linear_spectral(z, coords.values)
    a_out = swa_forward(z_hr, p.swa) if p.use_swa else z_hr

    active = fy.tape
    feats = [a_out]
    coord_col = np.broadcast_to(
        coords.values[None, None, :, None], (h, w, bands_out, 1)
    ).copy()
    feats.append(active.constant(coord_col))
    if p.use_fce:
        gamma = fce_forward(coords, p.fce.omegas)
        feats.append(ad.tile_leading(gamma, (h, w)))
    if p.use_sf:
        scale = float(bands_out) / float(d_in)
        feats.append(active.constant(np.full((h, w, bands_out, 1), scale)))
    query = ad.concat(feats, axis=3)

    hidden = ad.relu(ad.linear(query, p.rh.w1, p.rh.b1))
    hidden = ad.relu(ad.linear(hidden, p.rh.w2, p.rh.b2))
    out = ad.linear(hidden, p.rh.w3, p.rh.b3)
    return ad.reshape(out, (h, w, bands_out))
