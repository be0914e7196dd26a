"""Interpolation baseline contracts."""

import numpy as np

from sinr import autodiff as ad
from sinr.baseline import init_trilinear_params, trilinear_reconstruct
from sinr.encoder import encode
from sinr.model import make_coords
from sinr.params import bind


def test_matching_bands_is_projected_field():
    rng = np.random.default_rng(0)
    p = init_trilinear_params(rng, channels=4, blocks=1)
    fy = rng.random((4, 4, 3))
    tape = ad.Tape()
    bound = bind(p, tape)
    out = trilinear_reconstruct(fy, bound, 3, tape=tape)
    z = encode(tape.constant(fy), bound.encoder)
    field = ad.linear(z, bound.head_w, bound.head_b)
    assert np.array_equal(out.data, field.data.reshape(4, 4, 3))


def test_linear_spectra_reproduced_at_any_scale():
    # a spectrally linear signal is a fixed point of linear interpolation
    rng = np.random.default_rng(1)
    h, w, d = 3, 3, 4
    base = rng.random((h, w))
    slope = rng.random((h, w)) * 0.1
    coords_in = make_coords(d).values
    cube = base[:, :, None] + slope[:, :, None] * coords_in[None, None, :]
    for d_out in (4, 8, 16):
        tape = ad.Tape()
        x = tape.constant(cube[:, :, :, None])
        out = ad.interp_linear_spectral(x, make_coords(d_out).values).data[..., 0]
        coords_out = make_coords(d_out).values
        inside = (coords_out >= coords_in[0]) & (coords_out <= coords_in[-1])
        expect = base[:, :, None] + slope[:, :, None] * coords_out[None, None, :]
        np.testing.assert_allclose(out[:, :, inside], expect[:, :, inside],
                                   atol=1e-12)


def test_matches_per_pixel_scalar_lerp_oracle():
    rng = np.random.default_rng(2)
    p = init_trilinear_params(rng, channels=4, blocks=1)
    fy = rng.random((4, 4, 3))
    tape = ad.Tape()
    bound = bind(p, tape)
    out6 = trilinear_reconstruct(fy, bound, 6, tape=tape).data
    field = trilinear_reconstruct(fy, bound, 3, tape=tape).data
    src = make_coords(3).values
    queries = make_coords(6).values
    for i in range(4):
        for j in range(4):
            vals = field[i, j, :]
            for k, q in enumerate(queries):
                if q <= src[0]:
                    expect = vals[0]
                elif q >= src[-1]:
                    expect = vals[-1]
                else:
                    n = int(np.searchsorted(src, q)) - 1
                    f = (q - src[n]) / (src[n + 1] - src[n])
                    expect = (1 - f) * vals[n] + f * vals[n + 1]
                np.testing.assert_allclose(out6[i, j, k], expect, atol=1e-12)


def test_monotone_data_stays_in_range():
    rng = np.random.default_rng(3)
    cube = np.sort(rng.random((3, 3, 5)), axis=2)[:, :, :, None]
    tape = ad.Tape()
    out = ad.interp_linear_spectral(
        tape.constant(cube), make_coords(20).values
    ).data
    assert out.min() >= cube.min() - 1e-15
    assert out.max() <= cube.max() + 1e-15
