"""Latent encoder shape contracts and gradients."""

import numpy as np

from sinr import autodiff as ad
from sinr.encoder import encode, init_encoder_params
from sinr.gradcheck import check_gradients
from sinr.params import bind, from_named, named_arrays


def test_encode_shape_contract():
    rng = np.random.default_rng(0)
    params = init_encoder_params(rng, channels=16, blocks=2)
    tape = ad.Tape()
    out = encode(tape.constant(rng.random((8, 8, 4))), bind(params, tape))
    assert out.shape == (8, 8, 4, 16)


def test_encode_preserves_sizes():
    rng = np.random.default_rng(1)
    params = init_encoder_params(rng, channels=4, blocks=1)
    for h, w, d in [(1, 1, 1), (3, 5, 2), (6, 4, 7)]:
        tape = ad.Tape()
        out = encode(tape.constant(rng.random((h, w, d))), bind(params, tape))
        assert out.shape == (h, w, d, 4)


def test_zero_weights_bias_only_gives_constant_field():
    rng = np.random.default_rng(2)
    params = init_encoder_params(rng, channels=3, blocks=2)
    zeroed = bind_zeroed_with_bias(params, 0.25)
    tape = ad.Tape()
    out = encode(tape.constant(rng.random((5, 5, 3))), bind(zeroed, tape))
    np.testing.assert_allclose(out.data, 0.25, atol=1e-15)


def bind_zeroed_with_bias(params, b):
    import dataclasses

    def rec(obj):
        if isinstance(obj, np.ndarray):
            return np.full_like(obj, b) if obj.ndim == 1 else np.zeros_like(obj)
        if dataclasses.is_dataclass(obj):
            return type(obj)(
                **{f.name: rec(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
            )
        if isinstance(obj, tuple):
            return tuple(rec(v) for v in obj)
        return obj

    return rec(params)


def test_encoder_parameter_gradients():
    rng = np.random.default_rng(3)
    params = init_encoder_params(rng, channels=2, blocks=1)
    names = [n for n, _ in named_arrays(params)]
    arrays = [a for _, a in named_arrays(params)]
    x = rng.random((4, 4, 2))
    w = rng.standard_normal((4, 4, 2, 2))

    def build(tape, leaves):
        rebuilt = from_named(params, dict(zip(names, leaves)))
        return ad.sum_all(ad.mul(encode(tape.constant(x), rebuilt), w))

    assert check_gradients(build, arrays, max_probe=6) < 1e-4


def test_translation_equivariance_in_interior():
    rng = np.random.default_rng(4)
    params = init_encoder_params(rng, channels=4, blocks=2)
    x = rng.random((16, 16, 2))
    shifted = np.roll(x, 1, axis=1)

    tape = ad.Tape()
    bound = bind(params, tape)
    out = encode(tape.constant(x), bound).data
    out_shifted = encode(tape.constant(shifted), bound).data
    # receptive radius is 5 convs deep; compare strictly interior columns
    r = 6
    np.testing.assert_allclose(
        out_shifted[:, r + 1:-r, :, :], out[:, r:-r - 1, :, :], atol=1e-10
    )
