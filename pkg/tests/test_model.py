"""Spectral head: coordinates, attention, coordinate lifting, decoding."""

import numpy as np
import pytest

from sinr import autodiff as ad
from sinr.gradcheck import check_gradients
from sinr.model import (
    SpectralCoords,
    attention_weights,
    fce_forward,
    init_fce_omegas,
    init_sinr_params,
    make_coords,
    rh_input_dim,
    sinr_forward,
    swa_forward,
)
from sinr.params import bind, from_named, named_arrays


# ---------------------------------------------------------------------------
# coordinates
# ---------------------------------------------------------------------------

def test_make_coords_values():
    np.testing.assert_allclose(make_coords(1).values, [0.0], atol=1e-15)
    np.testing.assert_allclose(make_coords(2).values, [-0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(
        make_coords(4).values, [-0.75, -0.25, 0.25, 0.75], atol=1e-15
    )


def test_coords_validation():
    with pytest.raises(ValueError):
        SpectralCoords(np.array([0.5, 0.2]))
    with pytest.raises(ValueError):
        SpectralCoords(np.array([-2.0, 0.0]))


# ---------------------------------------------------------------------------
# Fourier coordinate lifting
# ---------------------------------------------------------------------------

def test_fce_at_zero():
    tape = ad.Tape()
    omegas = tape.param(init_fce_omegas(3, "literal"))
    out = fce_forward(SpectralCoords(np.array([0.0])), omegas)
    np.testing.assert_allclose(out.data, [[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]],
                               atol=1e-15)


def test_fce_single_frequency_quarter_period():
    tape = ad.Tape()
    omegas = tape.param(np.array([np.pi]))
    out = fce_forward(SpectralCoords(np.array([0.5])), omegas)
    np.testing.assert_allclose(out.data, [[0.0, 1.0]], atol=1e-15)


def test_fce_pairs_on_unit_circle():
    rng = np.random.default_rng(0)
    tape = ad.Tape()
    omegas = tape.param(rng.uniform(0.5, 40.0, size=6))
    coords = SpectralCoords(np.sort(rng.uniform(-1, 1, size=5)))
    out = fce_forward(coords, omegas).data
    assert out.shape == (5, 12)
    for i in range(6):
        np.testing.assert_allclose(
            out[:, 2 * i] ** 2 + out[:, 2 * i + 1] ** 2, 1.0, atol=1e-12
        )


def test_fce_output_bounded():
    tape = ad.Tape()
    omegas = tape.param(init_fce_omegas(12, "literal"))
    out = fce_forward(make_coords(16), omegas).data
    assert out.min() >= -1.0 and out.max() <= 1.0


def test_fce_dimension_is_twice_frequency_count():
    for n in (0, 1, 5, 12):
        tape = ad.Tape()
        omegas = tape.param(init_fce_omegas(n, "pow2"))
        out = fce_forward(make_coords(4), omegas)
        assert out.shape == (4, 2 * n)


def test_fce_frequency_gradients():
    rng = np.random.default_rng(1)
    om = rng.uniform(1.0, 8.0, size=3)
    coords = make_coords(5)
    w = rng.standard_normal((5, 6))

    def build(tape, leaves):
        return ad.sum_all(ad.mul(fce_forward(coords, leaves[0]), w))

    assert check_gradients(build, [om]) < 1e-4


def test_fce_init_modes():
    lit = init_fce_omegas(3, "literal")
    np.testing.assert_allclose(lit, 2.0 * np.exp([1.0, 2.0, 3.0]))
    p2 = init_fce_omegas(3, "pow2")
    np.testing.assert_allclose(p2, np.pi * np.array([2.0, 4.0, 8.0]))
    with pytest.raises(ValueError):
        init_fce_omegas(3, "nope")


# ---------------------------------------------------------------------------
# spectral-wise attention
# ---------------------------------------------------------------------------

def swa_params(rng, c):
    return init_sinr_params(rng, channels=c, blocks=1, fce_dim=2).swa


def test_swa_single_band_attention_is_identity_weight():
    rng = np.random.default_rng(2)
    p = swa_params(rng, 4)
    tape = ad.Tape()
    z = tape.constant(rng.random((3, 3, 1, 4)))
    bound = bind(p, tape)
    w = attention_weights(z, bound)
    np.testing.assert_allclose(w.data, [[1.0]], atol=1e-15)
    # output equals value projection plus the positional term
    out = swa_forward(z, bound, use_pos=True)
    v = ad.linear(z, bound.wv, bound.bv)
    np.testing.assert_allclose(
        (out.data - v.data).shape, (3, 3, 1, 4)
    )


def test_swa_constant_input_gives_uniform_attention():
    rng = np.random.default_rng(3)
    p = swa_params(rng, 4)
    tape = ad.Tape()
    z = tape.constant(np.full((2, 2, 5, 4), 0.3))
    w = attention_weights(z, bind(p, tape)).data
    np.testing.assert_allclose(w, np.full((5, 5), 0.2), atol=1e-12)


def test_swa_attention_rows_sum_to_one():
    rng = np.random.default_rng(4)
    for _ in range(10):
        c = int(rng.integers(2, 8))
        d = int(rng.integers(1, 7))
        p = swa_params(rng, c)
        tape = ad.Tape()
        z = tape.constant(rng.standard_normal((3, 2, d, c)))
        w = attention_weights(z, bind(p, tape)).data
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)


def _random_nonidentity_perm(rng, n):
    while True:
        perm = rng.permutation(n)
        if not np.array_equal(perm, np.arange(n)):
            return perm


def test_swa_without_position_term_is_band_permutation_equivariant():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = swa_params(rng, 8)
        z = rng.standard_normal((4, 4, 3, 8))
        perm = _random_nonidentity_perm(rng, 3)
        tape = ad.Tape()
        bound = bind(p, tape)
        out = swa_forward(tape.constant(z), bound, use_pos=False).data
        out_perm = swa_forward(tape.constant(z[:, :, perm, :]), bound,
                               use_pos=False).data
        assert np.max(np.abs(out_perm - out[:, :, perm, :])) < 1e-9


def test_swa_position_term_breaks_band_permutation_equivariance():
    rng = np.random.default_rng(6)
    broken = 0
    for _ in range(20):
        p = swa_params(rng, 8)
        d = int(rng.integers(3, 7))
        z = rng.standard_normal((4, 4, d, 8))
        perm = _random_nonidentity_perm(rng, d)
        tape = ad.Tape()
        bound = bind(p, tape)
        out = swa_forward(tape.constant(z), bound, use_pos=True).data
        out_perm = swa_forward(tape.constant(z[:, :, perm, :]), bound,
                               use_pos=True).data
        gap = np.max(np.abs(out_perm - out[:, :, perm, :]))
        if gap > 1e-6 * (1.0 + np.max(np.abs(out))):
            broken += 1
    assert broken >= 19


def _swa_loop_oracle(z, p):
    """Literal attention semantics with explicit loops and tiled axes."""
    h, w, d, c = z.shape
    pooled = z.mean(axis=(0, 1))  # [d, c]
    q = pooled @ p["wq"] + p["bq"]
    k = pooled @ p["wk"] + p["bk"]
    v = np.einsum("hwdc,ce->hwde", z, p["wv"]) + p["bv"]
    sigma = np.exp(p["log_sigma"][0])
    scores = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            scores[i, j] = sigma * float(q[i] @ k[j])
    weights = np.empty_like(scores)
    for i in range(d):
        e = np.exp(scores[i] - scores[i].max())
        weights[i] = e / e.sum()
    out = np.zeros_like(v)
    for hh in range(h):
        for ww in range(w):
            for i in range(d):
                for j in range(d):
                    out[hh, ww, i] += weights[i, j] * v[hh, ww, j]
    return out


def test_swa_matches_loop_oracle():
    rng = np.random.default_rng(7)
    p = swa_params(rng, 5)
    z = rng.standard_normal((3, 2, 4, 5))
    tape = ad.Tape()
    out = swa_forward(tape.constant(z), bind(p, tape), use_pos=False).data
    oracle = _swa_loop_oracle(
        z,
        {
            "wq": p.wq, "bq": p.bq, "wk": p.wk, "bk": p.bk,
            "wv": p.wv, "bv": p.bv, "log_sigma": p.log_sigma,
        },
    )
    np.testing.assert_allclose(out, oracle, atol=1e-12)


# ---------------------------------------------------------------------------
# full forward
# ---------------------------------------------------------------------------

def test_sinr_forward_shape_contract():
    rng = np.random.default_rng(8)
    params = init_sinr_params(rng, channels=4, blocks=1, fce_dim=2)
    fy = rng.random((5, 4, 3))
    for scale in (1, 2, 4):
        tape = ad.Tape()
        out = sinr_forward(fy, bind(params, tape), 3 * scale, tape=tape)
        assert out.shape == (5, 4, 3 * scale)


def test_sinr_zero_head_outputs_final_bias():
    rng = np.random.default_rng(9)
    params = init_sinr_params(rng, channels=4, blocks=1, fce_dim=2)
    rh = params.rh
    zeroed = type(rh)(
        w1=np.zeros_like(rh.w1), b1=np.zeros_like(rh.b1),
        w2=np.zeros_like(rh.w2), b2=np.zeros_like(rh.b2),
        w3=np.zeros_like(rh.w3), b3=np.full_like(rh.b3, 0.7),
    )
    params = type(params)(
        encoder=params.encoder, swa=params.swa, fce=params.fce, rh=zeroed
    )
    tape = ad.Tape()
    out = sinr_forward(rng.random((4, 4, 3)), bind(params, tape), 6, tape=tape)
    np.testing.assert_allclose(out.data, 0.7, atol=1e-15)


def test_sinr_runs_without_fce_dimensions():
    rng = np.random.default_rng(10)
    params = init_sinr_params(rng, channels=4, blocks=1, fce_dim=0)
    assert params.rh.w1.shape[0] == rh_input_dim(4, 0, True, True) == 6
    tape = ad.Tape()
    out = sinr_forward(rng.random((4, 4, 3)), bind(params, tape), 6, tape=tape)
    assert out.shape == (4, 4, 6)


def test_sinr_toggles_shrink_head_input():
    rng = np.random.default_rng(11)
    p = init_sinr_params(rng, channels=4, fce_dim=3, use_fce=False, use_sf=True)
    assert p.rh.w1.shape[0] == 4 + 1 + 1
    p = init_sinr_params(rng, channels=4, fce_dim=3, use_fce=False, use_sf=False)
    assert p.rh.w1.shape[0] == 4 + 1
    tape = ad.Tape()
    out = sinr_forward(rng.random((3, 3, 2)), bind(p, tape), 4, tape=tape)
    assert out.shape == (3, 3, 4)


def test_sinr_forward_deterministic_bitwise():
    rng = np.random.default_rng(12)
    params = init_sinr_params(rng, channels=4, blocks=1, fce_dim=2)
    fy = rng.random((4, 4, 3))

    def run():
        tape = ad.Tape()
        return sinr_forward(fy, bind(params, tape), 3, tape=tape).data

    assert np.array_equal(run(), run())


def test_sinr_end_to_end_parameter_gradients():
    rng = np.random.default_rng(13)
    params = init_sinr_params(rng, channels=4, blocks=1, fce_dim=2)
    pairs = named_arrays(params)
    names = [n for n, _ in pairs]
    arrays = [a for _, a in pairs]
    fy = rng.random((4, 4, 3))
    w = rng.standard_normal((4, 4, 3))

    def build(tape, leaves):
        rebuilt = from_named(params, dict(zip(names, leaves)))
        out = sinr_forward(fy, rebuilt, 3, tape=tape)
        return ad.sum_all(ad.mul(out, w))

    assert check_gradients(build, arrays, max_probe=4) < 1e-4
