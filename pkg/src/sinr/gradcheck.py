"""Finite-difference gradient verification.

Central differences with h = 1e-6 on 64-bit floats serve as the
independent oracle for every registered tape op and for the end-to-end
network. Relative error uses |analytic - numeric| / (|numeric| + 1e-8).
`run_suite` drives the full check set behind the gradcheck CLI command.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .threads import thread_limit

FD_STEP = 1e-6
REL_TOL = 1e-4

# Components where both sides sit below this are treated as agreeing:
# structurally-zero gradients (e.g. a bias that softmax provably ignores)
# measure as pure cancellation noise under central differences.
ZERO_FLOOR = 1e-7


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    err = np.abs(analytic - numeric) / (np.abs(numeric) + 1e-8)
    tiny = (np.abs(analytic) <= ZERO_FLOOR) & (np.abs(numeric) <= ZERO_FLOOR)
    err = np.where(tiny, 0.0, err)
    return float(np.max(err))


def fd_gradient(
    f: Callable[[Sequence[np.ndarray]], float],
    arrays: Sequence[np.ndarray],
    which: int,
    h: float = FD_STEP,
    indices: Sequence[tuple] | None = None,
) -> np.ndarray:
    """Central-difference gradient of scalar f w.r.t. arrays[which].

    When `indices` is given only those components are probed; the rest of
    the returned array is NaN (callers compare at the probed positions).
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    target = arrays[which]
    if indices is None:
        indices = list(np.ndindex(target.shape))
        grad = np.zeros_like(target)
    else:
        grad = np.full_like(target, np.nan)
    for idx in indices:
        orig = target[idx]
        target[idx] = orig + h
        fp = f(arrays)
        target[idx] = orig - h
        fm = f(arrays)
        target[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * h)
    return grad


def check_gradients(
    build: Callable[[ad.Tape, Sequence[ad.Tensor]], ad.Tensor],
    arrays: Sequence[np.ndarray],
    h: float = FD_STEP,
    max_probe: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between tape gradients and central differences.

    `build` maps (tape, leaf tensors) to a scalar tensor. Each input
    array is probed exhaustively, or at `max_probe` sampled components
    when given (large parameter tensors).
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    tape = ad.Tape()
    leaves = [tape.param(a) for a in arrays]
    root = build(tape, leaves)
    grads = tape.backward(root)

    def value(arrs):
        t = ad.Tape()
        return float(build(t, [t.param(a) for a in arrs]).data[0])

    worst = 0.0
    for i, leaf in enumerate(leaves):
        analytic = grads.get(leaf.node_id)
        if analytic is None:
            analytic = np.zeros_like(arrays[i])
        idx = None
        if max_probe is not None and arrays[i].size > max_probe:
            if rng is None:
                rng = np.random.default_rng(0)
            flat = rng.choice(arrays[i].size, size=max_probe, replace=False)
            idx = [np.unravel_index(k, arrays[i].shape) for k in sorted(flat)]
        numeric = fd_gradient(value, arrays, i, h=h, indices=idx)
        if idx is None:
            worst = max(worst, rel_error(analytic, numeric))
        else:
            for j in idx:
                worst = max(worst, rel_error(analytic[j], numeric[j]))
    return worst


# ---------------------------------------------------------------------------
# the full verification suite
# ---------------------------------------------------------------------------

def _op_checks(rng: np.random.Generator):
    """(name, builder, arrays) triples covering every registered op."""
    x22 = rng.standard_normal((2, 3)) + 0.5
    y22 = rng.standard_normal((2, 3)) + 1.5
    w23 = rng.standard_normal((2, 3))
    checks = []
    for opname, op in [("add", ad.add), ("sub", ad.sub), ("mul", ad.mul),
                       ("div", ad.div)]:
        checks.append((
            f"elementwise.{opname}",
            lambda t, l, op=op: ad.sum_all(ad.mul(op(l[0], l[1]), w23)),
            [x22, y22],
        ))
    a34 = rng.standard_normal((3, 4))
    b42 = rng.standard_normal((4, 2))
    checks.append(
        ("matmul", lambda t, l: ad.sum_all(ad.matmul(l[0], l[1])), [a34, b42])
    )
    wsm = rng.standard_normal((3, 4))
    checks.append((
        "softmax",
        lambda t, l: ad.sum_all(ad.mul(ad.softmax(l[0], axis=1), wsm)),
        [rng.standard_normal((3, 4))],
    ))
    for opname, op in [("relu", ad.relu), ("abs", ad.absval), ("exp", ad.exp),
                       ("sin", ad.sin), ("cos", ad.cos)]:
        wu = rng.standard_normal((3, 3))
        checks.append((
            f"unary.{opname}",
            lambda t, l, op=op, wu=wu: ad.sum_all(ad.mul(op(l[0]), wu)),
            [rng.standard_normal((3, 3)) + 0.3],
        ))
    wcat = rng.standard_normal((4, 3))
    checks.append((
        "concat",
        lambda t, l: ad.sum_all(ad.mul(ad.concat(l, axis=0), wcat)),
        [rng.standard_normal((2, 3)), rng.standard_normal((2, 3))],
    ))
    wrp = rng.standard_normal((4, 6))
    checks.append((
        "reshape.permute",
        lambda t, l: ad.sum_all(
            ad.mul(ad.permute(ad.reshape(l[0], (6, 4)), (1, 0)), wrp)
        ),
        [rng.standard_normal((2, 3, 4))],
    ))
    wtile = rng.standard_normal((2, 2, 3, 2))
    checks.append((
        "tile_leading",
        lambda t, l: ad.sum_all(ad.mul(ad.tile_leading(l[0], (2, 2)), wtile)),
        [rng.standard_normal((3, 2))],
    ))
    wout = rng.standard_normal((4, 3))
    checks.append((
        "outer",
        lambda t, l: ad.sum_all(ad.mul(ad.outer(l[0], l[1]), wout)),
        [rng.standard_normal(4), rng.standard_normal(3)],
    ))
    wlin = rng.standard_normal((2, 3, 2))
    checks.append((
        "linear",
        lambda t, l: ad.sum_all(ad.mul(ad.linear(*l), wlin)),
        [rng.standard_normal((2, 3, 3)), rng.standard_normal((3, 2)),
         rng.standard_normal(2)],
    ))
    wconv = rng.standard_normal((4, 4, 2, 2))
    checks.append((
        "conv_spatial",
        lambda t, l: ad.sum_all(ad.mul(ad.conv_spatial(*l), wconv)),
        [rng.standard_normal((4, 4, 2, 2)), rng.standard_normal((3, 3, 2, 2)),
         rng.standard_normal(2)],
    ))
    checks.append((
        "avg_pool_spatial",
        lambda t, l: ad.sum_all(ad.avg_pool_spatial(l[0])),
        [rng.standard_normal((3, 4, 2, 2))],
    ))
    winterp = rng.standard_normal((2, 2, 6, 2))
    queries = -1.0 + (2.0 * np.arange(6) + 1.0) / 6
    checks.append((
        "interp_linear_spectral",
        lambda t, l: ad.sum_all(
            ad.mul(ad.interp_linear_spectral(l[0], queries), winterp)
        ),
        [rng.standard_normal((2, 2, 3, 2))],
    ))
    wnb = rng.standard_normal((2, 2, 3, 6))
    checks.append((
        "spectral_neighbors",
        lambda t, l: ad.sum_all(ad.mul(ad.spectral_neighbors(l[0]), wnb)),
        [rng.standard_normal((2, 2, 3, 2))],
    ))
    return checks


def _end_to_end_checks(rng: np.random.Generator):
    """Whole-model gradients, every parameter tensor probed."""
    from .baseline import init_trilinear_params, trilinear_reconstruct
    from .model import init_sinr_params, sinr_forward
    from .params import from_named, named_arrays
    from .training import l1_loss

    fy = rng.random((4, 4, 3))
    target = rng.random((4, 4, 3))
    checks = []

    sinr_params = init_sinr_params(rng, channels=4, blocks=1, fce_dim=2)
    pairs = named_arrays(sinr_params)
    names = [n for n, _ in pairs]
    weight = rng.standard_normal((4, 4, 3))

    def build_sinr(tape, leaves):
        rebuilt = from_named(sinr_params, dict(zip(names, leaves)))
        out = sinr_forward(fy, rebuilt, 3, tape=tape)
        return ad.sum_all(ad.mul(out, weight))

    checks.append(("sinr.end_to_end", build_sinr, [a for _, a in pairs], 4))

    tri = init_trilinear_params(rng, channels=4, blocks=1)
    tri_pairs = named_arrays(tri)
    tri_names = [n for n, _ in tri_pairs]
    tri_target = rng.random((4, 4, 6))

    def build_tri(tape, leaves):
        rebuilt = from_named(tri, dict(zip(tri_names, leaves)))
        out = trilinear_reconstruct(fy, rebuilt, 6, tape=tape)
        return l1_loss(out, tri_target)

    checks.append(("trilinear.end_to_end", build_tri,
                   [a for _, a in tri_pairs], 4))
    return checks


def run_suite(report=None) -> float:
    """Check every op and both end-to-end models; return max rel error.

    `report(name, err)` is called per check when given.
    """
    rng = np.random.default_rng(2024)
    worst = 0.0
    with thread_limit():
        for name, build, arrays in _op_checks(rng):
            err = check_gradients(build, arrays)
            worst = max(worst, err)
            if report:
                report(name, err)
        for name, build, arrays, probe in _end_to_end_checks(rng):
            err = check_gradients(build, arrays, max_probe=probe,
                                  rng=np.random.default_rng(7))
            worst = max(worst, err)
            if report:
                report(name, err)
    return worst
