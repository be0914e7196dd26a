"""L1 objective, Adam updates, the training loop, and evaluation.

Models train exclusively at matching input/output band counts; the
out-of-scale behaviour is probed afterwards by rendering ground truth
at finer grids and querying the trained model there. Every random draw
flows through one seeded generator in a fixed order, so a (seed,
single-thread) pair reproduces loss logs bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .baseline import TrilinearParams, init_trilinear_params, trilinear_reconstruct
from .cassi import HsiCube, Mask, forward_cassi, init_input, make_mask
from .data import SceneSpec, augment, render_scene, sample_bands, wavelength_grid
from .metrics import psnr, sam, ssim, uqi
from .data import make_dataset
from .model import SinrParams, init_sinr_params, sinr_forward
from .params import bind, named_arrays
from .threads import thread_limit

__all__ = [
    "TrainConfig",
    "AdamState",
    "TrainResult",
    "l1_loss",
    "init_adam",
    "adam_step",
    "init_model_params",
    "model_forward",
    "train",
    "evaluate",
    "EvalRow",
]


@dataclass
class TrainConfig:
    steps: int = 2000
    batch: int = 4
    lr: float = 4e-4
    seed: int = 0
    shift_step: int = 2
    model: str = "sinr"
    channels: int = 16
    blocks: int = 2
    fce_dim: int = 12
    fce_init: str = "literal"
    use_swa: bool = True
    use_fce: bool = True
    use_sf: bool = True
    bands: int = 8
    height: int = 16
    width: int = 16
    patch: int = 8
    band_fraction: float = 1.0
    eval_scales: tuple[int, ...] = (1, 2, 4)
    data_seed: int = 0
    n_train: int = 64
    n_test: int = 16

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.model not in ("sinr", "trilinear"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.patch > min(self.height, self.width):
            raise ValueError("training patch larger than the scene")

    def datasets(self):
        """(train, test) scene lists this config describes."""
        return make_dataset(
            self.data_seed,
            n_train=self.n_train,
            n_test=self.n_test,
            height=self.height,
            width=self.width,
        )


@dataclass
class AdamState:
    """Bias-corrected first/second moment accumulators per parameter."""

    lr: float
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TrainResult:
    params: object
    config: TrainConfig
    mask: Mask
    loss_log: list[tuple[int, float]]


@dataclass(frozen=True)
class EvalRow:
    scale: int
    model: str
    psnr: float
    ssim: float
    sam: float
    uqi: float


def l1_loss(pred: ad.Tensor, target: np.ndarray,
            band_subset: np.ndarray | None = None) -> ad.Tensor:
    """Mean absolute error over supervised voxels; differentiable."""
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ad.DimensionError(
            f"prediction shape {pred.shape} != target shape {target.shape}"
        )
    diff = ad.absval(ad.sub(pred, target))
    if band_subset is None or len(band_subset) == pred.shape[-1]:
        count = target.size
        masked = diff
    else:
        sel = np.zeros(pred.shape[-1])
        sel[np.asarray(band_subset)] = 1.0
        count = target.shape[0] * target.shape[1] * len(band_subset)
        masked = ad.mul(diff, sel)
    return ad.mul(ad.sum_all(masked), 1.0 / count)


def init_adam(params, lr: float) -> AdamState:
    pairs = named_arrays(params)
    return AdamState(
        lr=lr,
        m={n: np.zeros_like(a) for n, a in pairs},
        v={n: np.zeros_like(a) for n, a in pairs},
    )


def adam_step(params, grads: dict[str, np.ndarray], state: AdamState) -> None:
    """Standard bias-corrected update, applied in place in a fixed order."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, arr in named_arrays(params):
        g = grads.get(name)
        if g is None:
            continue
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        arr -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def init_model_params(config: TrainConfig, rng: np.random.Generator):
    if config.model == "sinr":
        return init_sinr_params(
            rng,
            channels=config.channels,
            blocks=config.blocks,
            fce_dim=config.fce_dim,
            fce_init=config.fce_init,
            use_swa=config.use_swa,
            use_fce=config.use_fce,
            use_sf=config.use_sf,
        )
    return init_trilinear_params(rng, channels=config.channels, blocks=config.blocks)


def model_forward(bound_params, fy: np.ndarray, bands_out: int,
                  tape: ad.Tape) -> ad.Tensor:
    if isinstance(bound_params, (SinrParams, TrilinearParams)):
        if isinstance(bound_params, SinrParams):
            return sinr_forward(fy, bound_params, bands_out, tape=tape)
        return trilinear_reconstruct(fy, bound_params, bands_out, tape=tape)
    raise TypeError(f"unsupported parameter container {type(bound_params)!r}")


def _measure_and_init(cube: HsiCube, mask: Mask, shift_step: int) -> HsiCube:
    y = forward_cassi(cube, mask, shift_step)
    return init_input(y, mask, cube.bands, cube.wavelengths)


def train(
    config: TrainConfig,
    scenes: list[SceneSpec],
    on_step=None,
) -> TrainResult:
    """Run the optimization loop over measurement/ground-truth pairs.

    Per step and batch element: crop and augment a rendered scene,
    simulate its measurement, reverse the dispersion into the model
    input, reconstruct at the training band count, and take the L1
    distance to the augmented ground truth. `on_step(step, loss,
    snapshot)` fires after every update; `snapshot()` builds the
    TrainResult as of that step (used for periodic checkpoints).
    """
    if not scenes:
        raise ValueError("training needs at least one scene")
    with thread_limit():
        return _train_loop(config, scenes, on_step)


def _train_loop(config, scenes, on_step) -> TrainResult:
    rng = np.random.default_rng(config.seed)
    mask = make_mask(config.height, config.width,
                     seed=int(rng.integers(1 << 62)))
    params = init_model_params(config, rng)
    state = init_adam(params, config.lr)
    d_bands = config.bands
    cubes = [
        render_scene(s, config.height, config.width, d_bands) for s in scenes
    ]
    log: list[tuple[int, float]] = []

    for step in range(config.steps):
        tape = ad.Tape()
        bound = bind(params, tape)
        total = None
        for _ in range(config.batch):
            idx = int(rng.integers(len(cubes)))
            cube = cubes[idx]
            if config.patch < min(config.height, config.width):
                r0 = int(rng.integers(config.height - config.patch + 1))
                c0 = int(rng.integers(config.width - config.patch + 1))
            else:
                r0 = c0 = 0
            p = config.patch
            window = HsiCube(
                np.ascontiguousarray(cube.data[r0:r0 + p, c0:c0 + p]),
                cube.wavelengths,
            )
            window = augment(window, rng)
            mask_window = Mask(mask.values[r0:r0 + p, c0:c0 + p])
            fy = _measure_and_init(window, mask_window, config.shift_step)
            pred = model_forward(bound, fy.data, d_bands, tape)
            subset = None
            if config.band_fraction < 1.0:
                subset = sample_bands(d_bands, config.band_fraction, rng)
            sample_loss = l1_loss(pred, window.data, subset)
            total = sample_loss if total is None else ad.add(total, sample_loss)
        loss = ad.mul(total, 1.0 / config.batch)
        grads_by_id = tape.backward(loss)
        grads = {}
        for name, tensor in named_arrays(bound):
            g = grads_by_id.get(tensor.node_id)
            grads[name] = g if g is not None else np.zeros(tensor.shape)
        adam_step(params, grads, state)
        loss_value = float(loss.data[0])
        log.append((step, loss_value))
        if on_step is not None:
            snapshot = lambda: TrainResult(  # noqa: E731
                params=params, config=config, mask=mask, loss_log=list(log)
            )
            on_step(step, loss_value, snapshot)
    return TrainResult(params=params, config=config, mask=mask, loss_log=log)


def reconstruct_from_scene(
    params, config: TrainConfig, mask: Mask, scene: SceneSpec, bands_out: int
) -> HsiCube:
    """Simulate the scene's measurement and reconstruct at `bands_out`."""
    gt_lr = render_scene(scene, config.height, config.width, config.bands)
    fy = _measure_and_init(gt_lr, mask, config.shift_step)
    tape = ad.Tape()
    bound = bind(params, tape)
    pred = model_forward(bound, fy.data, bands_out, tape)
    wl = wavelength_grid(scene.lambda_min, scene.lambda_max, bands_out)
    return HsiCube(pred.data, wl)


def evaluate(
    params,
    config: TrainConfig,
    mask: Mask,
    scenes: list[SceneSpec],
    scales: tuple[int, ...] | None = None,
) -> list[EvalRow]:
    """Mean test metrics per magnification scale."""
    scales = scales if scales is not None else config.eval_scales
    rows = []
    with thread_limit():
        for scale in scales:
            bands_out = scale * config.bands
            values = np.zeros(4)
            for scene in scenes:
                gt = render_scene(scene, config.height, config.width, bands_out)
                pred = reconstruct_from_scene(params, config, mask, scene,
                                              bands_out)
                values += [
                    psnr(pred, gt),
                    ssim(pred, gt),
                    sam(pred, gt),
                    uqi(pred, gt),
                ]
            values /= len(scenes)
            rows.append(EvalRow(scale, config.model, *values))
    return rows
