"""Command-line interface.

Subcommands cover the whole pipeline: dataset generation, measurement
simulation, training, evaluation, reconstruction at arbitrary scales,
metric computation between cubes, and the gradient verification suite.
Every command that writes artifacts drops a JSON manifest beside them;
`rerun` replays a manifest. Exit codes: 0 success, 1 usage error,
2 data error, 3 failed check.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__

# usage errors exit 1 (click's default of 2 is reserved for data errors)
click.exceptions.UsageError.exit_code = 1

EXIT_DATA_ERROR = 2
EXIT_FAILED_CHECK = 3


class DataError(click.ClickException):
    exit_code = EXIT_DATA_ERROR


def _write_manifest(out_dir: Path, command: str, options: dict,
                    outputs: list[str], extra: dict | None = None) -> None:
    payload = {
        "command": command,
        "options": options,
        "outputs": outputs,
        "version": __version__,
    }
    if extra:
        payload.update(extra)
    path = out_dir / f"{command}.manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_cube(path):
    from .hsb import HsbFormatError, read_hsb

    try:
        return read_hsb(path)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}")
    except HsbFormatError as err:
        raise DataError(f"{path}: {err}")


def _read_mask(path):
    from .cassi import Mask

    cube = _read_cube(path)
    if cube.bands != 1:
        raise DataError(f"{path}: masks must have exactly one band")
    try:
        return Mask(cube.data[:, :, 0])
    except ValueError as err:
        raise DataError(f"{path}: {err}")


def _mask_to_cube(mask):
    from .cassi import HsiCube

    return HsiCube(mask.values[:, :, None], np.array([0.0]))


def _apply_thread_flags(single_thread: bool) -> None:
    if single_thread:
        os.environ["SINR_THREADS"] = "1"


def _emit_tsv(csv_path: Path) -> Path:
    """Write a tab-separated twin of a CSV for plotting tools."""
    tsv_path = csv_path.with_suffix(".tsv")
    with open(csv_path) as src, open(tsv_path, "w") as dst:
        for i, row in enumerate(csv.reader(src)):
            if i == 0:
                dst.write("# " + "\t".join(row) + "\n")
            else:
                dst.write("\t".join(row) + "\n")
    return tsv_path


@click.group()
@click.version_option(__version__)
def main():
    """Continuous spectral reconstruction for snapshot spectral imaging."""


# ---------------------------------------------------------------------------
# gen-data
# ---------------------------------------------------------------------------

def _run_gen_data(opts: dict) -> list[str]:
    from .data import make_dataset, render_scene
    from .hsb import write_hsb

    out_dir = Path(opts["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = make_dataset(
        opts["seed"], n_train=opts["n_train"], n_test=opts["n_test"],
        height=opts["size"], width=opts["size"],
    )
    outputs = []
    seed_lines = []
    for group, scenes in (("train", train), ("test", test)):
        for i, scene in enumerate(scenes):
            name = f"{group}_{i:03d}.hsb"
            cube = render_scene(scene, opts["size"], opts["size"], opts["bands"])
            write_hsb(out_dir / name, cube)
            outputs.append(name)
            seed_lines.append(f"{group} {i:03d} {scene.seed}")
    (out_dir / "seeds.txt").write_text("\n".join(seed_lines) + "\n")
    outputs.append("seeds.txt")
    _write_manifest(out_dir, "gen-data", opts, outputs)
    return outputs


@main.command("gen-data")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--seed", default=0, show_default=True, help="Dataset seed.")
@click.option("--n-train", default=64, show_default=True)
@click.option("--n-test", default=16, show_default=True)
@click.option("--size", default=16, show_default=True, help="Spatial extent.")
@click.option("--bands", default=8, show_default=True, help="Rendered bands.")
def gen_data(**opts):
    """Render a synthetic scene set to numbered HSB files."""
    outputs = _run_gen_data(opts)
    click.echo(f"wrote {len(outputs)} files to {opts['out']}")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _run_simulate(opts: dict) -> list[str]:
    from .cassi import HsiCube, forward_cassi, make_mask
    from .hsb import write_hsb

    cube = _read_cube(opts["cube"])
    if opts.get("mask"):
        mask = _read_mask(opts["mask"])
    else:
        mask = make_mask(cube.shape[0], cube.shape[1], opts["mask_seed"])
    if mask.shape != cube.data.shape[:2]:
        raise DataError(
            f"mask shape {mask.shape} does not match cube {cube.data.shape[:2]}"
        )
    y = forward_cassi(cube, mask, opts["d"])
    out = Path(opts["out"])
    wl = cube.wavelengths
    span = (wl[-1] - wl[0]) / (len(wl) - 1) if len(wl) > 1 else 1.0
    lam_range = (float(wl[0] - span / 2), float(wl[-1] + span / 2))
    write_hsb(out, HsiCube(y.data[:, :, None], np.array([wl[0]])),
              lam_range=lam_range)
    outputs = [out.name]
    if opts.get("save_mask"):
        write_hsb(opts["save_mask"], _mask_to_cube(mask), lam_range=(0.0, 1.0))
        outputs.append(Path(opts["save_mask"]).name)
    _write_manifest(out.parent, "simulate", opts, outputs)
    return outputs


@main.command()
@click.option("--cube", required=True, type=click.Path(), help="Input HSB cube.")
@click.option("--out", required=True, type=click.Path(), help="Measurement HSB.")
@click.option("--mask", type=click.Path(), help="Mask HSB (one band).")
@click.option("--mask-seed", default=0, show_default=True,
              help="Generate the mask from this seed when --mask is absent.")
@click.option("--save-mask", type=click.Path(), help="Also write the mask HSB.")
@click.option("--d", default=2, show_default=True, help="Dispersion step.")
def simulate(**opts):
    """Compress a cube into a single dispersed measurement."""
    _run_simulate(opts)
    click.echo(f"wrote {opts['out']}")


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _config_from_options(opts: dict):
    from .training import TrainConfig

    return TrainConfig(
        steps=opts["steps"],
        batch=opts["batch"],
        lr=opts["lr"],
        seed=opts["seed"],
        shift_step=opts["d"],
        model=opts["model"],
        channels=opts["channels"],
        blocks=opts["blocks"],
        fce_dim=opts["fce_dim"],
        fce_init=opts["fce_init"],
        use_swa=not opts["no_swa"],
        use_fce=not opts["no_fce"],
        use_sf=not opts["no_sf"],
        bands=opts["bands"],
        height=opts["size"],
        width=opts["size"],
        patch=opts["patch"],
        band_fraction=opts["band_fraction"],
        data_seed=opts["data_seed"],
        n_train=opts["n_train"],
        n_test=opts["n_test"],
    )


def _run_train(opts: dict) -> list[str]:
    from .checkpoint import save_checkpoint
    from .training import train

    _apply_thread_flags(opts["single_thread"])
    try:
        config = _config_from_options(opts)
    except ValueError as err:
        raise DataError(str(err))
    out_dir = Path(opts["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    scenes, _ = config.datasets()

    ckpt_every = opts["checkpoint_every"]
    periodic: list[str] = []

    def on_step(step, loss, snapshot):
        if ckpt_every and (step + 1) % ckpt_every == 0:
            name = f"step_{step + 1:06d}.ckpt"
            save_checkpoint(out_dir / name, snapshot())
            periodic.append(name)

    result = train(config, scenes, on_step=on_step if ckpt_every else None)
    with open(out_dir / "loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for step, loss in result.loss_log:
            writer.writerow([step, repr(loss)])
    save_checkpoint(out_dir / "model.ckpt", result)
    outputs = ["loss.csv", "model.ckpt"] + periodic
    if opts["emit_gnuplot"]:
        outputs.append(_emit_tsv(out_dir / "loss.csv").name)
    _write_manifest(out_dir, "train", opts, outputs,
                    extra={"final_loss": result.loss_log[-1][1]})
    return outputs


@main.command("train")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--seed", default=0, show_default=True)
@click.option("--steps", default=2000, show_default=True)
@click.option("--batch", default=4, show_default=True)
@click.option("--lr", default=4e-4, show_default=True)
@click.option("--model", type=click.Choice(["sinr", "trilinear"]),
              default="sinr", show_default=True)
@click.option("--no-swa", is_flag=True, help="Disable spectral attention.")
@click.option("--no-fce", is_flag=True, help="Disable coordinate lifting.")
@click.option("--no-sf", is_flag=True, help="Disable the scale input.")
@click.option("--fce-dim", default=12, show_default=True,
              help="Frequency count of the coordinate lifting.")
@click.option("--fce-init", type=click.Choice(["literal", "pow2"]),
              default="literal", show_default=True)
@click.option("--d", default=2, show_default=True, help="Dispersion step.")
@click.option("--channels", default=16, show_default=True)
@click.option("--blocks", default=2, show_default=True)
@click.option("--bands", default=8, show_default=True)
@click.option("--size", default=16, show_default=True)
@click.option("--patch", default=8, show_default=True,
              help="Training crop size.")
@click.option("--band-fraction", default=1.0, show_default=True,
              help="Fraction of bands supervised per sample.")
@click.option("--data-seed", default=0, show_default=True)
@click.option("--n-train", default=64, show_default=True)
@click.option("--n-test", default=16, show_default=True)
@click.option("--checkpoint-every", default=0, show_default=True,
              help="Also write a checkpoint every K steps (0: only final).")
@click.option("--single-thread", is_flag=True,
              help="Force one BLAS thread for bit-exact reproducibility.")
@click.option("--emit-gnuplot", is_flag=True,
              help="Write a TSV twin of the loss log.")
def train_cmd(**opts):
    """Train a model on the synthetic scene set."""
    _run_train(opts)
    click.echo(f"trained model written to {opts['out']}")


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _run_eval(opts: dict) -> list[str]:
    from .checkpoint import CheckpointError, load_checkpoint
    from .training import evaluate

    _apply_thread_flags(opts["single_thread"])
    try:
        result = load_checkpoint(opts["checkpoint"])
    except FileNotFoundError:
        raise DataError(f"no such checkpoint: {opts['checkpoint']}")
    except CheckpointError as err:
        raise DataError(str(err))
    scales = tuple(int(s) for s in opts["scales"].split(","))
    _, test_scenes = result.config.datasets()
    rows = evaluate(result.params, result.config, result.mask, test_scenes,
                    scales=scales)
    out = Path(opts["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scale", "model", "psnr", "ssim", "sam", "uqi"])
        for row in rows:
            writer.writerow([row.scale, row.model, repr(row.psnr),
                             repr(row.ssim), repr(row.sam), repr(row.uqi)])
    outputs = [out.name]
    if opts["emit_gnuplot"]:
        outputs.append(_emit_tsv(out).name)
    _write_manifest(out.parent, "eval", opts, outputs)
    return outputs


@main.command("eval")
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Metrics CSV.")
@click.option("--scales", default="1,2,4", show_default=True,
              help="Comma-separated magnification factors.")
@click.option("--single-thread", is_flag=True)
@click.option("--emit-gnuplot", is_flag=True)
def eval_cmd(**opts):
    """Evaluate a checkpoint on its test scenes at several scales."""
    _run_eval(opts)
    click.echo(f"metrics written to {opts['out']}")


# ---------------------------------------------------------------------------
# reconstruct
# ---------------------------------------------------------------------------

def _run_reconstruct(opts: dict) -> list[str]:
    from .cassi import HsiCube, Measurement, init_input
    from .checkpoint import CheckpointError, load_checkpoint
    from .data import wavelength_grid
    from .hsb import read_hsb_header, write_hsb
    from .params import bind
    from .training import model_forward
    from . import autodiff as ad
    from .threads import thread_limit

    _apply_thread_flags(opts["single_thread"])
    try:
        result = load_checkpoint(opts["checkpoint"])
    except FileNotFoundError:
        raise DataError(f"no such checkpoint: {opts['checkpoint']}")
    except CheckpointError as err:
        raise DataError(str(err))
    config = result.config
    meas_cube = _read_cube(opts["measurement"])
    if meas_cube.bands != 1:
        raise DataError("measurements must be single-band HSB files")
    mask = _read_mask(opts["mask"]) if opts.get("mask") else result.mask
    y = Measurement(meas_cube.data[:, :, 0], config.shift_step)
    try:
        width = y.scene_width(config.bands)
    except ValueError as err:
        raise DataError(str(err))
    if mask.shape != (meas_cube.data.shape[0], width):
        raise DataError(
            f"mask shape {mask.shape} inconsistent with measurement "
            f"({meas_cube.data.shape[0]}, {width})"
        )
    bands_out = int(round(opts["scale"] * config.bands))
    _, _, _, lam_min, lam_max = read_hsb_header(opts["measurement"])
    fy = init_input(y, mask, config.bands,
                    wavelength_grid(lam_min, lam_max, config.bands))
    with thread_limit():
        tape = ad.Tape()
        bound = bind(result.params, tape)
        pred = model_forward(bound, fy.data, bands_out, tape)
    out = Path(opts["out"])
    write_hsb(
        out,
        HsiCube(np.clip(pred.data, 0.0, 1.0),
                wavelength_grid(lam_min, lam_max, bands_out)),
        lam_range=(lam_min, lam_max),
    )
    _write_manifest(out.parent, "reconstruct", opts, [out.name])
    return [out.name]


@main.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--measurement", required=True, type=click.Path())
@click.option("--mask", type=click.Path(),
              help="Mask HSB; defaults to the checkpoint's mask.")
@click.option("--scale", default=1.0, show_default=True,
              help="Spectral magnification r; output has r*D bands.")
@click.option("--out", required=True, type=click.Path())
@click.option("--single-thread", is_flag=True)
def reconstruct(**opts):
    """Reconstruct a cube from a measurement at a chosen band count."""
    _run_reconstruct(opts)
    click.echo(f"reconstruction written to {opts['out']}")


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _run_metrics(opts: dict) -> str:
    from .metrics import psnr, sam, ssim, uqi

    a = _read_cube(opts["cube_a"])
    b = _read_cube(opts["cube_b"])
    if a.shape != b.shape:
        raise DataError(f"cube shapes differ: {a.shape} vs {b.shape}")
    row = f"{psnr(a, b)},{ssim(a, b)},{sam(a, b)},{uqi(a, b)}"
    if opts.get("out"):
        Path(opts["out"]).write_text("psnr,ssim,sam,uqi\n" + row + "\n")
    return row


@main.command()
@click.argument("cube_a", type=click.Path())
@click.argument("cube_b", type=click.Path())
@click.option("--out", type=click.Path(), help="Also write a CSV file.")
def metrics(**opts):
    """Print psnr,ssim,sam,uqi between two HSB cubes."""
    click.echo(_run_metrics(opts))


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

@main.command()
@click.option("--verbose", is_flag=True, help="Print per-check errors.")
def gradcheck(verbose):
    """Verify every gradient against central finite differences."""
    from .gradcheck import REL_TOL, run_suite

    report = (lambda n, e: click.echo(f"{n:28s} {e:.3e}")) if verbose else None
    worst = run_suite(report=report)
    click.echo(f"max relative error {worst:.3e} (tolerance {REL_TOL:.0e})")
    if not worst < REL_TOL:
        sys.exit(EXIT_FAILED_CHECK)


# ---------------------------------------------------------------------------
# rerun
# ---------------------------------------------------------------------------

_RUNNERS = {
    "gen-data": _run_gen_data,
    "simulate": _run_simulate,
    "train": _run_train,
    "eval": _run_eval,
    "reconstruct": _run_reconstruct,
}


@main.command()
@click.argument("manifest", type=click.Path())
def rerun(manifest):
    """Replay a previously written run manifest."""
    try:
        payload = json.loads(Path(manifest).read_text())
    except FileNotFoundError:
        raise DataError(f"no such manifest: {manifest}")
    except json.JSONDecodeError as err:
        raise DataError(f"{manifest}: {err}")
    command = payload.get("command")
    runner = _RUNNERS.get(command)
    if runner is None:
        raise DataError(f"{manifest}: unknown command {command!r}")
    runner(payload["options"])
    click.echo(f"re-ran {command} from {manifest}")


if __name__ == "__main__":
    main()
