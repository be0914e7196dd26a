"""HSB container: a tiny binary format for radiance cubes.

Layout (little-endian):

    bytes 0..3    magic ``HSB1``
    bytes 4..15   u32 height, width, bands
    bytes 16..31  f64 lambda_min, lambda_max
    bytes 32..    height*width*bands f32 values, C order (band fastest)

The wavelength grid is reconstructed cell-centered on the stored range.
The f32 payload matches the precision of typical captured datasets;
cubes rendered by this package are already f32-quantized, so their
write/read round-trip is bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .cassi import HsiCube
from .data import wavelength_grid

__all__ = ["HsbFormatError", "write_hsb", "read_hsb", "read_hsb_header"]

MAGIC = b"HSB1"
_HEADER = struct.Struct("<4sIIIdd")
MAX_DIM = 65536


class HsbFormatError(ValueError):
    """Malformed HSB file; message carries the failing byte offset."""


def _lambda_range(cube: HsiCube) -> tuple[float, float]:
    wl = cube.wavelengths
    if len(wl) == 1:
        return float(wl[0]) - 0.5, float(wl[0]) + 0.5
    step = (wl[-1] - wl[0]) / (len(wl) - 1)
    return float(wl[0] - step / 2.0), float(wl[-1] + step / 2.0)


def write_hsb(path, cube: HsiCube, lam_range: tuple[float, float] | None = None) -> None:
    h, w, d = cube.data.shape
    for n, dim in (("height", h), ("width", w), ("bands", d)):
        if dim > MAX_DIM:
            raise HsbFormatError(f"{n} {dim} exceeds the format limit {MAX_DIM}")
    if lam_range is None:
        lam_range = _lambda_range(cube)
    payload = cube.data.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, h, w, d, lam_range[0], lam_range[1]))
        fh.write(payload)


def read_hsb_header(path) -> tuple[int, int, int, float, float]:
    """(height, width, bands, lambda_min, lambda_max) without the payload."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise HsbFormatError(
            f"file is {len(head)} bytes, header needs {_HEADER.size} (offset 0)"
        )
    magic, h, w, d, lam_min, lam_max = _HEADER.unpack(head)
    if magic != MAGIC:
        raise HsbFormatError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    return h, w, d, lam_min, lam_max


def read_hsb(path) -> HsiCube:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise HsbFormatError(
            f"file is {len(raw)} bytes, header needs {_HEADER.size} (offset 0)"
        )
    magic, h, w, d, lam_min, lam_max = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise HsbFormatError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    for n, dim in (("height", h), ("width", w), ("bands", d)):
        if dim == 0 or dim > MAX_DIM:
            raise HsbFormatError(f"{n} {dim} out of range at offset 4")
    expected = _HEADER.size + 4 * h * w * d
    if len(raw) != expected:
        raise HsbFormatError(
            f"payload truncated at offset {len(raw)}: file has {len(raw)} bytes, "
            f"header promises {expected}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    data = data.reshape(h, w, d)
    if lam_max <= lam_min:
        raise HsbFormatError("wavelength range must be increasing (offset 16)")
    return HsiCube(data, wavelength_grid(lam_min, lam_max, d))
