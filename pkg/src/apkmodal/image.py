"""Render byte sequences as grayscale or RGB images at 128/256/512 pixels.

The mapping is the classic malware-visualization convention: bytes fill a
square canvas row-major (one byte per pixel in grayscale, consecutive
triplets as R,G,B), the canvas side is ceil(sqrt(pixel count)), trailing
cells are zero-padded, and the canvas is then resampled to the requested
resolution. Nearest-neighbor resampling is the default because it is
exactly specified by integer index math and keeps output files bit-stable.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import png
from .apk import SourceMode, collect_code_bytes, open_apk
from .errors import EmptyInput

RESOLUTIONS = (128, 256, 512)


class ColorMode(str, Enum):
    GRAYSCALE = "grayscale"
    RGB = "rgb"

    @property
    def channels(self) -> int:
        return 1 if self is ColorMode.GRAYSCALE else 3


class ResampleFilter(str, Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"


@dataclass(frozen=True)
class ImageSpec:
    """One cell of the color-mode x resolution matrix."""

    color_mode: ColorMode
    resolution: int
    resample: ResampleFilter = ResampleFilter.NEAREST

    def __post_init__(self):
        if self.resolution not in RESOLUTIONS:
            raise ValueError(f"resolution must be one of {RESOLUTIONS}, got {self.resolution}")

    @property
    def tag(self) -> str:
        return f"{self.color_mode.value}_{self.resolution}"


def all_specs(resample: ResampleFilter = ResampleFilter.NEAREST) -> list[ImageSpec]:
    """The full six-cell matrix: both color modes at every resolution."""
    return [
        ImageSpec(mode, side, resample)
        for mode in (ColorMode.GRAYSCALE, ColorMode.RGB)
        for side in RESOLUTIONS
    ]


@dataclass
class ByteImage:
    spec: ImageSpec
    pixels: np.ndarray  # uint8, (res, res) or (res, res, 3)
    source_len: int
    canvas_side: int


def encode_canvas(data: bytes, color_mode: ColorMode) -> np.ndarray:
    """Fill a square canvas with the input bytes, row-major, zero-padded.

    Grayscale: byte i is pixel i's intensity. RGB: bytes (3i, 3i+1, 3i+2)
    are pixel i's channels.
    """
    if not data:
        raise EmptyInput("cannot render an empty byte sequence")
    channels = color_mode.channels
    pixel_count = math.ceil(len(data) / channels)
    side = math.ceil(math.sqrt(pixel_count))
    padded = np.zeros(side * side * channels, dtype=np.uint8)
    padded[: len(data)] = np.frombuffer(data, dtype=np.uint8)
    if channels == 1:
        return padded.reshape(side, side)
    return padded.reshape(side, side, channels)


def canvas_to_bytes(canvas: np.ndarray, source_len: int) -> bytes:
    """Invert encode_canvas: first source_len bytes of the row-major canvas."""
    flat = canvas.reshape(-1)
    if source_len > flat.size:
        raise ValueError(f"source_len {source_len} exceeds canvas capacity {flat.size}")
    return flat[:source_len].tobytes()


def resample(canvas: np.ndarray, spec: ImageSpec, source_len: int | None = None) -> ByteImage:
    """Resize a square canvas to the spec's resolution.

    Nearest neighbor is exact: out(x, y) = canvas(floor(x*s/R), floor(y*s/R)).
    """
    side = canvas.shape[0]
    if canvas.ndim not in (2, 3) or canvas.shape[1] != side or side < 1:
        raise ValueError(f"canvas must be square, got shape {canvas.shape}")
    res = spec.resolution
    if source_len is None:
        source_len = side * side * spec.color_mode.channels

    if side == res:
        pixels = canvas.copy()
    elif spec.resample is ResampleFilter.NEAREST:
        idx = (np.arange(res, dtype=np.int64) * side) // res
        pixels = canvas[np.ix_(idx, idx)]
    else:
        pixels = _bilinear(canvas, res)
    return ByteImage(spec=spec, pixels=np.ascontiguousarray(pixels), source_len=source_len, canvas_side=side)


def _bilinear(canvas: np.ndarray, res: int) -> np.ndarray:
    # pixel-center alignment; available for fidelity experiments, not bit-pinned
    side = canvas.shape[0]
    coords = (np.arange(res, dtype=np.float64) + 0.5) * side / res - 0.5
    lo = np.clip(np.floor(coords).astype(np.int64), 0, side - 1)
    hi = np.clip(lo + 1, 0, side - 1)
    frac = np.clip(coords - lo, 0.0, 1.0)

    grid = canvas.astype(np.float64)
    if grid.ndim == 2:
        grid = grid[:, :, np.newaxis]
    top = grid[lo][:, hi] * frac[np.newaxis, :, np.newaxis] + grid[lo][:, lo] * (1 - frac)[np.newaxis, :, np.newaxis]
    bottom = grid[hi][:, hi] * frac[np.newaxis, :, np.newaxis] + grid[hi][:, lo] * (1 - frac)[np.newaxis, :, np.newaxis]
    out = bottom * frac[:, np.newaxis, np.newaxis] + top * (1 - frac)[:, np.newaxis, np.newaxis]
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    if canvas.ndim == 2:
        return out[:, :, 0]
    return out


def image_file_name(apk_sha256: str, spec: ImageSpec) -> str:
    return f"{apk_sha256}_{spec.tag}.png"


@dataclass
class ConversionResult:
    image: ByteImage
    apk_sha256: str
    png_path: Path | None


def apk_to_image(
    apk_path: str | Path,
    spec: ImageSpec,
    source: SourceMode = SourceMode.DEX_ONLY,
    out_dir: str | Path | None = None,
) -> ConversionResult:
    """Full conversion for one APK: collect bytes, render, optionally write PNG.

    The PNG encoder settings are fixed, so repeated runs produce
    byte-identical files named <sha256-of-apk>_<mode>_<res>.png.
    """
    apk_path = Path(apk_path)
    sha = hashlib.sha256(apk_path.read_bytes()).hexdigest()
    with open_apk(apk_path) as archive:
        data = collect_code_bytes(archive, source)
    canvas = encode_canvas(data, spec.color_mode)
    image = resample(canvas, spec, source_len=len(data))

    png_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        png_path = out_dir / image_file_name(sha, spec)
        png.write_png(image.pixels, png_path)
    return ConversionResult(image=image, apk_sha256=sha, png_path=png_path)
