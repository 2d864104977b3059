"""Minimal deterministic PNG writer and header probe.

Pixels are written with filter type 0 on every scanline and one fixed
zlib compression level, so the same pixel grid always produces the same
file bytes. Only 8-bit grayscale and truecolor are supported; that is
all the pipeline ever emits.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_COMPRESS_LEVEL = 9

COLOR_TYPE_GRAY = 0
COLOR_TYPE_RGB = 2


def _chunk(kind: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + kind
        + payload
        + struct.pack(">I", zlib.crc32(kind + payload) & 0xFFFFFFFF)
    )


def png_bytes(pixels: np.ndarray) -> bytes:
    """Encode a (h, w) or (h, w, 3) uint8 array as a PNG byte string."""
    if pixels.dtype != np.uint8:
        raise ValueError(f"pixels must be uint8, got {pixels.dtype}")
    if pixels.ndim == 2:
        color_type = COLOR_TYPE_GRAY
        height, width = pixels.shape
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        color_type = COLOR_TYPE_RGB
        height, width = pixels.shape[:2]
    else:
        raise ValueError(f"unsupported pixel shape {pixels.shape}")

    ihdr = struct.pack(">IIBBBBB", width, height, 8, color_type, 0, 0, 0)
    rows = pixels.reshape(height, -1)
    raw = b"".join(b"\x00" + rows[y].tobytes() for y in range(height))
    idat = zlib.compress(raw, _COMPRESS_LEVEL)
    return _SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


def write_png(pixels: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(png_bytes(pixels))
    return path


def read_png_header(source: str | Path | bytes) -> tuple[int, int, int]:
    """(width, height, color_type) from the IHDR chunk, without decoding pixels."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as handle:
            head = handle.read(33)
    else:
        head = bytes(source[:33])
    if len(head) < 33 or head[:8] != _SIGNATURE or head[12:16] != b"IHDR":
        raise ValueError("not a PNG file")
    width, height = struct.unpack(">II", head[16:24])
    color_type = head[25]
    return width, height, color_type


def read_png(source: str | Path | bytes) -> np.ndarray:
    """Decode an 8-bit grayscale or truecolor PNG into a uint8 array.

    Handles all five scanline filters but not interlacing or palettes;
    that covers everything this pipeline writes and the usual output of
    other encoders at these color types.
    """
    data = Path(source).read_bytes() if isinstance(source, (str, Path)) else bytes(source)
    if data[:8] != _SIGNATURE:
        raise ValueError("not a PNG file")

    width = height = None
    channels = 0
    idat = bytearray()
    pos = 8
    while pos + 8 <= len(data):
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        kind = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        if kind == b"IHDR":
            width, height, depth, color_type, _, _, interlace = struct.unpack(">IIBBBBB", payload)
            if depth != 8 or color_type not in (COLOR_TYPE_GRAY, COLOR_TYPE_RGB) or interlace:
                raise ValueError(
                    f"unsupported PNG (depth={depth}, color_type={color_type}, interlace={interlace})"
                )
            channels = 1 if color_type == COLOR_TYPE_GRAY else 3
        elif kind == b"IDAT":
            idat.extend(payload)
        elif kind == b"IEND":
            break
        pos += 12 + length
    if width is None:
        raise ValueError("PNG has no IHDR chunk")

    raw = zlib.decompress(bytes(idat))
    stride = width * channels
    if len(raw) != height * (stride + 1):
        raise ValueError("PNG scanline data has the wrong length")

    out = np.empty((height, stride), dtype=np.uint8)
    previous = np.zeros(stride, dtype=np.int32)
    for y in range(height):
        row_start = y * (stride + 1)
        filter_type = raw[row_start]
        line = np.frombuffer(raw, dtype=np.uint8, count=stride, offset=row_start + 1).astype(np.int32)
        if filter_type == 0:
            recon = line
        elif filter_type == 1:  # Sub
            recon = line.copy()
            for x in range(channels, stride):
                recon[x] = (recon[x] + recon[x - channels]) & 0xFF
        elif filter_type == 2:  # Up
            recon = (line + previous) & 0xFF
        elif filter_type == 3:  # Average
            recon = line.copy()
            for x in range(stride):
                left = recon[x - channels] if x >= channels else 0
                recon[x] = (recon[x] + ((left + previous[x]) >> 1)) & 0xFF
        elif filter_type == 4:  # Paeth
            recon = line.copy()
            for x in range(stride):
                left = int(recon[x - channels]) if x >= channels else 0
                up = int(previous[x])
                up_left = int(previous[x - channels]) if x >= channels else 0
                p = left + up - up_left
                pa, pb, pc = abs(p - left), abs(p - up), abs(p - up_left)
                if pa <= pb and pa <= pc:
                    predictor = left
                elif pb <= pc:
                    predictor = up
                else:
                    predictor = up_left
                recon[x] = (recon[x] + predictor) & 0xFF
        else:
            raise ValueError(f"unknown PNG filter type {filter_type}")
        out[y] = recon.astype(np.uint8)
        previous = recon

    if channels == 1:
        return out
    return out.reshape(height, width, channels)
