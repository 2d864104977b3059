"""Byte-to-image conversion: canvas mapping, resampling, PNG stability."""

import numpy as np
import pytest
from PIL import Image

from apkmodal.errors import EmptyInput
from apkmodal.image import (
    ColorMode,
    ImageSpec,
    ResampleFilter,
    all_specs,
    apk_to_image,
    canvas_to_bytes,
    encode_canvas,
    resample,
)
from apkmodal.png import png_bytes, read_png, read_png_header, write_png
from apkmodal.rng import SplitMix64


def random_bytes(rng: SplitMix64, length: int) -> bytes:
    return bytes(rng.next_below(256) for _ in range(length))


def test_empty_input_rejected():
    with pytest.raises(EmptyInput):
        encode_canvas(b"", ColorMode.GRAYSCALE)


def test_grayscale_zero_bytes_give_black_canvas():
    canvas = encode_canvas(b"\x00" * 16384, ColorMode.GRAYSCALE)
    assert canvas.shape == (128, 128)
    assert not canvas.any()


def test_rgb_canvas_hand_computed():
    canvas = encode_canvas(bytes(range(1, 13)), ColorMode.RGB)
    assert canvas.shape == (2, 2, 3)
    assert tuple(canvas[0, 0]) == (1, 2, 3)
    assert tuple(canvas[0, 1]) == (4, 5, 6)
    assert tuple(canvas[1, 0]) == (7, 8, 9)
    assert tuple(canvas[1, 1]) == (10, 11, 12)


def test_rgb_canvas_matches_reshaping_oracle():
    rng = SplitMix64(7)
    data = random_bytes(rng, 27)  # 9 pixels, side 3, no padding
    canvas = encode_canvas(data, ColorMode.RGB)
    oracle = np.frombuffer(data, dtype=np.uint8).reshape(3, 3, 3)
    assert np.array_equal(canvas, oracle)


def test_grayscale_padding_rule():
    canvas = encode_canvas(b"\x0a\x0b\x0c\x0d\x0e", ColorMode.GRAYSCALE)
    assert canvas.shape == (3, 3)
    flat = canvas.reshape(-1)
    assert bytes(flat[:5]) == b"\x0a\x0b\x0c\x0d\x0e"
    assert not flat[5:].any()


def test_canvas_side_formula():
    import math

    for length in (1, 2, 3, 16, 17, 100, 12288, 12289):
        for mode in ColorMode:
            canvas = encode_canvas(b"\x01" * length, mode)
            pixels = math.ceil(length / mode.channels)
            assert canvas.shape[0] == math.ceil(math.sqrt(pixels))


def test_round_trip_grayscale_and_rgb():
    rng = SplitMix64(42)
    for _ in range(50):
        length = 1 + rng.next_below(5000)
        data = random_bytes(rng, length)
        for mode in ColorMode:
            canvas = encode_canvas(data, mode)
            assert canvas_to_bytes(canvas, length) == data


def test_resample_identity_when_sides_match():
    canvas = encode_canvas(bytes(range(256)) * 64, ColorMode.GRAYSCALE)
    assert canvas.shape == (128, 128)
    out = resample(canvas, ImageSpec(ColorMode.GRAYSCALE, 128))
    assert np.array_equal(out.pixels, canvas)


def test_nearest_neighbor_blocks():
    canvas = np.array([[10, 20], [30, 40]], dtype=np.uint8)
    idx = [(x * 2) // 4 for x in range(4)]  # index formula at R=4, s=2
    expected = np.array([[canvas[y, x] for x in idx] for y in idx], dtype=np.uint8)
    assert np.array_equal(expected[:2, :2], np.full((2, 2), 10))
    assert np.array_equal(expected[2:, 2:], np.full((2, 2), 40))

    out = _resample_free(canvas, 4)
    assert np.array_equal(out, expected)


def _resample_free(canvas: np.ndarray, res: int) -> np.ndarray:
    """Nearest-neighbor at an arbitrary resolution (test-only; the public
    ImageSpec pins resolutions to the three supported cells)."""
    idx = (np.arange(res, dtype=np.int64) * canvas.shape[0]) // res
    return canvas[np.ix_(idx, idx)]


def test_nearest_upscale_only_emits_source_values():
    rng = SplitMix64(3)
    canvas = np.array(
        [[rng.next_below(256) for _ in range(3)] for _ in range(3)], dtype=np.uint8
    )
    out = resample(canvas, ImageSpec(ColorMode.GRAYSCALE, 128))
    assert out.pixels.shape == (128, 128)
    assert set(np.unique(out.pixels)) <= set(np.unique(canvas))


def test_all_specs_have_exact_dimensions():
    rng = SplitMix64(11)
    data = random_bytes(rng, 3000)
    for spec in all_specs():
        canvas = encode_canvas(data, spec.color_mode)
        out = resample(canvas, spec, source_len=len(data))
        expected_shape = (
            (spec.resolution, spec.resolution)
            if spec.color_mode is ColorMode.GRAYSCALE
            else (spec.resolution, spec.resolution, 3)
        )
        assert out.pixels.shape == expected_shape
        assert out.source_len == 3000


def test_single_byte_mutation_is_local():
    # permuting input bytes permutes only the matching canvas cells
    rng = SplitMix64(99)
    data = bytearray(random_bytes(rng, 400))
    base = encode_canvas(bytes(data), ColorMode.GRAYSCALE)
    position = 123
    data[position] = (data[position] + 1) % 256
    mutated = encode_canvas(bytes(data), ColorMode.GRAYSCALE)
    diff = np.argwhere(base != mutated)
    side = base.shape[0]
    assert diff.tolist() == [[position // side, position % side]]


def test_bilinear_shape_and_range():
    rng = SplitMix64(5)
    data = random_bytes(rng, 1000)
    canvas = encode_canvas(data, ColorMode.RGB)
    out = resample(canvas, ImageSpec(ColorMode.RGB, 256, ResampleFilter.BILINEAR))
    assert out.pixels.shape == (256, 256, 3)
    assert out.pixels.dtype == np.uint8


def test_invalid_resolution_rejected():
    with pytest.raises(ValueError):
        ImageSpec(ColorMode.GRAYSCALE, 200)


# -- PNG writer ------------------------------------------------------------------

def test_png_decodes_identically_with_pillow(tmp_path):
    rng = SplitMix64(17)
    gray = np.array([[rng.next_below(256) for _ in range(64)] for _ in range(64)], dtype=np.uint8)
    rgb = np.array(
        [[[rng.next_below(256) for _ in range(3)] for _ in range(32)] for _ in range(32)],
        dtype=np.uint8,
    )
    for pixels, pil_mode in ((gray, "L"), (rgb, "RGB")):
        path = write_png(pixels, tmp_path / f"{pil_mode}.png")
        with Image.open(path) as im:
            assert im.mode == pil_mode
            assert np.array_equal(np.asarray(im), pixels)


def test_png_bytes_stable_across_calls():
    pixels = np.arange(64, dtype=np.uint8).reshape(8, 8)
    assert png_bytes(pixels) == png_bytes(pixels)


def test_own_reader_matches_pillow_on_foreign_png(tmp_path):
    # a Pillow-written file exercises filters our writer never emits
    rng = SplitMix64(23)
    pixels = np.array(
        [[(x * 7 + y * 13 + rng.next_below(8)) % 256 for x in range(48)] for y in range(48)],
        dtype=np.uint8,
    )
    path = tmp_path / "pillow.png"
    Image.fromarray(pixels, "L").save(path, optimize=True)
    assert np.array_equal(read_png(path), pixels)

    rgb = np.dstack([pixels, pixels[::-1], pixels.T]).astype(np.uint8)
    path_rgb = tmp_path / "pillow_rgb.png"
    Image.fromarray(rgb, "RGB").save(path_rgb)
    assert np.array_equal(read_png(path_rgb), rgb)


def test_png_header_probe(tmp_path):
    pixels = np.zeros((16, 16, 3), dtype=np.uint8)
    path = write_png(pixels, tmp_path / "probe.png")
    assert read_png_header(path) == (16, 16, 2)


# -- apk_to_image ------------------------------------------------------------------

def test_apk_to_image_png_matches_memory(fixture_apk, tmp_path):
    spec = ImageSpec(ColorMode.GRAYSCALE, 128)
    result = apk_to_image(fixture_apk, spec, out_dir=tmp_path / "out")
    assert result.png_path is not None
    with Image.open(result.png_path) as im:
        assert np.array_equal(np.asarray(im), result.image.pixels)
    assert result.png_path.name == f"{result.apk_sha256}_grayscale_128.png"


def test_apk_to_image_bit_identical_across_runs(fixture_apk, tmp_path):
    spec = ImageSpec(ColorMode.RGB, 256)
    first = apk_to_image(fixture_apk, spec, out_dir=tmp_path / "a")
    second = apk_to_image(fixture_apk, spec, out_dir=tmp_path / "b")
    assert first.png_path.read_bytes() == second.png_path.read_bytes()


def test_apk_to_image_all_six_cells(fixture_apk, tmp_path):
    out = tmp_path / "cells"
    for spec in all_specs():
        result = apk_to_image(fixture_apk, spec, out_dir=out)
        width, height, color_type = read_png_header(result.png_path)
        assert (width, height) == (spec.resolution, spec.resolution)
        assert color_type == (0 if spec.color_mode is ColorMode.GRAYSCALE else 2)
    assert len(list(out.glob("*.png"))) == 6


def test_parallel_batch_matches_serial(fixture_apk, tmp_path):
    import concurrent.futures

    specs = all_specs()
    serial = {}
    for spec in specs:
        result = apk_to_image(fixture_apk, spec, out_dir=tmp_path / "serial")
        serial[result.png_path.name] = result.png_path.read_bytes()

    with concurrent.futures.ThreadPoolExecutor(max_workers=6) as pool:
        futures = [
            pool.submit(apk_to_image, fixture_apk, spec, out_dir=tmp_path / "parallel")
            for spec in specs
        ]
        for future in futures:
            result = future.result()
            assert serial[result.png_path.name] == result.png_path.read_bytes()
