import numpy as np
import pytest
from hypothesis import given, strategies as st

from smokedet.errors import ContractError, FormatError, InvalidConfigError
from smokedet.ingest import (BlockRef, Frame, block_pixels, block_view, load_sequence, make_grid,
                             read_pnm, save_sequence, to_grayscale, write_pgm, write_ppm, write_y4m)


def _frames(rng, n, h=48, w=64):
    return [Frame(rng.integers(0, 256, (h, w, 3), dtype=np.uint8), i) for i in range(n)]


@pytest.mark.parametrize("w,h,bw,bh,rows,cols", [
    (320, 240, 32, 32, 7, 10),
    (64, 64, 32, 32, 2, 2),
    (100, 50, 32, 16, 3, 3),
    (32, 32, 32, 32, 1, 1),
])
def test_grid_dimensions(w, h, bw, bh, rows, cols):
    g = make_grid(w, h, bw, bh)
    assert (g.rows, g.cols) == (rows, cols)
    assert g.covered_height <= h and g.covered_width <= w
    assert len(list(g.refs())) == rows * cols


@pytest.mark.parametrize("args", [(0, 10), (10, 10, 0, 4), (16, 16, 32, 8), (16.5, 16, 8, 8)])
def test_grid_rejects_bad_sizes(args):
    with pytest.raises(InvalidConfigError):
        make_grid(*args)


def test_block_pixels_and_view_agree(rng):
    f = _frames(rng, 1, 70, 100)[0]
    g = make_grid(100, 70, 32, 32)
    view = block_view(f.pixels, g)
    assert view.shape == (2, 3, 32, 32, 3)
    for ref in g.refs():
        np.testing.assert_array_equal(block_pixels(f, g, ref), view[ref.row, ref.col])
        np.testing.assert_array_equal(block_pixels(f, g, ref),
                                      f.pixels[ref.row * 32:(ref.row + 1) * 32, ref.col * 32:(ref.col + 1) * 32])
    with pytest.raises(IndexError):
        block_pixels(f, g, BlockRef(2, 0))


def test_frames_are_read_only(rng):
    f = _frames(rng, 1)[0]
    with pytest.raises(ValueError):
        f.pixels[0, 0, 0] = 1


def test_grayscale_matches_integer_luma(rng):
    f = _frames(rng, 1)[0]
    p = f.pixels.astype(np.int64)
    want = (299 * p[..., 0] + 587 * p[..., 1] + 114 * p[..., 2] + 500) // 1000
    g = to_grayscale(f)
    assert g.pixels.dtype == np.uint8 and g.index == f.index
    np.testing.assert_array_equal(g.pixels, want)


def test_ppm_directory_round_trip(tmp_path, rng):
    frames = _frames(rng, 5)
    save_sequence(tmp_path, frames)
    back = list(load_sequence(tmp_path))
    assert [f.index for f in back] == list(range(5))
    for a, b in zip(frames, back):
        np.testing.assert_array_equal(a.pixels, b.pixels)


def test_pgm_reads_as_gray_rgb(tmp_path, rng):
    raster = rng.integers(0, 256, (9, 13), dtype=np.uint8)
    write_pgm(tmp_path / "a.pgm", raster)
    f = read_pnm(tmp_path / "a.pgm")
    assert f.pixels.shape == (9, 13, 3)
    for c in range(3):
        np.testing.assert_array_equal(f.pixels[..., c], raster)


def test_pnm_header_comments(tmp_path):
    body = bytes(range(6))
    (tmp_path / "c.ppm").write_bytes(b"P6\n# a comment\n2 1\n# another\n255\n" + body)
    f = read_pnm(tmp_path / "c.ppm")
    np.testing.assert_array_equal(f.pixels.ravel(), np.arange(6))


def test_bad_magic_is_format_error(tmp_path):
    (tmp_path / "x.ppm").write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(FormatError):
        read_pnm(tmp_path / "x.ppm")


def test_missing_file_names_path(tmp_path):
    with pytest.raises(OSError, match="nope.ppm"):
        read_pnm(tmp_path / "nope.ppm")


def test_size_change_mid_sequence(tmp_path, rng):
    write_ppm(tmp_path / "f0000.ppm", _frames(rng, 1, 16, 16)[0])
    write_ppm(tmp_path / "f0001.ppm", _frames(rng, 1, 16, 24)[0])
    with pytest.raises(FormatError, match="1"):
        list(load_sequence(tmp_path))


def test_y4m_444_ten_frames(tmp_path, rng):
    # smooth, mid-range content keeps the YCbCr round trip within rounding
    base = np.linspace(60, 190, 64)[None, :, None] * np.ones((48, 1, 3))
    frames = [Frame(np.clip(base + 3 * i + rng.integers(-5, 6, base.shape), 0, 255).astype(np.uint8), i)
              for i in range(10)]
    write_y4m(tmp_path / "v.y4m", frames)
    back = list(load_sequence(tmp_path / "v.y4m"))
    assert len(back) == 10 and [f.index for f in back] == list(range(10))
    for a, b in zip(frames, back):
        assert np.abs(a.pixels.astype(int) - b.pixels.astype(int)).max() <= 2


def test_y4m_420_gray_is_exact_luma(tmp_path, rng):
    g = rng.integers(0, 256, (16, 20), dtype=np.uint8)
    frames = [Frame(np.repeat(g[..., None], 3, axis=2), 0)]
    write_y4m(tmp_path / "g.y4m", frames, chroma="420")
    back = next(iter(load_sequence(tmp_path / "g.y4m")))
    assert np.abs(back.pixels.astype(int) - g[..., None]).max() <= 1


def test_y4m_rejects_garbage(tmp_path):
    (tmp_path / "b.y4m").write_bytes(b"NOTY4M W2 H2\n")
    with pytest.raises(FormatError):
        list(load_sequence(tmp_path / "b.y4m"))


def test_frame_shape_contract():
    with pytest.raises((ContractError, ValueError)):
        Frame(np.zeros((4, 4), dtype=np.uint8), 0)


@given(st.integers(1, 700), st.integers(1, 500), st.integers(1, 64), st.integers(1, 64))
def test_grid_never_has_partial_blocks(w, h, bw, bh):
    if bw > w or bh > h:
        return
    g = make_grid(w, h, bw, bh)
    assert g.rows * bh <= h < (g.rows + 1) * bh
    assert g.cols * bw <= w < (g.cols + 1) * bw


def test_grayscale_idempotent_on_achromatic():
    v = np.arange(256, dtype=np.uint8).reshape(16, 16)
    f = Frame(np.repeat(v[..., None], 3, axis=2), 0)
    np.testing.assert_array_equal(to_grayscale(f).pixels, v)
