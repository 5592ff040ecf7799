"""Frame decoding, grayscale conversion and block partitioning.

Supported inputs are binary PPM (``P6``) and PGM (``P5``) files with a
maxval of 255, either as single images or as a directory of frames sorted
lexicographically, and uncompressed YUV4MPEG2 streams in 4:2:0 or 4:4:4.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Union

import numpy as np

from .errors import ContractError, FormatError, InvalidConfigError

FRAME_SUFFIXES = (".ppm", ".pgm")


@dataclass(frozen=True)
class Frame:
    """An RGB frame; ``pixels`` has shape ``(height, width, 3)`` and dtype uint8."""

    pixels: np.ndarray
    index: int = 0

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ContractError(f"Frame needs an (H, W, 3) uint8 raster, got {px.shape} {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ContractError("Frame must be at least 1x1")
        px.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class GrayFrame:
    """An 8-bit luminance frame; ``pixels`` has shape ``(height, width)``."""

    pixels: np.ndarray
    index: int = 0

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 2 or px.dtype != np.uint8:
            raise ContractError(f"GrayFrame needs an (H, W) uint8 raster, got {px.shape} {px.dtype}")
        px.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class BlockGrid:
    block_width: int
    block_height: int
    rows: int
    cols: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def covered_height(self) -> int:
        return self.rows * self.block_height

    @property
    def covered_width(self) -> int:
        return self.cols * self.block_width

    def refs(self) -> Iterator["BlockRef"]:
        for i in range(self.rows):
            for j in range(self.cols):
                yield BlockRef(i, j)


@dataclass(frozen=True)
class BlockRef:
    row: int
    col: int


def make_grid(image_width: int, image_height: int, block_width: int = 32, block_height: int = 32) -> BlockGrid:
    """Partition an ``image_width`` x ``image_height`` frame into whole blocks.

    Trailing pixels that do not fill a complete block are ignored.
    """
    for name, v in (("image_width", image_width), ("image_height", image_height),
                    ("block_width", block_width), ("block_height", block_height)):
        if int(v) != v or v < 1:
            raise InvalidConfigError(f"{name} must be a positive integer, got {v!r}")
    if block_width > image_width or block_height > image_height:
        raise InvalidConfigError(
            f"block {block_width}x{block_height} does not fit in image {image_width}x{image_height}")
    return BlockGrid(block_width, block_height, image_height // block_height, image_width // block_width)


def _raster(frame) -> np.ndarray:
    return frame.pixels if isinstance(frame, (Frame, GrayFrame)) else np.asarray(frame)


def block_pixels(frame, grid: BlockGrid, at: BlockRef) -> np.ndarray:
    """Return a view of block ``at``; works on frames and bare rasters alike."""
    if not (0 <= at.row < grid.rows and 0 <= at.col < grid.cols):
        raise IndexError(f"block {at} outside {grid.rows}x{grid.cols} grid")
    y0 = at.row * grid.block_height
    x0 = at.col * grid.block_width
    return _raster(frame)[y0:y0 + grid.block_height, x0:x0 + grid.block_width]


def block_view(raster: np.ndarray, grid: BlockGrid) -> np.ndarray:
    """Reshape a raster to ``(rows, cols, block_height, block_width, ...)``."""
    raster = np.asarray(raster)
    cropped = raster[:grid.covered_height, :grid.covered_width]
    shape = (grid.rows, grid.block_height, grid.cols, grid.block_width) + raster.shape[2:]
    return np.swapaxes(cropped.reshape(shape), 1, 2)


def to_grayscale(frame: Frame) -> GrayFrame:
    # BT.601 luma in exact integer arithmetic, round half up
    px = frame.pixels.astype(np.uint32)
    y = (299 * px[..., 0] + 587 * px[..., 1] + 114 * px[..., 2] + 500) // 1000
    return GrayFrame(np.minimum(y, 255).astype(np.uint8), frame.index)


# ---------------------------------------------------------------------------
# PPM / PGM

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _parse_pnm_header(data: bytes, path) -> tuple[bytes, int, int, int]:
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise FormatError(f"{path}: truncated PNM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported magic bytes {magic[:2]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PNM header") from None
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255, got {maxval}")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: bad dimensions {width}x{height}")
    # exactly one whitespace byte separates the header from the raster
    return magic, width, height, pos + 1


def read_pnm(path, index: int = 0) -> Frame:
    """Read a binary PPM or PGM file as an RGB :class:`Frame`."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read frame file {path}: {exc.strerror}", str(path)) from exc
    magic, width, height, offset = _parse_pnm_header(data, path)
    channels = 3 if magic == b"P6" else 1
    n = width * height * channels
    raw = data[offset:offset + n]
    if len(raw) != n:
        raise FormatError(f"{path}: expected {n} raster bytes, found {len(raw)}")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    if channels == 1:
        arr = np.repeat(arr, 3, axis=2)
    return Frame(arr.copy(), index)


def write_ppm(path, frame) -> None:
    px = _raster(frame).astype(np.uint8)
    h, w = px.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(px).tobytes())


def write_pgm(path, raster) -> None:
    px = np.asarray(_raster(raster), dtype=np.uint8)
    h, w = px.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(px).tobytes())


# ---------------------------------------------------------------------------
# YUV4MPEG2

def _ycbcr_to_rgb(y, cb, cr) -> np.ndarray:
    # full-range BT.601 (JFIF) inverse
    y = y.astype(np.float64)
    cb = cb.astype(np.float64) - 128.0
    cr = cr.astype(np.float64) - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def _rgb_to_ycbcr(px: np.ndarray):
    p = px.astype(np.float64)
    r, g, b = p[..., 0], p[..., 1], p[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return tuple(np.clip(np.rint(c), 0, 255).astype(np.uint8) for c in (y, cb, cr))


def _read_y4m(path) -> Iterator[Frame]:
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read Y4M file {path}: {exc.strerror}", str(path)) from exc
    with fh:
        header = fh.readline()
        if not header.startswith(b"YUV4MPEG2"):
            raise FormatError(f"{path}: unsupported magic bytes {header[:9]!r}")
        width = height = None
        chroma = b"420"
        for tag in header.split()[1:]:
            key, val = tag[:1], tag[1:]
            if key == b"W":
                width = int(val)
            elif key == b"H":
                height = int(val)
            elif key == b"C":
                chroma = val
        if not width or not height:
            raise FormatError(f"{path}: Y4M header lacks W/H tags")
        if chroma.startswith(b"420"):
            cw, ch = (width + 1) // 2, (height + 1) // 2
        elif chroma == b"444":
            cw, ch = width, height
        else:
            raise FormatError(f"{path}: unsupported Y4M colorspace C{chroma.decode(errors='replace')}")
        luma, chroma_n = width * height, cw * ch
        index = 0
        while True:
            marker = fh.readline()
            if not marker:
                return
            if not marker.startswith(b"FRAME"):
                raise FormatError(f"{path}: frame {index}: expected FRAME marker")
            buf = fh.read(luma + 2 * chroma_n)
            if len(buf) != luma + 2 * chroma_n:
                raise FormatError(f"{path}: frame {index}: truncated frame data")
            plane = np.frombuffer(buf, dtype=np.uint8)
            y = plane[:luma].reshape(height, width)
            cb = plane[luma:luma + chroma_n].reshape(ch, cw)
            cr = plane[luma + chroma_n:].reshape(ch, cw)
            if (cw, ch) != (width, height):
                # nearest-neighbour chroma upsampling
                cb = np.repeat(np.repeat(cb, 2, axis=0), 2, axis=1)[:height, :width]
                cr = np.repeat(np.repeat(cr, 2, axis=0), 2, axis=1)[:height, :width]
            yield Frame(_ycbcr_to_rgb(y, cb, cr), index)
            index += 1


def write_y4m(path, frames, fps: int = 25, chroma: str = "444") -> None:
    """Write RGB frames as a YUV4MPEG2 stream (``chroma`` is ``"444"`` or ``"420"``)."""
    frames = list(frames)
    if not frames:
        raise ContractError("write_y4m needs at least one frame")
    h, w = _raster(frames[0]).shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"YUV4MPEG2 W%d H%d F%d:1 Ip A1:1 C%s\n" % (w, h, fps, chroma.encode()))
        for f in frames:
            y, cb, cr = _rgb_to_ycbcr(_raster(f))
            if chroma.startswith("420"):
                cb = cb[::2, ::2]
                cr = cr[::2, ::2]
            fh.write(b"FRAME\n")
            for plane in (y, cb, cr):
                fh.write(np.ascontiguousarray(plane).tobytes())


# ---------------------------------------------------------------------------

def _detect_format(source: Path) -> str:
    if source.is_dir():
        return "pnm-dir"
    suffix = source.suffix.lower()
    if suffix == ".y4m":
        return "y4m"
    if suffix in FRAME_SUFFIXES:
        return "pnm"
    with open(source, "rb") as fh:
        head = fh.read(9)
    if head.startswith(b"YUV4MPEG2"):
        return "y4m"
    if head[:2] in (b"P5", b"P6"):
        return "pnm"
    raise FormatError(f"{source}: unsupported magic bytes {head[:2]!r}")


def load_sequence(source: Union[str, os.PathLike], fmt: str | None = None) -> Iterator[Frame]:
    """Yield the frames of a sequence in order, indexed from 0.

    Parameters
    ----------
    source : path
        A directory of PPM/PGM frames (sorted by file name), a single PPM/PGM
        image, or a Y4M file.
    fmt : {"pnm-dir", "pnm", "y4m"}, optional
        Format tag; detected from the path when omitted.

    Raises
    ------
    OSError
        A frame file cannot be read.
    FormatError
        Bad magic bytes, or a frame whose size differs from the first frame.
    """
    source = Path(source)
    if not source.exists():
        raise FileNotFoundError(2, f"no such sequence: {source}", str(source))
    fmt = fmt or _detect_format(source)
    if fmt == "pnm-dir":
        paths = sorted(p for p in source.iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
        frames = (read_pnm(p, i) for i, p in enumerate(paths))
    elif fmt == "pnm":
        frames = iter([read_pnm(source, 0)])
    elif fmt == "y4m":
        frames = _read_y4m(source)
    else:
        raise FormatError(f"unknown sequence format tag {fmt!r}")

    shape = None
    for frame in frames:
        if shape is None:
            shape = frame.pixels.shape
        elif frame.pixels.shape != shape:
            raise FormatError(
                f"{source}: frame {frame.index} is {frame.width}x{frame.height}, "
                f"expected {shape[1]}x{shape[0]}")
        yield frame


def save_sequence(directory, frames, prefix: str = "f") -> list[Path]:
    """Write frames as ``<prefix>0000.ppm``, ``<prefix>0001.ppm``, ... into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, f in enumerate(frames):
        p = directory / f"{prefix}{i:04d}.ppm"
        write_ppm(p, f)
        paths.append(p)
    return paths
