"""Stage 1: moving, smoke-coloured blocks.

Block masks are plain boolean arrays of shape ``(grid.rows, grid.cols)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InvalidConfigError
from .ingest import BlockGrid, Frame, GrayFrame, block_view


@dataclass(frozen=True)
class ColorRuleParams:
    max_channel_spread: int = 20
    intensity_low: int = 80
    intensity_high: int = 220
    min_fraction: float = 0.5

    def __post_init__(self):
        if not 0 <= self.intensity_low < self.intensity_high <= 255:
            raise InvalidConfigError(
                f"need 0 <= intensity_low < intensity_high <= 255, got "
                f"{self.intensity_low}, {self.intensity_high}")
        if not 0.0 <= self.min_fraction <= 1.0:
            raise InvalidConfigError(f"min_fraction must lie in [0, 1], got {self.min_fraction}")
        if self.max_channel_spread < 0:
            raise InvalidConfigError("max_channel_spread must be non-negative")


def default_t_b(grid: BlockGrid) -> float:
    """Default motion threshold: four gray levels per pixel on average."""
    return 4.0 * grid.block_width * grid.block_height


def _gray(x) -> np.ndarray:
    return x.pixels if isinstance(x, GrayFrame) else np.asarray(x)


def moving_blocks(prev, cur, grid: BlockGrid, t_b: float | None = None) -> np.ndarray:
    """Flag blocks whose summed absolute frame difference exceeds ``t_b``."""
    if isinstance(prev, GrayFrame) and isinstance(cur, GrayFrame) and prev.index + 1 != cur.index:
        raise ContractError(f"frames {prev.index} and {cur.index} are not consecutive")
    a, b = _gray(prev), _gray(cur)
    if a.shape != b.shape:
        raise ContractError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if t_b is None:
        t_b = default_t_b(grid)
    diff = np.abs(a.astype(np.int32) - b.astype(np.int32))
    sad = block_view(diff, grid).sum(axis=(2, 3), dtype=np.int64)
    return sad > t_b


def smoke_colored_pixels(rgb: np.ndarray, params: ColorRuleParams) -> np.ndarray:
    px = np.asarray(rgb, dtype=np.int32)
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    spread = np.maximum(np.maximum(np.abs(r - g), np.abs(g - b)), np.abs(b - r))
    total = r + g + b
    return ((spread <= params.max_channel_spread)
            & (total >= 3 * params.intensity_low)
            & (total <= 3 * params.intensity_high))


def smoke_colored_blocks(frame, grid: BlockGrid, params: ColorRuleParams | None = None) -> np.ndarray:
    """Flag blocks in which at least ``min_fraction`` of the pixels look grayish."""
    params = params or ColorRuleParams()
    rgb = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    ok = block_view(smoke_colored_pixels(rgb, params), grid)
    counts = ok.sum(axis=(2, 3))
    return counts >= params.min_fraction * grid.block_width * grid.block_height


def candidate_blocks(moving: np.ndarray, colored: np.ndarray) -> np.ndarray:
    moving = np.asarray(moving, dtype=bool)
    colored = np.asarray(colored, dtype=bool)
    if moving.shape != colored.shape:
        raise ContractError(f"mask shapes differ: {moving.shape} vs {colored.shape}")
    return moving & colored
