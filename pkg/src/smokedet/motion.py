"""Stage 2: accumulative motion orientation and the upward-motion ratio.

Direction codes follow image coordinates with the row index growing
downward, so "up" means decreasing row:

====  =====  ==============
code  angle  (dx, dy) step
====  =====  ==============
1     0      (+1,  0)
2     45     (+1, -1)
3     90     ( 0, -1)
4     135    (-1, -1)
5     180    (-1,  0)
6     225    (-1, +1)
7     270    ( 0, +1)
8     315    (+1, +1)
====  =====  ==============

Code 0 means "no motion found" and never enters a histogram.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import ContractError, InvalidConfigError
from .ingest import BlockGrid, BlockRef, GrayFrame, block_view

DIRECTIONS = {
    1: (1, 0), 2: (1, -1), 3: (0, -1), 4: (-1, -1),
    5: (-1, 0), 6: (-1, 1), 7: (0, 1), 8: (1, 1),
}
UPWARD_CODES = (2, 3, 4)


def _gray(x) -> np.ndarray:
    return (x.pixels if isinstance(x, GrayFrame) else np.asarray(x)).astype(np.int32)


def block_direction(prev, cur, at: BlockRef, grid: BlockGrid, displacement: int = 3) -> int:
    """Dominant motion direction of one block between two frames.

    The block of ``cur`` is compared (SAD) against windows of ``prev``
    displaced by ``displacement`` pixels opposite to each candidate motion
    direction. Directions whose window leaves the frame are skipped. The
    best direction wins only if it beats the unshifted window strictly.
    """
    a, b = _gray(prev), _gray(cur)
    if a.shape != b.shape:
        raise ContractError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if not (0 <= at.row < grid.rows and 0 <= at.col < grid.cols):
        raise IndexError(f"block {at} outside {grid.rows}x{grid.cols} grid")
    h, w = a.shape
    bh, bw = grid.block_height, grid.block_width
    y0, x0 = at.row * bh, at.col * bw
    target = b[y0:y0 + bh, x0:x0 + bw]
    best_code, best_sad = 0, np.abs(target - a[y0:y0 + bh, x0:x0 + bw]).sum()
    for code in range(1, 9):
        dx, dy = DIRECTIONS[code]
        ys, xs = y0 - displacement * dy, x0 - displacement * dx
        if ys < 0 or xs < 0 or ys + bh > h or xs + bw > w:
            continue
        sad = np.abs(target - a[ys:ys + bh, xs:xs + bw]).sum()
        if sad < best_sad:
            best_code, best_sad = code, sad
    return best_code


def direction_codes(prev, cur, grid: BlockGrid, displacement: int = 3) -> np.ndarray:
    """Vectorised :func:`block_direction` over the whole grid."""
    a, b = _gray(prev), _gray(cur)
    if a.shape != b.shape:
        raise ContractError(f"frame shapes differ: {a.shape} vs {b.shape}")
    h, w = a.shape
    bh, bw = grid.block_height, grid.block_width
    rows = np.arange(grid.rows)[:, None] * bh
    cols = np.arange(grid.cols)[None, :] * bw

    zero = block_view(np.abs(b - a), grid).sum(axis=(2, 3))
    sads = np.full((8,) + grid.shape, np.iinfo(np.int64).max, dtype=np.int64)
    for code in range(1, 9):
        dx, dy = DIRECTIONS[code]
        sy, sx = displacement * dy, displacement * dx
        # shifted[y, x] = a[y - sy, x - sx] where defined
        shifted = np.zeros_like(a)
        dst_y = slice(max(sy, 0), h + min(sy, 0))
        src_y = slice(max(-sy, 0), h - max(sy, 0))
        dst_x = slice(max(sx, 0), w + min(sx, 0))
        src_x = slice(max(-sx, 0), w - max(sx, 0))
        shifted[dst_y, dst_x] = a[src_y, src_x]
        sad = block_view(np.abs(b - shifted), grid).sum(axis=(2, 3))
        valid = ((rows - sy >= 0) & (rows - sy + bh <= h)
                 & (cols - sx >= 0) & (cols - sx + bw <= w))
        sads[code - 1] = np.where(valid, sad, sads[code - 1])
    best = sads.argmin(axis=0)
    best_sad = np.take_along_axis(sads, best[None], axis=0)[0]
    return np.where(best_sad < zero, best + 1, 0).astype(np.int8)


class AmoState:
    """Sliding window of per-block direction codes.

    Holds at most ``window`` frames of codes; the histogram of a block is the
    count of each non-zero code currently in the window.
    """

    def __init__(self, shape: tuple[int, int], window: int = 15):
        if window < 1:
            raise InvalidConfigError(f"motion window must be >= 1, got {window}")
        self.shape = tuple(shape)
        self.window = window
        self._codes: deque[np.ndarray] = deque()
        self._hist = np.zeros(self.shape + (9,), dtype=np.int64)

    def __len__(self):
        return len(self._codes)

    def _add(self, codes, sign):
        r, c = np.indices(self.shape)
        np.add.at(self._hist, (r, c, codes), sign)

    def push(self, codes) -> "AmoState":
        codes = np.asarray(codes, dtype=np.int64)
        if codes.shape != self.shape:
            raise ContractError(f"codes shape {codes.shape} does not match grid {self.shape}")
        if codes.min(initial=0) < 0 or codes.max(initial=0) > 8:
            raise ContractError("direction codes must lie in 0..8")
        self._codes.append(codes)
        self._add(codes, 1)
        if len(self._codes) > self.window:
            self._add(self._codes.popleft(), -1)
        return self

    def histograms(self) -> np.ndarray:
        """Counts indexed ``[row, col, code - 1]`` for codes 1..8."""
        return self._hist[..., 1:].copy()

    def histogram(self, row: int, col: int) -> np.ndarray:
        return self._hist[row, col, 1:].copy()


def accumulate(state: AmoState, codes) -> AmoState:
    return state.push(codes)


def umr(hist) -> float | None:
    """Upward-motion ratio of an 8-bin direction histogram (``hist[k]`` counts code ``k+1``).

    Returns ``None`` when the histogram is empty.
    """
    h = np.asarray(hist, dtype=np.float64)
    if h.shape != (8,):
        raise ContractError(f"motion histogram must have 8 bins, got shape {h.shape}")
    total = h.sum()
    if total <= 0:
        return None
    return float(h[1:4].sum() / total)


def umr_map(state: AmoState) -> np.ndarray:
    """Per-block UMR with NaN where undefined."""
    h = state.histograms().astype(np.float64)
    total = h.sum(axis=-1)
    up = h[..., 1:4].sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, up / np.where(total > 0, total, 1), np.nan)


def filter_by_umr(mask, state: AmoState, t_u: float = 0.55) -> np.ndarray:
    """Keep candidate blocks whose UMR is defined and at least ``t_u``."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != state.shape:
        raise ContractError(f"mask shape {mask.shape} does not match grid {state.shape}")
    ratio = umr_map(state)
    keep = np.zeros(mask.shape, dtype=bool)
    defined = ~np.isnan(ratio)
    keep[defined] = ratio[defined] >= t_u
    return mask & keep
