"""Stage 5: smoke history image.

Each block carries a recency counter. A raw detection is confirmed only if
the block's counter, read before this frame's update, has reached the
threshold; the counter is then reset to its maximum on detection and
decays by one otherwise.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, InvalidConfigError


class ShiMap:
    def __init__(self, shape: tuple[int, int], t_max: int = 15, threshold: int = 10):
        if t_max < 1 or not 0 < threshold <= t_max:
            raise InvalidConfigError(f"need 0 < threshold <= t_max, got TH={threshold}, T={t_max}")
        self.t_max = int(t_max)
        self.threshold = int(threshold)
        self.counters = np.zeros(shape, dtype=np.int32)

    @property
    def shape(self):
        return self.counters.shape

    def copy(self) -> "ShiMap":
        other = ShiMap(self.shape, self.t_max, self.threshold)
        other.counters = self.counters.copy()
        return other

    def to_image(self) -> np.ndarray:
        """Counters scaled to 8-bit gray, one pixel per block."""
        return np.rint(self.counters * (255.0 / self.t_max)).astype(np.uint8)


def decide_and_update(shi: ShiMap, det) -> tuple[np.ndarray, ShiMap]:
    """Gate detections by history, then advance the history by one frame.

    Returns the confirmed mask and a new map; ``shi`` itself is untouched.
    """
    det = np.asarray(det, dtype=bool)
    if det.shape != shi.shape:
        raise ContractError(f"detection mask {det.shape} does not match SHI {shi.shape}")
    final = det & (shi.counters >= shi.threshold)
    nxt = shi.copy()
    nxt.counters = np.where(det, shi.t_max, np.maximum(shi.counters - 1, 0)).astype(np.int32)
    return final, nxt
