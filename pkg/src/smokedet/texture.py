"""Stage 3: texture descriptors as histograms of equivalent patterns.

Every descriptor here is a pattern function over the 3x3 neighbourhood of
a pixel that returns an integer code; the descriptor of an image is the
normalised histogram of codes over all interior pixels.

Neighbours are enumerated clockwise starting from the east pixel, in image
coordinates (row index grows downward)::

    5 6 7
    4 c 0
    3 2 1

so ``g_0`` is east, ``g_2`` south, ``g_4`` west and ``g_6`` north.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, UnsupportedKernelError

# (drow, dcol) for g_0 .. g_7
OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))

SMOKE = "smoke"
NON_SMOKE = "non-smoke"

CS_THRESHOLD = 3

# Table I descriptors that exist in the literature but are not built here.
DEFERRED_KERNELS = (
    "STS", "STU+", "STUx", "ILBP", "MBP", "LTP", "ILTP", "3DLBP",
    "D-LBP", "ID-LBP", "CS-TSDelta", "GLBP",
)


def neighborhoods(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split the interior of ``image`` into centres and the 8-neighbour ring.

    Works over the last two axes, so a stack of planes ``(..., H, W)`` gives
    centres ``(..., H-2, W-2)`` and a ring ``(8, ..., H-2, W-2)``.
    """
    img = np.asarray(image, dtype=np.int32)
    h, w = img.shape[-2:]
    if h < 3 or w < 3:
        raise ContractError(f"need at least a 3x3 image, got {h}x{w}")
    center = img[..., 1:h - 1, 1:w - 1]
    ring = np.stack([img[..., 1 + dr:h - 1 + dr, 1 + dc:w - 1 + dc] for dr, dc in OFFSETS])
    return center, ring


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack a leading bit axis into integers, bit ``p`` weighted ``2**p``."""
    out = np.zeros(bits.shape[1:], dtype=np.int32)
    for p in range(bits.shape[0]):
        out |= bits[p].astype(np.int32) << p
    return out


# ---------------------------------------------------------------------------
# lookup tables

def _transitions(pattern: int) -> int:
    return sum(((pattern >> p) & 1) != ((pattern >> ((p + 1) % 8)) & 1) for p in range(8))


def _uniform_lut() -> np.ndarray:
    lut = np.full(256, 58, dtype=np.int32)
    uniform = [p for p in range(256) if _transitions(p) <= 2]
    lut[uniform] = np.arange(len(uniform))
    return lut


UNIFORM_LUT = _uniform_lut()


def _rtu_lut() -> np.ndarray:
    lut = np.full((9, 9), -1, dtype=np.int32)
    k = 0
    for n_less in range(9):
        for n_eq in range(9 - n_less):
            lut[n_less, n_eq] = k
            k += 1
    return lut


RTU_LUT = _rtu_lut()

BGC3_ORDER = (0, 3, 6, 1, 4, 7, 2, 5)


# ---------------------------------------------------------------------------
# pattern functions: (center, ring, theta) -> integer codes

def _lbp_raw(center, ring):
    return _pack(ring >= center)


def lbp_code(center, ring, theta=None):
    return _lbp_raw(center, ring)


def uniform_lbp_code(center, ring, theta=None):
    return UNIFORM_LUT[_lbp_raw(center, ring)]


def rt_code(center, ring, theta=None):
    return (ring < center).sum(axis=0, dtype=np.int32)


def rtu_code(center, ring, theta=None):
    n_less = (ring < center).sum(axis=0)
    n_eq = (ring == center).sum(axis=0)
    return RTU_LUT[n_less, n_eq]


def mts_code(center, ring, theta=None):
    # half neighbourhood: E, NE, N, NW
    return _pack(ring[[0, 7, 6, 5]] >= center)


def cslbp_code(center, ring, theta=CS_THRESHOLD):
    t = CS_THRESHOLD if theta is None else theta
    return _pack(ring[:4] - ring[4:] >= t)


def cbp_code(center, ring, theta=CS_THRESHOLD):
    total = ring.sum(axis=0) + center
    # g_c >= mean of the 9 pixels, kept in integers
    centre_bit = (9 * center >= total).astype(np.int32)
    return cslbp_code(center, ring, theta) | (centre_bit << 4)


def bgc_loop_raw(ring, order: Sequence[int]) -> np.ndarray:
    """Raw loop code: bit ``k`` is ``g[order[k]] >= g[order[k+1]]`` around the cycle."""
    seq = ring[list(order)]
    return _pack(seq >= np.roll(seq, -1, axis=0))


def bgc1_code(center, ring, theta=None):
    return bgc_loop_raw(ring, range(8)) - 1


def bgc2_code(center, ring, theta=None):
    a = bgc_loop_raw(ring, (0, 2, 4, 6))
    b = bgc_loop_raw(ring, (1, 3, 5, 7))
    return 15 * (a - 1) + (b - 1)


def bgc3_code(center, ring, theta=None):
    return bgc_loop_raw(ring, BGC3_ORDER) - 1


def gld_code(center, ring, theta=None):
    return np.abs(center - ring[0])


def sobel(center, ring):
    """Sobel derivatives from the 3x3 ring; ``gy`` grows downward."""
    e, se, s, sw, w, nw, n, ne = ring
    gx = (ne + 2 * e + se) - (nw + 2 * w + sw)
    gy = (sw + 2 * s + se) - (nw + 2 * n + ne)
    return gx, gy


def eoh_code(center, ring, theta=None):
    gx, gy = sobel(center, ring)
    # angle measured counter-clockwise with "up" at 90 degrees
    angle = np.degrees(np.arctan2(-gy, gx)) % 360.0
    return (np.floor(angle / 22.5).astype(np.int32)) % 16


def eoh_weight(center, ring):
    gx, gy = sobel(center, ring)
    return np.hypot(gx, gy)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DescriptorKernel:
    """A local pattern function with its code range.

    ``pattern_fn(center, ring, theta)`` maps arrays of centres and neighbour
    rings to integer codes in ``[0, bin_count)``. ``global_fn`` computes the
    image-wide parameters ``theta`` when ``needs_global_pass`` is set.
    ``weight_fn``, when present, turns the histogram into a weighted one
    (used by EOH only).
    """

    name: str
    bin_count: int
    pattern_fn: Callable
    needs_global_pass: bool = False
    global_fn: Optional[Callable] = None
    weight_fn: Optional[Callable] = None
    hep: bool = True

    def codes(self, image: np.ndarray) -> np.ndarray:
        center, ring = neighborhoods(image)
        theta = self.global_fn(np.asarray(image)) if self.needs_global_pass else None
        return self.pattern_fn(center, ring, theta)


_REGISTRY = {
    k.name: k for k in (
        DescriptorKernel("GLD", 256, gld_code),
        DescriptorKernel("RT", 9, rt_code),
        DescriptorKernel("RTU", 45, rtu_code),
        DescriptorKernel("LBP", 256, lbp_code),
        DescriptorKernel("uniform-LBP", 59, uniform_lbp_code),
        DescriptorKernel("MTS", 16, mts_code),
        DescriptorKernel("CS-LBP", 16, cslbp_code),
        DescriptorKernel("CBP", 32, cbp_code),
        DescriptorKernel("BGC1", 255, bgc1_code),
        DescriptorKernel("BGC2", 225, bgc2_code),
        DescriptorKernel("BGC3", 255, bgc3_code),
        DescriptorKernel("EOH", 16, eoh_code, weight_fn=eoh_weight, hep=False),
    )
}


def kernel_registry() -> dict[str, DescriptorKernel]:
    return dict(_REGISTRY)


def get_kernel(name) -> DescriptorKernel:
    if isinstance(name, DescriptorKernel):
        return name
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnsupportedKernelError(name) from None


@dataclass
class Histogram:
    bins: np.ndarray
    normalizer: float
    kernel: str = ""

    def __array__(self, dtype=None, copy=None):
        return self.bins if dtype is None else self.bins.astype(dtype)

    def __len__(self):
        return len(self.bins)


def code_histogram(codes: np.ndarray, bin_count: int, weights: np.ndarray | None = None
                   ) -> tuple[np.ndarray, float]:
    """Normalised histogram of a code map, optionally weighted.

    A weighted histogram whose weights are all zero falls back to plain
    counts so the result always sums to one.
    """
    codes = np.asarray(codes).ravel()
    if codes.size == 0:
        raise ContractError("no interior positions to histogram")
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64).ravel()
        total = w.sum()
        if total > 0:
            return np.bincount(codes, weights=w, minlength=bin_count) / total, total
    counts = np.bincount(codes, minlength=bin_count).astype(np.float64)
    return counts / codes.size, float(codes.size)


def hep_histogram(image, kernel) -> Histogram:
    """Normalised code histogram of ``kernel`` over the interior of ``image``."""
    kernel = get_kernel(kernel)
    img = np.asarray(image)
    if img.ndim != 2:
        raise ContractError(f"expected a 2-D gray raster, got shape {img.shape}")
    center, ring = neighborhoods(img)
    theta = kernel.global_fn(img) if kernel.needs_global_pass else None
    codes = kernel.pattern_fn(center, ring, theta)
    weights = kernel.weight_fn(center, ring) if kernel.weight_fn is not None else None
    bins, d = code_histogram(codes, kernel.bin_count, weights)
    return Histogram(bins, d, kernel.name)


def hep_histograms(images, kernel) -> np.ndarray:
    """Histograms of a stack of equally sized images, shape ``(n, bin_count)``."""
    kernel = get_kernel(kernel)
    stack = np.asarray(images)
    if stack.ndim != 3:
        raise ContractError(f"expected an (n, H, W) stack, got shape {stack.shape}")
    n = len(stack)
    if n == 0:
        return np.zeros((0, kernel.bin_count))
    center, ring = neighborhoods(stack)
    if kernel.needs_global_pass:
        codes = np.stack([kernel.pattern_fn(center[k], ring[:, k], kernel.global_fn(stack[k]))
                          for k in range(n)])
    else:
        codes = kernel.pattern_fn(center, ring, None)
    codes = codes.reshape(n, -1)
    flat = (codes + kernel.bin_count * np.arange(n)[:, None]).ravel()
    counts = np.bincount(flat, minlength=n * kernel.bin_count).reshape(n, -1).astype(np.float64)
    hist = counts / codes.shape[1]
    if kernel.weight_fn is not None:
        w = kernel.weight_fn(center, ring).reshape(n, -1).astype(np.float64)
        sums = np.bincount(flat, weights=w.ravel(), minlength=n * kernel.bin_count).reshape(n, -1)
        totals = w.sum(axis=1)
        has = totals > 0
        hist[has] = sums[has] / totals[has, None]
    return hist


def classify_texture(hist, model) -> str:
    """Label a block histogram with a trained SVM (+1 means smoke)."""
    from .classify import predict

    label, _ = predict(model, np.asarray(hist, dtype=np.float64))
    return SMOKE if label > 0 else NON_SMOKE


# ---------------------------------------------------------------------------
# descriptor benchmark

@dataclass
class LabeledImageSet:
    images: list
    labels: list
    manifest: Optional[Path] = None

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ContractError("images and labels differ in length")

    def __len__(self):
        return len(self.images)

    def signed_labels(self) -> np.ndarray:
        return np.array([1 if lab == SMOKE else -1 for lab in self.labels])


def load_manifest(path) -> LabeledImageSet:
    """Read a ``path<TAB>label`` manifest of PPM/PGM images (labels ``smoke``/``non-smoke``).

    Relative paths are resolved against the manifest's directory; images are
    converted to 8-bit gray.
    """
    from .ingest import read_pnm, to_grayscale

    path = Path(path)
    images, labels = [], []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            file, label = line.split("\t")
        except ValueError:
            raise ContractError(f"{path}:{lineno}: expected 'path<TAB>label'") from None
        label = label.strip()
        if label not in (SMOKE, NON_SMOKE):
            raise ContractError(f"{path}:{lineno}: unknown label {label!r}")
        img_path = Path(file)
        if not img_path.is_absolute():
            img_path = path.parent / img_path
        images.append(to_grayscale(read_pnm(img_path)).pixels)
        labels.append(label)
    return LabeledImageSet(images, labels, path)


@dataclass
class BenchmarkRow:
    kernel: str
    accuracy: float
    extract_s: float
    dims: int
    recognize_s: float
    per_pair: list = field(default_factory=list)


def benchmark_descriptors(data: LabeledImageSet, kernels, svm_grid=None, repeats: int = 10,
                          split: float = 0.5, seed: int = 0) -> list[BenchmarkRow]:
    """Compare descriptors by SVM accuracy, extraction time, size and recognition time.

    For every kernel all histograms are extracted once (the timed pass), then
    each ``(C, gamma)`` pair is evaluated over ``repeats`` random stratified
    splits; the row keeps the best mean accuracy over the pairs.
    """
    from .classify import DEFAULT_GRID, cross_eval

    if repeats < 1:
        raise ContractError("repeats must be >= 1")
    if not 0 < split < 1:
        raise ContractError("split must lie strictly between 0 and 1")
    y = data.signed_labels()
    if len(set(y.tolist())) < 2:
        raise ContractError("benchmark needs both smoke and non-smoke images")
    grid = list(svm_grid or DEFAULT_GRID)

    rows = []
    for name in kernels:
        kernel = get_kernel(name)
        t0 = time.perf_counter()
        X = np.stack([hep_histogram(img, kernel).bins for img in data.images])
        extract_s = time.perf_counter() - t0
        report = cross_eval(X, y, grid, repeats=repeats, split=split, seed=seed)
        best = report.best_index
        rows.append(BenchmarkRow(kernel.name, report.best_accuracy, extract_s, kernel.bin_count,
                                 report.recognize_s[best], list(report.mean_accuracy)))
    return rows


REPORT_FIELDS = ("kernel", "accuracy", "extract_s", "dims", "recognize_s")


def write_report_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_FIELDS)
        for r in rows:
            writer.writerow([r.kernel, f"{r.accuracy:.6f}", f"{r.extract_s:.6f}", r.dims,
                             f"{r.recognize_s:.6f}"])


def read_report_csv(path) -> list[BenchmarkRow]:
    with open(path, newline="") as fh:
        return [BenchmarkRow(r["kernel"], float(r["accuracy"]), float(r["extract_s"]),
                             int(r["dims"]), float(r["recognize_s"]))
                for r in csv.DictReader(fh)]


def select_descriptor(report, acc_min: float = 0.975, time_max: float = 20.0,
                      dims_max: int = 256) -> Optional[str]:
    """Pick the most accurate descriptor meeting all three limits.

    Ties on accuracy go to the faster extractor. Returns ``None`` when no
    row qualifies.
    """
    rows = list(report)
    if not rows:
        raise ContractError("empty benchmark report")
    ok = [r for r in rows if r.accuracy >= acc_min and r.extract_s <= time_max and r.dims <= dims_max]
    if not ok:
        return None
    return min(ok, key=lambda r: (-r.accuracy, r.extract_s)).kernel
