"""Frame-by-frame smoke detection, model training and alarm metrics.

Per frame ``t >= 1`` the detector runs:

1. candidate blocks: moving and smoke-coloured;
2. upward-motion-ratio filter over the sliding direction window;
3. texture SVM on the block's pattern histogram;
4. space-time SVM on the block's ``q``-frame volume (abstains until ``q``
   frames are buffered);
5. smoke-history gate.

A frame raises an alarm when at least ``min_blocks`` blocks survive all
stages. Disabled stages pass their input through unchanged.
"""

from __future__ import annotations

import json
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import candidate as cand_mod
from .classify import SvmModel, cross_eval, train_svm
from .config import PipelineConfig
from .errors import ContractError, InsufficientDataError, InvalidConfigError
from .ingest import BlockRef, Frame, block_view, load_sequence, make_grid, to_grayscale, write_pgm, write_ppm
from .motion import AmoState, direction_codes, filter_by_umr
from .shi import ShiMap, decide_and_update
from .spacetime import bifd_cm, build_bda, fused_length, spacetime_feature, top_descriptor, top_length
from .texture import get_kernel, hep_histograms

log = logging.getLogger(__name__)

STAGES = ("candidate", "motion", "texture", "spacetime", "shi")
MIN_SAMPLES_PER_CLASS = 10


@dataclass
class DetectionEvent:
    frame_index: int
    blocks: list
    stage_trace: dict

    def to_json(self) -> dict:
        return {"frame": self.frame_index,
                "blocks": [[b.row, b.col] for b in self.blocks],
                "stages": self.stage_trace}

    @classmethod
    def from_json(cls, d: dict) -> "DetectionEvent":
        return cls(int(d["frame"]), [BlockRef(int(r), int(c)) for r, c in d["blocks"]],
                   dict(d.get("stages", {})))


@dataclass
class FrameRecord:
    frame_index: int
    stage_trace: dict
    seconds: float
    final: np.ndarray


@dataclass
class MetricsReport:
    first_alarm_frame: Optional[int]
    false_alarm_count: Optional[int]
    frame_seconds: list = field(default_factory=list)

    @property
    def frames(self) -> int:
        return len(self.frame_seconds)

    @property
    def mean_frame_seconds(self) -> float:
        return float(np.mean(self.frame_seconds)) if self.frame_seconds else 0.0


# ---------------------------------------------------------------------------
# model plumbing

def _spacetime_dims(config: PipelineConfig) -> dict:
    if config.fusion == "concat":
        return {"fused": fused_length(config.q, config.top_kernel)}
    return {"bifd": 3 * (config.q - 1), "top": top_length(config.top_kernel)}


def check_models(config: PipelineConfig, texture_model, spacetime_model) -> None:
    """Raise :class:`InvalidConfigError` if model dimensions disagree with the config."""
    if config.texture_enabled:
        if texture_model is None:
            raise InvalidConfigError("texture stage enabled but no texture model given")
        want = get_kernel(config.texture_kernel).bin_count
        if texture_model.feature_dim != want:
            raise InvalidConfigError(
                f"texture model has {texture_model.feature_dim} features, "
                f"{config.texture_kernel} needs {want}")
    if config.spacetime_enabled:
        if spacetime_model is None:
            raise InvalidConfigError("space-time stage enabled but no space-time model given")
        dims = _spacetime_dims(config)
        if config.fusion == "concat":
            if not isinstance(spacetime_model, SvmModel):
                raise InvalidConfigError("concat fusion needs a single space-time model")
            if spacetime_model.feature_dim != dims["fused"]:
                raise InvalidConfigError(
                    f"space-time model has {spacetime_model.feature_dim} features, "
                    f"q={config.q} with {config.top_kernel}-TOP needs {dims['fused']}")
        else:
            if not isinstance(spacetime_model, dict) or set(spacetime_model) != {"bifd", "top"}:
                raise InvalidConfigError("and_of_two fusion needs a bundle with 'bifd' and 'top' models")
            for k, d in dims.items():
                if spacetime_model[k].feature_dim != d:
                    raise InvalidConfigError(
                        f"space-time '{k}' model has {spacetime_model[k].feature_dim} features, needs {d}")


def spacetime_vectors(volumes: np.ndarray, config: PipelineConfig) -> dict:
    """Feature matrices for a stack of block volumes ``(n, q, B_h, B_w)``."""
    if config.fusion == "concat":
        return {"fused": np.stack([spacetime_feature(v, config.top_kernel).values for v in volumes])}
    return {"bifd": np.stack([bifd_cm(build_bda(v)).values for v in volumes]),
            "top": np.stack([top_descriptor(v, config.top_kernel).values for v in volumes])}


# ---------------------------------------------------------------------------

class SmokeDetector:
    """Stateful per-video detector; feed frames in order with :meth:`process`."""

    def __init__(self, config: PipelineConfig, texture_model=None, spacetime_model=None):
        check_models(config, texture_model, spacetime_model)
        self.config = config
        self.texture_model = texture_model
        self.spacetime_model = spacetime_model
        self.grid = None
        self.amo = None
        self.shi = None
        self._prev_gray = None
        self._history: deque = deque(maxlen=config.q)

    def _start(self, frame: Frame):
        c = self.config
        self.grid = make_grid(frame.width, frame.height, c.block_width, c.block_height)
        self.amo = AmoState(self.grid.shape, c.w_t)
        self.shi = ShiMap(self.grid.shape, c.shi_t_max, c.shi_threshold)
        self.t_b = c.t_b if c.t_b is not None else cand_mod.default_t_b(self.grid)

    def _blocks(self, raster, mask) -> np.ndarray:
        return block_view(raster, self.grid)[mask]

    def process(self, frame: Frame) -> tuple[Optional[DetectionEvent], FrameRecord]:
        t0 = time.perf_counter()
        c = self.config
        if self.grid is None:
            self._start(frame)
        gray = to_grayscale(frame)
        if self._prev_gray is not None and gray.pixels.shape != self._prev_gray.pixels.shape:
            raise ContractError(f"frame {frame.index}: size changed mid-stream")
        self._history.append(gray.pixels)
        trace = {s: 0 for s in STAGES}
        trace["spacetime_warm"] = len(self._history) >= c.q
        empty = np.zeros(self.grid.shape, dtype=bool)

        if self._prev_gray is None:
            det = empty
        else:
            moving = cand_mod.moving_blocks(self._prev_gray.pixels, gray.pixels, self.grid, self.t_b)
            colored = cand_mod.smoke_colored_blocks(frame, self.grid, c.color)
            mask = cand_mod.candidate_blocks(moving, colored)
            trace["candidate"] = int(mask.sum())

            if c.motion_enabled:
                self.amo.push(direction_codes(self._prev_gray.pixels, gray.pixels, self.grid,
                                              c.displacement))
                if len(self.amo):
                    mask = filter_by_umr(mask, self.amo, c.t_u)
            trace["motion"] = int(mask.sum())

            if c.texture_enabled and mask.any():
                hists = hep_histograms(self._blocks(gray.pixels, mask), c.texture_kernel)
                keep = self.texture_model.decision_function(hists) >= 0
                mask = self._apply(mask, keep)
            trace["texture"] = int(mask.sum())

            if c.spacetime_enabled and trace["spacetime_warm"] and mask.any():
                stack = np.stack(self._history)                      # (q, H, W)
                vols = np.moveaxis(block_view(np.moveaxis(stack, 0, -1), self.grid)[mask], -1, 1)
                feats = spacetime_vectors(vols, c)
                if c.fusion == "concat":
                    keep = self.spacetime_model.decision_function(feats["fused"]) >= 0
                else:
                    keep = ((self.spacetime_model["bifd"].decision_function(feats["bifd"]) >= 0)
                            & (self.spacetime_model["top"].decision_function(feats["top"]) >= 0))
                mask = self._apply(mask, keep)
            trace["spacetime"] = int(mask.sum())
            det = mask

        if c.shi_enabled:
            final, self.shi = decide_and_update(self.shi, det)
        else:
            final = det
        trace["shi"] = int(final.sum())
        self._prev_gray = gray

        event = None
        if final.sum() >= c.min_blocks:
            rows, cols = np.nonzero(final)
            event = DetectionEvent(frame.index, [BlockRef(int(r), int(q)) for r, q in zip(rows, cols)],
                                   trace)
        return event, FrameRecord(frame.index, trace, time.perf_counter() - t0, final)

    @staticmethod
    def _apply(mask, keep):
        out = mask.copy()
        out[mask] = keep
        return out


def _frames(source) -> Iterable[Frame]:
    if isinstance(source, (str, Path)):
        return load_sequence(source)
    return source


def draw_blocks(frame: Frame, grid, blocks, color=(255, 0, 0)) -> np.ndarray:
    """Copy of the frame with 1-pixel rectangles around ``blocks``."""
    img = frame.pixels.copy()
    for b in blocks:
        y0, x0 = b.row * grid.block_height, b.col * grid.block_width
        y1, x1 = y0 + grid.block_height - 1, x0 + grid.block_width - 1
        img[y0, x0:x1 + 1] = color
        img[y1, x0:x1 + 1] = color
        img[y0:y1 + 1, x0] = color
        img[y0:y1 + 1, x1] = color
    return img


def run_detection(source, config: PipelineConfig, texture_model=None, spacetime_model=None,
                  dump_frames=None, dump_shi=None, on_event=None, records=None):
    """Run the detector over a whole sequence.

    Parameters
    ----------
    source : path or iterable of Frame
    dump_frames : path, optional
        Directory receiving every frame as PPM with alarmed blocks outlined.
    dump_shi : path, optional
        Directory receiving the per-frame history map as PGM.
    on_event : callable, optional
        Called with each :class:`DetectionEvent` as it is emitted.
    records : list, optional
        Receives one :class:`FrameRecord` per frame.

    Returns
    -------
    events : list of DetectionEvent
    metrics : MetricsReport
        ``false_alarm_count`` is left as ``None``; see :func:`false_alarm_count`.
    """
    detector = SmokeDetector(config, texture_model, spacetime_model)
    events, seconds = [], []
    for d in (dump_frames, dump_shi):
        if d is not None:
            Path(d).mkdir(parents=True, exist_ok=True)
    for frame in _frames(source):
        event, rec = detector.process(frame)
        seconds.append(rec.seconds)
        if records is not None:
            records.append(rec)
        if event is not None:
            events.append(event)
            if on_event is not None:
                on_event(event)
        if dump_frames is not None:
            blocks = event.blocks if event is not None else []
            write_ppm(Path(dump_frames) / f"f{frame.index:05d}.ppm",
                      draw_blocks(frame, detector.grid, blocks))
        if dump_shi is not None:
            write_pgm(Path(dump_shi) / f"shi{frame.index:05d}.pgm", detector.shi.to_image())
    return events, MetricsReport(first_alarm_frame(events), None, seconds)


# ---------------------------------------------------------------------------
# metrics

def first_alarm_frame(events) -> Optional[int]:
    frames = [e.frame_index if isinstance(e, DetectionEvent) else int(e) for e in events]
    return min(frames) if frames else None


@dataclass
class GroundTruth:
    """Frame count of a video plus its half-open ``[start, end)`` smoke spans.

    Every frame outside the smoke spans is alarm-free; a non-smoke video has
    no spans.
    """

    frames: int
    smoke_spans: list = field(default_factory=list)

    def __post_init__(self):
        if self.frames < 0:
            raise ContractError("frame count must be non-negative")
        for s, e in self.smoke_spans:
            if not 0 <= s <= e <= self.frames:
                raise ContractError(f"span [{s}, {e}) outside video of {self.frames} frames")

    def alarm_free(self, frame: int) -> bool:
        return not any(s <= frame < e for s, e in self.smoke_spans)

    @classmethod
    def load(cls, path) -> "GroundTruth":
        d = json.loads(Path(path).read_text())
        if d.get("non_smoke"):
            return cls(int(d["frames"]), [])
        return cls(int(d["frames"]), [tuple(map(int, s)) for s in d.get("smoke_spans", [])])


def false_alarm_count(events, truth: GroundTruth) -> int:
    """Number of alarmed frames that fall in alarm-free spans."""
    count = 0
    for f in sorted({e.frame_index if isinstance(e, DetectionEvent) else int(e) for e in events}):
        if not 0 <= f < truth.frames:
            raise ContractError(f"event at frame {f} outside video of {truth.frames} frames")
        count += truth.alarm_free(f)
    return count


def write_events(path, events) -> None:
    with open(path, "w") as fh:
        for e in events:
            fh.write(json.dumps(e.to_json()) + "\n")


def read_events(path) -> list[DetectionEvent]:
    with open(path) as fh:
        return [DetectionEvent.from_json(json.loads(line)) for line in fh if line.strip()]


def write_metrics_csv(path, metrics: MetricsReport) -> None:
    with open(path, "w") as fh:
        fh.write("metric,value\n")
        fh.write(f"first_alarm_frame,{'' if metrics.first_alarm_frame is None else metrics.first_alarm_frame}\n")
        fh.write(f"false_alarm_count,{'' if metrics.false_alarm_count is None else metrics.false_alarm_count}\n")
        fh.write(f"frames,{metrics.frames}\n")
        fh.write(f"mean_frame_seconds,{metrics.mean_frame_seconds:.6f}\n")


def format_metrics(metrics: MetricsReport) -> str:
    rows = [("first alarm at frame", metrics.first_alarm_frame if metrics.first_alarm_frame is not None else "none"),
            ("false alarms", metrics.false_alarm_count if metrics.false_alarm_count is not None else "n/a"),
            ("frames processed", metrics.frames),
            ("mean seconds / frame", f"{metrics.mean_frame_seconds:.4f}")]
    w = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{w}}  {v}" for k, v in rows)


# ---------------------------------------------------------------------------
# training

@dataclass
class HarvestCounts:
    videos: int = 0
    frames_used: int = 0
    bda_count: int = 0
    texture_count: int = 0


@dataclass
class Harvest:
    texture: list = field(default_factory=list)
    volumes: list = field(default_factory=list)
    counts: HarvestCounts = field(default_factory=HarvestCounts)


def harvest_blocks(videos, config: PipelineConfig, rng: np.random.Generator) -> Harvest:
    """Collect texture histograms and ``q``-frame volumes of stage-1 candidate blocks."""
    out = Harvest()
    kernel = config.texture_kernel
    for video in videos:
        tex, vols = [], []
        history: deque = deque(maxlen=config.q)
        prev = grid = None
        used = 0
        for frame in _frames(video):
            if grid is None:
                grid = make_grid(frame.width, frame.height, config.block_width, config.block_height)
                t_b = config.t_b if config.t_b is not None else cand_mod.default_t_b(grid)
            gray = to_grayscale(frame).pixels
            history.append(gray)
            if prev is not None:
                mask = cand_mod.candidate_blocks(
                    cand_mod.moving_blocks(prev, gray, grid, t_b),
                    cand_mod.smoke_colored_blocks(frame, grid, config.color))
                if mask.any():
                    used += 1
                    tex.extend(block_view(gray, grid)[mask])
                    if len(history) == config.q:
                        stack = np.moveaxis(np.stack(history), 0, -1)
                        vols.extend(np.moveaxis(block_view(stack, grid)[mask], -1, 1))
            prev = gray
        cap = config.max_per_video
        for items, dst in ((tex, out.texture), (vols, out.volumes)):
            if len(items) > cap:
                pick = np.sort(rng.choice(len(items), cap, replace=False))
                items = [items[i] for i in pick]
            dst.extend(items)
        out.counts.videos += 1
        out.counts.frames_used += used
    out.counts.texture_count = len(out.texture)
    out.counts.bda_count = len(out.volumes)
    return out


@dataclass
class TrainingReport:
    smoke: HarvestCounts
    nonsmoke: HarvestCounts
    texture_pair: tuple
    texture_accuracy: float
    spacetime_pairs: dict
    spacetime_accuracy: dict


def _fit(X, y, config, scale_mask=None, balance=False):
    report = cross_eval(X, y, config.svm_pairs, repeats=config.train_repeats,
                        split=config.train_split, seed=config.seed, scale_mask=scale_mask,
                        balance=balance)
    C, gamma = report.best_pair
    model = train_svm(X, y, C, gamma, scale_mask=scale_mask, balance=balance)
    model.meta.update({"cv_accuracy": report.best_accuracy, "pair": [C, gamma]})
    return model, report


def train_pipeline_models(smoke_sources: Sequence, nonsmoke_sources: Sequence,
                          config: PipelineConfig):
    """Train the texture and space-time SVMs from labelled videos.

    Candidate blocks of smoke videos are positives and those of non-smoke
    videos negatives. The ``(C, gamma)`` pair of each model is chosen by
    :func:`cross_eval` over ``config.svm_pairs``; the final model is refit on
    all harvested samples.

    Returns ``(texture_model, spacetime_model, report)``; with
    ``fusion="and_of_two"`` the space-time model is a ``{"bifd", "top"}`` dict.
    """
    if not smoke_sources or not nonsmoke_sources:
        raise InsufficientDataError("need at least one smoke and one non-smoke video")
    rng = np.random.default_rng(config.seed)
    pos = harvest_blocks(smoke_sources, config, rng)
    neg = harvest_blocks(nonsmoke_sources, config, rng)
    for name, h in (("smoke", pos), ("non-smoke", neg)):
        if min(len(h.texture), len(h.volumes)) < MIN_SAMPLES_PER_CLASS:
            raise InsufficientDataError(
                f"only {len(h.texture)} texture / {len(h.volumes)} space-time samples harvested "
                f"from {name} videos (need {MIN_SAMPLES_PER_CLASS})")
    log.info("harvested smoke=%s non-smoke=%s", pos.counts, neg.counts)

    Xt = hep_histograms(np.stack(pos.texture + neg.texture), config.texture_kernel)
    yt = np.r_[np.ones(len(pos.texture)), -np.ones(len(neg.texture))]
    texture_model, trep = _fit(Xt, yt, config)
    texture_model.meta["kernel"] = config.texture_kernel

    vols = np.stack(pos.volumes + neg.volumes)
    ys = np.r_[np.ones(len(pos.volumes)), -np.ones(len(neg.volumes))]
    feats = spacetime_vectors(vols, config)
    n_cm = 3 * (config.q - 1)
    pairs, accs, models = {}, {}, {}
    for name, X in feats.items():
        if name == "fused":
            mask = np.r_[np.ones(n_cm, bool), np.zeros(X.shape[1] - n_cm, bool)]
        elif name == "bifd":
            mask = np.ones(X.shape[1], bool)
        else:
            mask = None
        model, rep = _fit(X, ys, config, scale_mask=mask, balance=(name == "fused"))
        model.meta.update({"q": config.q, "top_kernel": config.top_kernel, "part": name})
        models[name], pairs[name], accs[name] = model, rep.best_pair, rep.best_accuracy
    spacetime_model = models["fused"] if config.fusion == "concat" else models

    report = TrainingReport(pos.counts, neg.counts, trep.best_pair, trep.best_accuracy, pairs, accs)
    return texture_model, spacetime_model, report
