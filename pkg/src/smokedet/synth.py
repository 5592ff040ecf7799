"""Synthetic scenes with known ground truth.

Used for training corpora, tests and demos. All generators are
deterministic given ``seed`` and return lists of :class:`Frame`.

Scenes share a static, coloured (greenish) background that never passes
the smoke colour rule. Smoke is a translucent gray layer whose texture is
advected upward; distractors are rigid gray objects, flickering gray
patches, or red objects.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .ingest import Frame

WIDTH, HEIGHT = 320, 240


def _smooth_noise(rng, shape, sigma) -> np.ndarray:
    n = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    n -= n.min()
    return n / max(n.max(), 1e-12)


def background(rng, width=WIDTH, height=HEIGHT) -> np.ndarray:
    """Foliage-like static scene with a strong green cast."""
    tex = _smooth_noise(rng, (height, width), 3.0)
    fine = rng.standard_normal((height, width)) * 6
    base = np.array([55.0, 115.0, 45.0])
    img = base[None, None, :] * (0.7 + 0.6 * tex[..., None]) + fine[..., None]
    return np.clip(img, 0, 255)


def _frame(img, t) -> Frame:
    return Frame(np.clip(np.rint(img), 0, 255).astype(np.uint8), t)


def static_scene(n_frames=60, seed=0, width=WIDTH, height=HEIGHT) -> list[Frame]:
    rng = np.random.default_rng(seed)
    bg = background(rng, width, height)
    return [_frame(bg, t) for t in range(n_frames)]


def plume_layers(rng, n_frames, onset, width=WIDTH, height=HEIGHT, rise=3, source_x=None,
                 max_alpha=0.93, spread=0.45, contrast=32.0):
    """Per-frame opacity and brightness-offset maps of a rising plume.

    The plume body is a cone widening upward from a source near the bottom
    edge; its front climbs ``rise`` pixels per frame. A soft brightness
    texture inside the plume scrolls upward at the same speed, so block
    matching sees upward motion. Opacity is zero before ``onset``.
    """
    source_x = width // 2 if source_x is None else source_x
    tall = height + rise * n_frames + 64
    tex = ndimage.gaussian_filter(rng.standard_normal((tall, width)), 2.0, mode="wrap")
    tex = contrast * np.clip(tex / tex.std(), -2.5, 2.5)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    dist_up = (height - 1) - ys
    half_width = 24 + spread * dist_up
    wobble_phase = rng.uniform(0, 2 * np.pi)
    for t in range(n_frames):
        if t < onset:
            yield np.zeros((height, width)), np.zeros((height, width))
            continue
        age = t - onset
        front = rise * age
        center = source_x + 6 * np.sin(0.05 * dist_up + 0.15 * t + wobble_phase)
        lateral = np.clip(2.0 * (1.0 - np.abs(xs - center) / half_width), 0, 1)
        body = (dist_up <= front) * lateral
        off = (rise * age) % (tall - height)
        yield body * max_alpha, tex[off:off + height]


def plume_scene(n_frames=90, onset=20, seed=0, width=WIDTH, height=HEIGHT, **kw) -> list[Frame]:
    """Rising gray plume over a static background, starting at ``onset``."""
    rng = np.random.default_rng(seed)
    bg = background(rng, width, height)
    gray = rng.uniform(170, 200)
    kw.setdefault("source_x", int(rng.integers(width // 3, 2 * width // 3)))
    frames = []
    for t, (a, shade) in enumerate(plume_layers(rng, n_frames, onset, width, height, **kw)):
        smoke = (gray + shade)[..., None]
        frames.append(_frame((1 - a[..., None]) * bg + a[..., None] * smoke, t))
    return frames


def _move(rng, width, height, size, direction, speed):
    """Start position and per-frame step of an object crossing the frame."""
    sx, sy = size
    if direction == "right":
        return np.array([-sx / 2, rng.uniform(0, height - sy)]), np.array([speed, 0.0])
    if direction == "left":
        return np.array([width - sx / 2, rng.uniform(0, height - sy)]), np.array([-speed, 0.0])
    if direction == "down":
        return np.array([rng.uniform(0, width - sx), -sy / 2]), np.array([0.0, speed])
    raise ValueError(direction)


def _paste(img, sprite, x, y):
    h, w = img.shape[:2]
    sh, sw = sprite.shape[:2]
    x, y = int(round(x)), int(round(y))
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + sw, w), min(y + sh, h)
    if x1 <= x0 or y1 <= y0:
        return
    img[y0:y1, x0:x1] = sprite[y0 - y:y1 - y, x0 - x:x1 - x]


def rigid_object_scene(n_frames=60, seed=0, color="gray", direction="right", size=(72, 72),
                       speed=4.0, width=WIDTH, height=HEIGHT) -> list[Frame]:
    """A sharp-textured rigid object translating across the background.

    ``color="gray"`` gives a smoke-coloured distractor; ``"red"`` a saturated one.
    """
    rng = np.random.default_rng(seed)
    bg = background(rng, width, height)
    sx, sy = size
    if color == "gray":
        level = rng.uniform(110, 190)
        checker = ((np.indices((sy, sx)) // 6).sum(axis=0) % 2) * 2 - 1
        pattern = level + 35 * checker + rng.standard_normal((sy, sx)) * 8
        sprite = np.repeat(pattern[..., None], 3, axis=2)
    elif color == "red":
        sprite = np.zeros((sy, sx, 3))
        sprite[..., 0] = rng.uniform(190, 240) + rng.standard_normal((sy, sx)) * 10
        sprite[..., 1] = 25 + rng.standard_normal((sy, sx)) * 5
        sprite[..., 2] = 30 + rng.standard_normal((sy, sx)) * 5
    else:
        raise ValueError(color)
    pos, step = _move(rng, width, height, size, direction, speed)
    frames = []
    for t in range(n_frames):
        img = bg.copy()
        p = pos + step * t
        _paste(img, sprite, p[0], p[1])
        frames.append(_frame(img, t))
    return frames


def flicker_scene(n_frames=60, seed=0, width=WIDTH, height=HEIGHT, period=4) -> list[Frame]:
    """A gray textured patch that blinks on and off (e.g. a lamp or screen)."""
    rng = np.random.default_rng(seed)
    bg = background(rng, width, height)
    pw, ph = 96, 64
    x = int(rng.integers(0, width - pw))
    y = int(rng.integers(0, height - ph))
    level = rng.uniform(120, 190)
    patch = level + 40 * (rng.random((ph, pw)) > 0.5) - 20
    frames = []
    for t in range(n_frames):
        img = bg.copy()
        if (t // (period // 2 or 1)) % 2 == 0:
            img[y:y + ph, x:x + pw] = patch[..., None]
        frames.append(_frame(img, t))
    return frames


def smoke_corpus(n_videos=4, n_frames=60, seed=0) -> list[list[Frame]]:
    return [plume_scene(n_frames, onset=int(5 + 3 * k), seed=seed * 1000 + k) for k in range(n_videos)]


def nonsmoke_corpus(n_videos=4, n_frames=60, seed=0) -> list[list[Frame]]:
    videos = []
    kinds = ("right", "left", "down", "flicker")
    for k in range(n_videos):
        s = seed * 1000 + 500 + k
        kind = kinds[k % len(kinds)]
        if kind == "flicker":
            videos.append(flicker_scene(n_frames, seed=s))
        else:
            videos.append(rigid_object_scene(n_frames, seed=s, direction=kind))
    return videos
