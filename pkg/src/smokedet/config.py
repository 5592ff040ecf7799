"""Pipeline configuration, read from and written to JSON.

Example file (every key optional)::

    {
      "grid": {"block_width": 32, "block_height": 32},
      "candidate": {"t_b": null,
                    "color": {"spread": 20, "low": 80, "high": 220, "min_fraction": 0.5}},
      "motion": {"enabled": true, "w_t": 15, "t_u": 0.55, "displacement": 3},
      "texture": {"enabled": true, "kernel": "BGC3"},
      "spacetime": {"enabled": true, "q": 5, "fusion": "concat", "top_kernel": "EOH"},
      "shi": {"enabled": true, "t_max": 15, "threshold": 10},
      "alarm": {"min_blocks": 1},
      "train": {"grid": [[2, 100], [0.001, 1], [50, 1000], [0.5, 1000], [0.02, 1000]],
                "pair_order": "C,gamma", "repeats": 10, "split": 0.5, "seed": 0,
                "max_per_video": 400},
      "models": {"texture": null, "spacetime": null}
    }

``candidate.t_b = null`` means four gray levels per pixel of a block.
``train.pair_order = "gamma,C"`` reads the grid pairs the other way round.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .candidate import ColorRuleParams
from .classify import DEFAULT_GRID
from .errors import InvalidConfigError
from .spacetime import TOP_KERNELS

FUSIONS = ("concat", "and_of_two")


@dataclass
class PipelineConfig:
    block_width: int = 32
    block_height: int = 32
    t_b: Optional[float] = None
    color: ColorRuleParams = field(default_factory=ColorRuleParams)
    motion_enabled: bool = True
    w_t: int = 15
    t_u: float = 0.55
    displacement: int = 3
    texture_enabled: bool = True
    texture_kernel: str = "BGC3"
    spacetime_enabled: bool = True
    q: int = 5
    fusion: str = "concat"
    top_kernel: str = "EOH"
    shi_enabled: bool = True
    shi_t_max: int = 15
    shi_threshold: int = 10
    min_blocks: int = 1
    train_grid: tuple = DEFAULT_GRID
    pair_order: str = "C,gamma"
    train_repeats: int = 10
    train_split: float = 0.5
    seed: int = 0
    max_per_video: int = 400
    texture_model: Optional[str] = None
    spacetime_model: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.block_width < 1 or self.block_height < 1:
            raise InvalidConfigError("block sizes must be positive")
        if self.w_t < 1:
            raise InvalidConfigError("motion.w_t must be >= 1")
        if not 0.0 <= self.t_u <= 1.0:
            raise InvalidConfigError("motion.t_u must lie in [0, 1]")
        if self.displacement < 1:
            raise InvalidConfigError("motion.displacement must be >= 1")
        if self.q < 3:
            raise InvalidConfigError("spacetime.q must be >= 3 (TOP needs a temporal neighbourhood)")
        if self.fusion not in FUSIONS:
            raise InvalidConfigError(f"spacetime.fusion must be one of {FUSIONS}")
        if self.top_kernel not in TOP_KERNELS:
            raise InvalidConfigError(f"spacetime.top_kernel must be one of {TOP_KERNELS}")
        if self.shi_t_max < 1 or not 0 < self.shi_threshold <= self.shi_t_max:
            raise InvalidConfigError("need 0 < shi.threshold <= shi.t_max")
        if self.min_blocks < 1:
            raise InvalidConfigError("alarm.min_blocks must be >= 1")
        if self.pair_order not in ("C,gamma", "gamma,C"):
            raise InvalidConfigError("train.pair_order must be 'C,gamma' or 'gamma,C'")
        if any(len(p) != 2 or p[0] <= 0 or p[1] <= 0 for p in self.train_grid):
            raise InvalidConfigError("train.grid entries must be positive pairs")

    @property
    def svm_pairs(self) -> list[tuple[float, float]]:
        """Grid as ``(C, gamma)`` tuples regardless of ``pair_order``."""
        pairs = [(float(a), float(b)) for a, b in self.train_grid]
        return pairs if self.pair_order == "C,gamma" else [(b, a) for a, b in pairs]

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = d or {}
        g = d.get("grid", {})
        cand = d.get("candidate", {})
        col = cand.get("color", {})
        mot = d.get("motion", {})
        tex = d.get("texture", {})
        st = d.get("spacetime", {})
        shi = d.get("shi", {})
        tr = d.get("train", {})
        mdl = d.get("models", {})
        base = ColorRuleParams()
        kw = dict(
            block_width=g.get("block_width", 32),
            block_height=g.get("block_height", 32),
            t_b=cand.get("t_b"),
            color=ColorRuleParams(col.get("spread", base.max_channel_spread),
                                  col.get("low", base.intensity_low),
                                  col.get("high", base.intensity_high),
                                  col.get("min_fraction", base.min_fraction)),
            motion_enabled=mot.get("enabled", True),
            w_t=mot.get("w_t", 15),
            t_u=mot.get("t_u", 0.55),
            displacement=mot.get("displacement", 3),
            texture_enabled=tex.get("enabled", True),
            texture_kernel=tex.get("kernel", "BGC3"),
            spacetime_enabled=st.get("enabled", True),
            q=st.get("q", 5),
            fusion=st.get("fusion", "concat"),
            top_kernel=st.get("top_kernel", "EOH"),
            shi_enabled=shi.get("enabled", True),
            shi_t_max=shi.get("t_max", 15),
            shi_threshold=shi.get("threshold", 10),
            min_blocks=d.get("alarm", {}).get("min_blocks", 1),
            train_grid=tuple(tuple(p) for p in tr.get("grid", DEFAULT_GRID)),
            pair_order=tr.get("pair_order", "C,gamma"),
            train_repeats=tr.get("repeats", 10),
            train_split=tr.get("split", 0.5),
            seed=tr.get("seed", 0),
            max_per_video=tr.get("max_per_video", 400),
            texture_model=mdl.get("texture"),
            spacetime_model=mdl.get("spacetime"),
        )
        return cls(**kw)

    def to_dict(self) -> dict:
        c = asdict(self.color)
        return {
            "grid": {"block_width": self.block_width, "block_height": self.block_height},
            "candidate": {"t_b": self.t_b,
                          "color": {"spread": c["max_channel_spread"], "low": c["intensity_low"],
                                    "high": c["intensity_high"], "min_fraction": c["min_fraction"]}},
            "motion": {"enabled": self.motion_enabled, "w_t": self.w_t, "t_u": self.t_u,
                       "displacement": self.displacement},
            "texture": {"enabled": self.texture_enabled, "kernel": self.texture_kernel},
            "spacetime": {"enabled": self.spacetime_enabled, "q": self.q, "fusion": self.fusion,
                          "top_kernel": self.top_kernel},
            "shi": {"enabled": self.shi_enabled, "t_max": self.shi_t_max,
                    "threshold": self.shi_threshold},
            "alarm": {"min_blocks": self.min_blocks},
            "train": {"grid": [list(p) for p in self.train_grid], "pair_order": self.pair_order,
                      "repeats": self.train_repeats, "split": self.train_split, "seed": self.seed,
                      "max_per_video": self.max_per_video},
            "models": {"texture": self.texture_model, "spacetime": self.spacetime_model},
        }

    def replace(self, **changes) -> "PipelineConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return PipelineConfig(**d)


def load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{path}: invalid JSON ({exc})") from None
    return PipelineConfig.from_dict(data)


def save_config(path, config: PipelineConfig) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2))
