"""Preprocessing pipeline: mask, inpaint, resize, TV, ACE, optional noise.

Configuration is a flat mapping of dotted keys (``"tv.sigma": 1.5``) or the
equivalent nested JSON object.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from ..exceptions import DomainError
from .image import GrayImage, histogram
from .ops import (
    NOISE_KINDS,
    ACEParams,
    TVParams,
    ace,
    add_noise,
    inpaint,
    resize,
    threshold_mask,
    tv_denoise,
)

STAGES = ("mask", "inpaint", "resize", "tv", "ace", "noise")


@dataclass(frozen=True)
class PipelineConfig:
    mask_th_min: float = 240.0
    mask_th_max: float = 255.0
    mask_band_pass: bool = False
    inpaint_iterations: int = 10000
    resize_h: int = 331
    resize_w: int = 331
    tv_enabled: bool = True
    tv_sigma: float = 1.5
    tv_p: float = 10.0
    tv_iterations: int = 100
    tv_step: float = 0.1
    tv_shift_eps: float = 1e-3
    ace_enabled: bool = True
    ace_slope: float = 20.0
    ace_window: Optional[int] = 32
    ace_scaling: str = "wpgw"
    noise_kind: Optional[str] = None
    noise_scale: float = 0.0
    noise_seed: int = 42

    def __post_init__(self):
        if self.noise_kind is not None and self.noise_kind not in NOISE_KINDS:
            raise DomainError(f"unknown noise kind {self.noise_kind!r}; expected one of {NOISE_KINDS}")
        # parameter objects validate themselves
        self.tv_params()
        self.ace_params()

    def tv_params(self) -> TVParams:
        return TVParams(sigma=self.tv_sigma, p=self.tv_p, iterations=self.tv_iterations,
                        step=self.tv_step)

    def ace_params(self) -> ACEParams:
        return ACEParams(slope=self.ace_slope, window=self.ace_window, scaling=self.ace_scaling)

    @classmethod
    def from_mapping(cls, d: dict) -> "PipelineConfig":
        flat = {}
        for key, value in d.items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    flat[f"{key}_{sub}"] = v
            else:
                flat[key.replace(".", "_")] = value
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(flat) - known)
        if unknown:
            raise DomainError(f"unknown pipeline keys: {', '.join(k.replace('_', '.', 1) for k in unknown)}")
        return cls(**flat)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls.from_mapping(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {k.replace("_", ".", 1): v for k, v in asdict(self).items()}


def run_pipeline(img: GrayImage, cfg: PipelineConfig = PipelineConfig(), stop_after: str = "noise",
                 histograms: Optional[dict] = None) -> GrayImage:
    """Apply the stages in order up to ``stop_after``.

    ``stop_after="mask"`` returns the mask itself rendered at ``mask.th_max``.
    When ``histograms`` is a dict it receives the 256-bin histogram after the
    input and every executed stage.
    """
    if stop_after not in STAGES:
        raise DomainError(f"unknown stage {stop_after!r}; expected one of {STAGES}")
    last = STAGES.index(stop_after)

    def record(name, im):
        if histograms is not None:
            histograms[name] = histogram(im)

    img = img.to_byte()
    record("input", img)
    mask = threshold_mask(img, cfg.mask_th_min, cfg.mask_th_max, cfg.mask_band_pass)
    if last == 0:
        out = mask.to_image(cfg.mask_th_max)
        record("mask", out)
        return out
    if mask.pixels.any() and not mask.pixels.all():
        img = inpaint(img, mask, cfg.inpaint_iterations)
    record("inpaint", img)
    if last >= 2:
        img = resize(img, cfg.resize_h, cfg.resize_w)
        record("resize", img)
    if last >= 3 and cfg.tv_enabled:
        img = tv_denoise(img, cfg.tv_params(), shift_eps=cfg.tv_shift_eps)
        record("tv", img)
    if last >= 4 and cfg.ace_enabled:
        img = ace(img, cfg.ace_params())
        record("ace", img)
    if last >= 5 and cfg.noise_kind is not None and cfg.noise_scale > 0:
        img = add_noise(img, cfg.noise_kind, cfg.noise_scale, cfg.noise_seed)
        record("noise", img)
    return img


def write_histograms(histograms: dict, path):
    """CSV with one ``bin`` column and one column per recorded stage."""
    names = list(histograms)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin"] + names)
        for b in range(256):
            w.writerow([b] + [int(histograms[n][b]) for n in names])
