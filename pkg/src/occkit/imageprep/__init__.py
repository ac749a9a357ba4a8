"""Image preprocessing: mask inpainting, adaptive TV, ACE, resizing, noise."""

from .image import GrayImage, histogram, load_image, luminance, save_image
from .ops import (
    NOISE_KINDS,
    ACEParams,
    MaskImage,
    TVParams,
    TVReport,
    ace,
    ace_stage1,
    ace_channels,
    add_noise,
    image_to_features,
    inpaint,
    resize,
    threshold_mask,
    tv_denoise,
    tv_energy,
    tv_weight,
)
from .pipeline import STAGES, PipelineConfig, run_pipeline, write_histograms

__all__ = [
    "GrayImage", "MaskImage", "TVParams", "TVReport", "ACEParams", "PipelineConfig",
    "NOISE_KINDS", "STAGES",
    "load_image", "save_image", "histogram", "luminance",
    "threshold_mask", "inpaint", "tv_denoise", "tv_energy", "tv_weight",
    "ace", "ace_stage1", "ace_channels", "resize", "add_noise", "image_to_features",
    "run_pipeline", "write_histograms",
]
