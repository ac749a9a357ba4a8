"""Grayscale image container and PNG / PGM input-output."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..exceptions import DimensionMismatch, RangeError

RANGE_MAX = {"unit": 1.0, "byte": 255.0}
RANGE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GrayImage:
    """2-D intensities tagged with their nominal range.

    ``range`` is ``"unit"`` for [0, 1] or ``"byte"`` for [0, 255].
    """

    pixels: np.ndarray
    range: str = "unit"

    def __post_init__(self):
        if self.range not in RANGE_MAX:
            raise RangeError(f"unknown range tag {self.range!r}")
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DimensionMismatch(f"expected a nonempty 2-D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise RangeError("image contains non-finite pixels")
        hi = RANGE_MAX[self.range]
        if px.min() < -RANGE_TOL or px.max() > hi + RANGE_TOL:
            raise RangeError(
                f"pixels span [{px.min():.6g}, {px.max():.6g}], outside the {self.range} range"
            )
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape

    @property
    def max_value(self) -> float:
        return RANGE_MAX[self.range]

    def to_unit(self) -> "GrayImage":
        if self.range == "unit":
            return self
        return GrayImage(self.pixels / 255.0, "unit")

    def to_byte(self) -> "GrayImage":
        if self.range == "byte":
            return self
        return GrayImage(self.pixels * 255.0, "byte")

    def with_pixels(self, pixels) -> "GrayImage":
        return GrayImage(pixels, self.range)

    def __eq__(self, other):
        return (
            isinstance(other, GrayImage)
            and self.range == other.range
            and np.array_equal(self.pixels, other.pixels)
        )


def luminance(rgb) -> np.ndarray:
    """ITU-R 601 luma of an ``(h, w, 3)`` array."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


def read_array(path) -> tuple[np.ndarray, float]:
    """Raw pixel array and its full-scale value (255 or 65535)."""
    path = Path(path)
    with Image.open(path) as im:
        im.load()
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64)
            return arr, 65535.0
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGBA" if "A" in im.mode else "RGB").convert("RGB")
        return np.asarray(im, dtype=np.float64), 255.0


def load_image(path) -> GrayImage:
    """Load PNG or PGM as a byte-range image; colour is reduced to luminance."""
    arr, full = read_array(path)
    if arr.ndim == 3:
        arr = luminance(arr)
    return GrayImage(np.clip(arr * (255.0 / full), 0.0, 255.0), "byte")


def save_image(img: GrayImage, path, bits: int = 8):
    """Write PNG or binary PGM (chosen by suffix), rounding half up."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    full = 255.0 if bits == 8 else 65535.0
    scaled = img.pixels * (full / img.max_value)
    q = np.clip(np.floor(scaled + 0.5), 0, full)
    path = Path(path)
    if bits == 8:
        im = Image.fromarray(q.astype(np.uint8))
    else:
        im = Image.fromarray(q.astype(np.uint16))
    fmt = "PPM" if path.suffix.lower() in (".pgm", ".pnm") else "PNG"
    im.save(path, format=fmt)


def histogram(img: GrayImage) -> np.ndarray:
    """256-bin counts over the byte scale."""
    b = np.clip(np.floor(img.to_byte().pixels + 0.5), 0, 255).astype(np.int64)
    return np.bincount(b.ravel(), minlength=256)
