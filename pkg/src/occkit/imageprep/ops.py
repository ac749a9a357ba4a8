"""Image operations: threshold mask, inpainting, adaptive TV, ACE, resize, noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
from scipy.ndimage import gaussian_filter

from ..core import derive_rng
from ..exceptions import (
    AllMasked,
    DimensionMismatch,
    DivergenceDetected,
    DomainError,
    NonPositivePixels,
    RangeError,
)
from .image import GrayImage

NOISE_KINDS = ("gaussian", "laplacian", "uniform")


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


# ---------------------------------------------------------------------------
# mask + inpainting
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MaskImage:
    """Binary mask; ``True`` marks pixels to be replaced."""

    pixels: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.pixels).astype(bool)
        if m.ndim != 2:
            raise DimensionMismatch(f"mask must be 2-D, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "pixels", m)

    @property
    def shape(self):
        return self.pixels.shape

    def to_image(self, on_value: float = 255.0) -> GrayImage:
        """Mask rendered with ``on_value`` at masked pixels (byte range)."""
        return GrayImage(np.where(self.pixels, on_value, 0.0), "byte")


def threshold_mask(img: GrayImage, th_min: float, th_max: float = 255.0,
                   band_pass: bool = False) -> MaskImage:
    """Pixels at or above ``th_min`` (and at most ``th_max`` if ``band_pass``)."""
    if not 0 <= th_min <= th_max <= 255:
        raise RangeError(f"need 0 <= th_min <= th_max <= 255, got {th_min}, {th_max}")
    b = img.to_byte().pixels
    m = b >= th_min
    if band_pass:
        m &= b <= th_max
    return MaskImage(m)


def inpaint(img: GrayImage, mask: MaskImage, iterations: int = 10000,
            tol: float = 1e-4) -> GrayImage:
    """Fill masked pixels by Jacobi iteration of 4-neighbour averaging.

    Unmasked pixels act as a fixed (Dirichlet) boundary and are returned
    untouched; the image border is reflecting. Stops when the largest update
    falls to ``tol`` (in the image's own units) or after ``iterations``.
    """
    if mask.shape != img.shape:
        raise DimensionMismatch(f"mask {mask.shape} does not match image {img.shape}")
    m = mask.pixels
    if not m.any():
        return img
    if m.all():
        raise AllMasked("every pixel is masked; nothing to interpolate from")
    u = img.pixels.copy()
    known = ~m
    # start from the mean of the unmasked pixels bordering the hole
    grown = np.zeros_like(m)
    grown[1:, :] |= m[:-1, :]
    grown[:-1, :] |= m[1:, :]
    grown[:, 1:] |= m[:, :-1]
    grown[:, :-1] |= m[:, 1:]
    rim = grown & known
    u[m] = u[rim].mean()

    for _ in range(int(iterations)):
        p = np.pad(u, 1, mode="edge")
        avg = 0.25 * (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:])
        delta = np.abs(avg[m] - u[m]).max()
        u[m] = avg[m]
        if delta <= tol:
            break
    out = img.pixels.copy()
    out[m] = u[m]
    return img.with_pixels(np.clip(out, 0.0, img.max_value))


# ---------------------------------------------------------------------------
# adaptive total variation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TVParams:
    sigma: float = 1.5
    p: float = 10.0
    iterations: int = 100
    step: float = 0.1
    eps: float = 1e-3
    inner: int = 1

    def __post_init__(self):
        for name in ("sigma", "p", "step", "eps"):
            if not getattr(self, name) > 0:
                raise DomainError(f"TV parameter {name} must be > 0")
        if self.iterations < 1 or self.inner < 1:
            raise DomainError("TV iteration counts must be >= 1")


def _forward_grad(D):
    gx = np.zeros_like(D)
    gy = np.zeros_like(D)
    gx[:, :-1] = D[:, 1:] - D[:, :-1]
    gy[:-1, :] = D[1:, :] - D[:-1, :]
    return gx, gy


def _divergence(px, py):
    """Negative adjoint of :func:`_forward_grad`."""
    div = np.zeros_like(px)
    div[:, 0] = px[:, 0]
    div[:, 1:-1] = px[:, 1:-1] - px[:, :-2]
    div[:, -1] = -px[:, -2]
    div[0, :] += py[0, :]
    div[1:-1, :] += py[1:-1, :] - py[:-2, :]
    div[-1, :] += -py[-2, :]
    return div


def tv_weight(D, sigma, p):
    """``1 / (1 + p |grad (G_sigma * D)|)``."""
    S = gaussian_filter(D, sigma, mode="nearest")
    gx, gy = _forward_grad(S)
    return 1.0 / (1.0 + p * np.hypot(gx, gy))


def tv_energy(D, I, omega, eps):
    """Log-fidelity plus weighted smoothed total variation."""
    gx, gy = _forward_grad(D)
    return float(np.sum(D - I * np.log(D)) + np.sum(omega * np.sqrt(gx * gx + gy * gy + eps * eps)))


def _tv_gradient(D, I, omega, eps):
    gx, gy = _forward_grad(D)
    mag = np.sqrt(gx * gx + gy * gy + eps * eps)
    return (1.0 - I / D) - _divergence(omega * gx / mag, omega * gy / mag)


@dataclass
class TVReport:
    outer_energy: list = field(default_factory=list)
    backtracks: int = 0
    stalled: bool = False


def tv_denoise(img: GrayImage, params: TVParams = TVParams(), shift_eps: Optional[float] = None,
               report: Optional[TVReport] = None) -> GrayImage:
    """Edge-adaptive TV denoising with log fidelity, by lagged diffusivity.

    Works on unit intensities. Each outer iteration freezes the weight
    ``omega`` at the current estimate and takes ``params.inner`` gradient
    steps on the frozen energy. A step is halved until it gives sufficient
    decrease of the frozen energy, keeps the iterate positive, and does not
    raise the energy evaluated with refreshed weights; if no step qualifies
    the iteration stops early (``report.stalled``).

    Parameters
    ----------
    img : GrayImage
        Must be strictly positive unless ``shift_eps`` is given, in which case
        that amount is added before and removed after denoising.
    params : TVParams
    report : TVReport, optional
        Filled with per-outer-iteration energies and step statistics.

    Raises
    ------
    NonPositivePixels
    DivergenceDetected
        The iterate becomes non-finite.
    """
    I = img.to_unit().pixels.copy()
    if shift_eps is not None:
        I = I + shift_eps
    if I.min() <= 0:
        raise NonPositivePixels(
            f"log fidelity needs positive pixels, min is {I.min():.3g}; pass shift_eps"
        )
    rep = report if report is not None else TVReport()
    D = I.copy()
    omega = tv_weight(D, params.sigma, params.p)
    full = tv_energy(D, I, omega, params.eps)
    rep.outer_energy.append(full)
    for _ in range(params.iterations):
        e = tv_energy(D, I, omega, params.eps)
        moved = False
        for _ in range(params.inner):
            g = _tv_gradient(D, I, omega, params.eps)
            gg = float(np.sum(g * g))
            if gg == 0.0:
                break
            t = params.step
            while t >= 1e-12:
                cand = D - t * g
                if cand.min() > 0:
                    e_new = tv_energy(cand, I, omega, params.eps)
                    if e_new <= e - 1e-4 * t * gg:
                        # the step must also lower the energy with refreshed weights
                        w_new = tv_weight(cand, params.sigma, params.p)
                        f_new = tv_energy(cand, I, w_new, params.eps)
                        if f_new <= full:
                            break
                t *= 0.5
                rep.backtracks += 1
            else:
                break
            if not np.all(np.isfinite(cand)):
                raise DivergenceDetected("TV iterate became non-finite")
            D, e, full, w_next = cand, e_new, f_new, w_new
            moved = True
        if not moved:
            rep.stalled = True
            break
        omega = w_next
        rep.outer_energy.append(full)
    if shift_eps is not None:
        D = D - shift_eps
    D = np.clip(D, 0.0, 1.0)
    out = GrayImage(D, "unit")
    return out if img.range == "unit" else out.to_byte()


# ---------------------------------------------------------------------------
# automatic color equalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ACEParams:
    slope: float = 20.0
    distance: str = "euclidean"
    scaling: str = "wpgw"
    window: Optional[int] = 32

    def __post_init__(self):
        if not self.slope > 0:
            raise DomainError("ACE slope must be > 0")
        if self.distance != "euclidean":
            raise DomainError(f"unsupported distance {self.distance!r}")
        if self.scaling not in ("wpgw", "linear"):
            raise DomainError(f"unknown ACE scaling {self.scaling!r}")
        if self.window is not None and self.window < 1:
            raise DomainError("ACE window must be >= 1 or None")


@numba.njit(cache=True)
def _ace_stage1(I, slope, radius):
    h, w = I.shape
    R = np.zeros((h, w))
    for y in range(h):
        y0 = 0 if radius < 0 else max(0, y - radius)
        y1 = h if radius < 0 else min(h, y + radius + 1)
        for x in range(w):
            x0 = 0 if radius < 0 else max(0, x - radius)
            x1 = w if radius < 0 else min(w, x + radius + 1)
            v = I[y, x]
            acc = 0.0
            norm = 0.0
            for yy in range(y0, y1):
                dy = yy - y
                for xx in range(x0, x1):
                    dx = xx - x
                    d2 = dx * dx + dy * dy
                    if d2 == 0 or (radius >= 0 and d2 > radius * radius):
                        continue
                    inv = 1.0 / math.sqrt(d2)
                    t = slope * (v - I[yy, xx])
                    if t > 1.0:
                        t = 1.0
                    elif t < -1.0:
                        t = -1.0
                    acc += t * inv
                    norm += inv
            R[y, x] = acc / norm if norm > 0 else 0.0
    return R


def ace_stage1(img: GrayImage, params: ACEParams = ACEParams()) -> np.ndarray:
    """Distance-weighted lateral inhibition, normalized to [-1, 1]."""
    I = np.ascontiguousarray(img.to_unit().pixels)
    radius = -1 if params.window is None else int(params.window)
    return _ace_stage1(I, float(params.slope), radius)


def ace(img: GrayImage, params: ACEParams = ACEParams()) -> GrayImage:
    """Automatic color equalization of one channel; byte-range output.

    ``window=None`` sums over every pixel pair; an integer restricts the sum
    to pixels within that Euclidean radius.
    """
    R = ace_stage1(img, params)
    if params.scaling == "wpgw":
        peak = float(np.abs(R).max())
        s = 127.5 / peak if peak > 0 else 0.0
        out = _round_half_up(127.5 + s * R)
    else:
        lo, hi = float(R.min()), float(R.max())
        s = 255.0 / (hi - lo) if hi > lo else 0.0
        out = _round_half_up(s * (R - lo)) if hi > lo else np.full_like(R, 128.0)
    return GrayImage(np.clip(out, 0.0, 255.0), "byte")


def ace_channels(rgb, params: ACEParams = ACEParams()) -> np.ndarray:
    """Channelwise ACE of a byte ``(h, w, c)`` array."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return np.stack(
        [ace(GrayImage(rgb[..., k], "byte"), params).pixels for k in range(rgb.shape[-1])],
        axis=-1,
    )


# ---------------------------------------------------------------------------
# resize + noise + features
# ---------------------------------------------------------------------------


def _axis_weights(n_in, n_out):
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


def resize(img: GrayImage, out_h: int = 331, out_w: int = 331) -> GrayImage:
    """Bilinear resampling with pixel centres at half-integer positions."""
    if out_h < 1 or out_w < 1:
        raise DimensionMismatch("output size must be at least 1x1")
    P = img.pixels
    r0, r1, fr = _axis_weights(P.shape[0], out_h)
    c0, c1, fc = _axis_weights(P.shape[1], out_w)
    top = P[r0][:, c0] * (1 - fc) + P[r0][:, c1] * fc
    bot = P[r1][:, c0] * (1 - fc) + P[r1][:, c1] * fc
    out = top * (1 - fr)[:, None] + bot * fr[:, None]
    return img.with_pixels(np.clip(out, 0.0, img.max_value))


def noise_sample(kind: str, std: float, shape, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean noise with the given standard deviation."""
    if kind == "gaussian":
        return rng.normal(0.0, std, shape)
    if kind == "laplacian":
        return rng.laplace(0.0, std / math.sqrt(2.0), shape)
    if kind == "uniform":
        half = std * math.sqrt(3.0)
        return rng.uniform(-half, half, shape)
    raise DomainError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")


def add_noise(img: GrayImage, kind: str = "gaussian", scale: float = 0.05, seed: int = 42,
              return_clipped: bool = False):
    """Additive noise with std ``scale`` times the dynamic range, then clipping."""
    if kind not in NOISE_KINDS:
        raise DomainError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
    if scale < 0:
        raise DomainError("noise scale must be >= 0")
    if scale == 0:
        return (img, 0) if return_clipped else img
    rng = derive_rng(seed, 1, NOISE_KINDS.index(kind))
    noisy = img.pixels + noise_sample(kind, scale * img.max_value, img.shape, rng)
    clipped = int(np.sum((noisy < 0) | (noisy > img.max_value)))
    out = img.with_pixels(np.clip(noisy, 0.0, img.max_value))
    return (out, clipped) if return_clipped else out


def image_to_features(img: GrayImage) -> np.ndarray:
    """Row-major flatten on the unit scale."""
    return img.to_unit().pixels.ravel().copy()
