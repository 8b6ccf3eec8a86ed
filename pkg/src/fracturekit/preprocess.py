"""Radiograph enhancement: CLAHE, Otsu thresholding, Canny edges, and the
composed pipeline that produces the model input plus visualization panels.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateHistogramError, InvalidArgumentError
from .imaging import (ColorImage, PixelGrid8, PixelGrid32, normalize,
                      replicate_channels, resize_bilinear, round_u8, to_grayscale)

MODEL_INPUT_SIZE = 224


@dataclass(frozen=True)
class ClaheConfig:
    tile_rows: int = 8
    tile_cols: int = 8
    clip_factor: float = 2.0  # multiple of the mean bin height; inf = no clipping
    bin_count: int = 256

    def __post_init__(self):
        if self.tile_rows < 1 or self.tile_cols < 1:
            raise InvalidArgumentError("tile grid must be at least 1x1")
        if not (self.clip_factor > 0):
            raise InvalidArgumentError("clip_factor must be positive (or inf)")
        if self.bin_count != 256:
            raise InvalidArgumentError("bin_count is fixed at 256")


@dataclass(frozen=True)
class OtsuResult:
    threshold: int
    between_class_variance: float


@dataclass(frozen=True)
class CannyConfig:
    gaussian_sigma: float = 1.0  # 5x5 kernel, reflect padding
    low_frac: float = 0.10
    high_frac: float = 0.20

    def __post_init__(self):
        if not (0 < self.low_frac < self.high_frac <= 1):
            raise InvalidArgumentError("need 0 < low_frac < high_frac <= 1")
        if self.gaussian_sigma <= 0:
            raise InvalidArgumentError("gaussian_sigma must be positive")


@dataclass(frozen=True)
class PipelineOutput:
    model_input: np.ndarray   # (3, 224, 224) float32 in [0, 1]
    enhanced: PixelGrid8      # CLAHE result at native resolution
    mask: PixelGrid8          # Otsu binarization, {0, 255}
    edges: PixelGrid8         # Canny edges, {0, 255}
    degenerate_mask: bool = False  # Otsu was undefined; mask is all zero


def _tile_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    """Near-equal integer partition of [0, n) into `parts` slices."""
    return [(i * n // parts, (i + 1) * n // parts) for i in range(parts)]


def _tile_mapping(tile: np.ndarray, clip_factor: float) -> np.ndarray:
    """Per-tile intensity mapping: clipped histogram -> equalization LUT."""
    npix = tile.size
    hist = np.bincount(tile.ravel(), minlength=256).astype(np.int64)
    if math.isfinite(clip_factor):
        limit = max(1, int(clip_factor * npix / 256))
        excess = int(np.sum(np.maximum(hist - limit, 0)))
        hist = np.minimum(hist, limit)
        hist += excess // 256
        rem = excess % 256
        hist[:rem] += 1
    cdf = np.cumsum(hist)
    return round_u8(255.0 * cdf / npix)


def histogram_equalize(img: PixelGrid8) -> PixelGrid8:
    """Plain global histogram equalization (the CLAHE degenerate case oracle)."""
    return PixelGrid8(_tile_mapping(img.pixels, math.inf)[img.pixels])


def clahe(img: PixelGrid8, cfg: ClaheConfig = ClaheConfig()) -> PixelGrid8:
    """Contrast-limited adaptive histogram equalization.

    Tiles get individual clipped-histogram equalization LUTs; each output
    pixel bilinearly blends the four nearest tile-center LUT values, with
    edge pixels clamping to the nearest tiles.
    """
    h, w = img.height, img.width
    if h < cfg.tile_rows or w < cfg.tile_cols:
        raise InvalidArgumentError(f"image {w}x{h} smaller than tile grid "
                                   f"{cfg.tile_cols}x{cfg.tile_rows}")
    rows = _tile_bounds(h, cfg.tile_rows)
    cols = _tile_bounds(w, cfg.tile_cols)
    luts = np.empty((cfg.tile_rows, cfg.tile_cols, 256), dtype=np.float64)
    for i, (r0, r1) in enumerate(rows):
        for j, (c0, c1) in enumerate(cols):
            luts[i, j] = _tile_mapping(img.pixels[r0:r1, c0:c1], cfg.clip_factor)

    row_centers = np.array([(r0 + r1 - 1) / 2.0 for r0, r1 in rows])
    col_centers = np.array([(c0 + c1 - 1) / 2.0 for c0, c1 in cols])

    def axis_blend(coords, centers):
        """For each pixel coordinate: surrounding tile pair and weight."""
        i1 = np.searchsorted(centers, coords)          # first center >= coord
        i0 = np.clip(i1 - 1, 0, len(centers) - 1)
        i1 = np.clip(i1, 0, len(centers) - 1)
        span = centers[i1] - centers[i0]
        t = np.where(span > 0, (coords - centers[i0]) / np.where(span > 0, span, 1), 0.0)
        return i0, i1, np.clip(t, 0.0, 1.0)

    r0i, r1i, ty = axis_blend(np.arange(h, dtype=np.float64), row_centers)
    c0i, c1i, tx = axis_blend(np.arange(w, dtype=np.float64), col_centers)

    v = img.pixels
    rows_ix = np.broadcast_to(r0i[:, None], (h, w)), np.broadcast_to(r1i[:, None], (h, w))
    cols_ix = np.broadcast_to(c0i[None, :], (h, w)), np.broadcast_to(c1i[None, :], (h, w))
    m00 = luts[rows_ix[0], cols_ix[0], v]
    m01 = luts[rows_ix[0], cols_ix[1], v]
    m10 = luts[rows_ix[1], cols_ix[0], v]
    m11 = luts[rows_ix[1], cols_ix[1], v]
    top = m00 * (1 - tx[None, :]) + m01 * tx[None, :]
    bot = m10 * (1 - tx[None, :]) + m11 * tx[None, :]
    return PixelGrid8(round_u8(top * (1 - ty[:, None]) + bot * ty[:, None]))


def otsu_threshold(img: PixelGrid8) -> OtsuResult:
    """Threshold maximizing between-class variance; smallest maximizer wins."""
    hist = np.bincount(img.pixels.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise DegenerateHistogramError("image has fewer than 2 distinct intensities")
    n = hist.sum()
    p = hist / n
    omega0 = np.cumsum(p)[:255]            # weight of class {<= t}, t in 0..254
    mu = np.cumsum(p * np.arange(256))
    mu_t = mu[255]
    omega1 = 1.0 - omega0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = mu[:255] / omega0
        mu1 = (mu_t - mu[:255]) / omega1
        sigma_b = omega0 * omega1 * (mu0 - mu1) ** 2
    sigma_b = np.where((omega0 > 0) & (omega1 > 0), sigma_b, 0.0)
    t = int(np.argmax(sigma_b))
    return OtsuResult(threshold=t, between_class_variance=float(sigma_b[t]))


def binarize(img: PixelGrid8, threshold: int) -> PixelGrid8:
    if not 0 <= threshold <= 255:
        raise InvalidArgumentError("threshold must be in [0, 255]")
    return PixelGrid8(np.where(img.pixels > threshold, 255, 0).astype(np.uint8))


def _gaussian_kernel5(sigma: float) -> np.ndarray:
    x = np.arange(-2, 3, dtype=np.float64)
    k = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return k / k.sum()


def _convolve_reflect(img: np.ndarray, k: np.ndarray, axis: int) -> np.ndarray:
    pad = len(k) // 2
    widths = [(0, 0), (0, 0)]
    widths[axis] = (pad, pad)
    padded = np.pad(img, widths, mode="reflect")
    out = np.zeros_like(img, dtype=np.float64)
    for i, kv in enumerate(k):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(i, i + img.shape[axis])
        out += kv * padded[tuple(sl)]
    return out


_SOBEL_D = np.array([-1.0, 0.0, 1.0])
_SOBEL_S = np.array([1.0, 2.0, 1.0])

# (dy, dx) step toward the positive gradient direction per quantized angle bin
_NMS_STEP = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}


def canny(img: PixelGrid8, cfg: CannyConfig = CannyConfig()) -> PixelGrid8:
    """Canny edge detector: blur, Sobel, NMS, double threshold, hysteresis."""
    if img.height < 5 or img.width < 5:
        raise InvalidArgumentError("canny needs at least a 5x5 image")
    g = _gaussian_kernel5(cfg.gaussian_sigma)
    smooth = _convolve_reflect(_convolve_reflect(img.pixels.astype(np.float64), g, 0), g, 1)

    gx = _convolve_reflect(_convolve_reflect(smooth, _SOBEL_D, 1), _SOBEL_S, 0)
    gy = _convolve_reflect(_convolve_reflect(smooth, _SOBEL_D, 0), _SOBEL_S, 1)
    mag = np.hypot(gx, gy)
    maxmag = mag.max()
    if maxmag == 0:
        return PixelGrid8(np.zeros_like(img.pixels))

    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    qbin = np.zeros(angle.shape, dtype=np.int32)
    qbin[(angle >= 22.5) & (angle < 67.5)] = 45
    qbin[(angle >= 67.5) & (angle < 112.5)] = 90
    qbin[(angle >= 112.5) & (angle < 157.5)] = 135

    # NMS: strictly greater than the forward neighbor, >= the backward one,
    # so a tied pair keeps exactly one pixel. Border excluded.
    keep = np.zeros(mag.shape, dtype=bool)
    h, w = mag.shape
    inner = (slice(1, h - 1), slice(1, w - 1))
    for q, (dy, dx) in _NMS_STEP.items():
        fwd = mag[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        bwd = mag[1 - dy:h - 1 - dy, 1 - dx:w - 1 - dx]
        m = mag[inner]
        keep[inner] |= (qbin[inner] == q) & (m > fwd) & (m >= bwd)

    low = cfg.low_frac * maxmag
    high = cfg.high_frac * maxmag
    weak = keep & (mag >= low)
    strong = keep & (mag >= high)

    # hysteresis: BFS from strong pixels over the 8-connected weak set
    out = strong.copy()
    queue = deque(zip(*np.nonzero(strong)))
    while queue:
        y, x = queue.popleft()
        for ny in range(max(y - 1, 0), min(y + 2, h)):
            for nx in range(max(x - 1, 0), min(x + 2, w)):
                if weak[ny, nx] and not out[ny, nx]:
                    out[ny, nx] = True
                    queue.append((ny, nx))
    return PixelGrid8(np.where(out, 255, 0).astype(np.uint8))


def prepare_model_input(gray: PixelGrid8, size: int = MODEL_INPUT_SIZE,
                        clahe_cfg: ClaheConfig = ClaheConfig()) -> np.ndarray:
    """Enhance, resize, normalize, replicate: the model-input branch alone."""
    enhanced = clahe(gray, clahe_cfg)
    resized = resize_bilinear(enhanced, size, size)
    return replicate_channels(normalize(resized))


def run_pipeline(img: ColorImage,
                 clahe_cfg: ClaheConfig = ClaheConfig(),
                 canny_cfg: CannyConfig = CannyConfig(),
                 size: int = MODEL_INPUT_SIZE) -> PipelineOutput:
    """Grayscale -> CLAHE -> resize/normalize/replicate for the model, plus
    Otsu mask and Canny edge panels computed from the enhanced image."""
    gray = to_grayscale(img)
    enhanced = clahe(gray, clahe_cfg)
    resized = resize_bilinear(enhanced, size, size)
    model_input = replicate_channels(normalize(resized))
    try:
        mask = binarize(enhanced, otsu_threshold(enhanced).threshold)
        degenerate = False
    except DegenerateHistogramError:
        mask = PixelGrid8(np.zeros_like(enhanced.pixels))
        degenerate = True
    edges = canny(enhanced, canny_cfg)
    return PipelineOutput(model_input=model_input, enhanced=enhanced,
                          mask=mask, edges=edges, degenerate_mask=degenerate)
