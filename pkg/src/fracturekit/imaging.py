"""Image containers, color conversion, resampling, normalization, and file codecs.

Rasters are thin wrappers over numpy arrays:

* ``ColorImage``  -- uint8, shape (H, W, 3), RGB order
* ``PixelGrid8``  -- uint8, shape (H, W)
* ``PixelGrid32`` -- float32, shape (H, W), values in [0, 1] after ``normalize``

All float -> 8-bit conversions round half away from zero so results are
deterministic across platforms.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DecodeError, InvalidArgumentError

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def round_u8(x: np.ndarray) -> np.ndarray:
    """Round half away from zero and clamp to [0, 255]."""
    return np.clip(np.floor(np.asarray(x, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class ColorImage:
    pixels: np.ndarray  # uint8 (H, W, 3)

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.uint8)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise InvalidArgumentError(f"ColorImage needs (H, W, 3) uint8, got {p.shape}")
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class PixelGrid8:
    pixels: np.ndarray  # uint8 (H, W)

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.uint8)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise InvalidArgumentError(f"PixelGrid8 needs (H, W) uint8, got {p.shape}")
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class PixelGrid32:
    pixels: np.ndarray  # float32 (H, W)

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float32)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise InvalidArgumentError(f"PixelGrid32 needs (H, W) float, got {p.shape}")
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def to_grayscale(img: ColorImage) -> PixelGrid8:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B)."""
    y = img.pixels.astype(np.float64) @ _LUMA
    return PixelGrid8(round_u8(y))


def bilinear_resize_array(src: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Float bilinear resample with half-pixel centers and edge clamping."""
    if out_w < 1 or out_h < 1:
        raise InvalidArgumentError("output dimensions must be >= 1")
    src = np.asarray(src, dtype=np.float64)
    h, w = src.shape
    # src coordinate of each destination pixel center, clamped to the grid
    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(sy).astype(int)
    x0 = np.floor(sx).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]

    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img: PixelGrid8, out_w: int, out_h: int) -> PixelGrid8:
    """Bilinear resample of an 8-bit raster, rounded back to 8-bit."""
    if (out_h, out_w) == (img.height, img.width):
        return PixelGrid8(img.pixels.copy())
    return PixelGrid8(round_u8(bilinear_resize_array(img.pixels, out_w, out_h)))


def normalize(img: PixelGrid8) -> PixelGrid32:
    """Scale 8-bit intensities into [0, 1] by dividing by 255."""
    return PixelGrid32(img.pixels.astype(np.float32) / np.float32(255.0))


def replicate_channels(img: PixelGrid32) -> np.ndarray:
    """Copy a single gray plane into a (3, H, W) float32 tensor."""
    return np.repeat(img.pixels[None, :, :], 3, axis=0).astype(np.float32)


# ---------------------------------------------------------------------------
# Netpbm (PGM P5 / PPM P6) codec -- implemented natively, bit-exact.
# ---------------------------------------------------------------------------

def _read_netpbm_tokens(data: bytes, count: int):
    """Read `count` whitespace/comment-separated ASCII tokens after the magic."""
    tokens = []
    i = 2  # past magic
    while len(tokens) < count:
        if i >= len(data):
            raise DecodeError("truncated header", offset=i)
        c = data[i:i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if i >= len(data) or not data[i:i + 1].isspace():
        raise DecodeError("missing whitespace after header", offset=i)
    return tokens, i + 1  # payload starts after the single separator byte


def _decode_netpbm(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    if data[:2] != magic:
        raise DecodeError(f"bad magic {data[:2]!r}, expected {magic!r}", offset=0)
    tokens, start = _read_netpbm_tokens(data, 3)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise DecodeError(f"non-numeric header token {tokens!r}", offset=2)
    if w < 1 or h < 1 or maxval != 255:
        raise DecodeError(f"unsupported dimensions/maxval {w}x{h}/{maxval}", offset=2)
    n = w * h * channels
    payload = data[start:start + n]
    if len(payload) < n:
        raise DecodeError(f"truncated payload: need {n} bytes, have {len(payload)}",
                          offset=start + len(payload))
    arr = np.frombuffer(payload, dtype=np.uint8, count=n)
    shape = (h, w) if channels == 1 else (h, w, channels)
    return arr.reshape(shape).copy()


def decode_pgm(data: bytes) -> PixelGrid8:
    return PixelGrid8(_decode_netpbm(data, b"P5", 1))


def decode_ppm(data: bytes) -> ColorImage:
    return ColorImage(_decode_netpbm(data, b"P6", 3))


def encode_pgm(img: PixelGrid8) -> bytes:
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


def encode_ppm(img: ColorImage) -> bytes:
    return b"P6\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


def decode_image(data: bytes) -> ColorImage:
    """Decode PGM/PPM natively, anything else (PNG/JPEG/...) via Pillow.

    Grayscale sources are expanded to a 3-channel image.
    """
    if len(data) < 2:
        raise DecodeError("payload too short", offset=len(data))
    if data[:2] == b"P5":
        g = decode_pgm(data)
        return ColorImage(np.repeat(g.pixels[:, :, None], 3, axis=2))
    if data[:2] == b"P6":
        return decode_ppm(data)
    from PIL import Image, UnidentifiedImageError
    try:
        with Image.open(io.BytesIO(data)) as im:
            rgb = im.convert("RGB")
            return ColorImage(np.asarray(rgb, dtype=np.uint8))
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"undecodable image: {exc}") from exc


def encode_png(pixels: np.ndarray) -> bytes:
    """Encode a (H, W) gray or (H, W, 3) RGB uint8 array as PNG via Pillow."""
    from PIL import Image
    buf = io.BytesIO()
    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()
