"""Pixel-level primitives: color conversion, blur, geometry, noise, file I/O.

Images are numpy arrays in pixel units (0..255), shape (H, W) for grayscale
or (H, W, 3) for color, float64 unless stated otherwise.  Indexing is
[row, col] everywhere.
"""

from __future__ import annotations

import binascii
import os

import numpy as np
from PIL import Image
from scipy.ndimage import convolve

# BT.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])

# sRGB -> XYZ (D65, 2 degree observer).  Rows sum to the white point, so
# neutral grays map to a=b=0 exactly.
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])


def as_float(img: np.ndarray) -> np.ndarray:
    """Return img as float64 without copying when already float64."""
    return np.asarray(img, dtype=np.float64)


def require_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        return img
    raise ValueError(f"expected (H, W) or (H, W, 3) array, got shape {img.shape}")


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of an RGB image, rounded back to integer pixel values."""
    img = require_image(img)
    if img.ndim != 3:
        raise ValueError("to_grayscale expects an (H, W, 3) RGB image")
    gray = as_float(img) @ _LUMA
    return np.clip(np.rint(gray), 0.0, 255.0)


def _srgb_linearize(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _lab_f(t: np.ndarray) -> np.ndarray:
    d = 6.0 / 29.0
    return np.where(t > d ** 3, np.cbrt(t), t / (3.0 * d * d) + 4.0 / 29.0)


def _lab_f_inv(u: np.ndarray) -> np.ndarray:
    d = 6.0 / 29.0
    return np.where(u > d, u ** 3, 3.0 * d * d * (u - 4.0 / 29.0))


def to_lab(img: np.ndarray) -> np.ndarray:
    """Convert an (H, W, 3) RGB image (0..255) to CIE Lab, D65 white."""
    img = require_image(img)
    if img.ndim != 3:
        raise ValueError("to_lab expects an (H, W, 3) RGB image")
    rgb_lin = _srgb_linearize(as_float(img) / 255.0)
    xyz = rgb_lin @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE_D65)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of to_lab, back to 0..255 RGB (unclipped float)."""
    lab = as_float(require_image(lab))
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE_D65
    rgb_lin = xyz @ np.linalg.inv(_RGB_TO_XYZ).T
    rgb = np.where(rgb_lin <= 0.0031308, rgb_lin * 12.92,
                   1.055 * np.abs(rgb_lin) ** (1 / 2.4) * np.sign(rgb_lin) - 0.055)
    return rgb * 255.0


def gaussian_kernel_5x5(sigma: float = 1.0) -> np.ndarray:
    """Normalized 5x5 Gaussian tap grid."""
    ax = np.arange(5.0) - 2.0
    xx, yy = np.meshgrid(ax, ax)
    k = np.exp(-(xx * xx + yy * yy) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur_5x5(img: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """5x5 Gaussian blur with replicated borders; channels filtered independently."""
    img = as_float(require_image(img))
    k = gaussian_kernel_5x5(sigma)
    if img.ndim == 2:
        return convolve(img, k, mode="nearest")
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[..., c] = convolve(img[..., c], k, mode="nearest")
    return out


def transpose_image(img: np.ndarray) -> np.ndarray:
    """Swap rows and columns, keeping any channel axis last."""
    img = require_image(img)
    if img.ndim == 2:
        return np.ascontiguousarray(img.T)
    return np.ascontiguousarray(np.transpose(img, (1, 0, 2)))


def add_awgn(img: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise in pixel units, then round and clamp to 0..255.

    The noise field is drawn in one call so the output is a pure function of
    (img, sigma, seed).
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    img = as_float(require_image(img))
    if sigma == 0:
        return np.clip(np.rint(img), 0.0, 255.0)
    noise = np.random.default_rng(seed).normal(0.0, sigma, img.shape)
    return np.clip(np.rint(img + noise), 0.0, 255.0)


def center_crop(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Crop the centered width x height window; offsets round down."""
    img = require_image(img)
    h, w = img.shape[:2]
    if w < width or h < height:
        raise ValueError(f"image {w}x{h} smaller than crop {width}x{height}")
    x0 = (w - width) // 2
    y0 = (h - height) // 2
    return img[y0:y0 + height, x0:x0 + width].copy()


def image_seed(seed: int, image_id: str) -> np.random.Generator:
    """Per-image RNG stream keyed by (run seed, image id)."""
    return np.random.default_rng([seed, binascii.crc32(image_id.encode("utf-8"))])


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load an image file as float64 pixels, RGB or grayscale as stored."""
    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            return as_float(np.asarray(im.convert("L")))
        return as_float(np.asarray(im.convert("RGB")))


def save_image(path: str | os.PathLike, img: np.ndarray, quality: int | None = None) -> None:
    """Save to PNG/BMP/JPEG by extension.  quality applies to JPEG only.

    JPEG writes disable chroma subsampling so quality 100 keeps color detail.
    """
    img = require_image(img)
    arr = np.clip(np.rint(as_float(img)), 0, 255).astype(np.uint8)
    im = Image.fromarray(arr)
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext in (".jpg", ".jpeg"):
        im.save(path, quality=100 if quality is None else quality, subsampling=0)
    elif ext in (".png", ".bmp"):
        im.save(path)
    else:
        raise ValueError(f"unsupported image extension: {ext!r}")
