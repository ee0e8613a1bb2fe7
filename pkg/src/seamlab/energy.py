"""Energy maps and seam step costs.

All maps share the image's (H, W) shape.  Out-of-range neighbor reads
replicate the border pixel, so gradients vanish where the image is flat up
to its edge.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .imaging import as_float, gaussian_blur_5x5, require_image, to_lab


class ForwardCosts(NamedTuple):
    """Per-pixel penalties for the three seam step directions.

    left/up/right is the direction the seam arrives FROM, i.e. the cost of
    connecting to the upper-left / upper / upper-right predecessor.  left and
    right each include the up term, so left >= up and right >= up pointwise.
    """

    left: np.ndarray
    up: np.ndarray
    right: np.ndarray


def _padded(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return np.pad(img, 1, mode="edge")
    return np.pad(img, ((1, 1), (1, 1), (0, 0)), mode="edge")


def backward_energy(gray: np.ndarray) -> np.ndarray:
    """Gradient magnitude |dI/dx| + |dI/dy| by central differences.

    Differences are halved; borders replicate, so edge pixels see a one-sided
    half-gradient.
    """
    gray = as_float(require_image(gray))
    if gray.ndim != 2:
        raise ValueError("backward_energy expects a grayscale image")
    p = _padded(gray)
    dx = np.abs(p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    dy = np.abs(p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    return dx + dy


def forward_costs(gray: np.ndarray) -> ForwardCosts:
    """Scalar forward costs: brightness differences of the neighbors a seam
    step will newly make adjacent."""
    gray = as_float(require_image(gray))
    if gray.ndim != 2:
        raise ValueError("forward_costs expects a grayscale image")
    p = _padded(gray)
    left = p[1:-1, :-2]    # I(x-1, y)
    right = p[1:-1, 2:]    # I(x+1, y)
    above = p[:-2, 1:-1]   # I(x, y-1)
    cu = np.abs(right - left)
    cl = cu + np.abs(above - left)
    cr = cu + np.abs(above - right)
    return ForwardCosts(left=cl, up=cu, right=cr)


def forward_costs_lab(lab: np.ndarray) -> ForwardCosts:
    """Forward costs where pixel differences are Euclidean distances between
    Lab color vectors instead of scalar brightness gaps."""
    lab = as_float(require_image(lab))
    if lab.ndim != 3:
        raise ValueError("forward_costs_lab expects an (H, W, 3) Lab image")
    p = _padded(lab)
    left = p[1:-1, :-2]
    right = p[1:-1, 2:]
    above = p[:-2, 1:-1]

    def dist(a, b):
        return np.sqrt(((a - b) ** 2).sum(axis=-1))

    cu = dist(right, left)
    cl = cu + dist(above, left)
    cr = cu + dist(above, right)
    return ForwardCosts(left=cl, up=cu, right=cr)


def saliency_energy(rgb: np.ndarray) -> np.ndarray:
    """Distance of each blurred pixel from the global mean color, in Lab.

    The mean is taken over the unblurred Lab image; the per-pixel term is a
    5x5 Gaussian blur of it.  Uniform regions score zero, rare colors high.
    """
    rgb = require_image(rgb)
    if rgb.ndim != 3:
        raise ValueError("saliency_energy expects an (H, W, 3) RGB image")
    lab = to_lab(rgb)
    mean = lab.reshape(-1, 3).mean(axis=0)
    blurred = gaussian_blur_5x5(lab)
    return np.sqrt(((blurred - mean) ** 2).sum(axis=-1))


def absolute_energy(gray: np.ndarray) -> np.ndarray:
    """Gradient magnitude plus its forward differences along +x and +y.

    The extra terms penalize pixels whose energy is about to change, which
    sharpens seam avoidance around edges.  Forward differences replicate the
    last column/row, hence vanish there.
    """
    eg = backward_energy(gray)
    right = np.concatenate([eg[:, 1:], eg[:, -1:]], axis=1)
    below = np.concatenate([eg[1:, :], eg[-1:, :]], axis=0)
    return eg + np.abs(right - eg) + np.abs(below - eg)


def energy_heatmap(emap: np.ndarray) -> np.ndarray:
    """Normalize an energy map to a uint8 grayscale picture for dumping."""
    emap = as_float(np.asarray(emap))
    lo, hi = float(emap.min()), float(emap.max())
    if hi <= lo:
        return np.zeros(emap.shape, dtype=np.uint8)
    return np.rint((emap - lo) / (hi - lo) * 255.0).astype(np.uint8)
