"""Seam search and retargeting.

A vertical seam is an int array of length H giving one column per row, with
adjacent entries differing by at most 1.  Horizontal work transposes in,
runs the vertical machinery, and transposes back.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .energy import (
    ForwardCosts,
    absolute_energy,
    backward_energy,
    forward_costs,
    forward_costs_lab,
    saliency_energy,
)
from .imaging import as_float, require_image, to_grayscale, to_lab, transpose_image

MIN_WIDTH = 3


class SeamMethod(Enum):
    AVIDAN = "avidan"
    RUBINSTEIN = "rubinstein"
    ACHANTA = "achanta"
    FRANKOVICH = "frankovich"


@dataclass
class CumulativeMatrix:
    """DP table for vertical seams.

    values[y, x] is the cheapest cost of any seam prefix ending at (x, y);
    parent[y, x] is the column offset (-1, 0, +1) of the predecessor chosen
    on row y-1 (row 0 parents are 0 and unused).
    """

    values: np.ndarray
    parent: np.ndarray


def _as_gray(img: np.ndarray) -> np.ndarray:
    return img if img.ndim == 2 else to_grayscale(img)


def _as_rgb(img: np.ndarray) -> np.ndarray:
    return np.stack([img] * 3, axis=-1) if img.ndim == 2 else img


def method_costs(img: np.ndarray, method: SeamMethod) -> tuple[np.ndarray, ForwardCosts | None]:
    """Base energy map plus optional step costs for a seam method."""
    img = as_float(require_image(img))
    if method is SeamMethod.AVIDAN:
        return backward_energy(_as_gray(img)), None
    if method is SeamMethod.RUBINSTEIN:
        gray = _as_gray(img)
        return backward_energy(gray), forward_costs(gray)
    if method is SeamMethod.ACHANTA:
        rgb = _as_rgb(img)
        return saliency_energy(rgb), forward_costs_lab(to_lab(rgb))
    if method is SeamMethod.FRANKOVICH:
        gray = _as_gray(img)
        return absolute_energy(gray), forward_costs(gray)
    raise ValueError(f"unknown seam method: {method!r}")


def accumulate(base: np.ndarray, costs: ForwardCosts | None = None) -> CumulativeMatrix:
    """Run the seam DP over a base energy map and optional step costs.

    Row 0 copies the base.  Each later cell adds its base energy plus the
    cheapest (step cost + predecessor total) over the up-left, up, and
    up-right cells; out-of-range predecessors are excluded.  Ties pick the
    leftmost predecessor.
    """
    base = as_float(np.asarray(base))
    h, w = base.shape
    values = np.empty((h, w))
    parent = np.zeros((h, w), dtype=np.int8)
    values[0] = base[0]
    inf = np.inf
    for y in range(1, h):
        prev = values[y - 1]
        from_left = np.concatenate(([inf], prev[:-1]))
        from_up = prev
        from_right = np.concatenate((prev[1:], [inf]))
        if costs is None:
            cand = np.stack([from_left, from_up, from_right])
        else:
            cand = np.stack([
                from_left + costs.left[y],
                from_up + costs.up[y],
                from_right + costs.right[y],
            ])
        choice = np.argmin(cand, axis=0)          # argmin is first-hit: left wins ties
        values[y] = base[y] + cand[choice, np.arange(w)]
        parent[y] = choice - 1
    return CumulativeMatrix(values=values, parent=parent)


def cumulative_matrix(img: np.ndarray, method: SeamMethod) -> CumulativeMatrix:
    img = require_image(img)
    if img.shape[1] < MIN_WIDTH:
        raise ValueError(f"image width {img.shape[1]} below minimum {MIN_WIDTH}")
    base, costs = method_costs(img, method)
    return accumulate(base, costs)


def backtrack_optimal_seam(cm: CumulativeMatrix) -> np.ndarray:
    """Walk parents up from the cheapest bottom-row cell (leftmost on ties)."""
    h, w = cm.values.shape
    seam = np.empty(h, dtype=np.int64)
    col = int(np.argmin(cm.values[-1]))
    for y in range(h - 1, 0, -1):
        seam[y] = col
        col += int(cm.parent[y, col])
    seam[0] = col
    return seam


def find_seam(img: np.ndarray, method: SeamMethod) -> np.ndarray:
    return backtrack_optimal_seam(cumulative_matrix(img, method))


def _check_seam(seam: np.ndarray, h: int, w: int) -> np.ndarray:
    seam = np.asarray(seam, dtype=np.int64)
    if seam.shape != (h,):
        raise ValueError(f"seam length {seam.shape} does not match image height {h}")
    if seam.min() < 0 or seam.max() >= w:
        raise ValueError("seam column out of range")
    return seam


def remove_seam(img: np.ndarray, seam: np.ndarray) -> np.ndarray:
    """Drop one pixel per row; width shrinks by 1."""
    img = require_image(img)
    h, w = img.shape[:2]
    seam = _check_seam(seam, h, w)
    mask = np.ones((h, w), dtype=bool)
    mask[np.arange(h), seam] = False
    if img.ndim == 2:
        return img[mask].reshape(h, w - 1)
    return img[mask].reshape(h, w - 1, img.shape[2])


def insert_seam(img: np.ndarray, seam: np.ndarray) -> np.ndarray:
    """Duplicate a seam; width grows by 1.

    The new pixel lands right of the seam and takes the rounded average of
    the seam pixel and its right neighbor (replicated at the last column).
    """
    img = as_float(require_image(img))
    h, w = img.shape[:2]
    seam = _check_seam(seam, h, w)
    rows = np.arange(h)
    cols = np.arange(w + 1)[None, :]
    src = np.where(cols <= seam[:, None], np.minimum(cols, w - 1), cols - 1)
    out = img[rows[:, None], src]
    right = np.minimum(seam + 1, w - 1)
    out[rows, seam + 1] = np.rint((img[rows, seam] + img[rows, right]) / 2.0)
    return out


def _extract_seams(img: np.ndarray, method: SeamMethod, k: int,
                   track_origin: bool = False):
    """Remove k optimal seams in sequence.

    Returns (shrunk image, seams, origins).  Each seam is expressed in the
    frame it was found in (width W, W-1, ...).  origins maps each seam's
    pixels back to columns of the untouched input, for drawing; those traces
    need not stay 1-connected.
    """
    work = as_float(require_image(img))
    h, w = work.shape[:2]
    col_map = np.tile(np.arange(w, dtype=np.int64), (h, 1)) if track_origin else None
    seams: list[np.ndarray] = []
    origins: list[np.ndarray] = []
    rows = np.arange(h)
    for _ in range(k):
        seam = find_seam(work, method)
        seams.append(seam)
        if track_origin:
            origins.append(col_map[rows, seam])
            col_map = remove_seam(col_map, seam)
        work = remove_seam(work, seam)
    return work, seams, origins


def retarget(img: np.ndarray, method: SeamMethod, ratio: float, mode: str,
             axis: str = "vertical") -> tuple[np.ndarray, list[np.ndarray]]:
    """Shrink or grow an image by round(ratio * extent) seams.

    mode is "remove" or "insert"; axis "vertical" carves columns,
    "horizontal" carves rows via transposition.  Returns the result and the
    seams used, each in the working frame it was found in.
    """
    img = require_image(img)
    if mode not in ("remove", "insert"):
        raise ValueError(f"mode must be 'remove' or 'insert', got {mode!r}")
    if axis not in ("vertical", "horizontal"):
        raise ValueError(f"axis must be 'vertical' or 'horizontal', got {axis!r}")
    if axis == "horizontal":
        out, seams = retarget(transpose_image(img), method, ratio, mode)
        return transpose_image(out), seams

    w = img.shape[1]
    k = int(round(ratio * w))
    if k < 1:
        raise ValueError(f"ratio {ratio} selects no seams on width {w}")
    if mode == "remove" and k >= w - 2:
        raise ValueError(f"removing {k} seams from width {w} leaves too little image")

    if mode == "remove":
        out, seams, _ = _extract_seams(img, method, k)
        return out, seams

    # Insertion: find the k seams a removal pass would take, then duplicate
    # them in the original.  Earlier insertions shift later seams by two
    # columns (one to undo the removal frame, one for the inserted pixel).
    _, seams, _ = _extract_seams(img, method, k)
    out = as_float(img).copy()
    pending = [s.copy() for s in seams]
    for i, seam in enumerate(pending):
        out = insert_seam(out, seam)
        for later in pending[i + 1:]:
            later[later >= seam] += 2
    return out, seams


def trace_seams(img: np.ndarray, method: SeamMethod, ratio: float,
                axis: str = "vertical") -> list[np.ndarray]:
    """Columns (in the input frame) touched by each seam a retarget would use."""
    img = require_image(img)
    if axis == "horizontal":
        return trace_seams(transpose_image(img), method, ratio)
    w = img.shape[1]
    k = int(round(ratio * w))
    if k < 1 or k >= w - 2:
        raise ValueError(f"ratio {ratio} invalid for tracing on width {w}")
    _, _, origins = _extract_seams(img, method, k, track_origin=True)
    return origins


def render_seam_overlay(img: np.ndarray, origins: list[np.ndarray],
                        axis: str = "vertical",
                        color: tuple[int, int, int] = (255, 0, 0)) -> np.ndarray:
    """Paint traced seams onto a copy of the image, returned as uint8 RGB."""
    img = require_image(img)
    if axis == "horizontal":
        flipped = render_seam_overlay(transpose_image(img), origins, color=color)
        return np.ascontiguousarray(np.transpose(flipped, (1, 0, 2)))
    base = np.clip(np.rint(as_float(_as_rgb(img))), 0, 255).astype(np.uint8)
    rows = np.arange(base.shape[0])
    for cols in origins:
        base[rows, cols] = color
    return base
