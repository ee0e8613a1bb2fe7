"""Data access for training and prediction.

The trainer talks to the corpus package only through its files: the
corpus manifest (path/label/method/ratio/split, one JSON object per
line), the patch manifest (image_id/rx/ry/w/h/patch_index), and image
files on disk.  Pixels are scaled to [0, 1] and arranged (C, H, W).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image


@dataclass
class ManifestRow:
    path: str
    label: int
    split: str

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestRow":
        return cls(path=d["path"], label=int(d["label"]), split=d["split"])


@dataclass
class PatchRow:
    image_id: str
    rx: int
    ry: int
    w: int
    h: int
    patch_index: int

    @classmethod
    def from_dict(cls, d: dict) -> "PatchRow":
        return cls(image_id=d["image_id"], rx=int(d["rx"]), ry=int(d["ry"]),
                   w=int(d["w"]), h=int(d["h"]), patch_index=int(d["patch_index"]))


def _read_jsonl(path: str | os.PathLike) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def read_manifest(path: str | os.PathLike) -> list[ManifestRow]:
    return [ManifestRow.from_dict(d) for d in _read_jsonl(path)]


def read_patch_manifest(path: str | os.PathLike) -> list[PatchRow]:
    return [PatchRow.from_dict(d) for d in _read_jsonl(path)]


def load_rgb(path: str | os.PathLike) -> np.ndarray:
    """Image file as (H, W, 3) float32 in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def to_tensor(img: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))


def crop(img: np.ndarray, rx: int, ry: int, w: int, h: int) -> np.ndarray:
    ih, iw = img.shape[:2]
    if rx < 0 or ry < 0 or rx + w > iw or ry + h > ih:
        raise ValueError(f"patch ({rx},{ry},{w},{h}) exceeds image {iw}x{ih}")
    return img[ry:ry + h, rx:rx + w]


class TrainPool:
    """Training-split images grouped by class, with random patch draws.

    Images are cached decoded; corpora here are small enough to hold.
    A draw picks a patch corner uniformly and optionally rotates the
    patch by 90 or 270 degrees, half the time.
    """

    def __init__(self, manifest_path: str | os.PathLike, patch: int,
                 split: str = "train", rotate: bool = False):
        root = Path(manifest_path).parent
        rows = [r for r in read_manifest(manifest_path) if r.split == split]
        if not rows:
            raise ValueError(f"manifest has no rows for split {split!r}")
        self.patch = patch
        self.rotate = rotate
        self.images: list[np.ndarray] = []
        self.labels: list[int] = []
        for r in rows:
            img = load_rgb(root / r.path)
            if img.shape[0] < patch or img.shape[1] < patch:
                raise ValueError(f"{r.path} is smaller than the {patch}px patch")
            self.images.append(img)
            self.labels.append(r.label)
        self.by_class: dict[int, list[int]] = {}
        for i, lb in enumerate(self.labels):
            self.by_class.setdefault(lb, []).append(i)

    def classes(self) -> list[int]:
        return sorted(self.by_class)

    def draw(self, index: int, rng: np.random.Generator) -> np.ndarray:
        img = self.images[index]
        ry = int(rng.integers(0, img.shape[0] - self.patch + 1))
        rx = int(rng.integers(0, img.shape[1] - self.patch + 1))
        out = img[ry:ry + self.patch, rx:rx + self.patch]
        if self.rotate and rng.integers(0, 2) == 1:
            out = np.rot90(out, k=1 if rng.integers(0, 2) == 0 else 3)
        return np.ascontiguousarray(out)

    def balanced_epoch(self, rng: np.random.Generator) -> list[int]:
        """Image indices for one epoch: every class drawn equally often
        (with replacement), matching the largest class, then shuffled."""
        per_class = max(len(v) for v in self.by_class.values())
        picks = []
        for lb in self.classes():
            pool = np.asarray(self.by_class[lb])
            picks.extend(pool[rng.integers(0, len(pool), per_class)])
        order = rng.permutation(len(picks))
        return [int(picks[i]) for i in order]


class EvalPool:
    """Fixed-corner patches (origin crop) for a split, for stable scoring."""

    def __init__(self, manifest_path: str | os.PathLike, patch: int, split: str):
        root = Path(manifest_path).parent
        rows = [r for r in read_manifest(manifest_path) if r.split == split]
        if not rows:
            raise ValueError(f"manifest has no rows for split {split!r}")
        self.items = []
        for r in rows:
            img = load_rgb(root / r.path)
            self.items.append((np.ascontiguousarray(crop(img, 0, 0, patch, patch)),
                               r.label, r.path))

    def batches(self, batch_size: int):
        for i in range(0, len(self.items), batch_size):
            chunk = self.items[i:i + batch_size]
            x = torch.stack([to_tensor(c[0]) for c in chunk])
            y = torch.tensor([c[1] for c in chunk], dtype=torch.long)
            yield x, y
