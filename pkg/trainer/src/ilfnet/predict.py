"""Inference over a patch manifest, emitting per-patch probabilities.

Output rows are JSONL objects {"image_id", "patch_index", "probs"}; the
downstream aggregator averages them per image.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import torch

from .data import crop, load_rgb, read_patch_manifest, to_tensor
from .model import PatchClassifier


def predict_patches(model: PatchClassifier, patches_path: str | os.PathLike,
                    root: str | os.PathLike, out_path: str | os.PathLike,
                    batch_size: int = 24) -> int:
    """Run the classifier over every patch row; returns the row count.

    root anchors the manifest's image_id paths.  Images are decoded once
    per contiguous run of rows sharing an image_id.
    """
    rows = read_patch_manifest(patches_path)
    root = Path(root)
    model.eval()
    written = 0
    with open(out_path, "w", encoding="utf-8") as f:
        batch, meta = [], []

        def flush():
            nonlocal written
            if not batch:
                return
            x = torch.stack(batch)
            probs = model.predict_proba(x)
            for (image_id, patch_index), p in zip(meta, probs):
                f.write(json.dumps({"image_id": image_id,
                                    "patch_index": patch_index,
                                    "probs": [float(v) for v in p]}))
                f.write("\n")
                written += 1
            batch.clear()
            meta.clear()

        cached_id, cached_img = None, None
        for row in rows:
            if row.image_id != cached_id:
                cached_img = load_rgb(root / row.image_id)
                cached_id = row.image_id
            patch = crop(cached_img, row.rx, row.ry, row.w, row.h)
            batch.append(to_tensor(patch))
            meta.append((row.image_id, row.patch_index))
            if len(batch) >= batch_size:
                flush()
        flush()
    return written
