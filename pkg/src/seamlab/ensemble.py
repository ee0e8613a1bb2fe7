"""Patch-ensemble aggregation, scoring, and tamper localization.

Classifier outputs arrive as one probability triple per patch.  Aggregation
averages the triples of all patches of an image and takes the argmax (ties
break to the lowest class index).  Scoring is hand-rolled so the arithmetic
is inspectable: confusion counts, one-vs-rest ROC sweeps, trapezoidal AUC.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import as_float, require_image

N_CLASSES = 3


@dataclass
class PredictionRecord:
    image_id: str
    patch_index: int
    probs: list[float]

    def to_dict(self) -> dict:
        return {"image_id": self.image_id, "patch_index": self.patch_index,
                "probs": list(self.probs)}

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionRecord":
        return cls(image_id=d["image_id"], patch_index=int(d["patch_index"]),
                   probs=[float(p) for p in d["probs"]])


def read_predictions(path: str | os.PathLike) -> list[PredictionRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(PredictionRecord.from_dict(json.loads(line)))
    return out


def write_predictions(path: str | os.PathLike, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec.to_dict()))
            f.write("\n")


def _check_probs(probs: np.ndarray, where: str) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[-1] != N_CLASSES:
        raise ValueError(f"{where}: expected {N_CLASSES} probabilities, got shape {probs.shape}")
    if (probs < 0).any():
        raise ValueError(f"{where}: negative probability")
    if np.abs(probs.sum(axis=-1) - 1.0).max() > 1e-6:
        raise ValueError(f"{where}: probabilities do not sum to 1")
    return probs


def aggregate_probs(records: list[PredictionRecord]) -> tuple[np.ndarray, int]:
    """Mean probability vector and decided label for one image's patches."""
    if not records:
        raise ValueError("no prediction records to aggregate")
    ids = {r.image_id for r in records}
    if len(ids) != 1:
        raise ValueError(f"records span several images: {sorted(ids)}")
    probs = _check_probs(np.array([r.probs for r in records]), ids.pop())
    mean = probs.mean(axis=0)
    return mean, int(np.argmax(mean))


def aggregate_all(records: list[PredictionRecord]) -> list[dict]:
    """Group patch predictions by image and aggregate each; sorted by id."""
    by_image: dict[str, list[PredictionRecord]] = {}
    for rec in records:
        by_image.setdefault(rec.image_id, []).append(rec)
    out = []
    for image_id in sorted(by_image):
        mean, label = aggregate_probs(by_image[image_id])
        out.append({"image_id": image_id, "probs": [float(p) for p in mean],
                    "label": label})
    return out


def confusion_matrix(truth, predicted) -> np.ndarray:
    truth = np.asarray(truth, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if truth.shape != predicted.shape:
        raise ValueError("truth and prediction lengths differ")
    if truth.size == 0:
        raise ValueError("cannot score an empty set")
    for name, arr in (("truth", truth), ("prediction", predicted)):
        if arr.min() < 0 or arr.max() >= N_CLASSES:
            raise ValueError(f"{name} labels outside 0..{N_CLASSES - 1}")
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (truth, predicted), 1)
    return cm


def roc_curve(scores, positives) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-vs-rest ROC sweep.

    Thresholds walk the distinct scores in descending order; samples tied at
    a threshold enter together.  Returns (thresholds, fpr, tpr) with a
    leading (inf, 0, 0) anchor.  Degenerate sets (no positives or no
    negatives) yield the anchor only.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    if scores.shape != positives.shape:
        raise ValueError("scores and labels lengths differ")
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return np.array([np.inf]), np.array([0.0]), np.array([0.0])
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    p = positives[order]
    tp = np.cumsum(p)
    fp = np.cumsum(~p)
    last_of_group = np.ones(s.size, dtype=bool)
    last_of_group[:-1] = s[:-1] != s[1:]
    thr = np.concatenate(([np.inf], s[last_of_group]))
    tpr = np.concatenate(([0.0], tp[last_of_group] / n_pos))
    fpr = np.concatenate(([0.0], fp[last_of_group] / n_neg))
    return thr, fpr, tpr


def auc_trapezoid(fpr: np.ndarray, tpr: np.ndarray) -> float:
    return float(np.trapezoid(tpr, fpr))


@dataclass
class EvalReport:
    accuracy: float                       # percent
    confusion: np.ndarray                 # raw counts, rows = truth
    confusion_normalized: np.ndarray      # rows sum to 1 (0 rows stay 0)
    roc: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]
    auc: dict[int, float]


def score_report(truth, probs) -> EvalReport:
    """Full evaluation of per-image mean probabilities against truth labels."""
    probs = _check_probs(np.asarray(probs, dtype=np.float64), "score_report")
    if probs.ndim != 2:
        raise ValueError("probs must be (n, 3)")
    predicted = probs.argmax(axis=1)
    cm = confusion_matrix(truth, predicted)
    total = int(cm.sum())
    accuracy = 100.0 * float(np.trace(cm)) / total
    row_sums = cm.sum(axis=1, keepdims=True)
    normalized = np.divide(cm, row_sums, out=np.zeros(cm.shape), where=row_sums > 0)
    truth = np.asarray(truth, dtype=np.int64)
    roc = {}
    auc = {}
    for cls in range(N_CLASSES):
        thr, fpr, tpr = roc_curve(probs[:, cls], truth == cls)
        roc[cls] = (thr, fpr, tpr)
        auc[cls] = auc_trapezoid(fpr, tpr) if fpr.size > 1 else float("nan")
    return EvalReport(accuracy=accuracy, confusion=cm,
                      confusion_normalized=normalized, roc=roc, auc=auc)


def per_ratio_accuracy(truth_by_id: dict[str, "object"], agg_rows: list[dict]) -> list[dict]:
    """Accuracy bucketed by retargeting ratio.

    truth_by_id maps image id to its manifest record; rows with no ratio
    (originals) land in the "none" bucket.
    """
    buckets: dict[str, list[bool]] = {}
    for row in agg_rows:
        rec = truth_by_id[row["image_id"]]
        key = "none" if rec.ratio is None else f"{rec.ratio:g}"
        buckets.setdefault(key, []).append(row["label"] == rec.label)
    out = []
    for key in sorted(buckets, key=lambda k: (k == "none", k)):
        hits = buckets[key]
        out.append({"ratio": key, "count": len(hits),
                    "accuracy": 100.0 * sum(hits) / len(hits)})
    return out


def write_report(report: EvalReport, out_dir: str | os.PathLike,
                 per_ratio: list[dict] | None = None) -> None:
    """Dump report.json, roc.json, and optionally per_ratio.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "accuracy": report.accuracy,
        "confusion": report.confusion.tolist(),
        "confusion_normalized": report.confusion_normalized.tolist(),
        "auc": {str(c): report.auc[c] for c in sorted(report.auc)},
    }
    with open(out / "report.json", "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    roc_payload = {
        str(c): {"thresholds": [None if np.isinf(t) else float(t) for t in thr],
                 "fpr": fpr.tolist(), "tpr": tpr.tolist()}
        for c, (thr, fpr, tpr) in report.roc.items()
    }
    with open(out / "roc.json", "w", encoding="utf-8") as f:
        json.dump(roc_payload, f, indent=2)
    if per_ratio is not None:
        with open(out / "per_ratio.csv", "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["ratio", "count", "accuracy"])
            writer.writeheader()
            writer.writerows(per_ratio)


def tile_grid(width: int, height: int, patch: int, stride: int) -> tuple[int, int]:
    """Number of (columns, rows) of patch-sized tiles at the given stride.

    Remainder pixels that cannot fit a whole tile are left out.
    """
    if patch > width or patch > height:
        raise ValueError(f"patch {patch} exceeds image {width}x{height}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return (width - patch) // stride + 1, (height - patch) // stride + 1


@dataclass
class LocalizationMap:
    labels: np.ndarray      # (rows, cols) argmax class per tile
    probs: np.ndarray       # (rows, cols, 3)
    patch: int
    stride: int


# tint colors per class: class 1 (inserted) blue, class 2 (removed) red
_TINTS = {1: np.array([0.0, 0.0, 255.0]), 2: np.array([255.0, 0.0, 0.0])}
_TINT_WEIGHT = 0.45


def localize(img: np.ndarray, patch: int, stride: int,
             predictions: list[PredictionRecord]) -> tuple[LocalizationMap, np.ndarray]:
    """Classify a tile grid over one large image and tint suspect regions.

    predictions must hold exactly one record per tile, indexed row-major
    (index = row * cols + col).  Overlapping tiles average their probability
    vectors per pixel before the per-pixel argmax.  Pixels no tile covers
    keep their original color.
    """
    img = require_image(img)
    h, w = img.shape[:2]
    cols, rows = tile_grid(w, h, patch, stride)
    expected = cols * rows
    if len(predictions) != expected:
        raise ValueError(f"grid is {cols}x{rows} = {expected} tiles, "
                         f"got {len(predictions)} predictions")
    by_index = {}
    for rec in predictions:
        if rec.patch_index in by_index:
            raise ValueError(f"duplicate patch_index {rec.patch_index}")
        by_index[rec.patch_index] = rec
    if sorted(by_index) != list(range(expected)):
        raise ValueError("patch indices must cover 0..tiles-1")

    tile_probs = np.empty((rows, cols, N_CLASSES))
    for idx in range(expected):
        tile_probs[idx // cols, idx % cols] = _check_probs(
            np.asarray(by_index[idx].probs), f"tile {idx}")
    labels = tile_probs.argmax(axis=2)

    acc = np.zeros((h, w, N_CLASSES))
    cover = np.zeros((h, w))
    for ty in range(rows):
        for tx in range(cols):
            y0, x0 = ty * stride, tx * stride
            acc[y0:y0 + patch, x0:x0 + patch] += tile_probs[ty, tx]
            cover[y0:y0 + patch, x0:x0 + patch] += 1.0
    covered = cover > 0
    mean = np.zeros_like(acc)
    mean[covered] = acc[covered] / cover[covered, None]
    pixel_label = np.where(covered, mean.argmax(axis=2), -1)

    rgb = as_float(img)
    if rgb.ndim == 2:
        rgb = np.stack([rgb] * 3, axis=-1)
    overlay = rgb.copy()
    for cls, tint in _TINTS.items():
        m = pixel_label == cls
        overlay[m] = (1.0 - _TINT_WEIGHT) * overlay[m] + _TINT_WEIGHT * tint
    overlay = np.clip(np.rint(overlay), 0, 255).astype(np.uint8)
    return LocalizationMap(labels=labels, probs=tile_probs,
                           patch=patch, stride=stride), overlay
