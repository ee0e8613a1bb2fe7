"""Corpus generation for retargeting forensics.

A corpus is built from a directory of source photos.  Each source is
center-cropped to a fixed frame, saved untouched (class 0), and carved once
per (method, ratio) in both directions: seam insertion is class 1, seam
removal is class 2.  Carving always runs on the pre-compression pixels; the
output encoding happens last.  Train/val/test splits are assigned per source
image so no derivative of a test photo can leak into training.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .imaging import add_awgn, center_crop, image_seed, load_image, save_image
from .seams import SeamMethod, retarget

LABEL_ORIGINAL = 0
LABEL_INSERTED = 1
LABEL_REMOVED = 2

SPLITS = ("train", "val", "test")
_SOURCE_EXTS = (".png", ".jpg", ".jpeg", ".bmp")
_FORMAT_EXT = {"jpeg": ".jpg", "png": ".png", "bmp": ".bmp"}


@dataclass
class CorpusSpec:
    source_dir: str
    out_dir: str
    target_width: int = 512
    target_height: int = 384
    ratios: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5)
    methods: tuple[SeamMethod, ...] = (SeamMethod.AVIDAN,)
    save_format: str = "jpeg"
    jpeg_quality: int = 100
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        self.ratios = tuple(float(r) for r in self.ratios)
        self.methods = tuple(m if isinstance(m, SeamMethod) else SeamMethod(m)
                             for m in self.methods)
        self.split_fractions = tuple(float(f) for f in self.split_fractions)
        if self.save_format not in _FORMAT_EXT:
            raise ValueError(f"save_format must be one of {sorted(_FORMAT_EXT)}")
        if not self.ratios or any(not 0.0 < r < 1.0 for r in self.ratios):
            raise ValueError(f"ratios must lie in (0, 1), got {self.ratios}")
        if not self.methods:
            raise ValueError("at least one seam method is required")
        if len(self.split_fractions) != 3 or abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {self.split_fractions}")
        if not 1 <= self.jpeg_quality <= 100:
            raise ValueError(f"jpeg_quality must be 1..100, got {self.jpeg_quality}")

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "CorpusSpec":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown corpus spec keys: {sorted(unknown)}")
        missing = {"source_dir", "out_dir"} - set(raw)
        if missing:
            raise ValueError(f"corpus spec missing keys: {sorted(missing)}")
        return cls(**raw)

    def to_json(self, path: str | os.PathLike) -> None:
        raw = {
            "source_dir": self.source_dir,
            "out_dir": self.out_dir,
            "target_width": self.target_width,
            "target_height": self.target_height,
            "ratios": list(self.ratios),
            "methods": [m.value for m in self.methods],
            "save_format": self.save_format,
            "jpeg_quality": self.jpeg_quality,
            "split_fractions": list(self.split_fractions),
            "seed": self.seed,
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(raw, f, indent=2)


@dataclass
class SampleRecord:
    """One corpus image: path is relative to the corpus root and doubles as
    the image id downstream."""

    path: str
    label: int
    method: str | None
    ratio: float | None
    split: str

    def to_dict(self) -> dict:
        return {"path": self.path, "label": self.label, "method": self.method,
                "ratio": self.ratio, "split": self.split}

    @classmethod
    def from_dict(cls, d: dict) -> "SampleRecord":
        return cls(path=d["path"], label=int(d["label"]), method=d["method"],
                   ratio=None if d["ratio"] is None else float(d["ratio"]),
                   split=d["split"])


@dataclass
class PatchRecord:
    image_id: str
    rx: int
    ry: int
    w: int
    h: int
    patch_index: int

    def to_dict(self) -> dict:
        return {"image_id": self.image_id, "rx": self.rx, "ry": self.ry,
                "w": self.w, "h": self.h, "patch_index": self.patch_index}

    @classmethod
    def from_dict(cls, d: dict) -> "PatchRecord":
        return cls(image_id=d["image_id"], rx=int(d["rx"]), ry=int(d["ry"]),
                   w=int(d["w"]), h=int(d["h"]), patch_index=int(d["patch_index"]))


def write_jsonl(path: str | os.PathLike, rows) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row.to_dict() if hasattr(row, "to_dict") else row))
            f.write("\n")


def read_jsonl(path: str | os.PathLike) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def read_manifest(path: str | os.PathLike) -> list[SampleRecord]:
    return [SampleRecord.from_dict(d) for d in read_jsonl(path)]


def read_patches(path: str | os.PathLike) -> list[PatchRecord]:
    return [PatchRecord.from_dict(d) for d in read_jsonl(path)]


def crop_topleft(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Crop the top-left width x height window."""
    h, w = img.shape[:2]
    if w < width or h < height:
        raise ValueError(f"image {w}x{h} smaller than crop {width}x{height}")
    return img[:height, :width].copy()


def extract_patch(img: np.ndarray, rx: int, ry: int, width: int, height: int) -> np.ndarray:
    h, w = img.shape[:2]
    if rx < 0 or ry < 0 or rx + width > w or ry + height > h:
        raise ValueError(f"patch ({rx},{ry},{width},{height}) exceeds image {w}x{h}")
    return img[ry:ry + height, rx:rx + width].copy()


def sample_patch_coords(width: int, height: int, patch_w: int, patch_h: int,
                        theta: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Corner coordinates for theta patches inside a width x height image.

    The first patch is pinned to (0, 0); the rest draw each corner
    coordinate uniformly from the valid integer range.
    """
    if theta < 1:
        raise ValueError(f"theta must be >= 1, got {theta}")
    if patch_w > width or patch_h > height:
        raise ValueError(f"patch {patch_w}x{patch_h} larger than image {width}x{height}")
    mx = width - patch_w
    my = height - patch_h
    coords = [(0, 0)]
    for _ in range(theta - 1):
        rx = int(rng.integers(0, mx + 1))
        ry = int(rng.integers(0, my + 1))
        coords.append((rx, ry))
    return coords


def assign_splits(n: int, fractions: tuple[float, float, float], seed: int) -> list[str]:
    """Deterministic train/val/test assignment for n items.

    Counts are floors of n * fraction; the remainder goes to the splits
    with the largest fractional parts (ties favor earlier splits), so small
    corpora still populate val and test.  A seeded permutation decides
    which item lands where.
    """
    counts = [int(n * f) for f in fractions]
    fracs = [n * f - c for f, c in zip(fractions, counts)]
    for i in sorted(range(3), key=lambda i: -fracs[i])[:n - sum(counts)]:
        counts[i] += 1
    labels = np.repeat(np.array(SPLITS, dtype=object), counts)
    perm = np.random.default_rng(seed).permutation(n)
    out = [""] * n
    for slot, item in enumerate(perm):
        out[item] = labels[slot]
    return out


def _scan_sources(spec: CorpusSpec):
    """Size-screened source list as (path, stem) plus the skipped count.

    Only image headers are read here, so screening stays cheap.
    """
    root = Path(spec.source_dir)
    if not root.is_dir():
        raise ValueError(f"source_dir does not exist: {root}")
    paths = sorted(p for p in root.iterdir()
                   if p.suffix.lower() in _SOURCE_EXTS and p.is_file())
    kept, skipped = [], 0
    for p in paths:
        with Image.open(p) as im:
            w, h = im.size
        if w < spec.target_width or h < spec.target_height:
            skipped += 1
            continue
        kept.append((p, p.stem))
    stems = [s for _, s in kept]
    if len(set(stems)) != len(stems):
        raise ValueError("duplicate source stems; rename inputs to be unique")
    return kept, skipped


def _derivative_name(stem: str, method: SeamMethod, ratio: float, ext: str) -> str:
    return f"{stem}__{method.value}__r{int(round(ratio * 1000)):04d}{ext}"


def _carve_one_source(args) -> list[dict]:
    """Worker: crop one source and emit its original + carved files."""
    spec, src, stem, split = args
    ext = _FORMAT_EXT[spec.save_format]
    out_root = Path(spec.out_dir)
    raw = center_crop(load_image(src), spec.target_width, spec.target_height)

    rows = []
    orig_rel = f"originals/{stem}{ext}"
    save_image(out_root / orig_rel, raw, quality=spec.jpeg_quality)
    rows.append(SampleRecord(orig_rel, LABEL_ORIGINAL, None, None, split).to_dict())

    for method in spec.methods:
        for ratio in spec.ratios:
            removed, _ = retarget(raw, method, ratio, "remove")
            inserted, _ = retarget(raw, method, ratio, "insert")
            for folder, img, label in (("removed", removed, LABEL_REMOVED),
                                       ("inserted", inserted, LABEL_INSERTED)):
                rel = f"{folder}/{_derivative_name(stem, method, ratio, ext)}"
                save_image(out_root / rel, img, quality=spec.jpeg_quality)
                rows.append(SampleRecord(rel, label, method.value, ratio, split).to_dict())
    return rows


def build_corpus(spec: CorpusSpec, jobs: int | None = None) -> tuple[list[SampleRecord], int]:
    """Generate the corpus and its manifest.jsonl; returns (records, skipped)."""
    kept, skipped = _scan_sources(spec)
    if not kept:
        raise ValueError(f"no usable sources in {spec.source_dir}")
    splits = assign_splits(len(kept), spec.split_fractions, spec.seed)

    out_root = Path(spec.out_dir)
    for sub in ("originals", "inserted", "removed"):
        (out_root / sub).mkdir(parents=True, exist_ok=True)

    tasks = [(spec, str(src), stem, split)
             for (src, stem), split in zip(kept, splits)]
    jobs = os.cpu_count() if jobs is None else jobs
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_source = list(pool.map(_carve_one_source, tasks))
    else:
        per_source = [_carve_one_source(t) for t in tasks]

    rows = [d for chunk in per_source for d in chunk]
    rows.sort(key=lambda d: d["path"])
    records = [SampleRecord.from_dict(d) for d in rows]
    write_jsonl(out_root / "manifest.jsonl", records)
    return records, skipped


def build_patch_manifest(records: list[SampleRecord], corpus_root: str | os.PathLike,
                         theta: int, patch_w: int, patch_h: int,
                         seed: int) -> list[PatchRecord]:
    """Sample theta patch rectangles per corpus image.

    Each image gets its own RNG stream keyed by (seed, image id), so the
    draw does not depend on manifest order.
    """
    root = Path(corpus_root)
    out = []
    for rec in records:
        with Image.open(root / rec.path) as im:
            w, h = im.size
        rng = image_seed(seed, rec.path)
        coords = sample_patch_coords(w, h, patch_w, patch_h, theta, rng)
        for idx, (rx, ry) in enumerate(coords):
            out.append(PatchRecord(rec.path, rx, ry, patch_w, patch_h, idx))
    return out


def _test_records(spec: CorpusSpec):
    """Re-derive the test-split originals exactly as build_corpus assigned them."""
    kept, _ = _scan_sources(spec)
    splits = assign_splits(len(kept), spec.split_fractions, spec.seed)
    return [(src, stem) for (src, stem), split in zip(kept, splits) if split == "test"]


def _original_row(stem: str, ext: str) -> dict:
    return SampleRecord(f"originals/{stem}{ext}", LABEL_ORIGINAL, None, None,
                        "test").to_dict()


def gen_robustness_sets(spec: CorpusSpec,
                        unseen_ratios: tuple[float, ...] = (0.04, 0.06, 0.08),
                        awgn_sigmas: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5),
                        sets: tuple[str, ...] = ("unseen_ratio", "recompressed",
                                                 "awgn", "bmp", "unseen_method"),
                        ) -> dict[str, list[SampleRecord]]:
    """Build the held-out stress sets from the test split of an existing corpus.

    All paths in the returned manifests stay relative to the corpus root;
    each set also writes robustness/<name>.jsonl there.

    unseen_ratio   carve test originals at ratios the classifier never saw
    recompressed   pair each test original with a decode+re-encode copy
    awgn           noisy copies of every test file, saved losslessly as PNG
    bmp            the test set re-carved from raw pixels, saved as BMP
    unseen_method  test originals carved by methods outside the corpus spec
    """
    out_root = Path(spec.out_dir)
    if not (out_root / "manifest.jsonl").is_file():
        raise ValueError(f"no corpus manifest under {out_root}; build the corpus first")
    ext = _FORMAT_EXT[spec.save_format]
    test_sources = _test_records(spec)
    if not test_sources:
        raise ValueError("corpus has no test-split originals")
    all_records = read_manifest(out_root / "manifest.jsonl")
    test_rows = [r for r in all_records if r.split == "test"]
    (out_root / "robustness").mkdir(exist_ok=True)
    manifests: dict[str, list[SampleRecord]] = {}

    def emit(name: str, rows: list[dict]):
        rows.sort(key=lambda d: d["path"])
        records = [SampleRecord.from_dict(d) for d in rows]
        write_jsonl(out_root / "robustness" / f"{name}.jsonl", records)
        manifests[name] = records

    raw_crops = {stem: center_crop(load_image(src), spec.target_width, spec.target_height)
                 for src, stem in test_sources}

    if "unseen_ratio" in sets:
        base = "robustness/unseen_ratio"
        (out_root / base).mkdir(exist_ok=True)
        rows = [_original_row(stem, ext) for stem in raw_crops]
        for stem, raw in raw_crops.items():
            for method in spec.methods:
                for ratio in unseen_ratios:
                    for mode, label in (("remove", LABEL_REMOVED), ("insert", LABEL_INSERTED)):
                        img, _ = retarget(raw, method, ratio, mode)
                        rel = f"{base}/{mode}__{_derivative_name(stem, method, ratio, ext)}"
                        save_image(out_root / rel, img, quality=spec.jpeg_quality)
                        rows.append(SampleRecord(rel, label, method.value, ratio,
                                                 "test").to_dict())
        emit("unseen_ratio", rows)

    if "recompressed" in sets:
        base = "robustness/recompressed"
        (out_root / base).mkdir(exist_ok=True)
        rows = []
        for stem in raw_crops:
            single_rel = f"originals/{stem}{ext}"
            double_rel = f"{base}/{stem}__x2.jpg"
            save_image(out_root / double_rel, load_image(out_root / single_rel),
                       quality=spec.jpeg_quality)
            rows.append(_original_row(stem, ext))
            rows.append(SampleRecord(double_rel, LABEL_ORIGINAL, None, None,
                                     "test").to_dict())
        emit("recompressed", rows)

    if "awgn" in sets:
        base = "robustness/awgn"
        rows = []
        for sigma in awgn_sigmas:
            sub = f"{base}/s{int(round(sigma * 100)):03d}"
            (out_root / sub).mkdir(parents=True, exist_ok=True)
            for rec in test_rows:
                # per-(file, sigma) stream so processing order is irrelevant
                stream = image_seed(spec.seed, f"{rec.path}#awgn{sigma:g}")
                noisy = add_awgn(load_image(out_root / rec.path), sigma,
                                 int(stream.integers(2 ** 32)))
                rel = f"{sub}/{Path(rec.path).stem}.png"
                save_image(out_root / rel, noisy)
                rows.append(SampleRecord(rel, rec.label, rec.method, rec.ratio,
                                         "test").to_dict())
        emit("awgn", rows)

    if "bmp" in sets:
        base = "robustness/bmp"
        (out_root / base).mkdir(exist_ok=True)
        rows = []
        for stem, raw in raw_crops.items():
            rel = f"{base}/{stem}.bmp"
            save_image(out_root / rel, raw)
            rows.append(SampleRecord(rel, LABEL_ORIGINAL, None, None, "test").to_dict())
            for method in spec.methods:
                for ratio in spec.ratios:
                    for mode, label in (("remove", LABEL_REMOVED), ("insert", LABEL_INSERTED)):
                        img, _ = retarget(raw, method, ratio, mode)
                        rel = f"{base}/{mode}__{_derivative_name(stem, method, ratio, '.bmp')}"
                        save_image(out_root / rel, img)
                        rows.append(SampleRecord(rel, label, method.value, ratio,
                                                 "test").to_dict())
        emit("bmp", rows)

    if "unseen_method" in sets:
        base = "robustness/unseen_method"
        (out_root / base).mkdir(exist_ok=True)
        unseen = [m for m in SeamMethod if m not in spec.methods]
        rows = [_original_row(stem, ext) for stem in raw_crops]
        for stem, raw in raw_crops.items():
            for method in unseen:
                for ratio in spec.ratios:
                    for mode, label in (("remove", LABEL_REMOVED), ("insert", LABEL_INSERTED)):
                        img, _ = retarget(raw, method, ratio, mode)
                        rel = f"{base}/{mode}__{_derivative_name(stem, method, ratio, ext)}"
                        save_image(out_root / rel, img, quality=spec.jpeg_quality)
                        rows.append(SampleRecord(rel, label, method.value, ratio,
                                                 "test").to_dict())
        emit("unseen_method", rows)

    return manifests
