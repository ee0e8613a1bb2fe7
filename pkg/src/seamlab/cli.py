"""Command-line front end.

Subcommands map one-to-one onto pipeline stages: retarget a single image,
generate a corpus or its robustness sets, sample patches, aggregate patch
predictions, score them, and localize tampering on large images.

Global flags: --seed, --jobs, --config FILE.  A config file is JSON keyed
by subcommand, giving defaults that sit between built-ins and explicit
flags.  If SEAMLAB_OUT_DIR is set, it overrides output *directories*
(corpus out_dir, eval report dir); plain output files are untouched.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import dataset, ensemble
from .energy import energy_heatmap
from .imaging import load_image, save_image
from .seams import SeamMethod, method_costs, render_seam_overlay, retarget, trace_seams

OUT_DIR_ENV = "SEAMLAB_OUT_DIR"

_METHOD_NAMES = [m.value for m in SeamMethod]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seamlab",
        description="Seam-carving retargeting and retargeting-forensics pipeline")
    parser.add_argument("--seed", type=int, default=None,
                        help="base RNG seed (default 0)")
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker processes for corpus generation (default: all cores)")
    parser.add_argument("--config", type=str, default=None,
                        help="JSON file with per-subcommand default options")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("retarget", help="carve one image to a new size")
    p.add_argument("--method", choices=_METHOD_NAMES, required=True)
    p.add_argument("--ratio", type=float, required=True,
                   help="fraction of the axis extent to remove or insert")
    p.add_argument("--mode", choices=["remove", "insert"], required=True)
    p.add_argument("--axis", choices=["vertical", "horizontal"], default="vertical")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dump-seams", metavar="JSON",
                   help="write the seam columns used, one list per seam")
    p.add_argument("--visualize", metavar="PNG",
                   help="write the input with the carved seams painted red")
    p.add_argument("--dump-energy", metavar="PNG",
                   help="write the method's base energy map as a heatmap")

    p = sub.add_parser("gen-dataset", help="build a labeled corpus from source photos")
    p.add_argument("--spec", required=True, help="corpus spec JSON")

    p = sub.add_parser("gen-robustness", help="build held-out stress sets for a corpus")
    p.add_argument("--spec", required=True, help="corpus spec JSON")
    p.add_argument("--sets", default=None,
                   help="comma list: unseen_ratio,recompressed,awgn,bmp,unseen_method")

    p = sub.add_parser("sample-patches", help="sample patch rectangles for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--theta", type=int, default=None, help="patches per image (default 1)")
    p.add_argument("--patch", type=int, default=None, help="square patch side (default 256)")
    p.add_argument("--seed", type=int, default=None, dest="patch_seed")
    p.add_argument("--emit-crops", metavar="DIR", default=None,
                   help="also write the patch pixels as PNG files")

    p = sub.add_parser("aggregate", help="average patch predictions per image")
    p.add_argument("--preds", required=True)
    p.add_argument("--manifest", required=True, help="patch manifest the predictions cover")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score aggregated predictions against a manifest")
    p.add_argument("--truth", required=True, help="corpus manifest with labels")
    p.add_argument("--agg", required=True, help="aggregated predictions JSONL")
    p.add_argument("--report", required=True, help="directory for report files")

    p = sub.add_parser("localize", help="tint suspect tiles of a large image")
    p.add_argument("--image", required=True)
    p.add_argument("--patch", type=int, default=None, help="tile side (default 128)")
    p.add_argument("--stride", type=int, default=None, help="tile stride (default 128)")
    p.add_argument("--preds", required=True, help="per-tile predictions JSONL, row-major")
    p.add_argument("--overlay", required=True, help="output overlay PNG")
    p.add_argument("--map", dest="map_out", default=None,
                   help="also write the tile label grid as JSON")
    return parser


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object keyed by subcommand")
    return cfg


class _Options:
    """Layered option lookup: explicit flag, then config file, then default."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.section = config.get(args.command, {})

    def get(self, key: str, default):
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        if key in self.section:
            return self.section[key]
        return default


def _out_dir_override(path: str) -> str:
    return os.environ.get(OUT_DIR_ENV, path)


def _cmd_retarget(opts: _Options) -> int:
    args = opts.args
    img = load_image(args.input)
    method = SeamMethod(args.method)
    out, seams = retarget(img, method, args.ratio, args.mode, args.axis)
    save_image(args.output, out)
    h, w = out.shape[:2]
    print(f"{args.input} -> {args.output}  {img.shape[1]}x{img.shape[0]} -> {w}x{h} "
          f"({len(seams)} seams, {args.mode}, {args.axis})")
    if args.dump_seams:
        payload = {"method": method.value, "mode": args.mode, "axis": args.axis,
                   "count": len(seams), "seams": [s.tolist() for s in seams]}
        with open(args.dump_seams, "w", encoding="utf-8") as f:
            json.dump(payload, f)
    if args.visualize:
        origins = trace_seams(img, method, args.ratio, args.axis)
        save_image(args.visualize, render_seam_overlay(img, origins, args.axis))
    if args.dump_energy:
        base, _ = method_costs(img, method)
        save_image(args.dump_energy, energy_heatmap(base))
    return 0


def _cmd_gen_dataset(opts: _Options) -> int:
    spec = dataset.CorpusSpec.from_json(opts.args.spec)
    spec.out_dir = _out_dir_override(spec.out_dir)
    if opts.args.seed is not None:
        spec.seed = opts.args.seed
    records, skipped = dataset.build_corpus(spec, jobs=opts.args.jobs)
    per_split = {s: sum(1 for r in records if r.split == s) for s in dataset.SPLITS}
    print(f"corpus at {spec.out_dir}: {len(records)} files "
          f"(train {per_split['train']}, val {per_split['val']}, test {per_split['test']}), "
          f"{skipped} sources skipped as undersized")
    return 0


def _cmd_gen_robustness(opts: _Options) -> int:
    spec = dataset.CorpusSpec.from_json(opts.args.spec)
    spec.out_dir = _out_dir_override(spec.out_dir)
    if opts.args.seed is not None:
        spec.seed = opts.args.seed
    sets = opts.get("sets", None)
    kwargs = {}
    if sets:
        kwargs["sets"] = tuple(s.strip() for s in sets.split(",") if s.strip())
    manifests = dataset.gen_robustness_sets(spec, **kwargs)
    for name, records in manifests.items():
        print(f"robustness set {name}: {len(records)} files")
    return 0


def _cmd_sample_patches(opts: _Options) -> int:
    args = opts.args
    theta = int(opts.get("theta", 1))
    patch = int(opts.get("patch", 256))
    seed = args.patch_seed if args.patch_seed is not None else (
        args.seed if args.seed is not None else 0)
    manifest_path = Path(args.manifest)
    records = dataset.read_manifest(manifest_path)
    root = manifest_path.parent
    patches = dataset.build_patch_manifest(records, root, theta, patch, patch, seed)
    dataset.write_jsonl(args.out, patches)
    print(f"{len(patches)} patches ({theta} per image) -> {args.out}")
    crops_dir = opts.get("emit_crops", None)
    if crops_dir:
        out = Path(crops_dir)
        out.mkdir(parents=True, exist_ok=True)
        for rec in patches:
            img = load_image(root / rec.image_id)
            crop = dataset.extract_patch(img, rec.rx, rec.ry, rec.w, rec.h)
            stem = rec.image_id.replace("/", "__")
            save_image(out / f"{Path(stem).stem}__p{rec.patch_index}.png", crop)
    return 0


def _cmd_aggregate(opts: _Options) -> int:
    args = opts.args
    preds = ensemble.read_predictions(args.preds)
    patches = dataset.read_patches(args.manifest)
    expected = {(p.image_id, p.patch_index) for p in patches}
    got = {(p.image_id, p.patch_index) for p in preds}
    if len(got) != len(preds):
        raise ValueError("duplicate (image_id, patch_index) in predictions")
    if got != expected:
        missing = len(expected - got)
        extra = len(got - expected)
        raise ValueError(f"predictions do not match patch manifest "
                         f"({missing} missing, {extra} unexpected)")
    rows = ensemble.aggregate_all(preds)
    dataset.write_jsonl(args.out, rows)
    print(f"aggregated {len(preds)} patch predictions into {len(rows)} images -> {args.out}")
    return 0


def _cmd_eval(opts: _Options) -> int:
    args = opts.args
    truth = {r.path: r for r in dataset.read_manifest(args.truth)}
    rows = dataset.read_jsonl(args.agg)
    unknown = [r["image_id"] for r in rows if r["image_id"] not in truth]
    if unknown:
        raise ValueError(f"{len(unknown)} aggregated ids missing from truth manifest, "
                         f"first: {unknown[0]}")
    if not rows:
        raise ValueError("no aggregated predictions to score")
    labels = [truth[r["image_id"]].label for r in rows]
    probs = [r["probs"] for r in rows]
    report = ensemble.score_report(labels, probs)
    per_ratio = ensemble.per_ratio_accuracy(truth, rows)
    report_dir = _out_dir_override(args.report)
    ensemble.write_report(report, report_dir, per_ratio)
    print(f"accuracy {report.accuracy:.2f}% over {len(rows)} images; report -> {report_dir}")
    return 0


def _cmd_localize(opts: _Options) -> int:
    args = opts.args
    patch = int(opts.get("patch", 128))
    stride = int(opts.get("stride", 128))
    img = load_image(args.image)
    preds = ensemble.read_predictions(args.preds)
    lmap, overlay = ensemble.localize(img, patch, stride, preds)
    save_image(args.overlay, overlay)
    rows, cols = lmap.labels.shape
    flagged = int((lmap.labels > 0).sum())
    print(f"{cols}x{rows} tiles, {flagged} flagged -> {args.overlay}")
    if args.map_out:
        payload = {"patch": patch, "stride": stride,
                   "labels": lmap.labels.tolist(),
                   "probs": lmap.probs.tolist()}
        with open(args.map_out, "w", encoding="utf-8") as f:
            json.dump(payload, f)
    return 0


_COMMANDS = {
    "retarget": _cmd_retarget,
    "gen-dataset": _cmd_gen_dataset,
    "gen-robustness": _cmd_gen_robustness,
    "sample-patches": _cmd_sample_patches,
    "aggregate": _cmd_aggregate,
    "eval": _cmd_eval,
    "localize": _cmd_localize,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        opts = _Options(args, config)
        return _COMMANDS[args.command](opts)
    except (ValueError, OSError, KeyError) as exc:
        print(f"seamlab {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
