import json
import os
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from seamlab.cli import main
from seamlab.dataset import read_jsonl, read_manifest, read_patches
from seamlab.ensemble import PredictionRecord, write_predictions
from seamlab.imaging import load_image

from test_dataset import make_photo


@pytest.fixture()
def photo(tmp_path):
    p = tmp_path / "in.png"
    make_photo(p, 40, 30, seed=5)
    return p


def write_spec(path, src, out, **kw):
    body = {"source_dir": str(src), "out_dir": str(out), "target_width": 48,
            "target_height": 32, "ratios": [0.25], "seed": 1,
            "split_fractions": [0.4, 0.3, 0.3]}
    body.update(kw)
    path.write_text(json.dumps(body))
    return path


@pytest.fixture()
def corpus(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    for i in range(3):
        make_photo(src / f"s{i}.png", 70, 50, seed=40 + i)
    spec = write_spec(tmp_path / "spec.json", src, tmp_path / "out")
    assert main(["gen-dataset", "--spec", str(spec)]) == 0
    return tmp_path


class TestRetarget:
    def test_remove_writes_resized_file(self, photo, tmp_path):
        out = tmp_path / "out.png"
        code = main(["retarget", "--method", "avidan", "--ratio", "0.25",
                     "--mode", "remove", str(photo), str(out)])
        assert code == 0
        assert load_image(out).shape[:2] == (30, 30)

    def test_insert_horizontal(self, photo, tmp_path):
        out = tmp_path / "out.png"
        code = main(["retarget", "--method", "rubinstein", "--ratio", "0.2",
                     "--mode", "insert", "--axis", "horizontal",
                     str(photo), str(out)])
        assert code == 0
        assert load_image(out).shape[:2] == (36, 40)

    def test_dump_artifacts(self, photo, tmp_path):
        out = tmp_path / "out.png"
        seams = tmp_path / "seams.json"
        viz = tmp_path / "viz.png"
        energy = tmp_path / "energy.png"
        code = main(["retarget", "--method", "frankovich", "--ratio", "0.1",
                     "--mode", "remove", str(photo), str(out),
                     "--dump-seams", str(seams), "--visualize", str(viz),
                     "--dump-energy", str(energy)])
        assert code == 0
        payload = json.loads(seams.read_text())
        assert payload["count"] == 4 and len(payload["seams"]) == 4
        assert len(payload["seams"][0]) == 30
        assert load_image(viz).shape == (30, 40, 3)
        assert load_image(energy).shape == (30, 40)

    def test_missing_input_fails_cleanly(self, tmp_path, capsys):
        code = main(["retarget", "--method", "avidan", "--ratio", "0.2",
                     "--mode", "remove", str(tmp_path / "nope.png"),
                     str(tmp_path / "o.png")])
        assert code == 1
        assert "retarget" in capsys.readouterr().err

    def test_bad_ratio_fails_cleanly(self, photo, tmp_path):
        code = main(["retarget", "--method", "avidan", "--ratio", "0.001",
                     "--mode", "remove", str(photo), str(tmp_path / "o.png")])
        assert code == 1

    def test_unknown_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["transmogrify"])
        assert exc.value.code == 2

    def test_bad_method_is_usage_error(self, photo, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["retarget", "--method", "sobel", "--ratio", "0.2",
                  "--mode", "remove", str(photo), str(tmp_path / "o.png")])
        assert exc.value.code == 2


class TestGenDataset:
    def test_builds_manifest(self, corpus):
        records = read_manifest(corpus / "out" / "manifest.jsonl")
        assert len(records) == 9        # 3 x (1 original + 2 carved)
        assert {r.split for r in records} == {"train", "val", "test"}

    def test_out_dir_env_override(self, tmp_path, monkeypatch):
        src = tmp_path / "src"
        src.mkdir()
        make_photo(src / "a.png", 70, 50, seed=3)
        spec = write_spec(tmp_path / "spec.json", src, tmp_path / "ignored",
                          split_fractions=[1.0, 0.0, 0.0])
        redirected = tmp_path / "redirected"
        monkeypatch.setenv("SEAMLAB_OUT_DIR", str(redirected))
        assert main(["gen-dataset", "--spec", str(spec)]) == 0
        assert (redirected / "manifest.jsonl").is_file()
        assert not (tmp_path / "ignored").exists()

    def test_gen_robustness_subset(self, corpus, capsys):
        code = main(["gen-robustness", "--spec", str(corpus / "spec.json"),
                     "--sets", "recompressed,bmp"])
        assert code == 0
        out = capsys.readouterr().out
        assert "recompressed" in out and "bmp" in out
        assert (corpus / "out" / "robustness" / "recompressed.jsonl").is_file()
        assert not (corpus / "out" / "robustness" / "awgn.jsonl").exists()


class TestPatchPipeline:
    def run_pipeline(self, corpus, theta):
        out = corpus / "out"
        patches = corpus / "patches.jsonl"
        code = main(["sample-patches", "--manifest", str(out / "manifest.jsonl"),
                     "--theta", str(theta), "--patch", "16", "--seed", "5",
                     "--out", str(patches), "--emit-crops", str(corpus / "crops")])
        assert code == 0
        return patches

    def test_full_flow_with_synthetic_predictions(self, corpus, capsys):
        out = corpus / "out"
        patches = self.run_pipeline(corpus, theta=2)
        rows = read_patches(patches)
        records = {r.path: r for r in read_manifest(out / "manifest.jsonl")}
        assert len(rows) == 2 * len(records)
        crops = list((corpus / "crops").glob("*.png"))
        assert len(crops) == len(rows)
        assert load_image(crops[0]).shape[:2] == (16, 16)

        # a perfect synthetic classifier: one-hot on the true label
        preds = [PredictionRecord(p.image_id, p.patch_index,
                                  [1.0 if c == records[p.image_id].label else 0.0
                                   for c in range(3)]) for p in rows]
        preds_path = corpus / "preds.jsonl"
        write_predictions(preds_path, preds)
        agg_path = corpus / "agg.jsonl"
        code = main(["aggregate", "--preds", str(preds_path),
                     "--manifest", str(patches), "--out", str(agg_path)])
        assert code == 0
        agg = read_jsonl(agg_path)
        assert len(agg) == len(records)
        assert all(r["label"] == records[r["image_id"]].label for r in agg)

        report = corpus / "report"
        code = main(["eval", "--truth", str(out / "manifest.jsonl"),
                     "--agg", str(agg_path), "--report", str(report)])
        assert code == 0
        data = json.loads((report / "report.json").read_text())
        assert data["accuracy"] == 100.0
        assert (report / "per_ratio.csv").is_file()
        assert "100.00%" in capsys.readouterr().out

    def test_aggregate_rejects_manifest_mismatch(self, corpus):
        patches = self.run_pipeline(corpus, theta=1)
        rows = read_patches(patches)
        preds = [PredictionRecord(p.image_id, p.patch_index, [1.0, 0.0, 0.0])
                 for p in rows[:-1]]        # one patch missing
        preds_path = corpus / "preds.jsonl"
        write_predictions(preds_path, preds)
        code = main(["aggregate", "--preds", str(preds_path),
                     "--manifest", str(patches), "--out", str(corpus / "agg.jsonl")])
        assert code == 1

    def test_config_file_supplies_defaults(self, corpus):
        cfg = corpus / "cfg.json"
        cfg.write_text(json.dumps({"sample-patches": {"theta": 3, "patch": 16}}))
        patches = corpus / "p2.jsonl"
        code = main(["--config", str(cfg), "sample-patches",
                     "--manifest", str(corpus / "out" / "manifest.jsonl"),
                     "--out", str(patches)])
        assert code == 0
        rows = read_patches(patches)
        per_image = len(rows) / len(read_manifest(corpus / "out" / "manifest.jsonl"))
        assert per_image == 3.0

    def test_explicit_flag_beats_config(self, corpus):
        cfg = corpus / "cfg.json"
        cfg.write_text(json.dumps({"sample-patches": {"theta": 3, "patch": 16}}))
        patches = corpus / "p3.jsonl"
        code = main(["--config", str(cfg), "sample-patches",
                     "--manifest", str(corpus / "out" / "manifest.jsonl"),
                     "--theta", "1", "--out", str(patches)])
        assert code == 0
        assert all(p.patch_index == 0 for p in read_patches(patches))


class TestLocalize:
    def test_overlay_and_map(self, tmp_path):
        img_path = tmp_path / "big.png"
        make_photo(img_path, 10, 6, seed=2)
        grid_cols, grid_rows = 5, 3
        preds = [PredictionRecord("big", i, [0.0, 0.0, 1.0] if i == 7 else [1.0, 0.0, 0.0])
                 for i in range(grid_cols * grid_rows)]
        preds_path = tmp_path / "tiles.jsonl"
        write_predictions(preds_path, preds)
        overlay = tmp_path / "overlay.png"
        map_out = tmp_path / "map.json"
        code = main(["localize", "--image", str(img_path), "--patch", "2",
                     "--stride", "2", "--preds", str(preds_path),
                     "--overlay", str(overlay), "--map", str(map_out)])
        assert code == 0
        assert load_image(overlay).shape == (6, 10, 3)
        grid = json.loads(map_out.read_text())
        assert np.array(grid["labels"]).shape == (grid_rows, grid_cols)
        assert grid["labels"][1][2] == 2

    def test_wrong_tile_count_fails(self, tmp_path):
        img_path = tmp_path / "big.png"
        make_photo(img_path, 10, 6, seed=2)
        preds_path = tmp_path / "tiles.jsonl"
        write_predictions(preds_path, [PredictionRecord("big", 0, [1.0, 0.0, 0.0])])
        code = main(["localize", "--image", str(img_path), "--patch", "2",
                     "--stride", "2", "--preds", str(preds_path),
                     "--overlay", str(tmp_path / "o.png")])
        assert code == 1
