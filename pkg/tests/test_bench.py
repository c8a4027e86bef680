"""End-to-end tests for ingestion, the batch commands and the CLI."""
import json
import logging
import os

import numpy as np
import pandas as pd
import pytest
import torch

from bench.dataset import DatasetManifest, ingest
from bench.runner import (
    EXIT_CONFIG_ERROR,
    EXIT_ITEM_FAILURES,
    EXIT_OK,
    run_enhance,
    run_estimate,
    run_eval,
    run_synth,
    run_train,
)
from config import Config, RunConfig, TrainConfig
from conftest import make_toy_model, write_dataset
from formation.image_formation import transmission_from_depth
from main import main
from metrics.report import MEAN_ROW_ID
from metrics.transmission import pcc_transmission
from network.checkpoint import load_checkpoint, save_checkpoint
from utils.errors import ConfigurationError, ImageLoadError, PairingError
from utils.image_io import read_image, write_depth, write_image
from utils.logger import setup_logger

SMALL_DCP = {"patch": 7, "gf_radius": 4}


def _constant(value, size=16):
    return np.broadcast_to(np.asarray(value, dtype=np.float64), (size, size, 3)).copy()


def _run_config(method, input_dir, output_dir, **overrides):
    values = dict(SMALL_DCP, input_dir=str(input_dir), output_dir=str(output_dir), workers=2)
    values.update(overrides)
    return RunConfig.from_sources(method, overrides=values)


def _rows(frame):
    return frame[frame["image_id"] != MEAN_ROW_ID].set_index("image_id")


@pytest.fixture
def dataset(tmp_path, rng):
    root = tmp_path / "data"
    write_dataset(str(root), rng, labeled=3, unlabeled=1)
    return root


class TestIngest:
    def test_empty_directory(self, tmp_path, caplog):
        with caplog.at_level(logging.WARNING):
            manifest = ingest(str(tmp_path))
        assert manifest.entries == []
        assert "No images found" in caplog.text
    
    def test_missing_root(self, tmp_path):
        with pytest.raises(ConfigurationError):
            ingest(str(tmp_path / "nowhere"))
    
    def test_labeled_and_unlabeled(self, tmp_path):
        for name in ("a", "b", "c"):
            write_image(str(tmp_path / "raw" / f"{name}.png"), _constant(0.3))
        for name in ("a", "c"):
            write_image(str(tmp_path / "reference" / f"{name}.png"), _constant(0.6))
        manifest = ingest(str(tmp_path))
        assert [e.image_id for e in manifest.entries] == ["a", "b", "c"]
        assert [e.image_id for e in manifest.labeled()] == ["a", "c"]
        assert [e.image_id for e in manifest.unlabeled()] == ["b"]
    
    def test_flat_directory(self, tmp_path):
        write_image(str(tmp_path / "x.png"), _constant(0.3))
        manifest = ingest(str(tmp_path))
        assert [e.image_id for e in manifest.entries] == ["x"]
        assert manifest.labeled() == []
    
    def test_duplicate_stem(self, tmp_path, caplog):
        write_image(str(tmp_path / "raw" / "a.png"), _constant(0.3))
        write_image(str(tmp_path / "raw" / "a.jpg"), _constant(0.3))
        with caplog.at_level(logging.WARNING):
            manifest = ingest(str(tmp_path))
        assert len(manifest.entries) == 1
        assert manifest.entries[0].degraded.endswith("a.jpg")
        assert "Duplicate stem" in caplog.text
    
    def test_dimension_mismatch(self, tmp_path):
        write_image(str(tmp_path / "raw" / "a.png"), _constant(0.3, 16))
        write_image(str(tmp_path / "reference" / "a.png"), _constant(0.3, 12))
        with pytest.raises(PairingError, match="a:"):
            ingest(str(tmp_path))
        assert len(ingest(str(tmp_path), validate=False).entries) == 1
    
    def test_corrupt_file(self, tmp_path):
        (tmp_path / "raw").mkdir()
        (tmp_path / "raw" / "broken.png").write_bytes(b"not an image")
        with pytest.raises(ImageLoadError, match="broken.png"):
            ingest(str(tmp_path))
    
    def test_manifest_file(self, dataset, tmp_path):
        manifest = ingest(str(dataset))
        path = manifest.save(str(tmp_path / "out" / "manifest.json"))
        assert DatasetManifest.load(path) == manifest
        
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        data["version"] = 7
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f)
        with pytest.raises(ConfigurationError):
            DatasetManifest.load(path)


class TestEnhance:
    def test_gray_world_constant(self, tmp_path):
        write_image(str(tmp_path / "in" / "c.png"), _constant((0.25, 0.5, 1.0)))
        cfg = _run_config("grayworld", tmp_path / "in", tmp_path / "out")
        frame, status = run_enhance(cfg, ingest(cfg.input_dir))
        assert status == EXIT_OK
        enhanced = read_image(str(tmp_path / "out" / "enhanced" / "c.png"))
        np.testing.assert_allclose(enhanced, 0.5, atol=1 / 255)
        assert os.path.isfile(tmp_path / "out" / "metrics.csv")
        assert list(frame["image_id"]) == ["c", MEAN_ROW_ID]
    
    def test_dcp_report(self, dataset, tmp_path):
        cfg = _run_config("dcp", dataset, tmp_path / "out")
        frame, status = run_enhance(cfg, ingest(cfg.input_dir))
        assert status == EXIT_OK
        rows = _rows(frame)
        assert list(rows.index) == ["img_00", "img_01", "img_02", "img_03"]
        assert rows.loc[["img_00", "img_01", "img_02"], "psnr"].notna().all()
        assert pd.isna(rows.loc["img_03", "psnr"])
        assert rows["uiqm"].notna().all()
        assert sorted(os.listdir(tmp_path / "out" / "enhanced")) == [f"img_0{i}.png" for i in range(4)]
        
        written = pd.read_csv(tmp_path / "out" / "metrics.csv")
        np.testing.assert_allclose(written["psnr"].iloc[:3], frame["psnr"].iloc[:3].astype(float))
        assert written["image_id"].iloc[-1] == MEAN_ROW_ID
        assert written["psnr"].iloc[-1] == pytest.approx(rows["psnr"].iloc[:3].mean())
    
    def test_rerun_is_identical(self, dataset, tmp_path):
        outputs = []
        for name in ("a", "b"):
            cfg = _run_config("udcp", dataset, tmp_path / name)
            run_enhance(cfg, ingest(cfg.input_dir))
            outputs.append((tmp_path / name / "metrics.csv").read_text())
            assert (tmp_path / name / "enhanced" / "img_01.png").read_bytes() == (
                tmp_path / "a" / "enhanced" / "img_01.png"
            ).read_bytes()
        assert outputs[0] == outputs[1]
    
    def test_corrupt_item_becomes_error_row(self, dataset, tmp_path):
        (dataset / "raw" / "img_99.png").write_bytes(b"not an image")
        cfg = _run_config("he", dataset, tmp_path / "out")
        frame, status = run_enhance(cfg, ingest(cfg.input_dir, validate=False))
        assert status == EXIT_ITEM_FAILURES
        rows = _rows(frame)
        assert rows.loc["img_99", "error"]
        assert pd.isna(rows.loc["img_99", "uiqm"])
        mean = frame[frame["image_id"] == MEAN_ROW_ID].iloc[0]
        assert mean["uiqm"] == pytest.approx(rows["uiqm"].dropna().astype(float).mean())
    
    def test_invalid_parameters_write_nothing(self, dataset, tmp_path):
        cfg = _run_config("dcp", dataset, tmp_path / "out", patch=4)
        with pytest.raises(ConfigurationError):
            run_enhance(cfg, ingest(cfg.input_dir))
        assert not os.path.exists(tmp_path / "out")


class TestEstimate:
    def test_dcp_outputs(self, dataset, tmp_path):
        cfg = _run_config("dcp", dataset, tmp_path / "out")
        ambient, status = run_estimate(cfg, ingest(cfg.input_dir))
        assert status == EXIT_OK
        assert sorted(ambient) == [f"img_0{i}" for i in range(4)]
        t = np.load(tmp_path / "out" / "transmission" / "img_00.npy")
        assert t.shape == (32, 32, 3)
        assert np.all((t >= 0.05) & (t <= 1.0))
        assert os.path.isfile(tmp_path / "out" / "transmission" / "img_00.png")
        swatch = read_image(str(tmp_path / "out" / "ambient" / "img_00.png"))
        np.testing.assert_allclose(swatch[0, 0], ambient["img_00"], atol=1 / 255)
        with open(tmp_path / "out" / "ambient.json", encoding="utf-8") as f:
            saved = json.load(f)
        assert saved["method"] == "dcp"
        assert saved["ambient"] == ambient
        assert saved["errors"] == {}
    
    def test_direct_method_rejected(self, dataset, tmp_path):
        cfg = _run_config("he", dataset, tmp_path / "out")
        with pytest.raises(ConfigurationError):
            run_estimate(cfg, ingest(cfg.input_dir))
    
    def test_network_needs_checkpoint(self, dataset, tmp_path):
        cfg = _run_config("pauienet", dataset, tmp_path / "out")
        with pytest.raises(ConfigurationError):
            run_estimate(cfg, ingest(cfg.input_dir))
    
    def test_network_checkpoint(self, dataset, tmp_path):
        write_image(str(dataset / "raw" / "wide.png"), _constant(0.4, 40))
        checkpoint = save_checkpoint(str(tmp_path / "model.pt"), make_toy_model(seed=3).eval(), 0)
        cfg = _run_config("pauienet", dataset, tmp_path / "out", checkpoint=checkpoint)
        ambient, status = run_estimate(cfg, ingest(cfg.input_dir, validate=False))
        assert status == EXIT_OK
        assert np.load(tmp_path / "out" / "transmission" / "wide.npy").shape == (40, 40, 3)
        assert all(0.0 <= v <= 1.0 for values in ambient.values() for v in values)
        
        frame, status = run_enhance(cfg, ingest(cfg.input_dir, validate=False))
        assert status == EXIT_OK
        assert _rows(frame)["uiqm"].notna().all()


class TestSynth:
    @pytest.fixture
    def sources(self, tmp_path, rng):
        for name in ("p", "q"):
            write_image(str(tmp_path / "clean" / f"{name}.png"), rng.uniform(size=(24, 24, 3)))
            write_depth(str(tmp_path / "depth" / f"{name}.npy"), rng.uniform(0.5, 4.0, size=(24, 24)))
        return tmp_path / "clean", tmp_path / "depth"
    
    def test_zero_depth_keeps_clean(self, tmp_path, sources):
        clean_dir, depth_dir = sources
        write_depth(str(depth_dir / "p.npy"), np.zeros((24, 24)))
        run_synth(str(clean_dir), str(depth_dir), (1.0, 0.4, 0.3), (0.1, 0.6, 0.7), str(tmp_path / "out"))
        degraded = read_image(str(tmp_path / "out" / "raw" / "p.png"))
        np.testing.assert_allclose(degraded, read_image(str(clean_dir / "p.png")), atol=1 / 255)
    
    def test_outputs_and_ground_truth_pcc(self, tmp_path, sources):
        clean_dir, depth_dir = sources
        manifest, status = run_synth(
            str(clean_dir), str(depth_dir), (1.0, 0.4, 0.3), (0.1, 0.6, 0.7), str(tmp_path / "out"), seed=3, jitter=0.2
        )
        assert status == EXIT_OK
        assert [e.image_id for e in manifest.labeled()] == ["p", "q"]
        assert DatasetManifest.load(str(tmp_path / "out" / "manifest.json")) == manifest
        with open(tmp_path / "out" / "params.json", encoding="utf-8") as f:
            params = json.load(f)
        assert params["version"] == 1 and params["seed"] == 3
        for stem, entry in params["images"].items():
            assert entry["beta"][0] == max(entry["beta"])
            assert all(0.0 <= a <= 1.0 for a in entry["ambient"])
            depth = np.load(entry["depth"])
            t = transmission_from_depth(depth, entry["beta"])
            assert pcc_transmission(t, depth, "R") == pytest.approx(1.0, abs=1e-9)
    
    def test_seeded(self, tmp_path, sources):
        clean_dir, depth_dir = sources
        args = (str(clean_dir), str(depth_dir), (1.0, 0.4, 0.3), (0.1, 0.6, 0.7))
        for name, seed in (("a", 5), ("b", 5), ("c", 6)):
            run_synth(*args, str(tmp_path / name), seed=seed, jitter=0.2)
        params = {
            name: json.loads((tmp_path / name / "params.json").read_text())["images"] for name in ("a", "b", "c")
        }
        assert params["a"]["p"]["beta"] == params["b"]["p"]["beta"]
        assert params["a"]["p"]["beta"] != params["c"]["p"]["beta"]
        assert (tmp_path / "a" / "raw" / "q.png").read_bytes() == (tmp_path / "b" / "raw" / "q.png").read_bytes()
    
    def test_missing_depth_is_skipped(self, tmp_path, sources):
        clean_dir, depth_dir = sources
        os.remove(depth_dir / "q.npy")
        manifest, status = run_synth(str(clean_dir), str(depth_dir), (1.0, 0.4, 0.3), (0.1, 0.6, 0.7), str(tmp_path / "out"))
        assert status == EXIT_ITEM_FAILURES
        assert [e.image_id for e in manifest.entries] == ["p"]
    
    @pytest.mark.parametrize(
        "beta, ambient, jitter",
        [
            ((0.3, 0.5, 0.2), (0.1, 0.6, 0.7), 0.0),
            ((1.0, 0.4, -0.1), (0.1, 0.6, 0.7), 0.0),
            ((1.0, 0.4, 0.3), (0.1, 1.6, 0.7), 0.0),
            ((1.0, 0.4, 0.3), (0.1, 0.6, 0.7), 1.0),
        ],
    )
    def test_invalid_parameters(self, tmp_path, sources, beta, ambient, jitter):
        clean_dir, depth_dir = sources
        with pytest.raises(ConfigurationError):
            run_synth(str(clean_dir), str(depth_dir), beta, ambient, str(tmp_path / "out"), jitter=jitter)


class TestEval:
    def test_against_references(self, dataset, tmp_path, caplog):
        with caplog.at_level(logging.WARNING):
            frame, status = run_eval(
                str(dataset / "raw"), str(tmp_path / "eval.csv"), reference_dir=str(dataset / "reference")
            )
        assert status == EXIT_OK
        assert "No reference for: img_03" in caplog.text
        rows = _rows(frame)
        assert rows.loc[["img_00", "img_01", "img_02"], "psnr"].notna().all()
        assert pd.isna(rows.loc["img_03", "psnr"])
    
    def test_identical_images(self, dataset, tmp_path):
        frame, status = run_eval(str(dataset / "raw"), str(tmp_path / "eval.csv"), reference_dir=str(dataset / "raw"))
        assert status == EXIT_OK
        rows = _rows(frame)
        assert (rows["psnr"] == 100.0).all()
        np.testing.assert_allclose(rows["ssim"].astype(float), 1.0, atol=1e-9)
        np.testing.assert_allclose(rows["angular_error_deg"].astype(float), 0.0, atol=1e-4)
    
    def test_transmission_pcc(self, dataset, tmp_path):
        cfg = _run_config("dcp", dataset, tmp_path / "est")
        run_estimate(cfg, ingest(cfg.input_dir))
        frame, _ = run_eval(
            str(dataset / "raw"),
            str(tmp_path / "eval.csv"),
            depth_dir=str(dataset / "depth"),
            transmission_dir=str(tmp_path / "est" / "transmission"),
        )
        pcc = _rows(frame)["pcc"].dropna().astype(float)
        assert len(pcc) > 0
        assert ((pcc >= -1.0) & (pcc <= 1.0)).all()
    
    def test_corrupt_file(self, dataset, tmp_path):
        (dataset / "raw" / "img_99.png").write_bytes(b"not an image")
        frame, status = run_eval(str(dataset / "raw"), str(tmp_path / "eval.csv"))
        assert status == EXIT_ITEM_FAILURES
        assert _rows(frame).loc["img_99", "error"]
    
    def test_missing_directory(self, tmp_path):
        with pytest.raises(ConfigurationError):
            run_eval(str(tmp_path / "nowhere"), str(tmp_path / "eval.csv"))


class TestTrain:
    def test_toy_smoke(self, tmp_path, rng):
        write_dataset(str(tmp_path / "labeled"), rng, labeled=4, unlabeled=0)
        write_dataset(str(tmp_path / "unlabeled"), rng, labeled=0, unlabeled=4, depth=False)
        cfg = TrainConfig.from_sources(
            overrides=dict(
                labeled_dir=str(tmp_path / "labeled"),
                unlabeled_dir=str(tmp_path / "unlabeled"),
                output_dir=str(tmp_path / "run"),
                input_size=32,
                toy=True,
                batch=2,
                warmup_iters=50,
                total_iters=200,
                sup_block=20,
                unsup_block=5,
                checkpoint_every=100,
                lr=1e-3,
            )
        )
        trainer, checkpoints = run_train(cfg, ingest(cfg.labeled_dir), ingest(cfg.unlabeled_dir))
        assert len(checkpoints) == 2
        log = pd.read_csv(tmp_path / "run" / "loss_log.csv")
        assert len(log) == 200
        assert np.isfinite(log["total"]).all()
        
        model, iteration, _ = load_checkpoint(checkpoints[-1])
        assert iteration == 200
        batch = trainer.labeled.degraded[:2]
        trainer.model.eval()
        with torch.no_grad():
            expected = trainer.model(batch)
            restored = model(batch)
        assert torch.equal(expected.t_hat, restored.t_hat)
        assert torch.equal(expected.a_hat, restored.a_hat)
    
    def test_unlabeled_entries_of_labeled_set_are_used(self, tmp_path, rng):
        write_dataset(str(tmp_path / "labeled"), rng, labeled=2, unlabeled=2)
        cfg = TrainConfig.from_sources(
            overrides=dict(
                labeled_dir=str(tmp_path / "labeled"),
                output_dir=str(tmp_path / "run"),
                input_size=32,
                toy=True,
                batch=2,
                warmup_iters=2,
                total_iters=8,
                sup_block=2,
                unsup_block=2,
                checkpoint_every=100,
            )
        )
        trainer, checkpoints = run_train(cfg, ingest(cfg.labeled_dir))
        assert trainer.unlabeled.degraded.shape == (2, 3, 32, 32)
        assert "unsup" in set(trainer.loss_frame()["phase"])
        assert len(checkpoints) == 1


class TestGolden:
    """Bench outputs against committed fixtures in tests/data/golden."""
    
    GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "data", "golden")
    TOLERANCE = {"angular_error_deg": 1e-3}
    
    @pytest.fixture(scope="class")
    def images(self):
        with open(os.path.join(self.GOLDEN_DIR, "images.json")) as f:
            return json.load(f)
    
    @staticmethod
    def _paint(regions, size):
        img = np.zeros((size, size, 3))
        for region in regions:
            (r0, r1), (c0, c1) = region["rows"], region["cols"]
            img[r0:r1, c0:c1] = np.asarray(region["rgb"], dtype=np.float64) / 255.0
        return img
    
    def _write_all(self, directory, images, size):
        for image_id, regions in images.items():
            write_image(str(directory / f"{image_id}.png"), self._paint(regions, size))
    
    def _assert_report_matches(self, csv_path, golden_name):
        actual = pd.read_csv(csv_path)
        golden = pd.read_csv(os.path.join(self.GOLDEN_DIR, golden_name))
        assert list(actual.columns) == list(golden.columns)
        assert actual["image_id"].tolist() == golden["image_id"].tolist()
        assert (actual["error"].fillna("") == "").all()
        for column in golden.columns[1:-1]:
            expected = golden[column]
            assert actual[column].isna().tolist() == expected.isna().tolist(), column
            present = expected.notna()
            np.testing.assert_allclose(
                actual.loc[present, column].astype(float),
                expected[present].astype(float),
                rtol=0,
                atol=self.TOLERANCE.get(column, 1e-4),
                err_msg=column,
            )
    
    def test_enhance(self, images, tmp_path):
        spec, size = images["enhance"], images["size"]
        self._write_all(tmp_path / "data" / "raw", spec["raw"], size)
        self._write_all(tmp_path / "data" / "reference", spec["reference"], size)
        cfg = _run_config(spec["method"], tmp_path / "data", tmp_path / "out")
        _, status = run_enhance(cfg, ingest(cfg.input_dir))
        assert status == EXIT_OK
        
        for image_id, regions in spec["enhanced"].items():
            enhanced = read_image(str(tmp_path / "out" / "enhanced" / f"{image_id}.png"))
            np.testing.assert_allclose(enhanced, self._paint(regions, size), rtol=0, atol=1 / 255 + 1e-12)
        self._assert_report_matches(tmp_path / "out" / "metrics.csv", "enhance_grayworld.csv")
    
    def test_eval(self, images, tmp_path):
        spec, size = images["eval"], images["size"]
        self._write_all(tmp_path / "enhanced", spec["enhanced"], size)
        self._write_all(tmp_path / "reference", spec["reference"], size)
        _, status = run_eval(
            str(tmp_path / "enhanced"), str(tmp_path / "eval.csv"), reference_dir=str(tmp_path / "reference")
        )
        assert status == EXIT_OK
        self._assert_report_matches(tmp_path / "eval.csv", "eval_flat.csv")


class TestConfigSources:
    def test_run_precedence(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("DCP_PATCH=9\nUDCP_PATCH=5\nRUN_WORKERS=3\nRETINEX_SCALES=10,20\n")
        cfg = RunConfig.from_sources("dcp", str(path), {"workers": 1})
        assert (cfg.patch, cfg.workers) == (9, 1)
        assert RunConfig.from_sources("udcp", str(path)).patch == 5
        assert RunConfig.from_sources("he", str(path)).patch == Config.DCP_PATCH
        assert RunConfig.from_sources("retinex", str(path)).retinex_scales == (10.0, 20.0)
    
    def test_train_precedence(self, tmp_path):
        path = tmp_path / "train.env"
        path.write_text("TRAIN_BATCH=4\nNET_TOY=true\nLOSS_LAMBDA3=2.5\n")
        cfg = TrainConfig.from_sources(str(path), {"batch": 8})
        assert (cfg.batch, cfg.toy, cfg.lambda3) == (8, True, 2.5)
        assert cfg.missing_inputs() == ["labeled_dir"]
    
    def test_log_directory_comes_from_config(self, tmp_path, monkeypatch):
        monkeypatch.setattr(Config, "LOG_DIR", str(tmp_path / "logs"))
        logger = setup_logger("uie_toolkit.tests.with_file")
        try:
            files = [h for h in logger.handlers if isinstance(h, logging.FileHandler)]
            assert len(files) == 1
            assert os.path.dirname(files[0].baseFilename) == str(tmp_path / "logs")
            logger.info("written to the run log")
            files[0].flush()
            [name] = os.listdir(tmp_path / "logs")
            assert "written to the run log" in (tmp_path / "logs" / name).read_text()
        finally:
            for handler in list(logger.handlers):
                handler.close()
                logger.removeHandler(handler)
    
    def test_empty_log_directory_disables_file(self, monkeypatch):
        monkeypatch.setattr(Config, "LOG_DIR", "")
        logger = setup_logger("uie_toolkit.tests.console_only")
        try:
            assert not any(isinstance(h, logging.FileHandler) for h in logger.handlers)
        finally:
            for handler in list(logger.handlers):
                logger.removeHandler(handler)
    
    def test_bad_values(self, tmp_path):
        path = tmp_path / "train.env"
        path.write_text("TRAIN_BATCH=many\n")
        with pytest.raises(ConfigurationError):
            TrainConfig.from_sources(str(path))
        with pytest.raises(ConfigurationError):
            TrainConfig.from_sources(overrides={"bogus": 1})
        with pytest.raises(ConfigurationError):
            RunConfig.from_sources("dcp", str(tmp_path / "missing.env"))


class TestCommandLine:
    def test_ingest_check(self, dataset, tmp_path):
        manifest = tmp_path / "manifest.json"
        assert main(["ingest-check", "--root", str(dataset), "--manifest", str(manifest)]) == EXIT_OK
        assert len(DatasetManifest.load(str(manifest)).entries) == 4
    
    def test_ingest_check_reports_bad_pairs(self, dataset):
        write_image(str(dataset / "reference" / "img_00.png"), _constant(0.5, 8))
        assert main(["ingest-check", "--root", str(dataset)]) == EXIT_ITEM_FAILURES
    
    def test_enhance(self, dataset, tmp_path):
        out = tmp_path / "out"
        argv = ["enhance", "--method", "dcp", "--input-dir", str(dataset), "--output-dir", str(out),
                "--patch", "7", "--gf-radius", "4", "--no-refine", "--workers", "1"]
        assert main(argv) == EXIT_OK
        assert len(pd.read_csv(out / "metrics.csv")) == 5
    
    def test_config_errors(self, dataset, tmp_path):
        out = str(tmp_path / "out")
        assert main(["enhance", "--method", "dcp", "--input-dir", str(dataset), "--output-dir", out,
                     "--patch", "4"]) == EXIT_CONFIG_ERROR
        assert main(["enhance", "--method", "pauienet", "--input-dir", str(dataset),
                     "--output-dir", out]) == EXIT_CONFIG_ERROR
        assert main(["enhance", "--method", "he", "--output-dir", out]) == EXIT_CONFIG_ERROR
        assert main(["train", "--output-dir", out]) == EXIT_CONFIG_ERROR
        assert main(["synth", "--clean-dir", str(dataset / "reference"), "--depth-dir", str(dataset / "depth"),
                     "--beta", "0.1,0.5,0.5", "--output-dir", out]) == EXIT_CONFIG_ERROR
    
    def test_synth_then_eval(self, dataset, tmp_path):
        out = tmp_path / "synth"
        assert main(["synth", "--clean-dir", str(dataset / "reference"), "--depth-dir", str(dataset / "depth"),
                     "--output-dir", str(out), "--jitter", "0.1"]) == EXIT_OK
        assert main(["eval", "--enhanced-dir", str(out / "raw"), "--reference-dir", str(out / "reference"),
                     "--output-csv", str(tmp_path / "eval.csv")]) == EXIT_OK
        frame = pd.read_csv(tmp_path / "eval.csv")
        assert list(frame["image_id"]) == ["img_00", "img_01", "img_02", MEAN_ROW_ID]
    
    def test_train(self, dataset, tmp_path):
        argv = ["train", "--labeled-dir", str(dataset), "--output-dir", str(tmp_path / "run"), "--toy",
                "--input-size", "32", "--batch", "2", "--warmup-iters", "3", "--total-iters", "6",
                "--sup-block", "1", "--unsup-block", "1", "--checkpoint-every", "10"]
        assert main(argv) == EXIT_OK
        assert os.path.isfile(tmp_path / "run" / "checkpoints" / "checkpoint_0000006.pt")
    
    def test_invalid_environment_setting(self, dataset, tmp_path, monkeypatch):
        monkeypatch.setattr(Config, "DCP_PATCH", 4)
        argv = ["enhance", "--method", "he", "--input-dir", str(dataset), "--output-dir", str(tmp_path / "out")]
        assert main(argv) == EXIT_CONFIG_ERROR
        assert not os.path.exists(tmp_path / "out")
    
    def test_internal_errors_are_not_config_errors(self, dataset, tmp_path, monkeypatch):
        def broken(args):
            raise ValueError("operands could not be broadcast together")
        
        monkeypatch.setattr("main.dispatch", broken)
        argv = ["enhance", "--method", "he", "--input-dir", str(dataset), "--output-dir", str(tmp_path / "out")]
        with pytest.raises(ValueError, match="broadcast"):
            main(argv)
