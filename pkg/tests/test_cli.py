import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from glyphforge.cli import main
from glyphforge.mockocr import simulate_split
from glyphforge.pagegen import render_pages, save_clean_dir


@pytest.fixture(scope="module")
def clean_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("clean")
    pages = render_pages(3, seed=21, width=560, height=300, font_size=20)
    save_clean_dir(pages, root)
    return root


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory, clean_dir):
    out = tmp_path_factory.mktemp("outputs") / "corpus"
    runner = CliRunner()
    res = runner.invoke(main, [
        "synth", "--input", str(clean_dir), "--out", str(out),
        "--kind", "shift", "--range", "2", "5", "--prob", "0.12", "--seed", "7",
    ])
    assert res.exit_code == 0, res.output
    simulate_split(out / "train")
    return out


@pytest.fixture(scope="module")
def features_dir(tmp_path_factory, corpus_dir):
    out = tmp_path_factory.mktemp("outputs") / "features"
    runner = CliRunner()
    res = runner.invoke(main, [
        "extract", "--corpus", str(corpus_dir), "--split", "train",
        "--n", "3", "--n", "5", "--out", str(out),
    ])
    assert res.exit_code == 0, res.output
    return out


class TestSynth:
    def test_manifest_and_config_written(self, corpus_dir):
        manifest = json.loads((corpus_dir / "manifest.json").read_text())
        assert manifest["spec"]["kind"] == "shift"
        assert manifest["spec"]["magnitude_range"] == [2, 5]
        assert manifest["spec"]["probability"] == 0.12
        assert manifest["spec"]["seed"] == 7
        cfg = json.loads((corpus_dir / "run_config.json").read_text())
        assert cfg["command"] == "synth"
        assert cfg["params"]["prob"] == 0.12

    def test_rerun_identical(self, clean_dir, corpus_dir, tmp_path):
        out2 = tmp_path / "corpus2"
        res = CliRunner().invoke(main, [
            "synth", "--input", str(clean_dir), "--out", str(out2),
            "--kind", "shift", "--range", "2", "5", "--prob", "0.12", "--seed", "7",
        ])
        assert res.exit_code == 0, res.output
        assert (out2 / "manifest.json").read_bytes() == (corpus_dir / "manifest.json").read_bytes()
        assert (out2 / "train" / "truth.json").read_bytes() == (corpus_dir / "train" / "truth.json").read_bytes()
        assert (out2 / "train" / "page0000.png").read_bytes() == (corpus_dir / "train" / "page0000.png").read_bytes()

    def test_invalid_probability_rejected(self, clean_dir, tmp_path):
        res = CliRunner().invoke(main, [
            "synth", "--input", str(clean_dir), "--out", str(tmp_path / "x"),
            "--prob", "1.5",
        ])
        assert res.exit_code != 0
        assert "probability" in res.output

    def test_spec_alias_flag(self, clean_dir, tmp_path):
        res = CliRunner().invoke(main, [
            "synth", "--input", str(clean_dir), "--out", str(tmp_path / "y"),
            "--spec", "scale", "--range", "0.15", "0.25", "--prob", "0.1", "--seed", "3",
        ])
        assert res.exit_code == 0, res.output
        manifest = json.loads((tmp_path / "y" / "manifest.json").read_text())
        assert manifest["spec"]["kind"] == "scale"


class TestExtract:
    def test_fanout_and_vector_lengths(self, features_dir):
        for n, length in ((3, 84), (5, 132)):
            m = np.load(features_dir / f"features_n{n}.npz")
            assert m["X"].shape[1] == length
            assert (features_dir / f"features_n{n}.csv").exists()

    def test_labels_present_and_plausible(self, features_dir):
        m = np.load(features_dir / "features_n3.npz")
        rate = m["y"].mean()
        assert 0.01 < rate < 0.5  # p=0.12 with OCR slack

    def test_zero_manipulation_corpus_all_zero(self, clean_dir, tmp_path):
        runner = CliRunner()
        corpus = tmp_path / "c0"
        res = runner.invoke(main, ["synth", "--input", str(clean_dir), "--out", str(corpus),
                                   "--prob", "0.0001", "--seed", "1", "--range", "1", "1"])
        assert res.exit_code == 0, res.output
        # force an empty truth file deterministically
        (corpus / "train" / "truth.json").write_text("[]\n")
        simulate_split(corpus / "train")
        out = tmp_path / "f0"
        res = runner.invoke(main, ["extract", "--corpus", str(corpus), "--out", str(out)])
        assert res.exit_code == 0, res.output
        m = np.load(out / "features_n3.npz")
        assert m["y"].sum() == 0


@pytest.fixture(scope="module")
def model_path(features_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "model.gfm"
    res = CliRunner().invoke(main, [
        "--jobs", "2", "train", "--features", str(features_dir / "features_n3.npz"),
        "--trees", "30", "--max-depth", "12", "--min-leaf", "4", "--seed", "5",
        "--out", str(out),
    ])
    assert res.exit_code == 0, res.output
    return out


class TestTrainEvaluateReport:
    def test_evaluate_model_on_matrix(self, model_path, features_dir):
        res = CliRunner().invoke(main, [
            "evaluate", "--model", str(model_path),
            "--features", str(features_dir / "features_n3.npz"),
        ])
        assert res.exit_code == 0, res.output
        assert "Precision" in res.output and "F1 Score" in res.output

    def test_evaluate_schema_mismatch_names_both(self, model_path, features_dir):
        res = CliRunner().invoke(main, [
            "evaluate", "--model", str(model_path),
            "--features", str(features_dir / "features_n5.npz"),
        ])
        assert res.exit_code != 0
        assert "84" in res.output and "132" in res.output

    def test_evaluate_perfect_predictions(self, tmp_path):
        pred = tmp_path / "pred.csv"
        pred.write_text("y_true,y_pred\n" + "\n".join(f"{v},{v}" for v in (1, 0, 1, 0)) + "\n")
        res = CliRunner().invoke(main, ["evaluate", "--predictions", str(pred)])
        assert res.exit_code == 0, res.output
        assert res.output.count("1.0000") == 4

    def test_report_marks_boxes(self, model_path, corpus_dir, tmp_path):
        out = tmp_path / "overlay.png"
        res = CliRunner().invoke(main, [
            "report", "--model", str(model_path),
            "--image", str(corpus_dir / "train" / "page0000.png"),
            "--tsv", str(corpus_dir / "train" / "page0000.tsv"),
            "--truth", str(corpus_dir / "train" / "truth.json"),
            "--page-index", "0", "--out", str(out),
        ])
        assert res.exit_code == 0, res.output
        assert out.exists()
        img = np.asarray(Image.open(out))
        page = np.asarray(Image.open(corpus_dir / "train" / "page0000.png"))
        assert img.shape[0] == page.shape[0] + 36  # legend strip appended

    def test_report_missing_model_nonzero_exit(self, corpus_dir, tmp_path):
        res = CliRunner().invoke(main, [
            "report", "--model", str(tmp_path / "nope.gfm"),
            "--image", str(corpus_dir / "train" / "page0000.png"),
            "--tsv", str(corpus_dir / "train" / "page0000.tsv"),
            "--out", str(tmp_path / "o.png"),
        ])
        assert res.exit_code != 0


class TestSearchCmd:
    def test_reduced_search_outputs(self, features_dir, tmp_path):
        grids = tmp_path / "grids.json"
        grids.write_text(json.dumps({
            "n_trees": [10], "max_depth": [8], "min_samples_leaf": [4], "n_neighbors": [3, 5],
        }))
        out = tmp_path / "search"
        res = CliRunner().invoke(main, [
            "--jobs", "2", "search",
            "--features", str(features_dir / "features_n3.npz"),
            "--features", str(features_dir / "features_n5.npz"),
            "--iterations", "4", "--folds", "3", "--seed", "2",
            "--grids", str(grids), "--out", str(out),
        ])
        assert res.exit_code == 0, res.output
        lines = (out / "candidates.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 4 * 3 + 4 * 2  # header + fold rows + mean/std rows
        best = json.loads((out / "best.json").read_text())
        assert best["hyperparams"]["n_trees"] == 10
        assert (out / "best_model.gfm").exists()
        assert (out / "run_config.json").exists()


class TestBaselineCmd:
    def test_exhaustive_run(self, features_dir, tmp_path):
        out = tmp_path / "baseline"
        res = CliRunner().invoke(main, [
            "baseline", "--features", str(features_dir / "features_n3.npz"),
            "--folds", "3", "--seed", "4", "--out", str(out),
        ])
        assert res.exit_code == 0, res.output
        best = json.loads((out / "baseline_best.json").read_text())
        assert set(best["params"]) >= {"upper_pct", "lower_pct", "mahalanobis_threshold", "log_hu"}
        lines = (out / "baseline_candidates.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 54 * (3 + 2)


class TestConfigFile:
    def test_config_supplies_defaults(self, clean_dir, tmp_path):
        cfg = tmp_path / "conf.json"
        cfg.write_text(json.dumps({"synth": {"prob": 0.2, "seed": 9}}))
        out = tmp_path / "cfg_corpus"
        res = CliRunner().invoke(main, [
            "--config", str(cfg), "synth", "--input", str(clean_dir), "--out", str(out),
        ])
        assert res.exit_code == 0, res.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["spec"]["probability"] == 0.2
        assert manifest["spec"]["seed"] == 9
