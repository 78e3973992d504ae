import json

import numpy as np
import pytest

from wearrhythm import artifacts
from wearrhythm.cli import main
from wearrhythm.config import RunConfig, apply_overrides, config_from_dict, load_config
from wearrhythm.errors import ConfigInvalid
from wearrhythm.pipeline import featurize_day
from wearrhythm.preprocess import DaySeries, window_starts

SMALL = {
    "synth": {"n_healthy": 6, "n_infected": 5, "n_days": 2,
              "disruption": {"amp_damp_fraction": 0.5, "extra_daytime_rest_fraction": 0.5}},
    "network": {"gru_hidden": 4, "heads": 1, "rhythm_fc": 4, "joint_fc": 4},
    "train": {"max_epochs": 2},
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.json"
    cfg.write_text(json.dumps(SMALL))
    assert main(["synth", "--config", str(cfg), "--seed", "7", "--out", str(root / "raw")]) == 0
    assert main(["preprocess", "--config", str(cfg), "--input", str(root / "raw"),
                 "--out", str(root / "days")]) == 0
    assert main(["featurize", "--config", str(cfg), "--input", str(root / "days"),
                 "--out", str(root / "feats")]) == 0
    return root, cfg


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigInvalid):
            config_from_dict({"network": {"hiden": 3}})
        with pytest.raises(ConfigInvalid):
            config_from_dict({"bogus": 1})

    def test_overrides(self):
        cfg = apply_overrides(RunConfig(), ["network.heads=4", "eval.features=mi", "seed=9"])
        assert (cfg.network.heads, cfg.eval.features, cfg.seed) == (4, "mi", 9)
        with pytest.raises(ConfigInvalid):
            apply_overrides(RunConfig(), ["network.nope=1"])

    def test_invalid_value_surfaces(self):
        with pytest.raises((ConfigInvalid, ValueError)):
            apply_overrides(RunConfig(), ["network.heads=3"])

    def test_round_trip(self, tmp_path):
        cfg = apply_overrides(RunConfig(), ["features.periods=[24, 48]", "train.lr=0.01"])
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert load_config(path) == cfg

    def test_provenance(self):
        prov = RunConfig(seed=3).provenance()
        assert prov["tool"] == "wearrhythm" and prov["seed"] == 3
        assert prov["config"]["seed"] == 3


class TestArtifacts:
    def test_day_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        day = DaySeries("A1", "2020-01-02", 60 + rng.random(1440), rng.poisson(2, 1440) * 1.0,
                        rng.random(1440) > 0.1, 1, {"interpolated_minutes": 3})
        back = artifacts.read_day(artifacts.write_day(tmp_path, day, {"tool": "t"}))
        np.testing.assert_array_equal(back.rhr, day.rhr)
        np.testing.assert_array_equal(back.steps, day.steps)
        np.testing.assert_array_equal(back.observed, day.observed)
        assert (back.subject_id, back.day, back.label, back.meta) == ("A1", "2020-01-02", 1,
                                                                       day.meta)

    def test_sample_round_trip(self, tmp_path, small_cohort):
        from wearrhythm.pipeline import FeatureConfig, labeled_day_series
        streams, _ = small_cohort
        day = labeled_day_series(streams, 0)[0]
        fcfg = FeatureConfig(periods=(24, 48))
        sample = featurize_day(day, fcfg)
        f, r = artifacts.write_sample(tmp_path, sample, window_starts(1440, fcfg.window), {})
        back = artifacts.read_sample(f, r)
        np.testing.assert_array_equal(back.sensor, sample.sensor)
        assert sorted(back.rhythm) == [24, 48]
        for p in (24, 48):
            np.testing.assert_array_equal(back.rhythm[p], sample.rhythm[p])
        assert back.flags == sample.flags
        header = f.read_text().splitlines()[0]
        assert header.startswith("# {")

    def test_read_missing(self, tmp_path):
        from wearrhythm.errors import InputMissing
        with pytest.raises(InputMissing):
            artifacts.read_csv(tmp_path / "nope.csv")


class TestCommands:
    def test_synth_byte_identical(self, tmp_path, workspace):
        root, cfg = workspace
        assert main(["synth", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path)]) == 0
        for name in ("heart_rate.csv", "steps.csv", "labels.csv", "ground_truth.json"):
            assert (tmp_path / name).read_bytes() == (root / "raw" / name).read_bytes()

    def test_synth_seed_changes_output(self, tmp_path, workspace):
        root, cfg = workspace
        main(["synth", "--config", str(cfg), "--seed", "8", "--out", str(tmp_path)])
        assert (tmp_path / "heart_rate.csv").read_bytes() != (root / "raw" / "heart_rate.csv").read_bytes()

    def test_ingest(self, capsys, tmp_path, workspace):
        root, cfg = workspace
        code, out, _ = _run(capsys, "ingest", "--config", str(cfg), "--input", str(root / "raw"),
                            "--out", str(tmp_path))
        assert code == 0
        assert json.loads(out) == {"subjects": 11, "labeled_days": 11, "errors": 0}
        meta, cols, rows = artifacts.read_csv(tmp_path / "labeled_days.csv")
        assert cols == ["subject_id", "day", "label"] and len(rows) == 11
        assert "provenance" in meta

    def test_preprocess_and_featurize_outputs(self, workspace):
        root, _ = workspace
        assert len(artifacts.day_files(root / "days")) == 11
        assert len(artifacts.sample_files(root / "feats")) == 11

    def test_select(self, capsys, tmp_path, workspace):
        root, cfg = workspace
        code, out, _ = _run(capsys, "select", "--config", str(cfg), "--input", str(root / "feats"),
                            "--out", str(tmp_path))
        assert code == 0
        picked = json.loads(out)
        assert len(picked["sensor"]) == len(picked["rhythm"]) == 10
        _, cols, rows = artifacts.read_csv(tmp_path / "ranking.csv")
        assert cols == ["kind", "feature", "mi", "rank"]
        assert len(rows) == 39 + 351

    def test_evaluate_five_folds(self, capsys, tmp_path, workspace):
        root, cfg = workspace
        code, out, _ = _run(capsys, "evaluate", "--config", str(cfg), "--seed", "7",
                            "--input", str(root / "feats"), "--out", str(tmp_path))
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert len(summary["folds"]) == 5
        assert summary["n_samples"] == 11
        assert set(summary["aggregate"]) >= {"sensitivity", "auc_roc", "f_beta"}
        assert summary["provenance"]["seed"] == 7
        assert len(list(tmp_path.glob("train_log_fold*.csv"))) == 5
        assert out.splitlines()[-2].startswith("mean")

    def test_evaluate_raw_equals_features(self, tmp_path, workspace):
        root, cfg = workspace
        for name, src in (("a", "raw"), ("b", "feats")):
            assert main(["evaluate", "--config", str(cfg), "--input", str(root / src),
                         "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a" / "summary.json").read_bytes() == \
            (tmp_path / "b" / "summary.json").read_bytes()

    def test_sweep_heads(self, tmp_path, workspace):
        root, cfg = workspace
        assert main(["sweep", "--config", str(cfg), "--axis", "heads", "--values", "0,2",
                     "--input", str(root / "feats"), "--out", str(tmp_path)]) == 0
        _, cols, rows = artifacts.read_csv(tmp_path / "report_heads.csv")
        assert [r[cols.index("value")] for r in rows] == ["0", "2"]

    def test_train_and_predict_resting_day(self, capsys, tmp_path, workspace):
        root, cfg = workspace
        assert main(["train", "--config", str(cfg), "--input", str(root / "feats"),
                     "--out", str(tmp_path)]) == 0
        day = DaySeries("R1", "2020-05-05", np.full(1440, 58.0), np.zeros(1440),
                        np.ones(1440, dtype=bool), None, {})
        path = artifacts.write_day(tmp_path, day, {})
        capsys.readouterr()
        code, out, _ = _run(capsys, "predict", "--model", str(tmp_path / "model.npz"),
                            "--input", str(path))
        assert code == 0
        res = json.loads(out)
        assert 0 < res["probability"] < 1
        assert res["label"] in ("healthy", "infected") and res["subject_id"] == "R1"

    def test_errors_are_json_with_nonzero_exit(self, capsys, tmp_path):
        code, _, err = _run(capsys, "evaluate", "--input", str(tmp_path / "missing"))
        assert code == 2 and json.loads(err)["error"]
        code, _, err = _run(capsys, "evaluate", "--set", "network.bogus=1", "--input", str(tmp_path))
        assert code == 2 and json.loads(err)
        code, _, err = _run(capsys, "evaluate", "--period", "12")
        assert code == 2 and json.loads(err)
