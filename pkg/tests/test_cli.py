import datetime as dt
import json
import os

import numpy as np
import pytest

from ltvkit.cli import main
from ltvkit.metrics import MetricsReport


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def sim_config(workdir):
    path = workdir / "sim.json"
    path.write_text(
        json.dumps(
            {
                "n_users": 300,
                "start_cohort": "2021-01-04",
                "end_cohort": "2021-02-21",
                "horizon_days": 238,
                "base_rate": 0.1,
                "quality_sigma": 0.7,
                "cohort_drift": 0.002,
                "age_decay_tau": 60.0,
                "age_floor": 0.3,
                "weekly_multipliers": [0.85, 0.9, 0.95, 1.0, 1.05, 1.3, 1.25],
                "event_days": {"2021-03-12": 1.8},
                "outage_days": {"2021-02-06": 0.0},
                "amount_shape": 2.0,
                "amount_scale": 6.0,
                "n_regions": 3,
                "region_multipliers": [0.7, 1.0, 1.4],
                "seed": 17,
            }
        )
    )
    return path


@pytest.fixture(scope="module")
def panel(workdir, sim_config):
    out = workdir / "panel.csv"
    assert main(["simulate", "--config", str(sim_config), "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def prepared(workdir, panel):
    out = workdir / "prep"
    code = main(
        [
            "prepare",
            "--in", str(panel),
            "--mode", "rolling",
            "--out", str(out),
            "--horizons", "1,4,8",
            "--eval-date", "2021-05-24",
            "--seed", "3",
        ]
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def model(workdir, prepared):
    out = workdir / "model.txt"
    code = main(
        [
            "train",
            "--data", str(prepared),
            "--out", str(out),
            "--epochs", "3",
            "--width", "6",
            "--batch-size", "64",
            "--seed", "5",
        ]
    )
    assert code == 0
    return out


class TestSimulate:
    def test_writes_panel_and_sidecar(self, panel):
        assert panel.exists()
        sidecar = panel.parent / (panel.name + ".config.json")
        assert sidecar.exists()
        cfg = json.loads(sidecar.read_text())
        assert cfg["n_users"] == 300

    def test_missing_config_fails_cleanly(self, workdir, capsys):
        code = main(
            ["simulate", "--config", str(workdir / "nope.json"), "--out", str(workdir / "x.csv")]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error:") and err.count("\n") == 1
        assert not (workdir / "x.csv").exists()


class TestPrepare:
    def test_outputs(self, prepared):
        for name in ("meta.json", "normstats.json", "train.csv", "val.csv", "test.csv"):
            assert (prepared / name).exists()
        meta = json.loads((prepared / "meta.json").read_text())
        assert meta["mode"] == "rolling"
        assert meta["horizons_weeks"] == [1, 4, 8]
        assert meta["fingerprint"].startswith("sha256:")

    def test_acquisition_mode(self, workdir, panel):
        out = workdir / "prep_acq"
        code = main(
            [
                "prepare",
                "--in", str(panel),
                "--mode", "acquisition",
                "--out", str(out),
                "--graduation-age", "60",
                "--eval-age", "7",
                "--seed", "3",
            ]
        )
        assert code == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["K"] == 1 and meta["graduation_age"] == 60


class TestTrainEvaluate:
    def test_model_file_written(self, model):
        head = model.read_text().splitlines()[0]
        assert head == "ltvkit-network v1"

    def test_evaluate_records_floor(self, workdir, prepared, model):
        report_path = workdir / "rep_drnn.json"
        code = main(
            [
                "evaluate",
                "--model", str(model),
                "--data", str(prepared),
                "--floor", "1.0",
                "--report", str(report_path),
            ]
        )
        assert code == 0
        report = MetricsReport.load(report_path)
        assert report.floor == 1.0
        assert "drnn" in report.models
        for label in report.horizon_labels:
            assert 0.0 <= report.models["drnn"][label]["asmape"] <= 2.0

    def test_spec_mismatch_fails(self, workdir, prepared, capsys):
        bad = workdir / "bad_spec.json"
        bad.write_text(
            json.dumps(
                {
                    "feature_dim": 3,
                    "adaptor_dim": 2,
                    "blocks": [
                        {"shortcut": False,
                         "layers": [{"kind": "drnn", "dilation": 1, "n_y": 4, "n_h": 4}]}
                    ],
                    "embeddings": [],
                }
            )
        )
        code = main(
            [
                "train",
                "--data", str(prepared),
                "--spec", str(bad),
                "--out", str(workdir / "nope_model.txt"),
                "--epochs", "1",
            ]
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")


class TestBaselinesCli:
    def test_ridge_and_btyd_reports(self, workdir, prepared, panel):
        for kind in ("ridge", "btyd"):
            report_path = workdir / f"rep_{kind}.json"
            code = main(
                [
                    "baseline",
                    "--kind", kind,
                    "--data", str(prepared),
                    "--panel", str(panel),
                    "--report", str(report_path),
                ]
            )
            assert code == 0
            assert report_path.exists()

    def test_compare_merges_and_ranks(self, workdir, prepared):
        out = workdir / "combined.json"
        code = main(
            [
                "compare",
                "--reports",
                str(workdir / "rep_drnn.json"),
                str(workdir / "rep_ridge.json"),
                str(workdir / "rep_btyd.json"),
                "--out", str(out),
            ]
        )
        assert code == 0
        combined = MetricsReport.load(out)
        assert set(combined.models) == {"drnn", "ridge-lag", "btyd"}
        for label, best in combined.best.items():
            metrics = {m: combined.models[m][label]["asmape"] for m in combined.models}
            assert metrics[best] == min(metrics.values())


class TestDeterminism:
    def test_rerun_is_byte_identical(self, workdir, sim_config):
        """simulate -> prepare -> train -> evaluate twice; reports match."""

        def run(tag):
            panel = workdir / f"det_panel_{tag}.csv"
            prep = workdir / f"det_prep_{tag}"
            model = workdir / f"det_model_{tag}.txt"
            report = workdir / f"det_report_{tag}.json"
            assert main(["simulate", "--config", str(sim_config), "--out", str(panel)]) == 0
            assert main([
                "prepare", "--in", str(panel), "--mode", "rolling",
                "--out", str(prep), "--horizons", "1,4",
                "--eval-date", "2021-05-24", "--seed", "3",
            ]) == 0
            assert main([
                "train", "--data", str(prep), "--out", str(model),
                "--epochs", "2", "--width", "4", "--seed", "5",
            ]) == 0
            assert main([
                "evaluate", "--model", str(model), "--data", str(prep),
                "--floor", "1.0", "--report", str(report),
            ]) == 0
            return report.read_bytes(), model.read_bytes()

        r1, m1 = run("a")
        r2, m2 = run("b")
        assert m1 == m2
        assert r1 == r2


class TestErrors:
    def test_unknown_flag_exits_nonzero_with_usage(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--bogus", "x"])
        assert exc.value.code != 0
        assert "usage" in capsys.readouterr().err

    def test_gradcheck_passes(self, capsys):
        assert main(["gradcheck", "--seed", "20260810"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out
