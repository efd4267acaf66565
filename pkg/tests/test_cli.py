import csv
import json

import numpy as np
import pytest

from tenips.cli import main
from tenips.io import read_mask, read_tensor


@pytest.fixture()
def quiet_warnings(recwarn):
    # Degenerate-cell warnings from tiny smoke instances are expected here.
    return recwarn


def _gen(tmp_path, seed=0):
    out = tmp_path / "inst"
    assert (
        main(
            [
                "gen",
                "--preset",
                "table2",
                "--scale",
                "8",
                "--seed",
                str(seed),
                "--config",
                str(_cfg(tmp_path)),
                "--out-dir",
                str(out),
            ]
        )
        == 0
    )
    return out


def _cfg(tmp_path):
    path = tmp_path / "gen.cfg"
    path.write_text(
        "# instance overrides for smoke tests\n"
        "rank = 2\n"
        "param_core_scale = 8.0\n"
    )
    return path


class TestGen:
    def test_writes_instance_files(self, tmp_path):
        out = _gen(tmp_path)
        for name in ("data.tnsr", "observed.tnsr", "param.tnsr", "propensity.tnsr"):
            assert (out / name).exists()
        mask = read_mask(out / "mask.mask")
        data = read_tensor(out / "data.tnsr")
        observed = read_tensor(out / "observed.tnsr")
        assert mask.shape == data.shape == (8, 8, 8, 8)
        np.testing.assert_array_equal(observed, data * mask)

    def test_config_flag_applied(self, tmp_path):
        out = _gen(tmp_path)
        param = read_tensor(out / "param.tnsr")
        # The emitted instance must be the one generated under the config
        # file's overrides (rank 2), not the preset defaults.
        from tenips.experiments import preset_instance

        expected = preset_instance(
            "table2", {"size": 8, "rank": 2, "param_core_scale": 8.0}, seed=0
        )
        np.testing.assert_array_equal(param, expected["param"])


class TestEstimate:
    def test_convex_round_trip(self, tmp_path):
        out = _gen(tmp_path)
        assert (
            main(
                [
                    "estimate",
                    "--mask",
                    str(out / "mask.mask"),
                    "--method",
                    "convex",
                    "--tau",
                    "2.0",
                    "--gamma",
                    "4.0",
                    "--out-dir",
                    str(out),
                ]
            )
            == 0
        )
        est = read_tensor(out / "propensity_estimate.tnsr")
        assert est.shape == (8, 8, 8, 8)
        assert np.all(est > 0.0) and np.all(est < 1.0)
        report = json.loads((out / "estimate_report.json").read_text())
        assert report["method"] == "convex_pe"
        assert report["nuclear_residual"] <= 1e-6

    def test_nonconvex_round_trip(self, tmp_path):
        out = _gen(tmp_path)
        assert (
            main(
                [
                    "estimate",
                    "--mask",
                    str(out / "mask.mask"),
                    "--method",
                    "nonconvex",
                    "--step",
                    "1e-3",
                    "--ranks",
                    "2,2,2,2",
                    "--out-dir",
                    str(out / "nc"),
                ]
            )
            == 0
        )
        report = json.loads((out / "nc" / "estimate_report.json").read_text())
        assert report["method"] == "nonconvex_pe"

    def test_convex_requires_thresholds(self, tmp_path):
        out = _gen(tmp_path)
        with pytest.raises(SystemExit):
            main(["estimate", "--mask", str(out / "mask.mask"), "--method", "convex"])


class TestComplete:
    def test_tenips_with_truth_metric(self, tmp_path):
        out = _gen(tmp_path)
        assert (
            main(
                [
                    "complete",
                    "--observed",
                    str(out / "observed.tnsr"),
                    "--mask",
                    str(out / "mask.mask"),
                    "--propensity",
                    str(out / "propensity.tnsr"),
                    "--method",
                    "tenips",
                    "--ranks",
                    "2",
                    "--truth",
                    str(out / "data.tnsr"),
                    "--out-dir",
                    str(out),
                ]
            )
            == 0
        )
        metrics = json.loads((out / "complete_metrics.json").read_text())
        assert metrics["method"] == "tenips"
        assert metrics["ranks"] == [2, 2, 2, 2]
        assert 0.0 <= metrics["rel_error"] < 1.0
        est = read_tensor(out / "estimate.tnsr")
        assert est.shape == (8, 8, 8, 8)


class TestExperiment:
    def test_preset_with_config_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "\n".join(
                [
                    "size = 8",
                    "order = 3",
                    "rank = 2",
                    "target_rank = 2",
                    'ratios = [1.0]',
                    "noise = 0.0",
                ]
            )
        )
        out = tmp_path / "results"
        assert (
            main(
                [
                    "experiment",
                    "--preset",
                    "fig2",
                    "--config",
                    str(cfg),
                    "--seeds",
                    "0,1",
                    "--out-dir",
                    str(out),
                ]
            )
            == 0
        )
        with open(out / "fig2_metrics.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert {row["cell"] for row in rows} == {"ratio1"}
        assert {row["seed"] for row in rows} == {"0", "1"}
        for row in rows:
            assert float(row["completion_rel_error"]) <= 1e-6

    def test_method_flag_restricts_grid(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("size = 8\norder = 3\nrank = 2\ntarget_rank = 2\nratios = [0.5]\n")
        out = tmp_path / "only"
        main(
            [
                "experiment",
                "--preset",
                "fig2",
                "--config",
                str(cfg),
                "--seeds",
                "0",
                "--method",
                "tenips",
                "--out-dir",
                str(out),
            ]
        )
        with open(out / "fig2_metrics.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert {row["method"] for row in rows} == {"tenips"}


class TestBound:
    def test_diagnostics_file(self, tmp_path):
        out = _gen(tmp_path)
        assert (
            main(
                [
                    "bound",
                    "--data",
                    str(out / "data.tnsr"),
                    "--param",
                    str(out / "param.tnsr"),
                    "--ranks",
                    "2",
                    "--epsilon",
                    "0.8",
                    "--out-dir",
                    str(out),
                ]
            )
            == 0
        )
        diag = json.loads((out / "bound_diagnostics.json").read_text())
        assert diag["l_gamma"] == pytest.approx(1.0)
        assert diag["propensity_mse_bound"] > 0.0
        assert diag["completion_rel_error_bound"] >= 0.0
        assert len(diag["condition_numbers"]) == 4
