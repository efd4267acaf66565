import csv
import json

import numpy as np
import pytest

from tenips.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    MetricsRecord,
    PRESETS,
    preset_instance,
    run_experiment,
)


TINY_FIG2 = {
    "size": 8,
    "order": 3,
    "rank": 2,
    "core_scale": 10.0,
    "noise": 0.1,
    "ratios": [0.5, 1.0],
    "target_rank": 2,
}


class TestExperimentConfig:
    def test_unknown_preset_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig("nope")

    def test_empty_seeds_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig("fig2", seeds=[])

    def test_params_override_preset(self):
        cfg = ExperimentConfig("fig2", seeds=[0], params={"size": 5})
        merged = cfg.resolved()
        assert merged["size"] == 5
        assert merged["rank"] == PRESETS["fig2"]["rank"]


class TestRunFig2:
    def test_grid_shape_and_schema(self, tmp_path):
        cfg = ExperimentConfig("fig2", seeds=[0, 1], out_dir=tmp_path, params=TINY_FIG2)
        records = run_experiment(cfg)
        # 2 seeds x 2 ratios x 4 methods
        assert len(records) == 16
        assert all(r.status == "ok" for r in records)
        with open(tmp_path / "fig2_metrics.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 16
        assert list(rows[0]) == CSV_COLUMNS
        summary = json.loads((tmp_path / "fig2_summary.json").read_text())
        assert set(summary["cells"]) == {"ratio0.5", "ratio1"}
        cell = summary["cells"]["ratio1"]["tenips"]
        assert cell["n_ok"] == 2

    def test_full_observation_noiseless_exact(self, tmp_path):
        params = dict(TINY_FIG2, noise=0.0, ratios=[1.0])
        cfg = ExperimentConfig("fig2", seeds=[0], out_dir=None, params=params)
        records = run_experiment(cfg)
        for rec in records:
            assert rec.status == "ok"
            assert rec.completion_rel_error <= 1e-6

    def test_csv_bytes_deterministic(self, tmp_path):
        for sub in ("a", "b"):
            cfg = ExperimentConfig(
                "fig2", seeds=[0, 1], out_dir=tmp_path / sub, params=TINY_FIG2
            )
            run_experiment(cfg)
        a = (tmp_path / "a" / "fig2_metrics.csv").read_bytes()
        b = (tmp_path / "b" / "fig2_metrics.csv").read_bytes()
        assert a == b

    def test_cell_failures_tagged_not_fatal(self, tmp_path):
        # target_rank 5 exceeds two of the unfoldings at size 4, so some
        # methods fail per cell while others keep running.
        params = dict(TINY_FIG2, size=4, target_rank=5, ratios=[0.5])
        cfg = ExperimentConfig("fig2", seeds=[0], out_dir=tmp_path, params=params)
        records = run_experiment(cfg)
        statuses = {r.method: r.status for r in records}
        assert statuses["tenips"].startswith("error:")
        assert statuses["sq_unfold"] == "ok"
        with open(tmp_path / "fig2_metrics.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert any(row["status"].startswith("error:") for row in rows)
        assert any(row["status"] == "ok" for row in rows)


class TestRunFig1:
    def test_small_grid_records_and_reports(self, tmp_path):
        params = {"orders": [3], "pe_max_iter": 60}
        cfg = ExperimentConfig("fig1", seeds=[0], out_dir=tmp_path, params=params)
        records = run_experiment(cfg)
        # 1 order x 2 settings x 2 unfoldings
        assert len(records) == 4
        assert all(r.propensity_rel_error is not None for r in records)
        assert all(r.completion_rel_error is None for r in records)
        summary = json.loads((tmp_path / "fig1_summary.json").read_text())
        assert summary["solve_reports"]
        one = next(iter(summary["solve_reports"].values()))
        assert {"iterations", "objective_trace", "nuclear_residual"} <= set(one)


class TestRunTable2:
    def test_true_and_estimated_sources(self, tmp_path):
        params = {
            "size": 8,
            "order": 3,
            "rank": 2,
            "core_scale": 10.0,
            "param_core_scale": 8.0,
            "target_rank": 2,
            "methods": ["tenips", "rect_unfold"],
            "pe_max_iter": 200,
        }
        cfg = ExperimentConfig("table2", seeds=[0], out_dir=tmp_path, params=params)
        records = run_experiment(cfg)
        cells = {(r.cell, r.method) for r in records}
        assert ("prop-true", "tenips") in cells
        assert ("prop-convex", "tenips") in cells
        true_recs = [r for r in records if r.cell == "prop-true"]
        est_recs = [r for r in records if r.cell == "prop-convex"]
        assert all(r.propensity_rel_error is None for r in true_recs)
        assert all(r.propensity_rel_error is not None for r in est_recs)


class TestRunAppd:
    def test_sweep_cells(self):
        params = {
            "size": 6,
            "order": 3,
            "rank": 2,
            "param_core_scale": 8.0,
            "tau_ratios": [1.0, 2.0],
            "gamma_ratios": [1.0],
            "steps": [1e-3],
            "nc_max_iter": 30,
            "pe_max_iter": 100,
        }
        cfg = ExperimentConfig("appd", seeds=[0], params=params)
        records = run_experiment(cfg)
        cells = {r.cell for r in records}
        assert cells == {"tau1", "tau2", "gamma1", "step0.001"}


class TestRunVideo:
    def test_sources_and_methods(self):
        params = {
            "shape": [12, 8, 10],
            "target_ranks": [3, 3, 3],
            "methods": ["tenips", "rect_unfold"],
            "propensities": ["true", "mcar"],
        }
        cfg = ExperimentConfig("video", seeds=[0], params=params)
        records = run_experiment(cfg)
        assert {r.cell for r in records} == {"prop-true", "prop-mcar"}
        for rec in records:
            assert rec.status == "ok"
            assert rec.completion_rel_error is not None


class TestPresetInstance:
    def test_table2_instance_arrays(self):
        arrays = preset_instance("table2", {"size": 6, "rank": 2}, seed=0)
        assert set(arrays) == {"data", "observed", "param", "propensity", "mask"}
        assert arrays["data"].shape == (6, 6, 6, 6)
        np.testing.assert_array_equal(
            arrays["observed"], arrays["data"] * arrays["mask"]
        )

    def test_fig1_instance_has_no_data_tensor(self):
        arrays = preset_instance("fig1", {"orders": [3]}, seed=1)
        assert "data" not in arrays
        assert set(arrays) >= {"param", "propensity", "mask"}

    def test_deterministic(self):
        a = preset_instance("video", {"shape": [10, 8, 8]}, seed=2)
        b = preset_instance("video", {"shape": [10, 8, 8]}, seed=2)
        for key in a:
            assert np.array_equal(a[key], b[key])


class TestMetricsRecord:
    def test_csv_row_formatting(self):
        rec = MetricsRecord("x", "cell", "tenips", 3, None, 0.25, 1.5, params={"a": 1})
        row = rec.csv_row()
        assert row["propensity_rel_error"] == ""
        assert row["completion_rel_error"] == "0.25"
        assert row["params"] == '{"a": 1}'
        assert "seconds" not in row
