"""Experiment harness: preset grids, metrics records, CSV/JSON emission.

Each preset reproduces one of the synthetic studies at desk scale.  Grid
cells are independent; randomness is keyed on (cell, seed) through a fixed
arithmetic seed derivation, never on execution order, so reruns with the
same configuration emit byte-identical CSV files.  Wall-clock timings vary
run to run and therefore live only in the JSON summary.
"""
from __future__ import annotations

import csv
import io as _stdlib_io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import nuclear_threshold, relative_error
from .completion import (
    ObservedInstance,
    hosvd_w_complete,
    rect_unfold_complete,
    sq_unfold_complete,
    tenips,
)
from .links import LOGISTIC
from .propensity import (
    ConvexPEConfig,
    DivergenceError,
    NonconvexPEConfig,
    convex_pe,
    convex_pe_on_spec,
    nonconvex_pe,
)
from .synthesis import (
    GeneratorConfig,
    add_relative_noise,
    model_a_propensity,
    model_b_propensity,
    random_tucker,
    sample_mask,
    video_like_instance,
)
from .tensor import UnfoldingSpec, max_abs, square_set

__all__ = [
    "ExperimentConfig",
    "MetricsRecord",
    "PRESETS",
    "complete_with_method",
    "preset_instance",
    "run_experiment",
]

CSV_COLUMNS = [
    "experiment",
    "cell",
    "method",
    "seed",
    "propensity_rel_error",
    "completion_rel_error",
    "status",
    "params",
]

# Desk-scale defaults per preset.  ``param_core_scale`` values keep the
# propensity histogram comparable across sizes: the entrywise standard
# deviation of a Gaussian-core Tucker tensor with orthonormal factors scales
# like core_scale * (rank/size)^(order/2), so the scale is chosen to keep
# most propensities inside a central band away from {0, 1}.
PRESETS: dict[str, dict] = {
    "fig1": {
        "size": 8,
        "orders": [3, 4, 5, 6],
        "rank": 2,
        "core_scale": 10.0,
        "noise": 0.1,
        "settings": ["optimal", "overestimated"],
        "overestimate": 2.0,
        "pe_max_iter": 2000,
        "pe_tol": 1e-6,
    },
    "fig2": {
        "size": 30,
        "order": 4,
        "rank": 5,
        "core_scale": 100.0,
        "noise": 0.1,
        "ratios": [0.2, 0.4, 0.6, 0.8, 1.0],
        "target_rank": 5,
        "methods": ["tenips", "hosvd_w", "sq_unfold", "rect_unfold"],
    },
    "table2": {
        "size": 30,
        "order": 4,
        "rank": 5,
        "core_scale": 100.0,
        "param_core_scale": 9.0,
        "noise": 0.1,
        "target_rank": 5,
        "methods": ["tenips", "hosvd_w", "sq_unfold", "rect_unfold"],
        "propensities": ["true", "convex"],
        "tau_scale": 1.0,
        "gamma_scale": 1.0,
        "pe_max_iter": 2000,
        "pe_tol": 1e-6,
        "nonconvex_step": 1e-5,
        "nonconvex_max_iter": 500,
    },
    "fig3": {
        "size": 30,
        "order": 4,
        "rank": 5,
        "core_scale": 100.0,
        "param_core_scale": 9.0,
        "noise": 0.1,
        "target_ranks": [5, 6, 7, 8, 9, 10],
        "methods": ["tenips", "hosvd_w", "sq_unfold", "rect_unfold"],
    },
    "appd": {
        "size": 16,
        "order": 4,
        "rank": 2,
        "core_scale": 10.0,
        "param_core_scale": 10.0,
        "noise": 0.1,
        "tau_ratios": [0.5, 1.0, 2.0, 5.0],
        "gamma_ratios": [0.5, 1.0, 2.0, 5.0],
        "steps": [1e-4, 3e-4, 1e-3, 3e-3],
        "nc_max_iter": 400,
        "nc_tol": 1e-9,
        "pe_max_iter": 2000,
        "pe_tol": 1e-6,
    },
    "video": {
        "shape": [40, 24, 32],
        "target_ranks": [6, 6, 6],
        "methods": ["tenips", "hosvd_w", "rect_unfold"],
        "propensities": ["true", "convex", "mcar"],
        "tau_scale": 1.0,
        "gamma_scale": 1.0,
        "pe_max_iter": 2000,
        "pe_tol": 1e-6,
    },
}


@dataclass
class ExperimentConfig:
    """Preset name, seed list, output directory, and parameter overrides."""

    preset: str
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    out_dir: str | Path | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; known: {sorted(PRESETS)}")
        if not self.seeds:
            raise ValueError("seed list must be nonempty")

    def resolved(self) -> dict:
        merged = dict(PRESETS[self.preset])
        merged.update(self.params)
        return merged


@dataclass
class MetricsRecord:
    """One grid-cell outcome: errors, timing, status, and a config echo."""

    experiment: str
    cell: str
    method: str
    seed: int
    propensity_rel_error: float | None
    completion_rel_error: float | None
    seconds: float
    status: str = "ok"
    params: dict = field(default_factory=dict)

    def csv_row(self) -> dict:
        def fmt(x):
            return "" if x is None else repr(float(x))

        return {
            "experiment": self.experiment,
            "cell": self.cell,
            "method": self.method,
            "seed": str(self.seed),
            "propensity_rel_error": fmt(self.propensity_rel_error),
            "completion_rel_error": fmt(self.completion_rel_error),
            "status": self.status,
            "params": json.dumps(self.params, sort_keys=True),
        }


def _seed_for(seed: int, kind: str, extra: int = 0) -> int:
    offsets = {"data": 1, "data_noise": 2, "param": 3, "mask": 4, "init": 5}
    return 1_000_003 * seed + 1_009 * offsets[kind] + extra


def _model_b_instance(size, order, rank, core_scale, param_core_scale, noise, seed):
    """Data tensor, parameter tensor and propensities for the entry-dependent model."""
    shape, ranks = (size,) * order, (rank,) * order
    clean, _ = random_tucker(
        GeneratorConfig(shape, ranks, core_scale, seed=_seed_for(seed, "data"))
    )
    data = add_relative_noise(clean, noise, seed=_seed_for(seed, "data_noise"))
    model, param = model_b_propensity(
        GeneratorConfig(shape, ranks, param_core_scale, noise, seed=_seed_for(seed, "param")),
        LOGISTIC,
    )
    return data, param, model.propensities()


def _sq_rank(target_ranks, shape) -> int:
    """Matrix rank of the square unfolding implied by a Tucker rank profile."""
    spec = square_set(shape)
    row = math.prod(target_ranks[m] for m in spec.modes)
    col = math.prod(target_ranks[m] for m in spec.comodes)
    return min(row, col, spec.row_dim, spec.col_dim)


def complete_with_method(method: str, inst: ObservedInstance, p, target_ranks):
    """Dispatch a completion method by name at a Tucker target-rank profile.

    The matrix baselines take the integer rank their unfolding has under the
    profile: the square baseline the product of target ranks over the square
    set (capped by its matrix dimensions), the rectangular baseline the
    mode-0 target rank.
    """
    if method == "tenips":
        return tenips(inst, p, target_ranks)
    if method == "hosvd_w":
        return hosvd_w_complete(inst, p, target_ranks)
    if method == "sq_unfold":
        return sq_unfold_complete(inst, p, _sq_rank(target_ranks, inst.shape))
    if method == "rect_unfold":
        return rect_unfold_complete(inst, p, target_ranks[0], mode=0)
    raise ValueError(f"unknown completion method {method!r}")


def _run_fig1(cfg: ExperimentConfig, records, reports):
    """Square vs rectangular propensity estimation across tensor orders."""
    p = cfg.resolved()
    for order in p["orders"]:
        size, rank = p["size"], p["rank"]
        for seed in cfg.seeds:
            shape, ranks = (size,) * order, (rank,) * order
            model, param = model_b_propensity(
                GeneratorConfig(
                    shape, ranks, p["core_scale"], p["noise"],
                    seed=_seed_for(seed, "param", order),
                ),
                LOGISTIC,
            )
            truth = model.propensities()
            mask = sample_mask(truth, seed=_seed_for(seed, "mask", order))
            alpha = max_abs(param)
            for setting in p["settings"]:
                mult = 1.0 if setting == "optimal" else float(p["overestimate"])
                for tag, spec in (
                    ("square", square_set(shape)),
                    ("rect", UnfoldingSpec((0,), shape)),
                ):
                    cell = f"N{order}-{setting}-{tag}"
                    echo = {"order": order, "setting": setting, "unfolding": tag}
                    try:
                        theta = nuclear_threshold(param, spec)
                        pe_cfg = ConvexPEConfig(
                            tau=mult * theta,
                            gamma=mult * alpha,
                            max_iter=p["pe_max_iter"],
                            tol=p["pe_tol"],
                        )
                        start = time.perf_counter()
                        est, report = convex_pe_on_spec(mask, LOGISTIC, pe_cfg, spec)
                        seconds = time.perf_counter() - start
                        err = relative_error(est.propensities(), truth)
                        records.append(
                            MetricsRecord(cfg.preset, cell, "convex_pe", seed, err, None, seconds, params=echo)
                        )
                        reports[f"{cell}/seed{seed}"] = report.to_dict(thin_trace=50)
                    except Exception as exc:  # noqa: BLE001 - cell failures must not kill the grid
                        records.append(
                            MetricsRecord(cfg.preset, cell, "convex_pe", seed, None, None, 0.0,
                                          status=f"error: {type(exc).__name__}: {exc}", params=echo)
                        )


def _run_fig2(cfg: ExperimentConfig, records, reports):
    """Completion error across uniform observation ratios, true propensities."""
    p = cfg.resolved()
    size, order, rank = p["size"], p["order"], p["rank"]
    target = (p["target_rank"],) * order
    for seed in cfg.seeds:
        clean, _ = random_tucker(
            GeneratorConfig((size,) * order, (rank,) * order, p["core_scale"],
                            seed=_seed_for(seed, "data"))
        )
        data = add_relative_noise(clean, p["noise"], seed=_seed_for(seed, "data_noise"))
        for k, ratio in enumerate(p["ratios"]):
            cell = f"ratio{ratio:g}"
            echo = {"ratio": ratio, "target_rank": p["target_rank"]}
            if ratio >= 1.0:
                mask = np.ones_like(data)
                truth_p = np.ones_like(data)
            else:
                truth_p = model_a_propensity(data.shape, ratio)
                mask = sample_mask(truth_p, seed=_seed_for(seed, "mask", k))
            inst = ObservedInstance.observe(data, mask)
            for method in p["methods"]:
                try:
                    result = complete_with_method(method, inst, truth_p, target)
                    err = relative_error(result.estimate, data)
                    records.append(
                        MetricsRecord(cfg.preset, cell, method, seed, None, err, result.seconds, params=echo)
                    )
                except Exception as exc:  # noqa: BLE001
                    records.append(
                        MetricsRecord(cfg.preset, cell, method, seed, None, None, 0.0,
                                      status=f"error: {type(exc).__name__}: {exc}", params=echo)
                    )


def _estimated_propensities(source, mask, param, p, seed):
    """Propensity tensor for a named source, plus an optional solve report."""
    if source == "true":
        return None, None
    if source == "mcar":
        return np.full(mask.shape, float(mask.mean())), None
    if source == "convex":
        theta = nuclear_threshold(param)
        pe_cfg = ConvexPEConfig(
            tau=float(p.get("tau", p.get("tau_scale", 1.0) * theta)),
            gamma=float(p.get("gamma", p.get("gamma_scale", 1.0) * max_abs(param))),
            max_iter=p["pe_max_iter"],
            tol=p["pe_tol"],
        )
        est, report = convex_pe(mask, LOGISTIC, pe_cfg)
        return est.propensities(), report
    if source == "nonconvex":
        nc_cfg = NonconvexPEConfig(
            step=float(p.get("step", p["nonconvex_step"])),
            ranks=(p["rank"],) * p["order"],
            max_iter=p["nonconvex_max_iter"],
            seed=_seed_for(seed, "init"),
        )
        est, report = nonconvex_pe(mask, LOGISTIC, nc_cfg)
        return est.propensities(), report
    raise ValueError(f"unknown propensity source {source!r}")


def _run_table2(cfg: ExperimentConfig, records, reports):
    """Entry-dependent missingness: methods x (true | estimated) propensities."""
    p = cfg.resolved()
    target = (p["target_rank"],) * p["order"]
    for seed in cfg.seeds:
        data, param, truth_p = _model_b_instance(
            p["size"], p["order"], p["rank"], p["core_scale"],
            p["param_core_scale"], p["noise"], seed,
        )
        mask = sample_mask(truth_p, seed=_seed_for(seed, "mask"))
        inst = ObservedInstance.observe(data, mask)
        for source in p["propensities"]:
            cell = f"prop-{source}"
            echo = {"source": source, "target_rank": p["target_rank"]}
            try:
                est_p, report = _estimated_propensities(source, mask, param, p, seed)
                used_p = truth_p if est_p is None else est_p
                prop_err = None if est_p is None else relative_error(est_p, truth_p)
                if report is not None:
                    reports[f"{cell}/seed{seed}"] = report.to_dict(thin_trace=50)
            except Exception as exc:  # noqa: BLE001
                for method in p["methods"]:
                    records.append(
                        MetricsRecord(cfg.preset, cell, method, seed, None, None, 0.0,
                                      status=f"error: {type(exc).__name__}: {exc}", params=echo)
                    )
                continue
            for method in p["methods"]:
                try:
                    result = complete_with_method(method, inst, used_p, target)
                    err = relative_error(result.estimate, data)
                    records.append(
                        MetricsRecord(cfg.preset, cell, method, seed, prop_err, err, result.seconds, params=echo)
                    )
                except Exception as exc:  # noqa: BLE001
                    records.append(
                        MetricsRecord(cfg.preset, cell, method, seed, prop_err, None, 0.0,
                                      status=f"error: {type(exc).__name__}: {exc}", params=echo)
                    )


def _run_fig3(cfg: ExperimentConfig, records, reports):
    """Sweep of the target rank at fixed true rank, true propensities."""
    p = cfg.resolved()
    for seed in cfg.seeds:
        data, param, truth_p = _model_b_instance(
            p["size"], p["order"], p["rank"], p["core_scale"],
            p["param_core_scale"], p["noise"], seed,
        )
        mask = sample_mask(truth_p, seed=_seed_for(seed, "mask"))
        inst = ObservedInstance.observe(data, mask)
        for rt in p["target_ranks"]:
            cell = f"r{rt}"
            echo = {"target_rank": rt}
            target = (rt,) * p["order"]
            for method in p["methods"]:
                try:
                    result = complete_with_method(method, inst, truth_p, target)
                    err = relative_error(result.estimate, data)
                    records.append(
                        MetricsRecord(cfg.preset, cell, method, seed, None, err, result.seconds, params=echo)
                    )
                except Exception as exc:  # noqa: BLE001
                    records.append(
                        MetricsRecord(cfg.preset, cell, method, seed, None, None, 0.0,
                                      status=f"error: {type(exc).__name__}: {exc}", params=echo)
                    )


def _run_appd(cfg: ExperimentConfig, records, reports):
    """Sensitivity sweeps: convex thresholds and gradient-descent step sizes."""
    p = cfg.resolved()
    shape = (p["size"],) * p["order"]
    ranks = (p["rank"],) * p["order"]
    for seed in cfg.seeds:
        model, param = model_b_propensity(
            GeneratorConfig(shape, ranks, p["param_core_scale"], p["noise"],
                            seed=_seed_for(seed, "param")),
            LOGISTIC,
        )
        truth = model.propensities()
        mask = sample_mask(truth, seed=_seed_for(seed, "mask"))
        theta, alpha = nuclear_threshold(param), max_abs(param)

        sweeps = [("tau", r, r * theta, alpha) for r in p["tau_ratios"]]
        sweeps += [("gamma", r, theta, r * alpha) for r in p["gamma_ratios"]]
        for kind, ratio, tau, gamma in sweeps:
            cell = f"{kind}{ratio:g}"
            echo = {"sweep": kind, "ratio": ratio}
            try:
                pe_cfg = ConvexPEConfig(tau=tau, gamma=gamma,
                                        max_iter=p["pe_max_iter"], tol=p["pe_tol"])
                start = time.perf_counter()
                est, report = convex_pe(mask, LOGISTIC, pe_cfg)
                seconds = time.perf_counter() - start
                err = relative_error(est.propensities(), truth)
                records.append(
                    MetricsRecord(cfg.preset, cell, "convex_pe", seed, err, None, seconds, params=echo)
                )
            except Exception as exc:  # noqa: BLE001
                records.append(
                    MetricsRecord(cfg.preset, cell, "convex_pe", seed, None, None, 0.0,
                                  status=f"error: {type(exc).__name__}: {exc}", params=echo)
                )

        for step in p["steps"]:
            cell = f"step{step:g}"
            echo = {"sweep": "step", "step": step}
            try:
                nc_cfg = NonconvexPEConfig(step=float(step), ranks=ranks,
                                           max_iter=p["nc_max_iter"], tol=p["nc_tol"],
                                           seed=_seed_for(seed, "init"))
                start = time.perf_counter()
                est, report = nonconvex_pe(mask, LOGISTIC, nc_cfg)
                seconds = time.perf_counter() - start
                err = relative_error(est.propensities(), truth)
                records.append(
                    MetricsRecord(cfg.preset, cell, "nonconvex_pe", seed, err, None, seconds, params=echo)
                )
                reports[f"{cell}/seed{seed}"] = report.to_dict(thin_trace=50)
            except DivergenceError as exc:
                records.append(
                    MetricsRecord(cfg.preset, cell, "nonconvex_pe", seed, None, None, 0.0,
                                  status=f"error: DivergenceError: {exc}", params=echo)
                )
            except Exception as exc:  # noqa: BLE001
                records.append(
                    MetricsRecord(cfg.preset, cell, "nonconvex_pe", seed, None, None, 0.0,
                                  status=f"error: {type(exc).__name__}: {exc}", params=echo)
                )


def _run_video(cfg: ExperimentConfig, records, reports):
    """Synthetic video recovery with true, estimated and naive propensities."""
    p = cfg.resolved()
    shape = tuple(p["shape"])
    target = tuple(p["target_ranks"])
    for seed in cfg.seeds:
        data, model = video_like_instance(shape, seed=_seed_for(seed, "data"))
        param = model.param_tensor()
        truth_p = model.propensities()
        mask = sample_mask(truth_p, seed=_seed_for(seed, "mask"))
        inst = ObservedInstance.observe(data, mask)
        for source in p["propensities"]:
            cell = f"prop-{source}"
            echo = {"source": source, "target_ranks": list(target)}
            try:
                est_p, report = _estimated_propensities(source, mask, param, p, seed)
                used_p = truth_p if est_p is None else est_p
                prop_err = None if est_p is None else relative_error(est_p, truth_p)
                if report is not None:
                    reports[f"{cell}/seed{seed}"] = report.to_dict(thin_trace=50)
            except Exception as exc:  # noqa: BLE001
                for method in p["methods"]:
                    records.append(
                        MetricsRecord(cfg.preset, cell, method, seed, None, None, 0.0,
                                      status=f"error: {type(exc).__name__}: {exc}", params=echo)
                    )
                continue
            for method in p["methods"]:
                try:
                    result = complete_with_method(method, inst, used_p, target)
                    err = relative_error(result.estimate, data)
                    records.append(
                        MetricsRecord(cfg.preset, cell, method, seed, prop_err, err, result.seconds, params=echo)
                    )
                except Exception as exc:  # noqa: BLE001
                    records.append(
                        MetricsRecord(cfg.preset, cell, method, seed, prop_err, None, 0.0,
                                      status=f"error: {type(exc).__name__}: {exc}", params=echo)
                    )


_RUNNERS = {
    "fig1": _run_fig1,
    "fig2": _run_fig2,
    "table2": _run_table2,
    "fig3": _run_fig3,
    "appd": _run_appd,
    "video": _run_video,
}


def preset_instance(preset: str, params: dict, seed: int) -> dict[str, np.ndarray]:
    """Materialize one synthetic instance of a preset (for artifact emission)."""
    p = dict(PRESETS[preset])
    p.update(params)
    if preset == "video":
        data, model = video_like_instance(tuple(p["shape"]), seed=_seed_for(seed, "data"))
        param = model.param_tensor()
        truth_p = model.propensities()
    elif preset == "fig2":
        clean, _ = random_tucker(
            GeneratorConfig((p["size"],) * p["order"], (p["rank"],) * p["order"],
                            p["core_scale"], seed=_seed_for(seed, "data"))
        )
        data = add_relative_noise(clean, p["noise"], seed=_seed_for(seed, "data_noise"))
        ratio = float(p.get("ratio", p["ratios"][1]))
        truth_p = model_a_propensity(data.shape, ratio)
        param = None
    elif preset == "fig1":
        order = int(p.get("order", p["orders"][0]))
        model, param = model_b_propensity(
            GeneratorConfig((p["size"],) * order, (p["rank"],) * order,
                            p["core_scale"], p["noise"],
                            seed=_seed_for(seed, "param", order)),
            LOGISTIC,
        )
        truth_p = model.propensities()
        data = None
    else:
        data, param, truth_p = _model_b_instance(
            p["size"], p["order"], p["rank"], p["core_scale"],
            p.get("param_core_scale", 9.0), p["noise"], seed,
        )
    mask = sample_mask(truth_p, seed=_seed_for(seed, "mask"))
    out = {"propensity": truth_p, "mask": mask}
    if data is not None:
        out["data"] = data
        out["observed"] = data * mask
    if param is not None:
        out["param"] = param
    return out


def _csv_bytes(records: list[MetricsRecord]) -> bytes:
    buf = _stdlib_io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.csv_row())
    return buf.getvalue().encode()


def _summary(cfg: ExperimentConfig, records: list[MetricsRecord], reports: dict) -> dict:
    cells: dict = {}
    for rec in records:
        bucket = cells.setdefault(rec.cell, {}).setdefault(
            rec.method,
            {"propensity_rel_error": [], "completion_rel_error": [], "seconds": [], "errors": 0},
        )
        if rec.status != "ok":
            bucket["errors"] += 1
            continue
        if rec.propensity_rel_error is not None:
            bucket["propensity_rel_error"].append(rec.propensity_rel_error)
        if rec.completion_rel_error is not None:
            bucket["completion_rel_error"].append(rec.completion_rel_error)
        bucket["seconds"].append(rec.seconds)

    def mean(xs):
        return float(np.mean(xs)) if xs else None

    summary_cells = {
        cell: {
            method: {
                "propensity_rel_error_mean": mean(b["propensity_rel_error"]),
                "completion_rel_error_mean": mean(b["completion_rel_error"]),
                "seconds_mean": mean(b["seconds"]),
                "n_ok": len(b["seconds"]),
                "n_error": b["errors"],
            }
            for method, b in methods.items()
        }
        for cell, methods in cells.items()
    }
    return {
        "experiment": cfg.preset,
        "seeds": list(cfg.seeds),
        "params": cfg.resolved(),
        "cells": summary_cells,
        "solve_reports": reports,
    }


def run_experiment(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """Run a preset grid; optionally write ``<preset>_metrics.csv`` and
    ``<preset>_summary.json`` into ``cfg.out_dir``."""
    records: list[MetricsRecord] = []
    reports: dict = {}
    _RUNNERS[cfg.preset](cfg, records, reports)
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{cfg.preset}_metrics.csv").write_bytes(_csv_bytes(records))
        summary = _summary(cfg, records, reports)
        (out / f"{cfg.preset}_summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True)
        )
    return records
