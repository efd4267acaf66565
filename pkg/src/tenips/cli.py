"""Command-line harness.

Subcommands:

* ``gen``        write a synthetic preset instance as TNSR/MASK files
* ``estimate``   estimate propensities from a mask file
* ``complete``   complete an observed tensor given propensities
* ``experiment`` run a preset grid, emitting CSV metrics and a JSON summary
* ``bound``      evaluate the error-bound diagnostics for an instance

Config files are flat ``key = value`` text with JSON-encoded values; any
command-line flag overrides the file value of the same name.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bounds import (
    BoundInputs,
    completion_error_bound,
    nuclear_threshold,
    propensity_error_bound,
    relative_error,
    reweight_deviation_bound,
)
from .completion import ObservedInstance
from .experiments import (
    PRESETS,
    ExperimentConfig,
    complete_with_method,
    preset_instance,
    run_experiment,
)
from .io import read_mask, read_tensor, write_mask, write_tensor
from .links import LOGISTIC
from .propensity import ConvexPEConfig, NonconvexPEConfig, convex_pe, nonconvex_pe
from .tensor import max_abs, square_set


def _parse_config_file(path: str) -> dict:
    params = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def _parse_ranks(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _parse_seeds(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file (JSON values)")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0)


def _gather_params(args, keys=()) -> dict:
    params = _parse_config_file(args.config) if args.config else {}
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params


def _cmd_gen(args) -> int:
    params = _gather_params(args)
    if args.scale is not None:
        params["size"] = args.scale
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arrays = preset_instance(args.preset, params, args.seed)
    for name, arr in arrays.items():
        if name == "mask":
            write_mask(out / "mask.mask", arr)
        else:
            write_tensor(out / f"{name}.tnsr", arr)
    print(f"wrote {', '.join(sorted(arrays))} to {out}")
    return 0


def _cmd_estimate(args) -> int:
    mask = read_mask(args.mask)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.method == "convex":
        if args.tau is None or args.gamma is None:
            raise SystemExit("convex estimation requires --tau and --gamma")
        cfg = ConvexPEConfig(tau=args.tau, gamma=args.gamma)
        model, report = convex_pe(mask, LOGISTIC, cfg)
    elif args.method == "nonconvex":
        if args.step is None or args.ranks is None:
            raise SystemExit("nonconvex estimation requires --step and --ranks")
        cfg = NonconvexPEConfig(
            step=args.step, ranks=_parse_ranks(args.ranks), seed=args.seed
        )
        model, report = nonconvex_pe(mask, LOGISTIC, cfg)
    else:
        raise SystemExit(f"unknown estimation method {args.method!r}")
    write_tensor(out / "propensity_estimate.tnsr", model.propensities())
    (out / "estimate_report.json").write_text(
        json.dumps(report.to_dict(thin_trace=200), indent=2, sort_keys=True)
    )
    print(
        f"{args.method}: {report.iterations} iterations, "
        f"objective {report.final_objective:.6g}, converged={report.converged}"
    )
    return 0


def _cmd_complete(args) -> int:
    observed = read_tensor(args.observed)
    mask = read_mask(args.mask)
    p = read_tensor(args.propensity)
    inst = ObservedInstance(observed, mask)
    ranks = _parse_ranks(args.ranks)
    if len(ranks) == 1:
        ranks = ranks * observed.ndim
    result = complete_with_method(args.method, inst, p, ranks)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / "estimate.tnsr", result.estimate)
    metrics = {"method": result.method, "ranks": list(ranks), "seconds": result.seconds}
    if args.truth:
        metrics["rel_error"] = relative_error(result.estimate, read_tensor(args.truth))
    (out / "complete_metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True))
    line = f"{result.method}: wrote estimate.tnsr"
    if "rel_error" in metrics:
        line += f", rel_error={metrics['rel_error']:.6g}"
    print(line)
    return 0


def _cmd_experiment(args) -> int:
    params = _gather_params(args)
    if args.scale is not None:
        params["size"] = args.scale
    for key, flag in (("tau", args.tau), ("gamma", args.gamma), ("step", args.step)):
        if flag is not None:
            params[key] = flag
    if args.method is not None:
        params["methods"] = [args.method]
    if args.ranks is not None:
        ranks = _parse_ranks(args.ranks)
        if len(ranks) == 1:
            params["target_rank"] = ranks[0]
        else:
            params["target_ranks"] = list(ranks)
    seeds = _parse_seeds(args.seeds) if args.seeds else [args.seed]
    cfg = ExperimentConfig(args.preset, seeds=seeds, out_dir=args.out_dir, params=params)
    records = run_experiment(cfg)
    n_err = sum(1 for r in records if r.status != "ok")
    print(f"{args.preset}: {len(records)} records ({n_err} errors) -> {args.out_dir}")
    return 0


def _cmd_bound(args) -> int:
    data = read_tensor(args.data)
    param = read_tensor(args.param)
    gamma = args.gamma if args.gamma is not None else max_abs(param)
    inputs = BoundInputs.from_instance(data, param, LOGISTIC, gamma=gamma, epsilon=args.epsilon)
    tau = args.tau if args.tau is not None else inputs.theta
    ranks = _parse_ranks(args.ranks) if args.ranks else None
    spec = square_set(data.shape)
    diagnostics = {
        "psi": inputs.psi,
        "alpha": inputs.alpha,
        "theta": inputs.theta,
        "alpha_sp": inputs.alpha_sp,
        "l_gamma": inputs.l_gamma,
        "epsilon": inputs.epsilon,
        "tau": tau,
        "square_modes": list(spec.modes),
        "propensity_mse_bound": propensity_error_bound(inputs, spec, tau),
        "reweight_deviation_bound": reweight_deviation_bound(inputs, tau),
    }
    if ranks is not None:
        if len(ranks) == 1:
            ranks = ranks * data.ndim
        diagnostics["completion_rel_error_bound"] = completion_error_bound(
            inputs, ranks, tau=tau
        )
        diagnostics["condition_numbers"] = inputs.condition_numbers(ranks)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bound_diagnostics.json").write_text(json.dumps(diagnostics, indent=2, sort_keys=True))
    for key, value in sorted(diagnostics.items()):
        print(f"{key} = {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tenips",
        description="Tensor completion under missing-not-at-random observations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic preset instance")
    _add_common(p)
    p.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p.add_argument("--scale", type=int, help="override the preset mode size")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("estimate", help="estimate propensities from a mask file")
    _add_common(p)
    p.add_argument("--mask", required=True)
    p.add_argument("--method", default="convex", choices=["convex", "nonconvex"])
    p.add_argument("--tau", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--ranks", help="comma-separated rank profile (nonconvex)")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("complete", help="complete an observed tensor")
    _add_common(p)
    p.add_argument("--observed", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--propensity", required=True)
    p.add_argument(
        "--method",
        default="tenips",
        choices=["tenips", "hosvd_w", "sq_unfold", "rect_unfold"],
    )
    p.add_argument("--ranks", required=True, help="comma-separated target rank profile")
    p.add_argument("--truth", help="optional ground-truth tensor for the error metric")
    p.set_defaults(func=_cmd_complete)

    p = sub.add_parser("experiment", help="run a preset experiment grid")
    _add_common(p)
    p.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p.add_argument("--seeds", help="comma-separated seed list (overrides --seed)")
    p.add_argument("--scale", type=int, help="override the preset mode size")
    p.add_argument("--method")
    p.add_argument("--ranks")
    p.add_argument("--tau", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--step", type=float)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("bound", help="evaluate error-bound diagnostics")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--ranks")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.set_defaults(func=_cmd_bound)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
