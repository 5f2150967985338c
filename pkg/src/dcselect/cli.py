"""Command-line surface: fit, simulate, spatial.

Every run writes its outputs plus a manifest (resolved configuration,
sha256 digests of the exact input bytes, library version, timestamp,
output names) so results are reproducible from the manifest and inputs.
Config-file values are overridden by explicit flags.  Exit codes:
0 success, 2 input/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import __version__, objective
from .baselines import BaselineConfig, run_baseline
from .dc_solver import SolverConfig, solve
from .errors import NumericalError, ValidationError
from .experiments import (
    ScenarioConfig,
    load_spatial_csv,
    run_replications,
    spatial_fit,
    write_results_csv,
    write_spatial_csv,
)
from .model_core import (
    BoxBounds,
    ConstraintSpec,
    build_instance,
    load_design_csv,
    load_response_csv,
    normalize_groups,
    standardize_columns,
    standardize_vector,
)


def _atomic_write(path: str, write_fn) -> None:
    """Write via temp file + rename so partial output never lands."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-dcselect-")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: str, command: str, config: dict, inputs: list, outputs: list) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {p: _sha256(p) for p in inputs},
        "library_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "outputs": outputs,
    }
    _atomic_write(
        os.path.join(out_dir, "manifest.json"),
        lambda fh: json.dump(manifest, fh, indent=2, sort_keys=True),
    )


def _onoff(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on|off")
    return value == "on"


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: config file must hold a JSON object")
    return cfg


def _merged(args: argparse.Namespace, file_cfg: dict, key: str, default):
    """Flag (if given) beats config file beats default."""
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return default


def _add_shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--method", choices=["dc", "ard", "pgd"], default=None)
    p.add_argument("--box-lo", type=float, default=None)
    p.add_argument("--box-hi", type=float, default=None)
    p.add_argument("--a0", type=float, default=None)
    p.add_argument("--b0", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--accel", type=_onoff, default=None, metavar="{on,off}")
    p.add_argument("--accel-period", type=int, default=None)
    p.add_argument("--rel-tol", type=float, default=None)
    p.add_argument("--constraint-file", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--standardize-x", type=_onoff, default=None, metavar="{on,off}")
    p.add_argument("--standardize-y", type=_onoff, default=None, metavar="{on,off}")


def _parse_constraint(path: str | None, bounds: BoxBounds, X: np.ndarray | None) -> ConstraintSpec:
    """Constraint description file: kind + 1-based groups or scores."""
    if not path:
        return ConstraintSpec(bounds=bounds)
    with open(path, encoding="utf-8") as fh:
        desc = json.load(fh)
    kind = desc.get("kind", "none")
    tol = float(desc.get("tolerance", 1e-8))
    sweeps = int(desc.get("max_sweeps", 500))
    if kind == "none":
        return ConstraintSpec(bounds=bounds, alt_tol=tol, alt_max_sweeps=sweeps)
    if kind in ("disjoint-groups", "overlapping-groups"):
        groups = normalize_groups([[i - 1 for i in g] for g in desc["groups"]])
        return ConstraintSpec(
            bounds=bounds, structure=kind, groups=groups, alt_tol=tol, alt_max_sweeps=sweeps
        )
    if kind == "score-monotone":
        if "scores" in desc:
            scores = np.asarray(desc["scores"], dtype=float)
        elif "score_column" in desc:
            if X is None:
                raise ValidationError(f"{path}: score_column needs a design matrix")
            scores = X[:, int(desc["score_column"]) - 1]
        else:
            raise ValidationError(f"{path}: score-monotone needs scores or score_column")
        return ConstraintSpec(
            bounds=bounds,
            structure="score-monotone",
            scores=scores,
            alt_tol=tol,
            alt_max_sweeps=sweeps,
        )
    raise ValidationError(f"{path}: unknown constraint kind {kind!r}")


def cmd_fit(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    x_path = _merged(args, file_cfg, "x", None)
    y_path = _merged(args, file_cfg, "y", None)
    if not x_path or not y_path:
        raise ValidationError("fit requires --x and --y")
    for p in (x_path, y_path):
        if not os.path.exists(p):
            raise ValidationError(f"input file not found: {p}")
    method = _merged(args, file_cfg, "method", "dc")
    bounds = BoxBounds(
        _merged(args, file_cfg, "box-lo", 1e-4), _merged(args, file_cfg, "box-hi", 1e4)
    )
    a0 = _merged(args, file_cfg, "a0", 1.0)
    b0 = _merged(args, file_cfg, "b0", 1.0)
    header_x = bool(_merged(args, file_cfg, "x-header", False))
    header_y = bool(_merged(args, file_cfg, "y-header", False))
    X = load_design_csv(x_path, header=header_x)
    y = load_response_csv(y_path, header=header_y)
    if _merged(args, file_cfg, "standardize-x", False):
        X = standardize_columns(X)
    if _merged(args, file_cfg, "standardize-y", False):
        y = standardize_vector(y)
    constraint = _parse_constraint(
        _merged(args, file_cfg, "constraint-file", None), bounds, X
    )
    inst = build_instance(X, y, a0, b0)
    max_iters = int(_merged(args, file_cfg, "max-iters", 5000))
    rel_tol = float(_merged(args, file_cfg, "rel-tol", 1e-5))
    init = _merged(args, file_cfg, "init", "identity")
    solver_path = _merged(args, file_cfg, "solver", "auto")
    if method == "dc":
        cfg = SolverConfig(
            constraint=constraint,
            rel_tol=rel_tol,
            max_iters=max_iters,
            accel_enabled=bool(_merged(args, file_cfg, "accel", True)),
            accel_period=int(_merged(args, file_cfg, "accel-period", 100)),
            initial_d=init,
            linear_solver=solver_path,
        )
        d_star, trace = solve(inst, cfg)
        resolved = {"method": method, "solver": repr(cfg)}
    else:
        cfg = BaselineConfig(
            method="ard_em" if method == "ard" else "pgd",
            step_size=float(_merged(args, file_cfg, "pgd-step", 0.1)),
            bounds=bounds,
            rel_tol=rel_tol,
            max_iters=max_iters,
            initial_d=init,
            linear_solver=solver_path,
        )
        d_star, trace = run_baseline(inst, cfg)
        resolved = {"method": method, "solver": repr(cfg)}
    summary = objective.posterior_summary(inst, d_star)
    os.makedirs(args.out_dir, exist_ok=True)
    est_path = os.path.join(args.out_dir, "estimate.csv")

    def write_estimate(fh):
        writer = csv.writer(fh)
        writer.writerow(["index", "d_star", "theta_hat", "marginal_scale"])
        for j in range(inst.p):
            writer.writerow(
                [j + 1, repr(float(d_star[j])), repr(float(summary.theta_hat[j])),
                 repr(float(summary.marginal_scale[j]))]
            )

    _atomic_write(est_path, write_estimate)
    run_path = os.path.join(args.out_dir, "run.json")
    _atomic_write(
        run_path,
        lambda fh: json.dump(
            {
                "status": trace.status,
                "iterations": trace.iterations,
                "final_loss": float(trace.records[-1].loss) if trace.records else None,
                "marginal_df": summary.marginal_df,
                "sigma2_mean": summary.sigma2_mean,
            },
            fh,
            indent=2,
        ),
    )
    trace_path = os.path.join(args.out_dir, "trace.jsonl")
    trace.write_jsonl(trace_path)
    inputs = [x_path, y_path]
    if args.constraint_file:
        inputs.append(args.constraint_file)
    if args.config:
        inputs.append(args.config)
    _write_manifest(args.out_dir, "fit", resolved, inputs,
                    ["estimate.csv", "run.json", "trace.jsonl"])
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    kwargs = {}
    for key, cast in (
        ("n", int), ("p", int), ("s", int), ("design", str), ("rho", float),
        ("sigma2", float), ("replications", int), ("seed", int), ("threshold", float),
        ("a0", float), ("b0", float), ("box-lo", float), ("box-hi", float),
        ("rel-tol", float), ("max-iters", int), ("pgd-step-size", float),
        ("standardize-x", bool), ("standardize-y", bool), ("accel", bool),
        ("accel-period", int), ("scenario-id", str),
    ):
        val = _merged(args, file_cfg, key, None)
        if val is not None:
            field = key.replace("-", "_")
            if field == "box_lo":
                field = "box_lo"
            if field == "accel":
                field = "accel_enabled"
            kwargs[field] = cast(val)
    if "coef_pool" in file_cfg:
        kwargs["coef_pool"] = tuple(float(c) for c in file_cfg["coef_pool"])
    try:
        scenario = ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad scenario configuration: {exc}") from exc
    methods = _merged(args, file_cfg, "methods", "dc,ard,pgd")
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    for m in methods:
        if m not in ("dc", "ard", "pgd"):
            raise ValidationError(f"unknown method {m!r}")
    jobs = int(_merged(args, file_cfg, "jobs", 1))
    rows = run_replications(scenario, methods, jobs=jobs)
    os.makedirs(args.out_dir, exist_ok=True)
    res_path = os.path.join(args.out_dir, "results.csv")

    def write_rows(fh):
        from .experiments import RESULT_COLUMNS

        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([row[c] for c in RESULT_COLUMNS])

    _atomic_write(res_path, write_rows)
    inputs = [args.config] if args.config else []
    _write_manifest(
        args.out_dir,
        "simulate",
        {"scenario": repr(scenario), "methods": methods, "jobs": jobs},
        inputs,
        ["results.csv"],
    )
    return 0


def cmd_spatial(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    data_path = _merged(args, file_cfg, "data", None)
    if not data_path:
        raise ValidationError("spatial requires --data")
    if not os.path.exists(data_path):
        raise ValidationError(f"input file not found: {data_path}")
    data = load_spatial_csv(data_path)
    bounds = BoxBounds(
        _merged(args, file_cfg, "box-lo", 1e-4), _merged(args, file_cfg, "box-hi", 1e4)
    )
    cfg = SolverConfig(
        constraint=ConstraintSpec(bounds=bounds),  # replaced inside spatial_fit
        rel_tol=float(_merged(args, file_cfg, "rel-tol", 1e-5)),
        max_iters=int(_merged(args, file_cfg, "max-iters", 5000)),
        accel_enabled=bool(_merged(args, file_cfg, "accel", True)),
        accel_period=int(_merged(args, file_cfg, "accel-period", 100)),
    )
    fit = spatial_fit(
        data,
        bounds=bounds,
        a0=float(_merged(args, file_cfg, "a0", 1.0)),
        b0=float(_merged(args, file_cfg, "b0", 1.0)),
        solver=cfg,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    out_path = os.path.join(args.out_dir, "spatial.csv")
    tmp_target = out_path + ".tmp-render"
    write_spatial_csv(tmp_target, data, fit)
    os.replace(tmp_target, out_path)
    fit.trace.write_jsonl(os.path.join(args.out_dir, "trace.jsonl"))
    inputs = [data_path] + ([args.config] if args.config else [])
    _write_manifest(
        args.out_dir,
        "spatial",
        {"bounds": [bounds.lo, bounds.hi], "solver": repr(cfg)},
        inputs,
        ["spatial.csv", "trace.jsonl"],
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcselect")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one dataset")
    p_fit.add_argument("--x", help="design matrix CSV")
    p_fit.add_argument("--y", help="response CSV (single column)")
    p_fit.add_argument("--x-header", action="store_const", const=True, default=None)
    p_fit.add_argument("--y-header", action="store_const", const=True, default=None)
    p_fit.add_argument("--init", choices=["identity", "warm-mls"], default=None)
    p_fit.add_argument("--solver", choices=["auto", "dense", "woodbury", "cg"], default=None)
    p_fit.add_argument("--pgd-step", type=float, default=None)
    _add_shared(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="replicate a synthetic scenario")
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--p", type=int, default=None)
    p_sim.add_argument("--s", type=int, default=None)
    p_sim.add_argument("--design", default=None)
    p_sim.add_argument("--rho", type=float, default=None)
    p_sim.add_argument("--sigma2", type=float, default=None)
    p_sim.add_argument("--replications", type=int, default=None)
    p_sim.add_argument("--threshold", type=float, default=None)
    p_sim.add_argument("--pgd-step-size", type=float, default=None)
    p_sim.add_argument("--scenario-id", default=None)
    p_sim.add_argument("--methods", default=None, help="comma list from dc,ard,pgd")
    _add_shared(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_sp = sub.add_parser("spatial", help="radial-monotone identity-design fit")
    p_sp.add_argument("--data", help="CSV with cell_id,x,y,score,response")
    _add_shared(p_sp)
    p_sp.set_defaults(func=cmd_spatial)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
