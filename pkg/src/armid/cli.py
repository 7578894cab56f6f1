"""Batch command line: design -> simulate -> identify -> report.

Every command reads plain files, writes plain files, and exits 0 on success,
1 on usage or data errors, and 2 when it completed but flagged a warning
(e.g. an infeasible design). All randomness flows from the --seed flag and
every artifact embeds the resolved config and its hash, so a rerun with the
same inputs reproduces outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import excite, identify, model as model_mod, signals, simulate
from .dynamics import stack_regressor
from .excite import ALOptions, DesignProblem
from .identify import IdentifyError
from .model import ModelError
from .signals import SignalError
from .simulate import SimulateError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_WARNINGS = 2

_USER_ERRORS = (
    ModelError,
    SignalError,
    SimulateError,
    IdentifyError,
    excite.ExciteError,
    OSError,
    json.JSONDecodeError,
    ValueError,
    KeyError,
)


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation of one pipeline stage.

    Serialized in full (with its hash) into every artifact the stage writes,
    so a run directory is replayable from its manifests alone.
    """

    command: str
    paths: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    seed: int | None = None

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "paths": dict(self.paths),
            "parameters": dict(self.parameters),
            "seed": self.seed,
        }

    def hash(self) -> str:
        return _config_hash(self.as_dict())


def _config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_model(args) -> model_mod.RobotModel:
    if getattr(args, "fixture", None):
        return simulate.builtin_fixture(args.fixture).model
    if not args.model:
        raise ValueError("either --model or --fixture is required")
    text = Path(args.model).read_text()
    return model_mod.parse_robot_description(text)


def _parse_cutoff(raw: str | None):
    if raw is None or raw.lower() in ("none", "off"):
        return None
    if raw.lower() == "auto":
        return "auto"
    return float(raw)


def _load_manifest(data_dir: Path) -> dict:
    manifest_path = data_dir / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"no manifest.json in {data_dir}")
    with open(manifest_path) as fh:
        return json.load(fh)


def _load_trials(data_dir: Path) -> list[signals.RawTrial]:
    paths = sorted(data_dir.glob("trial_*.csv"))
    if not paths:
        raise ValueError(f"no trial_*.csv files in {data_dir}")
    return [signals.trial_from_csv(p) for p in paths]


def _metrics_rows(model, alpha_hat, truth, char_length, method):
    rows = []
    n = model.num_joints
    for i in range(n):
        est = model_mod.LinkInertialParams.from_vector(
            alpha_hat[13 * i : 13 * i + 13]
        )
        tru = model_mod.LinkInertialParams.from_vector(truth[13 * i : 13 * i + 13])
        mass_pct, com_pct, inertia_pct = identify.error_metrics(est, tru, char_length)
        rows.append(
            {
                "method": method,
                "link": model.joint_specs[i].name,
                "mass_pct": mass_pct,
                "com_pct": com_pct,
                "inertia_pct": inertia_pct,
            }
        )
    return rows


def _write_metrics_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "link", "mass_pct", "com_pct", "inertia_pct"])
        for row in rows:
            writer.writerow(
                [
                    row["method"],
                    row["link"],
                    repr(float(row["mass_pct"])),
                    repr(float(row["com_pct"])),
                    repr(float(row["inertia_pct"])),
                ]
            )


# --- design -----------------------------------------------------------------------


def cmd_design(args) -> int:
    robot = _load_model(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    omega = 2.0 * math.pi * args.base_freq
    problem = DesignProblem(
        model=robot, sample_rate=args.sample_rate, gamma=args.gamma
    )
    opts = ALOptions(
        seed=args.seed,
        subproblem_budget=args.budget,
        outer_iterations=args.outer,
        restarts=args.restarts,
        initial_penalty=100.0,
        constraint_tolerance=args.tolerance,
    )
    traj, report = excite.design_trajectory(problem, omega, args.harmonics, opts)

    config = RunConfig(
        command="design",
        paths={"model": args.model or f"fixture:{args.fixture}", "out": str(args.out)},
        parameters={
            "gamma": args.gamma,
            "harmonics": args.harmonics,
            "base_freq": args.base_freq,
            "sample_rate": args.sample_rate,
            "budget": args.budget,
            "outer": args.outer,
            "restarts": args.restarts,
            "tolerance": args.tolerance,
        },
        seed=args.seed,
    )
    provenance = {
        "config": config.as_dict(),
        "config_hash": config.hash(),
        "problem_hash": excite.problem_fingerprint(problem, omega, args.harmonics),
        "seed": args.seed,
        "objective_history": [h["objective"] for h in report.history],
    }
    excite.save_trajectory(out_dir / "trajectory.json", traj, provenance)
    excite.export_trajectory_csv(out_dir / "trajectory.csv", traj, args.sample_rate)
    _write_json(
        out_dir / "design_report.json",
        {"report": report.as_dict(), "config": config.as_dict(), "config_hash": config.hash()},
    )
    if report.flagged:
        print("design completed with infeasibility flag", file=sys.stderr)
        return EXIT_WARNINGS
    return EXIT_OK


# --- simulate ---------------------------------------------------------------------


def _payload_from_spec(path: str) -> model_mod.LinkInertialParams:
    with open(path) as fh:
        spec = json.load(fh)
    if "first_moment" in spec:
        return model_mod.LinkInertialParams(
            mass=spec["mass"],
            first_moment=np.asarray(spec["first_moment"], dtype=float),
            rotational_inertia=np.asarray(spec["rotational_inertia"], dtype=float),
        )
    return model_mod.solid_sphere_params(
        spec["mass"], spec.get("radius", 0.05), spec.get("com", [0.0, 0.0, 0.0])
    )


def cmd_simulate(args) -> int:
    if args.fixture:
        fixture = simulate.builtin_fixture(args.fixture)
    else:
        robot = _load_model(args)
        fixture = simulate.Fixture(name=robot.name, model=robot, char_length=args.char_length)
    if args.payload:
        fixture = fixture.with_payload(_payload_from_spec(args.payload))
    traj, _ = excite.load_trajectory(args.traj)
    noise = simulate.NoiseSpec(
        torque_abs_std=args.noise_abs,
        torque_rel_std=args.noise_rel,
        position_std=args.noise_pos,
        seed=args.seed,
    )
    config = RunConfig(
        command="simulate",
        paths={
            "model": args.model or f"fixture:{args.fixture}",
            "traj": str(args.traj),
            "payload": args.payload,
            "out": str(args.out),
        },
        parameters={
            "trials": args.trials,
            "rate": args.rate,
            "noise_abs": args.noise_abs,
            "noise_rel": args.noise_rel,
            "noise_pos": args.noise_pos,
        },
        seed=args.seed,
    )
    simulate.write_dataset(
        Path(args.out),
        fixture,
        traj,
        args.rate,
        args.trials,
        noise,
        extra_manifest={"config": config.as_dict(), "config_hash": config.hash()},
    )
    return EXIT_OK


# --- identify ---------------------------------------------------------------------


def _resolve_cutoffs(args, manifest) -> tuple[float | None, float | None]:
    pos = _parse_cutoff(args.pos_cutoff)
    torque = _parse_cutoff(args.torque_cutoff)
    noise = manifest.get("noise", {})
    noisy = any(
        noise.get(k, 0.0) > 0.0
        for k in ("torque_abs_std", "torque_rel_std", "position_std")
    )
    rate = float(manifest.get("rate", 100.0))
    default = min(10.0, rate / 4.0) if noisy else None
    if pos == "auto":
        pos = default
    if torque == "auto":
        torque = default
    return pos, torque


def _strictly_feasible_prior(alpha: np.ndarray, n: int) -> bool:
    for i in range(n):
        params = model_mod.LinkInertialParams.from_vector(alpha[13 * i : 13 * i + 13])
        report = model_mod.is_physically_feasible(params, tol=0.0)
        if not report.feasible:
            return False
        if min(params.viscous_friction, params.coulomb_friction, params.rotor_inertia) <= 0:
            return False
    return True


def _load_base_params(args, n: int) -> np.ndarray:
    with open(args.base_params) as fh:
        data = json.load(fh)
    if "labeled_sets" in data:
        labeled = {float(k): np.asarray(v, dtype=float) for k, v in data["labeled_sets"].items()}
        label, alpha = identify.nearest_base_params(labeled, args.configuration)
        print(f"using base parameter set labeled {label}", file=sys.stderr)
    elif "alpha" in data:
        alpha = np.asarray(data["alpha"], dtype=float)
    elif "consistent" in data:
        alpha = np.asarray(data["consistent"]["alpha"], dtype=float)
    else:
        raise ValueError("base parameter file needs 'alpha' or 'labeled_sets'")
    if alpha.shape != (13 * n,):
        raise ValueError(f"base parameters have {alpha.size} entries, expected {13 * n}")
    return alpha


def cmd_identify(args) -> int:
    data_dir = Path(args.data)
    manifest = _load_manifest(data_dir)
    robot = model_mod.model_from_dict(manifest["model"])
    trials = _load_trials(data_dir)
    averaged = signals.average_trials(trials)
    pos_cut, torque_cut = _resolve_cutoffs(args, manifest)
    dataset = signals.process_trial(averaged, pos_cut, torque_cut)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    truth = (
        np.asarray(manifest["truth_parameters"], dtype=float)
        if "truth_parameters" in manifest
        else None
    )
    char_length = manifest.get("char_length", 0.3)
    run_config = RunConfig(
        command="identify",
        paths={
            "data": str(args.data),
            "base_params": args.base_params,
            "out": str(args.out),
        },
        parameters={
            "mode": args.mode,
            "pos_cutoff": pos_cut,
            "torque_cutoff": torque_cut,
            "reg_weight": args.reg_weight,
            "configuration": args.configuration,
        },
    )
    config = run_config.as_dict()
    config_hash = run_config.hash()

    if args.mode == "robot":
        stack = stack_regressor(robot, dataset.states, dataset.torques)
        if truth is not None and _strictly_feasible_prior(truth, robot.num_joints):
            prior = truth
        else:
            prior = signals.default_identification_prior(robot.num_joints)
        result_ols = identify.ols_identify(stack, prior=prior)
        result_cons = identify.consistent_identify(stack, prior, reg_weight=args.reg_weight)
        payload = {
            "config": config,
            "config_hash": config_hash,
            "cutoffs": {"position": pos_cut, "torque": torque_cut},
            "ols": result_ols.as_dict(),
            "consistent": result_cons.as_dict(),
            "alpha": result_cons.alpha_hat.tolist(),
        }
        _write_json(out_dir / "identification.json", payload)
        if truth is not None:
            rows = _metrics_rows(robot, result_ols.alpha_hat, truth, char_length, "ols")
            rows += _metrics_rows(robot, result_cons.alpha_hat, truth, char_length, "consistent")
            _write_metrics_csv(out_dir / "metrics.csv", rows)
        return EXIT_OK

    # payload mode
    if not args.base_params:
        raise ValueError("payload mode requires --base-params")
    base = _load_base_params(args, robot.num_joints)
    total = 13 * robot.num_joints
    mask = np.ones(total, dtype=bool)
    last = robot.num_joints - 1
    mask[13 * last : 13 * last + 10] = False
    stack = stack_regressor(
        robot, dataset.states, dataset.torques, fixed_mask=mask, fixed_values=base
    )
    result = identify.payload_identify(stack, base, reg_weight=args.reg_weight)
    payload = {
        "config": config,
        "config_hash": config_hash,
        "cutoffs": {"position": pos_cut, "torque": torque_cut},
        "payload": result.as_dict(),
    }
    _write_json(out_dir / "payload.json", payload)
    if manifest.get("payload"):
        truth_payload = simulate.payload_from_manifest(manifest["payload"])
        mass_pct, com_pct, inertia_pct = identify.error_metrics(
            result.params, truth_payload, char_length
        )
        _write_metrics_csv(
            out_dir / "metrics.csv",
            [
                {
                    "method": "payload",
                    "link": robot.joint_specs[last].name,
                    "mass_pct": mass_pct,
                    "com_pct": com_pct,
                    "inertia_pct": inertia_pct,
                }
            ],
        )
    if result.boundary_warning:
        print("payload estimate hugs the feasibility boundary", file=sys.stderr)
        return EXIT_WARNINGS
    return EXIT_OK


# --- tune-filters -----------------------------------------------------------------


def _parse_grid(raw: str):
    if raw == "default":
        return signals.DEFAULT_CUTOFF_GRID
    try:
        pos_part, torque_part = raw.split(":")
        pos_values = [float(v) for v in pos_part.split(",") if v]
        torque_values = [float(v) for v in torque_part.split(",") if v]
    except ValueError:
        raise ValueError(
            "grid must be 'default' or 'p1,p2,...:t1,t2,...' in Hz"
        ) from None
    return tuple((p, t) for p in pos_values for t in torque_values)


def cmd_tune_filters(args) -> int:
    data_dir = Path(args.data)
    manifest = _load_manifest(data_dir)
    robot = model_mod.model_from_dict(manifest["model"])
    trials = _load_trials(data_dir)
    averaged = signals.average_trials(trials)
    grid = _parse_grid(args.grid)
    best, table = signals.tune_filter_cutoffs(averaged, robot, grid)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = RunConfig(
        command="tune-filters",
        paths={"data": str(args.data), "out": str(args.out)},
        parameters={"grid": args.grid},
    )
    with open(out_dir / "cutoff_search.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["position_cutoff", "torque_cutoff", "residual", "error"])
        for entry in table:
            writer.writerow(
                [
                    entry.position_cutoff,
                    entry.torque_cutoff,
                    "" if entry.residual is None else repr(float(entry.residual)),
                    entry.error or "",
                ]
            )
    _write_json(
        out_dir / "best_cutoffs.json",
        {
            "config": config.as_dict(),
            "config_hash": config.hash(),
            "position_cutoff": best[0],
            "torque_cutoff": best[1],
        },
    )
    return EXIT_OK


# --- report -----------------------------------------------------------------------


def cmd_report(args) -> int:
    rows = []
    for run in args.runs:
        metrics_path = Path(run) / "metrics.csv"
        if not metrics_path.exists():
            print(f"skipping {run}: no metrics.csv", file=sys.stderr)
            continue
        with open(metrics_path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                row["run"] = str(run)
                rows.append(row)
    if not rows:
        raise ValueError("no metrics found in the given run directories")
    fieldnames = ["run", "method", "link", "mass_pct", "com_pct", "inertia_pct"]
    out_fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out_fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out_fh.close()
    return EXIT_OK


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="armid",
        description="excitation design and inertial identification for serial arms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="optimize an excitation trajectory")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model", help="robot description file (URDF subset)")
    src.add_argument("--fixture", help="builtin fixture name instead of --model")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--harmonics", type=int, default=5)
    p.add_argument("--base-freq", type=float, default=0.1, help="Hz")
    p.add_argument("--sample-rate", type=float, default=100.0, help="Hz")
    p.add_argument("--budget", type=int, default=2000, help="evaluations per outer iteration")
    p.add_argument("--outer", type=int, default=6)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="generate synthetic measurement trials")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--model")
    src.add_argument("--fixture")
    p.add_argument("--traj", required=True, help="trajectory JSON from 'design'")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--rate", type=float, default=100.0)
    p.add_argument("--noise-rel", type=float, default=0.0)
    p.add_argument("--noise-abs", type=float, default=0.0)
    p.add_argument("--noise-pos", type=float, default=0.0)
    p.add_argument("--payload", help="payload spec JSON (mass/com/radius or full params)")
    p.add_argument("--char-length", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", help="estimate parameters from a dataset")
    p.add_argument("--mode", choices=("robot", "payload"), default="robot")
    p.add_argument("--data", required=True, help="dataset directory with manifest.json")
    p.add_argument("--base-params", help="robot identification JSON (payload mode)")
    p.add_argument("--configuration", type=float, default=0.0,
                   help="configuration label for selecting among labeled base sets")
    p.add_argument("--pos-cutoff", default="auto", help="Hz, 'none', or 'auto'")
    p.add_argument("--torque-cutoff", default="auto", help="Hz, 'none', or 'auto'")
    p.add_argument("--reg-weight", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("tune-filters", help="grid-search filter cutoffs")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", default="default")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune_filters)

    p = sub.add_parser("report", help="aggregate metrics from run directories")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
