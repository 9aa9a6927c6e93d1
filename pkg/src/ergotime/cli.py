"""Scenario-driven command line: solve, sweep, verify, coeffs.

Configs are JSON (unknown keys rejected, field-level messages on exit 2);
outputs are deterministic JSON artifacts plus CSV tables, documented in
``docs/formats.md``.  Exit codes: 0 converged / report-only success,
1 solver failure, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import pmp
from ._eval import Assembly
from .constraints import CbfParams, ConstraintSet, Obstacle
from .distributions import (
    DEFAULT_RESOLUTION,
    gaussian_mixture,
    gridded,
    gridded_from_csv,
    phi_coefficients,
    uniform,
)
from .dynamics import MODELS, IntegratorKind
from .ergodic import BasisSet, Workspace
from .errors import ContractError, DivergedError, DomainError
from .problem import DecisionVector, Mode, ProblemSpec
from .solver import Multipliers, SolverOptions, kkt_residuals, solve
from .transcription import INIT_SHAPES, initial_guess

SCHEMA_VERSION = 1
SWEEP_PARAMS = ("gamma", "N", "tf_init", "init_shape")


class ConfigError(ValueError):
    """A config field is missing, has the wrong type, or is unknown."""


# ---------------------------------------------------------------------------
# Config loading and validation
# ---------------------------------------------------------------------------

_TOP_KEYS = {
    "schema_version", "name", "workspace", "dynamics", "distribution",
    "k_max", "normalizer", "quadrature_resolution", "N", "tf_init", "gamma",
    "u_max", "u_lower", "u_upper", "x0", "xf", "terminal_equality",
    "obstacles", "cbf", "tf_floor", "integrator", "mode", "t_f", "R",
    "init_shape", "noise_sigma", "solver", "seed", "output_dir", "sweep",
}
_WS_KEYS = {"lengths", "offsets"}
_DIST_KEYS = {"kind", "centers", "bandwidth", "weights", "values", "csv"}
_OBS_KEYS = {"center", "half_extents", "rotation"}
_CBF_KEYS = {"alpha", "margin"}
_SOLVER_KEYS = {
    "max_outer", "max_inner", "eta0", "eta_tf", "adagrad_eps", "rho0",
    "rho_growth", "rho_max", "tol_stationarity", "tol_eq", "tol_ineq",
    "tol_comp", "inner_tol0", "inner_tol_shrink", "inner_tol_floor",
    "accumulator_decay",
    "accumulator_reset", "restart_every", "clip_controls", "refine_duals",
    "seed",
}
_SWEEP_KEYS = set(SWEEP_PARAMS)


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object, got {type(section).__name__}")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def resolve_config_path(spec: str) -> Path:
    """Filesystem path, or the name of a bundled scenario."""
    path = Path(spec)
    if path.exists():
        return path
    name = spec if spec.endswith(".json") else spec + ".json"
    bundled = resources.files("ergotime.scenarios") / name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config {spec!r} not found on disk or among bundled scenarios")


def load_config(path_spec: str) -> dict:
    path = resolve_config_path(path_spec)
    try:
        with open(path) as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: top level must be an object")
    config.setdefault("name", path.stem)
    config["_base_dir"] = str(path.parent)
    return config


def _build_distribution(section, ws: Workspace, base_dir: str):
    _check_keys(section, _DIST_KEYS, "distribution")
    kind = section.get("kind")
    if kind == "uniform":
        return uniform(ws)
    if kind == "gaussian-mixture":
        if "centers" not in section or "bandwidth" not in section:
            raise ConfigError("gaussian-mixture distribution needs centers and bandwidth")
        return gaussian_mixture(
            ws,
            centers=section["centers"],
            bandwidth=section["bandwidth"],
            weights=section.get("weights"),
        )
    if kind == "gridded":
        if "values" in section:
            return gridded(ws, section["values"])
        if "csv" in section:
            return gridded_from_csv(Path(base_dir) / section["csv"], ws)
        raise ConfigError("gridded distribution needs values or csv")
    raise ConfigError(f"distribution.kind must be one of uniform, gaussian-mixture, gridded; got {kind!r}")


class BuiltScenario:
    """Everything a command needs, assembled from one validated config."""

    def __init__(self, spec, opts, tf_init, init_shape, noise_sigma, name, out_dir, echo):
        self.spec = spec
        self.opts = opts
        self.tf_init = tf_init
        self.init_shape = init_shape
        self.noise_sigma = noise_sigma
        self.name = name
        self.out_dir = out_dir
        self.echo = echo

    def guess(self) -> DecisionVector:
        return initial_guess(
            self.spec, self.tf_init, self.init_shape, noise_sigma=self.noise_sigma
        )


def build_scenario(config: dict, seed_override=None) -> BuiltScenario:
    """Validate a config dict and construct the problem objects.

    Raises :class:`ConfigError` (or a contract/domain error from the
    underlying constructors) on any invalid field; those all map to exit 2.
    """
    config = dict(config)
    base_dir = config.pop("_base_dir", ".")
    _check_keys(config, _TOP_KEYS, "config")
    version = config.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")

    for key in ("workspace", "dynamics", "distribution", "N", "tf_init", "x0"):
        if key not in config:
            raise ConfigError(f"missing required key {key!r}")

    ws_section = config["workspace"]
    _check_keys(ws_section, _WS_KEYS, "workspace")
    if "lengths" not in ws_section:
        raise ConfigError("workspace.lengths is required")
    ws = Workspace(lengths=ws_section["lengths"], offsets=ws_section.get("offsets"))

    model_name = config["dynamics"]
    if model_name not in MODELS:
        raise ConfigError(
            f"dynamics must be one of {sorted(MODELS)}, got {model_name!r}"
        )
    model = MODELS[model_name]()

    dist = _build_distribution(config["distribution"], ws, base_dir)
    k_max = int(config.get("k_max", 8))
    normalizer = config.get("normalizer", "orthonormal")
    basis = BasisSet.build(ws, k_max, normalizer)
    resolution = int(config.get("quadrature_resolution", DEFAULT_RESOLUTION))
    phi = phi_coefficients(dist, basis, ws, resolution)

    mode = Mode(config.get("mode", "time-optimal"))
    gamma = config.get("gamma")
    if mode == Mode.TIME_OPTIMAL and isinstance(gamma, (list, tuple)):
        raise ConfigError(
            "gamma is a list; `solve` needs a scalar (use `sweep --param gamma`)"
        )

    m = model.control_dim
    if "u_lower" in config or "u_upper" in config:
        if "u_max" in config:
            raise ConfigError("give u_max or u_lower/u_upper, not both")
        if not ("u_lower" in config and "u_upper" in config):
            raise ConfigError("u_lower and u_upper must be given together")
        u_lower, u_upper = config["u_lower"], config["u_upper"]
    elif "u_max" in config:
        u_max = config["u_max"]
        hi = np.full(m, float(u_max)) if np.isscalar(u_max) else np.asarray(u_max, float)
        u_lower, u_upper = -hi, hi
    else:
        raise ConfigError("control bounds required: u_max or u_lower/u_upper")

    obstacles = []
    for i, section in enumerate(config.get("obstacles", [])):
        _check_keys(section, _OBS_KEYS, f"obstacles[{i}]")
        obstacles.append(
            Obstacle(
                center=section["center"],
                half_extents=section["half_extents"],
                rotation=section.get("rotation"),
            )
        )
    cbf_section = config.get("cbf", {})
    _check_keys(cbf_section, _CBF_KEYS, "cbf")
    cbf = CbfParams(
        alpha=cbf_section.get("alpha", 0.1), margin=cbf_section.get("margin", 0.0)
    )

    xf = config.get("xf")
    if not config.get("terminal_equality", True):
        xf = None
    constraints = ConstraintSet(
        gamma=None if gamma is None else float(gamma),
        u_lower=u_lower,
        u_upper=u_upper,
        x0=config["x0"],
        xf=xf,
        obstacles=obstacles,
        cbf=cbf,
        tf_floor=config.get("tf_floor", 0.01),
    )

    seed = int(config.get("seed", 0))
    if seed_override is not None:
        seed = int(seed_override)
        config["seed"] = seed

    solver_section = dict(config.get("solver", {}))
    _check_keys(solver_section, _SOLVER_KEYS, "solver")
    solver_section.setdefault("seed", seed)
    try:
        opts = SolverOptions(**solver_section)
    except TypeError as exc:
        raise ConfigError(f"solver options: {exc}") from exc

    R = config.get("R")
    fixed_tf = config.get("t_f")
    if mode == Mode.FIXED_TIME and fixed_tf is None:
        raise ConfigError("fixed-time-baseline mode requires t_f")
    spec = ProblemSpec(
        model=model,
        ws=ws,
        basis=basis,
        phi=phi,
        constraints=constraints,
        N=int(config["N"]),
        integrator=IntegratorKind(config.get("integrator", "explicit-euler")),
        mode=mode,
        R=R,
        fixed_tf=fixed_tf,
        seed=seed,
    )

    init_shape = config.get("init_shape", "lerp")
    if init_shape not in INIT_SHAPES:
        raise ConfigError(f"init_shape must be one of {INIT_SHAPES}, got {init_shape!r}")
    sweep = config.get("sweep", {})
    _check_keys(sweep, _SWEEP_KEYS, "sweep")

    # echo: the fully resolved config, self-contained (gridded values inline)
    echo = {k: v for k, v in config.items() if not k.startswith("_")}
    if echo["distribution"].get("kind") == "gridded" and "csv" in echo["distribution"]:
        echo = json.loads(json.dumps(echo))
        echo["distribution"].pop("csv")
        echo["distribution"]["values"] = np.asarray(dist.values).tolist()
    echo.setdefault("schema_version", SCHEMA_VERSION)
    echo["seed"] = seed

    return BuiltScenario(
        spec=spec,
        opts=opts,
        tf_init=float(config["tf_init"]),
        init_shape=init_shape,
        noise_sigma=float(config.get("noise_sigma", 0.02)),
        name=str(config["name"]),
        out_dir=config.get("output_dir", "out"),
        echo=echo,
    )


# ---------------------------------------------------------------------------
# Artifact writing
# ---------------------------------------------------------------------------

def _write_json(path: Path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _block_violations(bundle) -> dict:
    lay = bundle.layout
    out = {}
    for name, sl in lay.eq.items():
        rows = bundle.eq[sl]
        out[name] = float(np.abs(rows).max()) if rows.size else 0.0
    for name, sl in lay.ineq.items():
        rows = bundle.ineq[sl]
        out[name] = float(np.maximum(rows, 0.0).max()) if rows.size else 0.0
    return out


def write_trajectory_artifact(built: BuiltScenario, result, out_dir: Path) -> Path:
    asm = Assembly(result.decision, built.spec)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "trajectory",
        "name": built.name,
        "scenario": built.echo,
        "t_f": float(asm.t_f),
        "dt": float(asm.dt),
        "position_columns": [int(i) for i in built.spec.model.g_selector],
        "x_knots": result.decision.x_knots.tolist(),
        "u_knots": result.decision.u_knots.tolist(),
        "ergodic_metric": float(asm.e_hat),
        "objective": float(asm.objective),
        "converged": bool(result.converged),
        "kkt": result.report.as_dict(),
        "max_violations": _block_violations(asm.bundle),
        "multipliers": {
            "eq": result.state.multipliers.eq.tolist(),
            "ineq": result.state.multipliers.ineq.tolist(),
        },
        "history_csv": f"{built.name}.history.csv",
    }
    path = out_dir / f"{built.name}.trajectory.json"
    _write_json(path, payload)
    history_path = out_dir / payload["history_csv"]
    with open(history_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("iteration", "objective", "max_eq", "max_ineq", "stationarity"))
        for row in result.history:
            writer.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
    _write_json(out_dir / f"{built.name}.kkt.json", result.report.as_dict())
    return path


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

INPUT_ERRORS = (ConfigError, ContractError, DomainError, OSError)


def cmd_solve(config_path: str, out_dir=None, seed=None) -> int:
    try:
        built = build_scenario(load_config(config_path), seed_override=seed)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(out_dir or built.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = solve(built.spec, built.opts, built.guess())
    except DivergedError as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return 1
    path = write_trajectory_artifact(built, result, out)
    status = "converged" if result.converged else "NOT converged"
    print(f"{built.name}: {status}, t_f={result.decision.t_f:.4f} s -> {path}")
    return 0 if result.converged else 1


def _sweep_values(config: dict, param: str):
    sweep = config.get("sweep", {})
    values = sweep.get(param)
    if values is None and param == "gamma" and isinstance(config.get("gamma"), (list, tuple)):
        values = config["gamma"]
    if not values:
        raise ConfigError(f"no sweep values for parameter {param!r}")
    return list(values)


def _apply_param(config: dict, param: str, value):
    config = json.loads(json.dumps({k: v for k, v in config.items() if not k.startswith("_")}))
    config.pop("sweep", None)
    if param == "gamma":
        config["gamma"] = float(value)
    elif param == "N":
        config["N"] = int(value)
    elif param == "tf_init":
        config["tf_init"] = float(value)
    elif param == "init_shape":
        config["init_shape"] = value
    else:
        raise ConfigError(f"unsupported sweep parameter {param!r}")
    return config


def _sweep_row(args) -> dict:
    base_config, base_dir, param, value, index, out_dir, seed = args
    row = {"index": index, "parameter": param, "value": value}
    started = time.perf_counter()
    try:
        config = _apply_param(base_config, param, value)
        config["name"] = f"{base_config['name']}__{param}_{index:02d}"
        config["_base_dir"] = base_dir
        built = build_scenario(config, seed_override=seed)
        result = solve(built.spec, built.opts, built.guess())
        write_trajectory_artifact(built, result, Path(out_dir))
        asm = Assembly(result.decision, built.spec)
        row.update(
            t_f=float(asm.t_f),
            ergodic_metric=float(asm.e_hat),
            feasible=bool(
                result.report.max_eq_violation <= built.opts.tol_eq
                and result.report.max_ineq_violation <= built.opts.tol_ineq
            ),
            converged=bool(result.converged),
            error="",
        )
    except (*INPUT_ERRORS, DivergedError) as exc:
        row.update(
            t_f=float("nan"),
            ergodic_metric=float("nan"),
            feasible=False,
            converged=False,
            error=str(exc),
        )
    row["wall_time_s"] = time.perf_counter() - started
    return row


def cmd_sweep(config_path: str, param: str, out_dir=None, seed=None, jobs: int = 1) -> int:
    try:
        if param not in SWEEP_PARAMS:
            raise ConfigError(f"--param must be one of {SWEEP_PARAMS}, got {param!r}")
        config = load_config(config_path)
        values = _sweep_values(config, param)
        # validate everything else on the first row's resolved config
        probe = _apply_param(config, param, values[0])
        probe["name"] = config["name"]
        probe["_base_dir"] = config.get("_base_dir", ".")
        built = build_scenario(probe, seed_override=seed)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(out_dir or built.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (config, config.get("_base_dir", "."), param, value, i, str(out), seed)
        for i, value in enumerate(values)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]

    csv_path = out / f"{built.name}.sweep_{param}.csv"
    tf_values = [r["t_f"] for r in rows if np.isfinite(r["t_f"])]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ("parameter", "value", "t_f", "ergodic_metric", "feasible",
             "converged", "wall_time_s", "error")
        )
        for r in rows:
            writer.writerow(
                (
                    r["parameter"],
                    r["value"],
                    repr(float(r["t_f"])),
                    repr(float(r["ergodic_metric"])),
                    r["feasible"],
                    r["converged"],
                    f"{r['wall_time_s']:.3f}",
                    r["error"],
                )
            )
        if tf_values:
            writer.writerow(("summary", "mean_tf", repr(float(np.mean(tf_values))), "", "", "", "", ""))
            writer.writerow(("summary", "std_tf", repr(float(np.std(tf_values))), "", "", "", "", ""))
    failures = sum(1 for r in rows if not r["converged"])
    print(f"{built.name}: swept {param} over {len(values)} values, "
          f"{failures} non-converged -> {csv_path}")
    return 0 if failures == 0 else 1


def cmd_verify(artifact_path: str) -> int:
    path = Path(artifact_path)
    try:
        with open(path) as fh:
            artifact = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    required = {"schema_version", "scenario", "x_knots", "u_knots", "t_f",
                "ergodic_metric", "multipliers"}
    missing = required - set(artifact)
    if missing or artifact.get("schema_version") != SCHEMA_VERSION:
        print(f"error: artifact schema mismatch (missing {sorted(missing)})", file=sys.stderr)
        return 2
    try:
        built = build_scenario(dict(artifact["scenario"]))
        decision = DecisionVector(
            x_knots=np.asarray(artifact["x_knots"], dtype=float),
            u_knots=np.asarray(artifact["u_knots"], dtype=float),
            t_f=float(artifact["t_f"]),
        )
        built.spec.check_decision(decision)
        multipliers = Multipliers(
            eq=np.asarray(artifact["multipliers"]["eq"], dtype=float),
            ineq=np.asarray(artifact["multipliers"]["ineq"], dtype=float),
        )
    except INPUT_ERRORS as exc:
        print(f"error: artifact does not reconstruct: {exc}", file=sys.stderr)
        return 2

    asm = Assembly(decision, built.spec)
    stored = float(artifact["ergodic_metric"])
    consistent = abs(asm.e_hat - stored) <= 1e-9 * max(1.0, abs(asm.e_hat))
    kkt = kkt_residuals(decision, built.spec, multipliers, built.opts)
    ext = pmp.lift_and_costate(decision, built.spec, multipliers)
    report = pmp.check_conditions(ext, decision, built.spec)

    stem = path.name
    for suffix in (".trajectory.json", ".json"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
            break
    kkt_payload = dict(kkt.as_dict())
    kkt_payload.update(
        metric_consistent=bool(consistent),
        stored_metric=stored,
        recomputed_metric=float(asm.e_hat),
    )
    _write_json(path.parent / f"{stem}.verify_kkt.json", kkt_payload)
    _write_json(path.parent / f"{stem}.verify_pmp.json", report.as_dict())
    flag = "" if consistent else "  [stored metric does not match knots]"
    print(
        f"{stem}: kkt_converged={kkt.converged}, "
        f"stationarity={kkt.stationarity_norm:.3e}, "
        f"input_stationarity={report.input_stationarity_fraction:.3f}{flag}"
    )
    return 0


def cmd_coeffs(config_path: str, out_dir=None) -> int:
    try:
        built = build_scenario(load_config(config_path))
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(out_dir or built.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    basis = built.spec.basis
    path = out / f"{built.name}.coeffs.csv"
    v = built.spec.ws.dims
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"k_{i}" for i in range(v)] + ["phi_k"])
        for ks, value in zip(basis.ks, built.spec.phi.values):
            writer.writerow([int(k) for k in ks] + [repr(float(value))])
    print(f"{built.name}: wrote {basis.size} coefficients -> {path}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ergotime",
        description="Minimum-time ergodic coverage trajectory optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one scenario config")
    p_solve.add_argument("--config", required=True, help="config path or bundled scenario name")
    p_solve.add_argument("--out", help="output directory (overrides config)")
    p_solve.add_argument("--seed", type=int, help="seed override")

    p_sweep = sub.add_parser("sweep", help="solve across a parameter list")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p_sweep.add_argument("--out")
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel rows")

    p_verify = sub.add_parser("verify", help="re-check a trajectory artifact")
    p_verify.add_argument("artifact", help="path to a .trajectory.json file")

    p_coeffs = sub.add_parser("coeffs", help="export density coefficients as CSV")
    p_coeffs.add_argument("--config", required=True)
    p_coeffs.add_argument("--out")

    args = parser.parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args.config, out_dir=args.out, seed=args.seed)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.param, out_dir=args.out, seed=args.seed, jobs=args.jobs)
    if args.command == "verify":
        return cmd_verify(args.artifact)
    return cmd_coeffs(args.config, out_dir=args.out)


if __name__ == "__main__":
    sys.exit(main())
