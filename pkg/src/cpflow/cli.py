"""Command-line scenario runner.

``cpflow [COMMAND] [--config PATH] [--out DIR] [--seed N] [--threads N] [--quiet]``

Commands: ``point-run``, ``point-sweep``, ``quasi-run``, ``quasi-sweep`` and
``check``.  The config file is JSON validated against ``CONFIG_SCHEMA``
(unknown keys rejected); anything omitted takes the command's default from
``DEFAULTS``.  Exit status: 0 PASS, 2 FAIL, 1 error.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import checks
from . import linearization_lab as lab
from . import material as mat
from . import point_solver as ps
from . import quasistatic as qs
from ._backend import BACKEND_NAME
from .errors import ConfigError, CpflowError

COMMANDS = ("point-run", "point-sweep", "quasi-run", "quasi-sweep", "check")
EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_MAT3 = {"type": "array", "items": _VEC3, "minItems": 3, "maxItems": 3}
_NUMS = {"type": "array", "items": _NUM, "minItems": 2}


def _obj(props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props}


CONFIG_SCHEMA: dict = _obj({
    "command": {"enum": list(COMMANDS)},
    "seed": {"type": "integer", "minimum": 0},
    "output": {"type": "string"},
    "threads": {"type": "integer", "minimum": 1},
    "material": _obj({
        "elastic": _obj({
            "a": _POS, "b": _POS,
            "family": {"enum": ["neo-hookean", "ogden"]},
            "ogden_a": {"type": "array", "items": _NUM},
            "ogden_gamma": {"type": "array", "items": _NUM},
            "ogden_b": {"type": "array", "items": _NUM},
            "ogden_delta": {"type": "array", "items": _NUM},
            "ogden_k": _POS,
        }),
        "plastic": _obj({"h": _POS, "r_k": {"type": ["number", "null"]}}),
        "r": _POS,
        "mu": {"type": "number", "minimum": 0},
    }),
    "load": _obj({
        "kind": {"enum": ["default", "zero", "proportional", "samples"]},
        "direction": _MAT3,
        "horizon": _POS,
        "scale": _NUM,
        "times": _NUMS,
        "values": _NUMS,
        "sample_c": {"type": "array", "items": _MAT3, "minItems": 2},
        "traction": _VEC3,
        "body": _VEC3,
    }),
    "solver": _obj({
        "steps": {"type": "integer", "minimum": 1},
        "margin_samples": {"type": "integer", "minimum": 1},
        "epsilons": {"type": "array", "items": _POS, "minItems": 2},
        "rho": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "threshold_z": _POS,
        "dissipation_scale": _POS,
        "mesh": {"type": "array", "items": {"type": "integer", "minimum": 1},
                 "minItems": 3, "maxItems": 3},
        "lengths": {"type": "array", "items": _POS, "minItems": 3, "maxItems": 3},
        "alt_tol": _POS,
        "max_sweeps": {"type": "integer", "minimum": 1},
        "quick": {"type": "boolean"},
    }),
})

_POINT_MATERIAL = mat.MaterialModel().to_dict()
_GRID_MATERIAL = mat.MaterialModel(plastic=mat.PlasticParams(0.5, 3.0), r=0.1, mu=0.01).to_dict()

DEFAULTS: dict = {
    "point-run": {
        "material": _POINT_MATERIAL,
        "load": {"kind": "default", "horizon": 0.2},
        "solver": {"steps": 256, "margin_samples": 32},
    },
    "point-sweep": {
        "material": _POINT_MATERIAL,
        "load": {"kind": "proportional", "horizon": 0.1},
        "solver": {"steps": 64, "epsilons": list(lab.DEFAULT_EPSILONS), "rho": None,
                   "threshold_z": 0.05, "dissipation_scale": 1.0},
    },
    "quasi-run": {
        "material": _GRID_MATERIAL,
        "load": {"horizon": 1.0, "traction": [0.2, 0.0, 0.0], "body": [0.0, 0.0, 0.0]},
        "solver": {"steps": 16, "mesh": [2, 2, 2], "lengths": [1.0, 1.0, 1.0],
                   "alt_tol": 1e-10, "max_sweeps": 50},
    },
    "quasi-sweep": {
        "material": _GRID_MATERIAL,
        "load": {"horizon": 1.0, "traction": [0.12, 0.0, 0.0], "body": [0.0, 0.0, 0.0]},
        "solver": {"steps": 16, "mesh": [2, 2, 2], "lengths": [1.0, 1.0, 1.0],
                   "epsilons": [0.1, 0.03, 0.01], "rho": None, "dissipation_scale": 1.0,
                   "alt_tol": 1e-10, "max_sweeps": 50},
    },
    "check": {"solver": {"quick": False}},
}

# per-step energy slack of the grid solver (rounding of a sum over elements)
GRID_STEP_SLACK = 1e-12


# ------------------------------------------------------------------ config

def _key_path(path) -> str:
    return ".".join(str(p) for p in path) or "<root>"


def validate_config(cfg: dict) -> None:
    """Raise ``ConfigError`` naming the first offending key."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if not errors:
        return
    err = errors[0]
    where = list(err.absolute_path)
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        name = _key_path(where + extra[:1])
        raise ConfigError(f"unknown config key '{name}'")
    raise ConfigError(f"invalid value for config key '{_key_path(where)}': {err.message}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(user: dict, command: str | None = None, seed: int | None = None,
                   threads: int | None = None, output: str | None = None) -> dict:
    """Validated user config merged over the command defaults.

    Command-line values take precedence over the file; ``CPFLOW_THREADS``
    is the fallback for the thread count.
    """
    validate_config(user)
    command = command or user.get("command")
    if command is None:
        raise ConfigError("config key 'command' is required when no command is given")
    if command not in COMMANDS:
        raise ConfigError(f"invalid value for config key 'command': {command!r}")
    cfg = _merge(DEFAULTS[command], user)
    cfg["command"] = command
    cfg["seed"] = int(seed if seed is not None else user.get("seed", 0))
    if threads is None:
        threads = user.get("threads")
    if threads is None:
        threads = lab.default_threads()
    cfg["threads"] = max(1, int(threads))
    cfg["output"] = output or user.get("output") or "cpflow-out"
    return cfg


def _material(cfg: dict) -> mat.MaterialModel:
    try:
        return mat.MaterialModel.from_dict(cfg["material"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value in config key 'material': {exc}") from exc


# ----------------------------------------------------------------- outputs

def _finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise CpflowError(f"non-finite value {x!r} in run summary")
    return x


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _gnuplot_trajectory(out: Path, csv_name: str, columns: list[tuple[int, str]]) -> None:
    plots = ", ".join(f"'{csv_name}' using 1:{c} with lines title '{t}'" for c, t in columns)
    out.joinpath("trajectory.gp").write_text(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\n"
        f"plot {plots}\n", encoding="utf-8")


def _gnuplot_convergence(out: Path, columns: list[tuple[int, str]]) -> None:
    plots = ", ".join(f"'convergence.csv' using 1:{c} with linespoints title '{t}'"
                      for c, t in columns)
    out.joinpath("convergence.gp").write_text(
        "set datafile separator ','\nset logscale xy\nset xlabel 'eps'\n"
        f"plot {plots}\n", encoding="utf-8")


# ---------------------------------------------------------------- commands

def _point_load(cfg: dict, m: mat.MaterialModel) -> ps.LoadProgram:
    ld = cfg["load"]
    kind = ld.get("kind", "default")
    horizon = ld.get("horizon", 0.2)
    if kind == "default":
        return ps.default_plastic_program(m, horizon)
    if kind == "zero":
        return ps.LoadProgram.constant(np.eye(3), horizon)
    if kind == "proportional":
        return ps.LoadProgram.proportional(ld.get("direction", ps.DEFAULT_DIRECTION), horizon,
                                           ld.get("times"), ld.get("values"), ld.get("scale", 1.0))
    if "times" not in ld or "sample_c" not in ld:
        raise ConfigError("config key 'load.sample_c' and 'load.times' are required for samples")
    return ps.LoadProgram.from_samples(ld["times"], ld["sample_c"])


def run_point(cfg: dict, out: Path) -> tuple[bool, dict]:
    m = _material(cfg)
    load = _point_load(cfg, m)
    sv = cfg["solver"]
    traj = ps.solve(load, np.eye(3), sv["steps"], m, margin_stride=1,
                    margin_samples=sv["margin_samples"], seed=cfg["seed"])
    traj.to_csv(out / "trajectory.csv")
    _gnuplot_trajectory(out, "trajectory.csv", [(8, "energy"), (9, "dissipation")])
    defects = traj.step_inequality_defects()
    tol = np.array([ps.stability_tolerance(e) for e in traj.energy])
    margin_ok = bool(np.all(traj.margins >= tol))
    drift = traj.det_drift()
    summary = {
        "steps": traj.steps,
        "dissipation": _finite(traj.dissipation),
        "balance_residual": _finite(traj.balance_residual),
        "max_step_defect": _finite(np.max(defects)) if len(defects) else 0.0,
        "min_margin": _finite(np.min(traj.margins)),
        "det_drift": _finite(drift),
    }
    passed = bool((len(defects) == 0 or np.max(defects) <= 0.0) and margin_ok and drift <= 1e-10)
    return passed, summary


def run_point_sweep(cfg: dict, out: Path) -> tuple[bool, dict]:
    m = _material(cfg)
    ld, sv = cfg["load"], cfg["solver"]
    program = lab.StrainProgram.proportional(ld.get("direction", ps.DEFAULT_DIRECTION),
                                             ld.get("horizon", 0.1), ld.get("times"),
                                             ld.get("values"))
    try:
        sweep = lab.SweepConfig(material=m, epsilons=tuple(sv["epsilons"]), program=program,
                                steps=sv["steps"], rho=sv["rho"],
                                thresholds={"z": sv["threshold_z"]},
                                dissipation_scale=sv["dissipation_scale"],
                                threads=cfg["threads"], seed=cfg["seed"])
    except ValueError as exc:
        raise ConfigError(f"invalid value in config key 'solver': {exc}") from exc
    report = lab.epsilon_sweep(sweep)
    report.to_csv(out / "convergence.csv")
    lab.solve_limit(sweep).to_csv(out / "trajectory.csv")
    _gnuplot_convergence(out, [(2, "err_z"), (3, "err_diss"), (4, "err_energy")])
    _gnuplot_trajectory(out, "trajectory.csv", [(8, "energy"), (9, "dissipation")])
    summary = {k: v for k, v in report.summary().items()}
    return bool(report.passed), summary


def _grid_setup(cfg: dict):
    m = _material(cfg)
    ld, sv = cfg["load"], cfg["solver"]
    try:
        mesh = qs.Mesh(*sv["mesh"], lengths=tuple(sv["lengths"]))
        load = qs.LoadSpec(ld.get("horizon", 1.0), tuple(ld["traction"]), tuple(ld["body"]),
                           ld.get("times"), ld.get("values"))
    except ValueError as exc:
        raise ConfigError(f"invalid value in config key 'load' or 'solver': {exc}") from exc
    scfg = qs.SolverConfig(alt_tol=sv["alt_tol"], max_sweeps=sv["max_sweeps"], seed=cfg["seed"])
    return m, mesh, load, scfg


def run_quasi(cfg: dict, out: Path) -> tuple[bool, dict]:
    m, mesh, load, scfg = _grid_setup(cfg)
    traj = qs.quasistatic_solve(mesh, m, load, cfg["solver"]["steps"], cfg=scfg)
    gm = qs.GridModel(mesh, m, load)
    traj.to_csv(out / "fields.csv", mesh, gm)
    traj.summary_csv(out / "trajectory.csv")
    _gnuplot_trajectory(out, "trajectory.csv", [(2, "energy"), (3, "dissipation")])
    defects = traj.step_inequality_defects()
    slack = GRID_STEP_SLACK * (1.0 + np.abs(traj.energy[1:]))
    inc = traj.increases[1:]
    passed = bool(np.all(defects <= slack) and np.all(inc <= slack) and not traj.stalled)
    summary = {
        "steps": traj.steps,
        "dissipation": _finite(traj.dissipation),
        "balance_residual": _finite(traj.balance_residual),
        "max_step_defect": _finite(np.max(defects)),
        "max_alternating_increase": _finite(np.max(inc)),
        "stalled_steps": list(map(int, traj.stalled)),
        "max_sweeps": int(np.max(traj.sweeps)),
    }
    return passed, summary


def run_quasi_sweep(cfg: dict, out: Path) -> tuple[bool, dict]:
    m, mesh, load, scfg = _grid_setup(cfg)
    sv = cfg["solver"]
    eps = list(sv["epsilons"])
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("invalid value for config key 'solver.epsilons': must be strictly decreasing")
    report = qs.quasistatic_epsilon_sweep(mesh, m, load, eps, sv["steps"], scfg, sv["rho"],
                                          sv["dissipation_scale"], threads=cfg["threads"])
    report.to_csv(out / "convergence.csv")
    _gnuplot_convergence(out, [(2, "err_u"), (3, "err_z"), (6, "gap_d"), (7, "gap_e")])
    return bool(report.passed), report.summary()


def run_check(cfg: dict, out: Path) -> tuple[bool, dict]:
    report = checks.check_suites(cfg["seed"], quick=cfg["solver"].get("quick", False))
    report.to_csv(out / "check.csv")
    summary = {r.key: {"worst": _finite(r.worst), "tolerance": r.tolerance,
                       "samples": r.samples, "passed": r.passed} for r in report.rows}
    return report.passed, {"rows": summary, "table": report.table().splitlines()}


_RUNNERS = {
    "point-run": run_point,
    "point-sweep": run_point_sweep,
    "quasi-run": run_quasi,
    "quasi-sweep": run_quasi_sweep,
    "check": run_check,
}


def run(cfg: dict, quiet: bool = False) -> int:
    """Execute a resolved config; returns the exit status."""
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    passed, summary = _RUNNERS[cfg["command"]](cfg, out)
    status = "PASS" if passed else "FAIL"
    _write_json(out / "run.json", {"command": cfg["command"], "config": cfg, "summary": summary,
                                   "status": status, "backend": BACKEND_NAME,
                                   "version": __version__})
    if not quiet:
        if cfg["command"] == "check":
            print("\n".join(summary["table"]))
        else:
            for k, v in summary.items():
                print(f"{k}: {v}")
        print(f"{cfg['command']}: {status}  (artifacts in {out})")
    return EXIT_PASS if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpflow", description="Finite-plasticity scenario runner.")
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="scenario to run (overrides the config's 'command')")
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--out", help="output directory (default: config 'output' or ./cpflow-out)")
    p.add_argument("--seed", type=int, help="seed for all sampling (default 0)")
    p.add_argument("--threads", type=int, help="worker threads for sweep legs (env CPFLOW_THREADS)")
    p.add_argument("--quiet", action="store_true", help="print nothing on success")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        user = {}
        if args.config is not None:
            try:
                user = json.loads(args.config.read_text(encoding="utf-8"))
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from exc
            if not isinstance(user, dict):
                raise ConfigError("config file must hold a JSON object")
        cfg = resolve_config(user, args.command, args.seed, args.threads, args.out)
        return run(cfg, args.quiet)
    except (CpflowError, ValueError, ArithmeticError) as exc:
        print(f"cpflow: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
