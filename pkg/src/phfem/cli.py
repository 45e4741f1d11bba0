"""Command-line front end.

    phfem <action> --config cfg.json [--out DIR] [--threads N] [--fix-orientation]

Actions: check, simulate, modes, export-matrices.  Every run writes a
manifest.json into the output directory echoing the resolved
configuration, so results stay reproducible from their folder alone.

Exit codes: 0 success, 2 configuration problems, 3 mesh problems,
4 assembly/structure problems, 5 solver problems.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import FESpaces, assemble_plate, derivative_annihilation
from .boundary import (
    BCCondition,
    BCSpec,
    ConstantSignal,
    SineSignal,
    split_ports,
)
from .errors import (
    AssemblyError,
    ConfigError,
    MeshError,
    PhfemError,
    SolverError,
)
from .integrate import simulate
from .material import BeamMaterial, PlateMaterial
from .mesh import make_interval, parse_mesh2d, structured_rectangle
from .phcore import check_dirac, write_coordinate_matrix
from .spectral import modal_analysis
from .timoshenko import assemble_beam

_EXIT_CODES = {ConfigError: 2, MeshError: 3, AssemblyError: 4, SolverError: 5}

_ACTIONS = ("check", "simulate", "modes", "export-matrices")

_TOP_KEYS = {
    "model",
    "mesh",
    "material",
    "formulation",
    "control_variant",
    "strain_family",
    "boundary",
    "simulate",
    "modes",
    "check",
}


def _require(cfg: dict, key: str, ctx: str):
    if key not in cfg:
        raise ConfigError(f"missing {ctx} key {key!r}")
    return cfg[key]


def _parse_signal(obj) -> ConstantSignal | SineSignal:
    if isinstance(obj, (int, float)):
        return ConstantSignal(float(obj))
    if not isinstance(obj, dict):
        raise ConfigError(f"signal must be a number or an object, got {obj!r}")
    kind = _require(obj, "type", "signal")
    if kind == "constant":
        return ConstantSignal(float(obj.get("value", 0.0)))
    if kind == "sine":
        return SineSignal(
            amplitude=float(_require(obj, "amplitude", "sine signal")),
            frequency=float(_require(obj, "frequency", "sine signal")),
            phase=float(obj.get("phase", 0.0)),
        )
    raise ConfigError(f"unknown signal type {kind!r}")


def _parse_condition(obj) -> BCCondition:
    if isinstance(obj, str):
        return BCCondition(obj)
    if isinstance(obj, dict):
        kind = _require(obj, "kind", "boundary condition")
        signals = tuple(_parse_signal(s) for s in obj.get("signals", ()))
        return BCCondition(kind, signals)
    raise ConfigError(f"boundary condition must be a string or object, got {obj!r}")


def _build_mesh(cfg: dict, fix_orientation: bool):
    spec = _require(cfg, "mesh", "configuration")
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("mesh section must hold exactly one of: file, rectangle, interval")
    (kind, body), = spec.items()
    if kind == "file":
        path = Path(body)
        if not path.exists():
            raise ConfigError(f"mesh file {path} does not exist")
        return parse_mesh2d(path.read_text(), fix_orientation=fix_orientation)
    if kind == "rectangle":
        return structured_rectangle(
            float(_require(body, "a", "rectangle mesh")),
            float(_require(body, "b", "rectangle mesh")),
            int(_require(body, "nx", "rectangle mesh")),
            int(_require(body, "ny", "rectangle mesh")),
        )
    if kind == "interval":
        return make_interval(
            float(_require(body, "length", "interval mesh")),
            int(_require(body, "n", "interval mesh")),
        )
    raise ConfigError(f"unknown mesh kind {kind!r}")


def _build_model(cfg: dict, fix_orientation: bool):
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration key {sorted(unknown)[0]!r}")
    model = _require(cfg, "model", "configuration")
    mesh = _build_mesh(cfg, fix_orientation)
    mat_cfg = dict(_require(cfg, "material", "configuration"))
    variant = cfg.get("control_variant", "dynamic")
    if model == "mindlin":
        try:
            material = PlateMaterial(**mat_cfg)
        except TypeError as exc:
            raise ConfigError(f"bad plate material: {exc}") from None
        spaces = FESpaces(strain_family=cfg.get("strain_family", "p1"))
        return assemble_plate(
            mesh,
            material,
            spaces,
            formulation=cfg.get("formulation", "vectorial"),
            control_variant=variant,
        )
    if model == "timoshenko":
        try:
            material = BeamMaterial(**mat_cfg)
        except TypeError as exc:
            raise ConfigError(f"bad beam material: {exc}") from None
        return assemble_beam(mesh, material, control_variant=variant)
    raise ConfigError(f"unknown model {model!r}")


def _build_bcs(cfg: dict, model) -> BCSpec:
    section = cfg.get("boundary")
    if section is None:
        tags = model.tags if hasattr(model, "tags") else [p.tag for p in model.ports]
        return BCSpec({int(t): BCCondition("free") for t in tags})
    if not isinstance(section, dict):
        raise ConfigError("boundary section must map tags to conditions")
    conditions = {}
    for key, val in section.items():
        try:
            tag = int(key)
        except ValueError:
            raise ConfigError(f"boundary tag {key!r} is not an integer") from None
        conditions[tag] = _parse_condition(val)
    return BCSpec(conditions)


def _initial_state(cfg: dict, n: int) -> np.ndarray:
    init = cfg.get("initial", {"kind": "zero"})
    if isinstance(init, str):
        init = {"kind": init}
    kind = init.get("kind", "zero")
    if kind == "zero":
        return np.zeros(n)
    if kind == "random":
        rng = np.random.default_rng(int(init.get("seed", 0)))
        return float(init.get("scale", 1.0)) * rng.standard_normal(n)
    raise ConfigError(f"unknown initial state kind {kind!r}")


def _constant_annihilation(model) -> dict:
    if hasattr(model, "mesh") and hasattr(model.mesh, "triangles"):
        return derivative_annihilation(
            model.mesh, model.spaces, control_variant=model.control_variant
        )
    from . import fem

    dx = fem.interval_deriv(model.mesh)
    num = float(np.max(np.abs(dx @ np.ones(dx.shape[1]))))
    den = float(np.max(np.abs(dx) @ np.ones(dx.shape[1])))
    return {"d_dx": num / den if den else 0.0}


def _action_check(model, csys, cfg: dict, out: Path) -> tuple[dict, bool]:
    opts = cfg.get("check", {})
    tol = float(opts.get("tol", 1e-12))
    samples = int(opts.get("samples", 100))
    system = csys.system

    skew = (system.J + system.J.T)
    skew_res = float(np.max(np.abs(skew.data))) if skew.nnz else 0.0
    j_scale = float(np.max(np.abs(system.J.data))) if system.J.nnz else 1.0
    qsym = (system.Q - system.Q.T)
    qsym_res = float(np.max(np.abs(qsym.data))) if qsym.nnz else 0.0
    q_scale = float(np.max(np.abs(system.Q.data))) if system.Q.nnz else 1.0
    dirac = check_dirac(system, n_samples=samples, tol=tol)
    annih = _constant_annihilation(model)

    report = {
        "n_dofs": system.n,
        "n_ports": system.n_ports,
        "skew_residual_rel": skew_res / j_scale,
        "energy_symmetry_rel": qsym_res / q_scale,
        "mass_spd": True,  # certified blockwise at assembly time
        "dirac_samples": dirac.n_samples,
        "dirac_max_residual_rel": dirac.max_residual,
        "constant_annihilation_rel": annih,
        "constraints_kept": int(csys.n_constraints),
        "constraints_dropped": int(len(csys.dropped_ports)),
        "prescribed_inputs": int(len(csys.f_ports)),
        "tol": tol,
    }
    ok = (
        report["skew_residual_rel"] <= tol
        and report["energy_symmetry_rel"] <= tol
        and dirac.ok
        and all(v <= 1e-13 for v in annih.values())
    )
    report["ok"] = ok
    (out / "check.json").write_text(json.dumps(report, indent=2) + "\n")
    return report, ok


def _action_simulate(csys, cfg: dict, out: Path) -> dict:
    opts = cfg.get("simulate")
    if not isinstance(opts, dict):
        raise ConfigError("simulate action needs a 'simulate' section")
    T = float(_require(opts, "T", "simulate"))
    dt = float(_require(opts, "dt", "simulate"))
    a0 = _initial_state(opts, csys.system.n)
    traj = simulate(csys, a0, T, dt, record_states=bool(opts.get("record_states", False)))
    traj.to_csv(out / "trajectory.csv")
    summary = {
        "steps": traj.n_steps,
        "dt": dt,
        "T": T,
        "H_initial": float(traj.hamiltonian[0]),
        "H_final": float(traj.hamiltonian[-1]),
        "delta_H": float(traj.hamiltonian[-1] - traj.hamiltonian[0]),
        "injected_work": traj.injected_work,
        "multiplier_work": traj.multiplier_work,
        "max_abs_power_residual": float(np.max(np.abs(traj.power_residual)))
        if traj.n_steps
        else 0.0,
        "max_constraint_residual": float(np.max(traj.constraint_residual)),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def _action_modes(csys, cfg: dict, out: Path) -> dict:
    opts = cfg.get("modes", {})
    n_modes = int(opts.get("n_modes", 10))
    result = modal_analysis(csys, n_modes=n_modes)
    result.to_csv(out / "modes.csv")
    summary = {
        "frequencies_hz": [float(f) for f in result.frequencies_hz],
        "max_pencil_residual": float(np.max(result.pencil_residual))
        if result.n_modes
        else 0.0,
        "max_constraint_residual": float(np.max(result.constraint_residual))
        if result.n_modes
        else 0.0,
    }
    (out / "modes.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def _action_export(model, csys, out: Path) -> dict:
    system = csys.system
    names = {"M": system.M, "Q": system.Q, "J": system.J, "B": system.B}
    for name, mat in names.items():
        write_coordinate_matrix(mat, out / f"{name}.txt")
    (out / "ports.json").write_text(json.dumps(model.port_map(), indent=2) + "\n")
    return {"matrices": sorted(names), "nnz": {k: int(v.nnz) for k, v in names.items()}}


def _apply_threads(n: int | None) -> int | None:
    if n is None:
        env = os.environ.get("PHFEM_THREADS")
        n = int(env) if env else None
    if n is not None:
        if n < 1:
            raise ConfigError("thread count must be positive")
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)
        try:
            from threadpoolctl import threadpool_limits

            threadpool_limits(limits=n)
        except ImportError:
            pass
    return n


def _resolved_config(cfg: dict, model) -> dict:
    """Echo of the configuration with defaults materialized."""
    out = dict(cfg)
    out.setdefault("control_variant", "dynamic")
    if out.get("model") == "mindlin":
        out.setdefault("formulation", "vectorial")
        out.setdefault("strain_family", "p1")
    if "boundary" not in out:
        tags = model.tags if hasattr(model, "tags") else [p.tag for p in model.ports]
        out["boundary"] = {str(int(t)): "free" for t in tags}
    if "simulate" in out and isinstance(out["simulate"], dict):
        sim = dict(out["simulate"])
        sim.setdefault("initial", {"kind": "zero"})
        sim.setdefault("record_states", False)
        out["simulate"] = sim
    if "modes" in out and isinstance(out["modes"], dict):
        m = dict(out["modes"])
        m.setdefault("n_modes", 10)
        out["modes"] = m
    if "check" in out and isinstance(out["check"], dict):
        c = dict(out["check"])
        c.setdefault("tol", 1e-12)
        c.setdefault("samples", 100)
        out["check"] = c
    return out


def run(action: str, cfg: dict, out_dir, fix_orientation: bool = False, threads=None) -> int:
    threads = _apply_threads(threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    model = _build_model(cfg, fix_orientation)
    bcs = _build_bcs(cfg, model)
    csys = split_ports(model, bcs)

    ok = True
    if action == "check":
        result, ok = _action_check(model, csys, cfg, out)
    elif action == "simulate":
        result = _action_simulate(csys, cfg, out)
    elif action == "modes":
        result = _action_modes(csys, cfg, out)
    elif action == "export-matrices":
        result = _action_export(model, csys, out)
    else:
        raise ConfigError(f"unknown action {action!r}")

    manifest = {
        "version": __version__,
        "action": action,
        "threads": threads,
        "fix_orientation": fix_orientation,
        "config": _resolved_config(cfg, model),
        "result": result,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if not ok:
        raise SolverError("structure checks failed; see check.json")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="phfem",
        description="Structure-preserving plate and beam simulation",
    )
    parser.add_argument("action", choices=_ACTIONS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument(
        "--fix-orientation",
        action="store_true",
        help="repair clockwise triangles in mesh files instead of failing",
    )
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0

    try:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise ConfigError(f"configuration file {cfg_path} does not exist")
        try:
            cfg = json.loads(cfg_path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("configuration root must be an object")
        return run(
            args.action,
            cfg,
            args.out,
            fix_orientation=args.fix_orientation,
            threads=args.threads,
        )
    except PhfemError as exc:
        print(f"phfem: error: {exc}", file=sys.stderr)
        for klass, code in _EXIT_CODES.items():
            if isinstance(exc, klass):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
