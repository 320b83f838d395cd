"""Command-line surface: design / simulate / b0max / sweep / reduce.

Configuration is a YAML key-tree mirroring the sections below; every flag
overrides its config entry.  Outputs are deterministic tables (see
:mod:`spinflip.tables`): identical configs, including seeds, produce
byte-identical files.

Exit codes: 0 ok, 2 bad config, 3 non-cancellable singularity (B0 above the
limit), 4 integrator failure, 5 degenerate reduction reference.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import yaml

from . import __version__
from .constants import MaterialParams
from .core import spin_to_bloch
from .errors import (ConfigError, DegenerateReferenceError, IntegratorError,
                     SingularityError)
from .fields import compute_b0_max, design_is_realizable, sample_fields
from .lowdin import (FourLevelModel, build_full_hamiltonian, lowdin_reduce,
                     orbital_adiabaticity, partition, validity_check,
                     xi_factors)
from .opensys import (NoiseParams, ensemble_average, perturbative_bound,
                      propagate_bloch, propagate_density, propagate_master)
from .tables import OutputTable, config_hash
from .trajectory import TrajectoryDesign

DEFAULT_CONFIG = {
    "material": {
        "hbar_alpha_meV_cm": 2e-6,
        "beta_over_alpha": 0.5,
        "g_factor": -0.44,
        "xi_x": 0.0,
        "xi_y": 0.0,
    },
    "control": {"tf_ns": 1.0, "b0_T": 0.15, "samples": 1001},
    "decoherence": {"gamma_per_ns": 0.0},
    "noise": {"lambda0": 0.0, "channel": "as-printed", "seed": 1234, "n_traj": 1000},
    "integrator": {"steps": 10000},
    "output": {"path": "-", "format": "csv"},
}

EXIT_CONFIG = 2
EXIT_SINGULARITY = 3
EXIT_INTEGRATOR = 4
EXIT_DEGENERATE = 5


def _merge_checked(base: dict, override: dict, path: str = "") -> None:
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path + key!r} must be a mapping")
            _merge_checked(base[key], value, path + key + ".")
        else:
            base[key] = value


def load_config(path: str | None, overrides: dict | None = None) -> dict:
    """Defaults, then config file, then CLI overrides; unknown keys rejected."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                loaded = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path!r}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping at top level")
        _merge_checked(config, loaded)
    if overrides:
        _merge_checked(config, overrides)
    _validate(config)
    return config


def _validate(config: dict) -> None:
    mat = config["material"]
    ctl = config["control"]
    if mat["hbar_alpha_meV_cm"] == 0.0 or mat["beta_over_alpha"] == 0.0:
        raise ConfigError("hbar_alpha_meV_cm and beta_over_alpha must be nonzero")
    if ctl["tf_ns"] <= 0.0:
        raise ConfigError(f"tf_ns must be positive, got {ctl['tf_ns']}")
    if ctl["samples"] < 2:
        raise ConfigError(f"samples must be >= 2, got {ctl['samples']}")
    if config["decoherence"]["gamma_per_ns"] < 0.0:
        raise ConfigError("gamma_per_ns must be >= 0")
    if config["noise"]["lambda0"] < 0.0:
        raise ConfigError("lambda0 must be >= 0")
    if config["noise"]["channel"] not in ("as-printed", "x-only"):
        raise ConfigError(f"unknown noise channel {config['noise']['channel']!r}")
    if config["noise"]["n_traj"] < 1:
        raise ConfigError("n_traj must be >= 1")
    if config["integrator"]["steps"] < 1000:
        raise ConfigError("integrator steps must be >= 1000")
    if config["output"]["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {config['output']['format']!r}")


def material_from(config: dict) -> MaterialParams:
    mat = config["material"]
    ha = mat["hbar_alpha_meV_cm"]
    return MaterialParams(hbar_alpha=ha,
                          hbar_beta=ha * mat["beta_over_alpha"],
                          g=mat["g_factor"],
                          xi_x=mat["xi_x"], xi_y=mat["xi_y"])


def design_from(config: dict) -> TrajectoryDesign:
    return TrajectoryDesign.design(config["control"]["tf_ns"],
                                   config["control"]["b0_T"],
                                   material_from(config))


def _meta(config: dict) -> dict:
    return {
        "toolkit": f"spinflip {__version__}",
        "config": json.dumps(config, sort_keys=True, separators=(",", ":")),
        "config_sha1": config_hash(config),
    }


def _write(table: OutputTable, config: dict, out_override: str | None) -> None:
    path = out_override or config["output"]["path"]
    text = table.render(config["output"]["format"])
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _jobs(args) -> int:
    if getattr(args, "jobs", None):
        return args.jobs
    env = os.environ.get("SPINFLIP_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SPINFLIP_JOBS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def cmd_design(config: dict, args) -> int:
    design = design_from(config)
    if not design_is_realizable(design):
        try:
            hint = f"{compute_b0_max(design.tf, design.mat, b0_hi=4 * design.b0):.3f} T"
        except ValueError:
            hint = "unknown"
        sys.stderr.write(
            f"error: B0={design.b0} T exceeds the single-singularity limit at "
            f"tf={design.tf} ns; B0_max ~ {hint}\n")
        return EXIT_SINGULARITY
    table = OutputTable(columns=["t_ns", "theta_rad", "phi_rad", "B1_T", "B2_T",
                                 "Ex_V_per_cm", "Ey_V_per_cm"], meta=_meta(config))
    for s in sample_fields(design, config["control"]["samples"]):
        table.add_row(s.t, design.theta(s.t), design.phi(s.t), s.b1, s.b2,
                      s.ex, s.ey)
    _write(table, config, args.out)
    return 0


def cmd_simulate(config: dict, args) -> int:
    design = design_from(config)
    gamma = config["decoherence"]["gamma_per_ns"]
    lambda0 = config["noise"]["lambda0"]
    channel = config["noise"]["channel"]
    steps = config["integrator"]["steps"]
    eps = args.epsilon or 0.0
    phi0 = args.phi0 if args.phi0 is not None else np.pi / 2
    if not 0.0 <= eps < 1.0:
        raise ConfigError(f"epsilon must lie in [0, 1), got {eps}")
    psi0 = np.array([np.sqrt(1.0 - eps) * np.exp(1j * phi0), np.sqrt(eps)],
                    dtype=complex)
    r0 = spin_to_bloch(psi0)
    if lambda0 > 0.0 and channel == "x-only":
        rho0 = 0.5 * np.array([[1 + r0[2], r0[0] + 1j * r0[1]],
                               [r0[0] - 1j * r0[1], 1 - r0[2]]], dtype=complex)
        traj = propagate_density(design, gamma=gamma, lambda0=lambda0,
                                 channel="x-only", steps=steps, rho0=rho0)
        rs = traj.bloch()
    else:
        traj = propagate_bloch(design, gamma=gamma, lambda0=lambda0,
                               steps=steps, r0=tuple(r0))
        rs = traj.r
    w_final = float(rs[-1, 2])
    fid = float(np.sqrt(max(0.0, (1.0 - w_final) / 2.0)))
    meta = _meta(config)
    meta["summary_F"] = format(fid, ".17g")
    meta["summary_gamma"] = format(gamma, ".17g")
    meta["summary_lambda0"] = format(lambda0, ".17g")
    meta["summary_bound_1_minus_2_gamma_tf"] = format(
        perturbative_bound(gamma, design.tf), ".17g")
    table = OutputTable(columns=["t_ns", "u", "v", "w", "P_up", "P_down"], meta=meta)
    idx = np.unique(np.round(np.linspace(0, steps, config["control"]["samples"]))
                    .astype(int))
    times = traj.times
    for i in idx:
        u, v, w = rs[i]
        table.add_row(float(times[i]), float(u), float(v), float(w),
                      (1.0 + w) / 2.0, (1.0 - w) / 2.0)
    _write(table, config, args.out)
    return 0


def cmd_b0max(config: dict, args) -> int:
    if not (0.0 < args.tf_min < args.tf_max):
        raise ConfigError(
            f"need 0 < tf_min < tf_max, got {args.tf_min}, {args.tf_max}")
    if args.points < 2:
        raise ConfigError(f"points must be >= 2, got {args.points}")
    mat = material_from(config)
    table = OutputTable(columns=["tf_ns", "b0max_T"], meta=_meta(config))
    for tf in np.linspace(args.tf_min, args.tf_max, args.points):
        table.add_row(float(tf), compute_b0_max(float(tf), mat))
    _write(table, config, args.out)
    return 0


def _parse_grid(spec: str) -> list[float]:
    spec = spec.strip()
    if not spec:
        return []
    if ":" in spec:
        lo, hi, n = spec.split(":")
        return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
    return [float(tok) for tok in spec.split(",") if tok.strip()]


def cmd_sweep(config: dict, args) -> int:
    design = design_from(config)
    steps = config["integrator"]["steps"]
    grid = _parse_grid(args.grid)
    mc = bool(args.mc)
    columns = ["axis_value", "F"] + (["standard_error"] if mc else [])
    table = OutputTable(columns=columns, meta=_meta(config))

    def evaluate(value: float):
        if args.axis == "gamma":
            return (propagate_master(design, gamma=value, steps=steps),)
        lambda0 = float(np.sqrt(value))
        if mc:
            noise = NoiseParams(lambda0=lambda0, channel="x-only",
                                seed=config["noise"]["seed"],
                                n_traj=config["noise"]["n_traj"])
            res = ensemble_average(design, noise, steps=steps)
            return res.fidelity_mean, res.fidelity_se
        traj = propagate_bloch(design, lambda0=lambda0, steps=steps)
        return (traj.final_fidelity,)

    jobs = _jobs(args)
    if grid:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate, grid))
        for value, res in zip(grid, results):
            table.add_row(float(value), *[float(x) for x in res])
    _write(table, config, args.out)
    return 0


def _load_model(path: str, config: dict) -> FourLevelModel:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read model {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse model {path!r}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("model file must hold a mapping")
    required = {"e1_meV", "e2_meV", "delta_z_meV", "pbar_x", "pbar_y",
                "mass_meV_ns2_cm2", "drive_b1_T", "drive_b2_T"}
    unknown = set(doc) - required
    if unknown:
        raise ConfigError(f"unknown model keys: {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"missing model keys: {sorted(missing)}")

    def as_complex(v) -> complex:
        if isinstance(v, (int, float)):
            return complex(v)
        if isinstance(v, (list, tuple)) and len(v) == 2:
            return complex(float(v[0]), float(v[1]))
        raise ConfigError(f"pbar entries must be a number or [re, im], got {v!r}")

    try:
        return FourLevelModel(
            e1=float(doc["e1_meV"]), e2=float(doc["e2_meV"]),
            delta_z=float(doc["delta_z_meV"]),
            pbar_x=as_complex(doc["pbar_x"]), pbar_y=as_complex(doc["pbar_y"]),
            m=float(doc["mass_meV_ns2_cm2"]),
            drive_b1=float(doc["drive_b1_T"]), drive_b2=float(doc["drive_b2_T"]),
            mat=material_from(config))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_reduce(config: dict, args) -> int:
    model = _load_model(args.model, config)
    h4 = build_full_hamiltonian(model)
    blocks = partition(h4)
    eff = lowdin_reduce(blocks, model.e1)
    xi_x, xi_y = xi_factors(model)
    ratio = validity_check(model)
    tf = config["control"]["tf_ns"]
    adiab = orbital_adiabaticity(tf, model.gap)
    eig_eff = np.linalg.eigvalsh(eff)
    eig_full = np.linalg.eigvalsh(h4)[:2]
    c_norm = float(np.linalg.norm(blocks.c, 2))

    meta = _meta(config)
    for i in range(2):
        for j in range(2):
            meta[f"effective_{i}{j}"] = (format(eff[i, j].real, ".17g") + "+"
                                         + format(eff[i, j].imag, ".17g") + "j")
    meta["xi_x"] = format(xi_x, ".17g")
    meta["xi_y"] = format(xi_y, ".17g")
    meta["validity_ratio"] = format(ratio, ".17g")
    meta["validity_ok"] = str(ratio <= 0.1)
    meta["hbar_over_tf_gap"] = format(adiab, ".17g")
    meta["orbital_adiabatic"] = "yes" if adiab < 0.1 else "no"
    meta["coupling_norm_meV"] = format(c_norm, ".17g")
    table = OutputTable(columns=["index", "eig_effective_meV", "eig_exact_meV",
                                 "abs_error_meV"], meta=meta)
    for i in range(2):
        table.add_row(i, float(eig_eff[i]), float(eig_full[i]),
                      float(abs(eig_eff[i] - eig_full[i])))
    _write(table, config, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinflip",
        description="Design and validate electric-field spin-flip pulses "
                    "for spin-orbit coupled quantum dots.")
    parser.add_argument("--version", action="version",
                        version=f"spinflip {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--out", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=["csv", "json"], help="table format")
        p.add_argument("--tf", type=float, help="flip time t_f in ns")
        p.add_argument("--b0", type=float, help="static field B0 in T")

    p = sub.add_parser("design", help="emit the designed field and angle table")
    common(p)
    p.add_argument("--samples", type=int, help="number of table rows")

    p = sub.add_parser("simulate", help="propagate the flip and report fidelity")
    common(p)
    p.add_argument("--samples", type=int, help="number of table rows")
    p.add_argument("--gamma", type=float, help="dephasing rate in 1/ns")
    p.add_argument("--lambda0", type=float, help="source-noise strength")
    p.add_argument("--epsilon", type=float, help="initialization error")
    p.add_argument("--phi0", type=float, help="initialization phase (rad)")
    p.add_argument("--steps", type=int, help="RK4 step count")
    p.add_argument("--seed", type=int, help="noise seed")

    p = sub.add_parser("b0max", help="tabulate the B0 upper limit vs t_f")
    common(p)
    p.add_argument("--tf-min", type=float, required=True)
    p.add_argument("--tf-max", type=float, required=True)
    p.add_argument("--points", type=int, default=10)

    p = sub.add_parser("sweep", help="fidelity curves over gamma or lambda0^2")
    common(p)
    p.add_argument("--axis", choices=["gamma", "lambda0_sq"], required=True)
    p.add_argument("--grid", required=True,
                   help="comma list 'a,b,c' or linspace 'lo:hi:n'")
    p.add_argument("--mc", action="store_true",
                   help="Monte Carlo ensemble instead of the deterministic master equation")
    p.add_argument("--n-traj", type=int, help="ensemble size for --mc")
    p.add_argument("--steps", type=int, help="integrator steps per point")
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--jobs", type=int,
                   help="worker threads (default: SPINFLIP_JOBS or CPU count)")

    p = sub.add_parser("reduce", help="fold a four-level model to an effective 2x2")
    common(p)
    p.add_argument("--model", required=True, help="YAML four-level model file")
    return parser


def _overrides_from(args) -> dict:
    over: dict = {}

    def put(section, key, value):
        if value is not None:
            over.setdefault(section, {})[key] = value

    put("control", "tf_ns", getattr(args, "tf", None))
    put("control", "b0_T", getattr(args, "b0", None))
    put("control", "samples", getattr(args, "samples", None))
    put("decoherence", "gamma_per_ns", getattr(args, "gamma", None))
    put("noise", "lambda0", getattr(args, "lambda0", None))
    put("noise", "seed", getattr(args, "seed", None))
    put("noise", "n_traj", getattr(args, "n_traj", None))
    put("integrator", "steps", getattr(args, "steps", None))
    put("output", "format", getattr(args, "format", None))
    return over


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"design": cmd_design, "simulate": cmd_simulate,
                "b0max": cmd_b0max, "sweep": cmd_sweep, "reduce": cmd_reduce}
    try:
        config = load_config(args.config, _overrides_from(args))
        return handlers[args.command](config, args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except SingularityError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_SINGULARITY
    except IntegratorError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INTEGRATOR
    except DegenerateReferenceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
