"""Experiment runner: config ingestion, scheme execution, CSV/JSON artifacts.

The config is a single flat JSON document; every field has a default
matching the reference wideband setup (1 THz carrier, 0.1 THz bandwidth,
9 antennas, half-wavelength spacing, a 4-wavelength-wide movement region
and a quarter-sphere angular range). Physical inputs are wavelength-relative
and converted internally with lambda = c / f_c. All emitted numbers carry
12 significant digits so a rerun with the same seed is byte-identical.

Exit codes: 0 success, 2 config error, 3 infeasible geometry, 4 solver
failure inside a scheme.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .ao import ALL_SCHEMES, AOConfig, CoverageProblem, SchemeId, run_scheme
from .closed_form import diagnose_ula_2d, diagnose_upa_1d, solve_1d
from .gain import build_grid, db10, gain_field, min_gain
from .geometry import SPEED_OF_LIGHT, LayoutError, RotationAngles
from .rotation import GibbsConfig, RotationGridConfig
from .sca import PenaltyConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4


class ConfigError(ValueError):
    """Config parse/validation failure; the message names the field."""


def _sig12(x: float) -> float:
    """Round to 12 significant digits for stable serialization."""
    return float(f"{float(x):.12g}")


@dataclass(frozen=True)
class ExperimentConfig:
    carrier_hz: float = 1e12
    bandwidth_hz: float = 1e11
    n_antennas: int = 9
    min_spacing_wavelengths: float = 0.5
    region_wavelengths: float = 4.0
    theta_deg_range: tuple = (0.0, 90.0)
    phi_deg_range: tuple = (0.0, 90.0)
    grid_counts: tuple = (16, 16, 8)
    schemes: tuple = tuple(s.value for s in ALL_SCHEMES)
    max_outer_iters: int = 30
    outer_tol: float = 1e-3
    sca_max_iters: int = 40
    sca_tol: float = 1e-5
    penalty_rho: float | None = None
    position_iters: int = 8
    position_tol: float = 1e-4
    rotation_coarse_counts: tuple = (8, 8, 8)
    rotation_fine_counts: tuple = (8, 8, 8)
    gibbs_iters: int = 50
    gibbs_candidates: int = 28
    gibbs_neighbor_radius: int = 3
    gibbs_step_deg: float = 1.0
    gibbs_temperature: float | None = None
    seed: int = 0
    workers: int = 1
    output_dir: str = "results"

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def min_spacing(self) -> float:
        return self.min_spacing_wavelengths * self.wavelength

    @property
    def region_half_width(self) -> float:
        return 0.5 * self.region_wavelengths * self.wavelength

    @property
    def freq_range(self) -> tuple:
        return (
            self.carrier_hz - 0.5 * self.bandwidth_hz,
            self.carrier_hz + 0.5 * self.bandwidth_hz,
        )

    def validate(self) -> None:
        def positive(name):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

        for name in ("carrier_hz", "n_antennas", "min_spacing_wavelengths",
                     "region_wavelengths", "outer_tol", "sca_tol", "position_tol",
                     "gibbs_step_deg"):
            positive(name)
        if self.bandwidth_hz < 0:
            raise ConfigError("bandwidth_hz must be nonnegative")
        if self.bandwidth_hz >= 2.0 * self.carrier_hz:
            raise ConfigError("bandwidth_hz must be below twice carrier_hz")
        for name in ("theta_deg_range", "phi_deg_range"):
            rng = getattr(self, name)
            if len(rng) != 2 or rng[1] < rng[0]:
                raise ConfigError(f"{name} must be an ascending [lo, hi] pair")
        if len(self.grid_counts) != 3 or any(int(c) < 1 for c in self.grid_counts):
            raise ConfigError("grid_counts must be three integers >= 1")
        valid = {s.value for s in ALL_SCHEMES}
        for s in self.schemes:
            if s not in valid:
                raise ConfigError(f"schemes contains unknown entry {s!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.penalty_rho is not None and self.penalty_rho <= 0:
            raise ConfigError("penalty_rho must be positive or null")

    def problem(self) -> CoverageProblem:
        grid = build_grid(
            tuple(np.deg2rad(self.theta_deg_range)),
            tuple(np.deg2rad(self.phi_deg_range)),
            self.freq_range,
            tuple(int(c) for c in self.grid_counts),
        )
        return CoverageProblem(
            grid=grid,
            n_antennas=int(self.n_antennas),
            min_spacing=self.min_spacing,
            region_half_width=self.region_half_width,
            carrier_hz=self.carrier_hz,
        )

    def ao_config(self) -> AOConfig:
        return AOConfig(
            max_outer_iters=int(self.max_outer_iters),
            outer_tol=self.outer_tol,
            penalty=PenaltyConfig(
                rho=self.penalty_rho, max_iters=int(self.sca_max_iters), tol=self.sca_tol
            ),
            position_iters=int(self.position_iters),
            position_tol=self.position_tol,
            rotation_grid=RotationGridConfig(
                coarse_counts=tuple(int(c) for c in self.rotation_coarse_counts),
                fine_counts=tuple(int(c) for c in self.rotation_fine_counts),
            ),
            gibbs=GibbsConfig(
                iters=int(self.gibbs_iters),
                candidates_per_iter=int(self.gibbs_candidates),
                neighbor_radius=int(self.gibbs_neighbor_radius),
                step=np.deg2rad(self.gibbs_step_deg),
                temperature=self.gibbs_temperature,
                seed=int(self.seed),
            ),
            seed=int(self.seed),
        )

    def to_json_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            val = getattr(self, name)
            if isinstance(val, tuple):
                val = list(val)
            out[name] = val
        return out


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(raw, overrides)


def config_from_dict(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    known = set(ExperimentConfig.__dataclass_fields__)
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")
    merged = dict(raw)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    kwargs = {}
    for key, val in merged.items():
        if isinstance(val, list):
            val = tuple(val)
        kwargs[key] = val
    try:
        cfg = ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def _solution_dict(state, problem) -> dict:
    return {
        "weights_phases_rad": [_sig12(p) for p in state.weights.phases],
        "layout_coords_m": [[_sig12(y), _sig12(z)] for y, z in state.layout.local_coords],
        "rotation_rad": {
            "alpha": _sig12(state.rotation.alpha),
            "beta": _sig12(state.rotation.beta),
            "gamma": _sig12(state.rotation.gamma),
        },
        "min_gain_linear": _sig12(state.reported_min_gain),
        "min_gain_db": _sig12(db10(state.reported_min_gain)),
        "converged": bool(state.converged),
        "outer_iterations": int(state.iterations_used),
        "flags": list(state.flags),
    }


def _write_trace_csv(path, state) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("outer_iter,block,min_gain_linear,min_gain_db\n")
        for outer, block, g in state.block_trace:
            fh.write(f"{outer},{block},{g:.12g},{db10(g):.12g}\n")


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run every requested scheme and write its artifacts plus a summary."""
    cfg.validate()
    problem = cfg.problem()
    ao_cfg = cfg.ao_config()
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    def one(scheme_name: str):
        state = run_scheme(SchemeId(scheme_name), problem, ao_cfg)
        fld = gain_field(state.weights, state.rotation, state.layout, problem.grid)
        fld.to_csv(outdir / f"{scheme_name}_gainfield.csv")
        _write_trace_csv(outdir / f"{scheme_name}_trace.csv", state)
        _write_json(outdir / f"{scheme_name}_solution.json", _solution_dict(state, problem))
        return state

    states = {}
    if cfg.workers > 1 and len(cfg.schemes) > 1:
        with ThreadPoolExecutor(max_workers=int(cfg.workers)) as pool:
            for name, state in zip(cfg.schemes, pool.map(one, cfg.schemes)):
                states[name] = state
    else:
        for name in cfg.schemes:
            states[name] = one(name)

    summary = {
        "config": cfg.to_json_dict(),
        "schemes": {
            name: {
                "min_gain_linear": _sig12(st.reported_min_gain),
                "min_gain_db": _sig12(db10(st.reported_min_gain)),
                "converged": bool(st.converged),
                "outer_iterations": int(st.iterations_used),
            }
            for name, st in states.items()
        },
    }
    _write_json(outdir / "summary.json", summary)
    return EXIT_OK


SWEEP_PARAMS = ("bandwidth_hz", "phi_width_deg")


def run_sweep(cfg: ExperimentConfig, parameter: str, values) -> int:
    """Run the experiment per sweep value and tabulate min-gains per scheme.

    ``bandwidth_hz`` replaces the frequency window; ``phi_width_deg`` sets
    the azimuth range to [phi_min, phi_min + width]. Each value writes a
    full experiment tree under its own subdirectory.
    """
    if parameter not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    cfg.validate()
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        sub = replace(cfg, output_dir=str(outdir / f"sweep_{parameter}_{value:g}"))
        if parameter == "bandwidth_hz":
            sub = replace(sub, bandwidth_hz=float(value))
        else:
            lo = cfg.phi_deg_range[0]
            sub = replace(sub, phi_deg_range=(lo, lo + float(value)))
        status = run_experiment(sub)
        if status != EXIT_OK:
            return status
        with open(Path(sub.output_dir) / "summary.json", encoding="utf-8") as fh:
            summary = json.load(fh)
        for name in sub.schemes:
            rows.append((value, name, summary["schemes"][name]["min_gain_db"]))
    with open(outdir / "sweep_summary.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sweep_value,scheme,min_gain_db\n")
        for value, name, gdb in rows:
            fh.write(f"{value:.12g},{name},{gdb:.12g}\n")
    return EXIT_OK


def _cmd_run(args) -> int:
    overrides = {"seed": args.seed, "output_dir": args.output}
    cfg = load_config(args.config, overrides)
    return run_experiment(cfg)


def _cmd_sweep(args) -> int:
    overrides = {"seed": args.seed, "output_dir": args.output}
    cfg = load_config(args.config, overrides)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("values list is empty")
    return run_sweep(cfg, args.param, values)


def _cmd_diagnose(args) -> int:
    rng = np.random.default_rng(args.seed)
    print(f"mode={args.mode} samples={args.samples}")
    if args.mode == "ula2d":
        grid = build_grid(
            (0.0, np.pi / 2), (0.0, np.pi / 2), (1e12, 1e12), (16, 16, 1)
        )
        worst = np.inf
        for _ in range(args.samples):
            r = RotationAngles(*rng.uniform(0.0, 2 * np.pi, 3))
            worst = min(worst, diagnose_ula_2d(r, grid))
        print(f"min residual max|r1.v| over rotations: {worst:.6e}")
        print("a zero residual would mean a squint-free line array exists; "
              "the positive floor certifies it does not")
    else:
        theta = np.linspace(np.deg2rad(30), np.deg2rad(90), 64)
        worst = np.inf
        worst_orth = 0.0
        for _ in range(args.samples):
            r = RotationAngles(*rng.uniform(0.0, 2 * np.pi, 3))
            g1, g2 = diagnose_upa_1d(r, 0.0, theta)
            worst = min(worst, max(g1, g2))
            from .geometry import rotation_columns

            _, s1, s2 = rotation_columns(r)
            worst_orth = max(worst_orth, abs(float(s1 @ s2)))
        print(f"min over rotations of max(|g1|,|g2|): {worst:.6e}")
        print(f"max |s1.s2| (column orthogonality): {worst_orth:.3e}")
    return EXIT_OK


def _cmd_closed_form(args) -> int:
    phi0 = np.deg2rad(args.phi0_deg)
    lam = SPEED_OF_LIGHT / args.carrier_hz
    sol = solve_1d(
        phi0,
        args.n_antennas,
        args.min_spacing_wl * lam,
        0.5 * args.region_wl * lam,
    )
    payload = {
        "rotation_rad": {
            "alpha": _sig12(sol.rotation.alpha),
            "beta": _sig12(sol.rotation.beta),
            "gamma": _sig12(sol.rotation.gamma),
        },
        "weights_phases_rad": [_sig12(p) for p in sol.weights.phases],
        "layout_coords_m": [[_sig12(y), _sig12(z)] for y, z in sol.layout.local_coords],
        "achieved_gain_linear": _sig12(sol.achieved_gain),
        "achieved_gain_db": _sig12(db10(sol.achieved_gain)),
    }
    if args.verify:
        grid = build_grid(
            (np.deg2rad(args.theta_deg_min), np.deg2rad(args.theta_deg_max)),
            (phi0, phi0),
            (args.carrier_hz - 0.5 * args.bandwidth_hz, args.carrier_hz + 0.5 * args.bandwidth_hz),
            (32, 1, 32),
        )
        payload["verified_min_gain_linear"] = _sig12(
            min_gain(sol.weights, sol.rotation, sol.layout, grid)
        )
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sixdma",
        description="Wideband wide-beam coverage optimization for rotatable, "
        "repositionable antenna arrays.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run every scheme in a config")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--seed", type=int, default=None, help="override config seed")
    run_p.add_argument("--output", default=None, help="override output directory")
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="sweep bandwidth or azimuth width")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sweep_p.add_argument("--values", required=True, help="comma-separated list")
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.add_argument("--output", default=None)
    sweep_p.set_defaults(func=_cmd_sweep)

    diag_p = sub.add_parser("diagnose", help="impossibility diagnostics")
    diag_p.add_argument("--mode", required=True, choices=("ula2d", "upa1d"))
    diag_p.add_argument("--samples", type=int, default=1000)
    diag_p.add_argument("--seed", type=int, default=0)
    diag_p.set_defaults(func=_cmd_diagnose)

    cf_p = sub.add_parser("closed-form", help="closed-form 1D coverage solution")
    cf_p.add_argument("--phi0-deg", type=float, required=True)
    cf_p.add_argument("--n-antennas", type=int, default=16)
    cf_p.add_argument("--min-spacing-wl", type=float, default=0.5)
    cf_p.add_argument("--region-wl", type=float, default=8.0)
    cf_p.add_argument("--carrier-hz", type=float, default=1e12)
    cf_p.add_argument("--bandwidth-hz", type=float, default=1e11)
    cf_p.add_argument("--theta-deg-min", type=float, default=30.0)
    cf_p.add_argument("--theta-deg-max", type=float, default=90.0)
    cf_p.add_argument("--verify", action="store_true",
                      help="also evaluate the min gain on a check grid")
    cf_p.add_argument("--out", default=None)
    cf_p.set_defaults(func=_cmd_closed_form)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LayoutError as exc:
        print(f"infeasible geometry: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
