"""Command-line driver: configured runs, manufactured-solution studies and
the relaxation timing benchmark.

Configuration files are TOML.  Keys are flattened to dotted names
(``grid.nx``, ``model.kappa``) and checked against a fixed schema, so a
misspelt key is an error rather than a silent default.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import mms
from .curlfree import relax
from .diagnostics import StepDiagnostics
from .errors import ConfigError, ManpError, NonNeutral, NumericalFailure
from .grid import EdgeField, GridSpec
from .model import (JANUS_CHI, JANUS_SOLVENT_VOLUME, JANUS_VOLUMES, MEAN_KINDS, ModelParams,
                    SpeciesParams, TanhDielectric, janus_fixed_charge)
from .solver import (STEPPERS, Problem, SimState, build_initial_displacement, initial_state,
                     step_diagnostics)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "MANP_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

_NUM = (int, float)
_LIST = (list,)

# key -> (accepted types, default); a default of ``None`` means optional
RUN_SCHEMA: dict[str, tuple[tuple, Any]] = {
    "grid.nx": ((int,), 100),
    "grid.ny": ((int,), 100),
    "grid.lx": (_NUM, 2.0),
    "grid.ly": (_NUM, 2.0),
    "grid.x0": (_NUM, None),
    "grid.y0": (_NUM, None),
    "model.preset": ((str,), "janus"),
    "model.kappa": (_NUM, None),
    "model.chi": (_NUM, None),
    "model.v0": (_NUM, None),
    "model.volumes": (_LIST, None),
    "model.radii": (_LIST, None),
    "model.valences": (_LIST, None),
    "model.eps_m": (_NUM, None),
    "model.eps_w": (_NUM, None),
    "initial.preset": ((str,), None),
    "initial.values": (_LIST, None),
    "time.dt": (_NUM, None),
    "time.t_final": (_NUM, None),
    "scheme.integrator": ((str,), "euler"),
    "scheme.mean_kind": ((str,), "entropic"),
    "scheme.eps_tol": (_NUM, None),
    "scheme.solver_tol": (_NUM, 1e-13),
    "scheme.max_sweeps": ((int,), 10_000),
    "output.dir": ((str,), "output"),
    "output.snapshot_every": ((int,), 0),
}

MMS_SCHEMA: dict[str, tuple[tuple, Any]] = {
    "mms.refinements": (_LIST, [0.1, 0.05, 0.025]),
    "mms.dt_rule": ((str,), "h^2"),
    "mms.t_final": (_NUM, 1.0),
    "mms.integrator": ((str,), "euler"),
    "mms.eps_tol": (_NUM, None),
    "output.dir": ((str,), "output"),
}

BENCH_SCHEMA: dict[str, tuple[tuple, Any]] = {
    "bench.sizes": (_LIST, [32, 64, 128]),
    "bench.sweeps": ((int,), 200),
    "bench.repeats": ((int,), 3),
    "bench.kappa": (_NUM, 0.01),
    "bench.eps_m": (_NUM, 1.0),
    "bench.eps_w": (_NUM, 78.0),
    "bench.noise": (_NUM, 1e-2),
    "bench.seed": ((int,), 0),
    "output.dir": ((str,), "output"),
}

PRESET_DEFAULTS = {
    "janus": {"model.kappa": 0.02, "model.chi": JANUS_CHI, "model.v0": JANUS_SOLVENT_VOLUME,
              "model.volumes": list(JANUS_VOLUMES), "model.radii": [1.0, 1.0],
              "model.valences": [1, -1], "model.eps_m": 1.0, "model.eps_w": 1.0,
              "initial.preset": "constant", "initial.values": [0.1, 0.1],
              "scheme.eps_tol": 1e-5},
    "uniform": {"model.kappa": 1.0, "model.chi": 0.0, "model.v0": 1.0,
                "model.valences": [1, -1], "model.eps_m": 1.0, "model.eps_w": 1.0,
                "initial.preset": "constant", "initial.values": [1.0, 1.0],
                "scheme.eps_tol": 1e-6},
    "mms": {"initial.preset": "exact", "scheme.eps_tol": 1e-6},
}

# keys the manufactured problem fixes itself
_MMS_FIXED = ("model.kappa", "model.chi", "model.v0", "model.volumes", "model.radii",
              "model.valences", "model.eps_m", "model.eps_w", "initial.values")

CONFIG_HELP = """\
configuration (TOML; sections and dotted keys are equivalent, unknown keys exit 2)

run:
  grid.nx, grid.ny            nodes per direction                 [100, 100]
  grid.lx, grid.ly            domain lengths                      [2.0, 2.0]
  grid.x0, grid.y0            lower-left corner                   [-lx/2, -ly/2]
  model.preset                janus | uniform | mms               [janus]
  model.kappa, model.chi, model.v0
  model.volumes, model.radii, model.valences   one entry per species
  model.eps_m, model.eps_w    inner/outer permittivity (janus); uniform uses eps_m
  initial.preset              constant | exact (mms only)
  initial.values              constant concentration per species
  time.dt, time.t_final       step size and end time (t_final = 0 writes only the initial state)
  scheme.integrator           euler | bdf2                        [euler]
  scheme.mean_kind            entropic | harmonic | geometric | arithmetic
  scheme.eps_tol, scheme.solver_tol, scheme.max_sweeps
  output.dir                  overridden by $MANP_OUTPUT_DIR      [output]
  output.snapshot_every       steps between snapshots, 0 = first and last only

mms-study:
  mms.refinements, mms.dt_rule (h/10 | h^2), mms.t_final, mms.integrator, mms.eps_tol, output.dir

relax-bench:
  bench.sizes (nodes per side), bench.sweeps, bench.repeats, bench.kappa,
  bench.eps_m, bench.eps_w, bench.noise, bench.seed, output.dir

outputs of run:
  diagnostics.csv   columns: step, {columns}
  snapshots/<field>_<step>.csv with fields c1..cM, Dx, Dy; row i holds x-index i
  summary.json      final diagnostics (and l-infinity errors for mms)
  error.json        written instead of summary.json when a step fails

exit status: 0 success, 2 configuration error, 3 numerical failure
"""


# -- configuration ---------------------------------------------------------

def flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    flat = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def load_config(path: str | os.PathLike) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return flatten(tomllib.load(fh))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def validate(flat: dict[str, Any], schema: dict[str, tuple[tuple, Any]]) -> dict[str, Any]:
    """Reject unknown keys and wrong types; fill in defaults."""
    unknown = sorted(set(flat) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for key, (types, default) in schema.items():
        if key not in flat:
            out[key] = default
            continue
        value = flat[key]
        # bool is an int subclass; never accept it as a number
        if isinstance(value, bool) or not isinstance(value, types):
            names = "/".join(t.__name__ for t in types)
            raise ConfigError(f"{key} must be {names}, got {value!r}")
        out[key] = float(value) if types is _NUM else value
    return out


@dataclass
class RunConfig:
    """Validated settings of a ``run``; build with :meth:`from_flat`."""

    values: dict[str, Any]

    @classmethod
    def from_flat(cls, flat: dict[str, Any]) -> "RunConfig":
        cfg = validate(flat, RUN_SCHEMA)
        preset = cfg["model.preset"]
        if preset not in PRESET_DEFAULTS:
            raise ConfigError(f"unknown model preset {preset!r}; choose from {sorted(PRESET_DEFAULTS)}")
        if preset == "mms":
            given = [k for k in _MMS_FIXED if k in flat]
            if given:
                raise ConfigError(f"the mms preset fixes {', '.join(given)}")
        for key, value in PRESET_DEFAULTS[preset].items():
            if cfg.get(key) is None:
                cfg[key] = value
        for key in ("time.dt", "time.t_final"):
            if cfg[key] is None:
                raise ConfigError(f"{key} is required")
        if not cfg["time.dt"] > 0:
            raise ConfigError("time.dt must be positive")
        if cfg["time.t_final"] < 0:
            raise ConfigError("time.t_final must be non-negative")
        if cfg["scheme.integrator"] not in STEPPERS:
            raise ConfigError(f"scheme.integrator must be one of {sorted(STEPPERS)}")
        if cfg["scheme.mean_kind"] not in MEAN_KINDS:
            raise ConfigError(f"scheme.mean_kind must be one of {list(MEAN_KINDS)}")
        if cfg["output.snapshot_every"] < 0:
            raise ConfigError("output.snapshot_every must be >= 0")
        if cfg["initial.preset"] not in ("constant", "exact"):
            raise ConfigError("initial.preset must be 'constant' or 'exact'")
        if (cfg["initial.preset"] == "exact") != (preset == "mms"):
            raise ConfigError("initial.preset 'exact' goes with (and only with) the mms preset")
        if cfg["grid.x0"] is None:
            cfg["grid.x0"] = -cfg["grid.lx"] / 2
        if cfg["grid.y0"] is None:
            cfg["grid.y0"] = -cfg["grid.ly"] / 2
        return cls(cfg)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def n_steps(self) -> int:
        ratio = self["time.t_final"] / self["time.dt"]
        # guard against 1/0.1 = 9.999...
        return int(math.ceil(ratio - 1e-9))

    def grid(self) -> GridSpec:
        try:
            return GridSpec(self["grid.nx"], self["grid.ny"], self["grid.lx"], self["grid.ly"],
                            self["grid.x0"], self["grid.y0"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def params(self) -> ModelParams:
        kw = dict(mean_kind=self["scheme.mean_kind"], eps_tol=self["scheme.eps_tol"],
                  solver_tol=self["scheme.solver_tol"], max_sweeps=self["scheme.max_sweeps"])
        try:
            if self["model.preset"] == "mms":
                return mms.mms_params(**kw)
            valences = self["model.valences"]
            m = len(valences)
            volumes = self["model.volumes"] or [0.0] * m
            radii = self["model.radii"] or [1.0] * m
            if len(volumes) != m or len(radii) != m:
                raise ConfigError("model.volumes and model.radii need one entry per valence")
            species = [SpeciesParams(q=int(q), v=float(v), a=float(a))
                       for q, v, a in zip(valences, volumes, radii)]
            eps_m, eps_w = self["model.eps_m"], self["model.eps_w"]
            if self["model.preset"] == "janus":
                dielectric = eps_m if eps_m == eps_w else TanhDielectric(eps_m, eps_w)
                fixed = janus_fixed_charge
            else:
                dielectric, fixed = eps_m, None
            return ModelParams(kappa=self["model.kappa"], species=species, chi=self["model.chi"],
                               v0=self["model.v0"], dielectric=dielectric, fixed_charge=fixed,
                               **kw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc


def output_dir(configured: str) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or configured)


# -- output ----------------------------------------------------------------

def write_snapshot(directory: Path, name: str, values: np.ndarray, step: int, t: float) -> Path:
    path = directory / f"{name}_{step:06d}.csv"
    nx, ny = values.shape
    header = f"field={name},nx={nx},ny={ny},step={step},time={t!r}"
    np.savetxt(path, values, delimiter=",", fmt="%.17g", header=header)
    return path


def read_snapshot(path: str | os.PathLike) -> tuple[dict[str, str], np.ndarray]:
    """Inverse of :func:`write_snapshot`; returns ``(header fields, values)``."""
    with open(path) as fh:
        first = fh.readline().lstrip("#").strip()
    meta = dict(item.split("=", 1) for item in first.split(","))
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    return meta, values


def _snapshot_all(directory: Path, state: SimState) -> None:
    for k, c in enumerate(state.c):
        write_snapshot(directory, f"c{k + 1}", c, state.n, state.t)
    write_snapshot(directory, "Dx", state.D.x, state.n, state.t)
    write_snapshot(directory, "Dy", state.D.y, state.n, state.t)


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


class DiagnosticsWriter:
    def __init__(self, path: Path, n_species: int):
        self._fh = open(path, "w")
        self._fh.write(",".join(["step"] + StepDiagnostics.columns(n_species)) + "\n")

    def write(self, step: int, d: StepDiagnostics) -> None:
        self._fh.write(",".join(_fmt(v) for v in [step] + d.row()) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def _error_record(exc: BaseException, step: int | None, t: float | None, code: int) -> dict:
    return {"status": "failed", "exit_code": code, "error": type(exc).__name__,
            "message": str(exc), "step": step, "time": t}


def _fail(out: Path, exc: NumericalFailure, step: int, t: float) -> int:
    record = _error_record(exc, step, t, EXIT_NUMERICAL)
    (out / "error.json").write_text(json.dumps(record, indent=2) + "\n")
    print(json.dumps(record), file=sys.stderr)
    return EXIT_NUMERICAL


# -- commands --------------------------------------------------------------

def _initial_state(cfg: RunConfig, problem: Problem) -> SimState:
    grid = problem.grid
    if cfg["model.preset"] == "mms":
        c1, c2, D = mms.exact_fields(0.0, grid)
        return initial_state(problem, [c1, c2], D0=D)
    values = cfg["initial.values"]
    if len(values) != problem.params.n_species:
        raise ConfigError("initial.values needs one entry per species")
    return initial_state(problem, [np.full(grid.shape, float(v)) for v in values])


def _build_problem(cfg: RunConfig) -> Problem:
    grid = cfg.grid()
    params = cfg.params()
    if cfg["model.preset"] == "mms":
        if not (grid.nx == grid.ny and grid.lx == grid.ly == 2.0
                and grid.x0 == grid.y0 == -1.0):
            raise ConfigError("the mms preset needs a square grid on [-1, 1]^2")
        return mms.mms_problem(grid.dx, params.eps_tol,
                               mms.default_source_time(cfg["scheme.integrator"]),
                               solver_tol=params.solver_tol,
                               mean_kind=params.mean_kind, max_sweeps=params.max_sweeps)
    return Problem.build(grid, params)


def run(cfg: RunConfig) -> int:
    """Integrate to ``time.t_final``, writing diagnostics and snapshots."""
    out = output_dir(cfg["output.dir"])
    snaps = out / "snapshots"
    snaps.mkdir(parents=True, exist_ok=True)
    problem = _build_problem(cfg)
    try:
        state = _initial_state(cfg, problem)
    except NonNeutral as exc:
        raise ConfigError(str(exc)) from exc
    except NumericalFailure as exc:
        return _fail(out, exc, 0, 0.0)

    writer = DiagnosticsWriter(out / "diagnostics.csv", problem.params.n_species)
    step = STEPPERS[cfg["scheme.integrator"]]
    dt, every, n_steps = cfg["time.dt"], cfg["output.snapshot_every"], cfg.n_steps
    try:
        d = step_diagnostics(state, problem)
        writer.write(0, d)
        _snapshot_all(snaps, state)
        for _ in range(n_steps):
            try:
                new = step(state, problem, dt)
                d = step_diagnostics(new, problem)
            except NumericalFailure as exc:
                return _fail(out, exc, state.n + 1, state.t + dt)
            state = new
            writer.write(state.n, d)
            if (every and state.n % every == 0) or state.n == n_steps:
                _snapshot_all(snaps, state)
    finally:
        writer.close()

    columns = StepDiagnostics.columns(problem.params.n_species)
    summary = {"status": "ok", "steps": state.n, "time": state.t,
               "final": dict(zip(columns, d.row()))}
    if cfg["model.preset"] == "mms":
        c1, c2, _ = mms.exact_fields(state.t, problem.grid)
        summary["linf_error"] = [mms.linf_error(state.c[0], c1), mms.linf_error(state.c[1], c2)]
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def mms_study(flat: dict[str, Any]) -> int:
    cfg = validate(flat, MMS_SCHEMA)
    if cfg["mms.integrator"] not in STEPPERS:
        raise ConfigError(f"mms.integrator must be one of {sorted(STEPPERS)}")
    refinements = cfg["mms.refinements"]
    if not refinements or not all(isinstance(h, _NUM) and h > 0 for h in refinements):
        raise ConfigError("mms.refinements must be a list of positive mesh sizes")
    for h in refinements:
        n = 2.0 / h
        if abs(n - round(n)) > 1e-9:
            raise ConfigError(f"mesh size {h} does not divide the domain length 2")
    try:
        rows = mms.convergence_study(refinements, cfg["mms.dt_rule"], cfg["mms.t_final"],
                                     cfg["mms.eps_tol"], cfg["mms.integrator"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    table = mms.format_table(rows)
    out = output_dir(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "mms_table.csv").write_text(table + "\n")
    print(table)
    return EXIT_OK


def loglog_slope(n_points, seconds) -> float:
    return float(np.polyfit(np.log(n_points), np.log(seconds), 1)[0])


def relax_timings(sizes, sweeps: int = 200, repeats: int = 3, kappa: float = 0.01,
                  eps_m: float = 1.0, eps_w: float = 78.0, noise: float = 1e-2,
                  seed: int = 0) -> list[tuple[int, int, float]]:
    """Best-of-``repeats`` wall time of ``sweeps`` relaxation sweeps per grid size.

    The workload is the charged-particle field on an ``n x n`` grid of
    ``[-1, 1]^2`` with seeded random noise added, so every sweep has work
    to do.  Returns ``(n_points, sweeps, seconds)`` rows.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        grid = GridSpec(n, n, 2.0, 2.0, -1.0, -1.0)
        params = ModelParams(kappa=kappa, species=[SpeciesParams(1), SpeciesParams(-1)],
                             dielectric=TanhDielectric(eps_m, eps_w),
                             fixed_charge=janus_fixed_charge)
        problem = Problem.build(grid, params)
        c0 = [np.full(grid.shape, 0.1)] * 2
        D0 = build_initial_displacement(c0, problem.rho_f, params, grid, problem.eps_edges)
        scale = noise * np.abs(D0.x).max()
        D_star = D0 + EdgeField(scale * rng.standard_normal(grid.shape),
                                scale * rng.standard_normal(grid.shape))
        best = math.inf
        for _ in range(repeats):
            # a vanishing tolerance makes every repeat run the full budget
            _, report = relax(D_star, problem.eps_edges, grid, 1e-300, sweeps, kappa,
                              raise_on_failure=False)
            best = min(best, report.seconds)
        rows.append((grid.size, sweeps, best))
    return rows


def relax_bench(flat: dict[str, Any]) -> int:
    """Time a fixed sweep budget of the relaxation on the dielectric-contrast case.

    The sweep count to reach a tolerance depends on the data; the cost of a
    sweep does not, so the budget is fixed and the timing isolates it.
    """
    cfg = validate(flat, BENCH_SCHEMA)
    sizes = cfg["bench.sizes"]
    if len(sizes) < 2 or not all(isinstance(n, int) and n >= 4 for n in sizes):
        raise ConfigError("bench.sizes must list at least two integers >= 4")
    if cfg["bench.sweeps"] < 1 or cfg["bench.repeats"] < 1:
        raise ConfigError("bench.sweeps and bench.repeats must be positive")
    rows = relax_timings(sizes, cfg["bench.sweeps"], cfg["bench.repeats"], cfg["bench.kappa"],
                         cfg["bench.eps_m"], cfg["bench.eps_w"], cfg["bench.noise"],
                         cfg["bench.seed"])
    slope = loglog_slope([r[0] for r in rows], [r[2] for r in rows])
    lines = ["n_points,sweeps,seconds,seconds_per_point_sweep"]
    lines += [f"{n},{s},{t:.6e},{t / (n * s):.6e}" for n, s, t in rows]
    out = output_dir(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "relax_bench.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"log-log slope {slope:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    help_text = CONFIG_HELP.format(columns=", ".join(StepDiagnostics.columns(2)).replace(
        "mass_1, mass_2", "mass_1..mass_M"))
    parser = argparse.ArgumentParser(prog="manp", description=__doc__.splitlines()[0],
                                     epilog=help_text,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "integrate a configured problem"),
                       ("mms-study", "manufactured-solution convergence table"),
                       ("relax-bench", "relaxation wall time against grid size")):
        p = sub.add_parser(name, help=text, epilog=help_text,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("config", help="TOML configuration file")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        flat = load_config(args.config)
        if args.command == "run":
            return run(RunConfig.from_flat(flat))
        if args.command == "mms-study":
            return mms_study(flat)
        return relax_bench(flat)
    except ConfigError as exc:
        print(json.dumps(_error_record(exc, None, None, EXIT_CONFIG)), file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(json.dumps(_error_record(exc, 0, None, EXIT_NUMERICAL)), file=sys.stderr)
        return EXIT_NUMERICAL
    except ManpError as exc:
        print(json.dumps(_error_record(exc, None, None, EXIT_CONFIG)), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
