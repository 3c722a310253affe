"""Command-line front end for raftmin.

Each command resolves a RunConfig from model defaults, an optional TOML or
JSON config file and explicit flags (flags win), writes manifest.json plus
its outputs into the output directory, and returns the exit code:
0 ok, 2 configuration, 3 I/O or field format, 4 numerical failure.
"""
import argparse
import itertools
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from raftmin import settings
from raftmin.cell import estimate_md, estimate_from_spec, transverse_probe
from raftmin.energy import F_star, effective_mode_energy, mode_table, optimal_mode
from raftmin.exceptions import ConfigError, DivergenceError, StepUnderflowError, UnboundedBelowError, exit_code_for
from raftmin.fieldio import synthetic_field, write_field_csv, write_raftfield
from raftmin.gamma import floor_check, gamma_compare, polygon_report
from raftmin.geometry import InterfaceGeometry
from raftmin.grid import grid_from_spec
from raftmin.minimize import FlowResult, default_floor, descend
from raftmin.models import FieldSource, FlowStatus, GeometryKind
from raftmin.operators import helmholtz_inverse, helmholtz_residual, resolvent_multiplier
from raftmin.outputs import load_config_file, write_breakdown, write_csv, write_key_values, write_manifest
from raftmin.physical import nondimensionalize, sigma_sweep
from raftmin.potential import potential_from_spec
from raftmin.schemas import COMMANDS, PhysicalParams, RunConfig
from raftmin.sweep import run_sweep

logger = logging.getLogger(__name__)

GEOMETRY_ALIASES = {"slab": GeometryKind.FLAT_SLAB.value, "polygon": GeometryKind.POLYGON_2D.value}

# physical q values are expected inside this interval
Q_INTERVAL = (-1.1, 1.0)


def _floats(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _vertices(text: str) -> List[List[float]]:
    points = [_floats(p) for p in text.split(";") if p.strip()]
    if any(len(p) != 2 for p in points):
        raise argparse.ArgumentTypeError(f"vertices must be 'x,y;x,y;...', got {text!r}")
    return points


def _common(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default, help="TOML or JSON run configuration")
    common.add_argument("--output-dir", default=default, help="directory for outputs and manifest.json")
    common.add_argument("--seed", type=int, default=default, help="seed for random fields")
    common.add_argument("--log-level", default=default, help="logging level (default RAFTMIN_LOG_LEVEL or INFO)")
    return common


def _add_grid(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("grid")
    g.add_argument("--n", type=_ints, help="points per axis, e.g. 128,128")
    g.add_argument("--extents", type=_floats, help="box side per axis (default 2)")
    g.add_argument("--boundary", choices=["neumann", "periodic"])
    g.add_argument("--origin", type=_floats, help="lower corner per axis (default -extent/2)")


def _add_potential(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("potential")
    g.add_argument("--potential", choices=["quartic_truncated", "quartic", "physical_quartic"])
    g.add_argument("--s0", type=float, help="crossover of the quadratic extension")


def _add_field(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("field")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--const", type=float, help="constant field value")
    src.add_argument("--mode", help="n=K for cos(2 pi K x), or a basis index i[,j[,k]]")
    src.add_argument("--step", type=float, help="tanh step at this position")
    src.add_argument("--random", action="store_true", help="seeded random field")
    src.add_argument("--field", help="RAFTFIELD v1 file")
    g.add_argument("--amplitude", type=float)
    g.add_argument("--width", type=float, help="step width")
    g.add_argument("--step-axis", type=int)
    g.add_argument("--band", type=int, help="band limit of random fields")
    g.add_argument("--mean", type=float)


def _add_energy(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float)
    p.add_argument("--q", type=float)


def _add_cell(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("cell problem")
    g.add_argument("--eps-grid", type=_floats, help="cell scales in (0, 1]")
    g.add_argument("--dofs", type=int, help="profile intervals")
    g.add_argument("--clamp", type=float, help="clamp zone width")
    g.add_argument("--init", choices=["sine", "ramp"])
    g.add_argument("--max-iter", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="raftmin", description="Nonlocal membrane raft energies and minimizers",
                                     parents=[_common(False)])
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(True)

    p = sub.add_parser("energy", parents=[common], help="evaluate F_star on a field")
    _add_grid(p)
    _add_potential(p)
    _add_field(p)
    _add_energy(p)

    p = sub.add_parser("flow", parents=[common], help="gradient-flow minimization")
    _add_grid(p)
    _add_potential(p)
    _add_field(p)
    _add_energy(p)
    p.add_argument("--scheme", choices=["l2_descent", "semi_implicit_spectral"])
    p.add_argument("--dt", type=float)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--mass", type=float, help="fixed mean")
    p.add_argument("--energy-floor", type=float)
    p.add_argument("--min-dt", type=float)
    p.add_argument("--stabilization", type=float)
    p.add_argument("--max-dt", type=float, help="step size cap")
    p.add_argument("--stall-tol", type=float, help="relative energy drop per window that counts as stalled")
    p.add_argument("--stall-window", type=int)
    p.add_argument("--q-list", type=_floats)
    p.add_argument("--eps-list", type=_floats)

    p = sub.add_parser("modes", parents=[common], help="single-mode energy table")
    _add_energy(p)
    p.add_argument("--nmax", type=int)
    p.add_argument("--q-list", type=_floats)
    p.add_argument("--eps-list", type=_floats)

    p = sub.add_parser("cell", parents=[common], help="estimate m_d from the cell problem")
    _add_potential(p)
    _add_cell(p)
    p.add_argument("--q", type=float)
    p.add_argument("--refine", action="store_true", default=None, help="re-solve at twice the dofs, warm-started")
    p.add_argument("--transverse", type=_floats, help="modulation amplitudes to probe")

    p = sub.add_parser("gamma", parents=[common], help="recovery energies against m_d Per")
    _add_grid(p)
    _add_potential(p)
    _add_cell(p)
    p.add_argument("--q", type=float)
    p.add_argument("--eps", type=_floats, help="interface scales, e.g. 0.1,0.05,0.02")
    p.add_argument("--geometry", choices=sorted(GEOMETRY_ALIASES) + sorted(GEOMETRY_ALIASES.values()))
    p.add_argument("--axis", type=int, help="slab normal axis")
    p.add_argument("--offset", type=float, help="slab position")
    p.add_argument("--vertices", type=_vertices, help="polygon 'x,y;x,y;...'")
    p.add_argument("--corner-delta", type=float)

    p = sub.add_parser("nondim", parents=[common], help="map physical parameters to (eps, q)")
    p.add_argument("--characteristic", "--table1", dest="characteristic", action="store_true", default=None,
                   help="start from the bundled membrane values")
    p.add_argument("--sigma", type=_floats, help="surface tension, or a comma list to sweep")
    for name in ("a2", "a4", "b", "kappa", "coupling", "L"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--strict", action="store_true", default=None, help="reject sigma outside the characteristic window")

    p = sub.add_parser("helmholtz", parents=[common], help="apply (1 - eps^2 Laplace)^-1")
    _add_grid(p)
    _add_field(p)
    p.add_argument("--eps", type=float)

    sub.add_parser("run", parents=[common], help="run the command named in --config")
    return parser


def _put(data: Dict[str, Any], section: Optional[str], key: str, value: Any) -> None:
    if value is None:
        return
    if section is None:
        data[key] = value
    else:
        data[section] = {**data.get(section, {}), key: value}


def _field_overrides(args: argparse.Namespace, data: Dict[str, Any]) -> None:
    get = lambda name: getattr(args, name, None)
    if get("const") is not None:
        _put(data, "field", "source", FieldSource.CONST.value)
        _put(data, "field", "value", args.const)
    elif get("mode") is not None:
        _put(data, "field", "source", FieldSource.MODE.value)
        text = args.mode.strip()
        if text.startswith("n="):
            try:
                _put(data, "field", "cos_mode", int(text[2:]))
            except ValueError:
                raise ConfigError(f"--mode n=K needs an integer K, got {text!r}")
            data["field"].pop("index", None)
        else:
            try:
                _put(data, "field", "index", [int(t) for t in text.split(",")])
            except ValueError:
                raise ConfigError(f"--mode needs n=K or an integer index, got {text!r}")
            data["field"].pop("cos_mode", None)
        if get("amplitude") is None and "amplitude" not in data["field"]:
            _put(data, "field", "amplitude", 1.0)
    elif get("step") is not None:
        _put(data, "field", "source", FieldSource.STEP.value)
        _put(data, "field", "position", args.step)
    elif get("random"):
        _put(data, "field", "source", FieldSource.RANDOM.value)
    elif get("field") is not None:
        _put(data, "field", "source", FieldSource.FILE.value)
        _put(data, "field", "path", args.field)
    for flag, key in (("amplitude", "amplitude"), ("width", "width"), ("step_axis", "axis"), ("band", "band"),
                      ("mean", "mean")):
        _put(data, "field", key, get(flag))


def _grid_overrides(args: argparse.Namespace, data: Dict[str, Any]) -> None:
    n = getattr(args, "n", None)
    if n is not None:
        grid = dict(data.get("grid", {}))
        grid["n"] = n
        grid["dims"] = len(n)
        if getattr(args, "extents", None) is None and len(grid.get("extents", [])) != len(n):
            grid["extents"] = [2.0] * len(n)
        data["grid"] = grid
    _put(data, "grid", "extents", getattr(args, "extents", None))
    _put(data, "grid", "boundary", getattr(args, "boundary", None))
    _put(data, "grid", "origin", getattr(args, "origin", None))


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < flags."""
    data: Dict[str, Any] = load_config_file(args.config) if getattr(args, "config", None) else {}
    if args.command == "run":
        if data.get("command") not in COMMANDS:
            raise ConfigError("'run' needs a config file naming one of: " + ", ".join(COMMANDS))
    else:
        data["command"] = args.command
    get = lambda name: getattr(args, name, None)

    _put(data, None, "output_dir", get("output_dir"))
    _put(data, None, "seed", get("seed"))
    _grid_overrides(args, data)
    _put(data, "potential", "kind", get("potential"))
    _put(data, "potential", "s0", get("s0"))
    _field_overrides(args, data)

    if args.command == "gamma":
        _put(data, "gamma", "eps_list", get("eps"))
    else:
        _put(data, "energy", "eps", get("eps"))
    _put(data, "energy", "q", get("q"))

    for flag, key in (("scheme", "scheme"), ("dt", "dt"), ("max_steps", "max_steps"), ("tolerance", "tolerance"),
                      ("mass", "mass_constraint"), ("energy_floor", "energy_floor"), ("min_dt", "min_dt"),
                      ("max_dt", "max_dt"), ("stabilization", "stabilization"), ("stall_tol", "stall_tol"),
                      ("stall_window", "stall_window")):
        _put(data, "flow", key, get(flag))
    for flag, key in (("eps_grid", "eps_grid"), ("dofs", "profile_dofs"), ("clamp", "clamp"), ("init", "init"),
                      ("max_iter", "max_iter"), ("refine", "refine"), ("transverse", "transverse_amplitudes")):
        _put(data, "cell", key, get(flag))
    geometry = get("geometry")
    _put(data, "gamma", "geometry", GEOMETRY_ALIASES.get(geometry, geometry))
    for flag in ("axis", "offset", "vertices", "corner_delta"):
        _put(data, "gamma", flag, get(flag))
    for flag in ("nmax", "q_list", "eps_list"):
        if not (flag == "eps_list" and args.command == "gamma"):
            _put(data, "sweep", flag, get(flag))

    _put(data, None, "characteristic", get("characteristic"))
    sigmas = get("sigma")
    if sigmas is not None:
        if len(sigmas) == 1:
            _put(data, "physical", "sigma", sigmas[0])
        else:
            _put(data, "physical", "sigma", sigmas[0])
            _put(data, "sweep", "sigma_list", sigmas)
    for name in ("a2", "a4", "b", "kappa", "coupling", "L", "strict"):
        _put(data, "physical", name, get(name))
    if data.get("characteristic"):
        data["physical"] = PhysicalParams.characteristic(**data.get("physical", {})).model_dump()

    return RunConfig.model_validate(data)


def cmd_energy(config: RunConfig, out: Path) -> None:
    """
    Evaluate F_star on the configured field.

    Writes breakdown.txt and a one-row energy.csv; F_qn is the mode-weighted
    quadratic multiplier, exactly F_qn for a single mode.
    """
    grid = grid_from_spec(config.grid)
    pot = potential_from_spec(config.potential)
    u = synthetic_field(grid, config.field)
    breakdown = F_star(u, config.energy, pot)
    f_qn = effective_mode_energy(u, config.energy)
    write_breakdown(out / "breakdown.txt", breakdown, {"F_qn": f_qn})
    terms = breakdown.terms()
    write_csv(out / "energy.csv", ["total", *terms, "F_qn"], [[breakdown.total, *terms.values(), f_qn]])
    logger.info(f"F_star = {breakdown.total!r} at eps={config.energy.eps}, q={config.energy.q}")


def _flow_outputs(result: FlowResult, eps: float, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "trajectory.csv", ["step", "energy", "grad_norm", "mean", "dominant_wavenumber"],
              [[r.step, r.energy, r.grad_norm, r.mean, r.dominant_wavenumber] for r in result.trajectory])
    write_raftfield(out / "final.raftfield", result.field)
    if result.field.grid.d <= 2:
        write_field_csv(out / "final.csv", result.field)
    last = result.trajectory[-1]
    write_key_values(out / "summary.txt", {
        "status": result.status.value,
        "steps": result.steps,
        "energy": result.energy,
        "dt": result.dt,
        "mean": last.mean,
        "grad_norm": last.grad_norm,
        "dominant_wavenumber": last.dominant_wavenumber,
        "eps2_lambda2": (eps * last.dominant_wavenumber) ** 2,
    })


def cmd_flow(config: RunConfig, out: Path) -> None:
    """
    Run the gradient flow from the configured initial field.

    A sweep over q and eps runs the flows concurrently into per-point
    subdirectories and summarizes them in sweep.csv; failures there are
    recorded, not raised.
    """
    grid = grid_from_spec(config.grid)
    pot = potential_from_spec(config.potential)
    spec = config.field
    if config.flow.mass_constraint is not None and spec.source == FieldSource.RANDOM:
        spec = spec.model_copy(update={"mean": config.flow.mass_constraint})
    u0 = synthetic_field(grid, spec)

    points = list(itertools.product(config.sweep.q_list or [config.energy.q],
                                    config.sweep.eps_list or [config.energy.eps]))
    if len(points) == 1:
        p = config.energy.model_copy(update={"q": points[0][0], "eps": points[0][1]})
        result = descend(u0, p, pot, config.flow)
        _flow_outputs(result, p.eps, out)
        if result.status == FlowStatus.DIVERGED:
            floor = config.flow.energy_floor if config.flow.energy_floor is not None else default_floor(grid, p.eps)
            raise DivergenceError(p.eps, p.q, result.energy, floor)
        if result.status == FlowStatus.STEP_UNDERFLOW:
            raise StepUnderflowError(result.dt, config.flow.min_dt, result.steps)
        return

    def run_point(point):
        q, eps = point
        p = config.energy.model_copy(update={"q": q, "eps": eps})
        result = descend(u0, p, pot, config.flow)
        _flow_outputs(result, eps, out / f"flow_q{q!r}_eps{eps!r}")
        return result

    results = run_sweep(run_point, points, label="flow sweep")
    write_csv(out / "sweep.csv", ["q", "eps", "status", "steps", "energy", "dominant_wavenumber"],
              [[q, eps, r.status.value, r.steps, r.energy, r.trajectory[-1].dominant_wavenumber]
               for (q, eps), r in zip(points, results)])


def cmd_modes(config: RunConfig, out: Path) -> None:
    """
    Tabulate single-mode energies F_qn for n = 1..nmax.
    """
    points = list(itertools.product(config.sweep.q_list or [config.energy.q],
                                    config.sweep.eps_list or [config.energy.eps]))

    tables = run_sweep(lambda pt: mode_table(pt[0], pt[1], config.sweep.nmax), points, label="mode table")
    header = ["n", "lambda", "eps2_lambda2", "F_qn", "destabilizing", "is_min"]
    if len(points) == 1:
        write_csv(out / "modes.csv", header,
                  [[r.n, r.wavenumber, r.eps2_lambda2, r.F_qn, r.destabilizing, r.is_min] for r in tables[0]])
    else:
        write_csv(out / "modes.csv", ["q", "eps", *header],
                  [[q, eps, r.n, r.wavenumber, r.eps2_lambda2, r.F_qn, r.destabilizing, r.is_min]
                   for (q, eps), rows in zip(points, tables) for r in rows])

    q, eps = points[0]
    best = next(r for r in tables[0] if r.is_min)
    summary: Dict[str, Any] = {"q": q, "eps": eps, "n_min": best.n, "F_qn_min": best.F_qn}
    try:
        lam2, f_star = optimal_mode(q, eps)
        summary.update({"eps2_lambda2_star": eps**2 * lam2, "F_star": f_star, "unbounded_below": False})
    except UnboundedBelowError as e:
        logger.warning(e.detail)
        summary["unbounded_below"] = True
    write_key_values(out / "summary.txt", summary)


def cmd_cell(config: RunConfig, out: Path) -> None:
    """
    Estimate m_d over the configured eps grid and report the optimal profile.
    """
    pot = potential_from_spec(config.potential)
    q = config.energy.q
    spec = config.cell
    result = estimate_from_spec(pot, q, spec)
    if spec.refine:
        result = estimate_md(pot, q, spec.eps_grid, 2 * spec.profile_dofs, spec.clamp, spec.init, spec.max_iter,
                             warm_start=result)
    write_csv(out / "cell.csv", ["eps", "energy", "iterations", "converged"],
              [[r.eps, r.energy, r.iterations, r.converged] for r in result.scan])
    y = np.linspace(-0.5, 0.5, 401)
    write_csv(out / "profile.csv", ["y", "value"], zip(y.tolist(), result.profile(y).tolist()))
    floor, holds = floor_check(result.md, q, pot)
    summary: Dict[str, Any] = {"md": result.md, "eps_argmin": result.eps_argmin, "profile_dofs": result.profile_dofs,
                               "q": q, "floor": floor, "floor_holds": holds}
    if spec.transverse_amplitudes:
        report = transverse_probe(pot, q, result.profile, spec.transverse_amplitudes)
        write_csv(out / "transverse.csv", ["amplitude", "energy"], report.rows)
        summary["transverse_improves"] = report.improves
    write_key_values(out / "summary.txt", summary)


def cmd_gamma(config: RunConfig, out: Path) -> None:
    """
    Compare recovery energies with m_d times the perimeter over the eps list.
    """
    grid = grid_from_spec(config.grid)
    pot = potential_from_spec(config.potential)
    q = config.energy.q
    spec = config.gamma
    geometry = InterfaceGeometry.from_spec(spec)
    cell = estimate_from_spec(pot, q, config.cell)
    table = gamma_compare(geometry, pot, q, spec.eps_list, grid, cell=cell, trend_floor=spec.trend_floor,
                          saturation_tol=spec.saturation_tol, final_tol=spec.final_tol,
                          corner_delta=spec.corner_delta)
    write_csv(out / "gamma.csv", ["eps", "energy", "md_times_per", "ratio"],
              [[r.eps, r.energy, r.md_times_per, r.ratio] for r in table.rows])
    floor, holds = floor_check(table.md, q, pot)
    write_key_values(out / "summary.txt", {
        "md": table.md, "eps0": table.eps0, "perimeter": table.perimeter, "trend_ok": table.trend_ok,
        "saturated": table.saturated, "final_ok": table.final_ok, "observed_rate": table.observed_rate,
        "floor": floor, "floor_holds": holds,
    })
    if geometry.kind == GeometryKind.POLYGON_2D:
        report = polygon_report(geometry, pot, q, spec.eps_list[-1], grid, cell, spec.corner_delta)
        write_key_values(out / "polygon.txt", report.model_dump())


def cmd_nondim(config: RunConfig, out: Path) -> None:
    """
    Map physical parameters to eps, q and the potential scale.
    """
    if config.physical is None:
        raise ConfigError("nondim needs a [physical] section or --characteristic")
    sigmas = config.sweep.sigma_list or [config.physical.sigma]
    rows = sigma_sweep(config.physical, sigmas)
    write_csv(out / "nondim.csv", ["sigma", "eps", "q", "w_scale", "intrinsic_length"],
              [[r.sigma, r.eps, r.q, r.w_scale, r.intrinsic_length] for r in rows])
    lo, hi = Q_INTERVAL
    summary = nondimensionalize(config.physical).model_dump()
    summary["q_in_interval"] = all(lo < r.q < hi for r in rows)
    write_key_values(out / "summary.txt", summary)


def cmd_helmholtz(config: RunConfig, out: Path) -> None:
    """
    Apply the resolvent to the configured field and tabulate its multipliers.
    """
    grid = grid_from_spec(config.grid)
    eps = config.energy.eps
    u = synthetic_field(grid, config.field)
    v = helmholtz_inverse(u, eps)
    write_csv(out / "helmholtz.csv", ["k", "multiplier"], enumerate(resolvent_multiplier(grid, eps).ravel().tolist()))
    write_raftfield(out / "resolvent.raftfield", v)
    write_key_values(out / "summary.txt", {"eps": eps, "residual": helmholtz_residual(u, v, eps),
                                           "mean_u": u.mean(), "mean_v": v.mean()})


COMMAND_HANDLERS: Dict[str, Callable[[RunConfig, Path], None]] = {
    "energy": cmd_energy,
    "flow": cmd_flow,
    "modes": cmd_modes,
    "cell": cmd_cell,
    "gamma": cmd_gamma,
    "nondim": cmd_nondim,
    "helmholtz": cmd_helmholtz,
}


def _configure_logging(level_name: Optional[str]) -> None:
    name = (level_name or settings.LOG_LEVEL).upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        raise ConfigError(f"Unknown log level {name!r}")
    logging.basicConfig(level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2
    try:
        _configure_logging(getattr(args, "log_level", None))
        config = resolve_config(args)
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(out, config)
        logger.info(f"Running {config.command} into {out}")
        COMMAND_HANDLERS[config.command](config, out)
    except Exception as e:
        return exit_code_for(e)
    return 0
