"""Command-line front end: simulate | analyze | predict | doe | render.

Every failure exits through one of three numbered doors with a one-line
diagnostic on stderr: 1 for configuration problems, 2 for unreadable or
malformed inputs, 3 for simulation failures.  All outputs are
deterministic for a fixed configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic, areal
from .config import ConfigError, RunConfig, build_config, load_config
from .engine import (EngineError, SimulationMode, export_heightfield_csv,
                     export_heightfield_pgm, load_heightfield_csv, simulate,
                     write_stats_report)
from .passes import face_plane_states_machine
from .surface import make_plane_net
from .tool import SingularOrientationError, ToolDefinition, effective_radius
from .trajectory import Trajectory, load_postures_csv, sample_states

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2
EXIT_SIM = 3


class InputError(ValueError):
    """An input file is missing or does not parse."""


def _one_line(msg: object) -> str:
    return " ".join(str(msg).split())


def _diag(code: int, kind: str, msg: object) -> int:
    print(f"milltopo: {kind}: {_one_line(msg)}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# shared plumbing


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep or not key.strip() or not value.strip():
            raise ConfigError(f"--set needs key=value, got {pair!r}")
        out[key.strip()] = value.strip()
    return out


def _config_from_args(args) -> RunConfig:
    overrides = _parse_overrides(getattr(args, "set", None))
    if getattr(args, "config", None):
        cfg = load_config(args.config, overrides)
    else:
        cfg = build_config({}, overrides)
    updates = {}
    if getattr(args, "threads", None) is not None:
        updates["run_threads"] = args.threads
    if getattr(args, "out", None):
        updates["output_dir"] = args.out
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
        if cfg.run_threads < 1:
            raise ConfigError("--threads must be at least 1")
    return cfg


def _load_field(path):
    p = Path(path)
    if not p.exists():
        raise InputError(f"heightfield {p} does not exist")
    try:
        return load_heightfield_csv(p)
    except EngineError as exc:
        raise InputError(str(exc)) from exc


def _facing_stepover(cfg: RunConfig, tool: ToolDefinition) -> float:
    if cfg.job_stepover_mm > 0.0:
        return cfg.job_stepover_mm
    try:
        req = effective_radius(math.radians(cfg.job_yaw_deg),
                               math.radians(cfg.job_tilt_deg), tool,
                               variant=cfg.predict_radius_variant)
        return analytic.stepover_from_scallop(cfg.job_scallop_hc_mm, req)
    except (SingularOrientationError, ValueError) as exc:
        raise ConfigError(f"cannot derive the stepover: {exc}") from exc


def _states_for(cfg: RunConfig, tool: ToolDefinition):
    dalpha = math.radians(cfg.sampling_dalpha_deg)
    if cfg.job_kind == "facing":
        return face_plane_states_machine(
            tool, cfg.job_tilt_deg, cfg.job_yaw_deg, cfg.bounds(),
            cfg.surface_plane_z_mm, _facing_stepover(cfg, tool),
            cfg.job_feedrate_m_per_min, cfg.spindle_rpm, dalpha)
    path = Path(cfg.job_trajectory_csv)
    if not path.exists():
        raise InputError(f"trajectory {path} does not exist")
    try:
        postures = load_postures_csv(path)
        traj = Trajectory.from_machine_units(postures, cfg.spindle_rpm)
    except (ValueError, OSError) as exc:
        raise InputError(str(exc)) from exc
    return sample_states(traj, dalpha)


def _run_simulation(cfg: RunConfig, engine: str = "auto"):
    tool = cfg.tool()
    states = _states_for(cfg, tool)
    net = make_plane_net(cfg.surface_plane_z_mm, cfg.bounds(),
                         cfg.grid_nx, cfg.grid_ny, cfg.surface_stock_mm)
    mode = SimulationMode(mode=cfg.mode_kind, geometry=cfg.mode_geometry)
    return simulate(net, states, cfg.tool(), mode, engine=engine,
                    threads=cfg.run_threads)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    hf = _run_simulation(cfg, engine=args.engine)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    export_heightfield_csv(hf, outdir / "heightfield.csv")
    export_heightfield_pgm(hf, outdir / "heightfield.pgm")
    write_stats_report(hf.meta["stats"], outdir / "stats.json")
    stats = hf.meta["stats"]
    print(f"wrote {outdir}/heightfield.csv ({stats['grid'][0]}x"
          f"{stats['grid'][1]} cells, {stats['samples']} states, "
          f"engine {stats['engine']})")
    return EXIT_OK


def cmd_analyze(args) -> int:
    hf = _load_field(args.field)
    try:
        leveled = areal.level(hf)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    params = areal.compute_all(leveled, sal_threshold=args.sal_threshold)
    for line in areal.report_lines(params):
        print(line)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "params.csv").write_text(
            ",".join(areal.CSV_COLUMNS) + "\n" + areal.csv_row(params) + "\n")
        (outdir / "report.txt").write_text(
            "\n".join(areal.report_lines(params)) + "\n")
    return EXIT_OK


def _predict_lines(tool: ToolDefinition, yaw_deg: float, tilt_deg: float,
                   scallop_mm: float, feed_per_tooth_mm: float) -> list:
    lines = []
    for variant in ("as_printed", "variant"):
        try:
            req = effective_radius(math.radians(yaw_deg),
                                   math.radians(tilt_deg), tool,
                                   variant=variant)
        except SingularOrientationError as exc:
            lines.append(f"Req_mm[{variant}] = undef({_one_line(exc)})")
            for branch in analytic.SZ_BRANCHES:
                lines.append(f"Sz_um[{variant},{branch}] = "
                             "undef(effective radius is undefined)")
            continue
        lines.append(f"Req_mm[{variant}] = {req:.6g}")
        try:
            step = analytic.stepover_from_scallop(scallop_mm, req)
            lines.append(f"stepover_mm[{variant}] = {step:.6g}")
        except ValueError as exc:
            lines.append(f"stepover_mm[{variant}] = undef({_one_line(exc)})")
        for branch in analytic.SZ_BRANCHES:
            sz = analytic.predict_sz(feed_per_tooth_mm, scallop_mm, req,
                                     tool.fillet, branch)
            lines.append(f"Sz_um[{variant},{branch}] = {sz * 1000.0:.6g}")
    return lines


def cmd_predict(args) -> int:
    try:
        params = analytic.MachiningParams(
            yaw_deg=args.yaw_deg, tilt_deg=args.tilt_deg,
            scallop_mm=args.scallop_mm,
            feed_per_tooth_mm=args.feed_per_tooth_mm,
            feedrate_m_per_min=args.feedrate_m_per_min)
        tool = ToolDefinition(radius=args.radius_mm, fillet=args.fillet_mm)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.tilt_deg < 0.0:
        raise ConfigError("tilt-deg must be nonnegative")
    for line in _predict_lines(tool, params.yaw_deg, params.tilt_deg,
                               params.scallop_mm, params.feed_per_tooth_mm):
        print(line)
    return EXIT_OK


def _doe_from_table(args) -> int:
    path = Path(args.design)
    if not path.exists():
        raise InputError(f"design {path} does not exist")
    try:
        table = analytic.load_design_csv(path)
        effects = analytic.factor_effects(table)
    except (ValueError, OSError) as exc:
        raise InputError(str(exc)) from exc
    for line in analytic.effect_table_lines(effects):
        print(line)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "effects.csv").write_text(analytic.effect_table_csv(effects))
    return EXIT_OK


def _doe_generate_and_run(args) -> int:
    cfg = _config_from_args(args)
    levels = analytic.full_factorial()
    responses = np.empty((levels.shape[0], len(areal.CSV_COLUMNS)))
    for i, (yaw, tilt, hc, vf) in enumerate(levels):
        run_cfg = dataclasses.replace(
            cfg, job_kind="facing", job_yaw_deg=float(yaw),
            job_tilt_deg=float(tilt), job_scallop_hc_mm=float(hc),
            job_stepover_mm=0.0, job_feedrate_m_per_min=float(vf))
        hf = _run_simulation(run_cfg)
        params = areal.compute_all(hf, sal_threshold=cfg.areal_sal_threshold)
        responses[i] = params.as_row()
        print(f"run {i + 1}/{levels.shape[0]}: yaw={yaw:g} tilt={tilt:g} "
              f"hc={hc:g} vf={vf:g} -> Sz={responses[i][0]:.3g} um",
              flush=True)
    table = analytic.DesignTable(levels, responses, areal.CSV_COLUMNS)
    effects = analytic.factor_effects(table)
    for line in analytic.effect_table_lines(effects):
        print(line)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    analytic.save_design_csv(table, outdir / "design_results.csv")
    (outdir / "effects.csv").write_text(analytic.effect_table_csv(effects))
    print(f"wrote {outdir}/design_results.csv and {outdir}/effects.csv")
    return EXIT_OK


def cmd_doe(args) -> int:
    if args.design:
        return _doe_from_table(args)
    return _doe_generate_and_run(args)


def cmd_render(args) -> int:
    hf = _load_field(args.field)
    if args.range:
        lo, sep, hi = args.range.partition(":")
        try:
            lo_um, hi_um = float(lo), float(hi)
        except ValueError:
            raise ConfigError(f"--range needs LO:HI, got {args.range!r}")
        if not sep or not hi_um > lo_um:
            raise ConfigError("--range needs LO:HI with HI > LO")
    else:
        lo_um = hi_um = None
    if args.output:
        target = Path(args.output)
    else:
        outdir = Path(args.out) if args.out else Path(args.field).parent
        outdir.mkdir(parents=True, exist_ok=True)
        target = outdir / (Path(args.field).stem + ".pgm")
    try:
        export_heightfield_pgm(hf, target, lo_um=lo_um, hi_um=hi_um)
    except EngineError as exc:
        raise InputError(str(exc)) from exc
    print(f"wrote {target}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="milltopo",
        description="Milled-surface topography simulation and analysis")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for stochastic fixtures (the standard "
                             "pipelines are deterministic and ignore it)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("-c", "--config", help="run configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", help="output directory (overrides config)")

    p = sub.add_parser("simulate", help="cut a plane and write the topography")
    add_config_flags(p)
    p.add_argument("--engine", choices=("auto", "fast", "reference"),
                   default="auto")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="areal parameters of a heightfield")
    p.add_argument("field", help="heightfield CSV")
    p.add_argument("--sal-threshold", type=float, default=0.2)
    p.add_argument("--out", help="also write params.csv and report.txt here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("predict", help="closed-form Sz / stepover estimates")
    p.add_argument("--yaw-deg", type=float, required=True)
    p.add_argument("--tilt-deg", type=float, required=True)
    p.add_argument("--scallop-mm", type=float, required=True)
    p.add_argument("--feed-per-tooth-mm", type=float, required=True)
    p.add_argument("--feedrate-m-per-min", type=float, default=2.0)
    p.add_argument("--radius-mm", type=float, default=5.0)
    p.add_argument("--fillet-mm", type=float, default=1.5)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("doe", help="main effects of a factorial experiment")
    add_config_flags(p)
    p.add_argument("--design", help="existing response table CSV "
                                    "(skips simulation)")
    p.set_defaults(func=cmd_doe)

    p = sub.add_parser("render", help="render a heightfield to 16-bit PGM")
    p.add_argument("field", help="heightfield CSV")
    p.add_argument("--range", help="fixed LO:HI gray range in um "
                                   "(default: min-max)")
    p.add_argument("--output", help="explicit output file")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _diag(EXIT_CONFIG, "config error", exc)
    except InputError as exc:
        return _diag(EXIT_INPUT, "input error", exc)
    except EngineError as exc:
        return _diag(EXIT_SIM, "simulation error", exc)
