"""Run configuration: a flat ``section.key = value`` text format.

Every length/angle key carries its unit in the name, values are plain
scalars or words, ``#`` starts a comment.  Unknown keys are errors, so a
typo cannot silently fall back to a default.  Command-line ``--set
key=value`` pairs overlay the file before validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Dict, Optional, Tuple

from .tool import ToolDefinition


class ConfigError(ValueError):
    """Malformed, unknown, or inconsistent configuration input."""


def _as_float(raw: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"expected a finite number, got {raw!r}")
    return v


def _as_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}") from None


def _as_str(raw: str) -> str:
    return raw


def _choice(*allowed: str):
    def conv(raw: str) -> str:
        if raw not in allowed:
            raise ConfigError(
                f"expected one of {', '.join(allowed)}; got {raw!r}")
        return raw
    return conv


@dataclass(frozen=True)
class RunConfig:
    """Typed view of one simulation/analysis run."""

    tool_radius_mm: float = 5.0
    tool_fillet_mm: float = 1.5
    tool_tooth_count: int = 1
    spindle_rpm: float = 14400.0
    sampling_dalpha_deg: float = 1.0
    surface_plane_z_mm: float = 0.0
    surface_stock_mm: float = 0.05
    grid_x_min_mm: float = 0.0
    grid_x_max_mm: float = 8.0
    grid_y_min_mm: float = 0.0
    grid_y_max_mm: float = 8.0
    grid_nx: int = 512
    grid_ny: int = 512
    mode_kind: str = "tooth_gated"
    mode_geometry: str = "analytic"
    job_kind: str = "facing"
    job_trajectory_csv: str = ""
    job_yaw_deg: float = 0.0
    job_tilt_deg: float = 1.0
    job_feedrate_m_per_min: float = 2.0
    job_scallop_hc_mm: float = 0.005
    job_stepover_mm: float = 0.0
    output_dir: str = "out"
    predict_radius_variant: str = "as_printed"
    predict_sz_branch: str = "as_printed"
    areal_sal_threshold: float = 0.2
    run_threads: int = 1

    def tool(self) -> ToolDefinition:
        try:
            return ToolDefinition(radius=self.tool_radius_mm,
                                  fillet=self.tool_fillet_mm,
                                  tooth_count=self.tool_tooth_count)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.grid_x_min_mm, self.grid_x_max_mm,
                self.grid_y_min_mm, self.grid_y_max_mm)


#: config key -> (RunConfig field, converter)
_SCHEMA = {
    "tool.radius_mm": ("tool_radius_mm", _as_float),
    "tool.fillet_mm": ("tool_fillet_mm", _as_float),
    "tool.tooth_count": ("tool_tooth_count", _as_int),
    "spindle.rpm": ("spindle_rpm", _as_float),
    "sampling.dalpha_deg": ("sampling_dalpha_deg", _as_float),
    "surface.plane_z_mm": ("surface_plane_z_mm", _as_float),
    "surface.stock_mm": ("surface_stock_mm", _as_float),
    "grid.x_min_mm": ("grid_x_min_mm", _as_float),
    "grid.x_max_mm": ("grid_x_max_mm", _as_float),
    "grid.y_min_mm": ("grid_y_min_mm", _as_float),
    "grid.y_max_mm": ("grid_y_max_mm", _as_float),
    "grid.nx": ("grid_nx", _as_int),
    "grid.ny": ("grid_ny", _as_int),
    "mode.kind": ("mode_kind", _choice("envelope", "tooth_gated")),
    "mode.geometry": ("mode_geometry", _choice("analytic", "mesh")),
    "job.kind": ("job_kind", _choice("facing", "trajectory")),
    "job.trajectory_csv": ("job_trajectory_csv", _as_str),
    "job.yaw_deg": ("job_yaw_deg", _as_float),
    "job.tilt_deg": ("job_tilt_deg", _as_float),
    "job.feedrate_m_per_min": ("job_feedrate_m_per_min", _as_float),
    "job.scallop_hc_mm": ("job_scallop_hc_mm", _as_float),
    "job.stepover_mm": ("job_stepover_mm", _as_float),
    "output.dir": ("output_dir", _as_str),
    "predict.radius_variant": ("predict_radius_variant",
                               _choice("as_printed", "variant")),
    "predict.sz_branch": ("predict_sz_branch",
                          _choice("as_printed", "swapped")),
    "areal.sal_threshold": ("areal_sal_threshold", _as_float),
    "run.threads": ("run_threads", _as_int),
}


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Flat key/value pairs from config text; raises on syntax problems."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def build_config(mapping: Dict[str, str],
                 overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    """Typed, validated RunConfig from raw key/value maps.

    ``overrides`` (CLI ``--set`` pairs) replace file values key by key.
    """
    merged = dict(mapping)
    merged.update(overrides or {})
    kwargs = {}
    for key, raw in merged.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        name, conv = _SCHEMA[key]
        try:
            kwargs[name] = conv(raw)
        except ConfigError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    cfg = RunConfig(**kwargs)
    _validate(cfg)
    return cfg


def load_config(path, overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config_text(text, source=str(path)), overrides)


def _validate(cfg: RunConfig) -> None:
    cfg.tool()
    if not cfg.spindle_rpm > 0:
        raise ConfigError("spindle.rpm must be positive")
    if not 0 < cfg.sampling_dalpha_deg <= 360.0:
        raise ConfigError("sampling.dalpha_deg must lie in (0, 360]")
    if not cfg.surface_stock_mm > 0:
        raise ConfigError("surface.stock_mm must be positive")
    if not (cfg.grid_x_max_mm > cfg.grid_x_min_mm
            and cfg.grid_y_max_mm > cfg.grid_y_min_mm):
        raise ConfigError("grid bounds must satisfy max > min")
    if cfg.grid_nx < 2 or cfg.grid_ny < 2:
        raise ConfigError("grid.nx and grid.ny must be at least 2")
    if cfg.job_kind == "facing":
        if not abs(cfg.job_yaw_deg) < 90.0:
            raise ConfigError("job.yaw_deg must lie in (-90, 90)")
        if not 0.0 <= cfg.job_tilt_deg < 90.0:
            raise ConfigError("job.tilt_deg must lie in [0, 90)")
        if not cfg.job_feedrate_m_per_min > 0:
            raise ConfigError("job.feedrate_m_per_min must be positive")
        if cfg.job_stepover_mm < 0 or cfg.job_scallop_hc_mm < 0:
            raise ConfigError("stepover and scallop must be nonnegative")
        if cfg.job_stepover_mm == 0.0 and cfg.job_scallop_hc_mm == 0.0:
            raise ConfigError(
                "facing jobs need job.stepover_mm or job.scallop_hc_mm")
    elif not cfg.job_trajectory_csv:
        raise ConfigError("trajectory jobs need job.trajectory_csv")
    if not 0.0 < cfg.areal_sal_threshold < 1.0:
        raise ConfigError("areal.sal_threshold must lie in (0, 1)")
    if cfg.run_threads < 1:
        raise ConfigError("run.threads must be at least 1")


def config_lines(cfg: RunConfig) -> list:
    """The config rendered back to its text grammar (stable key order)."""
    by_field = {name: key for key, (name, _) in _SCHEMA.items()}
    out = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        out.append(f"{by_field[f.name]} = {val}")
    return out
