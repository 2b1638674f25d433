"""milltopo: machined-surface topography simulation for filleted-end mills.

Predicts the 3D texture left by 5-axis facing with a filleted-end
(bull-nose) cutter: trajectory sampling locked to the spindle, a grid of
surface-normal lines truncated by exact cutter intersections, and ISO
25178-2 style areal parameters plus closed-form process predictors on top.
"""

__version__ = "0.1.0"

from .analytic import (DesignTable, EffectTable, MachiningParams,
                       analytic_vs_sim_error, factor_effects, full_factorial,
                       load_design_csv, predict_sz, save_design_csv,
                       stepover_from_scallop)
from .areal import (ArealParams, SalResult, StdResult, amplitude_params,
                    autocorrelation_length, autocorrelation_map, compute_all,
                    level, summit_density, texture_direction)
from .config import ConfigError, RunConfig, build_config, load_config
from .engine import (EngineError, HeightField, SimulationMode,
                     export_heightfield, export_heightfield_csv,
                     export_heightfield_pgm, load_heightfield_csv, simulate)
from .passes import face_plane_states, face_plane_states_machine, facing_axis
from .surface import LineNet, NominalSurface, make_hypar_net, make_plane_net
from .tool import (SingularOrientationError, ToolDefinition, ToolState,
                   effective_radius, lowest_point_offset, mesh_tool,
                   profile_height)
from .trajectory import (SampledToolState, StateArrays, ToolPosture,
                         Trajectory, load_postures_csv, sample_states,
                         sample_trajectory, save_postures_csv)

__all__ = [
    "ArealParams", "ConfigError", "DesignTable", "EffectTable",
    "EngineError", "HeightField", "LineNet", "MachiningParams",
    "NominalSurface", "RunConfig", "SalResult", "SampledToolState",
    "SimulationMode", "SingularOrientationError", "StateArrays",
    "StdResult", "ToolDefinition", "ToolPosture", "ToolState", "Trajectory",
    "amplitude_params", "analytic_vs_sim_error", "autocorrelation_length",
    "autocorrelation_map", "build_config", "compute_all",
    "effective_radius", "export_heightfield", "export_heightfield_csv",
    "export_heightfield_pgm", "face_plane_states",
    "face_plane_states_machine", "facing_axis", "factor_effects",
    "full_factorial", "level", "load_config", "load_design_csv",
    "load_heightfield_csv", "load_postures_csv", "lowest_point_offset",
    "make_hypar_net", "make_plane_net", "mesh_tool", "predict_sz",
    "profile_height", "sample_states", "sample_trajectory",
    "save_design_csv", "save_postures_csv", "simulate",
    "stepover_from_scallop", "summit_density", "texture_direction",
]
