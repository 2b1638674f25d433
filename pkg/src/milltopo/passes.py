"""Plane-facing pass planning: cutting parameters in, sampled states out.

A facing job covers a rectangular window with parallel one-direction
passes: the tool feeds along +x at constant y, retracts, steps over in y
and re-enters.  Return moves cut nothing and are not sampled.  Every pass
overruns the window by a margin so each cell sees a fully developed cut.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .tool import ToolDefinition, lowest_point_offset
from .trajectory import (MM_S_PER_M_MIN, RAD_S_PER_RPM, StateArrays,
                         ToolPosture, Trajectory, concat_state_arrays,
                         sample_states)

TWO_PI = 2.0 * math.pi

__all__ = ["facing_axis", "facing_pass_lines", "face_plane_states",
           "face_plane_states_machine"]


def facing_axis(tilt_deg: float, yaw_deg: float) -> np.ndarray:
    """Unit tool axis tilted off vertical and rotated about z.

    ``tilt_deg`` is the polar angle from +z; ``yaw_deg`` rotates the lean
    direction from +x toward +y.
    """
    t = math.radians(tilt_deg)
    n = math.radians(yaw_deg)
    return np.array([math.sin(t) * math.cos(n),
                     math.sin(t) * math.sin(n),
                     math.cos(t)])


def facing_pass_lines(bounds, stepover: float, margin: float) -> np.ndarray:
    """Pass centerline y's covering [ymin, ymax] widened by ``margin``."""
    if not stepover > 0.0:
        raise ValueError("stepover must be positive")
    _, _, ymin, ymax = bounds
    start = ymin - margin
    n = int(math.ceil((ymax + margin - start) / stepover)) + 1
    return start + stepover * np.arange(max(n, 1))


def face_plane_states(tool: ToolDefinition, axis, bounds, plane_z: float,
                      stepover: float, feed: float, spindle_speed: float,
                      dalpha: float, margin: Optional[float] = None,
                      ) -> StateArrays:
    """Sample every cutting pass of a one-direction plane facing job.

    The tip height is set so the cutter's lowest point sweeps ``plane_z``.
    Passes are sampled separately and concatenated; each restarts the
    spindle bookkeeping 1-2 turns after the previous pass ended, at the
    next exact whole turn.  That keeps the angle sequence monotone with a
    full-turn gap (so no revolution straddles the uncut repositioning
    move) and gives every pass the same entry phase: tooth bites of
    neighbouring passes line up instead of interleaving at an arbitrary
    offset, which would leave needle-thin uncut slivers whose height
    depends on the pass length rather than on the cutting geometry.
    """
    axis = np.asarray(axis, dtype=np.float64).reshape(3)
    if margin is None:
        margin = tool.radius + stepover
    xmin, xmax, _, _ = bounds
    tip_z = plane_z - lowest_point_offset(tool, axis)
    parts = []
    alpha = 0.0
    t = 0.0
    for y in facing_pass_lines(bounds, stepover, margin):
        enter = ToolPosture(tip=np.array([xmin - margin, y, tip_z]),
                            axis=axis, feed=feed)
        leave = ToolPosture(tip=np.array([xmax + margin, y, tip_z]),
                            axis=axis, feed=feed)
        traj = Trajectory(postures=[enter, leave],
                          spindle_speed=spindle_speed)
        part = sample_states(traj, dalpha, alpha0=alpha, t0=t)
        parts.append(part)
        alpha = TWO_PI * (math.floor(part.alphas[-1] / TWO_PI) + 2.0)
        t = float(part.times[-1])
    return concat_state_arrays(parts)


def face_plane_states_machine(tool: ToolDefinition, tilt_deg: float,
                              yaw_deg: float, bounds, plane_z: float,
                              stepover: float, vf_m_per_min: float,
                              rpm: float, dalpha: float,
                              margin: Optional[float] = None) -> StateArrays:
    """:func:`face_plane_states` with feed in m/min and spindle rpm."""
    return face_plane_states(tool, facing_axis(tilt_deg, yaw_deg), bounds,
                             plane_z, stepover,
                             vf_m_per_min * MM_S_PER_M_MIN,
                             rpm * RAD_S_PER_RPM, dalpha, margin)
