"""Filleted-end cutter geometry.

Units are mm and radians throughout.  A cutter is a flat bottom disc of
radius ``radius - fillet``, a quarter-torus fillet of tube radius ``fillet``
and a cylindrical barrel up to ``flute_top`` (default ``2 * radius``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import intersect
from .intersect import GEOM_TOL, MeshIndex


class SingularOrientationError(ValueError):
    """Tool orientation makes the requested effective radius undefined."""


class MeshBudgetError(ValueError):
    """Requested chord error needs more triangles than the configured cap."""


class Hit(NamedTuple):
    """Line/cutter intersection: parameter along the line (mm, since the
    direction is unit length) and hit azimuth measured from the spindle
    reference direction."""

    t: float
    phi: float


@dataclass
class ToolDefinition:
    """Cutter dimensions plus optional triangle-mesh override.

    ``mesh`` is an (n, 3, 3) tool-frame triangle soup; when supplied with a
    declared ``chord_error`` the vertices are checked against the analytic
    envelope on construction.
    """

    radius: float = 5.0
    fillet: float = 1.5
    tooth_count: int = 1
    flute_top: Optional[float] = None
    mesh: Optional[np.ndarray] = None
    chord_error: Optional[float] = None
    _index: Optional[MeshIndex] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (self.radius > 0 and 0 < self.fillet < self.radius):
            raise ValueError("need radius > fillet > 0")
        if self.tooth_count < 1:
            raise ValueError("tooth_count must be >= 1")
        if self.flute_top is None:
            self.flute_top = 2.0 * self.radius
        if self.flute_top < self.fillet:
            raise ValueError("flute_top must reach past the fillet")
        if self.mesh is not None:
            self.mesh = np.asarray(self.mesh, dtype=np.float64)
            if self.mesh.ndim != 3 or self.mesh.shape[1:] != (3, 3):
                raise ValueError("mesh must have shape (n, 3, 3)")
            rr = np.hypot(self.mesh[:, :, 0], self.mesh[:, :, 1])
            if rr.max() > self.radius + 1e-6:
                raise ValueError("mesh vertex outside the declared radius")
            if self.chord_error is not None:
                dev = np.abs(_surface_distance(self, self.mesh.reshape(-1, 3)))
                if dev.max() > self.chord_error + 1e-9:
                    raise ValueError("mesh deviates beyond the declared chord error")

    @property
    def ring(self) -> float:
        """Radius of the fillet center circle (= flat bottom radius)."""
        return self.radius - self.fillet

    def mesh_index(self) -> MeshIndex:
        if self.mesh is None:
            raise ValueError("tool has no mesh")
        if self._index is None:
            self._index = MeshIndex(self.mesh)
        return self._index


@dataclass
class ToolState:
    """Instantaneous cutter pose: tip position, unit axis, spindle angle."""

    tip: np.ndarray
    axis: np.ndarray
    spindle_angle: float = 0.0

    def __post_init__(self):
        self.tip = np.asarray(self.tip, dtype=np.float64).reshape(3)
        self.axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        n = np.linalg.norm(self.axis)
        if abs(n - 1.0) > 1e-9:
            raise ValueError("axis must be unit length")


def profile_height(rho: float, tool: ToolDefinition) -> float:
    """Height of the cutter bottom above the tip plane at axis distance rho.

    Zero on the flat bottom, the fillet sagitta across the quarter torus.
    """
    if rho < -GEOM_TOL or rho > tool.radius + GEOM_TOL:
        raise ValueError("rho outside [0, radius]")
    rho = min(max(rho, 0.0), tool.radius)
    if rho <= tool.ring:
        return 0.0
    d = rho - tool.ring
    return tool.fillet - math.sqrt(max(tool.fillet ** 2 - d * d, 0.0))


def effective_radius(theta_n: float, theta_t: float, tool: ToolDefinition,
                     variant: str = "as_printed") -> float:
    """Effective transverse radius of the inclined cutter.

    ``as_printed`` uses cos²θn on both denominator terms; ``variant`` uses
    sin²θn on the second term.  Orientations that drive the selected
    denominator to zero raise :class:`SingularOrientationError`.
    """
    if not 0.0 <= theta_t <= math.pi / 2 + 1e-12:
        raise ValueError("theta_t must lie in [0, pi/2]")
    if not abs(theta_n) < math.pi / 2:
        raise ValueError("theta_n must lie in (-pi/2, pi/2)")
    R, r = tool.radius, tool.fillet
    st = math.sin(theta_t)
    cn2 = math.cos(theta_n) ** 2
    sn2 = math.sin(theta_n) ** 2
    if variant == "as_printed":
        denom = R * st * cn2 + (R + r * st) * cn2
    elif variant == "variant":
        denom = R * st * cn2 + (R + r * st) * sn2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if abs(denom) <= 1e-12:
        raise SingularOrientationError(
            f"effective radius undefined at theta_n={theta_n!r}, theta_t={theta_t!r}"
        )
    return r * (R + r * st) / denom


def spindle_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (X, Y) completing the axis; X is the zero reference for
    spindle angles.  Stable for any axis not parallel to world x."""
    a = np.asarray(axis, dtype=np.float64)
    x = np.array([1.0, 0.0, 0.0]) - a * a[0]
    nx = np.linalg.norm(x)
    if nx < 1e-9:
        x = np.array([0.0, 1.0, 0.0]) - a * a[1]
        nx = np.linalg.norm(x)
    x /= nx
    y = np.cross(a, x)
    return x, y


def lowest_point_offset(tool: ToolDefinition, axis: np.ndarray) -> float:
    """z of the lowest cutter surface point relative to the tip (<= 0).

    Exact closed form.  With the axis pointing upward the minimum sits on
    the fillet torus at the azimuth opposite the tilt (minimize
    (ring + r sin u) * rz + r (1 - cos u) * az over the arc and the rim
    direction rz in [-|a_xy|, |a_xy|]); pointing downward it moves to the
    barrel's top rim.
    """
    a = np.asarray(axis, dtype=np.float64)
    axy = math.hypot(a[0], a[1])
    az = a[2]
    if az < 0.0:
        return float(-tool.radius * axy + tool.flute_top * az)
    return float(-tool.ring * axy - tool.fillet * (math.hypot(axy, az) - az))


def _surface_distance(tool: ToolDefinition, pts: np.ndarray) -> np.ndarray:
    """Signed-ish distance from tool-frame points to the cutter surface."""
    pts = np.atleast_2d(pts)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    z = pts[:, 2]
    d_disc = np.where(rho <= tool.ring + 1e-12, np.abs(z), np.inf)
    d_fill = np.abs(np.hypot(rho - tool.ring, z - tool.fillet) - tool.fillet)
    d_fill = np.where((rho >= tool.ring - 1e-9) & (z <= tool.fillet + 1e-9),
                      d_fill, np.inf)
    d_barrel = np.where((z >= tool.fillet - 1e-9) & (z <= tool.flute_top + 1e-9),
                        np.abs(rho - tool.radius), np.inf)
    return np.minimum(np.minimum(d_disc, d_fill), d_barrel)


def mesh_tool(tool: ToolDefinition, chord_error: float = 1e-4,
              flute_height: Optional[float] = None,
              max_triangles: int = 2_000_000) -> np.ndarray:
    """Tessellate the cutter as a tool-frame triangle soup.

    Subdivision keeps the sagitta of every chord within ``chord_error`` by
    budgeting half of it to each parametric direction.  Raises
    :class:`MeshBudgetError` when the triangle estimate exceeds the cap.
    """
    if chord_error <= 0:
        raise ValueError("chord_error must be positive")
    R, r = tool.radius, tool.fillet
    top = tool.flute_top if flute_height is None else flute_height
    e = min(chord_error / 2.0, r * 0.999)
    du = 2.0 * math.acos(max(1.0 - e / r, -1.0))
    n_arc = max(2, math.ceil((math.pi / 2.0) / du))
    ea = min(chord_error / 2.0, R * 0.999)
    dth = 2.0 * math.acos(max(1.0 - ea / R, -1.0))
    n_az = max(3, math.ceil(2.0 * math.pi / dth))

    # profile polyline: tip center, flat rim, fillet arc, barrel top
    u = np.linspace(0.0, math.pi / 2.0, n_arc + 1)
    prho = np.concatenate([[0.0], tool.ring + r * np.sin(u), [R]])
    pz = np.concatenate([[0.0], r - r * np.cos(u), [top]])

    est = 2 * (len(prho) - 1) * n_az
    if est > max_triangles:
        raise MeshBudgetError(
            f"chord error {chord_error} needs ~{est} triangles (cap {max_triangles})"
        )

    th = np.linspace(0.0, 2.0 * math.pi, n_az, endpoint=False)
    ct, st = np.cos(th), np.sin(th)
    tris = []
    for k in range(len(prho) - 1):
        r0, z0 = prho[k], pz[k]
        r1, z1 = prho[k + 1], pz[k + 1]
        a0 = np.stack([r0 * ct, r0 * st, np.full(n_az, z0)], axis=1)
        a1 = np.stack([r0 * np.roll(ct, -1), r0 * np.roll(st, -1),
                       np.full(n_az, z0)], axis=1)
        b0 = np.stack([r1 * ct, r1 * st, np.full(n_az, z1)], axis=1)
        b1 = np.stack([r1 * np.roll(ct, -1), r1 * np.roll(st, -1),
                       np.full(n_az, z1)], axis=1)
        if r0 == 0.0:
            tris.append(np.stack([a0, b1, b0], axis=1))  # fan at the tip
        else:
            tris.append(np.stack([a0, b0, b1], axis=1))
            tris.append(np.stack([a0, b1, a1], axis=1))
    return np.concatenate(tris, axis=0)


def _to_tool_frame(origin, direction, state: ToolState):
    xhat, yhat = spindle_frame(state.axis)
    basis = np.stack([xhat, yhat, state.axis], axis=0)  # rows: world -> tool
    o = basis @ (np.asarray(origin, dtype=np.float64) - state.tip)
    d = basis @ np.asarray(direction, dtype=np.float64)
    return o, d


def line_cutter_intersection(origin, direction, state: ToolState,
                             tool: ToolDefinition) -> Optional[Hit]:
    """Smallest non-negative intersection of a line with the cutter surface.

    ``direction`` must be unit length, so the returned parameter is a
    distance in mm.  ``phi`` is measured from the spindle reference, i.e. it
    shifts by exactly minus the spindle-angle change.  Returns None on miss.
    Near-tangent grazes within ``GEOM_TOL`` count as hits, and parameters
    down to ``-GEOM_TOL`` are accepted.
    """
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be unit length")
    o, d = _to_tool_frame(origin, direction, state)
    t, phi, hit = intersect.batch_intersect(
        o[None, :], d[None, :], tool.radius, tool.fillet, tool.flute_top
    )
    if not hit[0]:
        return None
    rel = (phi[0] - state.spindle_angle) % (2.0 * math.pi)
    return Hit(float(t[0]), float(rel))


def line_mesh_intersection(origin, direction, state: ToolState,
                           tool: ToolDefinition) -> Optional[Hit]:
    """Mesh counterpart of :func:`line_cutter_intersection`.

    The mesh is the rotating tool body, so the line is expressed in the
    spindle (body) frame before the triangle tests; the returned azimuth is
    therefore already measured from the spindle reference.
    """
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be unit length")
    o, d = _to_tool_frame(origin, direction, state)
    ca, sa = math.cos(-state.spindle_angle), math.sin(-state.spindle_angle)
    rot = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ob, db = rot @ o, rot @ d
    index = tool.mesh_index()
    cand = index.candidates(ob, db)
    t = intersect.moller_trumbore(ob, db, index.triangles[cand])
    if not np.isfinite(t):
        return None
    hx, hy = ob[0] + t * db[0], ob[1] + t * db[1]
    return Hit(float(t), float(math.atan2(hy, hx) % (2.0 * math.pi)))
