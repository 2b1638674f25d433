"""Material-removal engine: sweeps sampled tool states through a line-net.

Each grid cell carries a signed offset along its line; every tool state may
truncate it at the deepest cutter intersection (a per-cell minimum), and in
tooth-gated mode only hits whose azimuth falls inside the state's spindle
window count.  The reference path folds states with vectorized numpy; for
vertical line-nets a compiled per-revolution kernel produces the same field
(within floating-point noise) orders of magnitude faster.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .intersect import GEOM_TOL, batch_intersect
from .surface import LineNet
from .tool import (ToolDefinition, line_mesh_intersection,
                   lowest_point_offset, spindle_frame)
from .trajectory import SampledToolState, StateArrays, states_as_arrays

TWO_PI = 2.0 * math.pi

__all__ = [
    "EngineError", "SimulationMode", "HeightField",
    "cut_sample", "simulate",
    "export_heightfield", "export_heightfield_csv", "load_heightfield_csv",
    "export_heightfield_pgm", "write_stats_report",
]


class EngineError(RuntimeError):
    """The simulation could not produce a usable field."""


@dataclass(frozen=True)
class SimulationMode:
    """How hits are accepted.

    mode
        ``"envelope"`` keeps every intersection (the swept envelope);
        ``"tooth_gated"`` keeps a hit only when its azimuth is swept by a
        cutting edge during the sample's spindle window.
    cull_radius
        Spatial pre-filter: cells whose line stays farther than this from
        the tool axis segment are skipped.  Defaults to the tool radius,
        the tightest correct value.
    geometry
        ``"analytic"`` uses the exact surface intersection; ``"mesh"``
        intersects the tessellated cutter instead (needs ``tool.mesh``).
    """

    mode: str = "tooth_gated"
    cull_radius: Optional[float] = None
    geometry: str = "analytic"

    def __post_init__(self) -> None:
        if self.mode not in ("envelope", "tooth_gated"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.geometry not in ("analytic", "mesh"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.cull_radius is not None and not self.cull_radius > 0.0:
            raise ValueError("cull_radius must be positive")

    def resolved_cull(self, tool: ToolDefinition) -> float:
        cull = self.cull_radius if self.cull_radius is not None else tool.radius
        if cull < tool.radius - 1e-12:
            raise ValueError(
                f"cull_radius {cull} smaller than the tool radius {tool.radius}")
        return float(cull)


@dataclass
class HeightField:
    """Machined topography on a regular XY grid.

    ``heights_um`` is finite on every unmasked cell and NaN on masked ones;
    ``mask`` is True where the tool never touched the cell.  ``offsets_mm``
    keeps the raw signed cut offsets along the cell lines.
    """

    origin: tuple
    spacing: tuple
    heights_um: np.ndarray
    mask: np.ndarray
    offsets_mm: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def dims(self) -> tuple:
        ny, nx = self.heights_um.shape
        return nx, ny

    def copy(self) -> "HeightField":
        return HeightField(self.origin, self.spacing,
                           self.heights_um.copy(), self.mask.copy(),
                           None if self.offsets_mm is None
                           else self.offsets_mm.copy(),
                           dict(self.meta))


# ---------------------------------------------------------------------------
# reference path


def _grid_xy(net: LineNet):
    xs = net.origin[0] + net.spacing[0] * np.arange(net.offsets.shape[1])
    ys = net.origin[1] + net.spacing[1] * np.arange(net.offsets.shape[0])
    return xs, ys


def _segment_distance_xy(px, py, a, b):
    """Distance from points to the 2D segment a-b (broadcasting)."""
    ex, ey = b[0] - a[0], b[1] - a[1]
    ee = ex * ex + ey * ey
    wx, wy = px - a[0], py - a[1]
    if ee > 0.0:
        h = np.clip((wx * ex + wy * ey) / ee, 0.0, 1.0)
        wx = wx - h * ex
        wy = wy - h * ey
    return np.hypot(wx, wy)


def _line_segment_distance(anchors, dirs, p0, p1):
    """Distance from lines (anchor, unit dir) to the 3D segment p0-p1."""
    e = p1 - p0
    C = float(e @ e)
    w0 = p0 - anchors
    B = dirs @ e
    D = np.einsum("ij,ij->i", dirs, w0)
    E = w0 @ e
    denom = C - B * B
    s = np.where(denom > 1e-18, (B * D - E) / np.where(denom > 1e-18, denom, 1.0),
                 0.0)
    s = np.clip(s, 0.0, 1.0)
    u = D + s * B
    r = w0 + s[:, None] * e[None, :] - u[:, None] * dirs
    return np.sqrt(np.einsum("ij,ij->i", r, r))


def _candidate_window(net: LineNet, tip, axis, tool, cull):
    """Index window + exact distance cull for one state.  Returns (iy, ix)
    arrays of candidate cells (possibly empty)."""
    ny, nx = net.offsets.shape
    xs, ys = _grid_xy(net)
    axy = math.hypot(axis[0], axis[1])
    reach = cull + tool.flute_top * axy + GEOM_TOL
    if not net.vertical:
        nrm = net.normals
        slope = np.max(np.hypot(nrm[..., 0], nrm[..., 1])
                       / np.maximum(nrm[..., 2], 1e-12))
        zspan = (net.stock + tool.flute_top
                 + float(np.max(np.abs(tip[2] - net.anchors[..., 2]))))
        reach += slope * zspan
    x_lo = np.searchsorted(xs, tip[0] - reach, side="left")
    x_hi = np.searchsorted(xs, tip[0] + reach, side="right")
    y_lo = np.searchsorted(ys, tip[1] - reach, side="left")
    y_hi = np.searchsorted(ys, tip[1] + reach, side="right")
    if x_lo >= x_hi or y_lo >= y_hi:
        return (np.empty(0, dtype=np.intp),) * 2
    iy, ix = np.mgrid[y_lo:y_hi, x_lo:x_hi]
    iy = iy.ravel()
    ix = ix.ravel()

    p0 = np.asarray(tip, dtype=np.float64)
    p1 = p0 + tool.flute_top * np.asarray(axis, dtype=np.float64)
    if net.vertical:
        d = _segment_distance_xy(xs[ix], ys[iy], p0[:2], p1[:2])
    else:
        anchors = net.anchors[iy, ix]
        dirs = net.normals[iy, ix]
        d = _line_segment_distance(anchors, dirs, p0, p1)
    keep = d <= cull + GEOM_TOL
    return iy[keep], ix[keep]


def cut_sample(net: LineNet, sample: SampledToolState, tool: ToolDefinition,
               mode: SimulationMode, _stats: Optional[dict] = None) -> LineNet:
    """Truncate the net's lines at their deepest intersection with one tool
    state (minimum update; misses leave cells unchanged).  Mutates and
    returns ``net``."""
    state = sample.state
    cull = mode.resolved_cull(tool)
    tip = np.asarray(state.tip, dtype=np.float64)
    axis = np.asarray(state.axis, dtype=np.float64)

    iy, ix = _candidate_window(net, tip, axis, tool, cull)
    if iy.size == 0:
        return net

    anchors = net.anchors[iy, ix]
    normals = net.normals[iy, ix]
    offsets = net.offsets[iy, ix]

    # exact reach bound: no surface point lies below this state's lowest z
    zmin = tip[2] + lowest_point_offset(tool, axis)
    nz = normals[:, 2]
    lb = np.where(nz > 1e-12, (zmin - anchors[:, 2]) / np.maximum(nz, 1e-12),
                  -np.inf)
    live = lb < offsets
    if _stats is not None:
        _stats["candidates"] += int(iy.size)
    if not np.any(live):
        return net
    iy, ix = iy[live], ix[live]
    anchors, normals, offsets = anchors[live], normals[live], offsets[live]

    if mode.geometry == "mesh":
        c_hit, phi_rel, hit = _mesh_hits(anchors, normals, net.stock, state,
                                         tool)
    else:
        xhat, yhat = spindle_frame(axis)
        basis = np.stack([xhat, yhat, axis])
        origins = anchors - net.stock * normals
        o = (origins - tip) @ basis.T
        d = normals @ basis.T
        t, phi, hit = batch_intersect(o, d, tool.radius, tool.fillet,
                                      tool.flute_top)
        c_hit = t - net.stock
        phi_rel = np.mod(phi - state.spindle_angle, TWO_PI)
    if _stats is not None:
        _stats["evaluated"] += int(iy.size)

    ok = hit
    if mode.mode == "tooth_gated":
        step = TWO_PI / tool.tooth_count
        ok = ok & (np.mod(phi_rel, step) < sample.window_length)
    improve = ok & (c_hit < offsets)
    if np.any(improve):
        net.offsets[iy[improve], ix[improve]] = c_hit[improve]
        if _stats is not None:
            _stats["hits"] += int(np.count_nonzero(improve))
    return net


def _mesh_hits(anchors, normals, stock, state, tool):
    if tool.mesh is None:
        raise EngineError("mesh geometry requested but the tool has no mesh")
    n = anchors.shape[0]
    c_hit = np.full(n, np.inf)
    phi_rel = np.zeros(n)
    hit = np.zeros(n, dtype=bool)
    for i in range(n):
        origin = anchors[i] - stock * normals[i]
        h = line_mesh_intersection(origin, normals[i], state, tool)
        if h is not None:
            c_hit[i] = h.t - stock
            phi_rel[i] = h.phi
            hit[i] = True
    return c_hit, phi_rel, hit


# ---------------------------------------------------------------------------
# fast path


def _fast_eligibility(net: LineNet, arrays: tuple, tool: ToolDefinition,
                      mode: SimulationMode) -> tuple:
    if mode.geometry != "analytic":
        return False, "mesh geometry runs on the reference path"
    if not net.vertical:
        return False, "compiled kernels need vertical line-nets"
    if float(np.ptp(net.anchors[..., 2])) != 0.0:
        return False, "compiled kernels need a constant-z anchor plane"
    if float(np.max(net.offsets)) > net.stock + GEOM_TOL:
        return False, "offsets above the stock defeat the depth bounds"
    _, axes, alphas, wlens, _, _ = arrays
    if float(np.min(axes[:, 2])) <= 1e-6:
        return False, "axis must point upward for the compiled kernels"
    if mode.mode == "tooth_gated":
        if np.any(np.diff(alphas) < -1e-12):
            return False, "spindle angles must be non-decreasing"
        if np.any(wlens < 0.0):
            return False, "negative tooth window"
        if alphas.size > 1 and np.any(wlens[:-1] > np.diff(alphas) + 1e-9):
            return False, "tooth windows overlap"
        if float(np.max(wlens)) >= TWO_PI / tool.tooth_count:
            return False, "tooth window spans the whole pitch"
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False, "numba kernels unavailable"
    return True, ""


def _vector_frames(axes: np.ndarray):
    """Per-state spindle frames, matching tool.spindle_frame."""
    n = axes.shape[0]
    x = np.zeros((n, 3))
    x[:, 0] = 1.0
    x -= axes * axes[:, :1]
    nx = np.linalg.norm(x, axis=1)
    bad = nx < 1e-9
    if np.any(bad):
        y0 = np.zeros((int(bad.sum()), 3))
        y0[:, 1] = 1.0
        x[bad] = y0 - axes[bad] * axes[bad, 1:2]
        nx[bad] = np.linalg.norm(x[bad], axis=1)
    x /= nx[:, None]
    y = np.cross(axes, x)
    return x, y


def _quick_cos_threshold(tipdz, stock, az_lo, az_hi, axy, ldr, ring, fillet):
    """Cosine threshold for the per-cell angular cull of one revolution.

    When the lowest tip stays ``tipdz`` above the anchor plane and no cell
    offset exceeds ``stock``, an improving hit needs its engagement azimuth
    to lean far enough toward the downhill side.  This returns ``cos`` of
    the smallest world-frame bearing off the uphill direction (already
    discounted by the in-revolution uphill drift ``ldr``) such a hit can
    show; ``2.0`` disables the cull, ``-1.0`` excludes every bearing.
    """
    g = tipdz - stock
    if axy < 1e-12 or g <= 0.0 or ldr >= math.pi - 1e-9:
        return 2.0

    def margin(b):
        # clearance of the deepest cutter point over the stock plane when
        # the downhill lean rate is b (decreasing in b)
        return fillet * (az_lo - math.hypot(az_lo, b)) - ring * b + g

    hi = math.inf
    if ring > 1e-12:
        hi = g / ring
    if fillet > 1e-12:
        hi = min(hi, az_lo + g / fillet)
    if not math.isfinite(hi) or margin(hi) > 0.0:
        return 2.0
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if margin(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    if lo >= axy:
        return -1.0
    # spindle-frame bearing acos(-lo/axy) mapped to the world frame, where
    # azimuths contract by the axis projection (tan_world = az * tan_frame)
    bw = math.pi - math.atan2(
        az_hi * math.sqrt(max(axy * axy - lo * lo, 0.0)), lo)
    wl = bw - ldr
    if wl <= 1e-9:
        return 2.0
    if wl >= math.pi:
        return -1.0
    return math.cos(wl)


def _revolution_table(tips, axes, alphas, wlens, xh, yh, z0, stock, tool):
    """Group states into spindle revolutions and bound each group's reach.

    Every bound is conservative: a cull based on this table can only skip
    work that provably cannot change any cell's minimum, and the drift
    columns (crossing chord sag, per-state crossing step, per-state frame
    twist) upper-bound how far a cell's engagement azimuth can move between
    neighbouring states.
    """
    from . import _kernels as K

    n = tips.shape[0]
    boundaries = [0]
    base = alphas[0]
    for k in range(1, n):
        if alphas[k] - base >= TWO_PI - 1e-9:
            boundaries.append(k)
            base = alphas[k]
    boundaries.append(n)
    rev_ptr = np.asarray(boundaries, dtype=np.int64)
    nrev = rev_ptr.size - 1

    axy = np.hypot(axes[:, 0], axes[:, 1])
    az = axes[:, 2]
    low = np.where(az < 0.0,
                   -tool.radius * axy + tool.flute_top * az,
                   -tool.ring * axy - tool.fillet * (np.hypot(axy, az) - az))
    st_zlow = tips[:, 2] + low
    cx = tips[:, 0] + axes[:, 0] * (z0 - tips[:, 2]) / az
    cy = tips[:, 1] + axes[:, 1] * (z0 - tips[:, 2]) / az
    zr = stock + GEOM_TOL

    tab = np.zeros((nrev, K.REV_TAB_COLS))
    for r in range(nrev):
        s0, s1 = rev_ptr[r], rev_ptr[r + 1]
        sl = slice(s0, s1)
        az_min = float(np.min(az[sl]))
        az_max = float(np.max(az[sl]))
        axy_max = float(np.max(axy[sl]))
        axy_min = float(np.min(axy[sl]))
        tab[r, K._RAZM] = az_min
        tab[r, K._RAXY] = axy_max
        tab[r, K._RAXN] = axy_min
        tab[r, K._RZLO] = float(np.min(st_zlow[sl]))
        tab[r, K._RTPZ] = float(np.min(tips[sl, 2]))
        # an improving hit sits within the stock of the anchor plane, which
        # caps its lateral spread around the axis crossing track
        r_imp = (tool.radius + zr * axy_max) / az_min + GEOM_TOL
        tab[r, K._RX0] = float(np.min(cx[sl])) - r_imp
        tab[r, K._RX1] = float(np.max(cx[sl])) + r_imp
        tab[r, K._RY0] = float(np.min(cy[sl])) - r_imp
        tab[r, K._RY1] = float(np.max(cy[sl])) + r_imp

        ca = np.array([cx[s0], cy[s0]])
        cb = np.array([cx[s1 - 1], cy[s1 - 1]])
        tab[r, K._RCX0], tab[r, K._RCY0] = ca
        tab[r, K._RCX1], tab[r, K._RCY1] = cb
        sag = float(np.max(_segment_distance_xy(cx[sl], cy[sl], ca, cb)))
        tab[r, K._RSAG] = sag
        tab[r, K._RPAD] = r_imp + sag
        tab[r, K._RCLN] = float(np.hypot(cb[0] - ca[0], cb[1] - ca[1]))
        # world azimuth of the tool's uphill side (opposite the axis lean)
        # at the first state, and how far it drifts within the revolution
        if axy_min > 1e-12:
            lean = np.arctan2(-axes[sl, 1], -axes[sl, 0])
            dl = np.angle(np.exp(1j * (lean - lean[0])))
            tab[r, K._RLNA] = float(lean[0])
            tab[r, K._RLDR] = float(np.max(np.abs(dl)))
        else:
            tab[r, K._RLNA] = 0.0
            tab[r, K._RLDR] = np.pi
        if s1 - s0 > 1:
            ds = float(np.max(np.hypot(np.diff(cx[sl]), np.diff(cy[sl]))))
            fdel = float(np.max(
                np.linalg.norm(np.diff(xh[sl], axis=0), axis=1)
                + np.linalg.norm(np.diff(yh[sl], axis=0), axis=1)))
            wstep = float(np.min(np.diff(alphas[sl])))
            smax = float(np.max(np.diff(alphas[sl])))
        else:
            ds = 0.0
            fdel = 0.0
            wstep = float(wlens[s1 - 1])
            smax = 0.0
        tab[r, K._RDS] = ds
        tab[r, K._RSMN] = wstep
        tab[r, K._RSMX] = smax
        tab[r, K._RWLM] = float(np.max(wlens[sl]))
        # per-state spindle-frame twist: the frame projection of a unit
        # horizontal vector keeps norm >= az, so its azimuth moves by at
        # most twice the frame delta over that norm (valid while small)
        if fdel <= 0.5 * az_min and wstep > 0.0:
            tab[r, K._RFTW] = 2.0 * fdel / az_min
            near = max(K.NEAR_AXIS, 4.0 * ds / (az_min * wstep))
            if tab[r, K._RFTW] > 0.25 * wstep:
                near = np.inf
        else:
            tab[r, K._RFTW] = np.inf
            near = np.inf
        tab[r, K._RNEAR] = near

        k_disc = 0.5 * tab[r, K._RCLN] + sag
        tab[r, K._RCTX] = 0.5 * (ca[0] + cb[0])
        tab[r, K._RCTY] = 0.5 * (ca[1] + cb[1])
        tab[r, K._RUX] = math.cos(tab[r, K._RLNA])
        tab[r, K._RUY] = math.sin(tab[r, K._RLNA])
        tab[r, K._RQK] = k_disc + 2.0 * zr * axy_max / az_min ** 3
        tab[r, K._RQPD] = r_imp + k_disc
        tab[r, K._RTAU] = _quick_cos_threshold(
            tab[r, K._RTPZ] - z0, stock, az_min, az_max, axy_max,
            tab[r, K._RLDR], tool.ring, tool.fillet)
    return rev_ptr, tab, cx, cy


def _simulate_fast(net: LineNet, arrays: tuple, tool: ToolDefinition,
                   mode: SimulationMode, threads: int) -> dict:
    import numba

    from . import _kernels as K

    tips, axes, alphas, wlens, _, _ = arrays
    xh, yh = _vector_frames(axes)
    z0 = float(net.anchors[0, 0, 2])
    x0, y0 = net.origin
    gx, gy = net.spacing
    cull = mode.resolved_cull(tool)
    ny, nx = net.offsets.shape
    row_stats = np.zeros((ny, 3 if mode.mode == "envelope" else 8),
                         dtype=np.int64)

    avail = getattr(numba.config, "NUMBA_NUM_THREADS", 1)
    numba.set_num_threads(max(1, min(int(threads), avail)))

    if mode.mode == "envelope":
        axy = np.hypot(axes[:, 0], axes[:, 1])
        az = axes[:, 2]
        low = -tool.ring * axy - tool.fillet * (np.hypot(axy, az) - az)
        st_zlow = tips[:, 2] + low
        reach = cull + tool.flute_top * axy + GEOM_TOL
        st_bbox = np.stack([tips[:, 0] - reach, tips[:, 0] + reach,
                            tips[:, 1] - reach, tips[:, 1] + reach], axis=1)
        cx = tips[:, 0] + axes[:, 0] * (z0 - tips[:, 2]) / az
        cy = tips[:, 1] + axes[:, 1] * (z0 - tips[:, 2]) / az
        K.envelope_plane_kernel(net.offsets, x0, y0, gx, gy, z0, net.stock,
                                tips, axes, xh, yh, cx, cy,
                                st_bbox, st_zlow,
                                tool.radius, tool.fillet, tool.flute_top,
                                row_stats)
    else:
        rev_ptr, rev_tab, cx, cy = _revolution_table(
            tips, axes, alphas, wlens, xh, yh, z0, net.stock, tool)
        K.gated_plane_kernel(net.offsets, x0, y0, gx, gy, z0, net.stock,
                             tips, axes, xh, yh, cx, cy, alphas, wlens,
                             rev_ptr, rev_tab,
                             tool.radius, tool.fillet, tool.flute_top,
                             tool.tooth_count, row_stats)
    out = {
        "candidates": int(row_stats[:, 0].sum()),
        "evaluated": int(row_stats[:, 1].sum()),
        "hits": int(row_stats[:, 2].sum()),
    }
    if row_stats.shape[1] >= 8:
        totals = row_stats.sum(axis=0)
        out["scans"] = {"near": int(totals[3]), "guard": int(totals[4])}
        out["walk_probes"] = int(totals[5])
        out["scan_evaluated"] = int(totals[6])
        out["shortcut_closures"] = int(totals[7])
    return out


# ---------------------------------------------------------------------------
# driver


def simulate(net: LineNet,
             states: "Sequence[SampledToolState] | StateArrays",
             tool: ToolDefinition, mode: SimulationMode,
             engine: str = "auto", threads: int = 1) -> HeightField:
    """Fold every sampled state into a copy of the net and return the
    leveled machined topography.

    ``states`` is a sequence of :class:`SampledToolState` or a packed
    :class:`StateArrays`.  ``engine`` is ``"auto"`` (compiled kernels when
    eligible, else the numpy reference), ``"fast"`` or ``"reference"``.
    Raises :class:`EngineError` when no state ever touches the grid, or
    when ``engine="fast"`` is requested but unavailable.
    """
    if not isinstance(states, StateArrays):
        states = list(states)
    if len(states) == 0:
        raise EngineError("simulate needs at least one tool state")
    if engine not in ("auto", "fast", "reference"):
        raise ValueError(f"unknown engine {engine!r}")

    arrays = states_as_arrays(states)
    ok, why = _fast_eligibility(net, arrays, tool, mode)
    if engine == "fast" and not ok:
        raise EngineError(f"fast engine unavailable: {why}")
    chosen = "fast" if (ok and engine != "reference") else "reference"

    work = net.copy()
    stats = {"candidates": 0, "evaluated": 0, "hits": 0}
    if chosen == "fast":
        stats.update(_simulate_fast(work, arrays, tool, mode, threads))
    else:
        samples = (states.to_states() if isinstance(states, StateArrays)
                   else states)
        for sample in samples:
            cut_sample(work, sample, tool, mode, _stats=stats)

    ny, nx = work.offsets.shape
    cells = nx * ny
    stats.update({
        "samples": len(states),
        "cells": cells,
        "culled_fraction": max(0.0, 1.0 - stats["evaluated"]
                               / max(1, cells * len(states))),
        "engine": chosen,
        "mode": mode.mode,
        "tooth_count": tool.tooth_count,
        "grid": [nx, ny],
    })

    touched = work.offsets < net.stock
    if not np.any(touched):
        raise EngineError("the tool never touched the grid")
    ref = float(work.offsets[touched].min())
    heights = np.where(touched, (work.offsets - ref) * 1000.0, np.nan)
    hf = HeightField(origin=net.origin, spacing=net.spacing,
                     heights_um=heights, mask=~touched,
                     offsets_mm=work.offsets,
                     meta={"stats": stats, "offset_reference_mm": ref,
                           "stock_mm": net.stock})
    from .areal import level
    return level(hf)


# ---------------------------------------------------------------------------
# exports


def export_heightfield_csv(hf: HeightField, path, values: str = "heights"):
    """Row-major CSV with `nan` for masked cells; bit-exact round trip."""
    if values == "heights":
        data, unit = hf.heights_um, "um"
    elif values == "offsets":
        if hf.offsets_mm is None:
            raise ValueError("this field carries no raw offsets")
        data = np.where(hf.mask, np.nan, hf.offsets_mm)
        unit = "mm"
    else:
        raise ValueError(f"unknown values selector {values!r}")
    ny, nx = data.shape
    try:
        with open(path, "w") as fh:
            fh.write("# milltopo heightfield v1\n")
            fh.write(f"# nx {nx}\n# ny {ny}\n")
            fh.write(f"# origin {hf.origin[0]:.17g} {hf.origin[1]:.17g}\n")
            fh.write(f"# spacing {hf.spacing[0]:.17g} {hf.spacing[1]:.17g}\n")
            fh.write(f"# values {values} {unit}\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    except OSError as exc:
        raise EngineError(f"cannot write {path}: {exc}") from exc


def load_heightfield_csv(path) -> HeightField:
    """Inverse of :func:`export_heightfield_csv` (values land in
    ``heights_um`` whatever their unit; see meta['values'])."""
    header = {}
    rows = []
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    parts = line[1:].split()
                    if len(parts) >= 2:
                        header[parts[0]] = parts[1:]
                    continue
                rows.append([float(v) for v in line.split(",")])
    except OSError as exc:
        raise EngineError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise EngineError(f"bad heightfield data in {path}: {exc}") from exc
    data = np.asarray(rows, dtype=np.float64)
    if "nx" in header and data.shape[1] != int(header["nx"][0]):
        raise EngineError(f"{path}: row width does not match the nx header")
    origin = tuple(float(v) for v in header.get("origin", ["0", "0"]))
    spacing = tuple(float(v) for v in header.get("spacing", ["1", "1"]))
    return HeightField(origin=origin, spacing=spacing, heights_um=data,
                       mask=np.isnan(data),
                       meta={"values": header.get("values", ["heights"])[0]})


def export_heightfield_pgm(hf: HeightField, path,
                           lo_um: Optional[float] = None,
                           hi_um: Optional[float] = None):
    """16-bit binary PGM; the header comments record the scale and offset
    (masked cells write as 0).

    By default the gray ramp spans the field's min-max; passing both
    ``lo_um`` and ``hi_um`` pins it to that range instead, clipping
    anything outside and recording the clipped-cell count in the header.
    """
    data = hf.heights_um
    ny, nx = data.shape
    valid = ~hf.mask
    if not np.any(valid):
        raise EngineError("cannot render an all-masked field")
    if (lo_um is None) != (hi_um is None):
        raise ValueError("fixed-range rendering needs both lo_um and hi_um")
    fixed = lo_um is not None
    if fixed:
        if not hi_um > lo_um:
            raise ValueError("need hi_um > lo_um")
        lo, hi = float(lo_um), float(hi_um)
        clipped = int(np.count_nonzero(valid & ((data < lo) | (data > hi))))
    else:
        lo = float(data[valid].min())
        hi = float(data[valid].max())
        clipped = 0
    scale = (hi - lo) / 65535.0
    if scale > 0.0:
        pix = np.rint(np.clip((data - lo) / scale, 0.0, 65535.0))
    else:
        pix = np.zeros_like(data)
    pix = np.where(valid, pix, 0.0).astype(">u2")
    try:
        with open(path, "wb") as fh:
            fh.write(b"P5\n")
            fh.write(f"# scale_um_per_count {scale:.17g}\n".encode())
            fh.write(f"# offset_um {lo:.17g}\n".encode())
            fh.write(b"# masked_value 0\n")
            if fixed:
                fh.write(f"# range fixed clipped_cells {clipped}\n".encode())
            else:
                fh.write(b"# range minmax\n")
            fh.write(f"{nx} {ny}\n65535\n".encode())
            fh.write(pix.tobytes())
    except OSError as exc:
        raise EngineError(f"cannot write {path}: {exc}") from exc


def export_heightfield(hf: HeightField, path, format: str = "csv", **kw):
    if format == "csv":
        export_heightfield_csv(hf, path, **kw)
    elif format == "pgm":
        export_heightfield_pgm(hf, path)
    else:
        raise ValueError(f"unknown export format {format!r}")


def write_stats_report(stats: dict, path):
    """Simulation statistics as stable, sorted JSON."""
    try:
        with open(path, "w") as fh:
            json.dump(stats, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except (OSError, TypeError) as exc:
        raise EngineError(f"cannot write {path}: {exc}") from exc
