"""Nominal part surfaces and their line-net discretization.

A line-net samples the nominal surface on a uniform XY grid; every cell
carries the surface anchor point, the local unit normal and a signed cut
offset ``c`` measured along that normal (positive = uncut stock above the
nominal surface).  Milling only ever lowers ``c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class NominalSurface:
    """Either a horizontal plane z = z0 or the doubly ruled saddle z = xy/k."""

    kind: str = "plane"
    z0: float = 0.0
    k: float = 50.0

    def __post_init__(self):
        if self.kind not in ("plane", "hyperbolic_paraboloid"):
            raise ValueError(f"unknown surface kind {self.kind!r}")
        if self.kind == "hyperbolic_paraboloid" and self.k == 0.0:
            raise ValueError("warp constant k must be nonzero")

    def height(self, x, y):
        if self.kind == "plane":
            return np.broadcast_to(np.float64(self.z0), np.broadcast_shapes(
                np.shape(x), np.shape(y))).copy()
        return np.asarray(x, dtype=np.float64) * np.asarray(y) / self.k


def surface_normal(surface: NominalSurface, x, y) -> np.ndarray:
    """Upward unit normal(s) at (x, y); broadcasts, last axis is xyz."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if surface.kind == "plane":
        n = np.zeros(np.broadcast_shapes(x.shape, y.shape) + (3,))
        n[..., 2] = 1.0
        return n
    n = np.stack(np.broadcast_arrays(-y / surface.k, -x / surface.k,
                                     np.ones_like(x * y)), axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


@dataclass
class LineNet:
    """Uniform XY grid of normal lines with per-cell cut offsets.

    Arrays are indexed [iy, ix]; ``anchors`` has shape (ny, nx, 3),
    ``normals`` likewise, ``offsets`` (ny, nx).  ``vertical`` is True when
    every normal is exactly +z (enables the fast engine path).
    """

    origin: tuple[float, float]
    spacing: tuple[float, float]
    anchors: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    stock: float
    vertical: bool = field(default=False)

    @property
    def dims(self) -> tuple[int, int]:
        ny, nx = self.offsets.shape
        return nx, ny

    def xs(self) -> np.ndarray:
        return self.origin[0] + self.spacing[0] * np.arange(self.offsets.shape[1])

    def ys(self) -> np.ndarray:
        return self.origin[1] + self.spacing[1] * np.arange(self.offsets.shape[0])

    def copy(self) -> "LineNet":
        return LineNet(origin=self.origin, spacing=self.spacing,
                       anchors=self.anchors.copy(), normals=self.normals.copy(),
                       offsets=self.offsets.copy(), stock=self.stock,
                       vertical=self.vertical)


def _grid(bounds, nx, ny):
    xmin, xmax, ymin, ymax = bounds
    if not (nx >= 2 and ny >= 2):
        raise ValueError("grid needs nx, ny >= 2")
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("degenerate bounds")
    gx = (xmax - xmin) / (nx - 1)
    gy = (ymax - ymin) / (ny - 1)
    x = xmin + gx * np.arange(nx)
    y = ymin + gy * np.arange(ny)
    return x, y, gx, gy


def make_plane_net(z0: float, bounds, nx: int, ny: int, stock: float) -> LineNet:
    """Vertical line-net over the plane z = z0, all offsets at ``stock``."""
    if not stock > 0.0:
        raise ValueError("stock must be positive")
    x, y, gx, gy = _grid(bounds, nx, ny)
    anchors = np.empty((ny, nx, 3))
    anchors[..., 0] = x[None, :]
    anchors[..., 1] = y[:, None]
    anchors[..., 2] = z0
    normals = np.zeros((ny, nx, 3))
    normals[..., 2] = 1.0
    return LineNet(origin=(bounds[0], bounds[2]), spacing=(gx, gy),
                   anchors=anchors, normals=normals,
                   offsets=np.full((ny, nx), float(stock)), stock=float(stock),
                   vertical=True)


def make_hypar_net(k: float, bounds, nx: int, ny: int, stock: float) -> LineNet:
    """Line-net over the saddle z = xy/k with true surface normals."""
    if not stock > 0.0:
        raise ValueError("stock must be positive")
    surf = NominalSurface(kind="hyperbolic_paraboloid", k=k)
    x, y, gx, gy = _grid(bounds, nx, ny)
    xx, yy = np.meshgrid(x, y)
    anchors = np.stack([xx, yy, surf.height(xx, yy)], axis=-1)
    normals = surface_normal(surf, xx, yy)
    return LineNet(origin=(bounds[0], bounds[2]), spacing=(gx, gy),
                   anchors=anchors, normals=normals,
                   offsets=np.full((ny, nx), float(stock)), stock=float(stock),
                   vertical=False)
