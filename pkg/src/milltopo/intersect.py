"""Line/cutter intersection kernels.

Everything here works in the static tool frame: origin at the tip (center of
the flat bottom), +z along the tool axis.  The cutter surface is the union of

* the flat bottom disc, radius ``R - r`` at z = 0,
* the fillet quadrant of the torus ``(rho - (R - r))**2 + (z - r)**2 = r**2``
  restricted to ``rho >= R - r`` and ``0 <= z <= r``,
* the cylindrical barrel ``rho = R`` for ``r <= z <= flute_top``.

The torus intersection is a monic quartic solved in closed form (resolvent
cubic + two quadratics, complex arithmetic throughout so the code path is
branch-free), followed by a Newton polish on the original quartic.  A root is
accepted when the distance from the polished point to the fillet tube circle
is within ``GEOM_TOL`` — near-tangent grazes inside that band count as hits.
"""

from __future__ import annotations

import numpy as np

#: residual tolerance, mm: polished hits further than this from the surface
#: are treated as misses; parameters this far below zero still count as hits.
GEOM_TOL = 1e-9

_IM_TOL = 1e-4          # pre-filter on |Im| of quartic roots, mm
_PARALLEL_EPS = 1e-20   # |d_xy|^2 below this: line parallel to the axis


def _cbrt(z: np.ndarray) -> np.ndarray:
    """Principal complex cube root (numpy's ** uses the principal branch)."""
    return z ** (1.0 / 3.0)


def _quartic_roots(c3, c2, c1, c0):
    """Roots of monic quartics t^4 + c3 t^3 + c2 t^2 + c1 t + c0.

    All inputs are broadcast 1-D float arrays; returns (n, 4) complex128.
    """
    c3 = np.asarray(c3, dtype=np.complex128)
    shift = c3 / 4.0
    # depressed quartic u^4 + p u^2 + q u + r0
    p = c2 - 3.0 * c3 * c3 / 8.0
    q = c1 - c3 * c2 / 2.0 + c3 ** 3 / 8.0
    r0 = c0 - c3 * c1 / 4.0 + c3 * c3 * c2 / 16.0 - 3.0 * c3 ** 4 / 256.0

    # resolvent cubic m^3 + p m^2 + (p^2/4 - r0) m - q^2/8 = 0
    ca = p
    cb = p * p / 4.0 - r0
    cc = -q * q / 8.0
    P = cb - ca * ca / 3.0
    Q = 2.0 * ca ** 3 / 27.0 - ca * cb / 3.0 + cc
    disc = Q * Q / 4.0 + P ** 3 / 27.0
    S = _cbrt(-Q / 2.0 + np.sqrt(disc))
    # all three cube roots; pick the m with the largest magnitude so that
    # sigma = sqrt(2m) is well conditioned (q != 0 implies m != 0 exactly)
    w1 = np.complex128(-0.5 + 0.8660254037844386j)
    w2 = np.conj(w1)
    ms = []
    for w in (1.0, w1, w2):
        Sk = S * w
        small = np.abs(Sk) < 1e-300
        Sk = np.where(small, 1e-300, Sk)
        wk = Sk - P / (3.0 * Sk)
        ms.append(np.where(small, 0.0, wk) - ca / 3.0)
    ms = np.stack(ms, axis=-1)
    m = np.take_along_axis(ms, np.argmax(np.abs(ms), axis=-1)[..., None], -1)[..., 0]

    sigma = np.sqrt(2.0 * m)
    tiny = np.abs(sigma) < 1e-12
    sigma_safe = np.where(tiny, 1.0, sigma)
    half = p / 2.0 + m
    A = half - q / (2.0 * sigma_safe)
    B = half + q / (2.0 * sigma_safe)
    # biquadratic fallback when sigma ~ 0 (then q ~ 0 as well)
    dq = np.sqrt(p * p - 4.0 * r0)
    A = np.where(tiny, (p + dq) / 2.0, A)
    B = np.where(tiny, (p - dq) / 2.0, B)
    sigma = np.where(tiny, 0.0, sigma)

    d1 = np.sqrt(sigma * sigma - 4.0 * A)
    d2 = np.sqrt(sigma * sigma - 4.0 * B)
    roots = np.stack(
        [
            (-sigma + d1) / 2.0,
            (-sigma - d1) / 2.0,
            (sigma + d2) / 2.0,
            (sigma - d2) / 2.0,
        ],
        axis=-1,
    )
    return roots - shift[..., None]


def torus_candidates(o: np.ndarray, d: np.ndarray, ring: float, tube: float):
    """Real intersection parameters with the full torus, polished.

    o, d: (n, 3) line origins/directions in the tool frame (|d| = 1).
    ring: center-circle radius (R - r); tube: fillet radius r.
    Returns (t, ok): (n, 4) float64 candidates and validity mask.  Quadrant
    restrictions are *not* applied here.
    """
    oz = o[:, 2] - tube  # shift: torus center plane z = r
    b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1] + oz * d[:, 2]
    c = o[:, 0] ** 2 + o[:, 1] ** 2 + oz ** 2 + ring * ring - tube * tube
    e = d[:, 0] ** 2 + d[:, 1] ** 2
    f = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
    g2 = o[:, 0] ** 2 + o[:, 1] ** 2
    a2 = 4.0 * ring * ring

    c3 = 4.0 * b
    c2 = 4.0 * b * b + 2.0 * c - a2 * e
    c1 = 4.0 * b * c - 2.0 * a2 * f
    c0 = c * c - a2 * g2

    roots = _quartic_roots(c3, c2, c1, c0)
    near_real = np.abs(roots.imag) <= _IM_TOL * np.maximum(1.0, np.abs(roots.real))
    t = roots.real.copy()

    # two Newton steps on the original quartic
    for _ in range(2):
        ft = (((t + c3[:, None]) * t + c2[:, None]) * t + c1[:, None]) * t + c0[:, None]
        fp = ((4.0 * t + 3.0 * c3[:, None]) * t + 2.0 * c2[:, None]) * t + c1[:, None]
        fp = np.where(np.abs(fp) < 1e-30, 1e-30, fp)
        step = ft / fp
        step = np.clip(step, -1.0, 1.0)  # keep tangent roots from escaping
        t = t - np.where(near_real, step, 0.0)

    # geometric residual: distance to the tube circle
    px = o[:, 0, None] + t * d[:, 0, None]
    py = o[:, 1, None] + t * d[:, 1, None]
    pz = oz[:, None] + t * d[:, 2, None]
    rho = np.sqrt(px * px + py * py)
    gres = np.sqrt((rho - ring) ** 2 + pz * pz) - tube
    ok = near_real & (np.abs(gres) <= GEOM_TOL + 1e-12 * np.abs(t))
    return t, ok, rho, pz


def batch_intersect(o: np.ndarray, d: np.ndarray, radius: float, fillet: float,
                    flute_top: float, t_min: float = -GEOM_TOL):
    """Smallest surface intersection parameter per line, tool frame.

    Returns (t, phi, hit): (n,) arrays; ``t = +inf`` and ``hit = False`` where
    the line misses.  ``phi`` is the azimuth of the hit point about the axis
    in this (static) frame.
    """
    o = np.atleast_2d(np.asarray(o, dtype=np.float64))
    d = np.atleast_2d(np.asarray(d, dtype=np.float64))
    n = o.shape[0]
    ring = radius - fillet
    best = np.full(n, np.inf)

    # flat bottom disc, z = 0, rho <= ring
    dz = d[:, 2]
    moving = np.abs(dz) > 1e-15
    td = np.where(moving, -o[:, 2] / np.where(moving, dz, 1.0), np.inf)
    px = o[:, 0] + td * d[:, 0]
    py = o[:, 1] + td * d[:, 1]
    ok = moving & (px * px + py * py <= (ring + GEOM_TOL) ** 2) & (td >= t_min)
    best = np.where(ok & (td < best), td, best)

    # fillet quadrant of the torus
    tt, tok, rho, pz = torus_candidates(o, d, ring, fillet)
    tok &= (rho >= ring - GEOM_TOL) & (pz <= GEOM_TOL)  # pz is z - r
    tok &= tt >= t_min
    tmasked = np.where(tok, tt, np.inf)
    tbest = tmasked.min(axis=1)
    best = np.minimum(best, tbest)

    # barrel, rho = radius, r <= z <= flute_top
    e = d[:, 0] ** 2 + d[:, 1] ** 2
    f = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
    g2 = o[:, 0] ** 2 + o[:, 1] ** 2 - radius * radius
    has = e > _PARALLEL_EPS
    es = np.where(has, e, 1.0)
    disc = f * f - es * g2
    root = np.sqrt(np.maximum(disc, 0.0))
    for sign in (-1.0, 1.0):
        tb = (-f + sign * root) / es
        z = o[:, 2] + tb * d[:, 2]
        okb = has & (disc >= 0.0) & (tb >= t_min)
        okb &= (z >= fillet - GEOM_TOL) & (z <= flute_top + GEOM_TOL)
        best = np.where(okb & (tb < best), tb, best)

    hit = np.isfinite(best)
    ts = np.where(hit, best, 0.0)
    hx = o[:, 0] + ts * d[:, 0]
    hy = o[:, 1] + ts * d[:, 1]
    phi = np.where(hit, np.arctan2(hy, hx), 0.0)
    return best, phi, hit


# ---------------------------------------------------------------------------
# triangle meshes


def read_stl_ascii(path) -> np.ndarray:
    """Read an ASCII STL triangle soup; facet normals are ignored.

    Returns an (n, 3, 3) float64 array in mm, tool frame (tip at origin,
    axis along +z).
    """
    verts: list[float] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "vertex":
                if len(parts) != 4:
                    raise ValueError(f"malformed STL vertex at line {lineno}")
                try:
                    verts.extend(float(v) for v in parts[1:])
                except ValueError as exc:
                    raise ValueError(f"malformed STL vertex at line {lineno}") from exc
    if len(verts) % 9 != 0:
        raise ValueError("STL vertex count is not a multiple of 3")
    tris = np.asarray(verts, dtype=np.float64).reshape(-1, 3, 3)
    if tris.size == 0:
        raise ValueError("STL contains no triangles")
    return tris


def write_stl_ascii(path, triangles: np.ndarray, name: str = "tool") -> None:
    tris = np.asarray(triangles, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"solid {name}\n")
        for tri in tris:
            n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
            nn = np.linalg.norm(n)
            n = n / nn if nn > 0 else n
            fh.write(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
            fh.write("    outer loop\n")
            for v in tri:
                fh.write(f"      vertex {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            fh.write("    endloop\n")
            fh.write("  endfacet\n")
        fh.write(f"endsolid {name}\n")


class MeshIndex:
    """Uniform XY-bin acceleration structure over a tool-frame mesh."""

    def __init__(self, triangles: np.ndarray, nbins: int = 48):
        tris = np.asarray(triangles, dtype=np.float64)
        if tris.ndim != 3 or tris.shape[1:] != (3, 3):
            raise ValueError("triangles must have shape (n, 3, 3)")
        area2 = np.linalg.norm(
            np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1
        )
        good = area2 > 1e-18
        self.degenerate_count = int((~good).sum())
        self.triangles = tris[good]
        self.zmin = float(self.triangles[:, :, 2].min())
        self.zmax = float(self.triangles[:, :, 2].max())
        lo = self.triangles[:, :, :2].min(axis=1)
        hi = self.triangles[:, :, :2].max(axis=1)
        self.xy0 = lo.min(axis=0) - 1e-9
        self.xy1 = hi.max(axis=0) + 1e-9
        self.nbins = nbins
        self.step = (self.xy1 - self.xy0) / nbins
        self.step = np.where(self.step <= 0, 1.0, self.step)
        bins: list[list[int]] = [[] for _ in range(nbins * nbins)]
        ilo = np.clip(((lo - self.xy0) / self.step).astype(int), 0, nbins - 1)
        ihi = np.clip(((hi - self.xy0) / self.step).astype(int), 0, nbins - 1)
        for idx in range(self.triangles.shape[0]):
            for bx in range(ilo[idx, 0], ihi[idx, 0] + 1):
                for by in range(ilo[idx, 1], ihi[idx, 1] + 1):
                    bins[bx * nbins + by].append(idx)
        self._bins = [np.asarray(b, dtype=np.int64) for b in bins]

    def candidates(self, o: np.ndarray, d: np.ndarray) -> np.ndarray:
        """Triangle indices whose bins the clipped line segment overlaps."""
        t0, t1 = -1.0, np.inf
        if abs(d[2]) > 1e-15:
            ta = (self.zmin - 1e-6 - o[2]) / d[2]
            tb = (self.zmax + 1e-6 - o[2]) / d[2]
            t0, t1 = max(t0, min(ta, tb)), min(t1, max(ta, tb))
        else:
            if not (self.zmin - 1e-6 <= o[2] <= self.zmax + 1e-6):
                return np.empty(0, dtype=np.int64)
            t1 = 4.0 * float(np.hypot(*(self.xy1 - self.xy0)))
        if t1 < t0:
            return np.empty(0, dtype=np.int64)
        p0 = o[:2] + t0 * d[:2]
        p1 = o[:2] + t1 * d[:2]
        lo = np.minimum(p0, p1)
        hi = np.maximum(p0, p1)
        ilo = np.clip(((lo - self.xy0) / self.step).astype(int), 0, self.nbins - 1)
        ihi = np.clip(((hi - self.xy0) / self.step).astype(int), 0, self.nbins - 1)
        keys = [
            bx * self.nbins + by
            for bx in range(ilo[0], ihi[0] + 1)
            for by in range(ilo[1], ihi[1] + 1)
        ]
        if not keys:
            return np.empty(0, dtype=np.int64)
        parts = [self._bins[k] for k in keys if self._bins[k].size]
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(parts))


def moller_trumbore(o: np.ndarray, d: np.ndarray, tris: np.ndarray,
                    t_min: float = -GEOM_TOL):
    """Smallest ray/triangle-set intersection parameter, or +inf.

    Coplanar (grazing) lines are rejected via the determinant test; shared
    edges deduplicate through the min reduction.
    """
    if tris.shape[0] == 0:
        return np.inf
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    h = np.cross(d[None, :], e2)
    det = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(det) > 1e-12
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = o[None, :] - tris[:, 0]
    u = inv * np.einsum("ij,ij->i", s, h)
    q = np.cross(s, e1)
    v = inv * (q @ d)
    eps = 1e-9
    ok &= (u >= -eps) & (v >= -eps) & (u + v <= 1.0 + eps)
    t = inv * np.einsum("ij,ij->i", e2, q)
    ok &= t >= t_min
    if not ok.any():
        return np.inf
    return float(t[ok].min())
