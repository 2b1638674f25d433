"""Compiled per-cell sweep kernels for vertical line-nets.

The scalar intersection here mirrors ``intersect.batch_intersect`` step for
step (same depressed-quartic resolvent, same Newton polish, same residual and
quadrant tolerances) so the compiled path agrees with the vectorized
reference to floating-point noise.

The tooth-gated kernel ranks whole spindle revolutions before it ever probes
a state.  For every grid row it lower-bounds each revolution's surface over
the row, keyed on the row's clearance and bearing to the revolution's
axis-crossing track (improving hits are confined to within the stock of the
anchor plane, which pins their lateral radius and azimuth); the revolutions
are then visited per cell in ascending floor order, stopping at the first
floor above the cell's current offset.  Within one revolution the spindle
angle advances by at least one gate step per state while the cell's apparent
azimuth (seen from the moving axis crossing) drifts by strictly less, so the
gap between the two decreases monotonically modulo a turn; the states whose
gate window can hold the cell's azimuth form at most a couple of short runs,
and the kernel hops between them with a safe stride derived from the
worst-case per-state decrease.  A gated hit's azimuth deviates from the cell
azimuth by at most the z-lever of the improving-depth range, which pads the
gate arc.  Cells too close to the crossing track for those bounds fall back
to a strict scan of the whole revolution, which skips states via a
monotone-azimuth arc test (along a straight line the azimuth sweeps at most
pi, monotonically) and takes a closed-form shortcut for hits on the flat
bottom.  Every cull skips work only when it provably cannot change the
minimum, keeping results identical to the reference fold.
"""

import cmath
import math

import numpy as np
from numba import njit, prange

GEOM_TOL = 1e-9
T_MIN = -GEOM_TOL
_IM_TOL = 1e-4
TWO_PI = 2.0 * math.pi

#: lateral distance (mm) to the axis-crossing track below which cells scan
#: every state of the revolution instead of walking gate windows
NEAR_AXIS = 0.05
_ARC_PAD = 1e-7    # radians of slack when testing the azimuth arc of a line

_W1 = -0.5 + 0.8660254037844386j
_W2 = -0.5 - 0.8660254037844386j

# rev_tab column layout (one row per spindle revolution)
_RX0, _RX1, _RY0, _RY1 = 0, 1, 2, 3      # cell bbox reachable by the rev
_RZLO = 4                                 # min cutter surface z (absolute)
_RTPZ = 5                                 # min tip z (absolute)
_RAZM = 6                                 # min axis z-component
_RAXY = 7                                 # max axis lateral component
_RCX0, _RCY0, _RCX1, _RCY1 = 8, 9, 10, 11     # axis z0-crossing chord (xy)
_RSAG = 12                                # max crossing sag off that chord
_RPAD = 13                                # horizontal reach off that chord
_RDS = 14                                 # max per-state crossing step
_RFTW = 15                                # max per-state frame twist (rad)
_RNEAR = 16                               # full-scan trigger distance
_RSMN = 17                                # min spindle step within the rev
_RSMX = 18                                # max spindle step within the rev
_RWLM = 19                                # max gate window length in the rev
_RAXN = 20                                # min axis lateral component
_RLNA = 21                                # world azimuth of the uphill side
_RLDR = 22                                # max uphill-azimuth drift (rad)
_RCLN = 23                                # crossing chord length
_RCTX, _RCTY = 24, 25                     # crossing chord midpoint
_RUX, _RUY = 26, 27                       # unit vector toward uphill
_RTAU = 28                                # angular cull cosine (2 = disabled)
_RQK = 29                                 # crossing + depth-lever disc radius
_RQPD = 30                                # improving-hit reach off midpoint
REV_TAB_COLS = 31


@njit(cache=True)
def _ccbrt(z):
    if z == 0.0:
        return 0.0j
    return cmath.exp(cmath.log(z) * (1.0 / 3.0))


@njit(cache=True)
def _quartic_roots_scalar(rc3, rc2, rc1, rc0):
    """Roots of a monic quartic as a 4-tuple of complex128."""
    c3 = complex(rc3, 0.0)
    c2 = complex(rc2, 0.0)
    c1 = complex(rc1, 0.0)
    c0 = complex(rc0, 0.0)
    shift = c3 / 4.0
    p = c2 - 3.0 * c3 * c3 / 8.0
    q = c1 - c3 * c2 / 2.0 + c3 * c3 * c3 / 8.0
    r0 = (c0 - c3 * c1 / 4.0 + c3 * c3 * c2 / 16.0
          - 3.0 * c3 * c3 * c3 * c3 / 256.0)

    ca = p
    cb = p * p / 4.0 - r0
    cc = -q * q / 8.0
    P = cb - ca * ca / 3.0
    Q = 2.0 * ca * ca * ca / 27.0 - ca * cb / 3.0 + cc
    disc = Q * Q / 4.0 + P * P * P / 27.0
    S = _ccbrt(-Q / 2.0 + cmath.sqrt(disc))

    m = 0.0j
    best = -1.0
    for widx in range(3):
        if widx == 0:
            w = 1.0 + 0.0j
        elif widx == 1:
            w = _W1
        else:
            w = _W2
        Sk = S * w
        if abs(Sk) < 1e-300:
            mk = -ca / 3.0
        else:
            mk = Sk - P / (3.0 * Sk) - ca / 3.0
        if abs(mk) > best:
            best = abs(mk)
            m = mk

    sigma = cmath.sqrt(2.0 * m)
    if abs(sigma) < 1e-12:
        dq = cmath.sqrt(p * p - 4.0 * r0)
        A = (p + dq) / 2.0
        B = (p - dq) / 2.0
        sigma = 0.0j
    else:
        half = p / 2.0 + m
        A = half - q / (2.0 * sigma)
        B = half + q / (2.0 * sigma)

    d1 = cmath.sqrt(sigma * sigma - 4.0 * A)
    d2 = cmath.sqrt(sigma * sigma - 4.0 * B)
    return ((-sigma + d1) / 2.0 - shift,
            (-sigma - d1) / 2.0 - shift,
            (sigma + d2) / 2.0 - shift,
            (sigma - d2) / 2.0 - shift)


@njit(cache=True)
def _scalar_intersect(ox, oy, oz, dx, dy, dz, radius, fillet, flute_top):
    """Smallest valid surface intersection of one tool-frame line.

    Returns (t, phi, hit).  Lines provably confined to the flat-bottom
    region skip the quartic entirely; the result is unchanged because no
    fillet or barrel intersection can exist for them.
    """
    ring = radius - fillet
    best = np.inf

    rho_d = np.inf
    if abs(dz) > 1e-15:
        td = -oz / dz
        px = ox + td * dx
        py = oy + td * dy
        rho_d = math.sqrt(px * px + py * py)
        if rho_d <= ring + GEOM_TOL and td >= T_MIN:
            best = td

    # disc-only early exit: the line's axial radius cannot reach the fillet
    # band below the fillet top nor the barrel below the flute top
    if np.isfinite(best) and abs(dz) > 1e-15:
        spread = math.sqrt(dx * dx + dy * dy) / abs(dz)
        if (rho_d + spread * fillet < ring - GEOM_TOL
                and rho_d + spread * flute_top < radius - GEOM_TOL):
            return best, math.atan2(oy + best * dy, ox + best * dx), True

    # fillet quadrant of the torus
    ozs = oz - fillet
    b = ox * dx + oy * dy + ozs * dz
    c = ox * ox + oy * oy + ozs * ozs + ring * ring - fillet * fillet
    e = dx * dx + dy * dy
    f = ox * dx + oy * dy
    g2 = ox * ox + oy * oy
    a2 = 4.0 * ring * ring

    c3 = 4.0 * b
    c2 = 4.0 * b * b + 2.0 * c - a2 * e
    c1 = 4.0 * b * c - 2.0 * a2 * f
    c0 = c * c - a2 * g2

    roots = _quartic_roots_scalar(c3, c2, c1, c0)
    for k in range(4):
        zr = roots[k]
        if abs(zr.imag) > _IM_TOL * max(1.0, abs(zr.real)):
            continue
        t = zr.real
        for _ in range(2):
            ft = (((t + c3) * t + c2) * t + c1) * t + c0
            fp = ((4.0 * t + 3.0 * c3) * t + 2.0 * c2) * t + c1
            if abs(fp) < 1e-30:
                fp = 1e-30
            step = ft / fp
            if step > 1.0:
                step = 1.0
            elif step < -1.0:
                step = -1.0
            t = t - step
        px = ox + t * dx
        py = oy + t * dy
        pz = ozs + t * dz
        rho = math.sqrt(px * px + py * py)
        gd = rho - ring
        gres = math.sqrt(gd * gd + pz * pz) - fillet
        if (abs(gres) <= GEOM_TOL + 1e-12 * abs(t)
                and rho >= ring - GEOM_TOL and pz <= GEOM_TOL
                and t >= T_MIN and t < best):
            best = t

    # barrel
    if e > 1e-20:
        gb = g2 - radius * radius
        disc = f * f - e * gb
        if disc >= 0.0:
            root = math.sqrt(disc)
            for sgn in range(2):
                tb = (-f - root) / e if sgn == 0 else (-f + root) / e
                z = oz + tb * dz
                if (tb >= T_MIN and z >= fillet - GEOM_TOL
                        and z <= flute_top + GEOM_TOL and tb < best):
                    best = tb

    if not np.isfinite(best):
        return np.inf, 0.0, False
    return best, math.atan2(oy + best * dy, ox + best * dx), True


@njit(cache=True)
def _profile(rho, ring, fillet):
    if rho <= ring:
        return 0.0
    d = rho - ring
    if d >= fillet:
        return fillet
    return fillet - math.sqrt(fillet * fillet - d * d)


@njit(cache=True)
def _axis_lateral(x, y, tips, axes, cxs, cys, k):
    """Distance from the vertical line at (x, y) to state k's axis line,
    plus the line-to-crossing vector at the anchor plane."""
    vx = x - cxs[k]
    vy = y - cys[k]
    axy = math.sqrt(axes[k, 0] ** 2 + axes[k, 1] ** 2)
    if axy < 1e-14:
        dinf = math.sqrt(vx * vx + vy * vy)
    else:
        # |(tip - cell) x cross| with cross = z_hat x axis, normalized
        dinf = abs((tips[k, 0] - x) * axes[k, 1]
                   - (tips[k, 1] - y) * axes[k, 0]) / axy
    return dinf, vx, vy


@njit(cache=True)
def _seg_dist_pt(px, py, ax, ay, bx, by):
    """Distance from (px, py) to the segment (ax, ay)-(bx, by), plus the
    closest segment point."""
    ex = bx - ax
    ey = by - ay
    ee = ex * ex + ey * ey
    h = 0.0
    if ee > 0.0:
        h = ((px - ax) * ex + (py - ay) * ey) / ee
        if h < 0.0:
            h = 0.0
        elif h > 1.0:
            h = 1.0
    qx = ax + h * ex
    qy = ay + h * ey
    return math.hypot(px - qx, py - qy), qx, qy


@njit(cache=True)
def _cell_azimuth(x, y, cxs, cys, xhs, yhs, k):
    """Frame azimuth of the cell seen from state k's axis crossing."""
    vx = x - cxs[k]
    vy = y - cys[k]
    return math.atan2(vx * yhs[k, 0] + vy * yhs[k, 1],
                      vx * xhs[k, 0] + vy * xhs[k, 1])


@njit(cache=True)
def _gate(phi, alpha, step, wlen):
    rel = (phi - alpha) % TWO_PI
    return rel % step < wlen


@njit(cache=True)
def _drop_between(rho_lo, rho_hi, a, b, ring, fillet, radius):
    """Exact min over rho in [rho_lo, rho_hi] of profile(rho)*a - rho*b
    for a >= 0, b >= 0.  The integrand is convex in rho with its interior
    stationary point at ring + fillet*b/hypot(a, b), so the minimum sits
    there or at an endpoint."""
    if rho_hi > radius:
        rho_hi = radius
    if rho_lo > rho_hi:
        rho_lo = rho_hi
    best = _profile(rho_lo, ring, fillet) * a - rho_lo * b
    v = _profile(rho_hi, ring, fillet) * a - rho_hi * b
    if v < best:
        best = v
    h = math.hypot(a, b)
    if h > 1e-300:
        rs = ring + fillet * b / h
        if rho_lo < rs < rho_hi:
            v = _profile(rs, ring, fillet) * a - rs * b
            if v < best:
                best = v
    return best


@njit(cache=True)
def _az_floor(rho_lb, rho_hb, aw, tipdz, az_min, axy_max, axy_min,
              ring, fillet, radius):
    """Lower bound on the anchor-relative height of any improving hit whose
    azimuth sits within aw of the tool's uphill side.  Surface points obey
    z >= tip_z + profile(rho)*az + rho*axy*cos(azimuth off uphill), so the
    bound minimizes that over the admissible radius interval with the worst
    admissible cosine (mixing per-state extremes conservatively)."""
    if aw >= math.pi:
        return tipdz + _drop_between(rho_lb, rho_hb, az_min, axy_max,
                                     ring, fillet, radius)
    cw = math.cos(aw)
    if cw >= 0.0:
        return tipdz + (_profile(rho_lb, ring, fillet) * az_min
                        + rho_lb * axy_min * cw)
    return tipdz + _drop_between(rho_lb, rho_hb, az_min, -cw * axy_max,
                                 ring, fillet, radius)


@njit(cache=True)
def _state_rho_bounds(stock, axes, k, radius, dinf, vx, vy):
    """Rigorous bounds on the lateral radius of any improving hit of the
    vertical cell line with state k.  Improving hits lie within the stock
    of the anchor plane, the axis point nearest the hit lies within
    |hit z - z0| * tan(tilt) of the crossing, and a horizontal offset w
    maps to a perpendicular distance between |w|*az and |w|/az."""
    az = axes[k, 2]
    axy = math.sqrt(axes[k, 0] ** 2 + axes[k, 1] ** 2)
    zr = stock + GEOM_TOL
    hv = math.hypot(vx, vy)
    rho_lo = hv * az - zr * axy
    if rho_lo < dinf:
        rho_lo = dinf
    rho_hi = radius
    den = az * az - axy * axy
    if den > 1e-14:
        v = (hv + zr * axy / az) * az / den
        if v < rho_hi:
            rho_hi = v
    return rho_lo, rho_hi


@njit(cache=True)
def _row_reach(x0r, x1r, y, ax, ay, bx, by):
    """Min/max distance from the row segment {y} x [x0r, x1r] to the
    segment (ax, ay)-(bx, by), plus the chord points closest to the row
    ends.  Distance to a segment is convex, so the max sits at a row end."""
    d1, q1x, q1y = _seg_dist_pt(x0r, y, ax, ay, bx, by)
    d2, q2x, q2y = _seg_dist_pt(x1r, y, ax, ay, bx, by)
    if ax < x0r:
        d3 = math.hypot(ax - x0r, ay - y)
    elif ax > x1r:
        d3 = math.hypot(ax - x1r, ay - y)
    else:
        d3 = abs(ay - y)
    if bx < x0r:
        d4 = math.hypot(bx - x0r, by - y)
    elif bx > x1r:
        d4 = math.hypot(bx - x1r, by - y)
    else:
        d4 = abs(by - y)
    dmin = min(min(d1, d2), min(d3, d4))
    if (ay - y) * (by - y) < 0.0:
        xc = ax + (bx - ax) * (y - ay) / (by - ay)
        if x0r <= xc <= x1r:
            dmin = 0.0
    dmax = d1 if d1 > d2 else d2
    return dmin, dmax, q1x, q1y, q2x, q2y


@njit(cache=True)
def _row_bearing(x0r, x1r, y, ax, ay, bx, by, q1x, q1y, q2x, q2y, lna):
    """Upper bound over the row's cells on the world angle between the
    cell's bearing off the crossing chord and the uphill azimuth lna.

    Along the row the bearing is piecewise monotone (constant while the
    closest chord point is interior, sweeping while it is pinned at an
    end), and every bearing stays inside one open half-turn because the
    whole row lies on one side of the chord line; the extreme bearings are
    therefore among the two row-end bearings and the chord normal.
    Returns pi when the row touches or crosses the chord line."""
    ex = bx - ax
    ey = by - ay
    cr1 = ex * (y - ay) - ey * (x0r - ax)
    cr2 = ex * (y - ay) - ey * (x1r - ax)
    if cr1 == 0.0 or cr2 == 0.0 or (cr1 > 0.0) != (cr2 > 0.0):
        return math.pi
    t1 = math.atan2(y - q1y, x0r - q1x)
    t2 = math.atan2(y - q2y, x1r - q2x)
    lo = 0.0
    hi = 0.0
    d2_ = ((t2 - t1 + math.pi) % TWO_PI) - math.pi
    if d2_ < lo:
        lo = d2_
    elif d2_ > hi:
        hi = d2_
    ee = ex * ex + ey * ey
    if ee > 0.0:
        h1 = ((x0r - ax) * ex + (y - ay) * ey) / ee
        h2 = ((x1r - ax) * ex + (y - ay) * ey) / ee
        hlo = h1 if h1 < h2 else h2
        hhi = h1 if h1 > h2 else h2
        if hhi > 0.0 and hlo < 1.0:
            nx_ = -ey
            ny_ = ex
            if cr1 < 0.0:
                nx_ = ey
                ny_ = -ex
            dn = ((math.atan2(ny_, nx_) - t1 + math.pi) % TWO_PI) - math.pi
            if dn < lo:
                lo = dn
            elif dn > hi:
                hi = dn
    hw = 0.5 * (hi - lo)
    if hw >= 0.5 * math.pi:
        return math.pi
    cen = t1 + 0.5 * (hi + lo)
    dc = abs(((cen - lna + math.pi) % TWO_PI) - math.pi)
    th = dc + hw
    return th if th < math.pi else math.pi


@njit(cache=True)
def _scan_revolution(x, y, zray, stock, tips, axes, xhs, yhs, cxs, cys,
                     alphas, wlens, s0, s1, radius, fillet, flute_top, step,
                     c_cur):
    """Strict reference semantics over one revolution: every state that
    could deepen the cell is evaluated and gated.  Two exact shortcuts keep
    the cost down.  A disc crossing strictly inside the ring is always the
    line's first intersection (along an upward line the flat bottom lies
    below every other cutter point), so it resolves the state closed-form.
    Otherwise the azimuth of any improving hit is confined to the arc the
    line sweeps over the improving t-range -- monotone and at most pi wide
    -- and states whose gate windows miss that arc are skipped unevaluated.
    Returns (new offset, quartic evals, shortcut closures, hits)."""
    ring = radius - fillet
    z0 = zray + stock
    evals = 0
    quick = 0
    hits = 0
    for k in range(s0, s1):
        dinf, vx, vy = _axis_lateral(x, y, tips, axes, cxs, cys, k)
        if dinf > radius + GEOM_TOL:
            continue
        az = axes[k, 2]
        axy = math.sqrt(axes[k, 0] ** 2 + axes[k, 1] ** 2)
        rho_lo, rho_hi = _state_rho_bounds(stock, axes, k, radius,
                                           dinf, vx, vy)
        lb = (tips[k, 2] - z0) + _drop_between(rho_lo, rho_hi, az, axy,
                                               ring, fillet, radius)
        if lb >= c_cur:
            continue
        rx = x - tips[k, 0]
        ry = y - tips[k, 1]
        rz = zray - tips[k, 2]
        ox = xhs[k, 0] * rx + xhs[k, 1] * ry + xhs[k, 2] * rz
        oy = yhs[k, 0] * rx + yhs[k, 1] * ry + yhs[k, 2] * rz
        oz = axes[k, 0] * rx + axes[k, 1] * ry + axes[k, 2] * rz
        dx = xhs[k, 2]
        dy = yhs[k, 2]
        # improving hits lie in this t-range (cutter z-extent + depth cap)
        t_lo = (-GEOM_TOL - oz) / az
        if t_lo < T_MIN:
            t_lo = T_MIN
        t_hi = (flute_top + GEOM_TOL - oz) / az
        tcap = stock + c_cur + GEOM_TOL
        if tcap < t_hi:
            t_hi = tcap
        if t_lo > t_hi:
            continue
        td = -oz / az
        pdx = ox + td * dx
        pdy = oy + td * dy
        if math.hypot(pdx, pdy) <= ring - GEOM_TOL and td >= T_MIN:
            # the first intersection is this flat-bottom crossing
            quick += 1
            if td <= t_hi:
                phi = math.atan2(pdy, pdx)
                if _gate(phi, alphas[k], step, wlens[k]):
                    ch = td - stock
                    if ch < c_cur:
                        c_cur = ch
                        hits += 1
            continue
        kappa = ox * dy - oy * dx
        if abs(kappa) > 1e-300:
            phi_a = math.atan2(oy + t_lo * dy, ox + t_lo * dx)
            phi_b = math.atan2(oy + t_hi * dy, ox + t_hi * dx)
            if kappa > 0.0:
                start = phi_a
                delta = (phi_b - phi_a) % TWO_PI
            else:
                start = phi_b
                delta = (phi_a - phi_b) % TWO_PI
            delta += 2.0 * _ARC_PAD
            u = (start - _ARC_PAD - alphas[k]) % step
            if u >= wlens[k] + _ARC_PAD and u + delta < step - _ARC_PAD:
                quick += 1
                continue
        t, phi, hit = _scalar_intersect(ox, oy, oz, dx, dy, az,
                                        radius, fillet, flute_top)
        evals += 1
        if hit and _gate(phi, alphas[k], step, wlens[k]):
            ch = t - stock
            if ch < c_cur:
                c_cur = ch
                hits += 1
    return c_cur, evals, quick, hits


@njit(cache=True)
def _eval_state(x, y, zray, tips, axes, xhs, yhs, k, radius, fillet,
                flute_top):
    """Exact intersection of the vertical line at (x, y) with state k.
    The ray starts at world z = zray going up; t is measured from zray."""
    rx = x - tips[k, 0]
    ry = y - tips[k, 1]
    rz = zray - tips[k, 2]
    ox = xhs[k, 0] * rx + xhs[k, 1] * ry + xhs[k, 2] * rz
    oy = yhs[k, 0] * rx + yhs[k, 1] * ry + yhs[k, 2] * rz
    oz = axes[k, 0] * rx + axes[k, 1] * ry + axes[k, 2] * rz
    return _scalar_intersect(ox, oy, oz, xhs[k, 2], yhs[k, 2], axes[k, 2],
                             radius, fillet, flute_top)


@njit(cache=True)
def _try_state(x, y, zray, z0, stock, tips, axes, xhs, yhs, cxs, cys,
               alphas, wlens, k, radius, fillet, flute_top, step, c_cur,
               psi, bpad):
    """Cull, evaluate and gate a single state against one cell.

    psi is the cell azimuth probed by the caller and bpad the rigorous
    bound on how far an improving hit's azimuth can sit from it, so the
    surface floor uses the worst tilt cosine over that azimuth range
    instead of the downhill worst case.  Returns (offset, evals, hit)."""
    dinf, vx, vy = _axis_lateral(x, y, tips, axes, cxs, cys, k)
    if dinf > radius + GEOM_TOL:
        return c_cur, 0, 0
    az = axes[k, 2]
    axy = math.sqrt(axes[k, 0] ** 2 + axes[k, 1] ** 2)
    rho_lo, rho_hi = _state_rho_bounds(stock, axes, k, radius, dinf, vx, vy)
    ring = radius - fillet
    dphi = ((psi - math.atan2(yhs[k, 2], xhs[k, 2]) + math.pi) % TWO_PI
            ) - math.pi
    aw = abs(dphi) + bpad
    lb = (tips[k, 2] - z0) + _az_floor(rho_lo, rho_hi, aw, 0.0, az, axy,
                                       axy, ring, fillet, radius)
    if lb >= c_cur:
        return c_cur, 0, 0
    t, phi, hit = _eval_state(x, y, zray, tips, axes, xhs, yhs, k,
                              radius, fillet, flute_top)
    if hit and _gate(phi, alphas[k], step, wlens[k]):
        ch = t - stock
        if ch < c_cur:
            return ch, 1, 1
    return c_cur, 1, 0


@njit(cache=True)
def _gated_rev(x, y, zray, z0, stock, tips, axes, xhs, yhs, cxs, cys,
               alphas, wlens, s0, s1, radius, fillet, flute_top, step,
               c_cur, rev_tab, rev, vlo):
    """Fold one revolution into one cell's offset under tooth gating.

    vlo is the cell's clearance to the revolution's axis-crossing track.
    Returns (offset, evals, scan evals, shortcut closures, hits, probes,
    scan kind) where scan kind is 0 for a windowed walk, 1 when the cell
    was too close to the track for the drift bounds and 2 when a bound
    guard rejected the walk."""
    near = rev_tab[rev, _RNEAR]
    az_min = rev_tab[rev, _RAZM]
    # worst |hit z - z0| of an improving hit before depth is known
    maxz_static = z0 - rev_tab[rev, _RZLO]
    if maxz_static > stock:
        maxz_static = stock
    if maxz_static < 0.0:
        maxz_static = 0.0
    sig = maxz_static
    if c_cur > sig:
        sig = c_cur
    sig *= rev_tab[rev, _RAXY] / az_min
    ds = rev_tab[rev, _RDS]
    vclear = vlo * az_min
    if vlo < near or sig >= vclear or ds >= vclear:
        c_cur, ev_, qk_, h_ = _scan_revolution(
            x, y, zray, stock, tips, axes, xhs, yhs, cxs, cys, alphas,
            wlens, s0, s1, radius, fillet, flute_top, step, c_cur)
        return c_cur, ev_, ev_, qk_, h_, 0, 1
    b = math.asin(sig / vclear) + 1e-12
    qw = math.asin(ds / vclear) + rev_tab[rev, _RFTW]
    smn = rev_tab[rev, _RSMN]
    wlm = rev_tab[rev, _RWLM]
    if qw >= smn or wlm + 2.0 * b + 1e-9 >= step:
        c_cur, ev_, qk_, h_ = _scan_revolution(
            x, y, zray, stock, tips, axes, xhs, yhs, cxs, cys, alphas,
            wlens, s0, s1, radius, fillet, flute_top, step, c_cur)
        return c_cur, ev_, ev_, qk_, h_, 0, 2

    # the spindle outruns the cell azimuth by smn-qw .. smx+qw per state,
    # so the gate residual decreases monotonically; stride over residuals
    # that provably stay clear of the padded gate arc and probe the rest
    # one state at a time
    evals = 0
    hits = 0
    probes = 0
    dec = rev_tab[rev, _RSMX] + qw
    gtop = wlm + b
    j = s0
    while j < s1:
        psi = _cell_azimuth(x, y, cxs, cys, xhs, yhs, j)
        probes += 1
        rm = ((psi - alphas[j]) % TWO_PI) % step
        if rm < wlens[j] + b or rm > step - b:
            c_cur, e_, h_ = _try_state(
                x, y, zray, z0, stock, tips, axes, xhs, yhs, cxs, cys,
                alphas, wlens, j, radius, fillet, flute_top, step, c_cur,
                psi, b)
            evals += e_
            hits += h_
            j += 1
            continue
        adv = 1
        d = rm - gtop
        if d > dec:
            adv = int(d / dec)
        j += adv
    return c_cur, evals, 0, 0, hits, probes, 0


@njit(cache=True, parallel=True)
def gated_plane_kernel(c, x0, y0, gx, gy, z0, stock,
                       tips, axes, xhs, yhs, cxs, cys, alphas, wlens,
                       rev_ptr, rev_tab,
                       radius, fillet, flute_top, tooth_count, row_stats):
    ny, nx = c.shape
    nrev = rev_ptr.shape[0] - 1
    ring = radius - fillet
    step = TWO_PI / tooth_count
    zray = z0 - stock
    x1r = x0 + gx * (nx - 1)
    for iy in prange(ny):
        y = y0 + iy * gy
        cand = 0
        evals = 0
        hits = 0
        scans_near = 0
        scans_guard = 0
        probes = 0
        scan_evals = 0
        quick_total = 0
        # rank the revolutions this row can see by a row-wide floor: the
        # lowest surface each could press anywhere in the row, keyed on the
        # row's clearance and bearing to its crossing track
        ridx = np.empty(nrev, np.int64)
        rflr = np.empty(nrev)
        m = 0
        for rev in range(nrev):
            if y < rev_tab[rev, _RY0] or y > rev_tab[rev, _RY1]:
                continue
            ax = rev_tab[rev, _RCX0]
            ay = rev_tab[rev, _RCY0]
            bx = rev_tab[rev, _RCX1]
            by = rev_tab[rev, _RCY1]
            dmin, dmax, q1x, q1y, q2x, q2y = _row_reach(
                x1r if x1r < x0 else x0, x1r if x1r > x0 else x0, y,
                ax, ay, bx, by)
            if dmin > rev_tab[rev, _RPAD]:
                continue
            az_min = rev_tab[rev, _RAZM]
            axy_max = rev_tab[rev, _RAXY]
            sag = rev_tab[rev, _RSAG]
            zr = stock + GEOM_TOL
            vlo = dmin - sag
            rho_lb = vlo * az_min - zr * axy_max
            if rho_lb < 0.0:
                rho_lb = 0.0
            elif rho_lb > radius + GEOM_TOL:
                continue
            rho_hb = radius
            den = az_min * az_min - axy_max * axy_max
            if den > 1e-14:
                v = (dmax + rev_tab[rev, _RCLN] + sag
                     + zr * axy_max / az_min) * az_min / den
                if v < rho_hb:
                    rho_hb = v
            aw = math.pi
            # offsets may still sit anywhere up to the stock at row level
            sg = stock * axy_max / az_min
            vcl = vlo * az_min
            if vcl > sg and dmin > 0.0:
                t1c = (rev_tab[rev, _RCLN] + sag) / dmin
                if t1c < 1.0:
                    th = _row_bearing(x0, x1r, y, ax, ay, bx, by,
                                      q1x, q1y, q2x, q2y,
                                      rev_tab[rev, _RLNA])
                    aw = ((th + math.asin(t1c) + rev_tab[rev, _RLDR])
                          / az_min + math.asin(sg / vcl))
            fl = _az_floor(rho_lb, rho_hb, aw, rev_tab[rev, _RTPZ] - z0,
                           az_min, axy_max, rev_tab[rev, _RAXN],
                           ring, fillet, radius)
            ridx[m] = rev
            rflr[m] = fl
            m += 1
        order = np.argsort(rflr[:m])
        for ix in range(nx):
            x = x0 + ix * gx
            c_cur = c[iy, ix]
            for oi in range(m):
                i = order[oi]
                if rflr[i] >= c_cur:
                    break
                rev = ridx[i]
                vx = x - rev_tab[rev, _RCTX]
                vy = y - rev_tab[rev, _RCTY]
                d2 = vx * vx + vy * vy
                qpd = rev_tab[rev, _RQPD]
                if d2 > qpd * qpd:
                    continue
                # angular quick cull: an improving hit's azimuth off the
                # uphill side (in the spindle frame) must clear the stock
                # crossing angle; test it on the midpoint bearing widened
                # by the crossing/lever disc, via one cosine identity
                dot = vx * rev_tab[rev, _RUX] + vy * rev_tab[rev, _RUY]
                kq = rev_tab[rev, _RQK]
                kq2 = kq * kq
                if d2 > 4.0 * kq2:
                    e = d2 - kq2
                    dd = dot * dot
                    if dot >= 0.0 or dd < e:
                        f = d2 - dd
                        if f < 0.0:
                            f = 0.0
                        lhs = dot * math.sqrt(e) - kq * math.sqrt(f)
                        if lhs >= rev_tab[rev, _RTAU] * d2:
                            continue
                cand += 1
                az_min = rev_tab[rev, _RAZM]
                axy_max = rev_tab[rev, _RAXY]
                kc = 0.5 * rev_tab[rev, _RCLN] + rev_tab[rev, _RSAG]
                d = math.sqrt(d2)
                zr = stock + GEOM_TOL
                vlo = d - kc
                rho_lb = vlo * az_min - zr * axy_max
                if rho_lb < 0.0:
                    rho_lb = 0.0
                elif rho_lb > radius + GEOM_TOL:
                    continue
                rho_hb = radius
                den = az_min * az_min - axy_max * axy_max
                if den > 1e-14:
                    v = (d + kc + zr * axy_max / az_min) * az_min / den
                    if v < rho_hb:
                        rho_hb = v
                # worst bearing of an improving hit off the uphill side:
                # midpoint bearing plus crossing disc, uphill drift and
                # the z-lever of the improving depth range
                mzs = z0 - rev_tab[rev, _RZLO]
                if mzs > stock:
                    mzs = stock
                if mzs < 0.0:
                    mzs = 0.0
                sg = mzs if mzs > c_cur else c_cur
                sg *= axy_max / az_min
                vcl = vlo * az_min
                aw = math.pi
                if vcl > sg and d > kc:
                    cw = dot / d
                    if cw > 1.0:
                        cw = 1.0
                    elif cw < -1.0:
                        cw = -1.0
                    aw = ((math.acos(cw) + math.asin(kc / d)
                           + rev_tab[rev, _RLDR]) / az_min
                          + math.asin(sg / vcl))
                fl = _az_floor(rho_lb, rho_hb, aw,
                               rev_tab[rev, _RTPZ] - z0, az_min, axy_max,
                               rev_tab[rev, _RAXN], ring, fillet, radius)
                if fl >= c_cur:
                    continue
                c_cur, ev_, sc_, qk_, h_, pr_, kind = _gated_rev(
                    x, y, zray, z0, stock, tips, axes, xhs, yhs, cxs, cys,
                    alphas, wlens, rev_ptr[rev], rev_ptr[rev + 1], radius,
                    fillet, flute_top, step, c_cur, rev_tab, rev, vlo)
                evals += ev_
                scan_evals += sc_
                quick_total += qk_
                hits += h_
                probes += pr_
                if kind == 1:
                    scans_near += 1
                elif kind == 2:
                    scans_guard += 1
            c[iy, ix] = c_cur
        row_stats[iy, 0] += cand
        row_stats[iy, 1] += evals
        row_stats[iy, 2] += hits
        if row_stats.shape[1] >= 8:
            row_stats[iy, 3] += scans_near
            row_stats[iy, 4] += scans_guard
            row_stats[iy, 5] += probes
            row_stats[iy, 6] += scan_evals
            row_stats[iy, 7] += quick_total


@njit(cache=True, parallel=True)
def envelope_plane_kernel(c, x0, y0, gx, gy, z0, stock,
                          tips, axes, xhs, yhs, cxs, cys,
                          st_bbox, st_zlow,
                          radius, fillet, flute_top, row_stats):
    ny, nx = c.shape
    n = tips.shape[0]
    ring = radius - fillet
    zray = z0 - stock
    for iy in prange(ny):
        y = y0 + iy * gy
        cand = 0
        evals = 0
        hits = 0
        for k in range(n):
            if y < st_bbox[k, 2] or y > st_bbox[k, 3]:
                continue
            zb = st_zlow[k] - z0
            ix_lo = int(math.ceil((st_bbox[k, 0] - x0) / gx))
            ix_hi = int(math.floor((st_bbox[k, 1] - x0) / gx))
            if ix_lo < 0:
                ix_lo = 0
            if ix_hi > nx - 1:
                ix_hi = nx - 1
            az = axes[k, 2]
            axy = math.sqrt(axes[k, 0] ** 2 + axes[k, 1] ** 2)
            for ix in range(ix_lo, ix_hi + 1):
                c_cur = c[iy, ix]
                if zb >= c_cur:
                    continue
                cand += 1
                x = x0 + ix * gx
                dinf, vx, vy = _axis_lateral(x, y, tips, axes, cxs, cys, k)
                if dinf > radius + GEOM_TOL:
                    continue
                rho_lo, rho_hi = _state_rho_bounds(stock, axes, k, radius,
                                                   dinf, vx, vy)
                lb = (tips[k, 2] - z0) + _drop_between(
                    rho_lo, rho_hi, az, axy, ring, fillet, radius)
                if lb >= c_cur:
                    continue
                t, phi, hit = _eval_state(x, y, zray, tips, axes, xhs, yhs,
                                          k, radius, fillet, flute_top)
                evals += 1
                if hit:
                    ch = t - stock
                    if ch < c_cur:
                        c[iy, ix] = ch
                        hits += 1
        row_stats[iy, 0] += cand
        row_stats[iy, 1] += evals
        row_stats[iy, 2] += hits
