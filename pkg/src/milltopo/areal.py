"""Areal surface-texture parameters on regular-grid height fields.

Amplitude family (Sa, Sq, Sz, Sv, Ssk, Sku) from the height moments over
unmasked cells; spatial family (Sds, Sal, Std) from neighborhood counts and
the FFT autocorrelation / power spectrum.  FFT-based parameters operate on
the largest fully unmasked axis-aligned rectangle of the field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .engine import HeightField

__all__ = [
    "ArealParams", "SalResult", "StdResult", "CSV_COLUMNS",
    "level", "amplitude_params", "summit_density",
    "autocorrelation_map", "autocorrelation_length", "texture_direction",
    "compute_all", "report_lines", "csv_row",
]

# report/CSV layout: amplitude family then spatial family
CSV_COLUMNS = ("Sz_um", "Sa_um", "Sq_um", "Sku", "Ssk", "Sv_um",
               "Sds_per_mm2", "Sal_mm", "Std_deg")
_FIELDS = ("Sz", "Sa", "Sq", "Sku", "Ssk", "Sv", "Sds", "Sal", "Std")


def _plane_fit(heights: np.ndarray, mask: np.ndarray, spacing):
    """Least-squares plane a + b*x + c*y over unmasked cells (x, y in mm,
    centered for conditioning).  Returns (a, b, c) in original coords, the
    plane evaluated on the full grid, and the fit rank."""
    ny, nx = heights.shape
    xs = spacing[0] * np.arange(nx)
    ys = spacing[1] * np.arange(ny)
    X, Y = np.meshgrid(xs, ys)
    valid = ~mask
    xv = X[valid]
    yv = Y[valid]
    zv = heights[valid]
    xm, ym = xv.mean(), yv.mean()
    A = np.column_stack([np.ones(xv.size), xv - xm, yv - ym])
    coef, _, rank, _ = np.linalg.lstsq(A, zv, rcond=None)
    a0, b, c = coef
    a = a0 - b * xm - c * ym
    plane = a + b * X + c * Y
    return (float(a), float(b), float(c)), plane, int(rank)


def level(hf: HeightField) -> HeightField:
    """Remove the least-squares mean plane from the unmasked heights.

    Needs at least three non-collinear unmasked cells; raises ValueError
    when the fit is rank deficient.
    """
    if np.count_nonzero(~hf.mask) < 3:
        raise ValueError("leveling needs at least 3 unmasked cells")
    coef, plane, rank = _plane_fit(hf.heights_um, hf.mask, hf.spacing)
    if rank < 3:
        raise ValueError("leveling fit is rank deficient "
                         "(unmasked cells are collinear)")
    heights = np.where(hf.mask, np.nan, hf.heights_um - plane)
    meta = dict(hf.meta)
    meta["level_plane_um"] = coef
    return HeightField(origin=hf.origin, spacing=hf.spacing,
                       heights_um=heights, mask=hf.mask.copy(),
                       offsets_mm=hf.offsets_mm, meta=meta)


# ---------------------------------------------------------------------------
# amplitude family


def amplitude_params(hf: HeightField) -> Tuple[Dict[str, float],
                                               Dict[str, str]]:
    """Height-moment parameters of a leveled field.

    Returns ``(values, flags)`` with keys Sa, Sq, Sz, Sv, Ssk, Sku; moments
    run over unmasked cells only.  On (near-)constant fields Ssk and Sku
    are NaN and flagged rather than forced to zero.
    """
    z = hf.heights_um[~hf.mask]
    if z.size == 0:
        raise ValueError("amplitude parameters need unmasked cells")
    sa = float(np.mean(np.abs(z)))
    sq = float(np.sqrt(np.mean(z * z)))
    sv = float(abs(z.min()))
    sz = float(z.max()) + sv
    values = {"Sa": sa, "Sq": sq, "Sz": sz, "Sv": sv}
    flags: Dict[str, str] = {}
    if sq < 1e-12:
        values["Ssk"] = math.nan
        values["Sku"] = math.nan
        flags["Ssk"] = "constant field (Sq ~ 0)"
        flags["Sku"] = "constant field (Sq ~ 0)"
    else:
        values["Ssk"] = float(np.mean(z ** 3) / sq ** 3)
        values["Sku"] = float(np.mean(z ** 4) / sq ** 4)
    return values, flags


# ---------------------------------------------------------------------------
# spatial family


def summit_density(hf: HeightField) -> float:
    """Summits per mm²: interior unmasked cells strictly above all eight
    unmasked neighbors, divided by the unmasked area."""
    h = hf.heights_um
    ny, nx = h.shape
    if ny < 3 or nx < 3:
        raise ValueError("summit density needs a grid of at least 3x3")
    z = np.where(hf.mask, np.nan, h)
    core = z[1:-1, 1:-1]
    higher = np.ones(core.shape, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            nb = z[1 + dy:ny - 1 + dy, 1 + dx:nx - 1 + dx]
            higher &= core > nb          # False wherever a neighbor is NaN
    count = int(np.count_nonzero(higher & np.isfinite(core)))
    area = float(np.count_nonzero(~hf.mask)) * hf.spacing[0] * hf.spacing[1]
    return count / area


def _largest_unmasked_rectangle(mask: np.ndarray) -> Tuple[int, int, int, int]:
    """(y0, y1, x0, x1) half-open bounds of the largest all-unmasked
    axis-aligned rectangle (histogram-stack sweep, O(ny*nx))."""
    ny, nx = mask.shape
    best = (0, 0, 0, 0)
    best_area = 0
    heights = np.zeros(nx, dtype=np.int64)
    for y in range(ny):
        heights = np.where(mask[y], 0, heights + 1)
        stack = []  # (start column, height)
        for x in range(nx + 1):
            h = heights[x] if x < nx else 0
            start = x
            while stack and stack[-1][1] >= h:
                start, hh = stack.pop()
                area = hh * (x - start)
                if area > best_area:
                    best_area = area
                    best = (y + 1 - hh, y + 1, start, x)
            if not stack or h > stack[-1][1]:
                stack.append((start, h))
    if best_area == 0:
        raise ValueError("field has no unmasked cells")
    return best


def _spectral_crop(hf: HeightField) -> np.ndarray:
    """Mean-removed heights on the largest unmasked rectangle."""
    y0, y1, x0, x1 = _largest_unmasked_rectangle(hf.mask)
    z = hf.heights_um[y0:y1, x0:x1]
    return z - z.mean()


def autocorrelation_map(hf: HeightField):
    """Normalized linear autocorrelation of the largest unmasked rectangle.

    Periodogram convention: raw[dy, dx] = sum over the overlap of
    z[y, x] * z[y+dy, x+dx], computed via FFT with 2x zero padding per axis
    (so no wrap-around), normalized by the zero-lag value.  Returns
    ``(acf, dys_mm, dxs_mm)`` with dy >= 0 and dx spanning +-(nx-1) — the
    half-plane that covers every lag direction once.

    Raises ValueError on constant crops (zero-lag power is zero).
    """
    z = _spectral_crop(hf)
    ny, nx = z.shape
    spec = np.fft.rfft2(z, s=(2 * ny, 2 * nx))
    raw = np.fft.irfft2(spec * np.conj(spec), s=(2 * ny, 2 * nx))
    norm = raw[0, 0]
    if not norm > 1e-24:
        raise ValueError("autocorrelation undefined on a constant field")
    acf = np.empty((ny, 2 * nx - 1))
    acf[:, nx - 1:] = raw[:ny, :nx]
    acf[:, :nx - 1] = raw[:ny, 2 * nx - (nx - 1):]
    acf /= norm
    dys = hf.spacing[1] * np.arange(ny)
    dxs = hf.spacing[0] * np.arange(-(nx - 1), nx)
    return acf, dys, dxs


@dataclass(frozen=True)
class SalResult:
    """Fastest-decay autocorrelation length.

    ``status`` is ``"ok"``, ``"lower_bound"`` (the ACF never fell below the
    threshold inside the field; ``value_mm`` then holds the largest lag
    radius searched in every direction) or ``"undefined"``.
    """

    value_mm: float
    status: str
    threshold: float
    detail: str = ""


def autocorrelation_length(hf: HeightField, threshold: float = 0.2,
                           ) -> SalResult:
    """Smallest lag radius (mm, any direction) where the normalized ACF
    drops to ``threshold`` or below."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    try:
        acf, dys, dxs = autocorrelation_map(hf)
    except ValueError as exc:
        return SalResult(math.nan, "undefined", threshold, str(exc))
    rad = np.hypot(dxs[None, :], dys[:, None])
    below = acf <= threshold
    below[0, dxs.size // 2] = False          # zero lag
    if np.any(below):
        return SalResult(float(rad[below].min()), "ok", threshold)
    searched = float(min(dys[-1], dxs[-1])) if dys.size > 1 else 0.0
    return SalResult(searched, "lower_bound", threshold,
                     "ACF stayed above the threshold inside the field")


@dataclass(frozen=True)
class StdResult:
    """Texture (lay) direction from the angular power spectrum.

    ``value_deg`` is the lay direction — perpendicular to the dominant
    spectral direction — measured from the x-axis toward y, in (-90, 90].
    ``status`` is ``"ok"`` or ``"undefined"`` (isotropic or constant field);
    ``peak_ratio`` is peak/mean of the binned angular spectrum.
    """

    value_deg: float
    status: str
    peak_ratio: float
    bin_width_deg: float
    detail: str = ""


def texture_direction(hf: HeightField, nbins: int = 90,
                      isotropy_ratio: float = 1.05) -> StdResult:
    """Lay direction of the dominant surface marks.

    Integrates the 2D power spectrum over radial frequency into ``nbins``
    angular bins on [0, 180), keeps lattice points inside the inscribed
    Nyquist disc, excludes DC, and refines the peak bin by the power-
    weighted circular mean of its contributing frequency angles.
    """
    bw = 180.0 / nbins
    z = _spectral_crop(hf)
    ny, nx = z.shape
    power = np.abs(np.fft.fft2(z)) ** 2
    fx = np.fft.fftfreq(nx, d=hf.spacing[0])
    fy = np.fft.fftfreq(ny, d=hf.spacing[1])
    FX, FY = np.meshgrid(fx, fy)
    fr = np.hypot(FX, FY)
    flim = min(np.abs(fx).max(), np.abs(fy).max())
    keep = (fr > 0.0) & (fr <= flim + 1e-12)
    if not np.any(keep) or not power[keep].sum() > 1e-24:
        return StdResult(math.nan, "undefined", 1.0, bw, "constant field")
    p = power[keep]
    ang = np.arctan2(FY[keep], FX[keep]) % math.pi
    bins = np.minimum((ang / math.radians(bw)).astype(np.int64), nbins - 1)
    spectrum = np.bincount(bins, weights=p, minlength=nbins)
    ratio = float(spectrum.max() / spectrum.mean())
    if ratio < isotropy_ratio:
        return StdResult(math.nan, "undefined", ratio, bw,
                         "isotropic spectrum")
    k = int(spectrum.argmax())
    sel = bins == k
    vec = np.sum(p[sel] * np.exp(2j * ang[sel]))
    if abs(vec) > 1e-24:
        dominant = (0.5 * np.angle(vec)) % math.pi
    else:
        dominant = math.radians((k + 0.5) * bw)
    lay = math.degrees((dominant + 0.5 * math.pi) % math.pi)
    if lay > 90.0 + 1e-9:
        lay -= 180.0
    return StdResult(float(lay), "ok", ratio, bw)


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class ArealParams:
    """Areal parameter report; NaN entries carry a reason in ``flags``."""

    Sz: float
    Sa: float
    Sq: float
    Sku: float
    Ssk: float
    Sv: float
    Sds: float
    Sal: float
    Std: float
    flags: Dict[str, str] = field(default_factory=dict)

    def as_row(self):
        return [getattr(self, name) for name in _FIELDS]


def compute_all(hf: HeightField, sal_threshold: float = 0.2,
                std_bins: int = 90) -> ArealParams:
    """Full parameter set of a leveled field; per-parameter failures turn
    into NaN + flag instead of aborting the report."""
    amp, flags = amplitude_params(hf)
    out = dict(amp)
    try:
        out["Sds"] = summit_density(hf)
    except ValueError as exc:
        out["Sds"] = math.nan
        flags["Sds"] = str(exc)
    sal = autocorrelation_length(hf, threshold=sal_threshold)
    out["Sal"] = sal.value_mm
    if sal.status != "ok":
        flags["Sal"] = (sal.detail if sal.status == "undefined"
                        else f"lower bound: {sal.detail}")
    std = texture_direction(hf, nbins=std_bins)
    out["Std"] = std.value_deg
    if std.status != "ok":
        flags["Std"] = std.detail
    return ArealParams(flags=flags, **out)


def report_lines(params: ArealParams):
    """Key-value lines in the CSV column order; undefined parameters render
    as undef(<reason>), qualified values carry the reason in brackets."""
    lines = []
    for col, name, val in zip(CSV_COLUMNS, _FIELDS, params.as_row()):
        if isinstance(val, float) and math.isnan(val):
            lines.append(f"{col} = undef({params.flags.get(name, 'n/a')})")
        elif name in params.flags:
            lines.append(f"{col} = {val:.6g} [{params.flags[name]}]")
        else:
            lines.append(f"{col} = {val:.6g}")
    return lines


def csv_row(params: ArealParams) -> str:
    """One CSV row matching :data:`CSV_COLUMNS` (NaN for undefined)."""
    return ",".join(f"{v:.9g}" for v in params.as_row())
