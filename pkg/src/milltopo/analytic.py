"""Closed-form roughness predictors and full-factorial effect analysis.

Complements the simulator with the cheap algebra side of process planning:
peak-height estimates from feed/scallop geometry, the scallop-to-stepover
link, prediction-vs-simulation error summaries, and main-effect tables for
balanced experimental designs.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Dict, NamedTuple, Sequence, Tuple

import numpy as np

FACTOR_COLUMNS = ("yaw_deg", "tilt_deg", "hc_mm", "vf_m_per_min")

#: Factor levels of the default facing experiment (degrees, degrees, mm,
#: m/min).  Yaw carries three levels, the rest two.
DEFAULT_LEVELS: Dict[str, Tuple[float, ...]] = {
    "yaw_deg": (0.0, 20.0, 40.0),
    "tilt_deg": (1.0, 10.0),
    "hc_mm": (0.001, 0.005),
    "vf_m_per_min": (2.0, 4.0),
}

SZ_BRANCHES = ("as_printed", "swapped")


@dataclass(frozen=True)
class MachiningParams:
    """Operator-facing settings of one facing run.

    Angles in degrees, lengths in mm, feedrate in m/min.  ``stepover_mm``
    overrides the scallop-derived transverse step when given.
    """

    yaw_deg: float
    tilt_deg: float
    scallop_mm: float
    feed_per_tooth_mm: float
    feedrate_m_per_min: float
    stepover_mm: float | None = None

    def __post_init__(self):
        if not self.scallop_mm > 0.0:
            raise ValueError("scallop_mm must be positive")
        if not self.feed_per_tooth_mm > 0.0:
            raise ValueError("feed_per_tooth_mm must be positive")
        for name in ("yaw_deg", "tilt_deg"):
            if not abs(getattr(self, name)) < 90.0:
                raise ValueError(f"{name} must lie in (-90, 90)")


def predict_sz(feed_per_tooth: float, scallop: float, effective_radius: float,
               fillet: float, branch: str = "as_printed") -> float:
    """Closed-form Sz estimate (mm) from feed cusp and scallop geometry.

    The feed-direction cusp is ``f**2 / (8 r)`` over the fillet radius
    ``r``; whether the transverse scallop adds on top depends on how the
    fillet compares with the scallop-equivalent width
    ``sqrt(8 * scallop * effective_radius)``.  ``as_printed`` drops the
    scallop term for a wide fillet; ``swapped`` inverts that condition so
    the scallop adds in the wide-fillet regime instead.  Both are exposed
    because measured peak heights in the regime of interest favor the
    swapped reading; neither is silently preferred.
    """
    if min(feed_per_tooth, scallop, effective_radius, fillet) <= 0.0:
        raise ValueError("all inputs must be positive")
    if branch not in SZ_BRANCHES:
        raise ValueError(f"unknown branch {branch!r}")
    cusp = feed_per_tooth ** 2 / (8.0 * fillet)
    wide_fillet = fillet > math.sqrt(8.0 * scallop * effective_radius)
    if (branch == "as_printed") == wide_fillet:
        return cusp
    return scallop + cusp


def stepover_from_scallop(scallop: float, effective_radius: float) -> float:
    """Transverse step (mm) leaving at most ``scallop`` between passes.

    Small-cusp circle approximation ``s = sqrt(8 h R)``; exact for the
    sagitta to second order, within 5% of it for h/R up to ~1/8.
    """
    if not 0.0 < scallop < effective_radius:
        raise ValueError("scallop must lie in (0, effective_radius)")
    return math.sqrt(8.0 * scallop * effective_radius)


class ErrorStats(NamedTuple):
    mean_abs: float
    std: float


def analytic_vs_sim_error(predicted: Sequence[float],
                          simulated: Sequence[float]) -> ErrorStats:
    """Mean and population standard deviation of |predicted - simulated|."""
    p = np.asarray(predicted, dtype=np.float64)
    s = np.asarray(simulated, dtype=np.float64)
    if p.shape != s.shape:
        raise ValueError("predicted and simulated lengths differ")
    if p.size == 0:
        raise ValueError("empty design")
    err = np.abs(p - s)
    return ErrorStats(float(err.mean()), float(err.std()))


@dataclass(frozen=True)
class DesignTable:
    """Factor settings and per-run responses of a factorial experiment.

    ``levels`` is (n_runs, 4) in :data:`FACTOR_COLUMNS` order; ``responses``
    is (n_runs, n_params) with ``response_names`` labelling the columns.
    """

    levels: np.ndarray
    responses: np.ndarray
    response_names: Tuple[str, ...]

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=np.float64)
        rs = np.asarray(self.responses, dtype=np.float64)
        if lv.ndim != 2 or lv.shape[1] != len(FACTOR_COLUMNS):
            raise ValueError("levels must be (n, 4)")
        if rs.ndim != 2 or rs.shape[0] != lv.shape[0]:
            raise ValueError("responses must be (n, k) matching levels")
        if lv.shape[0] == 0:
            raise ValueError("empty design")
        if rs.shape[1] != len(self.response_names):
            raise ValueError("response_names must label every column")
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "responses", rs)
        object.__setattr__(self, "response_names", tuple(self.response_names))

    def __len__(self) -> int:
        return self.levels.shape[0]

    def response(self, name: str) -> np.ndarray:
        return self.responses[:, self.response_names.index(name)]


def full_factorial(levels: Dict[str, Sequence[float]] | None = None,
                   ) -> np.ndarray:
    """All level combinations, (n, 4) in FACTOR_COLUMNS order.

    Iteration order is deterministic: last factor fastest.
    """
    levels = dict(DEFAULT_LEVELS if levels is None else levels)
    axes = [tuple(levels[name]) for name in FACTOR_COLUMNS]
    return np.array(list(itertools.product(*axes)), dtype=np.float64)


def load_design_csv(path) -> DesignTable:
    """Read ``yaw_deg,tilt_deg,hc_mm,vf_m_per_min,<responses...>`` rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if header is None:
            raise ValueError("empty design file")
        header = [h.strip() for h in header]
        if tuple(header[: len(FACTOR_COLUMNS)]) != FACTOR_COLUMNS:
            raise ValueError(
                "design header must start with " + ",".join(FACTOR_COLUMNS))
        names = tuple(header[len(FACTOR_COLUMNS):])
        if not names:
            raise ValueError("design has no response columns")
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"row width {len(row)} != header {len(header)}")
            rows.append([float(c) for c in row])
    if not rows:
        raise ValueError("design has no data rows")
    data = np.asarray(rows, dtype=np.float64)
    return DesignTable(data[:, : len(FACTOR_COLUMNS)],
                       data[:, len(FACTOR_COLUMNS):], names)


def save_design_csv(table: DesignTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(FACTOR_COLUMNS) + list(table.response_names))
        for lv, rs in zip(table.levels, table.responses):
            writer.writerow([f"{v:.12g}" for v in lv]
                            + [f"{v:.12g}" for v in rs])


@dataclass(frozen=True)
class EffectTable:
    """Grand means and signed main effects of a balanced factorial.

    ``effects[i, j]`` is half the response-``i`` difference between factor
    ``j``'s extreme levels; folding with coded levels x in {-1, +1}
    reconstructs a pure main-effects response exactly:
    ``fitted = mean + sum_j effect_j * x_j``.
    """

    response_names: Tuple[str, ...]
    factor_names: Tuple[str, ...]
    means: np.ndarray
    effects: np.ndarray

    def mean(self, response: str) -> float:
        return float(self.means[self.response_names.index(response)])

    def effect(self, response: str, factor: str) -> float:
        return float(self.effects[self.response_names.index(response),
                                  self.factor_names.index(factor)])


def _check_balanced(levels: np.ndarray, axes: Sequence[np.ndarray]) -> None:
    combos: Dict[tuple, int] = {}
    for row in levels:
        combos[tuple(row)] = combos.get(tuple(row), 0) + 1
    expect = 1
    for ax in axes:
        expect *= ax.size
    if len(combos) != expect or len(set(combos.values())) != 1:
        raise ValueError("unbalanced design: every level combination "
                         "must appear the same number of times")


def factor_effects(design: DesignTable) -> EffectTable:
    """Main-effect table of a balanced 2-level design (3 levels allowed
    per factor, whose middle level then counts toward the mean only)."""
    axes = [np.unique(design.levels[:, j])
            for j in range(len(FACTOR_COLUMNS))]
    for name, ax in zip(FACTOR_COLUMNS, axes):
        if not 2 <= ax.size <= 3:
            raise ValueError(f"factor {name} needs 2 or 3 levels, "
                             f"got {ax.size}")
    _check_balanced(design.levels, axes)
    means = design.responses.mean(axis=0)
    effects = np.empty((design.responses.shape[1], len(FACTOR_COLUMNS)))
    for j, ax in enumerate(axes):
        at_lo = design.levels[:, j] == ax[0]
        at_hi = design.levels[:, j] == ax[-1]
        effects[:, j] = 0.5 * (design.responses[at_hi].mean(axis=0)
                               - design.responses[at_lo].mean(axis=0))
    return EffectTable(design.response_names, FACTOR_COLUMNS, means, effects)


def effect_table_lines(table: EffectTable) -> list:
    """Fixed-width text layout: one row per response, mean then factors."""
    head = f"{'parameter':<14}{'mean':>12}" + "".join(
        f"{f:>16}" for f in table.factor_names)
    lines = [head]
    for i, name in enumerate(table.response_names):
        cells = "".join(f"{table.effects[i, j]:>16.6g}"
                        for j in range(len(table.factor_names)))
        lines.append(f"{name:<14}{table.means[i]:>12.6g}" + cells)
    return lines


def effect_table_csv(table: EffectTable) -> str:
    rows = ["parameter,mean," + ",".join(table.factor_names)]
    for i, name in enumerate(table.response_names):
        rows.append(",".join([name, f"{table.means[i]:.9g}"]
                             + [f"{v:.9g}" for v in table.effects[i]]))
    return "\n".join(rows) + "\n"
