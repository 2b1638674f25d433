"""Toolpath ingestion and spindle-synchronized sampling.

A trajectory is an ordered list of postures (tip, axis, feedrate); between
consecutive postures the tip moves along the chord while the spindle turns at
constant speed.  Sampling emits one tool state per fixed spindle-angle step
``dalpha`` so that tooth engagement windows tile the revolution exactly.

Internal units: mm, seconds, radians.  Machine units (m/min feed,
rev/min spindle speed) are converted at ingestion only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from .tool import ToolState

MM_S_PER_M_MIN = 1000.0 / 60.0
RAD_S_PER_RPM = 2.0 * math.pi / 60.0

#: spindle angle shortfall (rad) below which the segment-end state replaces
#: the last on-grid sample instead of being emitted separately
_END_SNAP = 1e-12


@dataclass
class ToolPosture:
    """One programmed posture: tip (mm), unit axis, feedrate (mm/s)."""

    tip: np.ndarray
    axis: np.ndarray
    feed: float

    def __post_init__(self):
        self.tip = np.asarray(self.tip, dtype=np.float64).reshape(3)
        self.axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-9:
            raise ValueError("posture axis must be unit length")
        if not self.feed > 0.0:
            raise ValueError("posture feedrate must be positive")

    @classmethod
    def from_machine_units(cls, tip_mm, axis, vf_m_per_min: float) -> "ToolPosture":
        axis = np.asarray(axis, dtype=np.float64).reshape(3)
        n = np.linalg.norm(axis)
        if n < 1e-12:
            raise ValueError("posture axis has zero length")
        return cls(tip=tip_mm, axis=axis / n, feed=vf_m_per_min * MM_S_PER_M_MIN)


@dataclass
class Trajectory:
    """Posture sequence plus spindle speed (rad/s)."""

    postures: List[ToolPosture]
    spindle_speed: float

    def __post_init__(self):
        if len(self.postures) < 2:
            raise ValueError("a trajectory needs at least 2 postures")
        if not self.spindle_speed > 0.0:
            raise ValueError("spindle speed must be positive")
        for a, b in zip(self.postures, self.postures[1:]):
            if (segment_length(a, b) <= 1e-9
                    and float(np.dot(a.axis, b.axis)) > 1.0 - 1e-12):
                raise ValueError("coincident consecutive postures")

    @classmethod
    def from_machine_units(cls, postures: Sequence[ToolPosture],
                           rpm: float) -> "Trajectory":
        return cls(postures=list(postures), spindle_speed=rpm * RAD_S_PER_RPM)


@dataclass
class SampledToolState:
    """One emitted cutting state.

    ``tooth_window`` is the half-open spindle-angle interval [start, end)
    swept until the next state; both bounds are unwrapped (monotone over the
    whole trajectory).
    """

    state: ToolState
    feed: float
    time: float
    tooth_window: tuple[float, float]

    @property
    def window_length(self) -> float:
        return self.tooth_window[1] - self.tooth_window[0]


@dataclass
class SamplingDiagnostics:
    """Counters accumulated while sampling a trajectory."""

    segments: int = 0
    under_sampled_segments: int = 0
    states: int = 0


@dataclass
class StateArrays:
    """Sampled tool states packed into contiguous arrays.

    Large jobs sample straight into this form; the engine consumes it
    as-is, and :meth:`to_states` materializes the equivalent list of
    :class:`SampledToolState` when object access is needed.
    """

    tips: np.ndarray      # (n, 3) mm
    axes: np.ndarray      # (n, 3) unit
    alphas: np.ndarray    # (n,) unwrapped spindle angles, rad
    wlens: np.ndarray     # (n,) tooth-window lengths, rad
    feeds: np.ndarray     # (n,) mm/s
    times: np.ndarray     # (n,) s

    def __len__(self) -> int:
        return int(self.alphas.shape[0])

    def to_states(self) -> List[SampledToolState]:
        out: List[SampledToolState] = []
        for k in range(len(self)):
            a = float(self.alphas[k])
            out.append(SampledToolState(
                state=ToolState(tip=self.tips[k].copy(),
                                axis=self.axes[k].copy(),
                                spindle_angle=a),
                feed=float(self.feeds[k]),
                time=float(self.times[k]),
                tooth_window=(a, a + float(self.wlens[k])),
            ))
        return out


def concat_state_arrays(parts: Sequence[StateArrays]) -> StateArrays:
    if not parts:
        raise ValueError("nothing to concatenate")
    return StateArrays(
        tips=np.concatenate([p.tips for p in parts], axis=0),
        axes=np.concatenate([p.axes for p in parts], axis=0),
        alphas=np.concatenate([p.alphas for p in parts]),
        wlens=np.concatenate([p.wlens for p in parts]),
        feeds=np.concatenate([p.feeds for p in parts]),
        times=np.concatenate([p.times for p in parts]),
    )


def segment_length(p_i: ToolPosture, p_j: ToolPosture) -> float:
    """Euclidean tip displacement between two postures, mm."""
    return float(np.linalg.norm(p_j.tip - p_i.tip))


def segment_duration(d_len: float, vf_i: float, vf_j: float) -> float:
    """Traversal time of a segment under linearly ramped feedrate.

    Uses the mean of the endpoint feedrates; a non-positive mean has no
    kinematic meaning and raises.
    """
    if d_len < 0.0:
        raise ValueError("segment length must be non-negative")
    mean = 0.5 * (vf_i + vf_j)
    if mean <= 0.0:
        raise ValueError("mean feedrate must be positive")
    return d_len / mean


def advance_spindle_angle(alpha: float, omega: float, dt: float) -> float:
    """Unwrapped spindle angle after dt seconds at omega rad/s."""
    if omega <= 0.0:
        raise ValueError("spindle speed must be positive")
    return alpha + omega * dt


def _interp_axis(axis_i: np.ndarray, axis_j: np.ndarray, frac: float) -> np.ndarray:
    a = axis_i + (axis_j - axis_i) * frac
    n = np.linalg.norm(a)
    if n < 1e-9:
        raise ValueError("axis interpolation collapsed (opposed axes)")
    return a / n


def sample_segment(p_i: ToolPosture, p_j: ToolPosture, alpha_i: float,
                   omega: float, dalpha: float, t0: float = 0.0,
                   diagnostics: SamplingDiagnostics | None = None,
                   ) -> List[SampledToolState]:
    """Sample one posture-to-posture segment at fixed spindle-angle steps.

    States are emitted at alpha = alpha_i + n*dalpha for n = 1..floor(segment
    sweep / dalpha); the elapsed-time fraction sets the local feedrate ramp
    and the trapezoidal arc length that places the tip along the chord.  The
    segment end posture is always part of the output: it replaces the last
    grid sample when that sample already sits on the end angle, otherwise it
    is appended as one extra state.  Tooth windows are filled in by
    :func:`sample_trajectory`; here each state carries a placeholder window
    starting at its own angle.
    """
    if dalpha <= 0.0:
        raise ValueError("dalpha must be positive")
    if omega <= 0.0:
        raise ValueError("spindle speed must be positive")
    d_len = segment_length(p_i, p_j)
    d_t = segment_duration(d_len, p_i.feed, p_j.feed)
    alpha_end = advance_spindle_angle(alpha_i, omega, d_t)
    sweep = alpha_end - alpha_i
    dt = dalpha / omega

    if diagnostics is not None:
        diagnostics.segments += 1

    states: List[SampledToolState] = []
    n_max = int(math.floor(sweep / dalpha))
    if n_max < 1 and diagnostics is not None:
        diagnostics.under_sampled_segments += 1

    chord = p_j.tip - p_i.tip
    dvf = p_j.feed - p_i.feed
    for n in range(1, n_max + 1):
        elapsed = n * dt
        if d_t > 0.0:
            vf_star = p_i.feed + dvf * elapsed / (2.0 * d_t)
        else:
            vf_star = p_i.feed
        s = 0.5 * (vf_star + p_i.feed) * elapsed
        s = min(s, d_len)
        frac = s / d_len if d_len > 0.0 else 0.0
        tip = p_i.tip + chord * frac
        axis = _interp_axis(p_i.axis, p_j.axis, frac)
        alpha = alpha_i + n * dalpha
        states.append(SampledToolState(
            state=ToolState(tip=tip, axis=axis, spindle_angle=alpha),
            feed=vf_star, time=t0 + elapsed,
            tooth_window=(alpha, alpha),
        ))

    end_state = SampledToolState(
        state=ToolState(tip=p_j.tip.copy(), axis=p_j.axis.copy(),
                        spindle_angle=alpha_end),
        feed=p_j.feed, time=t0 + d_t,
        tooth_window=(alpha_end, alpha_end),
    )
    if states and alpha_end - states[-1].state.spindle_angle <= _END_SNAP:
        states[-1] = end_state
    else:
        states.append(end_state)

    if diagnostics is not None:
        diagnostics.states += len(states)
    return states


def sample_trajectory(traj: Trajectory, dalpha: float,
                      diagnostics: SamplingDiagnostics | None = None,
                      ) -> List[SampledToolState]:
    """Sample every segment, threading time and spindle angle.

    On return each state's tooth window spans from its own angle to the next
    state's angle; the final state gets a full ``dalpha`` window.
    """
    states: List[SampledToolState] = []
    alpha = 0.0
    t = 0.0
    for p_i, p_j in zip(traj.postures, traj.postures[1:]):
        seg = sample_segment(p_i, p_j, alpha, traj.spindle_speed, dalpha,
                             t0=t, diagnostics=diagnostics)
        states.extend(seg)
        alpha = seg[-1].state.spindle_angle
        t = seg[-1].time
    for k in range(len(states) - 1):
        states[k].tooth_window = (states[k].state.spindle_angle,
                                  states[k + 1].state.spindle_angle)
    states[-1].tooth_window = (states[-1].state.spindle_angle,
                               states[-1].state.spindle_angle + dalpha)
    return states


def sample_states(traj: Trajectory, dalpha: float, alpha0: float = 0.0,
                  t0: float = 0.0) -> StateArrays:
    """Vectorized :func:`sample_trajectory` producing packed arrays.

    Emits exactly the states the object sampler would (same angle grid,
    feed ramp, trapezoidal placement, end snapping and window rule), but
    without building per-state objects, so million-state jobs stay cheap.
    ``alpha0``/``t0`` seed the spindle angle and clock, letting callers
    thread continuity across separately sampled trajectories.
    """
    if dalpha <= 0.0:
        raise ValueError("dalpha must be positive")
    omega = traj.spindle_speed
    dt = dalpha / omega
    tips_l, axes_l, al_l, fd_l, tm_l = [], [], [], [], []
    alpha = float(alpha0)
    t = float(t0)
    for p_i, p_j in zip(traj.postures, traj.postures[1:]):
        d_len = segment_length(p_i, p_j)
        d_t = segment_duration(d_len, p_i.feed, p_j.feed)
        alpha_end = advance_spindle_angle(alpha, omega, d_t)
        n_max = int(math.floor((alpha_end - alpha) / dalpha))
        n = np.arange(1, n_max + 1, dtype=np.float64)
        elapsed = n * dt
        if d_t > 0.0:
            vf = p_i.feed + (p_j.feed - p_i.feed) * elapsed / (2.0 * d_t)
        else:
            vf = np.full(n.shape, p_i.feed)
        s = np.minimum(0.5 * (vf + p_i.feed) * elapsed, d_len)
        frac = s / d_len if d_len > 0.0 else np.zeros_like(s)
        tips = p_i.tip[None, :] + (p_j.tip - p_i.tip)[None, :] * frac[:, None]
        ax = p_i.axis[None, :] + (p_j.axis - p_i.axis)[None, :] * frac[:, None]
        nrm = np.sqrt(np.einsum("ij,ij->i", ax, ax))
        if nrm.size and float(np.min(nrm)) < 1e-9:
            raise ValueError("axis interpolation collapsed (opposed axes)")
        ax /= np.maximum(nrm, 1e-300)[:, None]
        als = alpha + n * dalpha
        if n_max >= 1 and alpha_end - als[-1] <= _END_SNAP:
            tips[-1] = p_j.tip
            ax[-1] = p_j.axis
            als[-1] = alpha_end
            vf[-1] = p_j.feed
            elapsed[-1] = d_t
        else:
            tips = np.concatenate([tips, p_j.tip[None, :]], axis=0)
            ax = np.concatenate([ax, p_j.axis[None, :]], axis=0)
            als = np.concatenate([als, [alpha_end]])
            vf = np.concatenate([vf, [p_j.feed]])
            elapsed = np.concatenate([elapsed, [d_t]])
        tips_l.append(tips)
        axes_l.append(ax)
        al_l.append(als)
        fd_l.append(vf)
        tm_l.append(t + elapsed)
        alpha = float(als[-1])
        t = float(t + elapsed[-1])
    alphas = np.concatenate(al_l)
    wlens = np.empty_like(alphas)
    wlens[:-1] = np.diff(alphas)
    wlens[-1] = dalpha
    return StateArrays(tips=np.concatenate(tips_l, axis=0),
                       axes=np.concatenate(axes_l, axis=0),
                       alphas=alphas, wlens=wlens,
                       feeds=np.concatenate(fd_l),
                       times=np.concatenate(tm_l))


def states_as_arrays(states):
    """Pack sampled states into contiguous arrays for the engine kernels.

    Accepts either a sequence of :class:`SampledToolState` or an already
    packed :class:`StateArrays`.  Returns (tips (n,3), axes (n,3),
    alphas (n,), window_lengths (n,), feeds (n,), times (n,)).
    """
    if isinstance(states, StateArrays):
        return (states.tips, states.axes, states.alphas, states.wlens,
                states.feeds, states.times)
    n = len(states)
    tips = np.empty((n, 3))
    axes = np.empty((n, 3))
    alphas = np.empty(n)
    wlens = np.empty(n)
    feeds = np.empty(n)
    times = np.empty(n)
    for k, s in enumerate(states):
        tips[k] = s.state.tip
        axes[k] = s.state.axis
        alphas[k] = s.state.spindle_angle
        wlens[k] = s.window_length
        feeds[k] = s.feed
        times[k] = s.time
    return tips, axes, alphas, wlens, feeds, times


def load_postures_csv(path) -> List[ToolPosture]:
    """Read postures from CSV lines ``x_mm,y_mm,z_mm,i,j,k,vf_m_per_min``.

    ``#`` starts a comment; a single non-numeric header line is allowed.
    """
    path = Path(path)
    postures: List[ToolPosture] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 7:
                raise ValueError(
                    f"{path}:{lineno}: expected 7 comma-separated fields, "
                    f"got {len(parts)}"
                )
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                if lineno == 1 and not postures:
                    continue  # header line
                raise ValueError(f"{path}:{lineno}: non-numeric field") from None
            postures.append(ToolPosture.from_machine_units(
                tip_mm=vals[0:3], axis=vals[3:6], vf_m_per_min=vals[6]))
    if not postures:
        raise ValueError(f"{path}: no postures found")
    return postures


def save_postures_csv(postures: Iterable[ToolPosture], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# x_mm,y_mm,z_mm,i,j,k,vf_m_per_min\n")
        for p in postures:
            vf = p.feed / MM_S_PER_M_MIN
            fh.write(",".join(f"{v:.17g}" for v in (*p.tip, *p.axis, vf)) + "\n")
