"""Joint-track repair: short-memory median correction followed by RLowess.

Each joint/axis track is treated independently. A causal pass replaces a
frame when it is missing (0.0) or when its change from the previous frame is
a sudden jump relative to the track's typical frame-to-frame change. The
replacement is the median of the ``window_card`` most recent nonzero output
values inside the ``lookback`` horizon, so earlier corrections feed later
ones. A robust locally weighted linear smoother then removes the flat spots
and small impulses the correction leaves behind.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .data import AXES, JOINTS, JointTrack, WorldSkeletonSequence

logger = logging.getLogger(__name__)

THRESHOLD_MODES = ("relative", "literal_eq4", "absolute")
JUMP_REFERENCES = ("observed", "corrected")


@dataclass(frozen=True)
class RepairConfig:
    """Parameters of the correction pass and the smoother.

    threshold_mode
        ``literal_eq4``: relative change ``|c - p| / |p|`` against the median
        absolute first difference. ``relative``: same left side, right side
        built from relative differences. ``absolute``: ``|c - p|`` against the
        median absolute first difference.
    jump_factor
        Multiplier on the median threshold.
    jump_reference
        ``corrected``: compare with the (possibly corrected) previous output.
        ``observed``: compare with the most recent accepted observation and
        allow ``elapsed_frames`` times the threshold.
    """

    window_card: int = 3
    lookback: int = 30
    smoothing_span: int = 11
    robust_iterations: int = 3
    threshold_mode: str = "absolute"
    jump_factor: float = 8.0
    jump_reference: str = "observed"
    smooth: bool = True

    def __post_init__(self):
        if self.window_card < 1:
            raise ValueError("window_card must be >= 1")
        if self.lookback < self.window_card:
            raise ValueError("lookback must be >= window_card")
        if self.smoothing_span < 3 or self.smoothing_span % 2 == 0:
            raise ValueError("smoothing_span must be odd and >= 3")
        if self.robust_iterations < 0:
            raise ValueError("robust_iterations must be >= 0")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(f"threshold_mode must be one of {THRESHOLD_MODES}")
        if self.jump_reference not in JUMP_REFERENCES:
            raise ValueError(f"jump_reference must be one of {JUMP_REFERENCES}")
        if not self.jump_factor > 0:
            raise ValueError("jump_factor must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "RepairConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown repair options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrackReport:
    length: int = 0
    missing_corrected: int = 0
    jumps_corrected: int = 0
    uncorrectable: int = 0
    threshold: float = math.inf
    smoothing_span: int = 0
    warnings: List[str] = field(default_factory=list)


@dataclass
class RepairReport:
    tracks: Dict[str, TrackReport] = field(default_factory=dict)

    @property
    def missing_corrected(self) -> int:
        return sum(t.missing_corrected for t in self.tracks.values())

    @property
    def jumps_corrected(self) -> int:
        return sum(t.jumps_corrected for t in self.tracks.values())

    @property
    def uncorrectable(self) -> int:
        return sum(t.uncorrectable for t in self.tracks.values())

    @property
    def warnings(self) -> List[str]:
        return [f"{k}: {w}" for k, t in self.tracks.items() for w in t.warnings]

    def to_dict(self) -> dict:
        def _num(v):
            return None if isinstance(v, float) and math.isinf(v) else v

        return {
            "totals": {
                "missing_corrected": self.missing_corrected,
                "jumps_corrected": self.jumps_corrected,
                "uncorrectable": self.uncorrectable,
            },
            "tracks": {
                k: {kk: _num(vv) for kk, vv in asdict(t).items()}
                for k, t in self.tracks.items()
            },
        }


def _values(track) -> np.ndarray:
    return track.values if isinstance(track, JointTrack) else np.asarray(track, dtype=float)


def jump_threshold(track, mode: str = "relative") -> float:
    """Median magnitude of the nonzero frame-to-frame changes of a track.

    Only pairs where both frames are observed (nonzero) and the change is
    nonzero count. In ``relative`` mode each change is divided by the
    magnitude of the earlier value. Returns ``inf`` when no such pair exists,
    which disables jump detection.
    """
    v = _values(track)
    if len(v) < 2:
        return math.inf
    a, b = v[:-1], v[1:]
    ok = (a != 0.0) & (b != 0.0) & (a != b)
    d = np.abs(b[ok] - a[ok])
    if mode == "relative":
        d = d / np.abs(a[ok])
    elif mode not in THRESHOLD_MODES:
        raise ValueError(f"unknown threshold mode {mode!r}")
    if d.size == 0:
        return math.inf
    return float(np.median(d))


def is_jump(prev: float, curr: float, threshold: float, mode: str = "relative",
            elapsed: int = 1) -> bool:
    """True when ``curr`` departs from ``prev`` by more than the threshold.

    ``prev`` must be nonzero. For ``relative`` and ``literal_eq4`` the change
    is measured relative to ``|prev|``; for ``absolute`` in raw units. The
    allowance grows linearly with ``elapsed`` frames.
    """
    if prev == 0.0:
        raise ValueError("previous value must be nonzero")
    change = abs(curr - prev)
    if mode != "absolute":
        change = change / abs(prev)
    return change > threshold * elapsed


def repair_track(track, cfg: Optional[RepairConfig] = None,
                 threshold: Optional[float] = None) -> Tuple[JointTrack, TrackReport]:
    """Causal short-memory median correction of one track.

    ``threshold`` overrides the per-track median threshold (before
    ``jump_factor`` is applied). Frames before the first observation have no
    history; they are filled afterwards with the first output value.
    """
    cfg = cfg or RepairConfig()
    if isinstance(track, JointTrack):
        axis, joint = track.axis, track.joint
    else:
        axis, joint = "x", JOINTS[1]
    v = _values(track)
    n = len(v)
    rep = TrackReport(length=n)
    if n == 0:
        return JointTrack(v.copy(), axis, joint), rep
    if threshold is None:
        threshold = jump_threshold(v, cfg.threshold_mode)
        if n < 2:
            rep.warnings.append("track shorter than 2 frames; jump rule disabled")
    rep.threshold = threshold
    limit = threshold * cfg.jump_factor
    if not np.any(v != 0.0):
        rep.uncorrectable = n
        rep.warnings.append("track entirely missing; left unchanged")
        return JointTrack(v.copy(), axis, joint), rep

    out = v.tolist()
    last_obs = None
    last_obs_t = -1
    for t in range(n):
        c = out[t]
        if c != 0.0:
            if cfg.jump_reference == "corrected":
                prev = out[t - 1] if t > 0 else 0.0
                elapsed = 1
            else:
                prev = last_obs if last_obs is not None else 0.0
                elapsed = t - last_obs_t
            if prev == 0.0 or not is_jump(prev, c, limit, cfg.threshold_mode, elapsed):
                last_obs, last_obs_t = c, t
                continue
            rep.jumps_corrected += 1
        else:
            rep.missing_corrected += 1
        window = []
        for i in range(t - 1, max(0, t - cfg.lookback) - 1, -1):
            if out[i] != 0.0:
                window.append(out[i])
                if len(window) == cfg.window_card:
                    break
        # Empty only before the first observation; backfilled below.
        out[t] = statistics.median(window) if window else 0.0
    out = np.asarray(out, dtype=float)

    lead = np.flatnonzero(out != 0.0)
    if lead.size and lead[0] > 0:
        out[: lead[0]] = out[lead[0]]
    rep.uncorrectable = int(np.sum(out == 0.0))
    return JointTrack(out, axis, joint), rep


# ---------------------------------------------------------------------------
# Smoothing
# ---------------------------------------------------------------------------

def _tricube(u: np.ndarray) -> np.ndarray:
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u ** 3) ** 3


def _bisquare(u: np.ndarray) -> np.ndarray:
    w = (1.0 - u ** 2) ** 2
    w[np.abs(u) >= 1.0] = 0.0
    return w


def _local_linear(y: np.ndarray, idx: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Weighted least-squares line through each window, evaluated at its centre point.
    x = idx.astype(float)
    yw = y[idx]
    sw = w.sum(axis=1)
    n = len(y)
    xi = np.arange(n, dtype=float)
    fitted = y.copy()
    good = sw > 0
    sw_safe = np.where(good, sw, 1.0)
    xbar = (w * x).sum(axis=1) / sw_safe
    ybar = (w * yw).sum(axis=1) / sw_safe
    dx = x - xbar[:, None]
    sxx = (w * dx * dx).sum(axis=1)
    sxy = (w * dx * (yw - ybar[:, None])).sum(axis=1)
    # A window whose weight sits on one abscissa only supports a constant.
    flat = sxx <= 1e-12 * np.maximum(sw_safe, 1.0)
    slope = np.where(flat, 0.0, sxy / np.where(flat, 1.0, sxx))
    fitted[good] = (ybar + slope * (xi - xbar))[good]
    return fitted


def lowess_smooth(y, span: int = 11, robust_iterations: int = 3) -> np.ndarray:
    """Robust local linear smoothing over integer abscissae 0..n-1.

    Each point gets a weighted line fit over its ``span`` nearest frames with
    tricube weights scaled by the distance to the farthest of them. Each
    robustness round reweights points by the bisquare of residual / (6 *
    median absolute residual); when that median is 0 the mean absolute
    residual is used, and a zero mean ends the iterations.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 3:
        return y.copy()
    q = min(span, n if n % 2 else n - 1)
    h = q // 2
    start = np.clip(np.arange(n) - h, 0, n - q)
    idx = start[:, None] + np.arange(q)[None, :]
    dist = np.abs(idx - np.arange(n)[:, None]).astype(float)
    scale = dist.max(axis=1, keepdims=True)
    base = _tricube(dist / scale)

    fitted = _local_linear(y, idx, base)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(y))))
    for _ in range(robust_iterations):
        resid = np.abs(y - fitted)
        s = float(np.median(resid))
        if s <= tol:
            s = float(np.mean(resid))
            if s <= tol:
                break
        delta = _bisquare(resid / (6.0 * s))
        fitted = _local_linear(y, idx, base * delta[idx])
    return fitted


def smooth_track(track, cfg: Optional[RepairConfig] = None,
                 report: Optional[TrackReport] = None) -> JointTrack:
    """RLowess-smooth a fully repaired track; span is clamped to the length."""
    cfg = cfg or RepairConfig()
    if isinstance(track, JointTrack):
        axis, joint = track.axis, track.joint
    else:
        axis, joint = "x", JOINTS[1]
    v = _values(track)
    n = len(v)
    span = cfg.smoothing_span
    if n and span > n:
        span = n if n % 2 else n - 1
        msg = f"smoothing span {cfg.smoothing_span} clamped to {span}"
        logger.debug(msg)
        if report is not None:
            report.warnings.append(msg)
    if report is not None:
        report.smoothing_span = span
    if span < 3:
        return JointTrack(v.copy(), axis, joint)
    return JointTrack(lowess_smooth(v, span, cfg.robust_iterations), axis, joint)


def repair_sequence(seq: WorldSkeletonSequence,
                    cfg: Optional[RepairConfig] = None) -> Tuple[WorldSkeletonSequence, RepairReport]:
    """Repair and smooth all 42 tracks of a sequence independently."""
    cfg = cfg or RepairConfig()
    out = seq.data.copy()
    report = RepairReport()
    for j in JOINTS:
        for k, a in enumerate(AXES):
            tr = seq.track(j, a)
            fixed, rep = repair_track(tr, cfg)
            if cfg.smooth and rep.uncorrectable == 0:
                fixed = smooth_track(fixed, cfg, rep)
            out[:, j, k] = fixed.values
            report.tracks[f"{j.name}.{a}"] = rep
    return seq.replace_data(out), report


def moving_median(values, window: int) -> np.ndarray:
    """Centred moving median that treats every sample alike (zeros included)."""
    v = np.asarray(values, dtype=float)
    h = window // 2
    out = np.empty_like(v)
    for t in range(len(v)):
        out[t] = np.median(v[max(0, t - h): t + h + 1])
    return out
