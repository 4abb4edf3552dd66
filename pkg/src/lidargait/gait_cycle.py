"""Gait-cycle estimation from the ankle-to-ankle distance and window concatenation."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np
from scipy.signal import find_peaks

from .data import JointId, WorldSkeletonSequence

logger = logging.getLogger(__name__)


@dataclass
class CycleEstimate:
    cycle_frames: int
    candidate_cycles: List[int] = field(default_factory=list)
    trimmed_cycles: List[int] = field(default_factory=list)
    peaks: List[int] = field(default_factory=list)
    fallback: bool = False
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "cycle_frames": self.cycle_frames,
            "candidate_cycles": self.candidate_cycles,
            "trimmed_cycles": self.trimmed_cycles,
            "peaks": self.peaks,
            "fallback": self.fallback,
            "warnings": self.warnings,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CycleEstimate":
        return cls(**d)


@dataclass
class WindowFeature:
    values: np.ndarray
    start_frame: int
    subject_label: str = ""


def ankle_distance(seq: WorldSkeletonSequence) -> np.ndarray:
    """Per-frame Euclidean distance between the two ankles."""
    d = seq.data[:, JointId.RAnkle, :] - seq.data[:, JointId.LAnkle, :]
    return np.linalg.norm(d, axis=1)


def vote(values: Iterable[int]) -> int:
    """Most frequent value; ties go to the smaller one."""
    counts = Counter(int(v) for v in values)
    if not counts:
        raise ValueError("nothing to vote on")
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


def trim_outliers(values: Sequence[int], method: str = "iqr", k: float = 1.5,
                  percentiles=(10.0, 90.0)) -> List[int]:
    """Drop values outside the Tukey fence (``iqr``) or a percentile band."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return []
    if method == "iqr":
        q1, q3 = np.percentile(v, [25.0, 75.0])
        lo, hi = q1 - k * (q3 - q1), q3 + k * (q3 - q1)
    elif method == "percentile":
        lo, hi = np.percentile(v, list(percentiles))
    elif method == "none":
        return [int(x) for x in values]
    else:
        raise ValueError(f"unknown trim method {method!r}")
    return [int(x) for x in values if lo <= x <= hi]


def estimate_cycle(dist, min_prominence: float = 0.1, trim: str = "iqr",
                   fallback_cycle: int = 20, iqr_k: float = 1.5,
                   percentiles=(10.0, 90.0)) -> CycleEstimate:
    """Gait-cycle length (frames) voted from an ankle-distance series.

    Peaks of the series are found with the given minimum prominence; each
    stride produces two of them, so the candidate cycle lengths are the gaps
    between every second peak. Outlying candidates are trimmed and the most
    frequent remaining length wins (smaller on ties). Fewer than three peaks
    gives ``fallback_cycle`` with ``fallback=True``.
    """
    dist = np.asarray(dist, dtype=float)
    if dist.size < 3:
        raise ValueError("distance series needs at least 3 samples")
    peaks, _ = find_peaks(dist, prominence=min_prominence)
    peaks = [int(p) for p in peaks]
    if len(peaks) < 3:
        msg = f"only {len(peaks)} peaks found; using fallback cycle {fallback_cycle}"
        logger.warning(msg)
        return CycleEstimate(fallback_cycle, [], [], peaks, True, [msg])
    candidates = [peaks[i + 2] - peaks[i] for i in range(len(peaks) - 2)]
    kept = trim_outliers(candidates, trim, iqr_k, percentiles)
    if not kept:
        # Only possible for percentile bands on tiny samples.
        kept = list(candidates)
    return CycleEstimate(vote(kept), candidates, kept, peaks)


def concatenate_features(frame_features, cycle_frames: int, stride: int = 1,
                         subject_label: str = "") -> List[WindowFeature]:
    """Sliding windows of ``cycle_frames`` consecutive frame features, flattened."""
    mat = window_matrix(frame_features, cycle_frames, stride)
    return [WindowFeature(row, i * stride, subject_label) for i, row in enumerate(mat)]


def window_matrix(frame_features, cycle_frames: int, stride: int = 1) -> np.ndarray:
    """Array form of :func:`concatenate_features`: ``(n_windows, 36 * C)``."""
    f = np.asarray(frame_features, dtype=float)
    if cycle_frames < 1 or stride < 1:
        raise ValueError("cycle_frames and stride must be positive")
    n = f.shape[0]
    width = f.shape[1] if f.ndim == 2 else 0
    if n < cycle_frames:
        logger.warning("%d frames is shorter than the window of %d; no windows", n, cycle_frames)
        return np.empty((0, width * cycle_frames))
    starts = np.arange(0, n - cycle_frames + 1, stride)
    idx = starts[:, None] + np.arange(cycle_frames)[None, :]
    return f[idx].reshape(len(starts), -1)


def resampled_window_matrix(frame_features, own_cycle: int, target: int, stride: int = 1) -> np.ndarray:
    """Windows of ``own_cycle`` frames linearly resampled in time to ``target`` frames."""
    f = np.asarray(frame_features, dtype=float)
    raw = window_matrix(f, own_cycle, stride)
    if own_cycle == target or raw.shape[0] == 0:
        return window_matrix(f, target, stride) if own_cycle == target else np.empty((0, f.shape[1] * target))
    d = f.shape[1]
    win = raw.reshape(raw.shape[0], own_cycle, d)
    src = np.linspace(0.0, own_cycle - 1, target)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, own_cycle - 1)
    frac = (src - lo)[None, :, None]
    out = win[:, lo, :] * (1 - frac) + win[:, hi, :] * frac
    return out.reshape(raw.shape[0], -1)
