"""Synthetic walking skeletons and a lidar-style corruption model.

The walker is a planar swing model: hips and shoulders swing sinusoidally in
the sagittal plane, knees and elbows flex with the same period, and the body
follows a path on the ground plane in camera coordinates (x right, y down, z
away from the camera). Left limbs run half a cycle behind the right ones, so
the ankle-to-ankle distance repeats every half gait cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import (
    JOINTS, N_JOINTS, CameraParams, JointId, JointObservation, RawSequence,
    RawSkeletonFrame, WorldSkeletonSequence,
)
from .features import FEATURE_PAIRS
from .projection import unproject_joint

J = JointId
WALK_TYPES = ("toward", "diamond", "diamond_stick")
SEGMENTS: Tuple[str, ...] = tuple(f"{a.name}-{b.name}" for a, b in FEATURE_PAIRS)

CAMERA_HEIGHT = 1.0

DEFAULT_LIMBS = {
    "Neck-RShoulder": 0.19, "Neck-LShoulder": 0.19,
    "Neck-RHip": 0.56, "Neck-LHip": 0.56,
    "RShoulder-RElbow": 0.30, "LShoulder-LElbow": 0.30,
    "RHip-RKnee": 0.45, "LHip-LKnee": 0.45,
    "RElbow-RWrist": 0.27, "LElbow-LWrist": 0.27,
    "RKnee-RAnkle": 0.43, "LKnee-LAnkle": 0.43,
}


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class SubjectProfile:
    """Body measurements (meters) and gait dynamics of one synthetic subject."""

    name: str = "subject"
    limb_lengths: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_LIMBS))
    cadence_frames: int = 20
    hip_swing: float = 0.40
    knee_flex: float = 0.90
    shoulder_swing: float = 0.35
    elbow_flex: float = 0.40
    phase: float = 0.0
    knee_phase: float = 0.5
    hip_half_width: float = 0.10
    head_height: float = 0.22

    def __post_init__(self):
        missing = set(SEGMENTS) - set(self.limb_lengths)
        if missing:
            raise ProfileError(f"profile {self.name}: missing limb lengths {sorted(missing)}")
        for k, v in self.limb_lengths.items():
            if k not in SEGMENTS:
                raise ProfileError(f"profile {self.name}: unknown segment {k!r}")
            if not v > 0:
                raise ProfileError(f"profile {self.name}: limb {k} must be positive")
        for side in "RL":
            if self.limb_lengths[f"Neck-{side}Hip"] <= self.hip_half_width:
                raise ProfileError(f"profile {self.name}: torso shorter than hip half width")
        if self.cadence_frames < 4:
            raise ProfileError(f"profile {self.name}: cadence must be >= 4 frames")
        if self.hip_half_width <= 0:
            raise ProfileError(f"profile {self.name}: hip half width must be positive")

    def leg_length(self, side: str = "R") -> float:
        return self.limb_lengths[f"{side}Hip-{side}Knee"] + self.limb_lengths[f"{side}Knee-{side}Ankle"]

    @classmethod
    def from_dict(cls, d: dict) -> "SubjectProfile":
        d = dict(d)
        limbs = dict(DEFAULT_LIMBS)
        limbs.update(d.pop("limb_lengths", {}))
        return cls(limb_lengths=limbs, **d)


def random_profile(rng: np.random.Generator, name: str = "subject",
                   cadence_range: Tuple[int, int] = (16, 30),
                   body_sd: float = 0.04) -> SubjectProfile:
    """Draw a plausible adult; ``body_sd`` is the relative spread of body size and limbs."""
    size = rng.normal(1.0, body_sd)
    limbs = {}
    for seg in SEGMENTS:
        if seg.endswith("LShoulder") or seg.endswith("LHip") or seg.startswith("L"):
            continue
        length = DEFAULT_LIMBS[seg] * size * rng.normal(1.0, body_sd)
        limbs[seg] = length
        # Left side mirrors the right with a small asymmetry.
        mirror = seg.replace("R", "L")
        limbs[mirror] = length * rng.normal(1.0, 0.01)
    return SubjectProfile(
        name=name,
        limb_lengths=limbs,
        cadence_frames=int(rng.integers(cadence_range[0], cadence_range[1] + 1)),
        hip_swing=float(rng.uniform(0.30, 0.50)),
        knee_flex=float(rng.uniform(0.70, 1.10)),
        shoulder_swing=float(rng.uniform(0.20, 0.50)),
        elbow_flex=float(rng.uniform(0.20, 0.60)),
        phase=float(rng.uniform(0, 2 * math.pi)),
        knee_phase=float(rng.uniform(0.2, 0.8)),
        hip_half_width=0.10 * size * float(rng.normal(1.0, body_sd)),
        head_height=0.22 * size,
    )


def perturb_profile(profile: SubjectProfile, rng: np.random.Generator,
                    scale: float = 0.05) -> SubjectProfile:
    """Trial-to-trial variation of one subject: swing amplitudes only."""
    def j(v):
        return float(v * (1.0 + scale * rng.standard_normal()))

    return replace(
        profile,
        hip_swing=j(profile.hip_swing), knee_flex=j(profile.knee_flex),
        shoulder_swing=j(profile.shoulder_swing), elbow_flex=j(profile.elbow_flex),
    )


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

_PATHS = {
    "toward": [(-0.3, 9.0), (-0.3, 4.5), (0.3, 4.5), (0.3, 9.0)],
    "diamond": [(0.0, 8.75), (1.5, 6.75), (0.0, 4.75), (-1.5, 6.75)],
}


def _path_points(walk_type: str):
    key = "toward" if walk_type == "toward" else "diamond"
    return np.asarray(_PATHS[key], dtype=float)


def _walk_path(points: np.ndarray, s: np.ndarray, turn: float = 0.4):
    """Positions and smoothed headings at arc lengths ``s`` on a closed polyline."""
    closed = np.vstack([points, points[:1]])
    seg = np.diff(closed, axis=0)
    seglen = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    total = cum[-1]

    def pos(arc):
        arc = np.mod(arc, total)
        k = np.clip(np.searchsorted(cum, arc, side="right") - 1, 0, len(seglen) - 1)
        frac = (arc - cum[k]) / seglen[k]
        return closed[k] + frac[:, None] * seg[k]

    p = pos(s)
    chord = pos(s + turn) - pos(s - turn)
    heading = np.arctan2(chord[:, 0], chord[:, 1])
    return p, heading


# ---------------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------------

def _limb(root, angle, length, fwd, up):
    # Segment hanging from ``root`` rotated ``angle`` forward from straight down.
    return root + length * (np.sin(angle)[:, None] * fwd - np.cos(angle)[:, None] * up)


def generate_sequence(profile: SubjectProfile, n_frames: int, walk_type: str = "toward",
                      start: float = 0.0, sequence_id: str = "") -> WorldSkeletonSequence:
    """Clean 3D joint trajectories of ``profile`` walking along ``walk_type``.

    ``start`` is the arc-length offset (meters) on the closed walking path.
    """
    if walk_type not in WALK_TYPES:
        raise ProfileError(f"unknown walk type {walk_type!r}")
    if n_frames < profile.cadence_frames:
        raise ProfileError("n_frames must cover at least one gait cycle")
    L = profile.limb_lengths
    t = np.arange(n_frames, dtype=float)
    psi = 2 * math.pi * t / profile.cadence_frames + profile.phase

    speed = 4.0 * profile.leg_length() * math.sin(profile.hip_swing) / profile.cadence_frames
    ground, heading = _walk_path(_path_points(walk_type), start + speed * t)

    fwd = np.stack([np.sin(heading), np.zeros(n_frames), np.cos(heading)], axis=1)
    right = np.stack([np.cos(heading), np.zeros(n_frames), -np.sin(heading)], axis=1)
    up = np.array([0.0, -1.0, 0.0])

    drop = {s: math.sqrt(L[f"Neck-{s}Hip"] ** 2 - profile.hip_half_width ** 2) for s in "RL"}
    neck_height = max(drop[s] + profile.leg_length(s) for s in "RL")
    bob = 0.015 * np.cos(2 * psi)
    neck = np.stack([ground[:, 0], np.full(n_frames, CAMERA_HEIGHT), ground[:, 1]], axis=1)
    neck = neck + (neck_height + bob)[:, None] * up

    pts = np.zeros((n_frames, N_JOINTS, 3))
    pts[:, J.Neck] = neck
    pts[:, J.Head] = neck + profile.head_height * up
    for side, sign, shift in (("R", 1.0, 0.0), ("L", -1.0, math.pi)):
        ph = psi + shift
        sh = neck + sign * L[f"Neck-{side}Shoulder"] * right
        hip = neck + sign * profile.hip_half_width * right - drop[side] * up
        thigh = profile.hip_swing * np.sin(ph)
        shank = thigh - profile.knee_flex * (0.5 + 0.5 * np.cos(ph - profile.knee_phase))
        knee = _limb(hip, thigh, L[f"{side}Hip-{side}Knee"], fwd, up)
        ankle = _limb(knee, shank, L[f"{side}Knee-{side}Ankle"], fwd, up)
        if walk_type == "diamond_stick" and side == "L":
            arm = 0.15 + 0.1 * profile.shoulder_swing * np.sin(ph + math.pi)
            fore = arm + 1.2
        else:
            arm = profile.shoulder_swing * np.sin(ph + math.pi)
            fore = arm + 0.2 + profile.elbow_flex * (0.5 + 0.5 * np.sin(ph + math.pi))
        elbow = _limb(sh, arm, L[f"{side}Shoulder-{side}Elbow"], fwd, up)
        wrist = _limb(elbow, fore, L[f"{side}Elbow-{side}Wrist"], fwd, up)
        for name, p in (("Shoulder", sh), ("Hip", hip), ("Knee", knee), ("Ankle", ankle),
                        ("Elbow", elbow), ("Wrist", wrist)):
            pts[:, J[side + name]] = p
    return WorldSkeletonSequence(profile.name, walk_type, pts, sequence_id,
                                 meta={"cadence_frames": profile.cadence_frames})


# ---------------------------------------------------------------------------
# Corruption
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorruptionConfig:
    """Lidar-style failure model.

    dropout_rate
        Long-run fraction of joint-frames that go missing (all 3 axes).
    burst_length
        Mean length of a missing run; runs are geometric. Values at or below
        ``1 / (1 - dropout_rate)`` give independent dropouts.
    jump_rate, jump_scale
        Per joint-frame probability of a one-frame displacement and its
        typical size in meters.
    noise_std
        Gaussian measurement noise on every coordinate, meters.
    """

    dropout_rate: float = 0.0
    burst_length: float = 1.0
    jump_rate: float = 0.0
    jump_scale: float = 0.5
    noise_std: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("dropout_rate", "jump_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.burst_length < 1.0:
            raise ValueError("burst_length must be >= 1")
        if self.jump_scale < 0 or self.noise_std < 0:
            raise ValueError("jump_scale and noise_std must be non-negative")


def _dropout_mask(rng: np.random.Generator, n_frames: int, n_joints: int,
                  rate: float, burst: float) -> np.ndarray:
    if rate <= 0.0:
        return np.zeros((n_frames, n_joints), dtype=bool)
    if rate >= 1.0:
        return np.ones((n_frames, n_joints), dtype=bool)
    stay = max(rate, 1.0 - 1.0 / burst)
    # Entry probability chosen so the stationary missing fraction equals ``rate``.
    enter = rate * (1.0 - stay) / (1.0 - rate)
    u = rng.random((n_frames, n_joints))
    mask = np.zeros((n_frames, n_joints), dtype=bool)
    state = u[0] < rate
    mask[0] = state
    for t in range(1, n_frames):
        state = np.where(state, u[t] < stay, u[t] < enter)
        mask[t] = state
    return mask


def corrupt_sequence(seq: WorldSkeletonSequence, cfg: CorruptionConfig
                     ) -> Tuple[WorldSkeletonSequence, np.ndarray]:
    """Inject noise, impulse jumps and missing runs.

    Returns the corrupted sequence and a boolean mask of shape
    ``(n_frames, 14, 3)`` marking every entry hit by a jump or a dropout.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    data = seq.data.copy()
    n = seq.n_frames
    mask = np.zeros(data.shape, dtype=bool)

    noise = rng.standard_normal(data.shape)
    if cfg.noise_std > 0:
        data = data + cfg.noise_std * noise

    jumps = rng.random((n, N_JOINTS)) < cfg.jump_rate
    direction = rng.standard_normal((n, N_JOINTS, 3))
    direction /= np.linalg.norm(direction, axis=2, keepdims=True)
    size = cfg.jump_scale * rng.uniform(0.5, 1.5, (n, N_JOINTS))
    if jumps.any():
        data[jumps] += (direction * size[..., None])[jumps]
        mask[jumps] = True

    drops = _dropout_mask(rng, n, N_JOINTS, cfg.dropout_rate, cfg.burst_length)
    data[drops] = 0.0
    mask[drops] = True
    # A corrupted value must never collide with the missing sentinel.
    data[(data == 0.0) & ~drops[..., None]] = 1e-9
    return seq.replace_data(data), mask


# ---------------------------------------------------------------------------
# Datasets and export
# ---------------------------------------------------------------------------

WALK_PLAN = ("toward", "diamond", "diamond_stick", "toward", "diamond")


@dataclass
class SyntheticSample:
    clean: WorldSkeletonSequence
    corrupted: WorldSkeletonSequence
    mask: np.ndarray
    profile: SubjectProfile


def make_dataset(n_subjects: int, seqs_per_subject: int, n_frames: int = 150, seed: int = 0,
                 corruption: Optional[CorruptionConfig] = None,
                 profiles: Optional[Sequence[SubjectProfile]] = None,
                 trial_variation: float = 0.05, body_sd: float = 0.04) -> List[SyntheticSample]:
    """Seeded multi-subject dataset; walk types cycle through :data:`WALK_PLAN`."""
    rng = np.random.default_rng(seed)
    corruption = corruption or CorruptionConfig()
    if profiles is None:
        profiles = [random_profile(rng, f"s{i + 1:02d}", body_sd=body_sd)
                    for i in range(n_subjects)]
    else:
        profiles = list(profiles)[:n_subjects]
    out = []
    for p in profiles:
        for k in range(seqs_per_subject):
            walk = WALK_PLAN[k % len(WALK_PLAN)]
            trial = perturb_profile(p, rng, trial_variation)
            start = float(rng.uniform(0, 12.0))
            sid = f"{p.name}_{walk}_{k:02d}"
            clean = generate_sequence(trial, n_frames, walk, start, sid)
            clean.subject_label = p.name
            ccfg = replace(corruption, rng_seed=int(rng.integers(2 ** 31)))
            bad, mask = corrupt_sequence(clean, ccfg)
            out.append(SyntheticSample(clean, bad, mask, p))
    return out


def to_raw_sequence(seq: WorldSkeletonSequence, cam: CameraParams,
                    centered: bool = True) -> RawSequence:
    """Back-project a world sequence to detector pixels + range.

    Joints with a missing coordinate or falling outside the image come out
    as missing.
    """
    frames = []
    for t in range(seq.n_frames):
        joints = {}
        for j in JOINTS:
            x, y, z = seq.data[t, j]
            if x == 0.0 or y == 0.0 or not z > 0.0:
                continue
            px = float(unproject_joint(x, cam.n_pixels_x, cam.aov_x_deg, z, centered))
            py = float(unproject_joint(y, cam.n_pixels_y, cam.aov_y_deg, z, centered))
            if 0.0 <= px <= cam.n_pixels_x and 0.0 <= py <= cam.n_pixels_y:
                joints[j] = JointObservation(px, py, float(z), True)
        frames.append(RawSkeletonFrame(int(seq.frame_indices[t]), joints))
    return RawSequence(seq.subject_label, seq.walk_type, frames, seq.sequence_id)
