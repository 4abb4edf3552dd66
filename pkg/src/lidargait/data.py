"""Skeleton definition, input ingestion and sequence containers.

Raw input files carry 2D detector joints in pixels plus a per-joint range
value. Two layouts are accepted:

JSONL, one frame per line::

    {"frame": 0, "subject": "s01", "walk": "toward",
     "joints": {"Neck": [64.1, 30.2, 5.3], "LAnkle": null, ...}}

CSV, one frame per row, with columns ``frame, subject, walk`` followed by
``<Joint>_x, <Joint>_y, <Joint>_range`` for each of the 14 joints in
:data:`JOINTS` order. An empty cell marks the joint missing.

World sequences (projected or repaired) are stored as JSON documents, see
:func:`save_world` / :func:`load_world`.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

WORLD_FORMAT = "lidargait.world"
WORLD_VERSION = 1
AXES = ("x", "y", "z")


class JointId(enum.IntEnum):
    Head = 0
    Neck = 1
    RShoulder = 2
    LShoulder = 3
    RElbow = 4
    LElbow = 5
    RWrist = 6
    LWrist = 7
    RHip = 8
    LHip = 9
    RKnee = 10
    LKnee = 11
    RAnkle = 12
    LAnkle = 13


JOINTS: Tuple[JointId, ...] = tuple(JointId)
JOINT_NAMES: Tuple[str, ...] = tuple(j.name for j in JOINTS)
N_JOINTS = len(JOINTS)

# Joints that enter the feature vector (everything but the head).
FEATURE_JOINTS: Tuple[JointId, ...] = tuple(j for j in JOINTS if j is not JointId.Head)


class ValidationError(ValueError):
    """Input violates a structural contract (duplicates, shapes, lengths)."""


class ParseError(ValueError):
    """A record in an input file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class JointObservation:
    x_px: float
    y_px: float
    range_m: float
    valid: bool = True


MISSING = JointObservation(0.0, 0.0, 0.0, False)


@dataclass
class RawSkeletonFrame:
    """Detector output for one frame: pixel coordinates and range per joint."""

    frame_index: int
    joints: Dict[JointId, JointObservation]

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValidationError(f"negative frame index {self.frame_index}")
        self.joints = dict(self.joints)
        for j in JOINTS:
            obs = self.joints.get(j)
            if obs is None:
                self.joints[j] = MISSING
            elif obs.valid and (obs.x_px < 0 or obs.y_px < 0 or not obs.range_m > 0):
                raise ValidationError(
                    f"frame {self.frame_index}: invalid observation for {j.name}: {obs}"
                )

    def is_valid(self, joint: JointId) -> bool:
        return self.joints[joint].valid


@dataclass
class RawSequence:
    """Frames of one recording plus the labels carried in the file."""

    subject: str
    walk: str
    frames: List[RawSkeletonFrame]
    sequence_id: str = ""

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class CameraParams:
    n_pixels_x: int = 128
    n_pixels_y: int = 128
    aov_x_deg: float = 45.0
    aov_y_deg: float = 45.0

    def __post_init__(self):
        if self.n_pixels_x <= 0 or self.n_pixels_y <= 0:
            raise ValidationError("pixel counts must be positive")
        for a in (self.aov_x_deg, self.aov_y_deg):
            if not 0.0 < a < 180.0:
                raise ValidationError(f"angle of view must be in (0, 180), got {a}")


@dataclass
class JointTrack:
    """One joint's location along one world axis over time; 0.0 marks missing."""

    values: np.ndarray
    axis: str = "x"
    joint: JointId = JointId.Neck

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValidationError("track values must be one-dimensional")
        if self.axis not in AXES:
            raise ValidationError(f"unknown axis {self.axis!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("track values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def missing(self) -> np.ndarray:
        return self.values == 0.0


@dataclass
class WorldSkeletonSequence:
    """3D joint trajectories of one walking sequence.

    ``data`` has shape ``(n_frames, 14, 3)`` indexed by frame, :class:`JointId`
    and axis. Missing entries hold the 0.0 sentinel.
    """

    subject_label: str
    walk_type: str
    data: np.ndarray
    sequence_id: str = ""
    frame_indices: Optional[np.ndarray] = None
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 3 or self.data.shape[1:] != (N_JOINTS, 3):
            raise ValidationError(f"expected data of shape (F, {N_JOINTS}, 3), got {self.data.shape}")
        if self.frame_indices is None:
            self.frame_indices = np.arange(self.data.shape[0])
        else:
            self.frame_indices = np.asarray(self.frame_indices, dtype=int)
            if self.frame_indices.shape != (self.data.shape[0],):
                raise ValidationError("frame_indices length does not match data")

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    def track(self, joint: JointId, axis: str) -> JointTrack:
        return JointTrack(self.data[:, joint, AXES.index(axis)].copy(), axis, JointId(joint))

    def tracks(self) -> List[JointTrack]:
        return [self.track(j, a) for j in JOINTS for a in AXES]

    def replace_data(self, data: np.ndarray, frame_indices=None) -> "WorldSkeletonSequence":
        """Same labels and metadata around new coordinates."""
        if frame_indices is None:
            frame_indices = self.frame_indices.copy()
        return WorldSkeletonSequence(
            self.subject_label, self.walk_type, data, self.sequence_id,
            frame_indices, dict(self.meta),
        )

    def missing_fraction(self) -> float:
        if self.data.size == 0:
            return 0.0
        return float(np.mean(self.data == 0.0))


# ---------------------------------------------------------------------------
# Raw input readers / writers
# ---------------------------------------------------------------------------

def _parse_observation(name: str, value, line: int) -> JointObservation:
    if value is None:
        return MISSING
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ParseError(f"joint {name} must be [x_px, y_px, range_m] or null", line)
    try:
        x, y, r = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ParseError(f"joint {name} has non-numeric entries", line) from None
    if not all(math.isfinite(v) for v in (x, y, r)):
        raise ParseError(f"joint {name} has non-finite entries", line)
    if x < 0 or y < 0 or r <= 0:
        # Detectors report out-of-image or zero-range joints this way.
        return MISSING
    return JointObservation(x, y, r, True)


def _frame_from_joint_map(frame_index: int, joints: dict, line: int) -> RawSkeletonFrame:
    parsed: Dict[JointId, JointObservation] = {}
    for name, value in joints.items():
        try:
            jid = JointId[name]
        except KeyError:
            logger.warning("line %d: ignoring unknown joint %r", line, name)
            continue
        parsed[jid] = _parse_observation(name, value, line)
    return RawSkeletonFrame(frame_index, parsed)


def _finish(frames: List[Tuple[int, RawSkeletonFrame]], subject, walk, path: Path) -> RawSequence:
    seen: Dict[int, int] = {}
    for line, fr in frames:
        if fr.frame_index in seen:
            raise ValidationError(
                f"duplicate frame index {fr.frame_index} (lines {seen[fr.frame_index]} and {line})"
            )
        seen[fr.frame_index] = line
    ordered = sorted((fr for _, fr in frames), key=lambda f: f.frame_index)
    return RawSequence(subject or "", walk or "", ordered, sequence_id=path.stem)


def _read_jsonl(path: Path) -> RawSequence:
    frames = []
    subject = walk = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", line_no) from None
            if not isinstance(rec, dict):
                raise ParseError("record is not an object", line_no)
            for key in ("frame", "subject", "walk", "joints"):
                if key not in rec:
                    raise ParseError(f"missing key {key!r}", line_no)
            if not isinstance(rec["frame"], int) or isinstance(rec["frame"], bool) or rec["frame"] < 0:
                raise ParseError("frame must be a non-negative integer", line_no)
            if not isinstance(rec["joints"], dict):
                raise ParseError("joints must be an object", line_no)
            if subject is None:
                subject, walk = str(rec["subject"]), str(rec["walk"])
            elif (str(rec["subject"]), str(rec["walk"])) != (subject, walk):
                raise ParseError("subject/walk label changes within one sequence", line_no)
            frames.append((line_no, _frame_from_joint_map(rec["frame"], rec["joints"], line_no)))
    return _finish(frames, subject, walk, path)


def csv_header() -> List[str]:
    cols = ["frame", "subject", "walk"]
    for name in JOINT_NAMES:
        cols += [f"{name}_x", f"{name}_y", f"{name}_range"]
    return cols


def _read_csv(path: Path) -> RawSequence:
    frames = []
    subject = walk = None
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty CSV file", 1) from None
        for col in ("frame", "subject", "walk"):
            if col not in header:
                raise ParseError(f"missing column {col!r}", 1)
        idx = {c: i for i, c in enumerate(header)}
        known = set(csv_header())
        extra = [c for c in header if c not in known]
        if extra:
            logger.warning("%s: ignoring unknown columns %s", path, extra)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} cells, got {len(row)}", line_no)
            try:
                frame_index = int(row[idx["frame"]])
            except ValueError:
                raise ParseError("frame must be an integer", line_no) from None
            if frame_index < 0:
                raise ParseError("frame must be non-negative", line_no)
            if subject is None:
                subject, walk = row[idx["subject"]], row[idx["walk"]]
            joints = {}
            for name in JOINT_NAMES:
                cells = [row[idx[c]] if c in idx else "" for c in
                         (f"{name}_x", f"{name}_y", f"{name}_range")]
                joints[name] = None if any(c.strip() == "" for c in cells) else cells
            frames.append((line_no, _frame_from_joint_map(frame_index, joints, line_no)))
    return _finish(frames, subject, walk, path)


def load_sequence(path, format: Optional[str] = None) -> RawSequence:
    """Read a raw detector sequence from a JSONL or CSV file.

    The format is inferred from the extension when not given. Frames come
    back sorted by index; joints that are absent, null or empty are marked
    missing.
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format == "jsonl":
        return _read_jsonl(path)
    if format == "csv":
        return _read_csv(path)
    raise ValueError(f"unknown format {format!r}")


def _obs_list(obs: JointObservation):
    return [obs.x_px, obs.y_px, obs.range_m] if obs.valid else None


def save_sequence(seq: RawSequence, path, format: Optional[str] = None) -> None:
    """Write a raw sequence; inverse of :func:`load_sequence`."""
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for fr in seq.frames:
                rec = {
                    "frame": fr.frame_index,
                    "subject": seq.subject,
                    "walk": seq.walk,
                    "joints": {j.name: _obs_list(fr.joints[j]) for j in JOINTS},
                }
                fh.write(json.dumps(rec) + "\n")
    elif format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(csv_header())
            for fr in seq.frames:
                row = [str(fr.frame_index), seq.subject, seq.walk]
                for j in JOINTS:
                    obs = fr.joints[j]
                    row += [repr(obs.x_px), repr(obs.y_px), repr(obs.range_m)] if obs.valid else ["", "", ""]
                writer.writerow(row)
    else:
        raise ValueError(f"unknown format {format!r}")


# ---------------------------------------------------------------------------
# Tracks
# ---------------------------------------------------------------------------

def tracks_from_frames(frames: Sequence[RawSkeletonFrame], world_points) -> List[JointTrack]:
    """Split per-frame world points into the 42 joint/axis tracks.

    ``world_points`` is indexable as ``[frame][joint] -> (x, y, z)`` (an array
    of shape ``(F, 14, 3)`` works). Joints that are invalid in the raw frame
    become the 0.0 sentinel regardless of the world value supplied.
    """
    if len(world_points) != len(frames):
        raise ValidationError(
            f"{len(frames)} frames but {len(world_points)} world point sets"
        )
    n = len(frames)
    data = np.zeros((n, N_JOINTS, 3))
    for t, fr in enumerate(frames):
        for j in JOINTS:
            if fr.joints[j].valid:
                data[t, j] = world_points[t][j]
    return [JointTrack(data[:, j, a].copy(), AXES[a], j) for j in JOINTS for a in range(3)]


def sequence_from_tracks(tracks: Iterable[JointTrack], subject: str, walk: str,
                         sequence_id: str = "", frame_indices=None) -> WorldSkeletonSequence:
    tracks = list(tracks)
    n = len(tracks[0]) if tracks else 0
    data = np.zeros((n, N_JOINTS, 3))
    for tr in tracks:
        if len(tr) != n:
            raise ValidationError("tracks differ in length")
        data[:, tr.joint, AXES.index(tr.axis)] = tr.values
    return WorldSkeletonSequence(subject, walk, data, sequence_id, frame_indices)


# ---------------------------------------------------------------------------
# World sequence artifacts
# ---------------------------------------------------------------------------

def world_to_dict(seq: WorldSkeletonSequence) -> dict:
    return {
        "format": WORLD_FORMAT,
        "version": WORLD_VERSION,
        "sequence_id": seq.sequence_id,
        "subject": seq.subject_label,
        "walk": seq.walk_type,
        "n_frames": seq.n_frames,
        "frames": [int(i) for i in seq.frame_indices],
        "meta": seq.meta,
        "tracks": {
            j.name: {a: seq.data[:, j, k].tolist() for k, a in enumerate(AXES)}
            for j in JOINTS
        },
    }


def world_from_dict(doc: dict) -> WorldSkeletonSequence:
    if doc.get("format") != WORLD_FORMAT:
        raise ParseError(f"not a {WORLD_FORMAT} document")
    if doc.get("version") != WORLD_VERSION:
        raise ParseError(f"unsupported version {doc.get('version')}")
    n = int(doc["n_frames"])
    data = np.zeros((n, N_JOINTS, 3))
    for j in JOINTS:
        for k, a in enumerate(AXES):
            vals = doc["tracks"][j.name][a]
            if len(vals) != n:
                raise ValidationError(f"track {j.name}.{a} has {len(vals)} values, expected {n}")
            data[:, j, k] = vals
    return WorldSkeletonSequence(
        doc["subject"], doc["walk"], data, doc.get("sequence_id", ""),
        np.asarray(doc["frames"], dtype=int), dict(doc.get("meta", {})),
    )


def save_world(seq: WorldSkeletonSequence, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(world_to_dict(seq), fh, sort_keys=True)
        fh.write("\n")


def load_world(path) -> WorldSkeletonSequence:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})", exc.lineno) from None
    return world_from_dict(doc)
