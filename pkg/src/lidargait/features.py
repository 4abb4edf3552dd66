"""Per-frame inter-joint vector features.

Each frame yields 12 three-dimensional vectors between connected joints,
``source - target`` component-wise, flattened to 36 values in the order of
:data:`FEATURE_PAIRS` (x, y, z per pair).
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from .data import JOINTS, JointId, WorldSkeletonSequence

J = JointId

# Row-major over the 3x4 pair table; frozen, serialized features depend on it.
FEATURE_PAIRS: Tuple[Tuple[JointId, JointId], ...] = (
    (J.Neck, J.RShoulder), (J.Neck, J.LShoulder), (J.Neck, J.RHip), (J.Neck, J.LHip),
    (J.RShoulder, J.RElbow), (J.LShoulder, J.LElbow), (J.RHip, J.RKnee), (J.LHip, J.LKnee),
    (J.RElbow, J.RWrist), (J.LElbow, J.LWrist), (J.RKnee, J.RAnkle), (J.LKnee, J.LAnkle),
)
N_FEATURES = 3 * len(FEATURE_PAIRS)


def feature_names() -> List[str]:
    return [f"{a.name}-{b.name}.{ax}" for a, b in FEATURE_PAIRS for ax in "xyz"]


class MissingJointError(ValueError):
    pass


def joint_vector(points, i: JointId, j: JointId) -> np.ndarray:
    """``points[i] - points[j]`` as a 3-vector."""
    return np.asarray(points[i], dtype=float) - np.asarray(points[j], dtype=float)


def frame_feature(points, pairs: Sequence[Tuple[JointId, JointId]] = FEATURE_PAIRS) -> np.ndarray:
    """36-vector of inter-joint differences for one frame.

    ``points`` maps joint index to ``(x, y, z)``; an array of shape ``(14, 3)``
    is the usual input. ``None`` or a point with a zero coordinate raises
    :class:`MissingJointError` since repair is expected to run first.
    """
    out = np.empty(3 * len(pairs))
    for k, (a, b) in enumerate(pairs):
        pa, pb = points[a], points[b]
        for joint, p in ((a, pa), (b, pb)):
            if p is None or not np.all(p):
                raise MissingJointError(f"joint {joint.name} missing")
        out[3 * k: 3 * k + 3] = joint_vector(points, a, b)
    return out


def sequence_features(seq: WorldSkeletonSequence, check: bool = True) -> np.ndarray:
    """``(n_frames, 36)`` feature matrix for a whole sequence.

    With ``check=False`` missing joints are not rejected, which is what the
    unrepaired baseline needs: the sentinel zeros then flow into the
    features unchanged.
    """
    data = seq.data
    if check:
        used = sorted({int(j) for p in FEATURE_PAIRS for j in p})
        missing = np.any(data[:, used, :] == 0.0, axis=2)
        if missing.any():
            t, k = np.argwhere(missing)[0]
            raise MissingJointError(
                f"{seq.sequence_id}: joint {JOINTS[used[k]].name} missing at frame {t}"
            )
    src = [a for a, _ in FEATURE_PAIRS]
    dst = [b for _, b in FEATURE_PAIRS]
    return (data[:, src, :] - data[:, dst, :]).reshape(data.shape[0], -1)


# ---------------------------------------------------------------------------
# Alternative feature sets used by the baseline comparison
# ---------------------------------------------------------------------------

_BODY = [j for j in JOINTS if j is not J.Head]


def distance_features(seq: WorldSkeletonSequence) -> np.ndarray:
    """Euclidean distances between every pair of the 13 body joints (78 values)."""
    data = seq.data[:, _BODY, :]
    iu = np.triu_indices(len(_BODY), k=1)
    diff = data[:, iu[0], :] - data[:, iu[1], :]
    return np.linalg.norm(diff, axis=2)


def reference_features(seq: WorldSkeletonSequence, reference: JointId = J.Neck) -> np.ndarray:
    """Vectors from one reference joint to each other body joint (36 values)."""
    others = [j for j in _BODY if j is not reference]
    data = seq.data
    return (data[:, [reference], :] - data[:, others, :]).reshape(data.shape[0], -1)


FEATURE_SETS = {
    "vectors": lambda seq: sequence_features(seq, check=False),
    "distances": distance_features,
    "reference": reference_features,
}
