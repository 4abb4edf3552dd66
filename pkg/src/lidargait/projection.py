"""Pixel + range to camera-frame world coordinates.

The lateral world coordinate along one image direction is::

    (2 / n_pixels) * tan(aov / 2) * lp * range

with ``lp`` the pixel coordinate measured from the image centre (default) or
from the image corner (``centered=False``). Depth is the range itself.
"""

from __future__ import annotations

import math

import numpy as np

from .data import JOINTS, N_JOINTS, CameraParams, RawSkeletonFrame, RawSequence, WorldSkeletonSequence


class ProjectionDomainError(ValueError):
    pass


def project_joint(lp, n_pixels: int, aov_deg: float, range_m, centered: bool = True):
    """World coordinate (meters) of pixel coordinate ``lp`` at ``range_m``.

    Works elementwise on arrays. With ``centered=True`` the pixel coordinate
    is shifted by ``n_pixels / 2`` first so the optical axis maps to 0.
    """
    if n_pixels <= 0:
        raise ProjectionDomainError(f"n_pixels must be positive, got {n_pixels}")
    if not 0.0 < aov_deg < 180.0:
        raise ProjectionDomainError(f"angle of view must be in (0, 180), got {aov_deg}")
    r = np.asarray(range_m, dtype=float)
    if np.any(~(r > 0)):
        raise ProjectionDomainError("range must be positive")
    lp = np.asarray(lp, dtype=float)
    if centered:
        lp = lp - n_pixels / 2.0
    out = (2.0 / n_pixels) * math.tan(math.radians(aov_deg) / 2.0) * lp * r
    return out if out.ndim else float(out)


def unproject_joint(world, n_pixels: int, aov_deg: float, range_m, centered: bool = True):
    """Inverse of :func:`project_joint` for a known range."""
    scale = (2.0 / n_pixels) * math.tan(math.radians(aov_deg) / 2.0)
    lp = np.asarray(world, dtype=float) / (scale * np.asarray(range_m, dtype=float))
    if centered:
        lp = lp + n_pixels / 2.0
    return lp if lp.ndim else float(lp)


def project_frame(frame: RawSkeletonFrame, cam: CameraParams, centered: bool = True):
    """Per-joint ``(x, y, z)`` world points; missing joints map to ``None``."""
    out = []
    for j in JOINTS:
        obs = frame.joints[j]
        if not obs.valid:
            out.append(None)
            continue
        x = project_joint(obs.x_px, cam.n_pixels_x, cam.aov_x_deg, obs.range_m, centered)
        y = project_joint(obs.y_px, cam.n_pixels_y, cam.aov_y_deg, obs.range_m, centered)
        out.append((x, y, obs.range_m))
    return out


def project_sequence(raw: RawSequence, cam: CameraParams, centered: bool = True) -> WorldSkeletonSequence:
    """Project every frame; missing joints carry the 0.0 sentinel on all axes.

    A joint seen exactly on the centre column or row also projects to 0.0 on
    that axis and is then indistinguishable from a missing value downstream.
    """
    n = len(raw.frames)
    px = np.zeros((n, N_JOINTS))
    py = np.zeros((n, N_JOINTS))
    rng = np.ones((n, N_JOINTS))
    valid = np.zeros((n, N_JOINTS), dtype=bool)
    for t, fr in enumerate(raw.frames):
        for j in JOINTS:
            obs = fr.joints[j]
            if obs.valid:
                px[t, j], py[t, j], rng[t, j] = obs.x_px, obs.y_px, obs.range_m
                valid[t, j] = True
    data = np.zeros((n, N_JOINTS, 3))
    data[..., 0] = project_joint(px, cam.n_pixels_x, cam.aov_x_deg, rng, centered)
    data[..., 1] = project_joint(py, cam.n_pixels_y, cam.aov_y_deg, rng, centered)
    data[..., 2] = rng
    data[~valid] = 0.0
    frames = np.array([fr.frame_index for fr in raw.frames], dtype=int)
    return WorldSkeletonSequence(raw.subject, raw.walk, data, raw.sequence_id, frames)
