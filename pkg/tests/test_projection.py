import math

import numpy as np
import pytest

from lidargait.data import CameraParams, JOINTS, JointId, JointObservation, RawSequence, RawSkeletonFrame
from lidargait.projection import (
    ProjectionDomainError, project_frame, project_joint, project_sequence, unproject_joint,
)


def test_principal_point_maps_to_zero():
    for r in (0.5, 5.0, 40.0):
        assert project_joint(64.0, 128, 45.0, r) == 0.0


def test_worked_example():
    # 64 px right of centre on a 128 px, 90 degree axis at 10 m
    assert abs(project_joint(128.0, 128, 90.0, 10.0) - 10.0) <= 1e-12
    assert abs(project_joint(64.0, 128, 90.0, 10.0, centered=False) - 10.0) <= 1e-12


def test_range_doubling():
    a = project_joint(100.0, 128, 45.0, 3.0)
    assert project_joint(100.0, 128, 45.0, 6.0) == pytest.approx(2 * a, rel=1e-15)


def test_matches_formula():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(8, 1024))
        aov = rng.uniform(1, 179)
        lp = rng.uniform(0, n)
        r = rng.uniform(0.1, 50)
        ref = 2.0 / n * math.tan(math.radians(aov) / 2) * (lp - n / 2) * r
        assert project_joint(lp, n, aov, r) == pytest.approx(ref, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("args", [(10, 0, 45, 1), (10, 128, 0, 1), (10, 128, 180, 1),
                                  (10, 128, 45, 0), (10, 128, 45, -2)])
def test_domain_errors(args):
    with pytest.raises(ProjectionDomainError):
        project_joint(*args)


def test_unproject_inverts():
    lp = np.linspace(0, 128, 33)
    w = project_joint(lp, 128, 45.0, 7.0)
    np.testing.assert_allclose(unproject_joint(w, 128, 45.0, 7.0), lp, atol=1e-10)


def test_frame_all_missing():
    assert project_frame(RawSkeletonFrame(0, {}), CameraParams()) == [None] * 14


def test_frame_centre_joint():
    fr = RawSkeletonFrame(0, {JointId.Neck: JointObservation(64.0, 64.0, 5.0)})
    pts = project_frame(fr, CameraParams())
    assert pts[JointId.Neck] == (0.0, 0.0, 5.0)
    assert all(p is None for j, p in zip(JOINTS, pts) if j is not JointId.Neck)


def test_mirror_negates_x():
    cam = CameraParams()
    a = project_frame(RawSkeletonFrame(0, {JointId.Neck: JointObservation(64 + 17.5, 30, 4.0)}), cam)
    b = project_frame(RawSkeletonFrame(0, {JointId.Neck: JointObservation(64 - 17.5, 30, 4.0)}), cam)
    assert a[1][0] == -b[1][0] and a[1][1:] == b[1][1:]


def test_frame_commutes_with_joint_projection():
    rng = np.random.default_rng(5)
    cam = CameraParams(160, 120, 60.0, 45.0)
    for _ in range(50):
        joints = {j: JointObservation(rng.uniform(0, 160), rng.uniform(0, 120), rng.uniform(1, 9))
                  for j in JOINTS if rng.random() < 0.8}
        fr = RawSkeletonFrame(0, joints)
        pts = project_frame(fr, cam)
        for j in JOINTS:
            if j not in joints:
                assert pts[j] is None
                continue
            o = joints[j]
            assert pts[j] == (project_joint(o.x_px, 160, 60.0, o.range_m),
                              project_joint(o.y_px, 120, 45.0, o.range_m), o.range_m)


def test_sequence_projection_uses_sentinel():
    frames = [RawSkeletonFrame(0, {JointId.Neck: JointObservation(10, 20, 3.0)}),
              RawSkeletonFrame(2, {})]
    seq = project_sequence(RawSequence("s", "w", frames, "id"), CameraParams())
    assert seq.data.shape == (2, 14, 3)
    assert np.all(seq.data[1] == 0.0)
    assert np.all(seq.data[0, JointId.Head] == 0.0)
    assert seq.data[0, JointId.Neck, 2] == 3.0
    assert seq.frame_indices.tolist() == [0, 2]


def test_camera_validation():
    with pytest.raises(ValueError):
        CameraParams(aov_x_deg=180.0)
    with pytest.raises(ValueError):
        CameraParams(n_pixels_x=0)
