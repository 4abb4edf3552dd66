import numpy as np
import pytest
from scipy.stats import binom

from lidargait.data import CameraParams, JointId
from lidargait.features import FEATURE_PAIRS, sequence_features
from lidargait.gait_cycle import ankle_distance
from lidargait.projection import project_sequence
from lidargait.synth import (
    DEFAULT_LIMBS, WALK_TYPES, CorruptionConfig, ProfileError, SubjectProfile, corrupt_sequence,
    generate_sequence, make_dataset, perturb_profile, random_profile, to_raw_sequence,
)


def test_zero_amplitudes_constant_ankle_distance():
    p = SubjectProfile(hip_swing=0.0, knee_flex=0.0, shoulder_swing=0.0, elbow_flex=0.0)
    for walk in WALK_TYPES:
        d = ankle_distance(generate_sequence(p, 60, walk))
        assert np.ptp(d) < 1e-12


@pytest.mark.parametrize("walk", WALK_TYPES)
def test_limb_lengths_respected(walk):
    p = random_profile(np.random.default_rng(0), "a")
    f = sequence_features(generate_sequence(p, 80, walk, start=2.0)).reshape(80, 12, 3)
    for k, (a, b) in enumerate(FEATURE_PAIRS):
        seg = f"{a.name}-{b.name}"
        if seg.startswith("Neck-") and seg.endswith("Hip"):
            continue  # the torso segment is bent by the hip offset
        np.testing.assert_allclose(np.linalg.norm(f[:, k], axis=1), p.limb_lengths[seg], rtol=1e-12)


def test_longer_limb_shows_in_features():
    a = SubjectProfile("a")
    limbs = dict(DEFAULT_LIMBS)
    limbs["RKnee-RAnkle"] *= 1.1
    b = SubjectProfile("b", limbs)
    fa = sequence_features(generate_sequence(a, 40, "toward")).reshape(40, 12, 3)
    fb = sequence_features(generate_sequence(b, 40, "toward")).reshape(40, 12, 3)
    k = FEATURE_PAIRS.index((JointId.RKnee, JointId.RAnkle))
    gap = 0.1 * DEFAULT_LIMBS["RKnee-RAnkle"]
    assert np.all(np.linalg.norm(fb[:, k] - fa[:, k], axis=1) >= gap - 1e-12)


def test_walk_types_differ_and_stick_fixes_arm():
    p = SubjectProfile()
    d = generate_sequence(p, 60, "diamond")
    s = generate_sequence(p, 60, "diamond_stick")
    np.testing.assert_array_equal(d.data[:, JointId.RWrist], s.data[:, JointId.RWrist])
    assert not np.allclose(d.data[:, JointId.LWrist], s.data[:, JointId.LWrist])
    t = generate_sequence(p, 60, "toward")
    assert not np.allclose(t.data, d.data)


def test_walker_in_front_of_camera():
    for walk in WALK_TYPES:
        seq = generate_sequence(SubjectProfile(), 300, walk)
        assert seq.data[..., 2].min() > 3.0
        assert seq.data[:, JointId.Head, 1].max() < seq.data[:, JointId.LAnkle, 1].min()


def test_profile_validation():
    with pytest.raises(ProfileError):
        SubjectProfile(cadence_frames=3)
    with pytest.raises(ProfileError):
        SubjectProfile(limb_lengths={**DEFAULT_LIMBS, "RHip-RKnee": 0.0})
    with pytest.raises(ProfileError):
        SubjectProfile(limb_lengths={"RHip-RKnee": 0.4})
    with pytest.raises(ProfileError):
        generate_sequence(SubjectProfile(cadence_frames=30), 20)
    with pytest.raises(ProfileError):
        generate_sequence(SubjectProfile(), 40, "sideways")


def test_profile_from_dict():
    p = SubjectProfile.from_dict({"name": "x", "cadence_frames": 18,
                                  "limb_lengths": {"RHip-RKnee": 0.5}})
    assert p.cadence_frames == 18 and p.limb_lengths["RHip-RKnee"] == 0.5
    assert p.limb_lengths["LHip-LKnee"] == DEFAULT_LIMBS["LHip-LKnee"]


def test_perturb_keeps_body():
    p = random_profile(np.random.default_rng(1))
    q = perturb_profile(p, np.random.default_rng(2))
    assert q.limb_lengths == p.limb_lengths and q.cadence_frames == p.cadence_frames
    assert q.hip_swing != p.hip_swing


def test_corruption_identity():
    seq = generate_sequence(SubjectProfile(), 50)
    out, mask = corrupt_sequence(seq, CorruptionConfig())
    np.testing.assert_array_equal(out.data, seq.data)
    assert not mask.any()


def test_corruption_deterministic():
    seq = generate_sequence(SubjectProfile(), 50)
    cfg = CorruptionConfig(dropout_rate=0.2, burst_length=3, jump_rate=0.1, noise_std=0.01, rng_seed=9)
    a, ma = corrupt_sequence(seq, cfg)
    b, mb = corrupt_sequence(seq, cfg)
    assert a.data.tobytes() == b.data.tobytes()
    np.testing.assert_array_equal(ma, mb)


def test_dropout_count_binomial():
    lo, hi = binom.interval(0.99, 1000, 0.2)
    seq = generate_sequence(SubjectProfile(), 72)
    for seed in range(5):
        out, _ = corrupt_sequence(seq, CorruptionConfig(dropout_rate=0.2, rng_seed=seed))
        missing = np.all(out.data == 0.0, axis=2).ravel()[:1000]
        assert lo <= missing.sum() <= hi


def test_burst_length():
    seq = generate_sequence(SubjectProfile(), 2000)
    out, _ = corrupt_sequence(seq, CorruptionConfig(dropout_rate=0.2, burst_length=5, rng_seed=1))
    miss = np.all(out.data == 0.0, axis=2)
    assert miss.mean() == pytest.approx(0.2, abs=0.02)
    runs = []
    for j in range(14):
        col = np.concatenate([[0], miss[:, j].astype(int), [0]])
        d = np.diff(col)
        runs += list(np.flatnonzero(d == -1) - np.flatnonzero(d == 1))
    assert np.mean(runs) == pytest.approx(5.0, rel=0.1)


def test_mask_marks_every_change():
    seq = generate_sequence(SubjectProfile(), 100)
    out, mask = corrupt_sequence(seq, CorruptionConfig(dropout_rate=0.1, jump_rate=0.05, rng_seed=4))
    changed = out.data != seq.data
    assert np.all(mask[changed])
    assert mask.any()


def test_corruption_config_validation():
    with pytest.raises(ValueError):
        CorruptionConfig(dropout_rate=1.5)
    with pytest.raises(ValueError):
        CorruptionConfig(burst_length=0.5)


def test_dataset_layout_and_determinism():
    a = make_dataset(3, 5, 60, seed=2)
    b = make_dataset(3, 5, 60, seed=2)
    assert len(a) == 15
    assert [s.corrupted.sequence_id for s in a][:5] == [
        "s01_toward_00", "s01_diamond_01", "s01_diamond_stick_02", "s01_toward_03", "s01_diamond_04"]
    for x, y in zip(a, b):
        assert x.corrupted.data.tobytes() == y.corrupted.data.tobytes()
    assert {s.clean.subject_label for s in a} == {"s01", "s02", "s03"}


def test_raw_round_trip():
    seq = generate_sequence(random_profile(np.random.default_rng(3)), 40, "diamond")
    bad, _ = corrupt_sequence(seq, CorruptionConfig(dropout_rate=0.2, rng_seed=0))
    cam = CameraParams()
    back = project_sequence(to_raw_sequence(bad, cam), cam)
    np.testing.assert_allclose(back.data, bad.data, rtol=0, atol=1e-12)
