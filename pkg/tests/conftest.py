from pathlib import Path

import pytest

from lidargait.data import CameraParams, save_sequence
from lidargait.synth import CorruptionConfig, make_dataset, to_raw_sequence


def write_dataset(directory: Path, n_subjects=4, seqs=5, frames=100, seed=0,
                  corruption=None, fmt="jsonl"):
    directory.mkdir(parents=True, exist_ok=True)
    corruption = corruption or CorruptionConfig(dropout_rate=0.2, jump_rate=0.05,
                                                noise_std=0.01, rng_seed=seed)
    samples = make_dataset(n_subjects, seqs, frames, seed=seed, corruption=corruption)
    cam = CameraParams()
    for s in samples:
        raw = to_raw_sequence(s.corrupted, cam)
        save_sequence(raw, directory / f"{s.corrupted.sequence_id}.{fmt}", fmt)
    return samples


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("walks")
    write_dataset(d)
    return d
