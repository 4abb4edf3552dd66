"""End-to-end pipeline: ingest, project, repair, features, cycle/concat, train-eval.

Every stage writes a self-describing artifact into the output directory and
can be re-run from the previous stage's artifact:

    world/<id>.json      projected sequences
    repaired/<id>.json   repaired sequences (absent with ``skip_repair``)
    repair_report.json
    features.csv         per-frame features
    cycles.json          per-sequence cycle estimates
    report.json          EvalReport
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .classify import EvalReport, LabeledDataset, SplitSpec, evaluate_split, split_sequences
from .data import CameraParams, WorldSkeletonSequence, load_sequence, save_world
from .features import FEATURE_SETS, N_FEATURES, feature_names
from .gait_cycle import (
    CycleEstimate, ankle_distance, estimate_cycle, resampled_window_matrix, vote, window_matrix,
)
from .projection import project_sequence
from .repair import RepairConfig, RepairReport, repair_sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

FEATURES_FORMAT = "lidargait.features"
CYCLES_FORMAT = "lidargait.cycles"


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@dataclass(frozen=True)
class CycleOptions:
    min_prominence: float = 0.1
    trim: str = "iqr"
    iqr_k: float = 1.5
    percentiles: Tuple[float, float] = (10.0, 90.0)
    fallback_cycle: int = 20
    mode: str = "global"
    window: Optional[int] = None
    stride: int = 1

    def __post_init__(self):
        if self.mode not in ("global", "per-seq", "fixed"):
            raise ValueError(f"unknown cycle mode {self.mode!r}")
        if self.mode == "fixed" and not self.window:
            raise ValueError("cycle mode 'fixed' needs a window length")


@dataclass(frozen=True)
class ClassifierOptions:
    k: int = 7
    metric: str = "manhattan"
    split: str = "cross-walk"
    test_fraction: float = 0.3
    seed: int = 0
    average: str = "macro"
    classes: str = "present"
    feature_set: str = "vectors"

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.split, self.test_fraction, self.seed)


@dataclass(frozen=True)
class PipelineConfig:
    camera: CameraParams = CameraParams()
    centered: bool = True
    repair: RepairConfig = RepairConfig()
    skip_repair: bool = False
    cycle: CycleOptions = CycleOptions()
    classifier: ClassifierOptions = ClassifierOptions()
    jobs: int = 1
    input_dir: Optional[str] = None
    output_dir: Optional[str] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cycle"]["percentiles"] = list(d["cycle"]["percentiles"])
        return d


def _build(cls, section: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
    if "percentiles" in section:
        section = dict(section, percentiles=tuple(section["percentiles"]))
    return cls(**section)


def config_from_dict(doc: dict) -> PipelineConfig:
    doc = dict(doc)
    kw = {}
    sections = {"camera": CameraParams, "repair": RepairConfig,
                "cycle": CycleOptions, "classifier": ClassifierOptions}
    for key, cls in sections.items():
        if key in doc:
            kw[key] = _build(cls, doc.pop(key), key)
    doc.update(doc.pop("pipeline", {}))
    top ={f.name for f in fields(PipelineConfig)} - set(sections)
    unknown = set(doc) - top
    if unknown:
        raise ValueError(f"unknown top-level config keys: {sorted(unknown)}")
    kw.update(doc)
    return PipelineConfig(**kw)


def load_config(path) -> PipelineConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))


# ---------------------------------------------------------------------------
# Stage helpers
# ---------------------------------------------------------------------------

def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def input_files(directory) -> List[Path]:
    d = Path(directory)
    return sorted(p for p in d.iterdir() if p.suffix.lower() in (".jsonl", ".csv"))


def ingest(paths: Sequence[Path], cfg: PipelineConfig) -> List[WorldSkeletonSequence]:
    def one(p):
        raw = load_sequence(p)
        if not raw.frames:
            raise ValueError(f"{p}: no frames")
        return project_sequence(raw, cfg.camera, cfg.centered)

    seqs = _map(one, paths, cfg.jobs)
    ids = [s.sequence_id for s in seqs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate sequence ids among input files")
    return seqs


def repair_all(seqs: Sequence[WorldSkeletonSequence], cfg: RepairConfig, jobs: int = 1
               ) -> Tuple[List[WorldSkeletonSequence], Dict[str, RepairReport]]:
    results = _map(lambda s: repair_sequence(s, cfg), seqs, jobs)
    return [r[0] for r in results], {s.sequence_id: r[1] for s, r in zip(seqs, results)}


def cycle_estimates(seqs: Sequence[WorldSkeletonSequence], opts: CycleOptions) -> Dict[str, CycleEstimate]:
    out = {}
    for s in seqs:
        dist = ankle_distance(s)
        if len(dist) < 3:
            out[s.sequence_id] = CycleEstimate(opts.fallback_cycle, fallback=True,
                                               warnings=["sequence shorter than 3 frames"])
            continue
        out[s.sequence_id] = estimate_cycle(dist, opts.min_prominence, opts.trim,
                                            opts.fallback_cycle, opts.iqr_k, opts.percentiles)
    return out


@dataclass
class FrameTable:
    """Per-frame features of many sequences, keyed by sequence id."""

    subjects: Dict[str, str] = field(default_factory=dict)
    walks: Dict[str, str] = field(default_factory=dict)
    frames: Dict[str, np.ndarray] = field(default_factory=dict)
    features: Dict[str, np.ndarray] = field(default_factory=dict)
    feature_set: str = "vectors"

    def ids(self) -> List[str]:
        return sorted(self.features)


def frame_table(seqs: Sequence[WorldSkeletonSequence], feature_set: str = "vectors") -> FrameTable:
    fn = FEATURE_SETS[feature_set]
    tab = FrameTable(feature_set=feature_set)
    for s in seqs:
        tab.subjects[s.sequence_id] = s.subject_label
        tab.walks[s.sequence_id] = s.walk_type
        tab.frames[s.sequence_id] = np.asarray(s.frame_indices)
        tab.features[s.sequence_id] = fn(s)
    return tab


def write_features_csv(tab: FrameTable, path) -> None:
    width = next(iter(tab.features.values())).shape[1] if tab.features else N_FEATURES
    names = feature_names() if tab.feature_set == "vectors" else [f"f{i}" for i in range(width)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {FEATURES_FORMAT} version=1 feature_set={tab.feature_set} lidargait={__version__}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sequence_id", "subject", "walk", "frame"] + names)
        for sid in tab.ids():
            for t, row in zip(tab.frames[sid], tab.features[sid]):
                w.writerow([sid, tab.subjects[sid], tab.walks[sid], int(t)] + [repr(float(v)) for v in row])


def read_features_csv(path) -> FrameTable:
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.startswith(f"# {FEATURES_FORMAT}"):
            raise ValueError(f"{path}: not a {FEATURES_FORMAT} file")
        meta = dict(kv.split("=", 1) for kv in first[2:].split()[1:])
        reader = csv.reader(fh)
        header = next(reader)
        rows: Dict[str, List[List[float]]] = {}
        tab = FrameTable(feature_set=meta.get("feature_set", "vectors"))
        frames: Dict[str, List[int]] = {}
        for row in reader:
            sid, subj, walk, t = row[:4]
            tab.subjects[sid] = subj
            tab.walks[sid] = walk
            frames.setdefault(sid, []).append(int(t))
            rows.setdefault(sid, []).append([float(v) for v in row[4:]])
    for sid in rows:
        tab.features[sid] = np.asarray(rows[sid])
        tab.frames[sid] = np.asarray(frames[sid])
    if len(header) - 4 != (next(iter(tab.features.values())).shape[1] if tab.features else len(header) - 4):
        raise ValueError(f"{path}: header and rows disagree")
    return tab


def write_cycles(cycles: Dict[str, CycleEstimate], path) -> None:
    doc = {"format": CYCLES_FORMAT, "version": 1,
           "cycles": {k: cycles[k].to_dict() for k in sorted(cycles)}}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_cycles(path) -> Dict[str, CycleEstimate]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CYCLES_FORMAT:
        raise ValueError(f"{path}: not a {CYCLES_FORMAT} file")
    return {k: CycleEstimate.from_dict(v) for k, v in doc["cycles"].items()}


def window_dataset(tab: FrameTable, ids: Sequence[str], C: int, opts: CycleOptions,
                   cycles: Optional[Dict[str, CycleEstimate]] = None) -> LabeledDataset:
    parts = []
    for sid in ids:
        f = tab.features[sid]
        if opts.mode == "per-seq" and cycles is not None:
            own = cycles[sid].cycle_frames
            X = resampled_window_matrix(f, own, C, opts.stride)
        else:
            X = window_matrix(f, C, opts.stride)
        n = X.shape[0]
        parts.append(LabeledDataset(
            X.reshape(n, -1) if n else np.empty((0, f.shape[1] * C)),
            [tab.subjects[sid]] * n, [sid] * n, [tab.walks[sid]] * n,
            [int(tab.frames[sid][i * opts.stride]) for i in range(n)],
        ))
    return LabeledDataset.concat(parts)


def train_eval(tab: FrameTable, cycles: Optional[Dict[str, CycleEstimate]],
               cycle_opts: CycleOptions, clf: ClassifierOptions) -> EvalReport:
    """Split sequences, choose the window length, build windows and score."""
    triples = [(sid, tab.subjects[sid], tab.walks[sid]) for sid in tab.ids()]
    train_ids, test_ids = split_sequences(triples, clf.split_spec())
    if not test_ids:
        raise ValueError("empty test split")
    if cycle_opts.mode == "fixed":
        C = int(cycle_opts.window)
    else:
        if cycles is None:
            raise ValueError("cycle estimates required unless the window is fixed")
        C = vote(cycles[s].cycle_frames for s in train_ids)
    train = window_dataset(tab, train_ids, C, cycle_opts, cycles)
    test = window_dataset(tab, test_ids, C, cycle_opts, cycles)
    info = {"mode": clf.split, "seed": clf.seed, "test_fraction": clf.test_fraction,
            "train": sorted(train_ids), "test": sorted(test_ids)}
    rep = evaluate_split(train, test, clf.k, clf.metric, clf.average, clf.classes, info)
    rep.cycle_frames = C
    rep.extra = {"feature_set": tab.feature_set, "cycle_mode": cycle_opts.mode}
    return rep


def evaluate_sequences(seqs: Sequence[WorldSkeletonSequence], cfg: PipelineConfig) -> EvalReport:
    """In-memory pipeline from projected world sequences to an EvalReport."""
    if not cfg.skip_repair:
        seqs, _ = repair_all(seqs, cfg.repair, cfg.jobs)
    tab = frame_table(seqs, cfg.classifier.feature_set)
    cycles = cycle_estimates(seqs, cfg.cycle)
    return train_eval(tab, cycles, cfg.cycle, cfg.classifier)


# ---------------------------------------------------------------------------
# Full run with artifacts
# ---------------------------------------------------------------------------

def run_pipeline(cfg: PipelineConfig) -> EvalReport:
    """Run all stages from ``cfg.input_dir`` and write artifacts to ``cfg.output_dir``.

    Raises :class:`StageError` naming the failing stage.
    """
    out = Path(cfg.output_dir)
    stage = "ingest"
    try:
        files = input_files(cfg.input_dir)
        if not files:
            raise ValueError(f"no .jsonl or .csv sequences in {cfg.input_dir}")
        seqs = ingest(files, cfg)
        subjects: Dict[str, int] = {}
        for s in seqs:
            subjects[s.subject_label] = subjects.get(s.subject_label, 0) + 1
        if len(subjects) < 2 or min(subjects.values()) < 2:
            raise ValueError("need at least 2 subjects with at least 2 sequences each")
        out.mkdir(parents=True, exist_ok=True)
        (out / "world").mkdir(exist_ok=True)
        for s in seqs:
            save_world(s, out / "world" / f"{s.sequence_id}.json")

        stage = "repair"
        if not cfg.skip_repair:
            seqs, reports = repair_all(seqs, cfg.repair, cfg.jobs)
            (out / "repaired").mkdir(exist_ok=True)
            for s in seqs:
                save_world(s, out / "repaired" / f"{s.sequence_id}.json")
            doc = {k: reports[k].to_dict() for k in sorted(reports)}
            (out / "repair_report.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")

        stage = "features"
        tab = frame_table(seqs, cfg.classifier.feature_set)
        write_features_csv(tab, out / "features.csv")

        stage = "cycle"
        cycles = cycle_estimates(seqs, cfg.cycle)
        write_cycles(cycles, out / "cycles.json")

        stage = "train-eval"
        report = train_eval(read_features_csv(out / "features.csv"), read_cycles(out / "cycles.json"),
                            cfg.cycle, cfg.classifier)
        report.extra["skip_repair"] = cfg.skip_repair
        (out / "report.json").write_text(report.to_json(), encoding="utf-8")
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n")
        return report
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, str(exc)) from exc


# ---------------------------------------------------------------------------
# Baseline comparison
# ---------------------------------------------------------------------------

def baseline_suite(seqs: Sequence[WorldSkeletonSequence], cfg: PipelineConfig) -> dict:
    """Score every feature set with and without repair, single-frame windows.

    One extra row uses the configured cycle options with the joint vectors, so
    the table shows what concatenation adds on top of the repaired baseline.
    """
    repaired, _ = repair_all(seqs, cfg.repair, cfg.jobs)
    single = replace(cfg.cycle, mode="fixed", window=1)
    rows = []

    def score(name, data, feature_set, cycle_opts, repaired_flag):
        tab = frame_table(data, feature_set)
        cycles = cycle_estimates(data, cycle_opts) if cycle_opts.mode != "fixed" else None
        rep = train_eval(tab, cycles, cycle_opts, cfg.classifier)
        rows.append({"name": name, "feature_set": feature_set, "repair": repaired_flag,
                     "window": rep.cycle_frames, "window_accuracy": rep.window_accuracy,
                     "sequence_accuracy": rep.sequence_accuracy,
                     "macro_f_score": rep.macro_f_score})

    for fs in FEATURE_SETS:
        score(f"{fs}/raw", seqs, fs, single, False)
        score(f"{fs}/repaired", repaired, fs, single, True)
    score("vectors/repaired/concat", repaired, "vectors", cfg.cycle, True)
    return {"rows": rows, "k": cfg.classifier.k, "split": cfg.classifier.split}
