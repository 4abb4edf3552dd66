"""KNN identification over window features and the evaluation protocol."""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .data import ValidationError

logger = logging.getLogger(__name__)

METRICS = {"manhattan": "cityblock"}


@dataclass
class LabeledDataset:
    """Window features with their subject, sequence and walk-type labels."""

    X: np.ndarray
    labels: List[str]
    sequence_ids: List[str]
    walk_types: List[str]
    start_frames: Optional[List[int]] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValidationError("feature matrix must be 2-D")
        n = self.X.shape[0]
        for name in ("labels", "sequence_ids", "walk_types"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"{name} has {len(getattr(self, name))} entries for {n} windows")
        self.labels = [str(v) for v in self.labels]
        if self.start_frames is None:
            self.start_frames = [0] * n

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, keep: np.ndarray) -> "LabeledDataset":
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.flatnonzero(keep)
        pick = lambda xs: [xs[i] for i in keep]
        return LabeledDataset(self.X[keep], pick(self.labels), pick(self.sequence_ids),
                              pick(self.walk_types), pick(self.start_frames))

    @classmethod
    def concat(cls, parts: Sequence["LabeledDataset"]) -> "LabeledDataset":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls(np.empty((0, 0)), [], [], [], [])
        dims = {p.dim for p in parts}
        if len(dims) > 1:
            raise ValidationError(f"windows differ in feature length: {sorted(dims)}")
        return cls(
            np.vstack([p.X for p in parts]),
            sum((p.labels for p in parts), []),
            sum((p.sequence_ids for p in parts), []),
            sum((p.walk_types for p in parts), []),
            sum((p.start_frames for p in parts), []),
        )


class KNNClassifier:
    """k-nearest-neighbour vote under the L1 metric with deterministic ties.

    Training points are kept in a canonical order (lexicographic on the
    feature values, then label), so results do not depend on the order the
    training set was supplied in. Distance ties go to the point earlier in
    that order; vote ties go to the label with the smaller summed distance,
    then to the lexicographically smaller label.
    """

    def __init__(self, X, labels: Sequence[str], k: int = 7, metric: str = "manhattan"):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValidationError("training set must be a non-empty 2-D array")
        if len(labels) != X.shape[0]:
            raise ValidationError("one label per training point required")
        if metric not in METRICS:
            raise ValueError(f"unsupported metric {metric!r}")
        if k < 1:
            raise ValueError("k must be positive")
        if k > X.shape[0]:
            logger.warning("k=%d exceeds training size %d; clamping", k, X.shape[0])
            k = X.shape[0]
        labels = np.asarray([str(v) for v in labels])
        classes, codes = np.unique(labels, return_inverse=True)
        order = np.lexsort((codes,) + tuple(X[:, c] for c in range(X.shape[1] - 1, -1, -1)))
        self.X = X[order]
        self.labels = labels[order]
        self.k = k
        self.metric = metric

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def kneighbors(self, Q) -> Tuple[np.ndarray, np.ndarray]:
        """Indices (canonical order) and distances of the k nearest points."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[1] != self.dim:
            raise ValidationError(f"query has {Q.shape[1]} features, training set {self.dim}")
        d = cdist(Q, self.X, METRICS[self.metric])
        idx = np.argsort(d, axis=1, kind="stable")[:, : self.k]
        return idx, np.take_along_axis(d, idx, axis=1)

    def _vote(self, idx: np.ndarray, dist: np.ndarray) -> str:
        count: Dict[str, int] = {}
        total: Dict[str, float] = {}
        for i, d in zip(idx, dist):
            lab = self.labels[i]
            count[lab] = count.get(lab, 0) + 1
            total[lab] = total.get(lab, 0.0) + float(d)
        return min(count, key=lambda lab: (-count[lab], total[lab], lab))

    def predict(self, Q, batch: int = 512) -> List[str]:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        out: List[str] = []
        for s in range(0, Q.shape[0], batch):
            idx, dist = self.kneighbors(Q[s: s + batch])
            out.extend(self._vote(i, d) for i, d in zip(idx, dist))
        return out


def knn_predict(query, train: LabeledDataset, k: int = 7, metric: str = "manhattan") -> str:
    """Label of a single window feature."""
    if len(train) == 0:
        raise ValidationError("empty training set")
    q = getattr(query, "values", query)
    return KNNClassifier(train.X, train.labels, k, metric).predict(q)[0]


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def _hash_unit(seed: int, *key: str) -> float:
    h = hashlib.sha256(":".join((str(seed),) + key).encode()).digest()
    return int.from_bytes(h[:8], "big") / 2.0 ** 64


@dataclass(frozen=True)
class SplitSpec:
    """How sequences are divided into training and test sets.

    ``cross-walk`` holds out, per subject, the walk type whose share of that
    subject's sequences is closest to ``test_fraction`` (smaller share on
    ties, then a seeded hash). ``random`` hashes sequence ids with the seed.
    ``explicit`` uses ``test_ids``.
    """

    mode: str = "cross-walk"
    test_fraction: float = 0.3
    seed: int = 0
    test_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.mode not in ("cross-walk", "random", "explicit"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")


def split_sequences(sequences: Sequence[Tuple[str, str, str]], spec: SplitSpec
                    ) -> Tuple[List[str], List[str]]:
    """Assign ``(sequence_id, subject, walk_type)`` triples to train / test ids."""
    ids = [s for s, _, _ in sequences]
    if len(set(ids)) != len(ids):
        raise ValidationError("sequence ids must be unique")
    test: set = set()
    if spec.mode == "explicit":
        test = set(spec.test_ids)
    else:
        by_subject: Dict[str, List[Tuple[str, str]]] = {}
        for sid, subj, walk in sequences:
            by_subject.setdefault(subj, []).append((sid, walk))
        for subj in sorted(by_subject):
            seqs = by_subject[subj]
            walks = Counter(w for _, w in seqs)
            if spec.mode == "cross-walk" and len(walks) > 1:
                n = len(seqs)
                held = min(walks, key=lambda w: (abs(walks[w] / n - spec.test_fraction),
                                                 walks[w], _hash_unit(spec.seed, subj, w)))
                test.update(sid for sid, w in seqs if w == held)
            else:
                if spec.mode == "cross-walk":
                    logger.warning("subject %s has a single walk type; using a random split", subj)
                u = {sid: _hash_unit(spec.seed, sid) for sid, _ in seqs}
                chosen = {sid for sid in u if u[sid] < spec.test_fraction}
                if len(chosen) == len(seqs):
                    chosen.discard(max(chosen, key=lambda s: u[s]))
                test |= chosen
    train = [s for s in ids if s not in test]
    return train, [s for s in ids if s in test]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def confusion_matrix(y_true: Sequence[str], y_pred: Sequence[str], labels: Sequence[str]) -> np.ndarray:
    pos = {lab: i for i, lab in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[pos[t], pos[p]] += 1
    return cm


def f1_scores(cm: np.ndarray) -> np.ndarray:
    """Per-class F1 from a confusion matrix (rows true, columns predicted); 0 where undefined."""
    tp = np.diag(cm).astype(float)
    pred = cm.sum(axis=0).astype(float)
    true = cm.sum(axis=1).astype(float)
    denom = pred + true
    # 2PR/(P+R) == 2TP / (predicted + actual)
    return np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1.0), 0.0)


def macro_f1(cm: np.ndarray, labels: Sequence[str], average: str = "macro",
             classes: str = "present") -> float:
    """Macro (or micro) F-score.

    ``classes="present"`` averages over labels that occur as truth or
    prediction; ``"all"`` over every row of the matrix.
    """
    total = cm.sum()
    if total == 0:
        return 0.0
    if average == "micro":
        return float(np.trace(cm) / total)
    f1 = f1_scores(cm)
    if classes == "present":
        used = (cm.sum(axis=0) + cm.sum(axis=1)) > 0
        f1 = f1[used]
    elif classes != "all":
        raise ValueError(f"unknown class selection {classes!r}")
    return float(np.mean(f1)) if f1.size else 0.0


def majority(labels: Sequence[str]) -> str:
    """Most frequent label; ties go to the lexicographically smaller one."""
    c = Counter(labels)
    best = max(c.values())
    return min(lab for lab, n in c.items() if n == best)


@dataclass
class EvalReport:
    window_accuracy: float
    sequence_accuracy: float
    macro_f_score: float
    sequence_macro_f_score: float
    labels: List[str]
    window_confusion: List[List[int]]
    sequence_confusion: List[List[int]]
    sequence_predictions: Dict[str, Dict[str, str]]
    split: Dict[str, object]
    k: int
    metric: str
    average: str = "macro"
    n_train_windows: int = 0
    n_test_windows: int = 0
    cycle_frames: Optional[int] = None
    untrained_subjects: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    extra: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def table(self) -> str:
        lines = [
            f"window accuracy   {self.window_accuracy:7.2%}   F-score {self.macro_f_score:7.2%}",
            f"sequence accuracy {self.sequence_accuracy:7.2%}   F-score {self.sequence_macro_f_score:7.2%}",
            f"k={self.k} metric={self.metric} train windows={self.n_train_windows} "
            f"test windows={self.n_test_windows} C={self.cycle_frames}",
            "",
            "sequence confusion (rows: true, cols: predicted)",
            "        " + " ".join(f"{lab:>6s}" for lab in self.labels),
        ]
        for lab, row in zip(self.labels, self.sequence_confusion):
            lines.append(f"{lab:>6s}  " + " ".join(f"{v:6d}" for v in row))
        return "\n".join(lines)


def evaluate_split(train: LabeledDataset, test: LabeledDataset, k: int = 7,
                   metric: str = "manhattan", average: str = "macro",
                   classes: str = "present", split_info: Optional[dict] = None) -> EvalReport:
    """Classify every test window, then every test sequence by majority vote."""
    if len(test) == 0:
        raise ValidationError("empty test split")
    if len(train) == 0:
        raise ValidationError("empty training split")
    if train.dim != test.dim:
        raise ValidationError(f"train windows have {train.dim} features, test windows {test.dim}")
    clf = KNNClassifier(train.X, train.labels, k, metric)
    pred = clf.predict(test.X)

    labels = sorted(set(train.labels) | set(test.labels))
    untrained = sorted(set(test.labels) - set(train.labels))
    warnings = [f"subject {s} has no training windows" for s in untrained]
    wcm = confusion_matrix(test.labels, pred, labels)

    per_seq: Dict[str, List[str]] = {}
    truth: Dict[str, str] = {}
    for sid, lab, p in zip(test.sequence_ids, test.labels, pred):
        per_seq.setdefault(sid, []).append(p)
        truth[sid] = lab
    seq_ids = sorted(per_seq)
    seq_pred = {sid: majority(per_seq[sid]) for sid in seq_ids}
    scm = confusion_matrix([truth[s] for s in seq_ids], [seq_pred[s] for s in seq_ids], labels)

    return EvalReport(
        window_accuracy=float(np.trace(wcm) / wcm.sum()),
        sequence_accuracy=float(np.trace(scm) / scm.sum()),
        macro_f_score=macro_f1(wcm, labels, average, classes),
        sequence_macro_f_score=macro_f1(scm, labels, average, classes),
        labels=labels,
        window_confusion=wcm.tolist(),
        sequence_confusion=scm.tolist(),
        sequence_predictions={s: {"true": truth[s], "predicted": seq_pred[s]} for s in seq_ids},
        split=dict(split_info or {}),
        k=clf.k,
        metric=metric,
        average=average,
        n_train_windows=len(train),
        n_test_windows=len(test),
        untrained_subjects=untrained,
        warnings=warnings,
    )


def evaluate(dataset: LabeledDataset, split: SplitSpec, k: int = 7, metric: str = "manhattan",
             average: str = "macro", classes: str = "present") -> EvalReport:
    """Split a window dataset by sequence and score it."""
    seen: Dict[str, Tuple[str, str, str]] = {}
    for sid, lab, walk in zip(dataset.sequence_ids, dataset.labels, dataset.walk_types):
        seen.setdefault(sid, (sid, lab, walk))
    train_ids, test_ids = split_sequences(list(seen.values()), split)
    tr = set(train_ids)
    te = set(test_ids)
    train = dataset.subset(np.array([s in tr for s in dataset.sequence_ids], dtype=bool))
    test = dataset.subset(np.array([s in te for s in dataset.sequence_ids], dtype=bool))
    info = {"mode": split.mode, "seed": split.seed, "test_fraction": split.test_fraction,
            "train": sorted(train_ids), "test": sorted(test_ids)}
    return evaluate_split(train, test, k, metric, average, classes, info)
