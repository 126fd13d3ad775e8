"""Two-task datasets: label partitioning, normalization, CSV ingestion, blobs.

The label set is split evenly into two disjoint groups (the extra label goes
to task 1 when the count is odd). With a single integer label column each
sample belongs to the task owning its label. With a multi-label 0/1 block
every sample may appear in both tasks; its target is the normalized indicator
over that task's labels, and samples with no positive label in a group are
left out of that task.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class DatasetSplit:
    features1: np.ndarray
    targets1: np.ndarray
    features2: np.ndarray
    targets2: np.ndarray
    labels1: tuple
    labels2: tuple
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if set(self.labels1) & set(self.labels2):
            raise ValueError("task label groups must be disjoint")
        for X, T, name in ((self.features1, self.targets1, "task 1"), (self.features2, self.targets2, "task 2")):
            if X.shape[0] < 1:
                raise ValueError(f"{name} has no samples")
            if X.shape[0] != T.shape[0]:
                raise ValueError(f"{name} features and targets disagree in length")
        if self.targets1.shape[1] != len(self.labels1) or self.targets2.shape[1] != len(self.labels2):
            raise ValueError("target width must equal the number of task labels")

    @property
    def n_features(self) -> int:
        return self.features1.shape[1]

    @property
    def sizes(self) -> tuple[int, int]:
        return self.features1.shape[0], self.features2.shape[0]


def partition_labels(labels: Sequence) -> tuple[tuple, tuple]:
    """First half of the sorted label set to task 1, the rest to task 2."""
    labs = tuple(sorted(labels))
    if len(labs) < 2:
        raise ValueError("need at least two labels to form two tasks")
    cut = (len(labs) + 1) // 2
    return labs[:cut], labs[cut:]


def normalize(features, method: str = "z-score"):
    """Return ``(normalized, mean, std)``; constant columns keep unit scale."""
    X = np.asarray(features, dtype=np.float64)
    if method == "none":
        return X.copy(), np.zeros(X.shape[1]), np.ones(X.shape[1])
    if method != "z-score":
        raise ValueError(f"unknown normalization {method!r}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (X - mean) / std, mean, std


def split_single_label(features, labels, normalization: str = "z-score") -> DatasetSplit:
    X, mean, std = normalize(features, normalization)
    y = np.asarray(labels)
    g1, g2 = partition_labels(np.unique(y).tolist())
    parts = []
    for group in (g1, g2):
        index = {lab: j for j, lab in enumerate(group)}
        mask = np.isin(y, group)
        T = np.zeros((int(mask.sum()), len(group)))
        T[np.arange(T.shape[0]), [index[v] for v in y[mask].tolist()]] = 1.0
        parts.append((X[mask], T))
    return DatasetSplit(parts[0][0], parts[0][1], parts[1][0], parts[1][1],
                        tuple(g1), tuple(g2), mean, std)


def split_multi_label(features, indicators, normalization: str = "z-score") -> DatasetSplit:
    X, mean, std = normalize(features, normalization)
    Y = np.asarray(indicators, dtype=np.float64)
    g1, g2 = partition_labels(range(Y.shape[1]))
    parts = []
    for group in (g1, g2):
        block = Y[:, list(group)]
        counts = block.sum(axis=1)
        keep = counts > 0
        parts.append((X[keep], block[keep] / counts[keep, None]))
    return DatasetSplit(parts[0][0], parts[0][1], parts[1][0], parts[1][1],
                        tuple(g1), tuple(g2), mean, std)


def make_blobs(seed: int, n_samples: int = 400, n_features: int = 2, n_labels: int = 4,
               cluster_std: float = 1.0, center_scale: float = 4.0):
    """Isotropic Gaussian clusters, one per label, with near-equal sizes."""
    if n_samples < n_labels:
        raise ValueError("need at least one sample per label")
    rng = np.random.default_rng(seed)
    centers = center_scale * rng.standard_normal((n_labels, n_features))
    labels = np.arange(n_samples) % n_labels
    rng.shuffle(labels)
    features = centers[labels] + cluster_std * rng.standard_normal((n_samples, n_features))
    return features, labels


def make_blob_split(seed: int, n_samples: int = 400, n_features: int = 2, n_labels: int = 4,
                    cluster_std: float = 1.0, center_scale: float = 4.0,
                    normalization: str = "z-score") -> DatasetSplit:
    X, y = make_blobs(seed, n_samples, n_features, n_labels, cluster_std, center_scale)
    return split_single_label(X, y, normalization)


def load_csv_dataset(path, label_columns, normalization: str = "z-score") -> DatasetSplit:
    """Read a headered numeric CSV into a two-task split.

    Parameters
    ----------
    path : path-like
        UTF-8 file with a header row and '.' as decimal separator.
    label_columns : str or sequence of str
        One column of integer class labels, or several 0/1 indicator columns
        forming a multi-label block. Every other column is a feature.
    normalization : {"z-score", "none"}
    """
    path = Path(path)
    multi = not isinstance(label_columns, str)
    wanted = list(label_columns) if multi else [label_columns]
    if not wanted:
        raise ValueError("at least one label column is required")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        missing = [c for c in wanted if c not in header]
        if missing:
            raise ValueError(f"{path}: missing label columns {missing}")
        label_idx = [header.index(c) for c in wanted]
        feat_idx = [i for i in range(len(header)) if i not in label_idx]
        if not feat_idx:
            raise ValueError(f"{path}: no feature columns")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{line}: expected {len(header)} fields, found {len(row)}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: non-numeric cell ({exc})") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite values")
    features = data[:, feat_idx]
    labels = data[:, label_idx]
    if np.any(labels != np.round(labels)):
        raise ValueError(f"{path}: label columns must hold integers")
    if multi:
        if np.any((labels != 0) & (labels != 1)):
            raise ValueError(f"{path}: multi-label block must be 0/1")
        return split_multi_label(features, labels, normalization)
    return split_single_label(features, labels[:, 0].astype(np.int64), normalization)
