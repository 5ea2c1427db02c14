"""Stratified partitions for cross-validation."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..numkit.random import Rng


class ClassTooSmall(ValueError):
    pass


@dataclass
class FoldPlan:
    fold_count: int
    assignments: np.ndarray  # fold index per row
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> list:
        return np.bincount(self.assignments, minlength=self.fold_count).tolist()

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row_index", "fold"])
            for i, f in enumerate(self.assignments):
                w.writerow([i, int(f)])

    @classmethod
    def from_csv(cls, path, seed=0):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assign = np.zeros(len(rows), dtype=int)
        for r in rows:
            assign[int(r["row_index"])] = int(r["fold"])
        return cls(int(assign.max()) + 1, assign, seed)


def stratified_kfold(labels, folds: int, seed: int) -> FoldPlan:
    """Deal each class's shuffled rows round-robin over the folds.

    The dealing position carries over from one class to the next, so fold
    sizes differ by at most one overall as well as per class.
    """
    labels = np.asarray(getattr(labels, "labels", labels))
    if folds < 2:
        raise ValueError("need at least two folds")
    rng = Rng(seed)
    assign = np.empty(labels.shape[0], dtype=int)
    offset = 0
    for cls in sorted(np.unique(labels).tolist()):
        idx = np.flatnonzero(labels == cls)
        if idx.size < folds:
            raise ClassTooSmall(f"class {cls!r} has {idx.size} rows, fewer than {folds} folds")
        idx = idx[rng.permutation(idx.size)]
        assign[idx] = (np.arange(idx.size) + offset) % folds
        offset = (offset + idx.size) % folds
    return FoldPlan(folds, assign, seed)


def stratified_split(labels, holdout_fraction: float, rng: Rng):
    """``(keep, holdout)`` index arrays with about ``holdout_fraction`` of each class held out."""
    labels = np.asarray(labels)
    keep, hold = [], []
    for cls in sorted(np.unique(labels).tolist()):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        n_hold = int(round(holdout_fraction * idx.size))
        n_hold = min(max(n_hold, 1), idx.size - 1) if idx.size > 1 else 0
        hold.append(idx[:n_hold])
        keep.append(idx[n_hold:])
    return np.sort(np.concatenate(keep)), np.sort(np.concatenate(hold))
