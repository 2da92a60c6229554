"""Balanced accuracy, ROC/AUC, and stratified splitting.

AUC is computed two ways in the test suite (trapezoid over the tie-grouped
staircase here, pair counting as the oracle); the staircase groups equal
scores into a single step so the trapezoid equals the Mann-Whitney
statistic with ties counted half.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import LabelSpace
from .errors import ConfigurationError


@dataclass
class EvalReport:
    """One strategy's scores on one split for one seed."""

    strategy: str
    bacc: float
    auc: float | None = None
    roc_points: tuple[tuple[float, float], ...] = ()
    n_pos: int = 0
    n_neg: int = 0
    split_tag: str = ""
    run_seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "strategy": self.strategy,
            "bacc": self.bacc,
            "auc": self.auc,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "split_tag": self.split_tag,
            "run_seed": self.run_seed,
        }
        out.update(self.extra)
        return out


def _as_binary(arr: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(arr).reshape(-1)
    if not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must be 0/1 valued")
    return a.astype(np.int64)


def balanced_accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean of sensitivity and specificity."""
    p = _as_binary(pred, "pred")
    t = _as_binary(truth, "truth")
    if p.shape != t.shape:
        raise ValueError(f"{p.size} predictions but {t.size} truth labels")
    n_pos = int((t == 1).sum())
    n_neg = int((t == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ConfigurationError("truth contains a single class")
    tp = int(((p == 1) & (t == 1)).sum())
    tn = int(((p == 0) & (t == 0)).sum())
    return 0.5 * (tp / n_pos + tn / n_neg)


def balanced_accuracy_multiclass(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean per-class recall over the classes present in the truth."""
    p = np.asarray(pred).reshape(-1)
    t = np.asarray(truth).reshape(-1)
    if p.shape != t.shape:
        raise ValueError(f"{p.size} predictions but {t.size} truth labels")
    classes = np.unique(t)
    if classes.size < 2:
        raise ConfigurationError("truth contains a single class")
    recalls = [float((p[t == c] == c).mean()) for c in classes]
    return float(np.mean(recalls))


def roc_auc(
    scores: np.ndarray, truth: np.ndarray
) -> tuple[float, tuple[tuple[float, float], ...]]:
    """Trapezoidal AUC and the ROC staircase points, from (0,0) to (1,1)."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    t = _as_binary(truth, "truth")
    if s.shape != t.shape:
        raise ValueError(f"{s.size} scores but {t.size} truth labels")
    n_pos = int((t == 1).sum())
    n_neg = int((t == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ConfigurationError("truth contains a single class")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    t_sorted = t[order]
    tps = np.cumsum(t_sorted == 1)
    fps = np.cumsum(t_sorted == 0)
    # keep only the last index of each tied-score group
    last = np.nonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))[0]
    tpr = np.concatenate([[0.0], tps[last] / n_pos])
    fpr = np.concatenate([[0.0], fps[last] / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    points = tuple((float(x), float(y)) for x, y in zip(fpr, tpr))
    return auc, points


def stratified_kfold(
    labels, k: int, seed: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded stratified k-fold partition.

    Each class is shuffled and dealt cyclically across folds from a random
    per-class starting fold, so per-class test counts differ by at most one
    across folds and no fold is systematically larger.
    """
    y = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.size, dtype=np.int64)
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        if idx.size < k:
            raise ConfigurationError(
                f"class {cls!r} has {idx.size} members, fewer than k={k}"
            )
        perm = rng.permutation(idx)
        offset = int(rng.integers(k))
        fold_of[perm] = (np.arange(perm.size) + offset) % k
    folds = []
    all_idx = np.arange(y.size)
    for f in range(k):
        test = all_idx[fold_of == f]
        train = all_idx[fold_of != f]
        folds.append((train, test))
    return folds


def stratified_split(
    labels, val_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded stratified holdout; every class keeps at least one member on
    each side."""
    y = np.asarray(labels)
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    val_parts = []
    train_parts = []
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        if idx.size < 2:
            raise ConfigurationError(
                f"class {cls!r} has {idx.size} member(s); need at least 2 to split"
            )
        n_val = int(round(val_fraction * idx.size))
        n_val = min(max(n_val, 1), idx.size - 1)
        perm = rng.permutation(idx)
        val_parts.append(perm[:n_val])
        train_parts.append(perm[n_val:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(val_parts))


def stratified_subsample(labels, size: int, seed: int) -> np.ndarray:
    """Seeded stratified subsample of the given size, returned as sorted
    indices (so size == N returns every index)."""
    y = np.asarray(labels)
    n = y.size
    if size > n:
        raise ConfigurationError(f"subsample size {size} exceeds split size {n}")
    classes = np.unique(y)
    if size < classes.size:
        raise ConfigurationError(
            f"subsample size {size} below class count {classes.size}"
        )
    # largest-remainder apportionment: exact total, every class kept
    counts = np.array([(y == c).sum() for c in classes], dtype=np.int64)
    quota = counts * (size / n)
    take = np.maximum(np.floor(quota).astype(np.int64), 1)
    take = np.minimum(take, counts)
    while take.sum() < size:
        room = take < counts
        frac = np.where(room, quota - take, -np.inf)
        take[int(np.argmax(frac))] += 1
    while take.sum() > size:
        spare = take > 1
        frac = np.where(spare, quota - take, np.inf)
        take[int(np.argmin(frac))] -= 1

    rng = np.random.default_rng(seed)
    parts = []
    for c, n_take in zip(classes, take):
        idx = np.nonzero(y == c)[0]
        perm = rng.permutation(idx)
        parts.append(perm[:n_take])
    return np.sort(np.concatenate(parts))


def multiclass_to_binary(pred_class: np.ndarray, space: LabelSpace) -> np.ndarray:
    """1 where the predicted class index is the positive class, else 0."""
    p = np.asarray(pred_class).reshape(-1)
    if p.size and (p.min() < 0 or p.max() >= len(space.classes)):
        bad = int(p.min()) if p.min() < 0 else int(p.max())
        raise ValueError(
            f"class index {bad} out of range for {len(space.classes)} classes"
        )
    return (p == space.positive_index).astype(np.int64)
