"""Train the image/text projection layers over frozen encoder embeddings.

The trainable surface is exactly two square matrices: every embedding row
is right-multiplied by its side's projection. The objective is a symmetric
cross-entropy between temperature-scaled pairwise cosine logits and a
soft target matrix that spreads each row's mass uniformly over the batch
items sharing its disease label. Gradients are exact analytic derivatives;
optimization is AdamW with a reduce-on-plateau learning-rate schedule.

All randomness (init noise, epoch shuffling) flows from the config seed,
so identical inputs produce bit-identical training logs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .embeddings import EmbeddingSet, read_matrix_container, write_matrix_container
from .errors import ConfigurationError, EmbeddingFormatError, NumericalDegeneracyError

DEFAULT_LOGIT_SCALE = 100.0
INIT_NOISE_SCALE = 1e-3
EARLY_STOP_PATIENCE = 10

_ZERO_NORM_FLOOR = 1e-300


@dataclass
class ProjectionPair:
    """The two learned linear maps plus the fixed temperature multiplier.

    Rows are projected by right-multiplication: ``projected = emb @ w``.
    """

    w_image: np.ndarray
    w_text: np.ndarray
    logit_scale: float = DEFAULT_LOGIT_SCALE

    def __post_init__(self):
        self.w_image = np.asarray(self.w_image, dtype=np.float64)
        self.w_text = np.asarray(self.w_text, dtype=np.float64)
        for name, w in (("w_image", self.w_image), ("w_text", self.w_text)):
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ValueError(f"{name} must be square, got shape {w.shape}")
            if not np.all(np.isfinite(w)):
                raise NumericalDegeneracyError(f"{name} contains non-finite entries")
        if self.w_image.shape != self.w_text.shape:
            raise ValueError("w_image and w_text must share the same dimension")
        if not self.logit_scale > 0:
            raise ValueError("logit_scale must be positive")

    @property
    def dim(self) -> int:
        return self.w_image.shape[0]

    @classmethod
    def identity(cls, d: int, logit_scale: float = DEFAULT_LOGIT_SCALE) -> "ProjectionPair":
        return cls(np.eye(d), np.eye(d), logit_scale)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    lr_patience: int = 1
    lr_factor: float = 0.8
    batch_size: int = 64
    max_epochs: int = 100
    seed: int = 0
    weight_decay: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.lr_factor < 1:
            raise ValueError("lr_factor must be in (0, 1)")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")


@dataclass(frozen=True)
class TargetMatrix:
    """B x B soft targets: positive mass on same-label pairs, rows sum to 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"target matrix must be square, got {v.shape}")
        object.__setattr__(self, "values", v)


def build_target_matrix(batch_labels: list[str]) -> TargetMatrix:
    """Soft target for one batch: entry (i, j) is 1/k_i when labels match
    (k_i counts the batch items sharing label i, including i), else 0."""
    if not batch_labels:
        raise ValueError("batch must be nonempty")
    labels = list(batch_labels)
    b = len(labels)
    same = np.array(
        [[labels[i] == labels[j] for j in range(b)] for i in range(b)],
        dtype=np.float64,
    )
    return TargetMatrix(same / same.sum(axis=1, keepdims=True))


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    learning_rate: float


@dataclass(frozen=True)
class TrainLog:
    """Per-epoch losses and learning rates; epoch 0 is the untrained state."""

    entries: tuple[EpochRecord, ...]
    best_epoch: int
    best_val_loss: float


class AdamW:
    """AdamW with decoupled weight decay over a fixed list of parameter
    arrays, updated in place. ``lr`` is mutable so a scheduler can adjust it."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=1e-2):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = [np.zeros_like(p) for p in self.params]
        self._v = [np.zeros_like(p) for p in self.params]

    def step(self, grads) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * self.weight_decay * p
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after the monitored loss has
    failed to improve for more than ``patience`` consecutive steps."""

    def __init__(self, lr: float, patience: int = 1, factor: float = 0.8):
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.best = float("inf")
        self.bad_steps = 0

    def step(self, loss: float) -> float:
        """Record one epoch's monitored loss; returns the (possibly reduced)
        learning rate to use next."""
        if loss < self.best:
            self.best = loss
            self.bad_steps = 0
        else:
            self.bad_steps += 1
            if self.bad_steps > self.patience:
                self.lr *= self.factor
                self.bad_steps = 0
        return self.lr


def _project(emb: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project rows, returning (projected, row norms, unit rows)."""
    proj = emb @ w
    norms = np.linalg.norm(proj, axis=1)
    if np.any(norms < _ZERO_NORM_FLOOR):
        row = int(np.nonzero(norms < _ZERO_NORM_FLOOR)[0][0])
        raise NumericalDegeneracyError(f"projection of row {row} is a zero vector")
    return proj, norms, proj / norms[:, None]


def _log_softmax(logits: np.ndarray, axis: int) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def contrastive_loss(
    img_emb: np.ndarray,
    txt_emb: np.ndarray,
    proj: ProjectionPair,
    target: TargetMatrix,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Symmetric cross-entropy loss and its exact gradients.

    Logits are ``logit_scale * cos(img_row @ w_image, txt_row @ w_text)``.
    The loss averages the row-wise cross-entropy against the soft target
    with the column-wise cross-entropy against the row-normalized transposed
    target. Returns (loss, d loss / d w_image, d loss / d w_text).
    """
    x = np.asarray(img_emb, dtype=np.float64)
    y = np.asarray(txt_emb, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"batch shape mismatch: {x.shape} vs {y.shape}")
    b = x.shape[0]
    p = target.values
    if p.shape != (b, b):
        raise ValueError(f"target shape {p.shape} does not match batch size {b}")

    _, na, ahat = _project(x, proj.w_image)
    _, nb, bhat = _project(y, proj.w_text)
    cos = ahat @ bhat.T
    s = proj.logit_scale
    logits = s * cos

    # Row-normalized transpose of the target; for label-derived targets this
    # equals the target itself, but the general form keeps the loss exact for
    # arbitrary soft targets.
    pt = p.T / p.T.sum(axis=1, keepdims=True)

    log_rows = _log_softmax(logits, axis=1)
    log_cols = _log_softmax(logits, axis=0)
    loss_i2t = -float((p * log_rows).sum()) / b
    loss_t2i = -float((pt.T * log_cols).sum()) / b
    loss = 0.5 * (loss_i2t + loss_t2i)

    soft_rows = np.exp(log_rows)
    soft_cols = np.exp(log_cols)
    g = (soft_rows - p + soft_cols - pt.T) / (2.0 * b)
    gs = s * g

    gc = gs * cos
    d_ahat = gs @ bhat
    d_a = (d_ahat - gc.sum(axis=1, keepdims=True) * ahat) / na[:, None]
    d_bhat = gs.T @ ahat
    d_b = (d_bhat - gc.sum(axis=0)[:, None] * bhat) / nb[:, None]

    grad_w_image = x.T @ d_a
    grad_w_text = y.T @ d_b
    return loss, grad_w_image, grad_w_text


def apply_projection(proj: ProjectionPair, emb: np.ndarray, side: str) -> np.ndarray:
    """Map embedding rows through the image or text projection."""
    if side not in ("image", "text"):
        raise ValueError(f"side must be 'image' or 'text', got {side!r}")
    m = np.asarray(emb, dtype=np.float64)
    w = proj.w_image if side == "image" else proj.w_text
    if m.shape[-1] != w.shape[0]:
        raise ValueError(
            f"dimension mismatch: embeddings have d={m.shape[-1]}, "
            f"projection expects d={w.shape[0]}"
        )
    return m @ w


def _paired_texts(
    images: EmbeddingSet, class_texts: Mapping[str, np.ndarray], split: str
) -> np.ndarray:
    if images.labels is None:
        raise ConfigurationError(f"{split} split has no labels")
    rows = []
    for i, label in enumerate(images.labels):
        if label not in class_texts:
            raise ConfigurationError(
                f"{split} item {images.ids[i]!r} has label {label!r} with no "
                f"class-name text embedding"
            )
        rows.append(class_texts[label])
    return np.asarray(rows, dtype=np.float64)


def text_lookup(class_texts: EmbeddingSet | Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Class name -> text embedding row, from a set keyed by class-name ids."""
    if isinstance(class_texts, EmbeddingSet):
        return {rid: class_texts.matrix[i] for i, rid in enumerate(class_texts.ids)}
    return dict(class_texts)


def _full_batch_loss(
    images: np.ndarray, texts: np.ndarray, labels: list[str], proj: ProjectionPair
) -> float:
    target = build_target_matrix(labels)
    loss, _, _ = contrastive_loss(images, texts, proj, target)
    return loss


def train_projections(
    train: EmbeddingSet,
    val: EmbeddingSet,
    class_texts: EmbeddingSet | Mapping[str, np.ndarray],
    config: TrainConfig,
    logit_scale: float = DEFAULT_LOGIT_SCALE,
) -> tuple[ProjectionPair, TrainLog]:
    """Fit the projection pair on labeled image embeddings.

    Each image is paired with its label's class-name text embedding. Returns
    the weights from the epoch with the best validation loss (epoch 0, the
    untrained state, included) and the full per-epoch log.
    """
    if train.n == 0 or val.n == 0:
        raise ConfigurationError("empty train or validation split")
    lookup = text_lookup(class_texts)
    x_train = train.matrix
    t_train = _paired_texts(train, lookup, "train")
    x_val = val.matrix
    t_val = _paired_texts(val, lookup, "val")
    val_labels = list(val.labels)
    train_labels = list(train.labels)
    d = x_train.shape[1]
    if t_train.shape[1] != d:
        raise ConfigurationError(
            f"text embedding dimension {t_train.shape[1]} != image dimension {d}"
        )

    rng = np.random.default_rng(config.seed)
    w_image = np.eye(d) + INIT_NOISE_SCALE * rng.standard_normal((d, d))
    w_text = np.eye(d) + INIT_NOISE_SCALE * rng.standard_normal((d, d))
    proj = ProjectionPair(w_image, w_text, logit_scale)

    optimizer = AdamW(
        [proj.w_image, proj.w_text],
        lr=config.learning_rate,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_epsilon,
        weight_decay=config.weight_decay,
    )
    scheduler = PlateauScheduler(
        config.learning_rate, patience=config.lr_patience, factor=config.lr_factor
    )

    train0 = _full_batch_loss(x_train, t_train, train_labels, proj)
    val0 = _full_batch_loss(x_val, t_val, val_labels, proj)
    entries = [EpochRecord(0, train0, val0, config.learning_rate)]
    scheduler.step(val0)

    best_val = val0
    best_epoch = 0
    best_w = (proj.w_image.copy(), proj.w_text.copy())
    epochs_since_best = 0

    for epoch in range(1, config.max_epochs + 1):
        lr_used = scheduler.lr
        optimizer.lr = lr_used
        perm = rng.permutation(train.n)
        loss_sum = 0.0
        count = 0
        for start in range(0, train.n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            if idx.size < 2:
                continue  # a singleton batch carries no contrastive signal
            labels = [train_labels[i] for i in idx]
            target = build_target_matrix(labels)
            loss, g_wi, g_wt = contrastive_loss(x_train[idx], t_train[idx], proj, target)
            optimizer.step([g_wi, g_wt])
            loss_sum += loss * idx.size
            count += idx.size
        train_loss = loss_sum / count if count else float("nan")
        val_loss = _full_batch_loss(x_val, t_val, val_labels, proj)
        entries.append(EpochRecord(epoch, train_loss, val_loss, lr_used))

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_w = (proj.w_image.copy(), proj.w_text.copy())
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        scheduler.step(val_loss)
        if epochs_since_best >= EARLY_STOP_PATIENCE:
            break

    best = ProjectionPair(best_w[0], best_w[1], logit_scale)
    log = TrainLog(tuple(entries), best_epoch, best_val)
    return best, log


def save_checkpoint(
    proj: ProjectionPair,
    path: str | Path,
    config: TrainConfig | None = None,
    best_val_loss: float | None = None,
) -> None:
    """Persist a projection pair: both matrices stacked in one container
    (image rows first), with training metadata in a JSON sidecar."""
    import json

    d = proj.dim
    write_matrix_container(np.vstack([proj.w_image, proj.w_text]), path)
    meta = {
        "d": d,
        "logit_scale": proj.logit_scale,
        "config": asdict(config) if config is not None else None,
        "best_val_loss": best_val_loss,
    }
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=1))


def load_checkpoint(path: str | Path) -> tuple[ProjectionPair, dict]:
    """Load a projection-pair checkpoint; returns the pair and its metadata."""
    import json

    stacked = read_matrix_container(path)
    sidecar = Path(str(path) + ".meta.json")
    if not sidecar.exists():
        raise EmbeddingFormatError(f"missing checkpoint sidecar {sidecar}")
    meta = json.loads(sidecar.read_text())
    d = int(meta["d"])
    if stacked.shape != (2 * d, d):
        raise EmbeddingFormatError(
            f"checkpoint shape {stacked.shape} does not match d={d}"
        )
    proj = ProjectionPair(
        stacked[:d], stacked[d:], float(meta.get("logit_scale", DEFAULT_LOGIT_SCALE))
    )
    return proj, meta
