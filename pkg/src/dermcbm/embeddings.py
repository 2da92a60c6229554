"""Load, validate, and persist embedding matrices in the EMB1 container.

EMB1 layout (little-endian, no padding):

    bytes 0-3    magic ASCII "EMB1"
    bytes 4-7    u32 version, must be 1
    bytes 8-11   u32 N (row count)
    bytes 12-15  u32 d (column count)
    then         N*d float32 values, row-major; EOF immediately after

Row identifiers, optional labels, and provenance live in a JSON sidecar at
``<path>.meta.json``. Values are stored at 32-bit precision and widened to
float64 in memory.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmbeddingFormatError, NumericalDegeneracyError

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class EmbeddingSet:
    """An N x d matrix of encoder outputs with per-row ids and labels.

    Immutable after construction; safe to share across threads. ``labels``
    is either None or a list aligned with ``ids``.
    """

    ids: tuple[str, ...]
    matrix: np.ndarray
    labels: tuple[str, ...] | None = None
    encoder_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
        m = np.asarray(self.matrix, dtype=np.float64)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def validate(self) -> None:
        if self.matrix.ndim != 2:
            raise EmbeddingFormatError(
                f"matrix must be 2-D, got shape {self.matrix.shape}"
            )
        n, d = self.matrix.shape
        if n == 0:
            raise EmbeddingFormatError("empty embedding set (N=0) rejected")
        if d == 0:
            raise EmbeddingFormatError("zero-dimensional embeddings rejected")
        if len(self.ids) != n:
            raise EmbeddingFormatError(
                f"ids length {len(self.ids)} != row count {n}"
            )
        if self.labels is not None and len(self.labels) != n:
            raise EmbeddingFormatError(
                f"labels length {len(self.labels)} != row count {n}"
            )
        finite = np.isfinite(self.matrix).all(axis=1)
        if not finite.all():
            row = int(np.nonzero(~finite)[0][0])
            raise EmbeddingFormatError(f"non-finite value in row {row}")
        seen: dict[str, int] = {}
        for i, rid in enumerate(self.ids):
            if rid in seen:
                raise EmbeddingFormatError(
                    f"duplicate id {rid!r} at rows {seen[rid]} and {i}"
                )
            seen[rid] = i

    def row_for(self, rid: str) -> np.ndarray:
        """Row vector for an id; raises KeyError if absent."""
        try:
            return self.matrix[self.ids.index(rid)]
        except ValueError:
            raise KeyError(rid) from None


@dataclass(frozen=True)
class LabelSpace:
    """Ordered class names plus the one treated as the positive (melanoma)
    class."""

    classes: tuple[str, ...]
    positive_class: str

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class names must be unique")
        if self.positive_class not in self.classes:
            raise ValueError(
                f"positive class {self.positive_class!r} not in classes"
            )

    @property
    def positive_index(self) -> int:
        return self.classes.index(self.positive_class)


def write_matrix_container(matrix: np.ndarray, path: str | Path) -> None:
    """Write the binary part of an EMB1 container (no sidecar)."""
    m = np.ascontiguousarray(matrix, dtype="<f4")
    n, d = m.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, n, d))
        f.write(m.tobytes())


def read_matrix_container(path: str | Path) -> np.ndarray:
    """Read the binary part of an EMB1 container, widened to float64.

    Raises EmbeddingFormatError with the byte offset of the problem for a
    bad magic, unsupported version, short payload, or trailing bytes.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise EmbeddingFormatError(
            f"{path}: truncated header, {len(raw)} bytes < {_HEADER.size}"
        )
    magic, version, n, d = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise EmbeddingFormatError(
            f"{path}: bad magic {magic!r} at byte offset 0"
        )
    if version != VERSION:
        raise EmbeddingFormatError(
            f"{path}: unsupported version {version} at byte offset 4"
        )
    if n == 0:
        raise EmbeddingFormatError(f"{path}: empty embedding set (N=0) rejected")
    if d == 0:
        raise EmbeddingFormatError(f"{path}: zero-dimensional rows rejected")
    expected = n * d * 4
    payload = len(raw) - _HEADER.size
    if payload < expected:
        raise EmbeddingFormatError(
            f"{path}: payload size mismatch, declared {n}x{d} needs "
            f"{expected} bytes but {payload} follow the header"
        )
    if payload > expected:
        raise EmbeddingFormatError(
            f"{path}: {payload - expected} trailing bytes after the declared "
            f"payload (byte offset {_HEADER.size + expected})"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return values.astype(np.float64).reshape(n, d)


def _sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".meta.json")


def save_embeddings(emb: EmbeddingSet, path: str | Path) -> None:
    """Persist a set as EMB1 binary plus ``<path>.meta.json`` sidecar.

    Round-trips bit-exactly at 32-bit float precision.
    """
    emb.validate()
    write_matrix_container(emb.matrix, path)
    meta: dict = {"ids": list(emb.ids)}
    if emb.labels is not None:
        meta["labels"] = list(emb.labels)
    if emb.encoder_tag:
        meta["encoder_tag"] = emb.encoder_tag
    _sidecar_path(path).write_text(json.dumps(meta, indent=1))


def load_embeddings(path: str | Path) -> EmbeddingSet:
    """Load and validate an EMB1 file plus its sidecar."""
    matrix = read_matrix_container(path)
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise EmbeddingFormatError(f"missing sidecar {sidecar}")
    try:
        meta = json.loads(sidecar.read_text())
    except json.JSONDecodeError as e:
        raise EmbeddingFormatError(f"{sidecar}: invalid JSON ({e})") from e
    if not isinstance(meta, dict) or "ids" not in meta:
        raise EmbeddingFormatError(f"{sidecar}: missing 'ids' array")
    emb = EmbeddingSet(
        ids=tuple(meta["ids"]),
        matrix=matrix,
        labels=tuple(meta["labels"]) if "labels" in meta else None,
        encoder_tag=meta.get("encoder_tag", ""),
    )
    emb.validate()
    return emb


def take(emb: EmbeddingSet, indices) -> EmbeddingSet:
    """Subset of an embedding set at the given row indices, order preserved."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    return EmbeddingSet(
        ids=tuple(emb.ids[i] for i in idx),
        matrix=emb.matrix[idx].copy(),
        labels=tuple(emb.labels[i] for i in idx) if emb.labels is not None else None,
        encoder_tag=emb.encoder_tag,
    )


def l2_normalize_rows(m) -> np.ndarray:
    """Scale every row to unit Euclidean norm. Rejects all-zero rows."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected 2-D matrix, got shape {m.shape}")
    norms = np.linalg.norm(m, axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise NumericalDegeneracyError(f"row {int(zero[0])} has zero norm")
    return m / norms[:, None]
