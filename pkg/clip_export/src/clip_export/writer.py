"""Binary embedding container writer.

Layout: the 4 magic bytes ``EMB1``, then three little-endian u32 words
(format version 1, row count N, dimension d), then N*d float32 values
little-endian in row-major order, then end of file. A JSON sidecar at
``<path>.meta.json`` carries the row ids plus optional per-row labels
and the encoder tag. Writes are deterministic byte for byte.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ExportError

MAGIC = b"EMB1"
VERSION = 1


def write_emb(
    path: str | Path,
    ids: tuple[str, ...],
    matrix: np.ndarray,
    labels: tuple[str, ...] | None = None,
    encoder_tag: str = "",
) -> None:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ExportError(f"embedding matrix must be 2-d, got shape {m.shape}")
    n, d = m.shape
    if n == 0:
        raise ExportError("refusing to write an empty embedding set (N=0)")
    if len(ids) != n:
        raise ExportError(f"{len(ids)} ids for {n} rows")
    if len(set(ids)) != n:
        raise ExportError("ids must be unique")
    if labels is not None and len(labels) != n:
        raise ExportError(f"{len(labels)} labels for {n} rows")
    if not np.isfinite(m).all():
        bad = int(np.argwhere(~np.isfinite(m).all(axis=1))[0][0])
        raise ExportError(f"non-finite embedding value in row {bad}")

    out = Path(path)
    payload = m.astype("<f4").tobytes(order="C")
    with open(out, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<III", VERSION, n, d))
        handle.write(payload)

    meta: dict = {"ids": list(ids)}
    if labels is not None:
        meta["labels"] = list(labels)
    if encoder_tag:
        meta["encoder_tag"] = encoder_tag
    Path(str(out) + ".meta.json").write_text(
        json.dumps(meta, indent=1, sort_keys=True) + "\n"
    )
