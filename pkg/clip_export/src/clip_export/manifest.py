"""Manifest CSVs naming what to encode.

Image manifests carry the columns ``id,path,label,mask`` (label and mask
cells may be empty; the mask column may be absent entirely). Text
manifests carry ``id,text``. File paths resolve relative to the
manifest's own directory, ids must be unique, and row order is the
output row order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: Path
    label: str = ""
    mask: Path | None = None


@dataclass(frozen=True)
class TextRecord:
    id: str
    text: str


def _rows_of(path: str | Path, required: tuple[str, ...]) -> tuple[Path, list[dict]]:
    p = Path(path)
    if not p.exists():
        raise ManifestError(f"manifest {p} does not exist")
    with open(p, newline="") as handle:
        reader = csv.DictReader(handle)
        headers = reader.fieldnames or []
        missing = [h for h in required if h not in headers]
        if missing:
            raise ManifestError(
                f"manifest {p} is missing required columns {missing} "
                f"(found {headers})"
            )
        rows = list(reader)
    if not rows:
        raise ManifestError(f"manifest {p} lists no rows")
    return p, rows


def _check_ids(rows: list[dict], manifest: Path) -> None:
    seen: dict[str, int] = {}
    for i, row in enumerate(rows):
        rid = (row.get("id") or "").strip()
        if not rid:
            raise ManifestError(f"manifest {manifest} row {i + 1} has an empty id")
        if rid in seen:
            raise ManifestError(
                f"duplicate id {rid!r} in manifest {manifest} "
                f"(rows {seen[rid] + 1} and {i + 1})"
            )
        seen[rid] = i


def read_image_manifest(path: str | Path) -> list[ImageRecord]:
    manifest, rows = _rows_of(path, ("id", "path"))
    _check_ids(rows, manifest)
    base = manifest.parent
    records = []
    for i, row in enumerate(rows):
        rel = (row.get("path") or "").strip()
        if not rel:
            raise ManifestError(f"manifest {manifest} row {i + 1} has an empty path")
        mask_rel = (row.get("mask") or "").strip()
        records.append(
            ImageRecord(
                id=row["id"].strip(),
                path=base / rel,
                label=(row.get("label") or "").strip(),
                mask=base / mask_rel if mask_rel else None,
            )
        )
    return records


def read_text_manifest(path: str | Path) -> list[TextRecord]:
    manifest, rows = _rows_of(path, ("id", "text"))
    _check_ids(rows, manifest)
    records = []
    for i, row in enumerate(rows):
        text = (row.get("text") or "").strip()
        if not text:
            raise ManifestError(
                f"manifest {manifest} row {i + 1} "
                f"(id {row['id'].strip()!r}) has an empty text"
            )
        records.append(TextRecord(id=row["id"].strip(), text=text))
    return records
