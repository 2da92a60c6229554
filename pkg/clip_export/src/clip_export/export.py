"""Top-level export operations.

Images are decoded, optionally masked (background pixels zeroed before
the encoder's standard preprocessing — masking changes the pixels the
encoder sees, not the crop), encoded, and written as one embedding row
per manifest row, in manifest order. Texts are encoded row by row the
same way. The sidecar carries labels (when every image has one) and the
encoder tag.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .encoders import get_encoder
from .errors import ExportError, ManifestError
from .manifest import ImageRecord, read_image_manifest, read_text_manifest
from .writer import write_emb


def load_image_array(record: ImageRecord) -> np.ndarray:
    """Decode one image to an RGB uint8 array, applying the lesion mask
    (zeroing pixels where the mask is zero) when the record names one."""
    try:
        with Image.open(record.path) as img:
            rgb = img.convert("RGB")
    except (FileNotFoundError, OSError, UnidentifiedImageError) as exc:
        raise ExportError(f"cannot read image {record.path}: {exc}")
    arr = np.asarray(rgb, dtype=np.uint8).copy()
    if record.mask is None:
        return arr
    try:
        with Image.open(record.mask) as mask_img:
            if mask_img.size != rgb.size:
                raise ExportError(
                    f"mask {record.mask} size {mask_img.size} does not match "
                    f"image {record.path} size {rgb.size}"
                )
            mask = np.asarray(mask_img.convert("L"))
    except (FileNotFoundError, OSError, UnidentifiedImageError) as exc:
        raise ExportError(f"cannot read mask {record.mask}: {exc}")
    arr[mask == 0] = 0
    return arr


def export_images(
    manifest_path: str | Path, model_tag: str, out_path: str | Path
) -> tuple[int, int]:
    """Encode every manifest image and write the embedding file.
    Returns (rows written, dimension)."""
    records = read_image_manifest(manifest_path)
    encoder = get_encoder(model_tag)
    arrays = [load_image_array(r) for r in records]
    matrix = encoder.encode_images(arrays)

    labeled = [r for r in records if r.label]
    if labeled and len(labeled) != len(records):
        unlabeled = next(r.id for r in records if not r.label)
        raise ManifestError(
            f"labels must be given for all images or none "
            f"(id {unlabeled!r} has no label)"
        )
    labels = tuple(r.label for r in records) if labeled else None
    write_emb(
        out_path,
        tuple(r.id for r in records),
        matrix,
        labels=labels,
        encoder_tag=model_tag,
    )
    return matrix.shape


def export_texts(
    manifest_path: str | Path, model_tag: str, out_path: str | Path
) -> tuple[int, int]:
    """Encode every manifest text and write the embedding file.
    Returns (rows written, dimension)."""
    records = read_text_manifest(manifest_path)
    encoder = get_encoder(model_tag)
    matrix = encoder.encode_texts([r.text for r in records])
    write_emb(
        out_path,
        tuple(r.id for r in records),
        matrix,
        encoder_tag=model_tag,
    )
    return matrix.shape
