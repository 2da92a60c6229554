"""Encoder backends.

Two families are selectable by model tag:

* ``toy-<d>`` — a self-contained deterministic encoder for pipelines and
  tests that must run offline: images are resized to 32x32, scaled to
  [0,1], flattened, and sent through a fixed random projection derived
  from the tag; texts map to a vector drawn from an RNG seeded by
  hashing the tag and the text. No external weights, bit-stable across
  runs and platforms.
* any other tag — a CLIP-family checkpoint loaded through the
  ``transformers`` library (install the ``hf`` extra), run in eval mode
  under no_grad so repeated encodes are deterministic.

Both return one float row vector per input, in input order.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

from .errors import ExportError

_TOY_SIDE = 32


def _seed_from(key: str) -> int:
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


class ToyEncoder:
    """Deterministic offline stand-in with a CLIP-shaped interface."""

    def __init__(self, tag: str, dim: int):
        if dim < 1:
            raise ExportError(f"toy encoder dimension must be >= 1, got {dim}")
        self.tag = tag
        self.dim = dim
        flat = _TOY_SIDE * _TOY_SIDE * 3
        rng = np.random.default_rng(_seed_from(f"{tag}/image-projection"))
        self._projection = rng.standard_normal((flat, dim)) / np.sqrt(flat)

    def encode_images(self, arrays: list[np.ndarray]) -> np.ndarray:
        rows = np.empty((len(arrays), self.dim), dtype=np.float64)
        for i, arr in enumerate(arrays):
            small = Image.fromarray(arr).resize(
                (_TOY_SIDE, _TOY_SIDE), Image.BILINEAR
            )
            flat = np.asarray(small, dtype=np.float64).reshape(-1) / 255.0
            rows[i] = flat @ self._projection
        return rows

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        rows = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            rng = np.random.default_rng(_seed_from(f"{self.tag}/text/{text}"))
            rows[i] = rng.standard_normal(self.dim) / np.sqrt(self.dim)
        return rows


class HuggingFaceClipEncoder:
    """CLIP-family checkpoint via transformers, in deterministic eval mode."""

    def __init__(self, tag: str):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ExportError(
                f"model tag {tag!r} needs the transformers backend; "
                f"install the 'hf' extra ({exc})"
            )
        self._torch = torch
        self.tag = tag
        self._model = CLIPModel.from_pretrained(tag)
        self._model.eval()
        self._processor = CLIPProcessor.from_pretrained(tag)
        self.dim = int(self._model.config.projection_dim)

    def encode_images(self, arrays: list[np.ndarray]) -> np.ndarray:
        images = [Image.fromarray(arr) for arr in arrays]
        batch = self._processor(images=images, return_tensors="pt")
        with self._torch.no_grad():
            features = self._model.get_image_features(**batch)
        return features.cpu().numpy().astype(np.float64)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        batch = self._processor(text=texts, return_tensors="pt", padding=True)
        with self._torch.no_grad():
            features = self._model.get_text_features(**batch)
        return features.cpu().numpy().astype(np.float64)


def get_encoder(tag: str):
    """Encoder instance for a model tag; ``toy-<d>`` stays offline."""
    if tag.startswith("toy-"):
        suffix = tag[len("toy-") :]
        try:
            dim = int(suffix)
        except ValueError:
            raise ExportError(
                f"bad toy encoder tag {tag!r}: expected toy-<dimension>"
            )
        return ToyEncoder(tag, dim)
    return HuggingFaceClipEncoder(tag)
