"""Encode images and texts with a CLIP-family encoder and write EMB1
embedding files with JSON sidecars."""

from .encoders import HuggingFaceClipEncoder, ToyEncoder, get_encoder
from .errors import ExportError, ManifestError
from .export import export_images, export_texts, load_image_array
from .manifest import (
    ImageRecord,
    TextRecord,
    read_image_manifest,
    read_text_manifest,
)
from .writer import write_emb

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "HuggingFaceClipEncoder",
    "ImageRecord",
    "ManifestError",
    "TextRecord",
    "ToyEncoder",
    "export_images",
    "export_texts",
    "get_encoder",
    "load_image_array",
    "read_image_manifest",
    "read_text_manifest",
    "write_emb",
]
