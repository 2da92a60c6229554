"""Diagnostic strategies over projected embeddings.

Three ways to turn an image embedding into a decision:

* baseline: argmax cosine similarity against the class-name text embeddings.
* concept bottleneck: score the image against each clinical concept, then
  feed the concept-score vector through a learned linear head and threshold
  the resulting melanoma score.
* descriptor variant: a concept's score is the mean similarity over its
  descriptor sentences instead of the bare concept name.

Concept sets live in a JSON file naming each concept and its descriptors;
their embeddings are joined from an embedding file by id convention
(``concept:<name>`` and ``descriptor:<name>:<index>``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingSet, LabelSpace
from .errors import ConfigurationError
from .linalg import pairwise_cosine
from .training import ProjectionPair, apply_projection


@dataclass(frozen=True)
class ConceptSet:
    """Named clinical concepts with optional descriptor sentences and their
    text embeddings (raw, pre-projection)."""

    names: tuple[str, ...]
    concept_embeddings: np.ndarray
    descriptor_embeddings: tuple[np.ndarray, ...] = ()
    descriptors: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        m = np.asarray(self.concept_embeddings, dtype=np.float64)
        object.__setattr__(self, "concept_embeddings", m)
        if m.ndim != 2 or m.shape[0] != len(self.names):
            raise ConfigurationError(
                f"concept embedding matrix shape {m.shape} does not match "
                f"{len(self.names)} concept names"
            )
        if len(self.descriptor_embeddings) not in (0, len(self.names)):
            raise ConfigurationError(
                "descriptor embeddings must be given for all concepts or none"
            )

    @property
    def size(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class MelanomaHead:
    """Linear read-out over concept scores: V = coefficients . p + intercept,
    melanoma iff V >= threshold."""

    coefficients: np.ndarray
    intercept: float
    threshold: float

    def __post_init__(self):
        w = np.asarray(self.coefficients, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "coefficients", w)

    def score(self, concept_scores: np.ndarray) -> float:
        p = np.asarray(concept_scores, dtype=np.float64).reshape(-1)
        if p.shape != self.coefficients.shape:
            raise ConfigurationError(
                f"expected {self.coefficients.size} concept scores, got {p.size}"
            )
        return float(self.coefficients @ p + self.intercept)


@dataclass(frozen=True)
class Prediction:
    label: str
    score: float
    tie: bool = False
    concept_scores: np.ndarray | None = None


def predict_baseline(
    image_emb: np.ndarray,
    class_texts: EmbeddingSet | np.ndarray,
    proj: ProjectionPair,
    space: "LabelSpace | None" = None,
) -> Prediction:
    """Assign the class whose projected text embedding is most cosine-similar
    to the projected image embedding. Ties resolve to the lowest class index
    and are flagged on the prediction.

    Class names come from the label space when given, else from the
    embedding set's ids (a bare matrix requires a space).
    """
    if isinstance(class_texts, EmbeddingSet):
        matrix = class_texts.matrix
        names = space.classes if space is not None else class_texts.ids
    else:
        if space is None:
            raise ConfigurationError("bare class-text matrix needs a label space")
        matrix = np.atleast_2d(np.asarray(class_texts, dtype=np.float64))
        names = space.classes
    if len(names) != matrix.shape[0]:
        raise ConfigurationError(
            f"{matrix.shape[0]} class-text rows but {len(names)} class names"
        )
    img = apply_projection(proj, np.atleast_2d(image_emb), "image")
    txt = apply_projection(proj, matrix, "text")
    sims = pairwise_cosine(img, txt)[0]
    best = int(np.argmax(sims))
    tie = bool(np.any(sims[best + 1 :] == sims[best]))
    return Prediction(label=names[best], score=float(sims[best]), tie=tie)


def baseline_similarities(
    images: np.ndarray, class_texts: EmbeddingSet, proj: ProjectionPair
) -> np.ndarray:
    """All pairwise projected cosine similarities, images x classes."""
    img = apply_projection(proj, np.atleast_2d(images), "image")
    txt = apply_projection(proj, class_texts.matrix, "text")
    return pairwise_cosine(img, txt)


def concept_scores_cbm(
    image_emb: np.ndarray,
    concepts: ConceptSet,
    proj: ProjectionPair,
) -> np.ndarray:
    """Concept scores from the concept-name embeddings: entry c is the cosine
    between the projected image and the projected name of concept c."""
    img = apply_projection(proj, np.atleast_2d(image_emb), "image")
    txt = apply_projection(proj, concepts.concept_embeddings, "text")
    return pairwise_cosine(img, txt)[0]


def concept_scores_gpt(
    image_emb: np.ndarray,
    concepts: ConceptSet,
    proj: ProjectionPair,
) -> np.ndarray:
    """Concept scores from descriptor sentences: entry c is the mean cosine
    between the projected image and concept c's projected descriptors."""
    if len(concepts.descriptor_embeddings) != concepts.size:
        raise ConfigurationError("concept set has no descriptor embeddings")
    img = apply_projection(proj, np.atleast_2d(image_emb), "image")
    scores = np.empty(concepts.size, dtype=np.float64)
    for c, desc in enumerate(concepts.descriptor_embeddings):
        d = np.asarray(desc, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] == 0:
            raise ConfigurationError(
                f"concept {concepts.names[c]!r} has no descriptors"
            )
        txt = apply_projection(proj, d, "text")
        scores[c] = pairwise_cosine(img, txt)[0].mean()
    return scores


def concept_score_matrix(
    images: np.ndarray,
    concepts: ConceptSet,
    proj: ProjectionPair,
    route: str = "cbm",
) -> np.ndarray:
    """Concept scores for a whole batch (N x N_C). Route 'cbm' scores
    against concept names, 'gpt' against descriptor means."""
    img = apply_projection(proj, np.atleast_2d(images), "image")
    if route == "cbm":
        txt = apply_projection(proj, concepts.concept_embeddings, "text")
        return pairwise_cosine(img, txt)
    if route == "gpt":
        if len(concepts.descriptor_embeddings) != concepts.size:
            raise ConfigurationError("concept set has no descriptor embeddings")
        cols = []
        for c, desc in enumerate(concepts.descriptor_embeddings):
            d = np.asarray(desc, dtype=np.float64)
            if d.ndim != 2 or d.shape[0] == 0:
                raise ConfigurationError(
                    f"concept {concepts.names[c]!r} has no descriptors"
                )
            txt = apply_projection(proj, d, "text")
            cols.append(pairwise_cosine(img, txt).mean(axis=1))
        return np.column_stack(cols)
    raise ValueError(f"unknown route {route!r}")


def predict_bottleneck(
    concept_scores: np.ndarray,
    head: MelanomaHead,
    positive_label: str = "melanoma",
    negative_label: str = "other",
) -> Prediction:
    """Threshold the head's melanoma score; the boundary itself is positive.
    The concept scores ride along for explanation."""
    p = np.asarray(concept_scores, dtype=np.float64).reshape(-1)
    v = head.score(p)
    label = positive_label if v >= head.threshold else negative_label
    return Prediction(label=label, score=v, concept_scores=p)


def load_concept_set(concepts_path: str | Path, embeddings: EmbeddingSet) -> ConceptSet:
    """Join a concept-list JSON file with its text embeddings.

    The JSON holds ``{"concepts": [{"name": ..., "descriptors": [...]}, ...]}``;
    embeddings are looked up by id as ``concept:<name>`` and
    ``descriptor:<name>:<index>``. Missing rows are configuration errors.
    """
    try:
        spec = json.loads(Path(concepts_path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"concept file {concepts_path} is not valid JSON: {exc}")
    entries = spec.get("concepts")
    if not isinstance(entries, list) or not entries:
        raise ConfigurationError(f"concept file {concepts_path} has no concepts")

    names: list[str] = []
    concept_rows: list[np.ndarray] = []
    descriptor_mats: list[np.ndarray] = []
    descriptor_texts: list[tuple[str, ...]] = []
    has_descriptors = False
    for entry in entries:
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise ConfigurationError("every concept needs a nonempty name")
        if name in names:
            raise ConfigurationError(f"duplicate concept name {name!r}")
        names.append(name)
        try:
            concept_rows.append(embeddings.row_for(f"concept:{name}"))
        except KeyError:
            raise ConfigurationError(
                f"no embedding with id 'concept:{name}' for concept {name!r}"
            )
        descs = entry.get("descriptors", [])
        descriptor_texts.append(tuple(descs))
        if descs:
            has_descriptors = True
        rows = []
        for i in range(len(descs)):
            try:
                rows.append(embeddings.row_for(f"descriptor:{name}:{i}"))
            except KeyError:
                raise ConfigurationError(
                    f"no embedding with id 'descriptor:{name}:{i}' for "
                    f"concept {name!r}"
                )
        descriptor_mats.append(
            np.asarray(rows, dtype=np.float64)
            if rows
            else np.empty((0, embeddings.dim), dtype=np.float64)
        )

    return ConceptSet(
        names=tuple(names),
        concept_embeddings=np.asarray(concept_rows, dtype=np.float64),
        descriptor_embeddings=tuple(descriptor_mats) if has_descriptors else (),
        descriptors=tuple(descriptor_texts),
    )


def save_head(head: MelanomaHead, path: str | Path) -> None:
    payload = {
        "coefficients": [float(c) for c in head.coefficients],
        "intercept": float(head.intercept),
        "threshold": float(head.threshold),
    }
    Path(path).write_text(json.dumps(payload, indent=1))


def load_head(path: str | Path) -> MelanomaHead:
    """Read a head file; a missing intercept defaults to zero."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"head file {path} is not valid JSON: {exc}")
    try:
        coeffs = payload["coefficients"]
        threshold = payload["threshold"]
    except KeyError as exc:
        raise ConfigurationError(f"head file {path} is missing key {exc}")
    return MelanomaHead(
        coefficients=np.asarray(coeffs, dtype=np.float64),
        intercept=float(payload.get("intercept", 0.0)),
        threshold=float(threshold),
    )
