"""Per-image concept-contribution explanations.

The melanoma score decomposes exactly as intercept plus the sum of
coefficient-times-score products, one per concept; that raw signed product
is the contribution shown. Renderers emit a fixed-width signed bar table,
a lossless JSON dump, or a CSV with one row per concept.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .strategies import ConceptSet, MelanomaHead


@dataclass(frozen=True)
class Contribution:
    concept: str
    score: float
    coefficient: float
    contribution: float


@dataclass(frozen=True)
class Explanation:
    image_id: str
    contributions: tuple[Contribution, ...]
    intercept: float
    total: float
    threshold: float
    verdict: int


def explain_prediction(
    p: np.ndarray, head: MelanomaHead, concepts: ConceptSet, image_id: str
) -> Explanation:
    """Decompose the melanoma score for one image into per-concept terms,
    sorted by descending contribution magnitude."""
    scores = np.asarray(p, dtype=np.float64).reshape(-1)
    if scores.size != concepts.size:
        raise ValueError(
            f"{scores.size} concept scores but {concepts.size} concept names"
        )
    if head.coefficients.size != concepts.size:
        raise ValueError(
            f"{head.coefficients.size} coefficients but {concepts.size} concepts"
        )
    terms = head.coefficients * scores
    order = np.argsort(-np.abs(terms), kind="stable")
    contributions = tuple(
        Contribution(
            concept=concepts.names[i],
            score=float(scores[i]),
            coefficient=float(head.coefficients[i]),
            contribution=float(terms[i]),
        )
        for i in order
    )
    total = float(head.intercept + terms.sum())
    return Explanation(
        image_id=image_id,
        contributions=contributions,
        intercept=float(head.intercept),
        total=total,
        threshold=float(head.threshold),
        verdict=int(total >= head.threshold),
    )


_BAR_WIDTH = 24


def _bar(value: float, scale: float) -> str:
    if scale <= 0:
        return ""
    n = int(round(abs(value) / scale * _BAR_WIDTH))
    return ("+" if value >= 0 else "-") * n


def render_explanation(e: Explanation, format: str = "text") -> str:
    """Render as 'text' (signed bar table with a "(bias)" row), 'json'
    (lossless field dump), or 'csv' (concept,score,coefficient,contribution)."""
    if format == "json":
        payload = {
            "image_id": e.image_id,
            "contributions": [
                {
                    "concept": c.concept,
                    "score": c.score,
                    "coefficient": c.coefficient,
                    "contribution": c.contribution,
                }
                for c in e.contributions
            ],
            "intercept": e.intercept,
            "total": e.total,
            "threshold": e.threshold,
            "verdict": e.verdict,
        }
        return json.dumps(payload, indent=1, sort_keys=True)

    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["concept", "score", "coefficient", "contribution"])
        for c in e.contributions:
            writer.writerow(
                [c.concept, repr(c.score), repr(c.coefficient), repr(c.contribution)]
            )
        return buf.getvalue()

    if format == "text":
        width = max(
            [len("(bias)")] + [len(c.concept) for c in e.contributions]
        )
        magnitudes = [abs(c.contribution) for c in e.contributions] + [abs(e.intercept)]
        scale = max(magnitudes) if magnitudes else 0.0
        lines = [f"image {e.image_id}"]
        for c in e.contributions:
            lines.append(
                f"{c.concept:<{width}}  {c.contribution:+10.4f}  {_bar(c.contribution, scale)}"
            )
        lines.append(f"{'(bias)':<{width}}  {e.intercept:+10.4f}  {_bar(e.intercept, scale)}")
        lines.append(
            f"{'total':<{width}}  {e.total:+10.4f}  "
            f"({'melanoma' if e.verdict else 'other'}, threshold {e.threshold:+.4f})"
        )
        return "\n".join(lines) + "\n"

    raise ValueError(f"unknown format {format!r}")


def parse_explanation_json(text: str) -> Explanation:
    """Inverse of the json renderer; round-trips field-equal."""
    payload = json.loads(text)
    return Explanation(
        image_id=payload["image_id"],
        contributions=tuple(
            Contribution(
                concept=c["concept"],
                score=c["score"],
                coefficient=c["coefficient"],
                contribution=c["contribution"],
            )
            for c in payload["contributions"]
        ),
        intercept=payload["intercept"],
        total=payload["total"],
        threshold=payload["threshold"],
        verdict=payload["verdict"],
    )
