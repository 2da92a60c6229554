"""Synthetic data builders shared across test modules."""

import numpy as np

from dermcbm import EmbeddingSet

D = 16
SIGMA = 0.1

# class centroids 60 degrees apart; class texts on separate axes
_C0 = np.zeros(D)
_C0[0] = 1.0
_C1 = np.zeros(D)
_C1[0] = np.cos(np.pi / 3)
_C1[1] = np.sin(np.pi / 3)
_T0 = np.zeros(D)
_T0[2] = 1.0
_T1 = np.zeros(D)
_T1[3] = 1.0

NEGATIVE = "other"
POSITIVE = "melanoma"


def two_class_images(n: int, seed: int, sigma: float = SIGMA, prefix: str = "img") -> EmbeddingSet:
    """n image embeddings, half per class, noisy around the two centroids."""
    rng = np.random.default_rng(seed)
    half = n // 2
    rows, labels, ids = [], [], []
    for i in range(n):
        centroid, label = (_C0, NEGATIVE) if i < half else (_C1, POSITIVE)
        rows.append(centroid + sigma * rng.standard_normal(D))
        labels.append(label)
        ids.append(f"{prefix}{seed}_{i}")
    return EmbeddingSet(
        ids=tuple(ids), matrix=np.asarray(rows), labels=tuple(labels)
    )


def class_texts() -> EmbeddingSet:
    return EmbeddingSet(ids=(NEGATIVE, POSITIVE), matrix=np.vstack([_T0, _T1]))


def concept_embedding_rows(seed: int = 99):
    """Four concepts: two aligned with the image centroids, two with the
    class-text axes, each with two jittered descriptors. Returns (names,
    id->row mapping) ready for an embedding file."""
    rng = np.random.default_rng(seed)
    directions = {
        "regular_network": _C0,
        "atypical_network": _C1,
        "symmetric_pattern": _T0,
        "blue_whitish_veil": _T1,
    }
    rows = {}
    for name, direction in directions.items():
        rows[f"concept:{name}"] = direction
        for i in range(2):
            rows[f"descriptor:{name}:{i}"] = direction + 0.05 * rng.standard_normal(D)
    return list(directions), rows


def build_cli_workspace(
    tmp_path,
    n_images: int = 96,
    seeds=(0,),
    strategies=("baseline", "cbm", "gpt_cbm", "linear_probe"),
    projections=None,
    split=None,
    train=None,
    extra=None,
):
    """Write a complete synthetic experiment (embeddings, concepts, config)
    under tmp_path and return the config path."""
    import json

    from dermcbm import save_embeddings

    images = two_class_images(n_images, seed=11)
    save_embeddings(images, tmp_path / "images.emb")
    save_embeddings(class_texts(), tmp_path / "class_texts.emb")

    names, rows = concept_embedding_rows()
    ids = tuple(rows)
    save_embeddings(
        EmbeddingSet(ids=ids, matrix=np.asarray([rows[i] for i in ids])),
        tmp_path / "concept_texts.emb",
    )
    (tmp_path / "concepts.json").write_text(
        json.dumps(
            {
                "concepts": [
                    {"name": name, "descriptors": [f"{name} phrasing {i}" for i in range(2)]}
                    for name in names
                ]
            }
        )
    )

    config = {
        "images": "images.emb",
        "class_texts": "class_texts.emb",
        "concepts": {"file": "concepts.json", "embeddings": "concept_texts.emb"},
        "label_space": {"classes": [NEGATIVE, POSITIVE], "positive_class": POSITIVE},
        "strategies": list(strategies),
        "split": split or {"mode": "holdout", "val_fraction": 0.25, "test_fraction": 0.25, "seed": 0},
        "projections": projections or {"mode": "identity"},
        "train": train or {"learning_rate": 1e-2, "batch_size": 16, "max_epochs": 15},
        "seeds": list(seeds),
        "output_dir": "out",
    }
    if extra:
        config.update(extra)
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config, indent=1))
    return config_path


def random_set(n: int, d: int, seed: int, with_labels: bool = True) -> EmbeddingSet:
    rng = np.random.default_rng(seed)
    labels = (
        tuple(rng.choice(["a", "b", "c"]) for _ in range(n)) if with_labels else None
    )
    return EmbeddingSet(
        ids=tuple(f"row{i}" for i in range(n)),
        matrix=rng.standard_normal((n, d)),
        labels=labels,
    )
