"""Concept-bottleneck melanoma diagnosis over frozen encoder embeddings.

The pipeline: store image/text embeddings in a compact binary format,
train a pair of linear projections that pull matching image-label pairs
together, score images against clinical concepts, fit a sparse linear
head over those concept scores, and explain each diagnosis as signed
per-concept contributions.
"""

from .embeddings import (
    EmbeddingSet,
    LabelSpace,
    l2_normalize_rows,
    load_embeddings,
    read_matrix_container,
    save_embeddings,
    take,
    write_matrix_container,
)
from .errors import (
    ConfigurationError,
    DermcbmError,
    EmbeddingFormatError,
    NumericalDegeneracyError,
    StageError,
)
from .evaluation import (
    EvalReport,
    balanced_accuracy,
    balanced_accuracy_multiclass,
    multiclass_to_binary,
    roc_auc,
    stratified_kfold,
    stratified_split,
    stratified_subsample,
)
from .explanations import (
    Contribution,
    Explanation,
    explain_prediction,
    parse_explanation_json,
    render_explanation,
)
from .fitting import (
    FitConfig,
    fit_head_from_concepts,
    fit_logistic,
    predict_proba_binary,
    predict_proba_multiclass,
    tune_threshold,
)
from .linalg import cosine_similarity, matmul, pairwise_cosine
from .strategies import (
    ConceptSet,
    MelanomaHead,
    Prediction,
    concept_score_matrix,
    concept_scores_cbm,
    concept_scores_gpt,
    load_concept_set,
    load_head,
    predict_baseline,
    predict_bottleneck,
    save_head,
)
from .training import (
    AdamW,
    EpochRecord,
    PlateauScheduler,
    ProjectionPair,
    TargetMatrix,
    TrainConfig,
    TrainLog,
    apply_projection,
    build_target_matrix,
    contrastive_loss,
    load_checkpoint,
    save_checkpoint,
    train_projections,
)

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "ConceptSet",
    "ConfigurationError",
    "Contribution",
    "DermcbmError",
    "EmbeddingFormatError",
    "EmbeddingSet",
    "EpochRecord",
    "EvalReport",
    "Explanation",
    "FitConfig",
    "LabelSpace",
    "MelanomaHead",
    "NumericalDegeneracyError",
    "PlateauScheduler",
    "Prediction",
    "ProjectionPair",
    "StageError",
    "TargetMatrix",
    "TrainConfig",
    "TrainLog",
    "apply_projection",
    "balanced_accuracy",
    "balanced_accuracy_multiclass",
    "build_target_matrix",
    "concept_score_matrix",
    "concept_scores_cbm",
    "concept_scores_gpt",
    "contrastive_loss",
    "cosine_similarity",
    "explain_prediction",
    "fit_head_from_concepts",
    "fit_logistic",
    "l2_normalize_rows",
    "load_checkpoint",
    "load_concept_set",
    "load_embeddings",
    "load_head",
    "matmul",
    "multiclass_to_binary",
    "pairwise_cosine",
    "parse_explanation_json",
    "predict_baseline",
    "predict_bottleneck",
    "predict_proba_binary",
    "predict_proba_multiclass",
    "read_matrix_container",
    "render_explanation",
    "roc_auc",
    "save_checkpoint",
    "save_embeddings",
    "save_head",
    "stratified_kfold",
    "stratified_split",
    "stratified_subsample",
    "take",
    "train_projections",
    "tune_threshold",
    "write_matrix_container",
]
