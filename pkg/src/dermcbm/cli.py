"""Command-line orchestrator for the full diagnostic pipeline.

A single declarative JSON config names every input file, the label space,
the requested strategies, the split scheme, and all hyperparameters.
Subcommands cover each stage (train projections, fit the head, tune the
threshold, evaluate, sweep training-set sizes, explain one image, run the
linear probe, validate the config). Every artifact under the output
directory is byte-reproducible for a fixed config: timestamps go to
run.log only, and report JSON is written with sorted keys.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import embeddings as emb_io
from .embeddings import EmbeddingSet, LabelSpace, load_embeddings, write_matrix_container
from .errors import (
    ConfigurationError,
    DermcbmError,
    EmbeddingFormatError,
    NumericalDegeneracyError,
    StageError,
)
from .evaluation import (
    balanced_accuracy,
    balanced_accuracy_multiclass,
    multiclass_to_binary,
    roc_auc,
    stratified_kfold,
    stratified_split,
    stratified_subsample,
)
from .explanations import explain_prediction, render_explanation
from .fitting import (
    FitConfig,
    fit_head_from_concepts,
    fit_logistic,
    predict_proba_binary,
    predict_proba_multiclass,
)
from .strategies import (
    ConceptSet,
    MelanomaHead,
    concept_score_matrix,
    load_concept_set,
    load_head,
    save_head,
)
from .training import (
    DEFAULT_LOGIT_SCALE,
    ProjectionPair,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    text_lookup,
    train_projections,
)

CBM_FAMILY = ("cbm", "gpt_cbm")
KNOWN_STRATEGIES = ("baseline", "cbm", "gpt_cbm", "linear_probe")


@dataclass
class SplitIndices:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    tag: str


@dataclass
class ExperimentConfig:
    images_path: str
    class_texts_path: str
    label_space: LabelSpace
    strategies: list[str]
    split: dict
    seeds: list[int]
    output_dir: str
    concepts_file: str | None = None
    concept_embeddings_path: str | None = None
    projections: dict = field(default_factory=lambda: {"mode": "train"})
    train_args: dict = field(default_factory=dict)
    fit_config: FitConfig = field(default_factory=FitConfig)
    sweep_sizes: list[int] = field(default_factory=list)
    raw: dict = field(default_factory=dict)


def parse_experiment_config(raw: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed JSON dict; paths resolve
    relative to the config file's directory."""
    base = Path(base_dir)

    def path_of(value):
        return str(base / value) if value is not None else None

    try:
        space = LabelSpace(
            classes=tuple(raw["label_space"]["classes"]),
            positive_class=raw["label_space"]["positive_class"],
        )
        concepts = raw.get("concepts") or {}
        config = ExperimentConfig(
            images_path=path_of(raw["images"]),
            class_texts_path=path_of(raw["class_texts"]),
            label_space=space,
            strategies=list(raw.get("strategies", ["baseline"])),
            split=dict(raw.get("split", {"mode": "holdout"})),
            seeds=[int(s) for s in raw.get("seeds", [0])],
            output_dir=path_of(raw.get("output_dir", "out")),
            concepts_file=path_of(concepts.get("file")),
            concept_embeddings_path=path_of(concepts.get("embeddings")),
            projections=dict(raw.get("projections", {"mode": "train"})),
            train_args=dict(raw.get("train", {})),
            fit_config=FitConfig(**raw.get("fit", {})),
            sweep_sizes=[int(s) for s in raw.get("sweep_sizes", [])],
            raw=raw,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed experiment config: {exc}")
    if config.projections.get("checkpoint"):
        config.projections["checkpoint"] = path_of(config.projections["checkpoint"])
    if not config.seeds:
        raise ConfigurationError("config lists no seeds")
    return config


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"config file {p} does not exist")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {p} is not valid JSON: {exc}")
    return parse_experiment_config(raw, p.parent)


def validate_config(config: ExperimentConfig) -> list[str]:
    """Collect every inconsistency in the config without side effects."""
    findings: list[str] = []

    for name in config.strategies:
        if name not in KNOWN_STRATEGIES:
            findings.append(f"unknown strategy {name!r}")
    if not config.strategies:
        findings.append("no strategies requested")

    dims: dict[str, int] = {}

    def check_emb(path, role):
        if path is None:
            findings.append(f"no {role} file configured")
            return None
        if not Path(path).exists():
            findings.append(f"{role} file {path} does not exist")
            return None
        try:
            loaded = load_embeddings(path)
        except DermcbmError as exc:
            findings.append(f"{role} file {path} unreadable: {exc}")
            return None
        dims[path] = loaded.dim
        return loaded

    images = check_emb(config.images_path, "image embeddings")
    texts = check_emb(config.class_texts_path, "class-text embeddings")

    if len(set(dims.values())) > 1:
        parts = ", ".join(f"{p} has d={d}" for p, d in dims.items())
        findings.append(f"embedding dimension mismatch: {parts}")

    if images is not None and images.labels is None:
        findings.append(f"image embeddings {config.images_path} carry no labels")
    if images is not None and images.labels is not None:
        unknown = sorted(set(images.labels) - set(config.label_space.classes))
        if unknown:
            findings.append(f"image labels {unknown} not in label space")
    if texts is not None:
        missing = [c for c in config.label_space.classes if c not in texts.ids]
        if missing:
            findings.append(
                f"class-text embeddings missing ids for classes {missing}"
            )

    needs_concepts = any(s in CBM_FAMILY for s in config.strategies)
    if needs_concepts:
        if config.concepts_file is None or config.concept_embeddings_path is None:
            findings.append(
                "cbm-family strategy requested but concept file or concept "
                "embeddings not configured"
            )
        else:
            cemb = check_emb(config.concept_embeddings_path, "concept embeddings")
            if Path(config.concepts_file).exists():
                if cemb is not None:
                    try:
                        cset = load_concept_set(config.concepts_file, cemb)
                        if "gpt_cbm" in config.strategies and not cset.descriptor_embeddings:
                            findings.append(
                                "gpt_cbm requested but no concept has descriptors"
                            )
                    except DermcbmError as exc:
                        findings.append(str(exc))
            else:
                findings.append(f"concept file {config.concepts_file} does not exist")
        if len(set(dims.values())) > 1:
            parts = ", ".join(f"{p} has d={d}" for p, d in sorted(dims.items()))
            findings.append(f"embedding dimension mismatch: {parts}")

    mode = config.projections.get("mode", "train")
    if mode not in ("train", "identity", "checkpoint"):
        findings.append(f"unknown projections mode {mode!r}")
    if mode == "checkpoint":
        ckpt = config.projections.get("checkpoint")
        if not ckpt or not Path(ckpt).exists():
            findings.append(f"projection checkpoint {ckpt!r} does not exist")

    split_mode = config.split.get("mode", "holdout")
    if split_mode not in ("holdout", "kfold", "explicit"):
        findings.append(f"unknown split mode {split_mode!r}")
    if split_mode == "explicit" and images is not None:
        known = set(images.ids)
        for part in ("train_ids", "val_ids", "test_ids"):
            ids = config.split.get(part, [])
            if not ids:
                findings.append(f"explicit split lists no {part}")
            for rid in ids:
                if rid not in known:
                    findings.append(f"explicit split id {rid!r} not in image set")

    try:
        TrainConfig(**{**config.train_args, "seed": 0})
    except (TypeError, ValueError) as exc:
        findings.append(f"bad train settings: {exc}")

    return findings


def resolve_splits(config: ExperimentConfig, images: EmbeddingSet) -> list[SplitIndices]:
    """Materialize the configured split scheme as index triples. Splits are
    fixed by the split spec's own seed, independent of the per-run seeds."""
    if images.labels is None:
        raise ConfigurationError("image embeddings carry no labels")
    labels = np.asarray(images.labels)
    spec = config.split
    mode = spec.get("mode", "holdout")
    if mode == "holdout":
        seed = int(spec.get("seed", 0))
        test_fraction = float(spec.get("test_fraction", 0.2))
        val_fraction = float(spec.get("val_fraction", 0.2))
        rest, test = stratified_split(labels, test_fraction, seed)
        rel_train, rel_val = stratified_split(labels[rest], val_fraction, seed + 1)
        return [SplitIndices(rest[rel_train], rest[rel_val], test, "holdout")]
    if mode == "kfold":
        k = int(spec.get("k", 5))
        seed = int(spec.get("seed", 0))
        val_fraction = float(spec.get("val_fraction", 0.2))
        splits = []
        for f, (train_all, test) in enumerate(stratified_kfold(labels, k, seed)):
            rel_train, rel_val = stratified_split(
                labels[train_all], val_fraction, seed + f + 1
            )
            splits.append(
                SplitIndices(train_all[rel_train], train_all[rel_val], test, f"fold{f}")
            )
        return splits
    if mode == "explicit":
        pos = {rid: i for i, rid in enumerate(images.ids)}

        def indices_for(part):
            ids = spec.get(part, [])
            missing = [rid for rid in ids if rid not in pos]
            if missing:
                raise ConfigurationError(
                    f"explicit split {part} ids not in image set: {missing}"
                )
            return np.asarray([pos[rid] for rid in ids], dtype=np.int64)

        return [
            SplitIndices(
                indices_for("train_ids"),
                indices_for("val_ids"),
                indices_for("test_ids"),
                "explicit",
            )
        ]
    raise ConfigurationError(f"unknown split mode {mode!r}")


def _ordered_class_texts(texts: EmbeddingSet, space: LabelSpace) -> EmbeddingSet:
    """Class-text rows restricted to the label space, in class order."""
    rows = []
    for cls in space.classes:
        try:
            rows.append(texts.row_for(cls))
        except KeyError:
            raise ConfigurationError(f"no class-text embedding with id {cls!r}")
    return EmbeddingSet(
        ids=tuple(space.classes),
        matrix=np.asarray(rows, dtype=np.float64),
        encoder_tag=texts.encoder_tag,
    )


def _binary_labels(labels, space: LabelSpace) -> np.ndarray:
    return np.asarray(
        [1 if lab == space.positive_class else 0 for lab in labels], dtype=np.int64
    )


def _class_indices(labels, space: LabelSpace) -> np.ndarray:
    index = {c: i for i, c in enumerate(space.classes)}
    try:
        return np.asarray([index[lab] for lab in labels], dtype=np.int64)
    except KeyError as exc:
        raise ConfigurationError(f"label {exc} not in label space")


@dataclass
class StrategyResult:
    row: dict
    roc: tuple[tuple[float, float], ...]
    head: MelanomaHead | None = None
    test_concept_scores: np.ndarray | None = None


def _eval_baseline(
    proj: ProjectionPair,
    test: EmbeddingSet,
    class_texts: EmbeddingSet,
    space: LabelSpace,
) -> StrategyResult:
    from .strategies import baseline_similarities

    sims = baseline_similarities(test.matrix, class_texts, proj)
    pred_idx = np.argmax(sims, axis=1)  # argmax resolves ties to the lowest index
    truth_idx = _class_indices(test.labels, space)
    truth_bin = _binary_labels(test.labels, space)
    pred_bin = multiclass_to_binary(pred_idx, space)
    bacc = balanced_accuracy(pred_bin, truth_bin)
    scores = sims[:, space.positive_index]
    auc, roc = roc_auc(scores, truth_bin)
    row = {
        "bacc": bacc,
        "auc": auc,
        "n_pos": int(truth_bin.sum()),
        "n_neg": int(truth_bin.size - truth_bin.sum()),
    }
    if len(space.classes) > 2:
        row["bacc_multiclass"] = balanced_accuracy_multiclass(pred_idx, truth_idx)
    return StrategyResult(row=row, roc=roc)


def _eval_cbm_family(
    route: str,
    proj: ProjectionPair,
    train: EmbeddingSet,
    val: EmbeddingSet,
    test: EmbeddingSet,
    concepts: ConceptSet,
    space: LabelSpace,
    fit_config: FitConfig,
) -> StrategyResult:
    p_train = concept_score_matrix(train.matrix, concepts, proj, route)
    p_val = concept_score_matrix(val.matrix, concepts, proj, route)
    p_test = concept_score_matrix(test.matrix, concepts, proj, route)
    y_train = _binary_labels(train.labels, space)
    y_val = _binary_labels(val.labels, space)
    y_test = _binary_labels(test.labels, space)
    head = fit_head_from_concepts(p_train, y_train, p_val, y_val, fit_config)
    v_test = p_test @ head.coefficients + head.intercept
    pred = (v_test >= head.threshold).astype(np.int64)
    bacc = balanced_accuracy(pred, y_test)
    auc, roc = roc_auc(v_test, y_test)
    row = {
        "bacc": bacc,
        "auc": auc,
        "n_pos": int(y_test.sum()),
        "n_neg": int(y_test.size - y_test.sum()),
    }
    return StrategyResult(row=row, roc=roc, head=head, test_concept_scores=p_test)


def _eval_probe(
    train: EmbeddingSet,
    test: EmbeddingSet,
    space: LabelSpace,
    fit_config: FitConfig,
) -> tuple[StrategyResult, np.ndarray, np.ndarray]:
    """Linear probe on the raw image embeddings (no projection): binary
    melanoma-vs-rest for two classes, multinomial otherwise."""
    y_test_bin = _binary_labels(test.labels, space)
    if len(space.classes) == 2:
        y_train = _binary_labels(train.labels, space)
        weights, intercept = fit_logistic(train.matrix, y_train, fit_config)
        proba = predict_proba_binary(test.matrix, weights, intercept)
        pred = (proba >= 0.5).astype(np.int64)
        bacc = balanced_accuracy(pred, y_test_bin)
        auc, roc = roc_auc(proba, y_test_bin)
        row = {
            "bacc": bacc,
            "auc": auc,
            "n_pos": int(y_test_bin.sum()),
            "n_neg": int(y_test_bin.size - y_test_bin.sum()),
        }
        return (
            StrategyResult(row=row, roc=roc),
            np.atleast_2d(weights),
            np.atleast_1d(intercept),
        )
    y_train = _class_indices(train.labels, space)
    truth_idx = _class_indices(test.labels, space)
    weights, intercept = fit_logistic(train.matrix, y_train, fit_config)
    proba = predict_proba_multiclass(test.matrix, weights, intercept)
    pred_idx = np.argmax(proba, axis=1)
    pred_bin = multiclass_to_binary(pred_idx, space)
    bacc = balanced_accuracy(pred_bin, y_test_bin)
    auc, roc = roc_auc(proba[:, space.positive_index], y_test_bin)
    row = {
        "bacc": bacc,
        "auc": auc,
        "n_pos": int(y_test_bin.sum()),
        "n_neg": int(y_test_bin.size - y_test_bin.sum()),
        "bacc_multiclass": balanced_accuracy_multiclass(pred_idx, truth_idx),
    }
    return StrategyResult(row=row, roc=roc), weights.T, np.atleast_1d(intercept)


@dataclass
class _Inputs:
    images: EmbeddingSet
    class_texts: EmbeddingSet
    concepts: ConceptSet | None
    splits: list[SplitIndices]


def _load_inputs(config: ExperimentConfig, stage: str) -> _Inputs:
    findings = validate_config(config)
    if findings:
        raise StageError(stage, ConfigurationError("; ".join(findings)))
    images = load_embeddings(config.images_path)
    class_texts = _ordered_class_texts(
        load_embeddings(config.class_texts_path), config.label_space
    )
    concepts = None
    if any(s in CBM_FAMILY for s in config.strategies) or config.concepts_file:
        if config.concepts_file and config.concept_embeddings_path:
            concepts = load_concept_set(
                config.concepts_file, load_embeddings(config.concept_embeddings_path)
            )
    splits = resolve_splits(config, images)
    return _Inputs(images, class_texts, concepts, splits)


def _train_config_for(config: ExperimentConfig, seed: int) -> TrainConfig:
    args = {k: v for k, v in config.train_args.items() if k != "seed"}
    return TrainConfig(seed=seed, **args)


def _projection_for(
    config: ExperimentConfig,
    seed: int,
    split: SplitIndices,
    inputs: _Inputs,
    out_dir: Path | None,
):
    """Projection pair per the configured mode; in train mode the checkpoint
    and training log land under out/checkpoints/."""
    mode = config.projections.get("mode", "train")
    logit_scale = float(config.projections.get("logit_scale", DEFAULT_LOGIT_SCALE))
    if mode == "identity":
        return ProjectionPair.identity(inputs.images.dim, logit_scale)
    if mode == "checkpoint":
        proj, _ = load_checkpoint(config.projections["checkpoint"])
        return proj
    train_set = emb_io.take(inputs.images, split.train)
    val_set = emb_io.take(inputs.images, split.val)
    tconfig = _train_config_for(config, seed)
    proj, log = train_projections(
        train_set, val_set, inputs.class_texts, tconfig, logit_scale
    )
    if out_dir is not None:
        ckpt_dir = out_dir / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(
            proj,
            ckpt_dir / f"proj_seed{seed}_{split.tag}.ckpt",
            tconfig,
            log.best_val_loss,
        )
        log_payload = {
            "best_epoch": log.best_epoch,
            "best_val_loss": log.best_val_loss,
            "entries": [
                {
                    "epoch": r.epoch,
                    "train_loss": r.train_loss,
                    "val_loss": r.val_loss,
                    "learning_rate": r.learning_rate,
                }
                for r in log.entries
            ],
        }
        (ckpt_dir / f"train_log_seed{seed}_{split.tag}.json").write_text(
            json.dumps(log_payload, indent=1, sort_keys=True)
        )
    return proj


def _sanitize_id(image_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in image_id)


def _write_roc_csv(path: Path, roc) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["fpr", "tpr"])
    for fpr, tpr in roc:
        writer.writerow([repr(fpr), repr(tpr)])
    path.write_text(buf.getvalue())


def _aggregate(per_run: list[dict]) -> dict:
    groups: dict[str, dict[str, list[float]]] = {}
    for row in per_run:
        g = groups.setdefault(row["strategy"], {})
        for key in ("bacc", "auc", "bacc_multiclass"):
            if row.get(key) is not None and key in row:
                g.setdefault(key, []).append(row[key])
    out = {}
    for strategy, metrics in groups.items():
        entry = {"n_runs": len(metrics.get("bacc", []))}
        for key, values in metrics.items():
            arr = np.asarray(values, dtype=np.float64)
            entry[f"{key}_mean"] = float(arr.mean())
            entry[f"{key}_std"] = float(arr.std())
        out[strategy] = entry
    return out


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Run every seed x split x strategy combination and write the report.

    Per seed the projections are trained (or loaded), the head fitted, and
    each strategy scored on the test split. ROC curves come from the first
    seed's first split; explanation CSVs (first cbm-family strategy in the
    list) from the first seed. report.json is byte-identical across reruns.
    """
    out = Path(out_dir) if out_dir is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_lines = [f"{time.strftime('%Y-%m-%dT%H:%M:%S')} start run_experiment"]

    inputs = _load_inputs(config, "validate")
    explain_route = next((s for s in config.strategies if s in CBM_FAMILY), None)
    per_run: list[dict] = []
    roc_written: set[str] = set()

    for seed_pos, seed in enumerate(config.seeds):
        for split in inputs.splits:
            try:
                proj = _projection_for(config, seed, split, inputs, out)
            except DermcbmError as exc:
                raise StageError("train-projections", exc)
            train_set = emb_io.take(inputs.images, split.train)
            val_set = emb_io.take(inputs.images, split.val)
            test_set = emb_io.take(inputs.images, split.test)

            for strategy in config.strategies:
                stage = f"eval-{strategy}"
                try:
                    if strategy == "baseline":
                        result = _eval_baseline(
                            proj, test_set, inputs.class_texts, config.label_space
                        )
                    elif strategy in CBM_FAMILY:
                        route = "cbm" if strategy == "cbm" else "gpt"
                        result = _eval_cbm_family(
                            route,
                            proj,
                            train_set,
                            val_set,
                            test_set,
                            inputs.concepts,
                            config.label_space,
                            config.fit_config,
                        )
                        head_path = out / f"head_{strategy}_seed{seed}_{split.tag}.json"
                        save_head(result.head, head_path)
                    else:
                        result, weights, intercept = _eval_probe(
                            train_set, test_set, config.label_space, config.fit_config
                        )
                        ckpt_dir = out / "checkpoints"
                        ckpt_dir.mkdir(parents=True, exist_ok=True)
                        wpath = ckpt_dir / f"probe_seed{seed}_{split.tag}.ckpt"
                        write_matrix_container(np.atleast_2d(weights), wpath)
                        Path(str(wpath) + ".meta.json").write_text(
                            json.dumps(
                                {
                                    "intercept": [float(v) for v in intercept],
                                    "classes": list(config.label_space.classes),
                                },
                                indent=1,
                                sort_keys=True,
                            )
                        )
                except DermcbmError as exc:
                    raise StageError(stage, exc)

                row = {"strategy": strategy, "seed": seed, "split_tag": split.tag}
                row.update(result.row)
                per_run.append(row)

                if seed_pos == 0 and split.tag == inputs.splits[0].tag:
                    if strategy not in roc_written:
                        _write_roc_csv(out / f"roc_{strategy}.csv", result.roc)
                        roc_written.add(strategy)

                if (
                    seed_pos == 0
                    and strategy == explain_route
                    and result.test_concept_scores is not None
                ):
                    exp_dir = out / "explanations"
                    exp_dir.mkdir(parents=True, exist_ok=True)
                    for i, image_id in enumerate(test_set.ids):
                        explanation = explain_prediction(
                            result.test_concept_scores[i],
                            result.head,
                            inputs.concepts,
                            image_id,
                        )
                        (exp_dir / f"{_sanitize_id(image_id)}.csv").write_text(
                            render_explanation(explanation, "csv")
                        )
            log_lines.append(
                f"{time.strftime('%Y-%m-%dT%H:%M:%S')} seed {seed} {split.tag} done"
            )

    report = {
        "config": config.raw,
        "per_run": per_run,
        "aggregate": _aggregate(per_run),
    }
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    log_lines.append(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} report written")
    (out / "run.log").write_text("\n".join(log_lines) + "\n")
    return report


def run_size_sweep(
    config: ExperimentConfig, sizes: list[int], out_dir: str | Path | None = None
) -> list[dict]:
    """Retrain at increasing training-set sizes and track CBM AUC on the
    fixed test split. Sizes must be ascending; each subsample is stratified
    and seeded, and the full size reproduces run_experiment exactly."""
    if sizes != sorted(sizes):
        raise ConfigurationError("sizes must be ascending")
    if "cbm" not in config.strategies:
        raise ConfigurationError("size sweep requires the cbm strategy")
    out = Path(out_dir) if out_dir is not None else Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    inputs = _load_inputs(config, "validate")
    if inputs.concepts is None:
        raise StageError("validate", ConfigurationError("size sweep needs concepts"))
    rows = []
    for size in sizes:
        aucs = []
        for seed in config.seeds:
            for split in inputs.splits:
                if size > split.train.size:
                    raise ConfigurationError(
                        f"size {size} exceeds train split size {split.train.size}"
                    )
                labels = np.asarray(inputs.images.labels)[split.train]
                keep = stratified_subsample(labels, size, seed)
                sub = SplitIndices(split.train[keep], split.val, split.test, split.tag)
                proj = _projection_for(config, seed, sub, inputs, None)
                result = _eval_cbm_family(
                    "cbm",
                    proj,
                    emb_io.take(inputs.images, sub.train),
                    emb_io.take(inputs.images, sub.val),
                    emb_io.take(inputs.images, sub.test),
                    inputs.concepts,
                    config.label_space,
                    config.fit_config,
                )
                aucs.append(result.row["auc"])
        arr = np.asarray(aucs, dtype=np.float64)
        rows.append(
            {"size": size, "auc_mean": float(arr.mean()), "auc_std": float(arr.std())}
        )

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["size", "auc_mean", "auc_std"])
    for row in rows:
        writer.writerow([row["size"], repr(row["auc_mean"]), repr(row["auc_std"])])
    (out / "sweep.csv").write_text(buf.getvalue())
    return rows


def _cmd_train_proj(config: ExperimentConfig, args) -> int:
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs = _load_inputs(config, "validate")
    seed = args.seed if args.seed is not None else config.seeds[0]
    for split in inputs.splits:
        _projection_for(config, seed, split, inputs, out)
        print(f"trained projections for seed {seed} split {split.tag}")
    return 0


def _cmd_fit_head(config: ExperimentConfig, args) -> int:
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs = _load_inputs(config, "validate")
    if inputs.concepts is None:
        raise StageError("fit-head", ConfigurationError("no concept set configured"))
    route_name = next((s for s in config.strategies if s in CBM_FAMILY), "cbm")
    route = "cbm" if route_name == "cbm" else "gpt"
    seed = args.seed if args.seed is not None else config.seeds[0]
    split = inputs.splits[0]
    proj = _projection_for(config, seed, split, inputs, out)
    result = _eval_cbm_family(
        route,
        proj,
        emb_io.take(inputs.images, split.train),
        emb_io.take(inputs.images, split.val),
        emb_io.take(inputs.images, split.test),
        inputs.concepts,
        config.label_space,
        config.fit_config,
    )
    head_path = out / "head.json"
    save_head(result.head, head_path)
    print(
        f"head fitted ({route_name}): threshold {result.head.threshold:.6f}, "
        f"test bacc {result.row['bacc']:.4f}, wrote {head_path}"
    )
    return 0


def _cmd_tune_threshold(config: ExperimentConfig, args) -> int:
    from .fitting import tune_threshold

    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    head_path = Path(args.head) if args.head else out / "head.json"
    if not head_path.exists():
        raise StageError(
            "tune-threshold",
            ConfigurationError(f"head file {head_path} does not exist; run fit-head"),
        )
    head = load_head(head_path)
    inputs = _load_inputs(config, "validate")
    if inputs.concepts is None:
        raise StageError("tune-threshold", ConfigurationError("no concept set configured"))
    route_name = next((s for s in config.strategies if s in CBM_FAMILY), "cbm")
    route = "cbm" if route_name == "cbm" else "gpt"
    seed = args.seed if args.seed is not None else config.seeds[0]
    split = inputs.splits[0]
    proj = _projection_for(config, seed, split, inputs, out)
    val_set = emb_io.take(inputs.images, split.val)
    p_val = concept_score_matrix(val_set.matrix, inputs.concepts, proj, route)
    v_val = p_val @ head.coefficients + head.intercept
    y_val = _binary_labels(val_set.labels, config.label_space)
    t, bacc = tune_threshold(v_val, y_val)
    save_head(MelanomaHead(head.coefficients, head.intercept, t), head_path)
    print(f"threshold {t:.6f} (validation bacc {bacc:.4f}), rewrote {head_path}")
    return 0


def _cmd_eval(config: ExperimentConfig, args) -> int:
    if args.seed is not None:
        config.seeds = [args.seed]
    report = run_experiment(config, args.out)
    for strategy, entry in sorted(report["aggregate"].items()):
        auc = entry.get("auc_mean")
        auc_text = f", auc {auc:.4f}±{entry['auc_std']:.4f}" if auc is not None else ""
        print(
            f"{strategy}: bacc {entry['bacc_mean']:.4f}±{entry['bacc_std']:.4f}"
            f"{auc_text} over {entry['n_runs']} run(s)"
        )
    return 0


def _cmd_sweep_size(config: ExperimentConfig, args) -> int:
    if args.seed is not None:
        config.seeds = [args.seed]
    sizes = (
        [int(s) for s in args.sizes.split(",")] if args.sizes else config.sweep_sizes
    )
    if not sizes:
        raise StageError(
            "sweep-size",
            ConfigurationError("no sizes given (use --sizes or config sweep_sizes)"),
        )
    rows = run_size_sweep(config, sizes, args.out)
    for row in rows:
        print(f"size {row['size']}: auc {row['auc_mean']:.4f}±{row['auc_std']:.4f}")
    return 0


def _cmd_explain(config: ExperimentConfig, args) -> int:
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs = _load_inputs(config, "validate")
    if inputs.concepts is None:
        raise StageError("explain", ConfigurationError("no concept set configured"))
    if args.image_id not in inputs.images.ids:
        raise StageError(
            "explain",
            ConfigurationError(f"image id {args.image_id!r} not in image set"),
        )
    route_name = next((s for s in config.strategies if s in CBM_FAMILY), "cbm")
    route = "cbm" if route_name == "cbm" else "gpt"
    seed = args.seed if args.seed is not None else config.seeds[0]
    split = inputs.splits[0]
    proj = _projection_for(config, seed, split, inputs, out)
    if args.head:
        head = load_head(args.head)
    else:
        result = _eval_cbm_family(
            route,
            proj,
            emb_io.take(inputs.images, split.train),
            emb_io.take(inputs.images, split.val),
            emb_io.take(inputs.images, split.test),
            inputs.concepts,
            config.label_space,
            config.fit_config,
        )
        head = result.head
    row = inputs.images.row_for(args.image_id)
    p = concept_score_matrix(row, inputs.concepts, proj, route)[0]
    explanation = explain_prediction(p, head, inputs.concepts, args.image_id)
    exp_dir = out / "explanations"
    exp_dir.mkdir(parents=True, exist_ok=True)
    (exp_dir / f"{_sanitize_id(args.image_id)}.csv").write_text(
        render_explanation(explanation, "csv")
    )
    print(render_explanation(explanation, "text"), end="")
    return 0


def _cmd_probe(config: ExperimentConfig, args) -> int:
    config.strategies = ["linear_probe"]
    if args.seed is not None:
        config.seeds = [args.seed]
    config.projections = {"mode": "identity"}
    return _cmd_eval(config, args)


def _cmd_validate(config_path: str, args) -> int:
    config = load_experiment_config(config_path)
    findings = validate_config(config)
    if not findings:
        print("config ok")
        return 0
    for finding in findings:
        print(f"finding: {finding}")
    return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dermcbm",
        description=(
            "Train image/text projections over frozen encoder embeddings and "
            "evaluate concept-bottleneck melanoma diagnosis strategies."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("train-proj", "train the projection pair and save a checkpoint"),
        ("fit-head", "fit the concept-bottleneck head and save it"),
        ("tune-threshold", "retune the decision threshold of a saved head"),
        ("eval", "run the full experiment and write reports"),
        ("sweep-size", "retrain at multiple training-set sizes, tracking AUC"),
        ("explain", "explain one image's melanoma score by concept"),
        ("probe", "run the linear-probe baseline only"),
        ("validate", "check config consistency without running anything"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override run seed")
        p.add_argument("--out", default=None, help="override output directory")
        if name == "sweep-size":
            p.add_argument("--sizes", default=None, help="comma-separated sizes")
        if name == "explain":
            p.add_argument("--image-id", required=True, help="image id to explain")
            p.add_argument("--head", default=None, help="existing head file")
        if name == "tune-threshold":
            p.add_argument("--head", default=None, help="head file to retune")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args.config, args)
        config = load_experiment_config(args.config)
        handler = {
            "train-proj": _cmd_train_proj,
            "fit-head": _cmd_fit_head,
            "tune-threshold": _cmd_tune_threshold,
            "eval": _cmd_eval,
            "sweep-size": _cmd_sweep_size,
            "explain": _cmd_explain,
            "probe": _cmd_probe,
        }[args.command]
        return handler(config, args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        cause = exc.cause
        return 3 if isinstance(cause, NumericalDegeneracyError) else 2
    except NumericalDegeneracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigurationError, EmbeddingFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
