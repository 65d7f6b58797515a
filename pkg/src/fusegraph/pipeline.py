"""Configuration-driven orchestration of training and inference.

The training phase is staged (``ranks -> graphs -> embed -> train``), each
stage persisting its artifact together with a manifest of content digests.
Because every stage is a pure, seeded function of the configuration, two
runs with the same config produce byte-identical artifacts; inference
verifies the manifest digests before using anything. All randomness flows
from the config seed; the test split never touches a training artifact
(response sets, vocabulary, codebook, normalization statistics).
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import artifacts
from .dataset import (
    FeatureTable,
    LabelTable,
    SplitSpec,
    load_features,
    load_labels,
    stratified_split,
)
from .embedding import (
    Codebook,
    FusionVector,
    VocabularyV,
    build_codebook,
    build_vocabulary,
    embed_h,
    embed_k,
    embed_v,
    extract_gois,
    pair_index,
)
from .errors import (
    AlignmentError,
    CompatibilityError,
    ConfigError,
    FusegraphError,
    IncompleteModalityError,
)
from .figures import render_method_comparison, render_report_figures, render_sweep_figure
from .fusion_graph import FusionGraph, extract_fusion_graph
from .learn import (
    Estimator,
    TrainConfig,
    concat_features,
    majority_vote,
    predict_label,
    predict_proba,
    train_classifier,
)
from .metrics import MetricReport, average_precision_at_k, per_class_recall, write_report
from .ranker import (
    COMPARATOR_KINDS,
    Comparator,
    Ranker,
    RankStore,
    build_rank_store,
    query_ranks,
    truncate_rank,
)

logger = logging.getLogger("fusegraph")

MANIFEST_NAME = "manifest.json"
ARTIFACT_FILES = {
    "split": "split.jsonl",
    "ranks": "ranks.jsonl",
    "graphs": "graphs.jsonl",
    "vectors": "vectors.jsonl",
    "codebook": "codebook.jsonl",
    "estimator": "estimator.jsonl",
}


@dataclass
class EmbeddingConfig:
    kind: str = "V"
    bandwidth: float | str = "auto"
    sigma: float | None = None
    max_training_gois: int = 400


@dataclass
class SplitConfig:
    train_fraction: float | None = 0.8
    train_file: Path | None = None
    test_file: Path | None = None


@dataclass
class EvaluationConfig:
    cutoffs: list[int] = field(default_factory=list)
    positive_label: str | None = None


@dataclass
class PipelineConfig:
    features: dict[str, Path]
    labels: Path | None
    rankers: list[Ranker]
    L: int
    embedding: EmbeddingConfig
    train: TrainConfig
    split: SplitConfig
    seed: int
    output_dir: Path
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    self_exclusion: bool = True

    @property
    def m(self) -> int:
        return len(self.rankers)


def load_config(
    path: str | Path, *, seed: int | None = None, output_dir: str | Path | None = None
) -> PipelineConfig:
    """Parse and validate a YAML pipeline config.

    Relative paths resolve against the config file's directory. ``seed`` and
    ``output_dir`` override the file's values (the CLI flags).
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    base = path.parent
    return build_config(raw, base_dir=base, seed=seed, output_dir=output_dir)


def build_config(
    raw: dict,
    *,
    base_dir: Path = Path("."),
    seed: int | None = None,
    output_dir: str | Path | None = None,
) -> PipelineConfig:
    def _path(value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base_dir / p

    features_raw = raw.get("features")
    if not isinstance(features_raw, dict) or not features_raw:
        raise ConfigError("config needs a non-empty 'features' mapping")
    features = {str(name): _path(p) for name, p in features_raw.items()}

    rankers_raw = raw.get("rankers")
    if not isinstance(rankers_raw, list) or not rankers_raw:
        raise ConfigError("config needs a non-empty 'rankers' list")
    rankers = []
    for i, item in enumerate(rankers_raw):
        if not isinstance(item, dict) or "descriptor" not in item or "comparator" not in item:
            raise ConfigError(f"ranker {i} needs 'descriptor' and 'comparator' keys")
        descriptor = str(item["descriptor"])
        comparator = str(item["comparator"])
        if descriptor not in features:
            raise ConfigError(f"ranker {i} references unknown descriptor {descriptor!r}")
        if comparator not in COMPARATOR_KINDS:
            raise ConfigError(
                f"ranker {i} has unknown comparator {comparator!r}; valid: {COMPARATOR_KINDS}"
            )
        rankers.append(Ranker(descriptor_name=descriptor, comparator=Comparator(comparator)))

    L = int(raw.get("L", 10))
    if L < 1:
        raise ConfigError(f"L must be >= 1, got {L}")

    emb_raw = raw.get("embedding", {}) or {}
    kind = str(emb_raw.get("kind", "V")).upper()
    if kind not in ("V", "H", "K"):
        raise ConfigError(f"embedding kind must be V, H, or K, got {kind!r}")
    bandwidth = emb_raw.get("bandwidth", "auto")
    if bandwidth != "auto":
        bandwidth = float(bandwidth)
        if bandwidth <= 0:
            raise ConfigError(f"bandwidth must be > 0, got {bandwidth}")
    sigma = emb_raw.get("sigma")
    if sigma is not None:
        sigma = float(sigma)
        if sigma <= 0:
            raise ConfigError(f"sigma must be > 0, got {sigma}")
    embedding = EmbeddingConfig(
        kind=kind,
        bandwidth=bandwidth,
        sigma=sigma,
        max_training_gois=int(emb_raw.get("max_training_gois", 400)),
    )
    if embedding.max_training_gois < 1:
        raise ConfigError("max_training_gois must be >= 1")

    the_seed = int(raw.get("seed", 0)) if seed is None else int(seed)

    train_raw = dict(raw.get("train", {}) or {})
    train_raw.setdefault("seed", the_seed)
    try:
        train = TrainConfig(
            reg_grid=[float(r) for r in train_raw.get("reg_grid", [0.001, 0.01, 0.1])],
            folds=int(train_raw.get("folds", 5)),
            epochs=int(train_raw.get("epochs", 200)),
            learning_rate=float(train_raw.get("learning_rate", 1.0)),
            seed=int(train_raw["seed"]),
            objective=str(train_raw.get("objective", "logistic")),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid train section: {exc}") from None

    split_raw = raw.get("split", {}) or {}
    split = SplitConfig(
        train_fraction=(
            float(split_raw["train_fraction"]) if "train_fraction" in split_raw else None
        ),
        train_file=_path(split_raw["train_file"]) if "train_file" in split_raw else None,
        test_file=_path(split_raw["test_file"]) if "test_file" in split_raw else None,
    )
    if split.train_fraction is None and (split.train_file is None or split.test_file is None):
        split.train_fraction = 0.8
    if split.train_fraction is not None and not 0 < split.train_fraction < 1:
        raise ConfigError(f"train_fraction must be in (0,1), got {split.train_fraction}")

    eval_raw = raw.get("evaluation", {}) or {}
    evaluation = EvaluationConfig(
        cutoffs=[int(k) for k in eval_raw.get("cutoffs", [])],
        positive_label=(
            str(eval_raw["positive_label"]) if "positive_label" in eval_raw else None
        ),
    )

    out = output_dir if output_dir is not None else raw.get("output_dir", "out")
    labels = raw.get("labels")
    return PipelineConfig(
        features=features,
        labels=_path(labels) if labels else None,
        rankers=rankers,
        L=L,
        embedding=embedding,
        train=train,
        split=split,
        seed=the_seed,
        output_dir=_path(out),
        evaluation=evaluation,
        self_exclusion=bool(raw.get("self_exclusion", True)),
    )


# -- digests and manifest ---------------------------------------------------


def config_digest(cfg: PipelineConfig) -> str:
    """Content-addressed digest of everything that determines artifacts.

    Input files enter by content hash, so editing a feature file invalidates
    previously trained artifacts; the output directory is excluded.
    """
    payload = {
        "features": {
            name: artifacts.file_digest(p) for name, p in sorted(cfg.features.items())
        },
        "labels": artifacts.file_digest(cfg.labels) if cfg.labels else None,
        "rankers": [[r.descriptor_name, r.comparator.kind] for r in cfg.rankers],
        "L": cfg.L,
        "embedding": [
            cfg.embedding.kind,
            cfg.embedding.bandwidth,
            cfg.embedding.sigma,
            cfg.embedding.max_training_gois,
        ],
        "train": [
            cfg.train.reg_grid,
            cfg.train.folds,
            cfg.train.epochs,
            cfg.train.learning_rate,
            cfg.train.seed,
            cfg.train.objective,
        ],
        "split": [
            cfg.split.train_fraction,
            artifacts.file_digest(cfg.split.train_file) if cfg.split.train_file else None,
            artifacts.file_digest(cfg.split.test_file) if cfg.split.test_file else None,
        ],
        "seed": cfg.seed,
        "self_exclusion": cfg.self_exclusion,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _manifest_path(cfg: PipelineConfig) -> Path:
    return cfg.output_dir / MANIFEST_NAME


def read_manifest(cfg: PipelineConfig) -> dict:
    path = _manifest_path(cfg)
    if not path.exists():
        raise CompatibilityError(f"no manifest at {path}; run training first")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("config_digest") != config_digest(cfg):
        raise CompatibilityError(
            "artifacts were produced by a different configuration (digest mismatch)"
        )
    return manifest


def _update_manifest(cfg: PipelineConfig, new_digests: dict[str, str]) -> None:
    path = _manifest_path(cfg)
    digest = config_digest(cfg)
    if path.exists():
        manifest = json.loads(path.read_text(encoding="utf-8"))
        if manifest.get("config_digest") != digest:
            raise CompatibilityError(
                f"output dir {cfg.output_dir} holds artifacts for a different config; "
                "use a fresh --out or delete the manifest"
            )
    else:
        manifest = {"config_digest": digest, "seed": cfg.seed, "artifacts": {}}
    manifest["artifacts"].update(new_digests)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def require_artifact(cfg: PipelineConfig, manifest: dict, name: str) -> Path:
    """Path of a manifest-tracked artifact, re-verified against its digest."""
    rel = ARTIFACT_FILES[name]
    recorded = manifest.get("artifacts", {}).get(name)
    if recorded is None:
        raise CompatibilityError(f"artifact {name!r} not in manifest; run its stage first")
    path = cfg.output_dir / rel
    if not path.exists():
        raise CompatibilityError(f"artifact file missing: {path}")
    actual = artifacts.file_digest(path)
    if actual != recorded:
        raise CompatibilityError(f"artifact {name!r} changed on disk (digest mismatch)")
    return path


# -- shared loading helpers --------------------------------------------------


def load_tables(cfg: PipelineConfig) -> dict[str, FeatureTable]:
    return {name: load_features(path, name) for name, path in sorted(cfg.features.items())}


def load_label_table(cfg: PipelineConfig) -> LabelTable | None:
    return load_labels(cfg.labels) if cfg.labels else None


def _read_id_file(path: Path) -> set[str]:
    ids = {line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()}
    if not ids:
        raise ConfigError(f"id file {path} is empty")
    return ids


def resolve_split(cfg: PipelineConfig, labels: LabelTable | None) -> SplitSpec:
    if cfg.split.train_file and cfg.split.test_file:
        train = _read_id_file(cfg.split.train_file)
        test = _read_id_file(cfg.split.test_file)
        overlap = train & test
        if overlap:
            raise ConfigError(f"train/test files overlap on {sorted(overlap)[:5]}")
        return SplitSpec(train=train, test=test, seed=cfg.seed)
    if labels is None:
        raise ConfigError("stratified splitting requires a labels file")
    return stratified_split(labels, cfg.split.train_fraction, cfg.seed)


def ensure_split(cfg: PipelineConfig, labels: LabelTable | None) -> SplitSpec:
    """Load the persisted split, or create and persist it (seeded)."""
    path = cfg.output_dir / ARTIFACT_FILES["split"]
    if path.exists():
        return artifacts.load_split(path)
    split = resolve_split(cfg, labels)
    artifacts.save_split(split, path)
    _update_manifest(cfg, {"split": artifacts.file_digest(path)})
    return split


def _check_label_coverage(cfg, tables: dict[str, FeatureTable], labels: LabelTable | None):
    if labels is None:
        return
    known = set()
    for table in tables.values():
        known |= set(table.rows)
    orphans = sorted(set(labels.rows) - known)
    if orphans:
        raise AlignmentError(f"labeled ids missing from every feature table: {orphans[:5]}")


# -- training stages ----------------------------------------------------------


def stage_ranks(cfg: PipelineConfig) -> Path:
    """Split the collection and build the train-set rank store."""
    tables = load_tables(cfg)
    labels = load_label_table(cfg)
    _check_label_coverage(cfg, tables, labels)
    split = ensure_split(cfg, labels)
    store = build_rank_store(
        tables, cfg.rankers, split.train, cfg.L, self_exclude=cfg.self_exclusion
    )
    path = artifacts.save_rank_store(store, cfg.output_dir / ARTIFACT_FILES["ranks"])
    _update_manifest(cfg, {"ranks": artifacts.file_digest(path)})
    return path


def stage_graphs(cfg: PipelineConfig) -> Path:
    """Extract one fusion graph per train sample from the rank store."""
    manifest = read_manifest(cfg)
    split = artifacts.load_split(require_artifact(cfg, manifest, "split"))
    store = artifacts.load_rank_store(require_artifact(cfg, manifest, "ranks"))
    graphs = [
        extract_fusion_graph(store.ranks_of(sid), store) for sid in sorted(split.train)
    ]
    path = artifacts.save_fusion_graphs(graphs, cfg.output_dir / ARTIFACT_FILES["graphs"])
    _update_manifest(cfg, {"graphs": artifacts.file_digest(path)})
    return path


@dataclass
class EmbedContext:
    """Everything needed to embed one graph consistently with training."""

    kind: str
    vocab: VocabularyV | None = None
    codebook: Codebook | None = None

    def embed(self, g: FusionGraph) -> FusionVector:
        if self.kind == "V":
            return embed_v(g, self.vocab)
        if self.kind == "H":
            return embed_h(g, self.vocab)
        return embed_k(g, self.codebook)


def build_embed_context(
    cfg: PipelineConfig,
    train_ids,
    train_graphs: list[FusionGraph] | None = None,
    codebook: Codebook | None = None,
) -> EmbedContext:
    kind = cfg.embedding.kind
    if kind in ("V", "H"):
        return EmbedContext(kind=kind, vocab=build_vocabulary(train_ids))
    if codebook is None:
        if train_graphs is None:
            raise ConfigError("codebook embedding needs train graphs or a stored codebook")
        gois = [goi for g in train_graphs for goi in extract_gois(g)]
        codebook = build_codebook(
            gois,
            bandwidth=cfg.embedding.bandwidth,
            max_training_gois=cfg.embedding.max_training_gois,
            seed=cfg.seed,
            sigma=cfg.embedding.sigma,
        )
    return EmbedContext(kind=kind, codebook=codebook)


def stage_embed(cfg: PipelineConfig) -> Path:
    """Embed the train graphs; for codebook embeddings, learn and persist
    the codebook from train-set subgraphs only."""
    manifest = read_manifest(cfg)
    split = artifacts.load_split(require_artifact(cfg, manifest, "split"))
    graphs = artifacts.load_fusion_graphs(require_artifact(cfg, manifest, "graphs"))
    ctx = build_embed_context(cfg, split.train, train_graphs=graphs)
    if ctx.codebook is not None:
        cb_path = artifacts.save_codebook(
            ctx.codebook, cfg.output_dir / ARTIFACT_FILES["codebook"]
        )
        _update_manifest(cfg, {"codebook": artifacts.file_digest(cb_path)})
    pairs = [(g.query, ctx.embed(g)) for g in graphs]
    path = artifacts.save_fusion_vectors(pairs, cfg.output_dir / ARTIFACT_FILES["vectors"])
    _update_manifest(cfg, {"vectors": artifacts.file_digest(path)})
    return path


def stage_train(cfg: PipelineConfig) -> Path:
    """Grid-search and fit the estimator over the train fusion vectors."""
    if cfg.labels is None:
        raise ConfigError("training requires a labels file")
    manifest = read_manifest(cfg)
    labels = load_label_table(cfg)
    pairs = artifacts.load_fusion_vectors(require_artifact(cfg, manifest, "vectors"))
    missing = [sid for sid, _ in pairs if sid not in labels.rows]
    if missing:
        raise AlignmentError(f"train vectors without labels: {missing[:5]}")
    X = [vec for _, vec in pairs]
    y = [labels.rows[sid] for sid, _ in pairs]
    est = train_classifier(X, y, cfg.train)
    est.meta["n_train"] = len(y)
    est.meta["embedding_kind"] = cfg.embedding.kind
    path = artifacts.save_estimator(est, cfg.output_dir / ARTIFACT_FILES["estimator"])
    _update_manifest(cfg, {"estimator": artifacts.file_digest(path)})
    return path


TRAINING_STAGES = [
    ("ranks", stage_ranks),
    ("graphs", stage_graphs),
    ("embed", stage_embed),
    ("train", stage_train),
]


def run_training(cfg: PipelineConfig) -> dict[str, str]:
    """Run all four training stages; returns the manifest artifact digests."""
    for name, fn in TRAINING_STAGES:
        t0 = time.perf_counter()
        try:
            fn(cfg)
        except FusegraphError as exc:
            raise type(exc)(f"stage {name}: {exc}") from exc
        logger.info("stage %-6s done in %.2fs", name, time.perf_counter() - t0)
    manifest = read_manifest(cfg)
    return dict(manifest["artifacts"])


# -- inference ----------------------------------------------------------------


@dataclass
class InferenceResult:
    predictions: list[tuple[str, str]]
    probabilities: dict[str, np.ndarray]
    classes: list[str]
    report: MetricReport | None
    files: dict[str, Path]
    timings: dict[str, float]


def _positive_label(cfg: PipelineConfig, classes: list[str]) -> str:
    if cfg.evaluation.positive_label is not None:
        return cfg.evaluation.positive_label
    return classes[1] if len(classes) == 2 else classes[-1]


def _proba_vector(est: Estimator, vec: FusionVector) -> np.ndarray:
    p = predict_proba(est, vec)
    if isinstance(p, float):
        return np.array([1.0 - p, p])
    return p


def classification_report(
    cfg: PipelineConfig,
    y_true: list[str],
    y_pred: list[str],
    ranking: list[tuple[str, float, bool]] | None = None,
) -> MetricReport:
    """Balanced accuracy and per-class recalls; AP@K/mAP over the ranked
    probabilities when cutoffs are configured and a ranking is supplied."""
    recalls = per_class_recall(y_true, y_pred)
    values = {"balanced_accuracy": sum(recalls.values()) / len(recalls)}
    cutoffs: list[int] = []
    notes: list[str] = []
    if ranking is not None and cfg.evaluation.cutoffs:
        ordered = sorted(ranking, key=lambda item: (-item[1], item[0]))
        relevance = [rel for _, _, rel in ordered]
        cutoffs = list(cfg.evaluation.cutoffs)
        aps = []
        for k in cutoffs:
            ap = average_precision_at_k(relevance, k)
            values[f"ap@{k}"] = ap
            aps.append(ap)
        values["map"] = sum(aps) / len(aps)
        notes.append(
            "AP@K normalizes by min(K, R) with R counted over the full ranked list"
        )
    return MetricReport(
        values=values, class_recalls=recalls, cutoffs=cutoffs, notes=notes
    )


def run_inference(cfg: PipelineConfig) -> InferenceResult:
    """Predict every test sample from persisted training artifacts.

    Per test sample: m ranks against the train response set, fusion graph,
    fusion vector under the training vocabulary/codebook, then the estimator
    label and probabilities. Writes predictions and probabilities tables, and
    a metric report (plus figures) when test labels are available.
    """
    manifest = read_manifest(cfg)
    split = artifacts.load_split(require_artifact(cfg, manifest, "split"))
    store = artifacts.load_rank_store(require_artifact(cfg, manifest, "ranks"))
    est = artifacts.load_estimator(require_artifact(cfg, manifest, "estimator"))
    codebook = None
    if cfg.embedding.kind == "K":
        codebook = artifacts.load_codebook(require_artifact(cfg, manifest, "codebook"))
    ctx = build_embed_context(cfg, split.train, codebook=codebook)
    tables = load_tables(cfg)
    labels = load_label_table(cfg)

    test_ids = sorted(split.test)
    train_ids = sorted(split.train)
    predictions: list[tuple[str, str]] = []
    probabilities: dict[str, np.ndarray] = {}
    timings = {"ranks": 0.0, "graph_embed_predict": 0.0}
    for sid in test_ids:
        vecs = {}
        for ranker in cfg.rankers:
            table = tables[ranker.descriptor_name]
            if sid not in table:
                raise IncompleteModalityError(
                    f"test sample {sid!r} missing from descriptor {ranker.descriptor_name!r}"
                )
            vecs[ranker.descriptor_name] = table.rows[sid]
        t0 = time.perf_counter()
        ranks = query_ranks(
            tables,
            cfg.rankers,
            sid,
            vecs,
            train_ids,
            cfg.L,
            exclude=sid if cfg.self_exclusion else None,
        )
        t1 = time.perf_counter()
        graph = extract_fusion_graph(ranks, store)
        vector = ctx.embed(graph)
        predictions.append((sid, predict_label(est, vector)))
        probabilities[sid] = _proba_vector(est, vector)
        timings["ranks"] += t1 - t0
        timings["graph_embed_predict"] += time.perf_counter() - t1
    logger.info(
        "inference timing: rank generation %.3fs, graph+embed+predict %.3fs",
        timings["ranks"],
        timings["graph_embed_predict"],
    )

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    pred_path = out / "predictions.csv"
    with pred_path.open("w", encoding="utf-8") as fh:
        fh.write("id,predicted\n")
        for sid, label in predictions:
            fh.write(f"{sid},{label}\n")
    proba_path = out / "probabilities.csv"
    with proba_path.open("w", encoding="utf-8") as fh:
        fh.write("id," + ",".join(est.classes) + "\n")
        for sid, _ in predictions:
            fh.write(sid + "," + ",".join(repr(float(p)) for p in probabilities[sid]) + "\n")
    files = {"predictions": pred_path, "probabilities": proba_path}

    report = None
    if test_ids and labels is not None and all(sid in labels.rows for sid in test_ids):
        y_true = [labels.rows[sid] for sid in test_ids]
        y_pred = [label for _, label in predictions]
        ranking = None
        if len(est.classes) == 2 and cfg.evaluation.cutoffs:
            positive = _positive_label(cfg, est.classes)
            pos_idx = est.classes.index(positive)
            ranking = [
                (sid, float(probabilities[sid][pos_idx]), labels.rows[sid] == positive)
                for sid in test_ids
            ]
        report = classification_report(cfg, y_true, y_pred, ranking)
        files.update(write_report(report, out, "eval"))
        for fig in render_report_figures(report, out, "eval"):
            files[fig.stem] = fig
    return InferenceResult(
        predictions=predictions,
        probabilities=probabilities,
        classes=est.classes,
        report=report,
        files=files,
        timings=timings,
    )


def run_evaluate(cfg: PipelineConfig) -> MetricReport:
    """Recompute the metric report from persisted predictions and labels."""
    if cfg.labels is None:
        raise ConfigError("evaluate requires a labels file")
    labels = load_label_table(cfg)
    pred_path = cfg.output_dir / "predictions.csv"
    if not pred_path.exists():
        raise CompatibilityError(f"no predictions at {pred_path}; run infer first")
    lines = pred_path.read_text(encoding="utf-8").splitlines()
    rows = [line.split(",") for line in lines[1:] if line]
    if not rows:
        raise ConfigError("predictions file is empty; nothing to evaluate")
    test_ids = [r[0] for r in rows]
    y_pred = [r[1] for r in rows]
    unknown = [sid for sid in test_ids if sid not in labels.rows]
    if unknown:
        raise AlignmentError(f"predicted ids without labels: {unknown[:5]}")
    y_true = [labels.rows[sid] for sid in test_ids]

    ranking = None
    proba_path = cfg.output_dir / "probabilities.csv"
    if cfg.evaluation.cutoffs and proba_path.exists():
        plines = proba_path.read_text(encoding="utf-8").splitlines()
        classes = plines[0].split(",")[1:]
        if len(classes) == 2:
            positive = _positive_label(cfg, classes)
            pos_idx = classes.index(positive)
            ranking = []
            for line in plines[1:]:
                if not line:
                    continue
                parts = line.split(",")
                ranking.append(
                    (
                        parts[0],
                        float(parts[1 + pos_idx]),
                        labels.rows[parts[0]] == positive,
                    )
                )
    report = classification_report(cfg, sorted(set(y_true)), y_true, y_pred, ranking)
    files = write_report(report, cfg.output_dir, "eval")
    render_report_figures(report, cfg.output_dir, "eval")
    logger.info("evaluation written to %s", files["report"])
    return report


# -- baselines ----------------------------------------------------------------


def run_baselines(cfg: PipelineConfig) -> dict[str, MetricReport]:
    """Single-descriptor, concatenation, and (odd m) majority-vote baselines
    on the same split and metrics as the fusion run."""
    if cfg.labels is None:
        raise ConfigError("baselines require a labels file")
    tables = load_tables(cfg)
    labels = load_label_table(cfg)
    _check_label_coverage(cfg, tables, labels)
    split = ensure_split(cfg, labels)
    train_ids = sorted(split.train)
    test_ids = sorted(split.test)
    y_train = [labels.rows[sid] for sid in train_ids]
    y_test = [labels.rows[sid] for sid in test_ids]

    descriptors: list[str] = []
    for ranker in cfg.rankers:
        if ranker.descriptor_name not in descriptors:
            descriptors.append(ranker.descriptor_name)

    def fit_and_predict(table: FeatureTable) -> list[str]:
        X_train = table.matrix(train_ids)
        est = train_classifier(X_train, y_train, cfg.train)
        return [predict_label(est, table.rows[sid]) for sid in test_ids]

    reports: dict[str, MetricReport] = {}
    single_predictions: list[list[str]] = []
    for name in descriptors:
        normalized = concat_features([tables[name]], train_ids)
        y_pred = fit_and_predict(normalized)
        single_predictions.append(y_pred)
        reports[f"single:{name}"] = classification_report(cfg, y_test, y_pred)

    concat_table = concat_features([tables[name] for name in descriptors], train_ids)
    y_concat = fit_and_predict(concat_table)
    reports["concatenation"] = classification_report(cfg, y_test, y_concat)

    notes = []
    if len(descriptors) % 2 == 1:
        y_vote = majority_vote(single_predictions)
        reports["majority_vote"] = classification_report(cfg, y_test, y_vote)
    else:
        notes.append(
            f"majority vote skipped: needs an odd descriptor count, got {len(descriptors)}"
        )
        logger.info("%s", notes[-1])

    split_path = cfg.output_dir / ARTIFACT_FILES["split"]
    summary = MetricReport(
        values={
            f"{method}.balanced_accuracy": rep.values["balanced_accuracy"]
            for method, rep in reports.items()
        },
        notes=notes + [f"split digest: {artifacts.file_digest(split_path)}"],
    )
    write_report(summary, cfg.output_dir, "baselines")
    render_method_comparison(
        {m: rep.values["balanced_accuracy"] for m, rep in reports.items()},
        "balanced_accuracy",
        cfg.output_dir,
        "baselines",
    )
    return reports


# -- cut-off sweep --------------------------------------------------------------


def _truncate_store(store: RankStore, L: int) -> RankStore:
    cut = RankStore(m=store.m, L=L)
    for rank in store.all_ranks():
        cut.put(truncate_rank(rank, L))
    return cut


def _fit_eval_in_memory(
    cfg: PipelineConfig,
    tables: dict[str, FeatureTable],
    labels: LabelTable,
    split: SplitSpec,
    store: RankStore,
    L: int,
) -> MetricReport:
    """Train and evaluate one fusion setup at cut-off L without touching disk."""
    train_ids = sorted(split.train)
    test_ids = sorted(split.test)
    graphs = [extract_fusion_graph(store.ranks_of(sid), store) for sid in train_ids]
    ctx = build_embed_context(cfg, split.train, train_graphs=graphs)
    X = [ctx.embed(g) for g in graphs]
    y = [labels.rows[sid] for sid in train_ids]
    est = train_classifier(X, y, cfg.train)

    y_pred = []
    ranking = []
    positive = _positive_label(cfg, est.classes)
    pos_idx = est.classes.index(positive) if positive in est.classes else None
    for sid in test_ids:
        vecs = {r.descriptor_name: tables[r.descriptor_name].rows[sid] for r in cfg.rankers}
        ranks = query_ranks(
            tables,
            cfg.rankers,
            sid,
            vecs,
            train_ids,
            L,
            exclude=sid if cfg.self_exclusion else None,
        )
        graph = extract_fusion_graph(ranks, store)
        vector = ctx.embed(graph)
        y_pred.append(predict_label(est, vector))
        if len(est.classes) == 2 and cfg.evaluation.cutoffs and pos_idx is not None:
            proba = _proba_vector(est, vector)
            ranking.append((sid, float(proba[pos_idx]), labels.rows[sid] == positive))
    y_true = [labels.rows[sid] for sid in test_ids]
    return classification_report(cfg, y_true, y_pred, ranking if ranking else None)


def sweep_l(cfg: PipelineConfig, l_values: list[int]) -> list[dict]:
    """Metric-vs-L table: retrain and re-evaluate the configured embedding
    at each cut-off, reusing one rank store built at the largest L.

    Truncating a stored rank to a prefix and re-normalizing equals
    recomputing it at the smaller cut-off, so one scan suffices.
    """
    if not l_values:
        raise ConfigError("sweep needs at least one L value")
    l_values = sorted(set(int(v) for v in l_values))
    if l_values[0] < 1:
        raise ConfigError(f"L values must be >= 1, got {l_values[0]}")
    if cfg.labels is None:
        raise ConfigError("sweep requires a labels file")
    tables = load_tables(cfg)
    labels = load_label_table(cfg)
    _check_label_coverage(cfg, tables, labels)
    split = ensure_split(cfg, labels)
    full_store = build_rank_store(
        tables, cfg.rankers, split.train, max(l_values), self_exclude=cfg.self_exclusion
    )

    rows = []
    for L in l_values:
        t0 = time.perf_counter()
        store = _truncate_store(full_store, L)
        report = _fit_eval_in_memory(cfg, tables, labels, split, store, L)
        row = {"L": L, **report.values}
        rows.append(row)
        logger.info(
            "sweep L=%-4d balanced_accuracy=%.4f (%.2fs)",
            L,
            report.values["balanced_accuracy"],
            time.perf_counter() - t0,
        )

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    metric_names = sorted({k for row in rows for k in row if k != "L"})
    csv_path = out / "sweep_l.csv"
    with csv_path.open("w", encoding="utf-8") as fh:
        fh.write("L," + ",".join(metric_names) + "\n")
        for row in rows:
            fh.write(
                str(row["L"])
                + ","
                + ",".join(repr(row[m]) if m in row else "" for m in metric_names)
                + "\n"
            )
    render_sweep_figure(rows, "balanced_accuracy", out)
    return rows


# -- hygiene audit --------------------------------------------------------------


def audit_hygiene(cfg: PipelineConfig) -> list[str]:
    """Verify that no test id influenced any training artifact.

    Returns a list of violations (empty means the audit passed). Checks the
    rank store's queries and response entries, graph vertices and edges,
    vector ids and dimensions, and codebook word labels against the split.
    """
    manifest = read_manifest(cfg)
    split = artifacts.load_split(require_artifact(cfg, manifest, "split"))
    train, test = split.train, split.test
    violations: list[str] = []
    if train & test:
        violations.append(f"split overlap: {sorted(train & test)[:5]}")

    store = artifacts.load_rank_store(require_artifact(cfg, manifest, "ranks"))
    for key in store:
        sid, j = key
        if sid in test:
            violations.append(f"rank store holds ranks of test id {sid!r}")
        for entry in store.require(sid, j).entries:
            if entry.response in test:
                violations.append(
                    f"rank of {sid!r} (ranker {j}) contains test id {entry.response!r}"
                )

    graphs = artifacts.load_fusion_graphs(require_artifact(cfg, manifest, "graphs"))
    for g in graphs:
        if g.query in test:
            violations.append(f"train graph built for test id {g.query!r}")
        for v in g.vertices:
            if v in test:
                violations.append(f"graph of {g.query!r} has test vertex {v!r}")

    pairs = artifacts.load_fusion_vectors(require_artifact(cfg, manifest, "vectors"))
    n = len(train)
    for sid, vec in pairs:
        if sid in test:
            violations.append(f"train vector for test id {sid!r}")
        if vec.kind == "V" and vec.dim != n:
            violations.append(f"V vector dim {vec.dim} != train size {n}")
        if vec.kind == "H" and vec.dim != n + n * (n - 1) // 2:
            violations.append(f"H vector dim {vec.dim} inconsistent with train size {n}")

    if cfg.embedding.kind == "K":
        codebook = artifacts.load_codebook(require_artifact(cfg, manifest, "codebook"))
        for word in codebook.words:
            for v in word.vertices:
                if v in test:
                    violations.append(f"codebook word contains test id {v!r}")
    return violations
