"""End-to-end caption selection: load inputs, decide per query, evaluate."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .candidates import (
    DEFAULT_N_CANDIDATES,
    TagPrediction,
    build_mil_vector,
    build_q_vector,
    load_tag_predictions,
    select_candidates,
    MIL,
    QUERY_EXPANSION,
)
from .embeddings import DEFAULT_DIMENSION, EmbeddingTable, load_embeddings, load_stopwords
from .matching import (
    CRITERIA,
    AdjNounLexicon,
    MatchParams,
    PosLexicon,
    build_decision_matrix,
    extract_caption_slots,
    extract_query_slots,
    load_adjnoun_lexicon,
    load_pos_lexicon,
    match_items,
    match_pairs,
)
from .mcdm import (
    closeness_ties,
    entropy_weights,
    shift_nonnegative,
    tie_break_order,
    topsis_rank,
)
from .metrics import EvalReport, evaluate_corpus
from .retrieval import (
    DEFAULT_EPSILON,
    DEFAULT_MAX_IMAGES,
    ImageStore,
    build_store,
    load_caption_db,
    load_image_features,
    retrieve_neighbors,
)
from .text import CaptionRecord, tokenize

log = logging.getLogger(__name__)

FLOAT_DIGITS = 12
_PATH_FIELDS = (
    "embeddings_path",
    "stopwords_path",
    "pos_lexicon_path",
    "adjnoun_lexicon_path",
    "image_features_path",
    "captions_path",
    "tag_predictions_path",
    "queries_path",
)


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    embeddings_path: str = ""
    stopwords_path: str = ""
    pos_lexicon_path: str = ""
    adjnoun_lexicon_path: str = ""
    image_features_path: str = ""
    captions_path: str = ""
    tag_predictions_path: str = ""
    queries_path: str = ""
    epsilon: float = DEFAULT_EPSILON
    max_images: int = DEFAULT_MAX_IMAGES
    n_candidates: int = DEFAULT_N_CANDIDATES
    threshold_H: float = 0.85
    min_tag_probability: float = 0.0
    weight_tags_by_probability: bool = False
    embedding_dimension: int = DEFAULT_DIMENSION
    embeddings_format: str = "tsv"
    workers: int = 1

    def validate(self) -> "PipelineConfig":
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.max_images < 1:
            raise ConfigError("max_images must be >= 1")
        if self.n_candidates < 1:
            raise ConfigError("n_candidates must be >= 1")
        if not 0.0 < self.threshold_H <= 1.0:
            raise ConfigError("threshold_H must lie in (0, 1]")
        if not 0.0 <= self.min_tag_probability <= 1.0:
            raise ConfigError("min_tag_probability must lie in [0, 1]")
        if self.embedding_dimension < 1:
            raise ConfigError("embedding_dimension must be >= 1")
        if self.embeddings_format not in ("tsv", "binary"):
            raise ConfigError("embeddings_format must be tsv or binary")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for name in _PATH_FIELDS:
            if name == "queries_path":
                continue
            path = getattr(self, name)
            if not path or not Path(path).is_file():
                raise ConfigError(f"{name}: cannot read {path!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        """Load a JSON config; relative paths resolve against its directory."""
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        cfg = cls.from_dict(data)
        base = path.parent
        for name in _PATH_FIELDS:
            value = getattr(cfg, name)
            if value and not Path(value).is_absolute():
                setattr(cfg, name, str(base / value))
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class Resources:
    table: EmbeddingTable
    stopwords: frozenset[str]
    pos_lex: PosLexicon
    adjnoun_lex: AdjNounLexicon
    features: dict[str, np.ndarray]
    captions: dict[str, tuple[CaptionRecord, ...]]
    tags: dict[str, list[TagPrediction]]
    store: ImageStore


def load_resources(config: PipelineConfig) -> Resources:
    config.validate()
    with open(config.embeddings_path, "rb") as fh:
        table = load_embeddings(fh, config.embeddings_format, config.embedding_dimension)
    with open(config.stopwords_path, encoding="utf-8") as fh:
        stopwords = load_stopwords(fh)
    with open(config.pos_lexicon_path, encoding="utf-8") as fh:
        pos_lex = load_pos_lexicon(fh)
    with open(config.adjnoun_lexicon_path, encoding="utf-8") as fh:
        adjnoun_lex = load_adjnoun_lexicon(fh)
    with open(config.image_features_path, encoding="utf-8") as fh:
        features = load_image_features(fh)
    with open(config.captions_path, encoding="utf-8") as fh:
        captions = load_caption_db(fh)
    with open(config.tag_predictions_path, encoding="utf-8") as fh:
        tags = load_tag_predictions(fh)
    store = build_store(features, captions)
    return Resources(table, stopwords, pos_lex, adjnoun_lex, features, captions, tags, store)


def read_query_ids(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def _round(x: float) -> float:
    return float(f"{float(x):.{FLOAT_DIGITS}g}")


def _clean(obj: Any) -> Any:
    """Recursively turn numpy values into JSON-safe, fixed-precision Python values."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(obj)
    return obj


@dataclass
class SelectionReport:
    """Everything needed to replay one query's decision by hand."""

    query_id: str
    status: str = "ok"
    error: str | None = None
    branch: str | None = None
    excluded_self: bool = False
    neighbors: dict = field(default_factory=dict)
    tags_used: list = field(default_factory=list)
    query_slots: dict = field(default_factory=dict)
    candidates: list = field(default_factory=list)
    decision_matrix: dict | None = None
    weights: dict | None = None
    topsis: dict | None = None
    chosen: dict | None = None
    tie_breaks: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "SelectionReport":
        return cls(**data)


def select_caption(query_id: str, resources: Resources, config: PipelineConfig) -> SelectionReport:
    """Run retrieval, re-ranking, matching, weighting and TOPSIS for one query."""
    report = SelectionReport(query_id)
    query_feature = resources.features.get(query_id)
    if query_feature is None:
        raise KeyError(f"no feature vector for query {query_id!r}")

    excluded = any(r.image_id == query_id for r in resources.store.records)
    if excluded:
        log.info("query %s is in the knowledge base; excluding it from its own neighbourhood", query_id)
    report.excluded_self = excluded
    neighbors = retrieve_neighbors(
        query_feature, resources.store, config.epsilon, config.max_images, exclude=(query_id,)
    )
    report.neighbors = {
        "count": len(neighbors),
        "radius": neighbors.radius,
        "closest_distance": neighbors.closest_distance,
        "epsilon": neighbors.epsilon,
        "images": [
            {"image_id": nb.record.image_id, "distance": nb.distance, "similarity": sim}
            for nb, sim in zip(neighbors.entries, neighbors.similarities())
        ],
    }

    all_tags = resources.tags.get(query_id, [])
    tags = [t for t in all_tags if t.probability >= config.min_tag_probability]
    report.tags_used = [
        {"word": t.word, "prob": t.probability, "pos": t.category} for t in tags
    ]
    mil = build_mil_vector(tags, resources.table, 0.0, config.weight_tags_by_probability)
    if mil is not None:
        reference, branch = mil, MIL
    else:
        reference, branch = build_q_vector(neighbors, resources.table, resources.stopwords), QUERY_EXPANSION
    report.branch = branch

    candidates = select_candidates(
        neighbors, reference, resources.table, resources.stopwords, config.n_candidates, branch
    )
    cos_groups: dict[float, list[str]] = {}
    for c in candidates.entries:
        cos_groups.setdefault(c.cosine_to_reference, []).append(c.caption.caption_id)
    for cos, ids in cos_groups.items():
        if len(ids) > 1:
            report.tie_breaks.append({
                "stage": "candidates",
                "cosine": cos,
                "order": ids,
                "rule": "visual_similarity desc, text asc",
            })
    query_slots = extract_query_slots(tags, resources.pos_lex, resources.adjnoun_lex)
    report.query_slots = query_slots.to_dict()
    caption_slots = [extract_caption_slots(c.caption.tokens, resources.pos_lex) for c in candidates.entries]
    params = MatchParams(config.threshold_H)
    report.candidates = [
        {
            "caption_id": c.caption.caption_id,
            "image_id": c.source_image_id,
            "text": c.caption.text,
            "cosine": c.cosine_to_reference,
            "visual_similarity": c.source_visual_similarity,
            "coverage": c.coverage,
            "slots": s.to_dict(),
            "matches": {
                "objects": [list(m) for m in match_items(query_slots.objects, s.objects, resources.table, params).matches],
                "attributes": [
                    list(m)
                    for m in match_pairs(query_slots.attribute_pairs, s.attribute_pairs, resources.table, params).matches
                ],
                "actions": [list(m) for m in match_items(query_slots.actions, s.actions, resources.table, params).matches],
            },
        }
        for c, s in zip(candidates.entries, caption_slots)
    ]

    if len(candidates) == 1:
        best = candidates[0]
        report.chosen = _chosen(best, 0)
        return report

    raw = build_decision_matrix(
        query_slots, candidates, resources.table, resources.pos_lex, params, caption_slots
    )
    shifted = shift_nonnegative(raw)
    weights = entropy_weights(shifted)
    result = topsis_rank(shifted, weights)
    report.decision_matrix = {
        "columns": list(CRITERIA),
        "rows": list(raw.row_labels),
        "raw": raw.values,
        "shifted": shifted.values,
        "offsets": shifted.offsets,
    }
    report.weights = {
        "weights": weights.weights,
        "entropy": weights.entropy,
        "diversification": weights.diversification,
        "uniform_fallback": weights.uniform_fallback,
    }
    report.topsis = {
        "closeness": result.closeness,
        "ranking": list(result.ranking),
        "d_plus": result.d_plus,
        "d_minus": result.d_minus,
        "ideal": result.ideal,
        "anti_ideal": result.anti_ideal,
        "degenerate_rows": list(result.degenerate_rows),
    }
    order = tie_break_order(result, candidates)
    for group in closeness_ties(result):
        resolved = [i for i in order if i in group]
        report.tie_breaks.append({
            "stage": "topsis",
            "closeness": result.closeness[group[0]],
            "rows": group,
            "order": resolved,
            "rule": "visual_similarity desc, cosine desc, text asc",
        })
    report.chosen = _chosen(candidates[order[0]], order[0])
    return report


def _chosen(candidate, row: int) -> dict:
    return {
        "row": row,
        "caption_id": candidate.caption.caption_id,
        "image_id": candidate.source_image_id,
        "text": candidate.caption.text,
    }


def _safe_select(query_id: str, resources: Resources, config: PipelineConfig) -> SelectionReport:
    try:
        return select_caption(query_id, resources, config)
    except (KeyError, ValueError) as exc:
        log.warning("query %s failed: %s", query_id, exc)
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        return SelectionReport(query_id, status="error", error=str(msg))


def run_queries(
    resources: Resources,
    config: PipelineConfig,
    query_ids: Sequence[str],
    workers: int | None = None,
) -> list[SelectionReport]:
    """One report per query id, in input order regardless of worker count."""
    workers = workers or config.workers
    if workers <= 1:
        return [_safe_select(q, resources, config) for q in query_ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda q: _safe_select(q, resources, config), query_ids))


def run_pipeline(
    config: PipelineConfig, query_ids: Sequence[str] | None = None, workers: int | None = None
) -> list[SelectionReport]:
    resources = load_resources(config)
    if query_ids is None:
        if not config.queries_path:
            raise ConfigError("no query ids given and queries_path is unset")
        query_ids = read_query_ids(config.queries_path)
    return run_queries(resources, config, query_ids, workers)


def write_reports(reports: Iterable[SelectionReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rep in reports:
            fh.write(rep.to_json())
            fh.write("\n")


def read_reports(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def evaluate(
    reports: Sequence[SelectionReport | dict],
    references: dict[str, tuple[CaptionRecord, ...]],
) -> EvalReport:
    """Score the chosen captions against every reference caption of each query.

    Failed queries are skipped and counted.
    """
    if not reports:
        raise ValueError("no reports to evaluate")
    ids, cands, refs = [], [], []
    skipped = 0
    for rep in reports:
        rep = rep.to_dict() if isinstance(rep, SelectionReport) else rep
        if rep.get("status") != "ok" or not rep.get("chosen"):
            skipped += 1
            continue
        qid = rep["query_id"]
        if qid not in references or not references[qid]:
            raise KeyError(f"no reference captions for image {qid!r}")
        ids.append(qid)
        cands.append(tokenize(rep["chosen"]["text"]))
        refs.append([list(c.tokens) for c in references[qid]])
    if not cands:
        raise ValueError("every report failed; nothing to evaluate")
    return evaluate_corpus(ids, cands, refs, skipped)
