"""Tag-vector (or query-expansion) re-ranking of retrieved captions."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .embeddings import EmbeddingTable, IngestionError, caption_vector, cosine_similarity
from .retrieval import NeighborSet
from .text import CaptionRecord

DEFAULT_N_CANDIDATES = 50
CATEGORIES = ("noun", "adjective", "verb", "unknown")
_POS_ALIASES = {
    "noun": "noun", "n": "noun", "nn": "noun",
    "adjective": "adjective", "adj": "adjective", "a": "adjective", "jj": "adjective",
    "verb": "verb", "v": "verb", "vb": "verb",
}

MIL = "mil"
QUERY_EXPANSION = "query_expansion"


@dataclass(frozen=True)
class TagPrediction:
    word: str
    probability: float
    category: str = "unknown"

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"tag probability {self.probability} outside [0, 1]")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown tag category {self.category!r}")
        object.__setattr__(self, "word", " ".join(self.word.lower().split()))


def normalize_pos(pos: str | None) -> str:
    if pos is None:
        return "unknown"
    return _POS_ALIASES.get(pos.strip().lower(), "unknown")


def load_tag_predictions(stream: TextIO) -> dict[str, list[TagPrediction]]:
    """``{"image_id": ..., "tags": [{"word", "prob", "pos"}, ...]}`` per line."""
    out: dict[str, list[TagPrediction]] = {}
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            image_id = str(obj["image_id"])
            tags = [
                TagPrediction(str(t["word"]), float(t["prob"]), normalize_pos(t.get("pos")))
                for t in obj.get("tags", [])
            ]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise IngestionError(f"tag file line {lineno}: {exc}") from None
        if image_id in out:
            raise IngestionError(f"tag file line {lineno}: duplicate image_id {image_id!r}")
        out[image_id] = tags
    return out


def build_mil_vector(
    tags: Iterable[TagPrediction],
    table: EmbeddingTable,
    min_probability: float = 0.0,
    weight_by_probability: bool = False,
) -> np.ndarray | None:
    """Sum of the vectors of qualifying tags, or None when none qualify.

    Multi-word tags contribute the sum of their words and qualify only when
    every word is in the table.
    """
    total = None
    for tag in tags:
        if tag.probability < min_probability:
            continue
        vec = table.phrase_vector(tag.word)
        if vec is None:
            continue
        if weight_by_probability:
            vec = tag.probability * vec
        total = vec if total is None else total + vec
    return total


def build_q_vector(
    neighbors: NeighborSet, table: EmbeddingTable, stopwords: frozenset[str]
) -> np.ndarray:
    """Visual-similarity weighted average of all retrieved caption vectors.

    The normaliser is the total number of captions, which equals
    images x captions-per-image when every image has the same count.
    """
    if len(neighbors) == 0:
        raise ValueError("empty neighbour set")
    total = table.zeros()
    count = 0
    for nb, sim in zip(neighbors.entries, neighbors.similarities()):
        for cap in nb.record.captions:
            total += sim * caption_vector(cap.tokens, table, stopwords).vector
            count += 1
    if count == 0:
        raise ValueError("neighbour images carry no captions")
    return total / count


@dataclass(frozen=True, eq=False)
class Candidate:
    caption: CaptionRecord
    vector: np.ndarray
    coverage: int
    cosine_to_reference: float
    source_image_id: str
    source_visual_similarity: float

    def sort_key(self):
        return (
            -self.cosine_to_reference,
            -self.source_visual_similarity,
            self.caption.text,
            self.caption.caption_id,
        )


@dataclass(frozen=True)
class CandidateSet:
    entries: tuple[Candidate, ...]
    reference_kind: str
    pool_size: int

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> Candidate:
        return self.entries[i]


def score_pool(
    neighbors: NeighborSet,
    reference: np.ndarray,
    table: EmbeddingTable,
    stopwords: frozenset[str],
) -> list[Candidate]:
    """Every caption of every neighbour with its cosine to ``reference``, unsorted."""
    pool = []
    for nb, sim in zip(neighbors.entries, neighbors.similarities()):
        for cap in nb.record.captions:
            cv = caption_vector(cap.tokens, table, stopwords)
            pool.append(
                Candidate(
                    caption=cap,
                    vector=cv.vector,
                    coverage=cv.coverage,
                    cosine_to_reference=cosine_similarity(cv.vector, reference),
                    source_image_id=nb.record.image_id,
                    source_visual_similarity=sim,
                )
            )
    return pool


def select_candidates(
    neighbors: NeighborSet,
    reference: np.ndarray,
    table: EmbeddingTable,
    stopwords: frozenset[str],
    n: int = DEFAULT_N_CANDIDATES,
    reference_kind: str = MIL,
) -> CandidateSet:
    """Top-n captions by cosine to ``reference``.

    Ties go to the caption from the visually closer image, then to the
    lexicographically smaller caption text.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if reference_kind not in (MIL, QUERY_EXPANSION):
        raise ValueError(f"unknown reference kind {reference_kind!r}")
    pool = score_pool(neighbors, reference, table, stopwords)
    if not pool:
        raise ValueError("no captions among the retrieved images")
    pool.sort(key=Candidate.sort_key)
    return CandidateSet(tuple(pool[:n]), reference_kind, len(pool))


def choose_reference(
    tags: Sequence[TagPrediction],
    neighbors: NeighborSet,
    table: EmbeddingTable,
    stopwords: frozenset[str],
    min_probability: float = 0.0,
    weight_by_probability: bool = False,
) -> tuple[np.ndarray, str]:
    """The tag vector when any tag qualifies, otherwise the query-expansion vector."""
    mil = build_mil_vector(tags, table, min_probability, weight_by_probability)
    if mil is not None:
        return mil, MIL
    return build_q_vector(neighbors, table, stopwords), QUERY_EXPANSION
