"""Adaptive-radius visual neighbourhood over precomputed image features."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .embeddings import IngestionError, as_vector, euclidean_distance
from .text import CaptionRecord

DEFAULT_EPSILON = 0.15
DEFAULT_MAX_IMAGES = 100


@dataclass(frozen=True, eq=False)
class ImageRecord:
    image_id: str
    feature: np.ndarray
    captions: tuple[CaptionRecord, ...] = ()


class ImageStore:
    """Read-only collection of ImageRecords with a stacked feature matrix."""

    def __init__(self, records: Iterable[ImageRecord]):
        self.records: tuple[ImageRecord, ...] = tuple(records)
        if not self.records:
            raise ValueError("empty image store")
        seen = set()
        for rec in self.records:
            if rec.image_id in seen:
                raise ValueError(f"duplicate image_id {rec.image_id!r}")
            seen.add(rec.image_id)
        dims = {rec.feature.shape for rec in self.records}
        if len(dims) != 1:
            raise ValueError(f"non-uniform feature dimensions {sorted(dims)}")
        self.features = np.vstack([rec.feature for rec in self.records])
        self.features.setflags(write=False)
        self.dimension = self.features.shape[1]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass(frozen=True, eq=False)
class Neighbor:
    record: ImageRecord
    distance: float


@dataclass(frozen=True, eq=False)
class NeighborSet:
    entries: tuple[Neighbor, ...]
    radius: float
    closest_distance: float
    epsilon: float

    def __len__(self) -> int:
        return len(self.entries)

    def similarities(self) -> list[float]:
        """Visual similarity of every entry with the radius as normalizer.

        A zero radius means every entry coincides with the query, so all get 1.
        """
        if self.radius == 0.0:
            return [1.0] * len(self.entries)
        return [visual_similarity_from_distance(n.distance, self.radius) for n in self.entries]


def retrieve_neighbors(
    query_feature,
    store: ImageStore | Sequence[ImageRecord],
    epsilon: float = DEFAULT_EPSILON,
    max_images: int | None = DEFAULT_MAX_IMAGES,
    exclude: Iterable[str] = (),
) -> NeighborSet:
    """Keep every record within (1 + epsilon) times the nearest distance.

    Entries are sorted by (distance, image_id) and truncated to the
    ``max_images`` closest. ``max_images=None`` disables the cap. Records
    whose id is in ``exclude`` are never returned.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if max_images is not None and max_images < 1:
        raise ValueError("max_images must be positive")
    if not isinstance(store, ImageStore):
        store = ImageStore(store)
    query = np.asarray(query_feature, dtype=np.float64)
    if query.shape != (store.dimension,):
        raise ValueError(
            f"query dimension {query.shape} does not match store dimension {store.dimension}"
        )

    diff = store.features - query
    distances = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    skip = set(exclude)
    if skip:
        distances = distances.copy()
        for i, rec in enumerate(store.records):
            if rec.image_id in skip:
                distances[i] = np.inf
        if np.isinf(distances).all():
            raise ValueError("every record in the store is excluded")
    closest = float(distances.min())
    radius = (1.0 + epsilon) * closest
    inside = np.flatnonzero(distances <= radius)
    order = sorted(inside, key=lambda i: (distances[i], store.records[i].image_id))
    if max_images is not None:
        order = order[:max_images]
    entries = tuple(Neighbor(store.records[i], float(distances[i])) for i in order)
    return NeighborSet(entries, radius, closest, epsilon)


def visual_similarity_from_distance(distance: float, normalizer: float) -> float:
    if normalizer <= 0:
        raise ValueError("normalizer must be > 0")
    return 1.0 - distance / normalizer


def visual_similarity(query_feature, record: ImageRecord, normalizer: float) -> float:
    """``1 - dist(query, record) / normalizer``."""
    if normalizer <= 0:
        raise ValueError("normalizer must be > 0")
    return visual_similarity_from_distance(
        euclidean_distance(query_feature, record.feature), normalizer
    )


def _iter_jsonl(stream: TextIO, what: str):
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestionError(f"{what} line {lineno}: {exc.msg}") from None
        if not isinstance(obj, dict) or "image_id" not in obj:
            raise IngestionError(f"{what} line {lineno}: missing image_id")
        yield lineno, obj


def load_image_features(stream: TextIO) -> dict[str, np.ndarray]:
    """``{"image_id": ..., "feature": [...]}`` per line."""
    features: dict[str, np.ndarray] = {}
    dim = None
    for lineno, obj in _iter_jsonl(stream, "feature file"):
        try:
            vec = as_vector(obj["feature"])
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestionError(f"feature file line {lineno}: bad feature ({exc})") from None
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise IngestionError(
                f"feature file line {lineno}: dimension {vec.shape[0]} != {dim}"
            )
        image_id = str(obj["image_id"])
        if image_id in features:
            raise IngestionError(f"feature file line {lineno}: duplicate image_id {image_id!r}")
        features[image_id] = vec
    return features


def load_caption_db(stream: TextIO) -> dict[str, tuple[CaptionRecord, ...]]:
    """``{"image_id": ..., "captions": ["...", ...]}`` per line."""
    db: dict[str, tuple[CaptionRecord, ...]] = {}
    for lineno, obj in _iter_jsonl(stream, "caption file"):
        captions = obj.get("captions")
        if not isinstance(captions, list) or not all(isinstance(c, str) for c in captions):
            raise IngestionError(f"caption file line {lineno}: captions must be a list of strings")
        image_id = str(obj["image_id"])
        if image_id in db:
            raise IngestionError(f"caption file line {lineno}: duplicate image_id {image_id!r}")
        db[image_id] = tuple(
            CaptionRecord.from_text(image_id, k, text) for k, text in enumerate(captions)
        )
    return db


def build_store(
    features: dict[str, np.ndarray],
    captions: dict[str, tuple[CaptionRecord, ...]],
    exclude: Iterable[str] = (),
) -> ImageStore:
    """Images that have both a feature vector and captions, in sorted id order."""
    skip = set(exclude)
    ids = sorted(i for i in features if i in captions and i not in skip)
    return ImageStore(ImageRecord(i, features[i], captions[i]) for i in ids)
