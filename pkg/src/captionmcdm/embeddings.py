"""Word vectors, caption composition and the two distance functions."""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Mapping, NamedTuple

import numpy as np

DEFAULT_DIMENSION = 500


class IngestionError(ValueError):
    """Raised when an input file cannot be parsed."""


class DuplicateTokenWarning(UserWarning):
    pass


def as_vector(values: Iterable[float] | np.ndarray) -> np.ndarray:
    vec = np.array(values, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("vector has non-finite components")
    vec.setflags(write=False)
    return vec


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable token -> vector map. Lookups are lowercased."""

    dimension: int
    entries: Mapping[str, np.ndarray]
    duplicate_count: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        if self.dimension <= 0:
            raise ValueError("dimension must be positive")
        for token, vec in self.entries.items():
            if vec.shape != (self.dimension,):
                raise ValueError(f"vector for {token!r} has shape {vec.shape}")

    @classmethod
    def from_dict(cls, vectors: Mapping[str, Iterable[float]]) -> "EmbeddingTable":
        entries: dict[str, np.ndarray] = {}
        for token, values in vectors.items():
            entries.setdefault(token.lower(), as_vector(values))
        if not entries:
            raise ValueError("empty embedding table")
        dims = {v.shape[0] for v in entries.values()}
        if len(dims) != 1:
            raise ValueError(f"mixed vector dimensions {sorted(dims)}")
        return cls(dims.pop(), entries)

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, token: str) -> np.ndarray | None:
        return self.entries.get(token.lower())

    def __getitem__(self, token: str) -> np.ndarray:
        return self.entries[token.lower()]

    def zeros(self) -> np.ndarray:
        return np.zeros(self.dimension)

    def phrase_vector(self, phrase: str) -> np.ndarray | None:
        """Sum of the word vectors of a (possibly multi-word) phrase.

        Returns None unless every word is in the table.
        """
        words = phrase.split()
        if not words:
            return None
        total = self.zeros()
        for w in words:
            vec = self.get(w)
            if vec is None:
                return None
            total = total + vec
        return total


def load_embeddings(
    source: BinaryIO | bytes,
    format: str = "tsv",
    dimension: int | None = None,
) -> EmbeddingTable:
    """Parse an embedding stream.

    ``tsv`` is ``token<TAB>c1<TAB>...<TAB>cD`` per line. ``binary`` is the
    word2vec C binary layout (``"V D\\n"`` header, then ``token<SP>`` followed
    by D little-endian float32 values per entry). When ``dimension`` is None
    it is taken from the first entry.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    if format == "tsv":
        pairs = _iter_tsv(source, dimension)
    elif format == "binary":
        pairs = _iter_word2vec_binary(source, dimension)
    else:
        raise ValueError(f"unknown embedding format {format!r}")

    entries: dict[str, np.ndarray] = {}
    duplicates = 0
    dim = dimension
    for lineno, token, vec in pairs:
        dim = vec.shape[0]
        token = token.lower()
        if token in entries:
            duplicates += 1
            warnings.warn(
                f"duplicate token {token!r} at entry {lineno}; keeping first",
                DuplicateTokenWarning,
                stacklevel=2,
            )
            continue
        entries[token] = vec
    if not entries or dim is None:
        raise IngestionError("empty embedding stream")
    return EmbeddingTable(dim, entries, duplicates)


def _iter_tsv(stream: BinaryIO, dimension: int | None):
    for lineno, raw in enumerate(stream, start=1):
        line = raw.decode("utf-8").rstrip("\r\n")
        if not line.strip():
            continue
        token, *parts = line.split("\t")
        if dimension is None:
            dimension = len(parts)
            if dimension == 0:
                raise IngestionError(f"line {lineno}: no vector components")
        if len(parts) != dimension:
            raise IngestionError(
                f"line {lineno}: expected {dimension} components, got {len(parts)}"
            )
        try:
            vec = as_vector([float(p) for p in parts])
        except ValueError as exc:
            raise IngestionError(f"line {lineno}: {exc}") from None
        yield lineno, token, vec


def _iter_word2vec_binary(stream: BinaryIO, dimension: int | None):
    header = stream.readline().split()
    if not header:
        raise IngestionError("empty embedding stream")
    if len(header) != 2:
        raise IngestionError("line 1: expected '<vocab> <dim>' header")
    count, dim = int(header[0]), int(header[1])
    if dimension is not None and dim != dimension:
        raise IngestionError(f"line 1: file dimension {dim} != configured {dimension}")
    nbytes = 4 * dim
    for entry in range(1, count + 1):
        word = bytearray()
        while True:
            ch = stream.read(1)
            if not ch:
                raise IngestionError(f"entry {entry}: truncated token")
            if ch == b" ":
                break
            if ch != b"\n":
                word.extend(ch)
        buf = stream.read(nbytes)
        if len(buf) != nbytes:
            raise IngestionError(f"entry {entry}: expected {dim} components")
        try:
            vec = as_vector(np.frombuffer(buf, dtype="<f4"))
        except ValueError as exc:
            raise IngestionError(f"entry {entry}: {exc}") from None
        yield entry, word.decode("utf-8"), vec


def load_stopwords(lines: Iterable[str]) -> frozenset[str]:
    words = frozenset(w.strip().lower() for w in lines if w.strip())
    if not words:
        raise IngestionError("empty stopword list")
    return words


def _check_lengths(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between a and b; 0.0 if either is all-zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_lengths(a, b)
    sa = float(np.abs(a).max(initial=0.0))
    sb = float(np.abs(b).max(initial=0.0))
    if sa == 0.0 or sb == 0.0:
        return 0.0
    # rescale first so tiny or huge components cannot under/overflow
    a = a / sa
    b = b / sb
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    return min(1.0, max(-1.0, float(a @ b) / (na * nb)))


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_lengths(a, b)
    diff = a - b
    return math.sqrt(float(diff @ diff))


class CaptionVector(NamedTuple):
    vector: np.ndarray
    coverage: int
    missing: tuple[str, ...]


def caption_vector(
    tokens: Iterable[str], table: EmbeddingTable, stopwords: frozenset[str] | set[str]
) -> CaptionVector:
    """Sum the vectors of the non-stopword tokens that are in the table.

    Out-of-vocabulary tokens are skipped and listed in ``missing``.
    """
    total = table.zeros()
    coverage = 0
    missing = []
    for tok in tokens:
        if tok in stopwords:
            continue
        vec = table.get(tok)
        if vec is None:
            missing.append(tok)
            continue
        total += vec
        coverage += 1
    return CaptionVector(total, coverage, tuple(missing))
