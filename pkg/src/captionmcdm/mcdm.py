"""Entropy criterion weighting and TOPSIS ranking."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

BENEFIT = "benefit"
COST = "cost"


@dataclass(frozen=True, eq=False)
class DecisionMatrix:
    """m alternatives x n criteria.

    ``offsets`` records the per-column constant added by
    :func:`shift_nonnegative` (zero for an unshifted matrix).
    """

    values: np.ndarray
    criterion_kinds: tuple[str, ...] = ()
    row_labels: tuple[str, ...] = ()
    column_labels: tuple[str, ...] = ()
    offsets: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"decision matrix must be m x n with m, n >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("decision matrix has non-finite entries")
        m, n = values.shape
        kinds = tuple(self.criterion_kinds) or (BENEFIT,) * n
        if len(kinds) != n or any(k not in (BENEFIT, COST) for k in kinds):
            raise ValueError(f"criterion_kinds must be {n} of benefit/cost")
        rows = tuple(self.row_labels) or tuple(str(i) for i in range(m))
        cols = tuple(self.column_labels) or tuple(f"c{j}" for j in range(n))
        if len(rows) != m or len(cols) != n:
            raise ValueError("label counts do not match matrix shape")
        offsets = np.zeros(n) if self.offsets is None else np.array(self.offsets, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "criterion_kinds", kinds)
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "column_labels", cols)
        object.__setattr__(self, "offsets", offsets)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _as_matrix(matrix) -> DecisionMatrix:
    return matrix if isinstance(matrix, DecisionMatrix) else DecisionMatrix(matrix)


def shift_nonnegative(matrix: DecisionMatrix) -> DecisionMatrix:
    """Add ``-min`` to every column whose minimum is negative."""
    matrix = _as_matrix(matrix)
    mins = matrix.values.min(axis=0)
    shift = np.where(mins < 0, -mins, 0.0)
    if not shift.any():
        return matrix
    return replace(matrix, values=matrix.values + shift, offsets=matrix.offsets + shift)


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: np.ndarray
    entropy: np.ndarray
    diversification: np.ndarray
    uniform_fallback: bool = False

    def __len__(self) -> int:
        return len(self.weights)


def entropy_weights(matrix: DecisionMatrix) -> WeightVector:
    """Shannon-entropy criterion weights.

    Columns are normalised to proportions (an all-zero column counts as
    uniform), E_j = -sum p ln p / ln m with 0 ln 0 = 0, d_j = 1 - E_j and the
    weights are d normalised to sum to one. If every d_j is zero the weights
    fall back to 1/n.
    """
    matrix = _as_matrix(matrix)
    r = matrix.values
    m, n = r.shape
    if m < 2:
        raise ValueError("entropy weights need at least two alternatives")
    if (r < 0).any():
        raise ValueError("entropy weights need a non-negative matrix; shift it first")
    col_sum = r.sum(axis=0)
    p = np.empty_like(r)
    zero_cols = col_sum == 0
    p[:, ~zero_cols] = r[:, ~zero_cols] / col_sum[~zero_cols]
    p[:, zero_cols] = 1.0 / m
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    entropy = -plogp.sum(axis=0) / np.log(m)
    # pin exactly-uniform columns so rounding cannot leak weight into them
    uniform = (r == r[0]).all(axis=0)
    entropy = np.where(uniform, 1.0, np.clip(entropy, 0.0, 1.0))
    d = 1.0 - entropy
    total = d.sum()
    if total <= 0.0:
        log.info("all criteria uniform; using equal weights")
        return WeightVector(np.full(n, 1.0 / n), entropy, d, True)
    return WeightVector(d / total, entropy, d, False)


@dataclass(frozen=True, eq=False)
class TopsisResult:
    closeness: np.ndarray
    ranking: tuple[int, ...]
    ideal: np.ndarray
    anti_ideal: np.ndarray
    d_plus: np.ndarray
    d_minus: np.ndarray
    weighted: np.ndarray
    degenerate_rows: tuple[int, ...] = ()


def topsis_rank(matrix: DecisionMatrix, weights) -> TopsisResult:
    """Rank alternatives by relative closeness to the ideal point.

    Vector normalisation per column (an all-zero column stays zero), weighted,
    Euclidean separation from the ideal and anti-ideal points. An alternative
    at distance zero from both gets closeness 1. Ranking is by closeness
    descending, ties in row order.
    """
    matrix = _as_matrix(matrix)
    w = np.asarray(weights.weights if isinstance(weights, WeightVector) else weights, dtype=np.float64)
    r = matrix.values
    m, n = r.shape
    if w.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {w.shape}")

    norms = np.sqrt((r**2).sum(axis=0))
    normalized = np.zeros_like(r)
    nz = norms > 0
    normalized[:, nz] = r[:, nz] / norms[nz]
    v = normalized * w

    benefit = np.array([k == BENEFIT for k in matrix.criterion_kinds])
    col_max, col_min = v.max(axis=0), v.min(axis=0)
    ideal = np.where(benefit, col_max, col_min)
    anti = np.where(benefit, col_min, col_max)

    d_plus = np.sqrt(((v - ideal) ** 2).sum(axis=1))
    d_minus = np.sqrt(((v - anti) ** 2).sum(axis=1))
    denom = d_plus + d_minus
    degenerate = denom == 0
    closeness = np.where(degenerate, 1.0, d_minus / np.where(degenerate, 1.0, denom))
    if degenerate.any():
        log.info("rows %s coincide with both ideal points; closeness set to 1", np.flatnonzero(degenerate))
    ranking = tuple(int(i) for i in sorted(range(m), key=lambda i: (-closeness[i], i)))
    return TopsisResult(
        closeness, ranking, ideal, anti, d_plus, d_minus, v,
        tuple(int(i) for i in np.flatnonzero(degenerate)),
    )


def tie_break_order(result: TopsisResult, candidates: Sequence) -> list[int]:
    """Full ranking where equal closeness goes to the higher visual similarity
    of the source image, then higher cosine to the reference, then caption text."""
    def key(i):
        c = candidates[i]
        return (
            -float(result.closeness[i]),
            -c.source_visual_similarity,
            -c.cosine_to_reference,
            c.caption.text,
            c.caption.caption_id,
        )

    return sorted(range(len(result.closeness)), key=key)


def closeness_ties(result: TopsisResult) -> list[list[int]]:
    """Groups of rows (size >= 2) sharing the same closeness, best first."""
    groups: dict[float, list[int]] = {}
    for i, c in enumerate(result.closeness):
        groups.setdefault(float(c), []).append(i)
    return [g for c, g in sorted(groups.items(), key=lambda kv: -kv[0]) if len(g) > 1]


def select_best(result: TopsisResult, candidates: Sequence):
    """Candidate with the highest closeness after tie-breaking."""
    if len(candidates) != len(result.closeness):
        raise ValueError("result rows do not align with candidates")
    return candidates[tie_break_order(result, candidates)[0]]
