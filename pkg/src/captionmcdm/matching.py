"""Object / attribute / action slot extraction and criterion scores."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .candidates import CandidateSet, TagPrediction
from .embeddings import EmbeddingTable, IngestionError, cosine_similarity
from .mcdm import BENEFIT, DecisionMatrix
from .text import CaptionRecord

DEFAULT_THRESHOLD = 0.85
EXACT_TOL = 1e-9
POS_TAGS = ("noun", "adjective", "verb", "other")
CRITERIA = ("objects", "attributes", "actions")

# Penalty per unmatched item: more query items than caption items is worse.
PENALTY_QUERY_SURPLUS = 1.0 / 2.0
PENALTY_CAPTION_SURPLUS = 1.0 / 3.0


class PosLexicon:
    """Token -> most frequent coarse POS."""

    def __init__(self, entries: Mapping[str, str]):
        for tok, pos in entries.items():
            if pos not in POS_TAGS:
                raise ValueError(f"bad POS {pos!r} for {tok!r}")
        self.entries = {t.lower(): p for t, p in entries.items()}

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def get(self, token: str, default: str = "other") -> str:
        return self.entries.get(token, default)

    @classmethod
    def from_counts(cls, counts: Iterable[tuple[str, str, int]]) -> "PosLexicon":
        """Pick each token's most frequent POS; ties keep the first seen."""
        tally: dict[str, Counter] = defaultdict(Counter)
        first_seen: dict[tuple[str, str], int] = {}
        for k, (tok, pos, n) in enumerate(counts):
            tok = tok.lower()
            tally[tok][pos] += n
            first_seen.setdefault((tok, pos), k)
        return cls({
            tok: min(c, key=lambda p: (-c[p], first_seen[(tok, p)]))
            for tok, c in tally.items()
        })

    @classmethod
    def from_tagged_corpus(
        cls, sentences: Iterable[Sequence[tuple[str, str]]], top_k: int = 1000
    ) -> "PosLexicon":
        """Build from (token, pos) sequences, keeping the ``top_k`` most frequent tokens."""
        token_freq: Counter = Counter()
        counts: list[tuple[str, str, int]] = []
        for sent in sentences:
            for tok, pos in sent:
                token_freq[tok.lower()] += 1
                counts.append((tok.lower(), pos, 1))
        keep = {t for t, _ in sorted(token_freq.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]}
        return cls.from_counts(c for c in counts if c[0] in keep)


def load_pos_lexicon(stream: TextIO) -> PosLexicon:
    """TSV ``token<TAB>pos[<TAB>count]``; repeated tokens resolve to the most frequent POS."""
    rows = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3) or parts[1] not in POS_TAGS:
            raise IngestionError(f"pos lexicon line {lineno}: expected token<TAB>pos")
        try:
            count = int(parts[2]) if len(parts) == 3 else 1
        except ValueError:
            raise IngestionError(f"pos lexicon line {lineno}: bad count") from None
        rows.append((parts[0], parts[1], count))
    return PosLexicon.from_counts(rows)


class AdjNounLexicon:
    """Observed adjective -> noun pairings, in file order."""

    def __init__(self, entries: Mapping[str, Sequence[str]]):
        self.entries = {a.lower(): tuple(n.lower() for n in ns) for a, ns in entries.items()}

    def nouns_for(self, adjective: str) -> tuple[str, ...]:
        return self.entries.get(adjective, ())


def load_adjnoun_lexicon(stream: TextIO) -> AdjNounLexicon:
    entries: dict[str, list[str]] = defaultdict(list)
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise IngestionError(f"adjective-noun lexicon line {lineno}: expected adjective<TAB>noun")
        adj, noun = parts[0].lower(), parts[1].lower()
        if noun not in entries[adj]:
            entries[adj].append(noun)
    return AdjNounLexicon(entries)


def _dedupe(items):
    return list(dict.fromkeys(items))


@dataclass(frozen=True)
class SlotSet:
    objects: tuple[str, ...] = ()
    actions: tuple[str, ...] = ()
    attribute_pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(_dedupe(self.objects)))
        object.__setattr__(self, "actions", tuple(_dedupe(self.actions)))
        object.__setattr__(
            self, "attribute_pairs", tuple(_dedupe(tuple(p) for p in self.attribute_pairs))
        )

    def is_empty(self) -> bool:
        return not (self.objects or self.actions or self.attribute_pairs)

    def to_dict(self) -> dict:
        return {
            "objects": list(self.objects),
            "attributes": [list(p) for p in self.attribute_pairs],
            "actions": list(self.actions),
        }


@dataclass(frozen=True)
class MatchParams:
    threshold_H: float = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold_H <= 1.0:
            raise ValueError("threshold_H must lie in (0, 1]")


def extract_query_slots(
    tags: Sequence[TagPrediction], pos_lex: PosLexicon, adjnoun_lex: AdjNounLexicon
) -> SlotSet:
    """Sort predicted tags into objects, actions and adjective-noun pairs.

    A tag's own category wins over the lexicon. Each adjective is attached
    to the highest-probability tagged noun that the adjective-noun lexicon
    pairs it with; adjectives with no such noun keep an empty noun.
    """
    resolved = []
    for tag in tags:
        cat = tag.category if tag.category != "unknown" else pos_lex.get(tag.word)
        if cat in ("noun", "adjective", "verb"):
            resolved.append((tag, cat))

    nouns = [t for t, c in resolved if c == "noun"]
    noun_rank = {}
    for k, t in enumerate(sorted(nouns, key=lambda t: -t.probability)):
        noun_rank.setdefault(t.word, k)

    pairs = []
    for tag, cat in resolved:
        if cat != "adjective":
            continue
        options = [n for n in adjnoun_lex.nouns_for(tag.word) if n in noun_rank]
        noun = min(options, key=noun_rank.__getitem__) if options else ""
        pairs.append((tag.word, noun))

    return SlotSet(
        objects=tuple(t.word for t in nouns),
        actions=tuple(t.word for t, c in resolved if c == "verb"),
        attribute_pairs=tuple(pairs),
    )


def extract_caption_slots(tokens: CaptionRecord | Sequence[str], pos_lex: PosLexicon, window: int = 3) -> SlotSet:
    """Lexicon-based slot extraction from a tokenized caption.

    An adjective pairs with the nearest noun at most ``window`` tokens ahead,
    failing that the nearest noun before it.
    """
    if isinstance(tokens, CaptionRecord):
        tokens = tokens.tokens
    tags = [pos_lex.get(t) for t in tokens]
    objects, actions, pairs = [], [], []
    for i, (tok, pos) in enumerate(zip(tokens, tags)):
        if pos == "noun":
            objects.append(tok)
        elif pos == "verb":
            actions.append(tok)
        elif pos == "adjective":
            noun = ""
            for j in range(i + 1, min(i + 1 + window, len(tokens))):
                if tags[j] == "noun":
                    noun = tokens[j]
                    break
            else:
                for j in range(i - 1, -1, -1):
                    if tags[j] == "noun":
                        noun = tokens[j]
                        break
            pairs.append((tok, noun))
    return SlotSet(tuple(objects), tuple(actions), tuple(pairs))


@dataclass(frozen=True)
class MatchDetail:
    score: float
    matches: tuple[tuple[str, str, float], ...]
    n_query: int
    n_caption: int
    penalty: float = 0.0


def _greedy_pairs(sim: np.ndarray, q_keys: Sequence[str], b_keys: Sequence[str], threshold: float):
    """Best-first one-to-one pairing of cells with sim >= threshold.

    Equal similarities are resolved by item text so the outcome does not
    depend on list order.
    """
    cells = [
        (-sim[i, j], q_keys[i], b_keys[j], i, j)
        for i in range(sim.shape[0])
        for j in range(sim.shape[1])
        if sim[i, j] >= threshold
    ]
    cells.sort()
    used_q, used_b, chosen = set(), set(), []
    for neg, _, _, i, j in cells:
        if i in used_q or j in used_b:
            continue
        used_q.add(i)
        used_b.add(j)
        chosen.append((i, j, float(-neg)))
    return chosen


def penalty_for(n_query: int, n_caption: int) -> float:
    if n_query > n_caption:
        return PENALTY_QUERY_SURPLUS
    if n_query < n_caption:
        return PENALTY_CAPTION_SURPLUS
    return 0.0


def _match(q_vecs, b_vecs, q_keys, b_keys, params: MatchParams) -> MatchDetail:
    Q, B = len(q_vecs), len(b_vecs)
    if Q == 0:
        return MatchDetail(0.0, (), 0, B)
    sim = np.zeros((Q, B))
    for i, qv in enumerate(q_vecs):
        for j, bv in enumerate(b_vecs):
            s = 0.0 if qv is None or bv is None else cosine_similarity(qv, bv)
            # complete match scores exactly one
            sim[i, j] = 1.0 if abs(s - 1.0) <= EXACT_TOL else s
    pairs = _greedy_pairs(sim, q_keys, b_keys, params.threshold_H)
    M = len(pairs)
    S = sum(s for _, _, s in pairs)
    P = penalty_for(Q, B)
    score = (S - (min(Q, B) - M) - abs(Q - B) * P) / Q
    return MatchDetail(
        score,
        tuple((q_keys[i], b_keys[j], s) for i, j, s in pairs),
        Q,
        B,
        P,
    )


def match_items(query_items, caption_items, table: EmbeddingTable, params: MatchParams) -> MatchDetail:
    q = _dedupe(query_items)
    b = _dedupe(caption_items)
    return _match(
        [table.phrase_vector(x) for x in q],
        [table.phrase_vector(x) for x in b],
        q,
        b,
        params,
    )


def slot_match_score(query_items, caption_items, table: EmbeddingTable, params: MatchParams) -> float:
    """Criterion score for object or action slots.

    Matched pairs add their cosine similarity, unmatched overlap costs 1 each
    and the size difference costs 1/2 (query surplus) or 1/3 (caption surplus)
    per item, all divided by the number of query items.
    """
    return match_items(query_items, caption_items, table, params).score


def _pair_text(pair) -> str:
    return " ".join(w for w in pair if w)


def match_pairs(query_pairs, caption_pairs, table: EmbeddingTable, params: MatchParams) -> MatchDetail:
    q = [_pair_text(p) for p in _dedupe(tuple(p) for p in query_pairs)]
    b = [_pair_text(p) for p in _dedupe(tuple(p) for p in caption_pairs)]
    return _match(
        [table.phrase_vector(x) for x in q],
        [table.phrase_vector(x) for x in b],
        q,
        b,
        params,
    )


def attribute_match_score(query_pairs, caption_pairs, table: EmbeddingTable, params: MatchParams) -> float:
    """Same aggregate as :func:`slot_match_score` over adjective-noun pairs.

    A pair is represented by the sum of its two word vectors.
    """
    return match_pairs(query_pairs, caption_pairs, table, params).score


def build_decision_matrix(
    query_slots: SlotSet,
    candidates: CandidateSet,
    table: EmbeddingTable,
    pos_lex: PosLexicon,
    params: MatchParams,
    caption_slots: Sequence[SlotSet] | None = None,
) -> DecisionMatrix:
    """One row per candidate, columns [objects, attributes, actions]."""
    if len(candidates) == 0:
        raise ValueError("no candidates")
    if caption_slots is None:
        caption_slots = [extract_caption_slots(c.caption.tokens, pos_lex) for c in candidates.entries]
    rows = []
    for slots in caption_slots:
        rows.append([
            slot_match_score(query_slots.objects, slots.objects, table, params),
            attribute_match_score(query_slots.attribute_pairs, slots.attribute_pairs, table, params),
            slot_match_score(query_slots.actions, slots.actions, table, params),
        ])
    return DecisionMatrix(
        np.array(rows, dtype=np.float64),
        criterion_kinds=(BENEFIT,) * 3,
        row_labels=tuple(c.caption.caption_id for c in candidates.entries),
        column_labels=CRITERIA,
    )
