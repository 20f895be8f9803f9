"""Retrieval-based caption selection with entropy-weighted TOPSIS."""

from .candidates import (
    CandidateSet,
    TagPrediction,
    build_mil_vector,
    build_q_vector,
    select_candidates,
)
from .embeddings import (
    EmbeddingTable,
    IngestionError,
    caption_vector,
    cosine_similarity,
    euclidean_distance,
    load_embeddings,
    load_stopwords,
)
from .matching import (
    AdjNounLexicon,
    MatchParams,
    PosLexicon,
    SlotSet,
    attribute_match_score,
    build_decision_matrix,
    extract_caption_slots,
    extract_query_slots,
    slot_match_score,
)
from .mcdm import (
    DecisionMatrix,
    TopsisResult,
    WeightVector,
    entropy_weights,
    select_best,
    shift_nonnegative,
    topsis_rank,
)
from .metrics import EvalReport, bleu, lcs_length, rouge_l
from .pipeline import PipelineConfig, SelectionReport, evaluate, run_pipeline
from .retrieval import (
    ImageRecord,
    ImageStore,
    NeighborSet,
    retrieve_neighbors,
    visual_similarity,
)
from .text import CaptionRecord, tokenize

__version__ = "0.1.0"
