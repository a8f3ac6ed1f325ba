"""Knowledge-graph-to-text pipeline and link prediction evaluation harness."""

from .dataset_pipeline import DatasetRecord, emit_queries, read_records, write_dataset
from .evaluation import (
    Candidate,
    EntityIndex,
    EntityScores,
    MetricsReport,
    PredictionSet,
    RankingResult,
    classify_target_position,
    combined_metric,
    exact_match,
    filtered_rank,
    hits_at_k,
    nearest_entities,
    neighbor_ablation,
    scores_from_samples,
)
from .kg_store import (
    GraphStats,
    KnowledgeGraph,
    Triple,
    adjacent,
    ingest_triples,
    known_heads,
    known_tails,
    stats,
)
from .neighborhood import Neighborhood, NeighborTriple, Query, form_neighborhood
from .relation_similarity import (
    RelationEmbeddings,
    SimilarityMatrix,
    build_matrix,
    cosine,
    load_vectors,
    rank_by_similarity,
)
from .text_catalog import RawCatalog, TextCatalog, disambiguate, load_raw
from .verbalizer import (
    SubwordTokenizer,
    TokenBudget,
    VerbalizedQuery,
    WhitespaceTokenizer,
    assemble_input,
    count_tokens,
    verbalize_neighbor,
    verbalize_task,
)

__version__ = "0.1.0"
