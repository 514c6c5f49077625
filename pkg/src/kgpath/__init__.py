"""Connect sentence pairs through commonsense knowledge-graph relation paths.

The pipeline extracts concepts from a sentence pair, asks a relation
classifier for direct links, beam-searches multi-hop relation chains with a
target generator, and combines both into a single verdict per concept pair.
A purely graph-based shortest-path baseline and an evaluation suite ship
alongside.
"""

from .graph import (
    CORE_RELATION_NAMES,
    RANDOM_LABEL,
    VAGUE_RELATION_NAMES,
    Concept,
    KnowledgeGraph,
    RelationInventory,
    RelationType,
    Triple,
    build_graph,
    close_under_inverses,
    load_graph,
    load_graph_file,
    neighbors,
    normalize_concept,
    normalize_concept_text,
)
from .embeddings import (
    EmbeddingStore,
    PhraseVector,
    cosine,
    encode_phrase,
    load_embeddings,
    load_embeddings_file,
)
from .extract import (
    ConceptMention,
    ConceptPair,
    SentencePair,
    extract_concepts,
    load_corpus,
    load_corpus_file,
    pair_concepts,
)
from .backends import (
    GeneratedTarget,
    KGOracleClassifier,
    KGOracleGenerator,
    PosFilteredGenerator,
    RelationDistribution,
    RemoteClassifier,
    RemoteConfig,
    RemoteGenerator,
    RemoteSession,
)
from .pathfind import (
    ChainParams,
    ConnectResult,
    DirectLink,
    KnowledgePath,
    PathHop,
    Verdict,
    chain,
    combine,
    link_direct,
    result_from_record,
    result_to_record,
)
from .baseline import Subgraph, build_subgraph, rank_paths, replace_vague, score_nodes
from .evaluate import (
    AnnotationRecord,
    CorpusStats,
    MetricReport,
    build_random_class,
    build_silver_paths,
    cohens_kappa,
    corpus_stats,
    encode_and_cosim,
    hits_at_k,
    templatize,
    token_match_f1,
    weighted_prf,
)

__version__ = "0.1.0"
