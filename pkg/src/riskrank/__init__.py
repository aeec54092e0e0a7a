"""Risk ranking on company register networks with personalized PageRank and BiRank."""

from riskrank.graph import (
    BipartiteGraph,
    ObservationWindow,
    RegisterRecord,
    RiskVector,
    SurrogateMap,
    UnipartiteGraph,
    build_bipartite,
    compute_edge_weight,
    graph_stats,
    project_unipartite,
    split_surrogate,
)
from riskrank.partition import (
    FiedlerResult,
    PartitionSet,
    connected_components,
    fiedler_vector,
    recursive_partition,
    restrict_bipartite,
    spectral_bisection,
)
from riskrank.ranking import (
    BiRankParams,
    PageRankParams,
    RankResult,
    birank,
    pagerank,
    row_normalize,
    symmetric_normalize,
)
from riskrank.crossval import FoldAssignment, assign_folds, cv_rank
from riskrank.evaluate import (
    MetricReport,
    mann_whitney,
    precision_recall_at,
    spearman,
    target_chart,
)
from riskrank.datagen import GenConfig, generate, register_preset

__version__ = "0.1.0"

__all__ = [
    "BiRankParams",
    "BipartiteGraph",
    "FiedlerResult",
    "FoldAssignment",
    "GenConfig",
    "MetricReport",
    "ObservationWindow",
    "PageRankParams",
    "PartitionSet",
    "RankResult",
    "RegisterRecord",
    "RiskVector",
    "SurrogateMap",
    "UnipartiteGraph",
    "assign_folds",
    "birank",
    "build_bipartite",
    "compute_edge_weight",
    "connected_components",
    "cv_rank",
    "fiedler_vector",
    "generate",
    "graph_stats",
    "mann_whitney",
    "pagerank",
    "register_preset",
    "precision_recall_at",
    "project_unipartite",
    "recursive_partition",
    "restrict_bipartite",
    "row_normalize",
    "spearman",
    "spectral_bisection",
    "split_surrogate",
    "symmetric_normalize",
    "target_chart",
]
