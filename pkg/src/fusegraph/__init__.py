"""Graph-based rank fusion for multimodal prediction.

Turns per-descriptor ranked lists into fusion graphs, embeds them as sparse
fusion vectors (vertex, vertex+edge, or codebook histograms), trains a
linear one-vs-rest estimator over them, and evaluates with ranking and
classification metrics.
"""

from .dataset import (
    FeatureTable,
    LabelTable,
    SplitSpec,
    load_features,
    load_labels,
    stratified_split,
)
from .embedding import (
    Codebook,
    FusionVector,
    GoI,
    VocabularyV,
    build_codebook,
    build_vocabulary,
    embed_h,
    embed_k,
    embed_v,
    extract_gois,
    mcs_distance,
    soft_assign,
)
from .fusion_graph import FusionGraph, extract_fusion_graph, graph_stats
from .learn import (
    Estimator,
    TrainConfig,
    concat_features,
    majority_vote,
    predict_label,
    predict_proba,
    train_classifier,
)
from .metrics import (
    MetricReport,
    average_precision_at_k,
    balanced_accuracy,
    mean_ap,
    per_class_recall,
)
from .ranker import (
    Comparator,
    Rank,
    RankStore,
    Ranker,
    build_rank_store,
    compute_rank,
    cosine_dissimilarity,
    euclidean_distance,
    normalize_rank,
    pearson_distance,
    query_ranks,
    truncate_rank,
    weighted_jaccard_distance,
)

__version__ = "0.1.0"
