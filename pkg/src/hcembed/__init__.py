"""Objective-based hierarchical clustering of embedding vectors.

Scalable top-down algorithms (gradient-descent bisection with the inverse
kernel trick, a MAX-2-SAT based hierarchy, balanced bisection), classic
agglomerative baselines, exact O(nk) objective evaluators with normalized
scores and dendrogram purity, plus a brute-force oracle suite for
verification at desk scale.
"""

from .dataset import EmbeddingSet, gen_mixture, load_dataset, save_dataset
from .dendrogram import (
    Dendrogram,
    TreeAssembler,
    deserialize,
    lca_sizes_accumulate,
    leaf_tree,
    path_tree,
    random_binary_tree,
    serialize,
    star_tree,
)
from .measures import (
    DISTANCE,
    SIMILARITY,
    FeatureMaps,
    Measure,
    build_feature_maps,
    pairwise,
    pairwise_matrix,
)
from .objectives import (
    ObjectiveReport,
    dendrogram_purity,
    eval_ckmm,
    eval_ckmm_plus,
    eval_dasgupta,
    eval_mw,
    eval_mw_plus,
    ckmm_upper_bound,
    evaluate_tree,
    mw_upper_bound,
    normalize,
    random_tree_expectation,
    upper_bound,
)
from .partitioner import (
    MAXIMIZE_CUT,
    MINIMIZE_CUT,
    PartitionConfig,
    PartitionVector,
    derandomized_balanced_cut,
    gd_partition,
    project_box_hyperplane,
)
from .algos import (
    ALGORITHMS,
    HcConfig,
    average_linkage,
    b2satc,
    balanced_bisection_hc,
    balanced_max2sat_partition,
    bkmeans,
    bppc,
    hac,
    random_cut,
    run_algorithm,
)
from . import errors, oracle
from .estimators import (
    AgglomerativeHierarchy,
    BalancedBisectionHierarchy,
    BisectPlusPlus,
    BisectingKMeansHierarchy,
    MaxSatHierarchy,
    RandomCutHierarchy,
    RandomHierarchy,
    make_estimator,
)

__version__ = "0.1.0"
