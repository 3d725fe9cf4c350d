"""Hypernym ranking for short financial terms.

Pipeline pieces: text normalization, acronym extraction, glossary-based
term augmentation, taxonomy-graded pair generation, embedding backends,
similarity-head training, and ranked-label evaluation.
"""

from .corpus import (
    CANONICAL_LABEL_NAMES,
    AugmentedRecord,
    Dataset,
    LabelCatalog,
    LabeledTerm,
    LabelId,
    LabelSet,
    Source,
    split,
    validate_catalog,
)
from .embed import HashingTfidfEmbedder, RemoteEmbeddingClient, cosine, fit_idf
from .glossary import LookupClient, LookupConfig, accept_match, augment, match_exact, match_lookup, overlap_ratios
from .pairgen import PairGenConfig, ScoredPair, distribution_report, generate, undersample_zeros
from .ranking import (
    EvalReport,
    HypernymRanker,
    RankedPrediction,
    SoftmaxTextClassifier,
    accuracy,
    classify_term,
    mean_rank,
    rank_term,
)
from .simtrain import (
    ProjectionHead,
    ProjectionHeadTrainer,
    TrainConfig,
    binarize,
    contrastive_loss,
    grad_check,
    mnr_loss,
    project,
    train,
)
from .taxonomy import Taxonomy, TaxonomyNode, load_taxonomy, pair_score, root_and_first_child
from .textnorm import clean, singularize, token_set

__version__ = "0.1.0"
