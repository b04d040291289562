"""vocab-bridge: expand a pretrained model's subword vocabulary through
cross-lingual embedding alignment."""

from .alignment import (
    AlignConfig,
    IndependentFit,
    JointFit,
    LinearMap,
    NeighborList,
    apply_map,
    compose_maps,
    csls_knn,
    csls_score,
    eval_precision_at_k,
    fit_independent_mapping,
    fit_joint_mapping,
    load_map,
    procrustes_solve,
    save_map,
    unsupervised_score,
)
from .dictionary import (
    BilingualDictionary,
    identical_subword_dictionary,
    load_dictionary,
    split_dictionary,
)
from .embeddings import (
    EmbeddingMatrix,
    Vocabulary,
    load_embeddings,
    load_vocabulary,
    normalize_rows,
    save_embeddings,
    save_vocabulary,
    subset,
)
from .expansion import (
    ExpandedModel,
    ExpansionStrategy,
    StrategyKind,
    emit_expanded,
    expand_vocabulary,
    select_new_subwords,
)
from .mixture import (
    MixtureAssignment,
    build_all_assignments,
    candidate_set,
    load_assignments,
    mixture_embedding,
    mixture_weights,
    save_assignments,
)
from .oov import OovDelta, OovReport, compare_reports, corpus_oov_stats
from .tokenizer import (
    BpeModel,
    Segmentation,
    SegmentStatus,
    bpe_apply,
    bpe_train,
    classify_corpus,
    wordpiece_segment,
)

__version__ = "0.1.0"

__all__ = [
    "AlignConfig",
    "BilingualDictionary",
    "BpeModel",
    "EmbeddingMatrix",
    "ExpandedModel",
    "ExpansionStrategy",
    "IndependentFit",
    "JointFit",
    "LinearMap",
    "MixtureAssignment",
    "NeighborList",
    "OovDelta",
    "OovReport",
    "Segmentation",
    "SegmentStatus",
    "StrategyKind",
    "Vocabulary",
    "apply_map",
    "bpe_apply",
    "bpe_train",
    "build_all_assignments",
    "candidate_set",
    "classify_corpus",
    "compare_reports",
    "compose_maps",
    "corpus_oov_stats",
    "csls_knn",
    "csls_score",
    "emit_expanded",
    "eval_precision_at_k",
    "expand_vocabulary",
    "fit_independent_mapping",
    "fit_joint_mapping",
    "identical_subword_dictionary",
    "load_assignments",
    "load_dictionary",
    "load_embeddings",
    "load_map",
    "load_vocabulary",
    "mixture_embedding",
    "mixture_weights",
    "normalize_rows",
    "procrustes_solve",
    "save_assignments",
    "save_embeddings",
    "save_map",
    "save_vocabulary",
    "select_new_subwords",
    "split_dictionary",
    "subset",
    "unsupervised_score",
    "wordpiece_segment",
]
