"""Desk-scale laboratory for perturbation-based iterative layer pruning."""

from ._core import (
    CheckpointError,
    ContractError,
    DimensionError,
    EvalResult,
    ImportanceReport,
    IterationRecord,
    LayerImportance,
    LayerRemovalEntry,
    LayerRemovalReport,
    ModelConfig,
    ModelStats,
    NormKind,
    PerturbMethod,
    PerturbationSpec,
    PerturbedPair,
    PruneConfig,
    PruneMode,
    PruneRun,
    QuadraticFit,
    TimingCurve,
    TrainOptions,
    TransformerModel,
    ValidationError,
    WordEdit,
    aggregate,
    apply_consistency_filter,
    apply_edits,
    block_influence_baseline,
    layer_removal_study,
    load_checkpoint,
    load_lexicon,
    model_stats,
    perplexity,
    pert_import,
    perturb_corpus,
    run_prune,
    save_checkpoint,
    timing_curve,
    tokenize,
    train_toy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
