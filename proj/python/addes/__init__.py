"""Graph-constrained generative data augmentation for inexactly supervised
multi-label classification."""

from ._addes import (
    ConfigError,
    ContractError,
    DomainError,
    LabelGraph,
    ParseError,
    average_precision,
    conditional_adjacency,
    config_hash,
    default_config,
    kl_bernoulli,
    kl_gaussian,
    link_targets,
    normalize_adjacency,
    roc_auc,
    run_pipeline,
    save_synth_data,
    synth_data,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DomainError",
    "LabelGraph",
    "ParseError",
    "average_precision",
    "conditional_adjacency",
    "config_hash",
    "default_config",
    "kl_bernoulli",
    "kl_gaussian",
    "link_targets",
    "normalize_adjacency",
    "roc_auc",
    "run_pipeline",
    "save_synth_data",
    "synth_data",
]
