from .bleu import bleu_stats, corpus_bleu
from .entity import (
    DEFAULT_BIN_EDGES,
    BinMatrix,
    EntityAccuracyReport,
    EntityScore,
    accuracy_from_links,
    bin_index,
    bin_labels,
    bin_matrix,
    entity_accuracy,
    frequency_gain_matrix,
    group_accuracy,
    partition_entities,
)
from .stats import CorpusStats, CoverageStats, corpus_stats, coverage_stats, occurrences

__all__ = [
    "DEFAULT_BIN_EDGES",
    "BinMatrix",
    "CorpusStats",
    "CoverageStats",
    "EntityAccuracyReport",
    "EntityScore",
    "accuracy_from_links",
    "bin_index",
    "bin_labels",
    "bin_matrix",
    "bleu_stats",
    "corpus_bleu",
    "corpus_stats",
    "coverage_stats",
    "entity_accuracy",
    "frequency_gain_matrix",
    "group_accuracy",
    "occurrences",
    "partition_entities",
]
