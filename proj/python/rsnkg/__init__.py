"""Recurrent skipping networks over knowledge graphs.

Thin re-export of the compiled module: graph loading and assembly, biased
path sampling, training, alignment / completion evaluation, and
degree-preserving dataset sampling.
"""

from rsnkg._core import (
    DataError,
    InternalError,
    KnowledgeGraph,
    Model,
    PathCorpus,
    WalkConfig,
    __version__,
    add_reverse_relations,
    align,
    assemble_joint,
    complete,
    densify,
    graph_checksum,
    load_checkpoint,
    load_corpus,
    load_graph,
    load_triples,
    sample_dataset,
    sample_paths,
    save_corpus,
    save_graph,
    train,
)

__all__ = [
    "DataError",
    "InternalError",
    "KnowledgeGraph",
    "Model",
    "PathCorpus",
    "WalkConfig",
    "__version__",
    "add_reverse_relations",
    "align",
    "assemble_joint",
    "complete",
    "densify",
    "graph_checksum",
    "load_checkpoint",
    "load_corpus",
    "load_graph",
    "load_triples",
    "sample_dataset",
    "sample_paths",
    "save_corpus",
    "save_graph",
    "train",
]
