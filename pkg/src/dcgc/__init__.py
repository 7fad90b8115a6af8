"""Dual-center graph clustering: contrastive pretraining with
neighbor-distribution weighted negatives, then KL self-training against
feature and neighbor-distribution centers."""

from .clusteval import clustering_metrics, kmeans
from .errors import ConfigError, DataError, DcgcError, NumericError
from .gradcheck import run_gradient_checks
from .graphio import (Graph, SbmSpec, export_graph, generate_sbm,
                      homophily_ratio, load_graph, normalized_laplacian)
from .pipeline import TrainConfig, attribute_kmeans_baseline, run_dcgc
from .report import ClusterReport, load_report, save_report, summarize_repeats

__version__ = "0.1.0"

__all__ = [
    "ClusterReport",
    "ConfigError",
    "DataError",
    "DcgcError",
    "Graph",
    "NumericError",
    "SbmSpec",
    "TrainConfig",
    "attribute_kmeans_baseline",
    "clustering_metrics",
    "export_graph",
    "generate_sbm",
    "homophily_ratio",
    "kmeans",
    "load_graph",
    "load_report",
    "normalized_laplacian",
    "run_dcgc",
    "run_gradient_checks",
    "save_report",
    "summarize_repeats",
    "__version__",
]
