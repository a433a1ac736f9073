"""Structural node embeddings for directed graphs via heat diffusion."""

__version__ = "0.1.0"

from .embed import (
    DigraphwaveConfig,
    EmbeddingMatrix,
    apply_threshold,
    digraphwave,
    digraphwave_core,
    ecf_compress,
    embed,
    node_thresholds,
    set_hyperparameters,
    standardize,
)
from .errors import (
    ConfigurationError,
    DigraphwaveError,
    GraphFormatError,
    GraphValidationError,
    NumericalError,
)
from .graph import Graph, build_operator, degrees, load_edge_list, load_graph, permute, transpose
from .matexp import error_bound, expm_batch, select_order, taylor_coefficients

__all__ = [
    "ConfigurationError", "DigraphwaveConfig", "DigraphwaveError", "EmbeddingMatrix", "Graph",
    "GraphFormatError", "GraphValidationError", "NumericalError", "apply_threshold",
    "build_operator", "degrees", "digraphwave", "digraphwave_core", "ecf_compress", "embed",
    "error_bound", "expm_batch", "load_edge_list", "load_graph", "node_thresholds", "permute",
    "select_order", "set_hyperparameters", "standardize", "taylor_coefficients", "transpose",
]
