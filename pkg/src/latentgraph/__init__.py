"""Inference of undirected graph topology from partial nodal observations,
with explicit modeling of hidden (latent) nodes.

The package bundles the shared graph algebra (:mod:`latentgraph.graphs`),
synthetic generators (:mod:`latentgraph.generators`), proximal solvers
(:mod:`latentgraph.prox`), the estimator family (:mod:`latentgraph.estimators`),
recovery metrics (:mod:`latentgraph.metrics`), CSV matrix I/O
(:mod:`latentgraph.matio`) and the experiment runner / CLI
(:mod:`latentgraph.experiments`, :mod:`latentgraph.cli`).
"""

from .graphs import (
    BlockView,
    CovEstimate,
    FilterSpec,
    Gso,
    GsoKind,
    NodePartition,
    SignalMatrix,
    apply_graph_filter,
    block_partition,
    commutativity_residual,
    laplacian_from_adjacency,
    local_variation,
    smoothness_block_decomposition,
)
from .prox import LaplacianParam, SolverConfig, materialize_laplacian, solve_composite

__all__ = [
    "BlockView",
    "CovEstimate",
    "FilterSpec",
    "Gso",
    "GsoKind",
    "LaplacianParam",
    "NodePartition",
    "SignalMatrix",
    "SolverConfig",
    "apply_graph_filter",
    "block_partition",
    "commutativity_residual",
    "laplacian_from_adjacency",
    "local_variation",
    "materialize_laplacian",
    "smoothness_block_decomposition",
    "solve_composite",
]

__version__ = "0.1.0"
