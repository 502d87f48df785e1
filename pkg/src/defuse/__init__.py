"""Nonlinear causal discovery under additive Gaussian confounding.

The package estimates a directed acyclic graph from observational data by
peeling topological layers: at each depth it regresses every unplaced
variable on the already-placed ones plus their regression residuals (the
deconfounding adjustment), then admits the variables whose own residuals
pass a normality test. Sparse-input neural regressions read the parent sets
off the first-layer weights.
"""

from .errors import DefuseError
from .graph import (
    Dag,
    DepthProfile,
    ancestor_closure,
    topological_depths,
    validate_acyclic,
)
from .metrics import GraphMetrics, aic_compare, graph_metrics, replication_summary
from .normality import NormalityReport, anderson_darling, normal_cdf
from .regressor import FitResult, TrainConfig, fit_beta_stage, fit_network_stage, fit_node
from .discovery import DiscoveryResult, LayerState, discover, layer_gate, residual_update
from .simulate import (
    Dataset,
    SemSpec,
    draw_sem_spec,
    hub_dag,
    random_dag,
    sample,
    sample_confounded_trio,
    standardize,
    trio_truth,
)

__all__ = [
    "Dag",
    "Dataset",
    "DefuseError",
    "DepthProfile",
    "DiscoveryResult",
    "FitResult",
    "GraphMetrics",
    "LayerState",
    "NormalityReport",
    "SemSpec",
    "TrainConfig",
    "aic_compare",
    "ancestor_closure",
    "anderson_darling",
    "discover",
    "draw_sem_spec",
    "fit_beta_stage",
    "fit_network_stage",
    "fit_node",
    "graph_metrics",
    "hub_dag",
    "layer_gate",
    "normal_cdf",
    "random_dag",
    "replication_summary",
    "residual_update",
    "sample",
    "sample_confounded_trio",
    "standardize",
    "topological_depths",
    "trio_truth",
    "validate_acyclic",
]

__version__ = "0.1.0"
