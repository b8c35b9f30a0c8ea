"""diffal: batch active learning by label diffusion over K-NN graphs."""

from ._backend import backend_name
from .data import (
    UNKNOWN_LABEL,
    EmbeddingSet,
    PoolState,
    generate_checkerboard,
    init_labeled_balanced,
    load_embedding_file,
    write_embedding_file,
)
from .diffusion import (
    ConvergenceDiagnostic,
    DiffusionSignal,
    convergence_diagnostic,
    diffuse,
    energy,
    exact_fixed_point,
    init_signal,
    predict_labels,
)
from .harness import (
    AccuracyCurve,
    DatasetSpec,
    ExperimentConfig,
    GraphSpec,
    LabelOracle,
    ModelSpec,
    RoundRecord,
    aggregate_seeds,
    emit_curves,
    evaluate_accuracy,
    run_active_learning,
    run_comparison,
)
from .knn_graph import (
    Kernel,
    KnnGraph,
    build_knn_graph,
    compute_kernel,
    connectivity_report,
    suggest_params,
)
from .model import MlpModel, SgdOptions, gradient_check, load_checkpoint, save_checkpoint, train
from .query import (
    CRITERIA,
    QueryConfig,
    QueryStats,
    baseline_query,
    coreset_greedy_query,
    diffusion_batch_query,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyCurve",
    "ConvergenceDiagnostic",
    "CRITERIA",
    "DatasetSpec",
    "DiffusionSignal",
    "EmbeddingSet",
    "ExperimentConfig",
    "GraphSpec",
    "Kernel",
    "KnnGraph",
    "LabelOracle",
    "MlpModel",
    "ModelSpec",
    "PoolState",
    "QueryConfig",
    "QueryStats",
    "RoundRecord",
    "SgdOptions",
    "UNKNOWN_LABEL",
    "aggregate_seeds",
    "backend_name",
    "baseline_query",
    "build_knn_graph",
    "compute_kernel",
    "connectivity_report",
    "convergence_diagnostic",
    "coreset_greedy_query",
    "diffuse",
    "diffusion_batch_query",
    "emit_curves",
    "energy",
    "evaluate_accuracy",
    "exact_fixed_point",
    "generate_checkerboard",
    "gradient_check",
    "init_labeled_balanced",
    "init_signal",
    "load_checkpoint",
    "load_embedding_file",
    "predict_labels",
    "run_active_learning",
    "run_comparison",
    "save_checkpoint",
    "suggest_params",
    "train",
    "write_embedding_file",
]
