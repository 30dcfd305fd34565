"""silofed: deterministic cross-silo federated learning simulator.

Implements synchronous federated averaging plus two asynchronous-availability
variants (connected-subset aggregation and coreset-proxy aggregation), with a
reproducible experiment harness and CLI.
"""

from .config import ConfigError, load_config, parse_config
from .coreset import CORESET_METHODS, CoresetPolicy, build_coreset
from .data import (
    TASK_KINDS,
    Dataset,
    SplitTask,
    class_centroids,
    gen_blobs,
    load_csv,
    make_iid_task,
    make_rotated_task,
    make_split_class_task,
    rotate_features,
)
from .harness import (
    RUN_STRATEGIES,
    ExperimentConfig,
    RunResult,
    SlotMetrics,
    TaskSpec,
    build_task,
    export_checkpoint,
    export_metrics,
    load_checkpoint,
    load_metrics,
    run_collaborative,
    run_experiment,
    run_seeds,
    run_standalone,
    run_strategy,
    summarize,
)
from .nn import (
    ACTIVATIONS,
    Batch,
    HyperParams,
    ModelParams,
    ModelSpec,
    evaluate,
    init_params,
    loss_and_grad,
    predict_proba,
    sgd_steps,
)
from .protocol import (
    STRATEGIES,
    AvailabilitySchedule,
    ClientState,
    RoundUpdate,
    ServerState,
    aggregate,
    client_round,
    proxy_round,
    run_slot,
)
from .rng import derive_seed, generator, sgd_seed

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "AvailabilitySchedule",
    "Batch",
    "CORESET_METHODS",
    "ClientState",
    "ConfigError",
    "CoresetPolicy",
    "Dataset",
    "ExperimentConfig",
    "HyperParams",
    "ModelParams",
    "ModelSpec",
    "RUN_STRATEGIES",
    "RoundUpdate",
    "RunResult",
    "STRATEGIES",
    "ServerState",
    "SlotMetrics",
    "SplitTask",
    "TASK_KINDS",
    "TaskSpec",
    "aggregate",
    "build_coreset",
    "build_task",
    "class_centroids",
    "client_round",
    "derive_seed",
    "evaluate",
    "export_checkpoint",
    "export_metrics",
    "gen_blobs",
    "generator",
    "init_params",
    "load_checkpoint",
    "load_config",
    "load_csv",
    "load_metrics",
    "loss_and_grad",
    "make_iid_task",
    "make_rotated_task",
    "make_split_class_task",
    "parse_config",
    "predict_proba",
    "proxy_round",
    "rotate_features",
    "run_collaborative",
    "run_experiment",
    "run_seeds",
    "run_slot",
    "run_standalone",
    "run_strategy",
    "sgd_seed",
    "sgd_steps",
    "summarize",
    "__version__",
]
