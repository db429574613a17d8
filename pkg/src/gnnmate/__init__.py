"""Laboratory for training graph neural networks that post-hoc explainers
find easier to interpret: synthetic motif benchmarks, a small GCN, an edge
mask explainer fitted on the fly, and a bilevel meta-trainer that updates
the model through its own explanation tasks."""

from .autodiff import AdamState, Tape, Tensor, adam_step, grad, no_grad, sgd_step_differentiable
from .datasets import (
    ComputationalSubgraph,
    GraphDataset,
    GraphSet,
    extract_computational_subgraph,
    gen_ba,
    gen_ba_2motifs,
    gen_ba_community,
    gen_ba_shapes,
    gen_tree_cycles,
    gen_tree_grids,
    generate,
    load_dataset,
    load_mutag,
    make_splits,
    motif_nodes,
    save_dataset,
)
from .errors import (
    ConfigError,
    ContractError,
    FormatVersionError,
    GnnMateError,
    IngestionError,
    ParameterError,
    ShapeError,
    TapeError,
    TrainingDiverged,
)
from .evaluation import EvalProtocol, EvalReport, auc_score, compare_loss_curves, evaluate_explainability, export_qualitative
from .explainer import (
    ExplainerMasks,
    Explanation,
    apply_masks,
    edge_importance_vector,
    explanation_loss,
    fit_explainer,
    init_masks,
    top_k_subgraph,
)
from .model import (
    DiffusionOperator,
    ModelConfig,
    ModelParams,
    accuracy,
    gcn_layer,
    graph_model_forward,
    init_params,
    load_checkpoint,
    node_model_forward,
    normalize_adjacency,
    save_checkpoint,
    subgraph_operator,
    task_loss,
)
from .training import (
    ExplanationTask,
    MateConfig,
    RunReport,
    ablation_sweep,
    adapt,
    default_config,
    mate_train,
    meta_update,
    sample_task,
    standard_train,
)

__version__ = "0.1.0"
