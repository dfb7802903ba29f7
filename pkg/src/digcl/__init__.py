"""digcl: dual-domain contrastive learning on directed graphs.

A desk-scale numpy toolkit that learns node embeddings from two
complementary renderings of a digraph: a complex-domain view through
personalized magnetic Laplacian perturbation, and a real-domain view
through direction-aware second-order random walks, trained jointly
with an InfoNCE objective.  Spectral entropy diagnostics with
numerical theorem verifiers, a linear-probe evaluation harness and a
CLI round out the package.
"""

__version__ = "0.1.0"

from .digraph import (
    Digraph,
    EdgeSplit,
    LoadReport,
    ParseError,
    degrees,
    generate_directed_sbm,
    load_edge_list,
    load_features,
    load_labels,
    load_split,
    read_edge_list,
    read_features,
    read_labels,
    save_edge_list,
    save_split,
    split_edges,
    undirected_distance_leq2,
)
from .entropy import (
    BoundedReport,
    MonotonicReport,
    SpectralReport,
    entropy_from_eigenvalues,
    entropy_variation,
    hermitian_eigh,
    verify_bounded_variation,
    verify_monotonic_response,
    von_neumann_entropy,
)
from .evaluation import LinkTaskSpec, ProbeResult, linear_probe, link_eval
from .magnetic import (
    ChargeField,
    PerturbationSpec,
    build_magnetic_laplacian,
    build_phase,
    is_hermitian,
    node_uncertainty,
    personalized_charge,
    perturbed_laplacian,
    sample_perturbed_factor,
    sample_phase_factor,
    symmetrize,
    uniform_charge_laplacian,
)
from .neural import (
    ComplexFeatures,
    ModelParams,
    build_propagation,
    encode_paths,
    fuse_project,
    gradient_check,
    gru_step,
    init_model_params,
    load_checkpoint,
    node_readout,
    propagate,
    save_checkpoint,
)
from .training import (
    TrainConfig,
    TrainingDiverged,
    ViewPair,
    adam_init,
    adam_step,
    build_views,
    cosine_similarity,
    embed,
    info_nce,
    info_nce_with_grads,
    load_trace,
    save_trace,
    train,
)
from .walks import (
    PathSet,
    WalkParams,
    load_path_set,
    sample_path_views,
    sample_walk,
    save_path_set,
    transition_weights,
)
