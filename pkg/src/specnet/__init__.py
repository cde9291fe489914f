"""Spectral graph domain adaptation toolkit.

Splits graph signals into low- and high-frequency bands, trains a
dual-stream message-passing encoder with a frequency-weighted
contrastive objective and a class-repulsion kernel term, and ships the
experiment harness (domain splits, transfer matrices, ablations,
sweeps) behind a deterministic CLI.
"""

from .datasets import (
    DomainSplit,
    GraphDataset,
    dataset_hash,
    derive_seed,
    load_split,
    parse_tudataset,
    save_split,
    split_domains,
    verify_split,
    write_tudataset,
)
from .errors import (
    ContractViolation,
    DataError,
    NumericalError,
    SpecnetError,
    UsageError,
)
from .experiment import (
    ExperimentConfig,
    RunResult,
    SeedResult,
    ablate,
    config_hash,
    emit_analysis,
    evaluate,
    run_transfer_matrix,
    sweep,
    train_run,
    train_single_seed,
)
from .gradcheck import gradcheck_report
from .graphs import (
    Graph,
    StructuralProfile,
    adjacency,
    edge_density,
    laplacian,
    make_graph,
    normalized_laplacian,
    one_hot_features,
    structural_profile,
)
from .losses import (
    ContrastiveBatch,
    LossWeights,
    fmmd_loss,
    frequency_kernel_value,
    kernel_property_audit,
    mmd2,
    smmi_decomposed,
    smmi_loss,
    total_loss,
)
from .model import (
    DualEmbedding,
    ModelConfig,
    classify,
    dual_encode,
    init_params,
    load_params,
    save_params,
)
from .pairing import PairingPlan, build_pairing_plan, mine_positive_pairs, pseudo_label
from .spectral import (
    BandFeatures,
    BandSplit,
    EnergyProfile,
    SpectralBasis,
    band_cutoff,
    band_filter,
    band_split,
    domain_energy_profile,
    eigendecompose_sym,
    gft,
    graph_band_features,
    igft,
    pairwise_spectral_difference,
    spectral_basis,
    spectral_energy,
)

__version__ = "0.1.0"
