"""Entropy-bump maximal functions and sparse forms on the dyadic interval.

Step functions on the 2^n cells of [0,1), their dyadic maximal functions,
entropy and Orlicz bump majorants, sparse collections with exact integer
certification, randomized sign transforms, and an experiment harness for
the weighted weak-type endpoint bounds.
"""

from .bumps import (
    EpsilonSpec,
    KEpsilonResult,
    OrliczSpec,
    entropy_norm,
    k_epsilon,
    m_coeff,
    m_entropy,
    m_orlicz,
    orlicz_norm,
    shifted_log2,
)
from .errors import (
    BracketingError,
    ConfigError,
    FileFormatError,
    InvalidCubeError,
    InvalidSpecError,
    InvalidWeightError,
    ResolutionMismatchError,
    SparsePreconditionError,
)
from .grid import (
    ROOT,
    CellSet,
    DyadicCube,
    GridFunction,
    average,
    enumerate_cubes,
    inner,
    integral,
    level_averages,
    level_sums,
    load_grid_function,
    require_weight,
    restrict,
    save_grid_function,
    superlevel_weight,
    weak_l1_norm,
)
from .lab import (
    ExperimentReport,
    FsCheckResult,
    TrialConfig,
    TrialRecord,
    VERSION,
    ainf_lemma_sweep,
    corollary_experiment,
    domination_random_suite,
    fs_check,
    fs_random_suite,
    main_theorem_experiment,
    maximal_comparison,
    replay_random_suite,
    resolution_cap,
    trial_rng,
    weak_type_quotient,
)
from .sparse import (
    BandRecord,
    CarlesonReport,
    CubeClassRecord,
    DominationResult,
    EqCertification,
    HaarSpec,
    ProofReplayReport,
    SparseCollection,
    StrongSparsenessReport,
    bilinear_form,
    build_disjoint_eq,
    carleson_check,
    certify_half_sparse,
    cz_stopping_collection,
    haar_transform,
    proof_replay,
    sparse_dominate_bilinear,
    sparse_operator,
    split_eight,
    strong_sparseness_check,
)
from .svgplot import emit_svg
from .weights import (
    RhoTable,
    a1_constant,
    a1_generator,
    ainf_constant,
    ainf_lemma_ratio,
    dyadic_maximal,
    effective_rho,
    localized_maximal,
    power_weight,
    rho,
    rho_all,
)

__version__ = VERSION

__all__ = [
    "BandRecord",
    "BracketingError",
    "CarlesonReport",
    "CellSet",
    "ConfigError",
    "CubeClassRecord",
    "DominationResult",
    "DyadicCube",
    "EpsilonSpec",
    "EqCertification",
    "ExperimentReport",
    "FileFormatError",
    "FsCheckResult",
    "GridFunction",
    "HaarSpec",
    "InvalidCubeError",
    "InvalidSpecError",
    "InvalidWeightError",
    "KEpsilonResult",
    "OrliczSpec",
    "ProofReplayReport",
    "ResolutionMismatchError",
    "RhoTable",
    "ROOT",
    "SparseCollection",
    "SparsePreconditionError",
    "StrongSparsenessReport",
    "TrialConfig",
    "TrialRecord",
    "VERSION",
    "a1_constant",
    "a1_generator",
    "ainf_constant",
    "ainf_lemma_ratio",
    "ainf_lemma_sweep",
    "average",
    "bilinear_form",
    "build_disjoint_eq",
    "carleson_check",
    "certify_half_sparse",
    "corollary_experiment",
    "cz_stopping_collection",
    "domination_random_suite",
    "dyadic_maximal",
    "effective_rho",
    "emit_svg",
    "entropy_norm",
    "enumerate_cubes",
    "fs_check",
    "fs_random_suite",
    "haar_transform",
    "inner",
    "integral",
    "k_epsilon",
    "level_averages",
    "level_sums",
    "load_grid_function",
    "localized_maximal",
    "m_coeff",
    "m_entropy",
    "m_orlicz",
    "main_theorem_experiment",
    "maximal_comparison",
    "orlicz_norm",
    "power_weight",
    "proof_replay",
    "replay_random_suite",
    "require_weight",
    "resolution_cap",
    "restrict",
    "rho",
    "rho_all",
    "save_grid_function",
    "shifted_log2",
    "sparse_dominate_bilinear",
    "sparse_operator",
    "split_eight",
    "strong_sparseness_check",
    "superlevel_weight",
    "trial_rng",
    "weak_l1_norm",
    "weak_type_quotient",
]
