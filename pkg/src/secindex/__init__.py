"""Security analysis of discrete-time LTI systems under attacks and disturbances.

The package computes per-channel security indices (the minimum number of
attack channels that must be corrupted for an undetectable persistent
attack), synthesizes witness attacks, classifies channels by
detectability/identifiability against an attacker budget, designs
disturbance-decoupling residual filters, and reconstructs sparse attacks
from output traces.
"""

from .classify import (
    ChannelClassification,
    SignalSet,
    SystemClassification,
    classify,
    counterexample_pair,
)
from .config import DEFAULT_TOL, Tolerances
from .decouple import (
    PolynomialMatrix,
    ResidualGenerator,
    apply_filter,
    attack_residual_realization,
    design_residual_generator,
    left_invertible,
    left_nullspace,
)
from .errors import (
    ContractError,
    InputError,
    NumericError,
    PoleProximityError,
    SecIndexError,
    StructuralError,
)
from .identify import (
    IdentificationResult,
    SubsetEstimate,
    TransientModel,
    build_transient_model,
    identify,
    remove_transient,
    subset_inversion,
)
from .index import (
    Alpha,
    AttackPattern,
    SecurityIndexResult,
    feasible_on_support,
    security_index,
    security_index_greedy,
    single_channel_critical,
    synthesize_attack,
)
from .model import (
    Realization,
    ValidationReport,
    load_model,
    save_model,
    transfer_eval,
    validate,
)
from .pencil import (
    NullDirection,
    PencilSelection,
    ZeroRecord,
    ZeroSet,
    assemble,
    invariant_zeros,
    normalrank,
    null_direction,
    rank_at,
    rank_drop_candidates,
    sample_points,
)
from .sim import (
    Trace,
    generate_random_instance,
    read_trace_csv,
    simulate,
    verify_undetectable,
    write_trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "Alpha",
    "AttackPattern",
    "ChannelClassification",
    "ContractError",
    "DEFAULT_TOL",
    "IdentificationResult",
    "InputError",
    "NullDirection",
    "NumericError",
    "PencilSelection",
    "PoleProximityError",
    "PolynomialMatrix",
    "Realization",
    "ResidualGenerator",
    "SecIndexError",
    "SecurityIndexResult",
    "SignalSet",
    "StructuralError",
    "SubsetEstimate",
    "SystemClassification",
    "Tolerances",
    "Trace",
    "TransientModel",
    "ValidationReport",
    "ZeroRecord",
    "ZeroSet",
    "apply_filter",
    "assemble",
    "attack_residual_realization",
    "build_transient_model",
    "classify",
    "counterexample_pair",
    "design_residual_generator",
    "feasible_on_support",
    "generate_random_instance",
    "identify",
    "invariant_zeros",
    "left_invertible",
    "left_nullspace",
    "load_model",
    "normalrank",
    "null_direction",
    "rank_at",
    "rank_drop_candidates",
    "read_trace_csv",
    "remove_transient",
    "sample_points",
    "save_model",
    "security_index",
    "security_index_greedy",
    "simulate",
    "single_channel_critical",
    "subset_inversion",
    "synthesize_attack",
    "transfer_eval",
    "validate",
    "verify_undetectable",
    "write_trace_csv",
]
