"""Random normed modules over finite atomic probability spaces.

Fixed-point experiments for random asymptotically nonexpansive maps.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    GeneratorError,
    NonConvergenceError,
    PartitionError,
    PreconditionError,
    RNModError,
    SigmaStabilityError,
    UnsupportedCombinationError,
)
from .measure import (
    AtomicProbabilitySpace,
    L0Real,
    MeasurableSet,
    Partition,
    almost_sure_leq,
    converges_in_probability,
    indicator,
    lattice_sup,
    prob_of_exceed,
    validate_partition,
)
from .module import (
    ConvexBody,
    FiberSpec,
    RNElement,
    body_contains,
    body_project,
    glue,
    l0_norm,
    module_scale,
    restrict,
    support,
)
from .duality import (
    ConvexityParams,
    HolderPair,
    RandomFunctional,
    canonical_T,
    conjugate_norm,
    eps_lambda_converges,
    lp_norm,
    lp_uc_modulus_estimate,
    operator_norm_oracle,
    random_uc_witness_check,
    random_weak_converges,
)
from .dynamics import AsymptoticMap, IterationTrace, certify, mann_iterate, residual
from .partition import (
    PieceData,
    egoroff_pieces,
    induced_lipschitz_check,
    induced_map,
    lemma31_partition,
    recomposition_check,
)
