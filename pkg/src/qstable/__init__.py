"""Local stability of multipartite orthogonal state sets."""

from .constructions import bell_example, sg_set, theorem5_set, w_basis, w_canonicalize, w_operator
from .entanglement import count_entangled, is_genuinely_entangled, schmidt_rank
from .numerics import RankResult, TolerancePolicy
from .stability import (
    DegenerateSetError,
    NoCertificateError,
    StabilityReport,
    Verdict,
    build_dmatrix,
    cardinality_bounds,
    check_every_bipartition,
    check_locally_stable,
    classify_two_qubit,
    extract_certificate,
    rank_of,
    verify_opm,
)
from .tensor_core import Bipartition, StateSet, StateVector, SystemShape

__version__ = "0.1.0"
