"""Schmidt ranks across bipartitions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DEFAULT_POLICY, TolerancePolicy, numerical_rank, parallel_map
from .tensor_core import Bipartition, ShapeError, StateSet, StateVector, all_bipartitions, component_matrices

__all__ = ["SchmidtEntry", "SchmidtProfile", "schmidt_rank", "schmidt_profile", "is_genuinely_entangled",
           "count_entangled"]


@dataclass(frozen=True)
class SchmidtEntry:
    bipartition: Bipartition
    schmidt_rank: int
    singular_values: np.ndarray

    def to_json(self) -> dict:
        return {
            "bipartition": self.bipartition.to_json(),
            "schmidt_rank": self.schmidt_rank,
            "singular_values": [float(s) for s in self.singular_values],
        }


@dataclass(frozen=True)
class SchmidtProfile:
    entries: tuple[SchmidtEntry, ...]

    @property
    def genuinely_entangled(self) -> bool:
        return all(e.schmidt_rank > 1 for e in self.entries)

    def to_json(self) -> dict:
        return {"genuinely_entangled": self.genuinely_entangled, "entries": [e.to_json() for e in self.entries]}


def _schmidt(psi: StateVector, bp: Bipartition, policy: TolerancePolicy) -> SchmidtEntry:
    coeffs = component_matrices(psi.amplitudes, psi.shape, bp)
    res = numerical_rank(coeffs, policy)
    return SchmidtEntry(bp, res.rank, res.singular_values)


def schmidt_rank(psi: StateVector, bp: Bipartition, policy: TolerancePolicy = DEFAULT_POLICY) -> int:
    """Numerical rank of the ``d_left x d_right`` coefficient matrix."""
    return _schmidt(psi, bp, policy).schmidt_rank


def schmidt_profile(psi: StateVector, policy: TolerancePolicy = DEFAULT_POLICY) -> SchmidtProfile:
    bps = all_bipartitions(psi.shape.n_parties)
    return SchmidtProfile(tuple(parallel_map(lambda bp: _schmidt(psi, bp, policy), bps)))


def is_genuinely_entangled(psi: StateVector, policy: TolerancePolicy = DEFAULT_POLICY) -> bool:
    if psi.shape.n_parties < 2:
        raise ShapeError("entanglement needs at least two parties")
    return all(schmidt_rank(psi, bp, policy) > 1 for bp in all_bipartitions(psi.shape.n_parties))


def count_entangled(S: StateSet, policy: TolerancePolicy = DEFAULT_POLICY) -> int:
    """Number of entangled states in a two-qubit set."""
    if S.shape.dims != (2, 2):
        raise ShapeError(f"two-qubit helper called on dims {S.shape.dims}")
    bp = Bipartition([0], [1])
    return sum(1 for psi in S if schmidt_rank(psi, bp, policy) == 2)
