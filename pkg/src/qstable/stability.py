"""Local stability of orthogonal state sets via D-matrix ranks.

For a split ``P|Q`` with Q the measuring side, every ordered pair ``(k, l)``
of distinct states contributes the row ``vec(sum_i |psi_{k,i}><psi_{l,i}|)``
where ``psi_k = sum_i |i>_P |psi_{k,i}>_Q``. A Hermitian ``M`` on Q keeps the
set orthogonal exactly when ``vec(M)`` is orthogonal to all rows, and
``vec(I)`` always is, so the rank is at most ``d_Q**2 - 1``. Reaching that
ceiling means Q has only trivial orthogonality-preserving measurements.
When it is not reached, :func:`extract_certificate` builds an explicit
two-outcome POVM that is nontrivial and preserves orthogonality.
"""

from __future__ import annotations

import enum
from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np

from .entanglement import count_entangled
from .numerics import (DEFAULT_POLICY, RankResult, TolerancePolicy, numerical_rank, parallel_map,
                       rank_from_singular_values, streamed_r_factor)
from .tensor_core import Bipartition, ShapeError, StateSet, SystemShape, all_bipartitions, component_matrices

__all__ = [
    "DegenerateSetError",
    "NoCertificateError",
    "Mode",
    "Verdict",
    "DMatrix",
    "ReportEntry",
    "StabilityReport",
    "PovmCertificate",
    "OpmCheck",
    "build_dmatrix",
    "rank_of",
    "check_side",
    "check_locally_stable",
    "check_every_bipartition",
    "check",
    "extract_certificate",
    "verify_opm",
    "cardinality_bounds",
    "classify_two_qubit",
    "hermitian_to_real",
    "real_to_hermitian",
]


class DegenerateSetError(ValueError):
    """Fewer than two states: there are no orthogonality constraints."""


class NoCertificateError(ValueError):
    """The measuring side is stable, so no nontrivial preserving POVM exists."""


class Mode(str, enum.Enum):
    SINGLE_PARTY = "single-party"
    ONE_VS_REST = "one-vs-rest"
    ALL_BIPARTITIONS = "all-bipartitions"


class Verdict(str, enum.Enum):
    LOCALLY_STABLE = "locally-stable"
    STABLE_EVERY_BIPARTITION = "stable-under-every-bipartition"
    NOT_STABLE = "not-stable"


def _require_pairs(S: StateSet) -> None:
    if S.cardinality < 2:
        raise DegenerateSetError(f"need at least 2 states, got {S.cardinality}")


@dataclass(frozen=True, eq=False)
class DMatrix:
    """Rows ``vec(C_kl)`` for ordered pairs ``k != l`` in lexicographic order.

    Rows are generated from the per-state coefficient matrices on demand;
    :meth:`rows` materializes all of them, :meth:`row_blocks` yields one block
    per first index ``k``.
    """

    bipartition: Bipartition
    measuring_side: str
    components: np.ndarray = field(repr=False)  # (cardinality, d_P, d_Q)

    @property
    def cardinality(self) -> int:
        return self.components.shape[0]

    @property
    def d_measuring(self) -> int:
        return self.components.shape[2]

    @property
    def measuring_parties(self) -> tuple[int, ...]:
        return self.bipartition.side(self.measuring_side)

    @property
    def n_rows(self) -> int:
        n = self.cardinality
        return n * (n - 1)

    @property
    def n_cols(self) -> int:
        return self.d_measuring**2

    @property
    def target(self) -> int:
        return self.n_cols - 1

    @property
    def row_index(self) -> list[tuple[int, int]]:
        n = self.cardinality
        return [(k, l) for k in range(n) for l in range(n) if k != l]

    def operator(self, k: int, l: int) -> np.ndarray:
        """``C_kl = sum_i |psi_{k,i}><psi_{l,i}|`` as a ``d_Q x d_Q`` matrix."""
        return self.components[k].T @ self.components[l].conj()

    def _block(self, k: int) -> np.ndarray:
        psi_k = self.components[k]
        ops = np.einsum("ia,lib->lab", psi_k, self.components.conj())
        ops = np.delete(ops, k, axis=0)
        return ops.reshape(self.cardinality - 1, self.n_cols)

    def row_blocks(self) -> Iterator[np.ndarray]:
        for k in range(self.cardinality):
            yield self._block(k)

    def rows(self) -> np.ndarray:
        return np.vstack(list(self.row_blocks()))

    def normalized(self) -> "DMatrix":
        """Same D-matrix built from unit-norm states; the rank is unchanged."""
        norms = np.linalg.norm(self.components.reshape(self.cardinality, -1), axis=1)
        if np.all(norms == 1.0):
            return self
        comps = self.components / norms[:, None, None]
        comps.setflags(write=False)
        return DMatrix(self.bipartition, self.measuring_side, comps)


def build_dmatrix(S: StateSet, bp: Bipartition, measuring_side: str = "right") -> DMatrix:
    _require_pairs(S)
    bp.check(S.shape)
    if measuring_side not in ("left", "right"):
        raise ValueError(f"measuring_side must be 'left' or 'right', got {measuring_side!r}")
    oriented = bp if measuring_side == "right" else bp.swapped()
    comps = component_matrices(S.amplitude_matrix(), S.shape, oriented)
    comps.setflags(write=False)
    return DMatrix(bp, measuring_side, comps)


def rank_of(D: DMatrix, policy: TolerancePolicy = DEFAULT_POLICY) -> RankResult:
    """Numerical rank of ``D`` with target ``d_Q**2 - 1``.

    Tall matrices (more than ``policy.stream_factor`` rows per column) are
    never materialized; their rows are folded into a triangular QR factor
    one block at a time. States are normalized first so that wildly
    different state norms cannot push rows below the relative threshold.
    """
    if D.cardinality < 2:
        raise DegenerateSetError("empty D-matrix")
    D = D.normalized()
    if D.n_rows > policy.stream_factor * D.n_cols:
        blocks = _regroup(D.row_blocks(), policy.block_rows)
        r, _ = streamed_r_factor(blocks, D.n_cols)
        sv = np.linalg.svd(r, compute_uv=False)
        return rank_from_singular_values(sv, (D.n_rows, D.n_cols), policy, D.target)
    return numerical_rank(D.rows(), policy, D.target)


def _regroup(blocks: Iterator[np.ndarray], size: int) -> Iterator[np.ndarray]:
    pending: list[np.ndarray] = []
    count = 0
    for b in blocks:
        pending.append(b)
        count += b.shape[0]
        if count >= size:
            yield np.vstack(pending)
            pending, count = [], 0
    if pending:
        yield np.vstack(pending)


@dataclass(frozen=True)
class ReportEntry:
    bipartition: Bipartition
    measuring_side: str
    result: RankResult

    @property
    def stable(self) -> bool:
        return self.result.full

    @property
    def measuring_parties(self) -> tuple[int, ...]:
        return self.bipartition.side(self.measuring_side)

    def to_json(self) -> dict:
        return {
            "bipartition": self.bipartition.to_json(),
            "measuring": self.measuring_side,
            "rank": self.result.rank,
            "target": self.result.target,
            "stable": self.stable,
            "marginal": self.result.marginal,
            "tolerance": self.result.tolerance_used,
            "smallest_retained_singular_value": self.result.smallest_retained,
        }


@dataclass(frozen=True)
class StabilityReport:
    mode: Mode
    entries: tuple[ReportEntry, ...]
    overall: Verdict
    label: str = ""

    @property
    def stable(self) -> bool:
        return self.overall is not Verdict.NOT_STABLE

    @property
    def marginal(self) -> bool:
        return any(e.result.marginal for e in self.entries)

    def ranks(self) -> list[int]:
        return [e.result.rank for e in self.entries]

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "mode": self.mode.value,
            "entries": [e.to_json() for e in self.entries],
            "overall": self.overall.value,
            "marginal": self.marginal,
        }


def check_side(S: StateSet, bp: Bipartition, measuring_side: str = "right",
               policy: TolerancePolicy = DEFAULT_POLICY) -> ReportEntry:
    return ReportEntry(bp, measuring_side, rank_of(build_dmatrix(S, bp, measuring_side), policy))


def _run(S: StateSet, jobs: list[tuple[Bipartition, str]], mode: Mode, success: Verdict,
         policy: TolerancePolicy) -> StabilityReport:
    entries = tuple(parallel_map(lambda job: check_side(S, job[0], job[1], policy), jobs))
    overall = success if all(e.stable for e in entries) else Verdict.NOT_STABLE
    return StabilityReport(mode, entries, overall, S.label)


def check_locally_stable(S: StateSet, policy: TolerancePolicy = DEFAULT_POLICY) -> StabilityReport:
    """Every single party measuring against the rest: rank ``d_i**2 - 1`` each."""
    _require_pairs(S)
    n = S.shape.n_parties
    if n < 2:
        raise ShapeError("local stability needs at least two parties")
    jobs = [(Bipartition.one_vs_rest(i, n).swapped(), "right") for i in range(n)]
    return _run(S, jobs, Mode.SINGLE_PARTY, Verdict.LOCALLY_STABLE, policy)


def check_every_bipartition(S: StateSet, mode: str = "shortcut",
                            policy: TolerancePolicy = DEFAULT_POLICY) -> StabilityReport:
    """Stability for every bipartition.

    ``shortcut`` checks only the N complements ``A_i^c`` as measuring sides,
    which suffices: any proper party group sits inside some complement, and a
    preserving measurement on the group extends to it by tensoring identity.
    ``exhaustive`` checks both sides of every canonical bipartition.
    """
    _require_pairs(S)
    n = S.shape.n_parties
    if n < 2:
        raise ShapeError("bipartitions need at least two parties")
    if mode == "shortcut":
        jobs = [(Bipartition.one_vs_rest(i, n), "right") for i in range(n)]
        report_mode = Mode.ONE_VS_REST
    elif mode == "exhaustive":
        jobs = [(bp, side) for bp in all_bipartitions(n) for side in ("left", "right")]
        report_mode = Mode.ALL_BIPARTITIONS
    else:
        raise ValueError(f"mode must be 'shortcut' or 'exhaustive', got {mode!r}")
    return _run(S, jobs, report_mode, Verdict.STABLE_EVERY_BIPARTITION, policy)


def check(S: StateSet, mode: str = "single-party", exhaustive: bool = False,
          policy: TolerancePolicy = DEFAULT_POLICY) -> StabilityReport:
    """Dispatch on the CLI-style mode names."""
    if mode == Mode.SINGLE_PARTY.value:
        return check_locally_stable(S, policy)
    if mode == Mode.ALL_BIPARTITIONS.value:
        return check_every_bipartition(S, "exhaustive" if exhaustive else "shortcut", policy)
    raise ValueError(f"unknown mode {mode!r}")


# -- Hermitian matrices as real coordinate vectors ---------------------------
# Order: diagonal entries, then (Re, Im) of each upper entry (a < b), scaled by
# sqrt(2) so the Euclidean product equals the Frobenius product Tr(A B).

def _upper(d: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(d, k=1)


def hermitian_to_real(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H)
    d = H.shape[-1]
    iu, ju = _upper(d)
    off = H[..., iu, ju] * np.sqrt(2.0)
    re_im = np.stack([off.real, off.imag], axis=-1).reshape(*H.shape[:-2], -1)
    return np.concatenate([np.real(np.diagonal(H, axis1=-2, axis2=-1)), re_im], axis=-1)


def real_to_hermitian(x: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    H = np.zeros((d, d), dtype=complex)
    H[np.diag_indices(d)] = x[:d]
    pairs = x[d:].reshape(-1, 2) / np.sqrt(2.0)
    iu, ju = _upper(d)
    H[iu, ju] = pairs[:, 0] + 1j * pairs[:, 1]
    H[ju, iu] = pairs[:, 0] - 1j * pairs[:, 1]
    return H


@dataclass(frozen=True)
class OpmCheck:
    preserving: bool
    nontrivial: bool
    max_violation: float

    def to_json(self) -> dict:
        return {"preserving": self.preserving, "nontrivial": self.nontrivial, "max_violation": self.max_violation}


def verify_opm(S: StateSet, bp: Bipartition, measuring_side: str, M: np.ndarray,
               tol: float | None = None, policy: TolerancePolicy = DEFAULT_POLICY) -> OpmCheck:
    """Directly evaluate ``<psi_k| I (x) M |psi_l>`` for every ``k != l``.

    ``max_violation`` is the largest ``|<psi_k|I (x) M|psi_l>|`` relative to
    ``|psi_k| |psi_l| |M|``.
    """
    tol = policy.eps_orth if tol is None else tol
    bp.check(S.shape)
    oriented = bp if measuring_side == "right" else bp.swapped()
    comps = component_matrices(S.amplitude_matrix(), S.shape, oriented)
    M = np.asarray(M, dtype=complex)
    d = comps.shape[2]
    if M.shape != (d, d):
        raise ShapeError(f"operator of shape {M.shape} on a measuring side of dimension {d}")
    # <psi_k|I(x)M|psi_l> = sum_i conj(psi_k[i]) . M psi_l[i]
    moved = np.einsum("ab,lib->lia", M, comps)
    amps = comps.conj()
    overlaps = np.einsum("kia,lia->kl", amps, moved)
    norms = np.linalg.norm(comps.reshape(comps.shape[0], -1), axis=1)
    m_norm = np.linalg.norm(M, 2)
    scale = np.outer(norms, norms) * (m_norm if m_norm > 0 else 1.0)
    rel = np.abs(overlaps) / scale
    np.fill_diagonal(rel, 0.0)
    worst = float(rel.max()) if rel.size else 0.0
    trivial_part = np.trace(M) / d * np.eye(d)
    fro = np.linalg.norm(M)
    nontrivial = bool(fro > 0 and np.linalg.norm(M - trivial_part) > tol * fro)
    return OpmCheck(preserving=worst <= tol, nontrivial=nontrivial, max_violation=worst)


@dataclass(frozen=True)
class PovmCertificate:
    """Two-outcome POVM ``{I/2 + M_B, I/2 - M_B}`` on the measuring side."""

    bipartition: Bipartition
    measuring_side: str
    M_B: np.ndarray = field(repr=False)
    povm: tuple[np.ndarray, np.ndarray] = field(repr=False)
    checks: dict[str, bool]
    rank: RankResult

    @property
    def measuring_party_set(self) -> tuple[int, ...]:
        return self.bipartition.side(self.measuring_side)

    @property
    def valid(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        enc = lambda A: [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(A)]
        return {
            "bipartition": self.bipartition.to_json(),
            "measuring": self.measuring_side,
            "measuring_party_set": list(self.measuring_party_set),
            "rank": self.rank.rank,
            "target": self.rank.target,
            "M_B": enc(self.M_B),
            "povm": [enc(self.povm[0]), enc(self.povm[1])],
            "checks": dict(self.checks),
        }


def _hermitian_generators(D: DMatrix) -> np.ndarray:
    """Real coordinates of ``C_kl + C_kl^dag`` and ``i(C_kl - C_kl^dag)`` for k < l."""
    n = D.cardinality
    k_idx, l_idx = np.triu_indices(n, k=1)
    C = np.einsum("kia,kib->kab", D.components[k_idx], D.components[l_idx].conj())
    Ch = np.conj(np.swapaxes(C, -1, -2))
    herm = np.concatenate([C + Ch, 1j * (C - Ch)], axis=0)
    return hermitian_to_real(herm)


def extract_certificate(S: StateSet, bp: Bipartition, measuring_side: str = "right",
                        policy: TolerancePolicy = DEFAULT_POLICY) -> PovmCertificate:
    """Build a nontrivial orthogonality-preserving POVM when the rank is deficient.

    The Hermitian generators span a real space no larger than the complex
    row space of D. Together with the identity they leave a nonzero real
    complement; the first standard Hermitian basis direction with a large
    enough projection onto that complement gives ``M_B``, scaled so its
    spectral radius is exactly 1/4.
    """
    D = build_dmatrix(S, bp, measuring_side).normalized()
    rank = rank_of(D, policy)
    if rank.full:
        raise NoCertificateError(
            f"rank {rank.rank} reaches {rank.target} for measuring side {D.measuring_parties}: only trivial "
            "orthogonality-preserving measurements exist")
    d = D.d_measuring
    dim = d * d
    gens = _hermitian_generators(D)
    if gens.shape[0] > policy.stream_factor * dim:
        step = policy.block_rows
        gens, _ = streamed_r_factor((gens[i:i + step] for i in range(0, gens.shape[0], step)), dim)
    _, sv, vt = np.linalg.svd(gens, full_matrices=True)
    real_rank = rank_from_singular_values(sv, (D.n_rows, dim), policy).rank
    null = vt[real_rank:].T  # (dim, dim - real_rank)
    ident = hermitian_to_real(np.eye(d)) / np.sqrt(d)
    null = null - np.outer(ident, ident @ null)
    q, s, _ = np.linalg.svd(null, full_matrices=False)
    basis = q[:, s > 0.5]
    if basis.shape[1] == 0:
        raise NoCertificateError("numerical rank is deficient but the Hermitian complement is empty")
    proj = basis @ basis.T
    norms = np.linalg.norm(proj, axis=0)
    threshold = 0.5 * np.sqrt(basis.shape[1] / dim)
    j = int(np.argmax(norms >= threshold))
    direction = proj[:, j] / norms[j]
    M_B = real_to_hermitian(direction, d)
    M_B = 0.5 * (M_B + M_B.conj().T)
    eig = np.linalg.eigvalsh(M_B)
    M_B = M_B * (0.25 / np.max(np.abs(eig)))
    eye = np.eye(d)
    M1 = eye / 2 + M_B
    M2 = eye / 2 - M_B
    op1 = verify_opm(S, bp, measuring_side, M1, policy=policy)
    op2 = verify_opm(S, bp, measuring_side, M2, policy=policy)
    checks = {
        "hermitian": bool(np.array_equal(M1, M1.conj().T) and np.array_equal(M2, M2.conj().T)),
        "psd": bool(min(np.linalg.eigvalsh(M1).min(), np.linalg.eigvalsh(M2).min()) >= -1e-12),
        "completes_to_identity": bool(np.array_equal(M1 + M2, eye)),
        "orthogonality_preserving": op1.preserving and op2.preserving,
        "nontrivial": op1.nontrivial,
    }
    return PovmCertificate(bp, measuring_side, M_B, (M1, M2), checks, rank)


def cardinality_bounds(shape: SystemShape | tuple[int, ...]) -> tuple[int, int | None]:
    """Lower bounds ``(max d_i + 1, max dhat_i + 1)`` on stable-set sizes.

    The second entry is ``None`` for a single party.
    """
    shape = shape if isinstance(shape, SystemShape) else SystemShape(shape)
    lower_s = max(shape.dims) + 1
    if shape.n_parties < 2:
        return lower_s, None
    lower_S = max(shape.complement_dim(i) for i in range(shape.n_parties)) + 1
    return lower_s, lower_S


def classify_two_qubit(S: StateSet, policy: TolerancePolicy = DEFAULT_POLICY) -> Verdict:
    """Two qubits: stable iff at least 3 states and at least 2 of them entangled."""
    if S.shape.dims != (2, 2):
        raise ShapeError(f"classifier applies to dims (2, 2), got {S.shape.dims}")
    if S.cardinality >= 3 and count_entangled(S, policy) >= 2:
        return Verdict.LOCALLY_STABLE
    return Verdict.NOT_STABLE
