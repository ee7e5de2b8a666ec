"""Multipartite product-basis bookkeeping.

Basis order is lexicographic mixed radix with party 0 as the most
significant digit, so ``|i_0 i_1 ... i_{N-1}>`` sits at
``sum_j i_j * prod_{m>j} d_m``. Parties are 0-indexed in code.
"""

from __future__ import annotations

import itertools
import math
import sys
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ShapeError",
    "MalformedIndexError",
    "OrthogonalityError",
    "SystemShape",
    "StateVector",
    "StateSet",
    "Bipartition",
    "flat_index",
    "unflatten",
    "weight",
    "weight_class",
    "decompose",
    "component_matrices",
    "reassemble",
    "inner",
    "all_bipartitions",
    "DEFAULT_ORTH_TOL",
]

DEFAULT_ORTH_TOL = 1e-10


class ShapeError(ValueError):
    """Inconsistent dimensions between shapes, states or bipartitions."""


class MalformedIndexError(ValueError):
    pass


class OrthogonalityError(ValueError):
    """A state collection is not pairwise orthogonal within tolerance."""


@dataclass(frozen=True)
class SystemShape:
    dims: tuple[int, ...]

    def __init__(self, dims: Iterable[int]):
        dims = tuple(int(d) for d in dims)
        if len(dims) < 1:
            raise ShapeError("a system needs at least one party")
        if any(d < 2 for d in dims):
            raise ShapeError(f"local dimensions must be >= 2, got {dims}")
        if math.prod(dims) > sys.maxsize:
            raise ShapeError(f"total dimension of {dims} overflows the index range")
        object.__setattr__(self, "dims", dims)

    @property
    def n_parties(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def dim_of(self, parties: Iterable[int]) -> int:
        return math.prod(self.dims[p] for p in parties)

    def complement_dim(self, party: int) -> int:
        """Dimension of everything except ``party``."""
        return self.total_dim // self.dims[party]

    def __len__(self) -> int:
        return len(self.dims)

    def __iter__(self) -> Iterator[int]:
        return iter(self.dims)


def _as_shape(shape: SystemShape | Sequence[int]) -> SystemShape:
    return shape if isinstance(shape, SystemShape) else SystemShape(shape)


def flat_index(digits: Sequence[int], shape: SystemShape | Sequence[int]) -> int:
    shape = _as_shape(shape)
    if len(digits) != shape.n_parties:
        raise MalformedIndexError(f"index {tuple(digits)} has wrong length for {shape.dims}")
    value = 0
    for digit, d in zip(digits, shape.dims):
        if not 0 <= digit < d:
            raise MalformedIndexError(f"digit {digit} out of range for local dimension {d}")
        value = value * d + int(digit)
    return value


def unflatten(index: int, shape: SystemShape | Sequence[int]) -> tuple[int, ...]:
    shape = _as_shape(shape)
    if not 0 <= index < shape.total_dim:
        raise MalformedIndexError(f"flat index {index} out of range for {shape.dims}")
    digits = []
    for d in reversed(shape.dims):
        index, r = divmod(index, d)
        digits.append(r)
    return tuple(reversed(digits))


def weight(digits: Sequence[int]) -> int:
    return sum(1 for x in digits if x != 0)


def weight_class(shape: SystemShape | Sequence[int], k: int) -> list[tuple[int, ...]]:
    """All strings with exactly ``k`` nonzero digits, in lexicographic order."""
    shape = _as_shape(shape)
    if not 0 <= k <= shape.n_parties:
        raise ValueError(f"weight {k} out of range [0, {shape.n_parties}]")
    return [m for m in itertools.product(*(range(d) for d in shape.dims)) if weight(m) == k]


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unnormalized pure state over the computational product basis."""

    shape: SystemShape
    amplitudes: np.ndarray

    def __init__(self, shape: SystemShape | Sequence[int], amplitudes):
        shape = _as_shape(shape)
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.size != shape.total_dim:
            raise ShapeError(f"expected {shape.total_dim} amplitudes, got {amps.size}")
        if not np.any(amps):
            raise ValueError("the zero vector is not a state")
        amps.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_terms(cls, shape, terms: dict[tuple[int, ...], complex] | Iterable[tuple[tuple[int, ...], complex]]):
        """Build from ``{multi_index: coefficient}``."""
        shape = _as_shape(shape)
        amps = np.zeros(shape.total_dim, dtype=complex)
        items = terms.items() if isinstance(terms, dict) else terms
        for digits, c in items:
            amps[flat_index(digits, shape)] += c
        return cls(shape, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.shape.dims)

    def scaled(self, factor: complex) -> StateVector:
        return StateVector(self.shape, self.amplitudes * factor)

    def __repr__(self) -> str:
        return f"StateVector(dims={self.shape.dims}, nnz={np.count_nonzero(self.amplitudes)})"


def inner(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape.dims} vs {b.shape.dims}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


@dataclass(frozen=True)
class Bipartition:
    """Split of the parties into ``left | right``; both sides sorted."""

    left: tuple[int, ...]
    right: tuple[int, ...]

    def __init__(self, left: Iterable[int], right: Iterable[int]):
        left = tuple(sorted(set(int(p) for p in left)))
        right = tuple(sorted(set(int(p) for p in right)))
        if not left or not right:
            raise ShapeError("both sides of a bipartition must be nonempty")
        if set(left) & set(right):
            raise ShapeError(f"sides overlap: {left} | {right}")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @classmethod
    def one_vs_rest(cls, party: int, n_parties: int) -> Bipartition:
        """``{party} | rest``."""
        return cls([party], [p for p in range(n_parties) if p != party])

    @property
    def n_parties(self) -> int:
        return len(self.left) + len(self.right)

    def is_canonical(self) -> bool:
        return min(self.left + self.right) in self.left

    def canonical(self) -> Bipartition:
        return self if self.is_canonical() else self.swapped()

    def swapped(self) -> Bipartition:
        return Bipartition(self.right, self.left)

    def side(self, which: str) -> tuple[int, ...]:
        if which == "left":
            return self.left
        if which == "right":
            return self.right
        raise ValueError(f"side must be 'left' or 'right', got {which!r}")

    def check(self, shape: SystemShape) -> None:
        if set(self.left) | set(self.right) != set(range(shape.n_parties)):
            raise ShapeError(f"bipartition {self} does not cover the {shape.n_parties} parties of {shape.dims}")

    def to_json(self) -> dict:
        return {"left": list(self.left), "right": list(self.right)}

    def __str__(self) -> str:
        name = lambda side: "".join(_party_name(p) for p in side)
        return f"{name(self.left)}|{name(self.right)}"


def _party_name(p: int) -> str:
    return chr(ord("A") + p) if p < 26 else f"[{p}]"


def all_bipartitions(n_parties: int) -> list[Bipartition]:
    """The 2^(N-1) - 1 canonical bipartitions (party 0 always on the left)."""
    if n_parties < 2:
        return []
    out = []
    rest = list(range(1, n_parties))
    for r in range(0, len(rest)):
        for extra in itertools.combinations(rest, r):
            left = (0, *extra)
            out.append(Bipartition(left, [p for p in range(n_parties) if p not in left]))
    return out


def component_matrices(amplitudes: np.ndarray, shape: SystemShape, bp: Bipartition) -> np.ndarray:
    """Reshape states into coefficient matrices ``(..., d_left, d_right)``.

    ``amplitudes`` may carry leading batch axes. Row ``i`` of each matrix is
    the unnormalized right-hand component attached to left basis state ``i``.
    """
    bp.check(shape)
    amplitudes = np.asarray(amplitudes)
    batch = amplitudes.shape[:-1]
    t = amplitudes.reshape(*batch, *shape.dims)
    offset = len(batch)
    perm = list(range(offset)) + [offset + p for p in bp.left + bp.right]
    t = np.transpose(t, perm)
    return t.reshape(*batch, shape.dim_of(bp.left), shape.dim_of(bp.right))


def decompose(psi: StateVector, bp: Bipartition) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """``psi = sum_i |i>_left |psi_i>_right``; one entry per left basis index.

    Left multi-indices are over the parties of ``bp.left`` in ascending order.
    Components may be zero vectors.
    """
    mat = component_matrices(psi.amplitudes, psi.shape, bp)
    left_dims = [psi.shape.dims[p] for p in bp.left]
    return [(unflatten(i, left_dims), mat[i].copy()) for i in range(mat.shape[0])]


def reassemble(components: Sequence[tuple[tuple[int, ...], np.ndarray]], shape: SystemShape, bp: Bipartition) -> StateVector:
    """Inverse of :func:`decompose`."""
    left_dims = [shape.dims[p] for p in bp.left]
    right_dims = [shape.dims[p] for p in bp.right]
    mat = np.zeros((math.prod(left_dims), math.prod(right_dims)), dtype=complex)
    for digits, vec in components:
        mat[flat_index(digits, left_dims)] = vec
    t = mat.reshape(*left_dims, *right_dims)
    order = bp.left + bp.right
    t = np.transpose(t, np.argsort(order))
    return StateVector(shape, t.reshape(-1))


@dataclass(frozen=True, eq=False)
class StateSet:
    """Pairwise-orthogonal collection of states over one shape.

    Orthogonality is enforced at construction with relative tolerance
    ``orth_tol``: ``|<a|b>| <= orth_tol * |a| * |b|``.
    """

    shape: SystemShape
    states: tuple[StateVector, ...]
    label: str = ""
    orth_tol: float = field(default=DEFAULT_ORTH_TOL, repr=False)

    def __init__(self, shape, states: Iterable[StateVector | Sequence[complex] | np.ndarray], label: str = "",
                 orth_tol: float = DEFAULT_ORTH_TOL, check: bool = True):
        shape = _as_shape(shape)
        vecs = []
        for s in states:
            if not isinstance(s, StateVector):
                s = StateVector(shape, s)
            if s.shape != shape:
                raise ShapeError(f"state of shape {s.shape.dims} in a set over {shape.dims}")
            vecs.append(s)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "states", tuple(vecs))
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "orth_tol", orth_tol)
        if check:
            self.check_orthogonal()

    def amplitude_matrix(self) -> np.ndarray:
        """``(cardinality, D_total)`` array, one state per row."""
        if not self.states:
            return np.zeros((0, self.shape.total_dim), dtype=complex)
        return np.stack([s.amplitudes for s in self.states])

    def check_orthogonal(self) -> None:
        if len(self.states) < 2:
            return
        amps = self.amplitude_matrix()
        gram = amps.conj() @ amps.T
        norms = np.sqrt(np.real(np.diag(gram)))
        bound = self.orth_tol * np.outer(norms, norms)
        off = np.abs(gram)
        np.fill_diagonal(off, 0.0)
        bad = np.argwhere(off > bound)
        if bad.size:
            k, l = bad[0]
            raise OrthogonalityError(
                f"states {k} and {l} overlap: |<psi_k|psi_l>| = {off[k, l]:.3e} > {bound[k, l]:.3e}"
            )

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def subset(self, indices: Iterable[int], label: str | None = None) -> StateSet:
        indices = list(indices)
        return StateSet(self.shape, [self.states[i] for i in indices],
                        label=self.label if label is None else label, orth_tol=self.orth_tol, check=False)

    def map_states(self, fn, label: str | None = None) -> StateSet:
        return StateSet(self.shape, [fn(s) for s in self.states],
                        label=self.label if label is None else label, orth_tol=self.orth_tol)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[StateVector]:
        return iter(self.states)

    def __getitem__(self, i: int) -> StateVector:
        return self.states[i]
