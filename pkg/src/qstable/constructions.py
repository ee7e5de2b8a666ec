"""Explicit state sets: weight-class Fourier families, the W basis, Bell states."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .tensor_core import ShapeError, StateSet, StateVector, SystemShape, flat_index, unflatten, weight_class

__all__ = [
    "WeightClassFourierSpec",
    "PauliWord",
    "PAULI",
    "z_theta",
    "roots_of_unity",
    "fourier_family",
    "theorem5_set",
    "theorem5_cardinality",
    "sg_set",
    "w_operator",
    "w_state",
    "w_basis",
    "w_canonicalize",
    "bell_example",
    "MAX_W_QUBITS",
]

MAX_W_QUBITS = 12

PAULI = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    # Displayed convention; no construction uses Y.
    "Y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def z_theta(theta: int) -> np.ndarray:
    """``|0><0| + (-1)^theta |1><1|``."""
    return PAULI["Z"].copy() if theta % 2 else PAULI["I"].copy()


def roots_of_unity(c: int) -> np.ndarray:
    """``exp(2 pi i m / c)`` for ``m = 0..c-1``; quarter turns are exact."""
    m = np.arange(c)
    roots = np.cos(2 * np.pi * m / c) + 1j * np.sin(2 * np.pi * m / c)
    exact = {0: 1.0, 1: 1j, 2: -1.0, 3: -1j}
    for q, val in exact.items():
        if (q * c) % 4 == 0:
            roots[q * c // 4] = val
    return roots


@dataclass(frozen=True)
class WeightClassFourierSpec:
    """Shape plus one bijection per weight class (string -> Fourier slot).

    ``bijections[k]`` maps each weight-``k`` string to a distinct integer in
    ``range(c_k)``. Missing classes use lexicographic position.
    """

    shape: SystemShape
    bijections: Mapping[int, Mapping[tuple[int, ...], int]] = field(default_factory=dict)

    def __init__(self, shape, bijections: Mapping[int, Mapping[tuple[int, ...], int]] | None = None):
        shape = shape if isinstance(shape, SystemShape) else SystemShape(shape)
        bijections = dict(bijections or {})
        for k, f in bijections.items():
            strings = weight_class(shape, k)
            if sorted(f) != strings or sorted(f.values()) != list(range(len(strings))):
                raise ValueError(f"bijection for weight {k} is not a bijection onto range({len(strings)})")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "bijections", bijections)

    def bijection(self, k: int) -> dict[tuple[int, ...], int]:
        if k in self.bijections:
            return dict(self.bijections[k])
        return {s: pos for pos, s in enumerate(weight_class(self.shape, k))}


def fourier_family(shape: SystemShape, strings: Sequence[tuple[int, ...]], f: Mapping[tuple[int, ...], int]) -> list[StateVector]:
    """``sum_j w^(i f(j)) |j>`` over ``strings`` for ``i = 0..c-1``, ``w = e^(2 pi i / c)``."""
    c = len(strings)
    roots = roots_of_unity(c)
    positions = np.array([flat_index(s, shape) for s in strings])
    slots = np.array([f[s] for s in strings])
    out = []
    for i in range(c):
        amps = np.zeros(shape.total_dim, dtype=complex)
        amps[positions] = roots[(i * slots) % c]
        out.append(StateVector(shape, amps))
    return out


def theorem5_cardinality(dims: Sequence[int]) -> int:
    return math.prod(dims) - math.prod(d - 1 for d in dims)


def theorem5_set(spec: WeightClassFourierSpec | SystemShape | Sequence[int]) -> StateSet:
    """Union of the Fourier families over weight classes ``0..N-1``."""
    if not isinstance(spec, WeightClassFourierSpec):
        spec = WeightClassFourierSpec(spec)
    shape = spec.shape
    if shape.n_parties < 2:
        raise ShapeError("the weight-class construction needs at least two parties")
    states: list[StateVector] = []
    for k in range(shape.n_parties):
        states.extend(fourier_family(shape, weight_class(shape, k), spec.bijection(k)))
    label = "theorem5 dims=" + ",".join(map(str, shape.dims))
    return StateSet(shape, states, label=label, orth_tol=1e-12)


def sg_set(spec: WeightClassFourierSpec | SystemShape | Sequence[int]) -> StateSet:
    """The weight-class set with ``|0...0>`` swapped for ``|0...0> +- |1...1>``."""
    if not isinstance(spec, WeightClassFourierSpec):
        spec = WeightClassFourierSpec(spec)
    base = theorem5_set(spec)
    shape = spec.shape
    zero = flat_index((0,) * shape.n_parties, shape)
    ones = flat_index((1,) * shape.n_parties, shape)
    plus = np.zeros(shape.total_dim, dtype=complex)
    plus[zero], plus[ones] = 1, 1
    minus = plus.copy()
    minus[ones] = -1
    # S_0 is the single state |0...0>, always first.
    states = list(base.states[1:]) + [StateVector(shape, plus), StateVector(shape, minus)]
    label = "sg dims=" + ",".join(map(str, shape.dims))
    return StateSet(shape, states, label=label, orth_tol=1e-12)


@dataclass(frozen=True)
class PauliWord:
    """Tensor product of single-qubit Paulis, one letter per qubit."""

    letters: str

    def __post_init__(self):
        if not self.letters or set(self.letters) - set("IXYZ"):
            raise ValueError(f"bad Pauli word {self.letters!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    def matrix(self) -> np.ndarray:
        return reduce(np.kron, (PAULI[c] for c in self.letters))

    def apply(self, psi: StateVector) -> StateVector:
        if psi.shape.dims != (2,) * self.n_qubits:
            raise ShapeError(f"{self.n_qubits}-qubit word applied to dims {psi.shape.dims}")
        t = psi.tensor()
        for q, c in enumerate(self.letters):
            if c != "I":
                t = np.moveaxis(np.tensordot(PAULI[c], t, axes=([1], [q])), 0, q)
        return StateVector(psi.shape, t.reshape(-1))

    def __str__(self) -> str:
        return self.letters


def _check_w_n(n: int, minimum: int, max_n: int) -> None:
    if n < minimum:
        raise ValueError(f"n must be >= {minimum}, got {n}")
    if n > max_n:
        raise ValueError(f"n = {n} exceeds the dense-storage cap {max_n}")


def w_operator(n: int, max_n: int = MAX_W_QUBITS) -> np.ndarray:
    """``sum_l Z_1...Z_{l-1} X_l I...I`` as a dense ``2^n x 2^n`` matrix.

    Each term is a signed permutation: flip qubit ``l`` with sign
    ``(-1)^(bits before l)``, so the matrix is filled directly.
    """
    _check_w_n(n, 2, max_n)
    dim = 2**n
    x = np.arange(dim)
    U = np.zeros((dim, dim), dtype=complex)
    for l in range(n):
        bit = 1 << (n - 1 - l)
        before = x >> (n - l)
        parity = np.array([bin(v).count("1") & 1 for v in before])
        U[x ^ bit, x] += np.where(parity, -1.0, 1.0)
    return U


def w_state(n: int) -> StateVector:
    amps = np.zeros(2**n, dtype=complex)
    for l in range(n):
        amps[1 << (n - 1 - l)] = 1
    return StateVector((2,) * n, amps)


def w_basis(n: int, max_n: int = MAX_W_QUBITS) -> StateSet:
    """Columns of the W operator: state ``j`` is ``U|j>`` for flat index ``j``."""
    _check_w_n(n, 3, max_n)
    U = w_operator(n, max_n)
    shape = SystemShape((2,) * n)
    return StateSet(shape, [StateVector(shape, U[:, j]) for j in range(2**n)], label=f"wbasis n={n}",
                    orth_tol=1e-12)


def w_canonicalize(index: Sequence[int] | int, n: int) -> tuple[list[PauliWord], StateVector]:
    """Local circuit taking ``U|i>`` to ``|W_n>``.

    Returns two layers applied in order: ``X^{i_l}`` on each qubit, then
    ``Z(theta_l)`` with ``theta_l = i_1 + ... + i_{l-1}``; together with the
    image of ``U|i>`` under them.
    """
    _check_w_n(n, 3, MAX_W_QUBITS)
    digits = unflatten(index, (2,) * n) if isinstance(index, (int, np.integer)) else tuple(index)
    if len(digits) != n or any(b not in (0, 1) for b in digits):
        raise ValueError(f"{digits} is not an {n}-bit string")
    x_layer = PauliWord("".join("X" if b else "I" for b in digits))
    z_layer = PauliWord("".join("Z" if sum(digits[:l]) % 2 else "I" for l in range(n)))
    U = w_operator(n)
    psi = StateVector((2,) * n, U[:, flat_index(digits, (2,) * n)])
    out = z_layer.apply(x_layer.apply(psi))
    return [x_layer, z_layer], out


def bell_example() -> StateSet:
    """``{|00> + |11>, |00> - |11>, |01> + |10>}``."""
    shape = SystemShape((2, 2))
    states = [
        StateVector(shape, [1, 0, 0, 1]),
        StateVector(shape, [1, 0, 0, -1]),
        StateVector(shape, [0, 1, 1, 0]),
    ]
    return StateSet(shape, states, label="bell")
