import itertools

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from conftest import apply_local, local_unitary, product_basis
from qstable.constructions import bell_example, theorem5_set, w_basis
from qstable.numerics import TolerancePolicy, numerical_rank
from qstable.search import random_orthogonal_set
from qstable.stability import (
    DegenerateSetError,
    NoCertificateError,
    Verdict,
    build_dmatrix,
    cardinality_bounds,
    check_every_bipartition,
    check_locally_stable,
    classify_two_qubit,
    extract_certificate,
    hermitian_to_real,
    rank_of,
    real_to_hermitian,
    verify_opm,
)
from qstable.tensor_core import Bipartition, ShapeError, StateSet, all_bipartitions, flat_index, unflatten

AB = Bipartition([0], [1])


def brute_rows(S: StateSet, bp: Bipartition, side: str) -> np.ndarray:
    """Rows from the definition, by explicit loops over basis strings."""
    dims = S.shape.dims
    Q = bp.side(side)
    P = [p for p in range(len(dims)) if p not in Q]
    dQ = int(np.prod([dims[q] for q in Q]))
    comps = []
    for psi in S:
        c = {}
        for idx, amp in enumerate(psi.amplitudes):
            digits = unflatten(idx, dims)
            key = tuple(digits[p] for p in P)
            q_index = flat_index([digits[q] for q in Q], [dims[q] for q in Q])
            c.setdefault(key, np.zeros(dQ, dtype=complex))[q_index] = amp
        comps.append(c)
    rows = []
    n = len(S)
    for k in range(n):
        for l in range(n):
            if k == l:
                continue
            row = np.zeros(dQ * dQ, dtype=complex)
            for key in comps[k]:
                row += np.kron(comps[k][key], np.conj(comps[l][key]))
            rows.append(row)
    return np.array(rows)


def brute_opm(S: StateSet, bp: Bipartition, side: str, M: np.ndarray) -> np.ndarray:
    """<psi_k| I (x) M |psi_l> with the full operator built in the flat basis."""
    dims = S.shape.dims
    Q = bp.side(side)
    qdims = [dims[q] for q in Q]
    n = S.shape.total_dim
    full = np.zeros((n, n), dtype=complex)
    for a in range(n):
        da = unflatten(a, dims)
        for b in range(n):
            db = unflatten(b, dims)
            if any(da[p] != db[p] for p in range(len(dims)) if p not in Q):
                continue
            full[a, b] = M[flat_index([da[q] for q in Q], qdims), flat_index([db[q] for q in Q], qdims)]
    A = S.amplitude_matrix()
    return A.conj() @ full @ A.T


def test_bell_dmatrix_matches_reference():
    D = build_dmatrix(bell_example(), AB, "right")
    expected = [[1, 0, 0, -1], [0, 1, 1, 0], [1, 0, 0, -1], [0, 1, -1, 0], [0, 1, 1, 0], [0, -1, 1, 0]]
    assert np.array_equal(D.rows(), expected)
    assert D.row_index == [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
    # the (psi_+, phi_+) pair in the phi-first orientation
    assert np.array_equal(D.rows()[D.row_index.index((2, 0))], [0, 1, 1, 0])
    r = rank_of(D)
    assert (r.rank, r.target) == (3, 3)


def test_disjoint_supports_give_rank_zero():
    S = StateSet((2, 2), [[1, 0, 0, 0], [0, 0, 0, 1]])
    D = build_dmatrix(S, AB)
    assert np.array_equal(D.rows(), np.zeros((2, 4)))
    assert rank_of(D).rank == 0


@pytest.mark.parametrize("maker, bp", [
    (lambda: theorem5_set((2, 2, 3)), Bipartition([0, 2], [1])),
    (lambda: w_basis(3), Bipartition([1], [0, 2])),
    (lambda: random_orthogonal_set((2, 3), 4, 7), Bipartition([0], [1])),
    (lambda: random_orthogonal_set((2, 2, 2), 5, 3), Bipartition([0, 2], [1])),
])
@pytest.mark.parametrize("side", ["left", "right"])
def test_dmatrix_matches_definition(maker, bp, side):
    S = maker()
    D = build_dmatrix(S, bp, side)
    np.testing.assert_allclose(D.rows(), brute_rows(S, bp, side), atol=1e-13)


def test_dmatrix_rows_orthogonal_to_identity(rng):
    for S in [theorem5_set((2, 2, 3)), random_orthogonal_set((3, 2, 2), 7, 11), w_basis(4)]:
        for bp in all_bipartitions(S.shape.n_parties):
            for side in ("left", "right"):
                D = build_dmatrix(S, bp, side)
                rows = D.rows()
                vec_id = np.eye(D.d_measuring).reshape(-1)
                overlap = np.abs(rows @ vec_id)
                assert np.all(overlap <= 1e-10 * np.maximum(np.linalg.norm(rows, axis=1), 1e-300) + 1e-300)
                assert rank_of(D).rank <= D.target


def test_degenerate_sets():
    single = StateSet((2, 2), [[1, 0, 0, 0]])
    with pytest.raises(DegenerateSetError):
        build_dmatrix(single, AB)
    with pytest.raises(DegenerateSetError):
        check_locally_stable(single)
    with pytest.raises(DegenerateSetError):
        check_every_bipartition(StateSet((2, 2), []))


def test_rank_policy_and_streaming_agree(rng):
    S = w_basis(4)
    D = build_dmatrix(S, Bipartition([0], [1, 2, 3]))
    direct = rank_of(D, TolerancePolicy(stream_factor=10**6))
    streamed = rank_of(D, TolerancePolicy(stream_factor=1, block_rows=37))
    assert direct.rank == streamed.rank == 63
    np.testing.assert_allclose(direct.singular_values[:63], streamed.singular_values[:63], rtol=1e-10)
    # exact rank of the integer matrix
    assert sympy.Matrix(D.rows().real.astype(int)).rank() == 63


def test_numerical_rank_basics():
    assert numerical_rank(np.zeros((3, 4))).rank == 0
    a = np.outer([1, 2, 3], [1, 1j, 0])
    r = numerical_rank(a)
    assert r.rank == 1 and not r.marginal
    tiny = np.diag([1.0, 1e-12])
    assert numerical_rank(tiny).rank == 1
    assert numerical_rank(tiny, TolerancePolicy(eps_rank=1e-14)).rank == 2


def test_marginal_flag():
    # second singular value sits right at the threshold 1 * 2 * eps
    eps = 2.0**-40
    r = numerical_rank(np.diag([1.0, 2 * eps * 1.5]))
    assert r.marginal
    assert not numerical_rank(np.diag([1.0, 1e-3])).marginal


def test_locally_stable_examples():
    report = check_locally_stable(bell_example())
    assert report.overall is Verdict.LOCALLY_STABLE and report.ranks() == [3, 3]
    assert check_locally_stable(product_basis((2, 2))).overall is Verdict.NOT_STABLE


def test_every_pair_in_two_qubits_is_not_stable(rng):
    for seed in range(10):
        S = random_orthogonal_set((2, 2), 2, seed)
        assert check_locally_stable(S).overall is Verdict.NOT_STABLE


def test_every_bipartition_examples():
    r = check_every_bipartition(w_basis(3))
    assert r.overall is Verdict.STABLE_EVERY_BIPARTITION and r.ranks() == [15, 15, 15]
    prod = StateSet((2, 2, 2), [np.eye(8)[0], np.eye(8)[7]])
    assert check_every_bipartition(prod).overall is Verdict.NOT_STABLE
    assert check_every_bipartition(prod, "exhaustive").overall is Verdict.NOT_STABLE
    with pytest.raises(ValueError):
        check_every_bipartition(prod, "bogus")


def _corpus():
    sets = [bell_example(), product_basis((2, 2)), theorem5_set((2, 2, 2)), theorem5_set((2, 3)),
            w_basis(3), w_basis(3).subset(range(6)), product_basis((2, 2, 2))]
    for dims in [(2, 2, 2), (3, 3), (2, 3, 2), (2, 2, 2, 2), (3, 2, 3)]:
        for size in (3, 5, 8):
            if size <= np.prod(dims):
                sets.append(random_orthogonal_set(dims, size, 100 + size))
    # structured sets with deficient sides
    sets.append(StateSet((2, 2, 2), [np.eye(8)[j] + np.eye(8)[7 - j] for j in range(4)]))
    sets.append(StateSet((2, 2, 3), np.eye(12)[:6]))
    return sets


@pytest.mark.parametrize("S", _corpus(), ids=lambda S: f"{S.label}-{S.shape.dims}-{len(S)}")
def test_shortcut_and_exhaustive_agree(S):
    if S.shape.n_parties < 2:
        return
    a = check_every_bipartition(S, "shortcut")
    b = check_every_bipartition(S, "exhaustive")
    assert a.overall == b.overall


def test_certificate_examples():
    cert = extract_certificate(product_basis((2, 2)), AB, "right")
    assert cert.valid
    np.testing.assert_allclose(np.max(np.abs(np.linalg.eigvalsh(cert.M_B))), 0.25)
    cert2 = extract_certificate(StateSet((2, 2), [[1, 0, 0, 0], [0, 0, 0, 1]]), AB, "right")
    np.testing.assert_allclose(cert2.M_B, np.diag([0.25, -0.25]), atol=1e-15)
    assert cert2.valid
    with pytest.raises(NoCertificateError):
        extract_certificate(bell_example(), AB, "right")


@pytest.mark.parametrize("S, bp, side", [
    (product_basis((2, 2)), AB, "right"),
    (product_basis((2, 3)), AB, "left"),
    (w_basis(3).subset(range(6)), Bipartition([2], [0, 1]), "right"),
    (StateSet((2, 2, 2), [np.eye(8)[j] + np.eye(8)[7 - j] for j in range(4)]), Bipartition([0], [1, 2]), "right"),
])
def test_certificate_against_brute_force(S, bp, side):
    cert = extract_certificate(S, bp, side)
    assert cert.valid, cert.checks
    for M in cert.povm:
        G = brute_opm(S, bp, side, M)
        off = G - np.diag(np.diag(G))
        assert np.max(np.abs(off)) < 1e-12
        assert np.linalg.eigvalsh(M).min() >= -1e-12
    d = cert.M_B.shape[0]
    assert np.linalg.norm(cert.M_B - np.trace(cert.M_B) / d * np.eye(d)) > 0.1


def test_certificate_is_deterministic():
    S = w_basis(3).subset(range(6))
    bp = Bipartition([2], [0, 1])
    a = extract_certificate(S, bp)
    b = extract_certificate(S, bp)
    assert np.array_equal(a.M_B, b.M_B)


def test_verify_opm_examples():
    S = bell_example()
    ident = verify_opm(S, AB, "right", np.eye(2))
    assert ident.preserving and not ident.nontrivial
    proj = verify_opm(S, AB, "right", np.diag([1.0, 0.0]))
    assert not proj.preserving and proj.nontrivial
    # <psi_+| I (x) diag(1,0) |psi_-> = 1
    G = brute_opm(S, AB, "right", np.diag([1.0, 0.0]))
    assert G[0, 1] == 1
    with pytest.raises(ShapeError):
        verify_opm(S, AB, "right", np.eye(3))


def test_hermitian_coordinates_are_isometric(rng):
    for d in (2, 3, 4):
        A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        B = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        A, B = A + A.conj().T, B + B.conj().T
        np.testing.assert_allclose(hermitian_to_real(A) @ hermitian_to_real(B), np.trace(A @ B).real)
        np.testing.assert_allclose(real_to_hermitian(hermitian_to_real(A), d), A, atol=1e-14)


@pytest.mark.parametrize("dims, expected", [((2, 2, 2), (3, 5)), ((3, 3), (4, 4)), ((5,), (6, None)),
                                            ((2, 3, 4), (5, 13))])
def test_cardinality_bounds(dims, expected):
    assert cardinality_bounds(dims) == expected


def test_classify_two_qubit_examples():
    assert classify_two_qubit(bell_example()) is Verdict.LOCALLY_STABLE
    two_ent = StateSet((2, 2), [[1, 0, 0, 1], [1, 0, 0, -1], [0, 1, 0, 0], [0, 0, 1, 0]])
    assert classify_two_qubit(two_ent) is Verdict.LOCALLY_STABLE
    assert check_locally_stable(two_ent).overall is Verdict.LOCALLY_STABLE
    one_ent = StateSet((2, 2), [[1, 0, 0, 0], [0, 0, 0, 1], [0, 1, 1, 0]])
    assert classify_two_qubit(one_ent) is Verdict.NOT_STABLE
    assert check_locally_stable(one_ent).overall is Verdict.NOT_STABLE
    with pytest.raises(ShapeError):
        classify_two_qubit(theorem5_set((2, 2, 2)))


def _structured_two_qubit_sets(rng):
    """Locally rotated sets mixing product and entangled states."""
    bell = np.array([[1, 0, 0, 1], [1, 0, 0, -1], [0, 1, 1, 0], [0, 1, -1, 0]]) / np.sqrt(2)
    prod = np.eye(4)
    mixed = np.array([[1, 0, 0, 1], [1, 0, 0, -1], [0, 1, 0, 0], [0, 0, 1, 0]]) / np.sqrt(2)
    for base in (bell, prod, mixed):
        for size in (2, 3, 4):
            for subset in itertools.combinations(range(4), size):
                U = local_unitary((2, 2), rng)
                yield StateSet((2, 2), base[list(subset)] @ U.T, orth_tol=1e-9)


def test_classifier_agrees_on_structured_sets(rng):
    n = 0
    for S in _structured_two_qubit_sets(rng):
        assert classify_two_qubit(S) == check_locally_stable(S).overall
        n += 1
    assert n == 3 * 11


@given(st.integers(0, 2**32), st.sampled_from([(2, 2, 2), (2, 3)]))
@settings(max_examples=25, deadline=None)
def test_scale_invariance(seed, dims):
    rng = np.random.default_rng(seed)
    S = random_orthogonal_set(dims, 5, seed)
    factors = rng.standard_normal(5) * 10.0 ** rng.integers(-3, 4, 5) * np.exp(1j * rng.uniform(0, 6, 5))
    T = StateSet(S.shape, S.amplitude_matrix() * factors[:, None], orth_tol=1e-9)
    assert check_every_bipartition(S, "exhaustive").ranks() == check_every_bipartition(T, "exhaustive").ranks()


def test_extreme_state_norms_do_not_change_rank():
    S = theorem5_set((2, 2, 2))
    factors = 10.0 ** np.array([-6, 6, 0, 3, -3, 5, -5])
    T = StateSet(S.shape, S.amplitude_matrix() * factors[:, None], orth_tol=1e-9)
    assert check_every_bipartition(T, "exhaustive").ranks() == check_every_bipartition(S, "exhaustive").ranks()
    D = build_dmatrix(T, Bipartition([0], [1, 2]), "right")
    assert not np.array_equal(D.rows(), D.normalized().rows())


def test_local_unitary_invariance(rng):
    for S in (theorem5_set((2, 3)), w_basis(3).subset([0, 1, 2, 3, 4, 5])):
        base = check_every_bipartition(S, "exhaustive").ranks()
        for _ in range(5):
            T = apply_local(S, local_unitary(S.shape.dims, rng))
            assert check_every_bipartition(T, "exhaustive").ranks() == base


def test_report_json_shape():
    data = check_every_bipartition(w_basis(3)).to_json()
    assert data["overall"] == "stable-under-every-bipartition"
    entry = data["entries"][0]
    assert entry["bipartition"] == {"left": [0], "right": [1, 2]}
    assert entry["measuring"] == "right" and entry["rank"] == 15 and entry["target"] == 15
    assert entry["marginal"] is False
