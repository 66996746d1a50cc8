import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_rank, naive_tensor_face

from nccartier import linalg as la
from nccartier.algebras import group_algebra, matrix_algebra, prime_field, truncated_polynomial
from nccartier.cyclic import (
    CyclicModule,
    SigmaQuotients,
    build_asharp,
    build_ip_pullback,
    build_K_twists,
    constant_module,
    four_term_exact,
    psi,
    relation_failures,
    single_level_module,
    tightness_check,
    verify_cyclic_relations,
)

P = 3
DUAL = truncated_polynomial(2, P)


def dense(M):
    return np.asarray(M.todense()) % P


# [TRIVIAL]
def test_asharp_dims():
    assert build_asharp(DUAL, 2).dims == [2, 4, 8]


# [DERIVED] faces agree with the word-by-word definition (a_n a_0 in the last face)
@pytest.mark.parametrize("A", [DUAL, group_algebra(2, P), matrix_algebra(2, P)], ids=lambda A: A.name)
def test_asharp_faces_against_words(A):
    E = build_asharp(A, 2)
    for n in (1, 2):
        for i in range(n + 1):
            assert np.array_equal(dense(E.face(n, i)), naive_tensor_face(A, n, i))


# [DERIVED] t moves the last tensor factor to the front
def test_asharp_cyclic_operator_on_words():
    E = build_asharp(DUAL, 2)
    t = dense(E.cyc(2))
    for col, w in enumerate(itertools.product(range(2), repeat=3)):
        target = int(np.ravel_multi_index((w[2], w[0], w[1]), (2, 2, 2)))
        assert t[:, col].tolist() == [int(r == target) for r in range(8)]


# [TRIVIAL] d_1 t = d_0 on level 1
def test_face_cyclic_identity_level1():
    E = build_asharp(DUAL, 2)
    assert la.equal(E.face(1, 1) @ E.cyc(1), E.face(1, 0), P)


# [TRIVIAL]
@pytest.mark.parametrize("A", [prime_field(P), DUAL, group_algebra(2, P), matrix_algebra(2, P)],
                         ids=lambda A: A.name)
def test_asharp_relations(A):
    assert verify_cyclic_relations(build_asharp(A, 3))


# [TRIVIAL] replacing t with t^2 breaks the relations and the report names them
def test_broken_cyclic_operator_detected():
    E = build_asharp(DUAL, 2)
    bad = CyclicModule(P, 2, E.dims, E.face, E.degen, lambda n: la.power(E.cyc(n), 2, P), name="bad")
    fails = relation_failures(bad)
    assert fails and not verify_cyclic_relations(bad)


# [TRIVIAL]
def test_constant_module():
    assert verify_cyclic_relations(constant_module(P, 4))
    assert verify_cyclic_relations(constant_module(P, 3, period=P))


# [TRIVIAL]
def test_ip_pullback_dims_and_relations():
    E = build_ip_pullback(DUAL, P, 1)
    assert E.dims == [8, 64]
    assert verify_cyclic_relations(E)
    with pytest.raises(ValueError):
        build_ip_pullback(DUAL, 2, 1)


# [DERIVED] sigma on level 0 rotates A^{(x)3} by one factor; t^{3(n+1)} = id
def test_sigma_level0_rotation():
    E = build_ip_pullback(DUAL, P, 1)
    s = dense(E.sigma(0))
    for col, w in enumerate(itertools.product(range(2), repeat=3)):
        target = int(np.ravel_multi_index((w[2], w[0], w[1]), (2, 2, 2)))
        assert s[target, col] == 1
    for n in (0, 1):
        assert la.equal(la.power(E.cyc(n), 3 * (n + 1), P), la.identity(E.dim(n)), P)


def necklaces(a, m, p):
    """Orbits of words of length m*p under rotation by m letters."""
    seen, count = set(), 0
    for w in itertools.product(range(a), repeat=m * p):
        if w in seen:
            continue
        count += 1
        for k in range(p):
            seen.add(w[k * m:] + w[:k * m])
    return count


# [DERIVED] orbit counting for (co)invariants of a permutation action
@pytest.mark.parametrize("n", [0, 1])
def test_invariant_dims_orbit_count(n):
    q = SigmaQuotients(build_ip_pullback(DUAL, P, 1))
    expect = necklaces(2, n + 1, P)
    assert q.invariants.dim(n) == q.coinvariants.dim(n) == expect
    # Burnside: (a^(3m) + 2 a^m) / 3
    assert expect == (4 if n == 0 else 24)


# [DERIVED] invariants and coinvariants computed with the generic (non-permutation) path agree
def test_generic_presentation_agrees():
    E = build_ip_pullback(DUAL, P, 1)
    a, b = SigmaQuotients(E), SigmaQuotients(E, generic=True)
    for n in (0, 1):
        assert a.invariants.dim(n) == b.invariants.dim(n)
        assert la.rank(a.trace().at(n), P) == la.rank(b.trace().at(n), P)


# [TRIVIAL] tr o e = 0 and e o tr = 0 (multiplication by p)
def test_trace_e_compose_to_zero():
    q = SigmaQuotients(build_ip_pullback(DUAL, P, 1))
    for n in (0, 1):
        assert la.is_zero(q.trace().at(n) @ q.e_map().at(n), P)
        assert la.is_zero(q.e_map().at(n) @ q.trace().at(n), P)
    assert q.trace().is_natural() and q.e_map().is_natural()


# [DERIVED] psi is injective with image Ker tr; ranks through the schoolbook oracle
@pytest.mark.parametrize("A", [DUAL, group_algebra(2, P)], ids=lambda A: A.name)
def test_psi_image_is_kernel_of_trace(A):
    f = psi(A, P, 1)
    q = f.target
    tr_map = SigmaQuotients(build_ip_pullback(A, P, 1)).trace()
    assert f.is_natural()
    for n in (0, 1):
        M, T = f.at(n), tr_map.at(n)
        assert naive_rank(dense(M).tolist(), P) == M.shape[1]
        assert la.is_zero(T @ M, P)
        assert M.shape[1] == q.dim(n) - la.rank(T, P)


# [DERIVED] x -> [x^{(x) p}] on a general vector equals the linear map psi (cross terms cancel)
@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, P - 1), min_size=4, max_size=4))
def test_psi_additive_on_vectors(coeffs):
    E = build_ip_pullback(DUAL, P, 1)
    q = SigmaQuotients(E)
    x = np.array(coeffs, dtype=np.int64)
    xp = x
    for _ in range(P - 1):
        xp = np.kron(xp, x) % P
    direct = q.pres(1).proj @ xp % P
    f = psi(DUAL, P, 1)
    assert np.array_equal(direct, f.at(1) @ x % P)


# [TRIVIAL] the four-term sequence and the B factorisation
@pytest.mark.parametrize("E", [build_asharp(DUAL, 5), constant_module(P, 5), build_ip_pullback(DUAL, P, 1)],
                         ids=["A#", "k", "ip*A#"])
def test_four_term_sequence(E):
    tw = build_K_twists(E)
    for n in range(E.N + 1):
        assert four_term_exact(tw, n)
        assert la.is_zero(tw.kappa0.at(n) @ tw.boundary.at(n), P)
    assert verify_cyclic_relations(tw.K0) and verify_cyclic_relations(tw.K1)


# [DERIVED] B sends e (x) v_j to e (x) (sum of all cells)
def test_B_is_sum_over_cells():
    tw = build_K_twists(constant_module(P, 2))
    for n in range(3):
        assert np.array_equal(dense(tw.B.at(n)), np.ones((n + 1, n + 1), dtype=np.int64))


# [TRIVIAL] tight modules and a non-tight Jordan block
def test_tightness():
    assert tightness_check(build_ip_pullback(DUAL, P, 1))
    assert tightness_check(constant_module(P, 2, period=P))
    free = sp.csr_matrix(np.roll(np.eye(P, dtype=np.int64), 1, axis=0))
    assert tightness_check(single_level_module(P, free, P))
    jordan = sp.csr_matrix(np.array([[1, 1], [0, 1]]))
    assert not tightness_check(single_level_module(P, jordan, P))
