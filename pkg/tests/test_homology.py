import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_hh_dims

from nccartier import linalg as la
from nccartier.algebras import group_algebra, matrix_algebra, prime_field, truncated_polynomial
from nccartier.cyclic import build_asharp, build_ip_pullback, constant_module, single_level_module
from nccartier.homology import (
    B_matrix,
    B_rotation_formula,
    ChainComplex,
    ChainMap,
    TruncationError,
    coaction,
    connecting_map,
    cyclic_homology,
    derivation_failures,
    diagonal_approximation,
    edgewise_subdivision,
    eps_cap_is_chain_map,
    hochschild_homology,
    is_invertible,
    les_check,
    mixed_identities,
    shuffle_product,
)

P = 3
DUAL = truncated_polynomial(2, P)


# [DERIVED] Hochschild homology against the word-level complex with schoolbook ranks
@pytest.mark.parametrize("A,d", [(prime_field(P), 2), (DUAL, 3), (group_algebra(2, P), 2),
                                 (group_algebra(3, P), 2), (matrix_algebra(2, P), 1)],
                         ids=lambda x: getattr(x, "name", str(x)))
def test_hh_against_naive(A, d):
    assert hochschild_homology(build_asharp(A, d + 1), d) == naive_hh_dims(A, d)


# [PAPER] k[x]/x^2 in characteristic 3: HH = 2, 1, 1, 1; Morita invariance for M_2
def test_hh_known_values():
    assert hochschild_homology(build_asharp(DUAL, 4), 3) == [2, 1, 1, 1]
    assert hochschild_homology(build_asharp(matrix_algebra(2, P), 2), 1) == [1, 0]


# [TRIVIAL]
def test_truncation_error():
    with pytest.raises(TruncationError):
        hochschild_homology(build_asharp(DUAL, 2), 2)
    with pytest.raises(TruncationError):
        B_matrix(build_asharp(DUAL, 2), 2)


# [TRIVIAL] b^2 = 0, B^2 = 0, bB + Bb = 0
@pytest.mark.parametrize("A", [DUAL, group_algebra(2, P), matrix_algebra(2, P)], ids=lambda A: A.name)
def test_mixed_identities(A):
    E = build_asharp(A, 4)
    for n in range(3):
        assert all(mixed_identities(E, n).values())


# [DERIVED] HC_n(k) is k in even degrees and zero in odd degrees
def test_cyclic_homology_of_ground_field():
    assert cyclic_homology(constant_module(P, 6), 4) == [1, 0, 1, 0, 1]


def modulo_degenerate(E, n, D):
    """Whether the columns of D lie in the span of the degeneracy images at level n + 1."""
    S = la.image_basis(sp.hstack([E.degen(n, i) for i in range(n + 1)], format="csr"), P)
    return la.rank(sp.hstack([S.basis, la.reduce(D, P)], format="csr"), P) == S.dim


# [DERIVED] B written with t and s agrees with the signed rotation sum up to degenerate chains
@pytest.mark.parametrize("A", [DUAL, group_algebra(2, P), matrix_algebra(2, P)], ids=lambda A: A.name)
def test_B_rotation_formula(A):
    E = build_asharp(A, 3)
    for n in range(3):
        assert modulo_degenerate(E, n, B_matrix(E, n) - B_rotation_formula(E, n, signed=True))


# [DERIVED] dropping the Koszul signs changes B in odd degree, even modulo degenerate chains
def test_unsigned_rotation_differs():
    E = build_asharp(DUAL, 3)
    assert not modulo_degenerate(E, 1, B_matrix(E, 1) - B_rotation_formula(E, 1, signed=False))


# [PAPER] edgewise subdivision is a chain map and a quasi-isomorphism
@pytest.mark.parametrize("A", [prime_field(P), DUAL, group_algebra(2, P)], ids=lambda A: A.name)
def test_edgewise_subdivision(A):
    sub = edgewise_subdivision(A, P, 1)
    assert sub.is_chain_map
    assert all(is_invertible(M, P) for M in sub.induced)


# [DERIVED] the shuffle product is graded commutative on HH of a commutative algebra
@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1), st.integers(0, 1), st.data())
def test_shuffle_graded_commutative(i, j, data):
    S = shuffle_product(DUAL, 2)
    vec = lambda d: np.array(data.draw(st.lists(st.integers(0, P - 1), min_size=S.classes(d).dim,  # noqa: E731
                                                max_size=S.classes(d).dim)))
    x, y = vec(i), vec(j)
    xy, yx = S.multiply(x, i, y, j), S.multiply(y, j, x, i)
    assert la.equal(xy, (-1) ** (i * j) * yx, P)


# [TRIVIAL] the unit class is a two-sided unit
def test_shuffle_unit():
    S = shuffle_product(DUAL, 1)
    one = S.classes(0).coords(la.from_dense(np.array([[1], [0]]), P)).toarray().ravel()
    for k in range(S.classes(1).dim):
        y = np.eye(S.classes(1).dim, dtype=np.int64)[k]
        assert la.equal(S.multiply(one, 0, y, 1), la.from_dense(y.reshape(-1, 1), P), P)


# [PAPER] B is a derivation of the shuffle product
@pytest.mark.parametrize("A", [DUAL, group_algebra(2, P)], ids=lambda A: A.name)
def test_B_derivation(A):
    assert derivation_failures(A, 2) == []


# [TRIVIAL] diagonal approximation of the periodic resolution
@pytest.mark.parametrize("p", [3, 5])
def test_diagonal_approximation(p):
    _, checks = diagonal_approximation(p, 5)
    assert all(checks.values())


# [TRIVIAL]
def test_eps_cap_chain_map():
    free = np.roll(np.eye(P, dtype=np.int64), 1, axis=0)
    assert eps_cap_is_chain_map(free, P, P, 6)


# [PAPER] on tight modules the even cap product vanishes and the odd one is invertible
@pytest.mark.parametrize("E", [build_ip_pullback(DUAL, P, 1), constant_module(P, 2, period=P)],
                         ids=["ip*A#", "k"])
def test_coaction_window(E):
    for i in (1, 2):
        w = coaction(E, i)
        assert all(v.nnz == 0 for v in w.vanishing.values())
        assert w.is_quasi_isomorphism(P)


# [TRIVIAL] non-tight input is refused
def test_coaction_needs_tight():
    jordan = np.array([[1, 1], [0, 1]])
    with pytest.raises(ValueError):
        coaction(single_level_module(P, jordan, P), 1)


def two_term():
    # sub = k in degree 0, mid = (k -> k) acyclic, quot = k in degree 1
    sub = ChainComplex(P, 0, 2, lambda d: int(d == 0), lambda d: la.zeros(int(d == 1), int(d == 0)),
                       "sub", bounded=True)
    mid = ChainComplex(P, 0, 2, lambda d: int(d <= 1), lambda d: la.identity(1) if d == 1 else
                       la.zeros(int(d == 2), int(d <= 1)), "mid", bounded=True)
    quot = ChainComplex(P, 0, 2, lambda d: int(d == 1), lambda d: la.zeros(int(d == 2), int(d == 1)),
                        "quot", bounded=True)
    incl = ChainMap(sub, mid, lambda d: la.identity(1) if d == 0 else la.zeros(mid.dim(d), sub.dim(d)))
    proj = ChainMap(mid, quot, lambda d: la.identity(1) if d == 1 else la.zeros(quot.dim(d), mid.dim(d)))
    return sub, mid, quot, incl, proj


# [DERIVED] connecting map of 0 -> k -> cone -> k[1] -> 0 is an isomorphism
def test_connecting_map_and_les():
    sub, mid, quot, incl, proj = two_term()
    delta = connecting_map(incl, proj, 1)
    assert delta.shape == (1, 1) and is_invertible(delta, P)
    assert les_check(sub, mid, quot, incl, proj, 1).exact


# [DERIVED] the orbit-decomposition path agrees with group homology of the whole level
@pytest.mark.parametrize("E", [build_ip_pullback(DUAL, P, 1), build_ip_pullback(group_algebra(2, P), P, 1)],
                         ids=["x^2", "Z/2"])
def test_coaction_fast_path_agrees(E):
    for i in (1, 2):
        fast, slow = coaction(E, i), coaction(E, i, generic=True)
        assert fast.dims == slow.dims
        assert fast.is_quasi_isomorphism(P) == slow.is_quasi_isomorphism(P)
        assert all((fast.vanishing[n].nnz == 0) == (slow.vanishing[n].nnz == 0) for n in fast.dims)
