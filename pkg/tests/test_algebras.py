import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_rank

from nccartier.algebras import (
    Algebra,
    AxiomError,
    FiniteMonoid,
    axiom_violation,
    change_basis,
    check,
    cyclic_group,
    group_algebra,
    hh0,
    matrix_algebra,
    monoid_algebra,
    permute_basis,
    prime_field,
    tensor_product,
    truncated_monoid,
    truncated_polynomial,
    verify_axioms,
)

ALGEBRAS = [prime_field(3), group_algebra(2, 3), truncated_polynomial(2, 3), truncated_polynomial(3, 3),
            group_algebra(4, 3), matrix_algebra(2, 3)]


def e(A, i):
    return A.basis_vector(i)


# [TRIVIAL] constructor outputs satisfy the axioms
@pytest.mark.parametrize("A", ALGEBRAS, ids=lambda A: A.name)
def test_constructors_satisfy_axioms(A):
    assert verify_axioms(A)


# [TRIVIAL] group table: g g = e
def test_group_algebra_z2():
    A = group_algebra(2, 3)
    assert A.dim == 2
    assert np.array_equal(A.mul(e(A, 1), e(A, 1)), e(A, 0))


# [TRIVIAL] contraction rule: {1, x, 0} with x x = 0 gives the dual numbers
def test_contracted_monoid_is_dual_numbers():
    A = monoid_algebra(truncated_monoid(2), 3)
    assert A.dim == 2
    assert not A.mul(e(A, 1), e(A, 1)).any()


# [TRIVIAL]
def test_z4_is_commutative_dim4():
    A = group_algebra(4, 3)
    assert A.dim == 4 and A.is_commutative()


# [TRIVIAL]
def test_truncated_polynomials():
    assert truncated_polynomial(1, 3).dim == 1
    A = truncated_polynomial(3, 3)
    x, x2 = e(A, 1), e(A, 2)
    assert np.array_equal(A.mul(x, x), x2)
    assert not A.mul(x, x2).any()


# [TRIVIAL] E12 E21 = E11
def test_matrix_units():
    assert matrix_algebra(1, 3).dim == 1
    A = matrix_algebra(2, 3)
    assert A.dim == 4
    assert np.array_equal(A.mul(e(A, 1), e(A, 2)), e(A, 0))


# [TRIVIAL]
def test_tensor_products():
    A = truncated_polynomial(2, 3)
    T = tensor_product(A, prime_field(3))
    assert T.dim == 2 and np.array_equal(T.st, A.st)
    D = tensor_product(A, A)
    assert D.dim == 4 and verify_axioms(D)


# [TRIVIAL] broken associativity and broken unit are reported
def test_axiom_failures():
    A = truncated_polynomial(2, 3)
    st2 = np.zeros((3, 3, 3), dtype=np.int64)
    for i in range(3):
        st2[0, i, i] = st2[i, 0, i] = 1
    st2[1, 2, 1] = 1  # a b = a, b b = 0, so (a b) b != a (b b)
    st2[2, 1, 2] = 1
    nonassoc = Algebra(3, st2, [1, 0, 0], ("1", "a", "b"))
    kind, where = axiom_violation(nonassoc)
    assert kind == "associativity" and len(where) == 3
    with pytest.raises(AxiomError):
        check(nonassoc)
    perturbed = Algebra(3, A.st, [1, 1], A.labels)
    assert not verify_axioms(perturbed)


# [TRIVIAL] a non-associative monoid table is rejected
def test_monoid_validation():
    table = ((0, 1, 2), (1, 2, 0), (2, 1, 2))
    with pytest.raises(AxiomError):
        monoid_algebra(FiniteMonoid(table, 0), 3)


# [TRIVIAL] commutative algebras: commutators vanish
@pytest.mark.parametrize("A", [group_algebra(2, 3), truncated_polynomial(2, 3), group_algebra(4, 3)],
                         ids=lambda A: A.name)
def test_hh0_commutative(A):
    assert hh0(A) == A.dim


# [DERIVED] oracle: rank of all commutators of 2x2 matrix units, computed with numpy matrices
def test_hh0_matrices():
    units = []
    for i, j in itertools.product(range(2), repeat=2):
        M = np.zeros((2, 2), dtype=int)
        M[i, j] = 1
        units.append(M)
    comms = [[int(v) for v in (X @ Y - Y @ X).ravel()] for X in units for Y in units]
    r = naive_rank(comms, 3)
    assert r == 3
    assert hh0(matrix_algebra(2, 3)) == 4 - r == 1


# [TRIVIAL] names of the builtin families
def test_names():
    assert prime_field(3).name == "F_3"
    assert group_algebra(2, 3).name == "F_3[Z/2]"
    assert truncated_polynomial(2, 3).name == "F_3[x]/x^2"


@st.composite
def invertible(draw, n, p):
    # unit lower triangular times unit upper triangular, then a row permutation
    L = np.eye(n, dtype=np.int64)
    U = np.eye(n, dtype=np.int64)
    for i in range(n):
        for j in range(i):
            L[i, j] = draw(st.integers(0, p - 1))
            U[j, i] = draw(st.integers(0, p - 1))
    perm = draw(st.permutations(range(n)))
    return (L @ U % p)[list(perm)]


# [DERIVED] a basis change is an isomorphism onto an algebra satisfying the axioms
@settings(max_examples=25, deadline=None)
@given(st.data())
def test_change_basis_is_isomorphism(data):
    A = data.draw(st.sampled_from(ALGEBRAS[1:4]))
    P = data.draw(invertible(A.dim, A.p))
    B, phi = change_basis(A, P)
    assert verify_axioms(B)
    assert phi.is_homomorphism()


# [TRIVIAL] permutations preserve the multiset of structure constants
@settings(max_examples=20, deadline=None)
@given(st.permutations(range(4)))
def test_permute_basis(perm):
    A = matrix_algebra(2, 3)
    B, phi = permute_basis(A, perm)
    assert verify_axioms(B) and phi.is_homomorphism()
    assert sorted(B.st.ravel()) == sorted(A.st.ravel())


# [DERIVED] associativity on random elements, via left multiplication matrices
@settings(max_examples=30, deadline=None)
@given(st.data())
def test_left_multiplication_is_a_representation(data):
    A = data.draw(st.sampled_from(ALGEBRAS))
    vec = st.lists(st.integers(0, A.p - 1), min_size=A.dim, max_size=A.dim)
    x, y = np.array(data.draw(vec)), np.array(data.draw(vec))
    Lxy = A.left_mult_matrix(A.mul(x, y))
    assert np.array_equal(Lxy, A.left_mult_matrix(x) @ A.left_mult_matrix(y) % A.p)


def test_cyclic_group_table():
    # [TRIVIAL]
    G = cyclic_group(3)
    assert G.mul(1, 2) == 0 and G.is_commutative()
