import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from nccartier import linalg as la
from nccartier.algebras import verify_axioms
from nccartier.derham import (
    DegreeError,
    InfiniteDimensionalError,
    LogForm,
    NotEtaleError,
    PresentedAlgebra,
    UnsupportedPresentation,
    classical_cartier_degree0,
    compare_cartier,
    connes_vs_derham,
    cyclic_presentation,
    hkr_matrix,
    kaehler_forms,
    laurent_hkr_check,
    parse_presentation,
    symbolic_c_inverse,
    truncated_presentation,
)

TWO_VAR = parse_presentation(3, ["x", "y"], ["x^2", "y^2"])


# [DERIVED] oracle: dim Omega^1 of F_p[x]/(f) is deg gcd(f, f'), computed with sympy over GF(p)
@settings(max_examples=60, deadline=None)
@given(st.sampled_from([3, 5]), st.lists(st.integers(0, 4), min_size=1, max_size=5))
def test_omega1_dim_is_gcd_degree(p, low):
    f = tuple(c % p for c in low) + (1,)
    A = PresentedAlgebra(p, ("x",), (f,))
    x = sympy.symbols("x")
    poly = sympy.Poly(list(reversed(f)), x, modulus=p)
    g = sympy.gcd(poly, poly.diff(x))
    assert kaehler_forms(A, 1).dim(1) == g.degree()


# [DERIVED] Omega of a tensor product: dims multiply out over the two factors
def test_two_variable_dims():
    F = kaehler_forms(TWO_VAR, 2)
    assert [F.dim(i) for i in range(3)] == [4, 1 * 2 + 2 * 1, 1]


# [TRIVIAL]
@pytest.mark.parametrize("A", [truncated_presentation(3, 3), cyclic_presentation(3, 3), TWO_VAR],
                         ids=lambda A: A.name or "xy")
def test_d_is_a_differential(A):
    F = kaehler_forms(A, 2)
    assert F.d_squared_zero() and F.d_descends()


# [TRIVIAL] parsing, normalisation and the restricted presentation form
def test_parse():
    assert parse_presentation(3, ["t"], ["t^4 - 1"]).relations == cyclic_presentation(4, 3).relations
    assert parse_presentation(5, ["x"], ["2*x^2"]).relations == ((0, 0, 1),)
    with pytest.raises(UnsupportedPresentation):
        parse_presentation(3, ["x", "y"], ["x*y", "y^2"])
    with pytest.raises(InfiniteDimensionalError):
        parse_presentation(3, ["x", "y"], ["x^2"])
    with pytest.raises(UnsupportedPresentation):
        parse_presentation(3, ["x"], ["x^2/2"])


# [TRIVIAL]
@pytest.mark.parametrize("A", [truncated_presentation(2, 3), cyclic_presentation(4, 3), TWO_VAR],
                         ids=lambda A: A.name or "xy")
def test_to_algebra(A):
    alg = A.to_algebra()
    assert alg.dim == int(np.prod(A.degrees)) and verify_axioms(alg) and alg.is_commutative()


# [DERIVED] HKR in degree 1: a0 (x) a1 -> a0 da1, checked on x (x) x^2 in F_5[x]/x^4
def test_hkr_degree1_value():
    A = truncated_presentation(4, 5)
    F = kaehler_forms(A, 1)
    chain = np.zeros(16, dtype=np.int64)
    chain[1 * 4 + 2] = 1
    got = F.section[1] @ (hkr_matrix(A, 1, F) @ chain % 5) % 5
    # x d(x^2) = 2 x^2 dx, coordinate (monomial x^2, dx)
    want = np.zeros(F.ambient_dim(1), dtype=np.int64)
    want[2] = 2
    assert np.array_equal(np.asarray(got).ravel() % 5, want)


# [PAPER] HKR kills boundaries and intertwines B with d
@pytest.mark.parametrize("A,p,d", [(truncated_presentation(2, 3), 3, 1), (TWO_VAR, 3, 1),
                                   (truncated_presentation(2, 5), 5, 2), (cyclic_presentation(2, 5), 5, 2)],
                         ids=["x2-p3", "xy-p3", "x2-p5", "t2-p5"])
def test_hkr_intertwines(A, p, d):
    assert connes_vs_derham(A, d).ok


# [DERIVED] the unsigned rotation sum is not compatible with d in degree 1 on two variables
def test_unsigned_rotation_fails():
    r = connes_vs_derham(TWO_VAR, 1, signed=False)
    assert not r.intertwines[1]


# [TRIVIAL] 1/3! is needed only when Omega^3 != 0
def test_degree_error():
    assert hkr_matrix(truncated_presentation(2, 3), 3).shape == (0, 16)
    three = parse_presentation(3, ["x", "y", "z"], ["x^2", "y^2", "z^2"])
    with pytest.raises(DegreeError):
        hkr_matrix(three, 3)
    with pytest.raises(DegreeError):
        connes_vs_derham(three, 2)


# [PAPER] at p = 3 through degree 2: Omega^3 = 0 for the one- and two-variable test algebras
@pytest.mark.parametrize("A", [truncated_presentation(2, 3), cyclic_presentation(2, 3), TWO_VAR],
                         ids=["x2", "t2", "xy"])
def test_hkr_p3_degree2(A):
    assert connes_vs_derham(A, 2).ok


# [DERIVED] inverse Frobenius on F_3[t]/(t^4 - 1) permutes t^k to t^{3k mod 4}
def test_classical_cartier_cyclic():
    M = classical_cartier_degree0(cyclic_presentation(4, 3))
    want = np.zeros((4, 4), dtype=np.int64)
    for k in range(4):
        want[3 * k % 4, k] = 1
    assert np.array_equal(M, want)


# [TRIVIAL]
def test_not_etale():
    with pytest.raises(NotEtaleError):
        classical_cartier_degree0(truncated_presentation(2, 3))


# [PAPER] on an étale algebra C agrees with the classical operator in degree 0, higher degrees vanish
def test_compare_cartier_z2():
    r = compare_cartier(cyclic_presentation(2, 3), d_max=1)
    assert r.ok and r.agrees_degree0 and all(r.degenerate.values())


# [TRIVIAL] C^{-1} on log forms raises exponents to the p-th multiple
def test_symbolic_c_inverse():
    w = LogForm.of(5, {((1, -2), (0,)): 3})
    assert symbolic_c_inverse(w).as_dict() == {((5, -10), (0,)): 3}


# [PAPER] HKR(zeta Phi) = C^{-1} HKR on Laurent monomials
@pytest.mark.parametrize("p,n,l", [(3, 1, 0), (3, 2, 1), (5, 2, 1), (5, 3, 2)])
def test_laurent_hkr(p, n, l):
    assert laurent_hkr_check(p, n, l, samples=300, seed=1)
