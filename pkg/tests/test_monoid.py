import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nccartier import linalg as la
from nccartier.algebras import FiniteMonoid, cyclic_group, monoid_algebra, product_monoid, truncated_monoid
from nccartier.monoid import (
    MonoidChain,
    NonCommutativeError,
    coinvariant_rep,
    cross_check_phi,
    finite_monoid,
    formula_matrix,
    free_abelian,
    is_group,
    mixed_monoid,
    phi_chain,
    random_formula_check,
    rotate_blocks,
    subdivide,
    symbolic_zeta_phi,
    zeta_phi,
    _zeta_phi_chain,
)

# identity 0, left-zero elements 1, 2: a b = a
LEFT_ZERO = FiniteMonoid(((0, 1, 2), (1, 1, 1), (2, 2, 2)), 0, None, ("1", "a", "b"), "LZ")


def mixed_chains(n, l, max_len=4, bound=9):
    coord = lambda j: st.integers(0, bound) if j < l else st.integers(-bound, bound)  # noqa: E731
    elem = st.tuples(*[coord(j) for j in range(n)])
    return st.lists(elem, min_size=1, max_size=max_len).map(lambda e: MonoidChain(tuple(e)))


# [DERIVED] oracle: the first entry of zeta Phi is g_0 + (p-1)(g_0 + ... + g_i), computed coordinatewise
@settings(max_examples=200, deadline=None)
@given(st.sampled_from([3, 5, 7]), st.integers(1, 3), st.data())
def test_closed_formula_on_mixed_monoids(p, n, data):
    l = data.draw(st.integers(0, n))
    M = mixed_monoid(n, l)
    c = data.draw(mixed_chains(n, l))
    out = zeta_phi(M, c, p)
    first = tuple(c.entries[0][j] + (p - 1) * sum(g[j] for g in c.entries) for j in range(n))
    assert out.entries == (first,) + c.entries[1:]
    assert out == symbolic_zeta_phi(M, c, p)
    assert all(M.valid(g) for g in out.entries)


# [TRIVIAL] the p-fold block is fixed by the deck transformation
@given(mixed_chains(2, 1), st.sampled_from([3, 5]))
def test_diagonal_is_deck_invariant(c, p):
    d = phi_chain(c, p)
    assert all(rotate_blocks(d, p, k) == d for k in range(p))
    assert coinvariant_rep(d, p) == d


# [TRIVIAL] subdivision multiplies (i+1)(p-1)+1 entries
def test_subdivide_counts():
    M = free_abelian(1)
    c = MonoidChain(tuple((k,) for k in range(6)))  # degree 1 at p = 3
    assert subdivide(M, c, 3).entries == ((0 + 1 + 2 + 3 + 4,), (5,))


# [TRIVIAL]
def test_validity():
    with pytest.raises(ValueError):
        MonoidChain(((-1,),)).check(mixed_monoid(1, 1))
    MonoidChain(((-1,),)).check(free_abelian(1))
    with pytest.raises(ValueError):
        mixed_monoid(1, 2)


# [TRIVIAL] seeded random checks pass and are reproducible
@pytest.mark.parametrize("p", [3, 5])
def test_random_formula_check(p):
    a = random_formula_check(2, 1, p, samples=300, seed=7)
    b = random_formula_check(2, 1, p, samples=300, seed=7)
    assert a.ok and b.ok and a.samples == 300 and a.mismatches == b.mismatches == []


# [TRIVIAL] the closed formula needs commutativity
def test_non_commutative_refused():
    M = finite_monoid(LEFT_ZERO)
    with pytest.raises(NonCommutativeError):
        zeta_phi(M, MonoidChain((1, 2)), 3)
    # the symbolic recomputation still runs
    assert symbolic_zeta_phi(M, MonoidChain((1, 2)), 3).entries == (1, 2)


# [DERIVED] pipeline chain maps (diagonal then edgewise subdivision) equal the symbolic matrix
@pytest.mark.parametrize("G,d", [(cyclic_group(2), 2), (cyclic_group(3), 1), (truncated_monoid(2), 2),
                                 (truncated_monoid(3), 1), (product_monoid(cyclic_group(2), cyclic_group(2)), 1)],
                         ids=lambda x: getattr(x, "name", str(x)))
def test_formula_matrix_matches_chain_level(G, d):
    A = monoid_algebra(G, 3)
    for k in range(d + 1):
        assert la.equal(_zeta_phi_chain(A, 3, k), formula_matrix(G, 3, k), 3)


# [TRIVIAL]
def test_is_group():
    assert is_group(cyclic_group(4))
    assert not is_group(truncated_monoid(2))
    assert not is_group(LEFT_ZERO)


# [PAPER] Phi lands in ZHH, C Phi = id and zeta Phi is the closed formula on homology
@pytest.mark.parametrize("G,d", [(cyclic_group(1), 2), (cyclic_group(2), 2), (truncated_monoid(2), 1)],
                         ids=lambda x: getattr(x, "name", str(x)))
def test_cross_check_phi(G, d):
    r = cross_check_phi(G, 3, d)
    assert r.ok
    assert all(r.lands_in_Z.values()) and all(r.c_phi_identity.values())


# [PAPER] for a group of order prime to p, ZHH = xi(BHH) + Phi(HH)
def test_decomposition_for_groups():
    r = cross_check_phi(cyclic_group(2), 3, 1)
    assert all(r.decomposition.values())
