import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_rank

from nccartier import linalg as la
from nccartier.linalg import Subspace


def mat(rows, p):
    return la.from_dense(rows, p)


def matrices(max_rows=7, max_cols=7):
    return st.tuples(
        st.sampled_from([3, 5, 7]),
        st.integers(1, max_rows),
        st.integers(1, max_cols),
    ).flatmap(
        lambda t: st.tuples(
            st.just(t[0]),
            st.lists(
                st.lists(st.integers(0, t[0] - 1), min_size=t[2], max_size=t[2]),
                min_size=t[1],
                max_size=t[1],
            ),
        )
    )


# [TRIVIAL]
def test_rank_examples():
    assert la.rank(la.identity(3), 3) == 3
    assert la.rank(la.zeros(4, 5), 3) == 0
    assert la.rank(mat([[1, 2], [2, 4]], 5), 5) == 1


# [TRIVIAL]
def test_kernel_examples():
    assert la.kernel_basis(la.identity(3), 3).dim == 0
    assert la.kernel_basis(la.zeros(2, 2), 3).dim == 2
    K = la.kernel_basis(mat([[1, 1]], 3), 3)
    assert K.dim == 1
    assert K.basis.toarray().ravel().tolist() == [1, 2]


# [TRIVIAL]
def test_image_examples():
    assert la.image_basis(la.identity(4), 5).dim == 4
    assert la.image_basis(la.zeros(3, 2), 5).dim == 0
    im = la.image_basis(mat([[1], [2]], 3), 3)
    assert im.basis.toarray().ravel().tolist() == [1, 2]


# [TRIVIAL]
def test_quotient_examples():
    proj, sec = la.quotient_presentation(3, Subspace.zero(3, 3))
    assert la.equal(proj, la.identity(3), 3)
    sub = Subspace.span(mat([[1], [0]], 3), 3)
    proj, sec = la.quotient_presentation(2, sub)
    assert proj.toarray().tolist() == [[0, 1]]
    proj, sec = la.quotient_presentation(3, Subspace.full(3, 3))
    assert proj.shape == (0, 3)


# [TRIVIAL] including the non-invariant error
def test_restrict_examples():
    p = 3
    sub = Subspace.span(mat([[1, 0], [1, 1], [0, 2]], p), p)
    assert la.equal(la.restrict_map(la.identity(3), sub, sub), la.identity(2), p)
    assert la.restrict_map(la.zeros(3, 3), sub, sub).nnz == 0
    full = Subspace.full(2, p)
    M = mat([[0, 1], [0, 0]], p)
    assert la.restrict_map(M, full, full).toarray().tolist() == [[0, 1], [0, 0]]
    line = Subspace.span(mat([[1], [0]], p), p)
    with pytest.raises(la.NotInvariantError, match="not invariant"):
        la.restrict_map(mat([[0, 0], [1, 0]], p), line, line)


# [DERIVED] oracle: schoolbook elimination in plain python
@settings(max_examples=80, deadline=None)
@given(matrices())
def test_rank_matches_schoolbook(data):
    p, rows = data
    assert la.rank(mat(rows, p), p) == naive_rank(rows, p)


# [DERIVED] rank-nullity and M K = 0
@settings(max_examples=80, deadline=None)
@given(matrices())
def test_rank_nullity(data):
    p, rows = data
    M = mat(rows, p)
    K = la.kernel_basis(M, p)
    assert la.rank(M, p) + K.dim == M.shape[1]
    assert la.is_zero(M @ K.basis, p)
    assert K.check_canonical()


# [DERIVED] proj o sec = id and proj kills the subspace
@settings(max_examples=60, deadline=None)
@given(matrices())
def test_quotient_laws(data):
    p, rows = data
    M = mat(rows, p)
    sub = la.image_basis(M, p)
    proj, sec = la.quotient_presentation(M.shape[0], sub)
    q = M.shape[0] - sub.dim
    assert proj.shape == (q, M.shape[0])
    assert la.equal(proj @ sec, la.identity(q), p)
    assert la.is_zero(proj @ sub.basis, p)
    assert la.rank(proj, p) == q


# [DERIVED] canonical form depends only on the span
@settings(max_examples=60, deadline=None)
@given(matrices())
def test_span_is_canonical_under_column_operations(data):
    p, rows = data
    M = mat(rows, p)
    ncol = M.shape[1]
    rng = np.random.default_rng(ncol)
    G = la.from_dense(rng.integers(0, p, size=(ncol, ncol)), p)
    U = la.image_basis(M, p)
    V = la.image_basis(M @ G, p)
    if la.rank(G, p) == ncol:
        assert U.same_as(V)
    assert U.check_canonical()


# [DERIVED] oracle: schoolbook rank per block
def test_block_diagonal_rank_adds():
    p = 5
    rng = np.random.default_rng(0)
    blocks = [la.from_dense(rng.integers(0, p, size=(4, 3)), p) for _ in range(30)]
    total = sum(naive_rank(b.toarray().tolist(), p) for b in blocks)
    assert la.rank(la.block_diag(blocks, p), p) == total


# [TRIVIAL]
def test_solve_and_intersection():
    p = 7
    M = mat([[1, 2, 0], [0, 1, 1]], p)
    Y = mat([[3], [4]], p)
    X = la.solve(M, Y, p)
    assert la.equal(M @ X, Y, p)
    U = Subspace.span(mat([[1, 0], [0, 1], [0, 0]], p), p)
    V = Subspace.span(mat([[0, 0], [1, 0], [0, 1]], p), p)
    inter = la.intersect(U, V)
    assert inter.dim == 1
    assert inter.basis.toarray().ravel().tolist() == [0, 1, 0]


# [DERIVED] the sparse elimination agrees with the schoolbook rank
@settings(max_examples=40, deadline=None)
@given(st.data())
def test_markowitz_matches_schoolbook(data):
    p = data.draw(st.sampled_from([2, 3, 5]))
    m, n = data.draw(st.integers(1, 8)), data.draw(st.integers(1, 8))
    rows = [[data.draw(st.integers(0, p - 1)) for _ in range(n)] for _ in range(m)]
    assert la._rank_markowitz(mat(rows, p), p) == naive_rank(rows, p)


# [DERIVED] a long cycle has no singleton to peel; shift - 1 has a one-dimensional kernel
def test_rank_long_cycle(monkeypatch):
    n = 3000
    idx = np.arange(n)
    shift = sp.csr_matrix((np.ones(n, dtype=np.int64), (idx, (idx + 1) % n)), shape=(n, n))
    D = la.add(shift, la.identity(n), 3, coeff=-1)
    monkeypatch.setattr(la, "_DENSE_CELLS", 1000)
    assert la.rank(D, 3) == n - 1
