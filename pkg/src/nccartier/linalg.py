"""
Exact linear algebra over a prime field F_p.

Matrices are ``scipy.sparse.csr_matrix`` objects with ``int64`` entries
reduced into ``[0, p)``.  Elimination works block by block: the bipartite
row/column graph of a matrix is split into connected components, nearby
components are packed together, and each pack is reduced densely by a
numba kernel.  Tensor-power matrices are extremely block diagonal (weight
gradings, orbit structure) so this keeps the dense work small.

Every subspace is kept in its canonical form: reduced column echelon form
with lowest-index pivots.  Since that form is unique, every construction
downstream (quotients, sections, restricted maps) is a deterministic
function of the subspace itself.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.csgraph import connected_components

# dense work per packed block, in matrix entries
_PACK_BUDGET = 4_000_000
# packs with more cells than this are eliminated sparsely (rank only)
_DENSE_CELLS = 50_000_000


class NotInvariantError(ValueError):
    """Raised when a map does not carry one subspace into another."""


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    f = 2
    while f * f <= p:
        if p % f == 0:
            return False
        f += 1
    return True


# ---------------------------------------------------------------------------
# sparse helpers


def reduce(M, p: int) -> sp.csr_matrix:
    """Return ``M`` as a canonical csr matrix with entries in ``[0, p)``."""
    M = sp.csr_matrix(M, dtype=np.int64, copy=True)
    M.sum_duplicates()
    M.data %= p
    M.eliminate_zeros()
    M.sort_indices()
    return M


def zeros(rows: int, cols: int) -> sp.csr_matrix:
    return sp.csr_matrix((rows, cols), dtype=np.int64)


def identity(n: int) -> sp.csr_matrix:
    return sp.identity(n, dtype=np.int64, format="csr")


def matmul(A, B, p: int) -> sp.csr_matrix:
    return reduce(A @ B, p)


def add(A, B, p: int, coeff: int = 1) -> sp.csr_matrix:
    return reduce(A + coeff * B, p)


def from_entries(rows: int, cols: int, entries, p: int) -> sp.csr_matrix:
    """Build a matrix from ``(row, col, value)`` triples (duplicates add)."""
    entries = list(entries)
    if not entries:
        return zeros(rows, cols)
    r, c, v = zip(*entries)
    M = sp.coo_matrix((np.asarray(v, dtype=np.int64) % p, (r, c)), shape=(rows, cols))
    return reduce(M, p)


def from_dense(D, p: int) -> sp.csr_matrix:
    return reduce(sp.csr_matrix(np.asarray(D, dtype=np.int64) % p), p)


def entries(M) -> list[tuple[int, int, int]]:
    """Sorted ``(row, col, value)`` triples of the nonzero entries."""
    C = sp.coo_matrix(M)
    order = np.lexsort((C.col, C.row))
    return [(int(C.row[k]), int(C.col[k]), int(C.data[k])) for k in order if C.data[k]]


def is_zero(M, p: int) -> bool:
    return reduce(M, p).nnz == 0


def equal(A, B, p: int) -> bool:
    if A.shape != B.shape:
        return False
    return reduce(A - B, p).nnz == 0


def block_diag(blocks, p: int) -> sp.csr_matrix:
    blocks = list(blocks)
    if not blocks:
        return zeros(0, 0)
    return reduce(sp.block_diag(blocks, format="csr", dtype=np.int64), p)


def hstack(blocks, rows: int, p: int) -> sp.csr_matrix:
    blocks = [b for b in blocks if b.shape[1]]
    if not blocks:
        return zeros(rows, 0)
    return reduce(sp.hstack(blocks, format="csr", dtype=np.int64), p)


def vstack(blocks, cols: int, p: int) -> sp.csr_matrix:
    blocks = [b for b in blocks if b.shape[0]]
    if not blocks:
        return zeros(0, cols)
    return reduce(sp.vstack(blocks, format="csr", dtype=np.int64), p)


def power(M, k: int, p: int) -> sp.csr_matrix:
    R = identity(M.shape[0])
    for _ in range(k):
        R = matmul(M, R, p)
    return R


# ---------------------------------------------------------------------------
# dense kernels


@njit(cache=True)
def _inv(a, p):
    # Fermat; p is prime
    r = 1
    b = a % p
    e = p - 2
    while e > 0:
        if e & 1:
            r = (r * b) % p
        b = (b * b) % p
        e >>= 1
    return r


@njit(cache=True)
def _rref_dense(A, p):
    """In-place reduced row echelon form; returns the pivot columns."""
    m, n = A.shape
    piv = np.empty(min(m, n), dtype=np.int64)
    nz = np.empty(n, dtype=np.int64)
    r = 0
    for c in range(n):
        if r == m:
            break
        k = -1
        for i in range(r, m):
            if A[i, c] != 0:
                k = i
                break
        if k < 0:
            continue
        if k != r:
            for j in range(c, n):
                t = A[k, j]
                A[k, j] = A[r, j]
                A[r, j] = t
        inv = _inv(A[r, c], p)
        cnt = 0
        for j in range(c, n):
            if A[r, j] != 0:
                A[r, j] = (A[r, j] * inv) % p
                nz[cnt] = j
                cnt += 1
        for i in range(m):
            if i != r:
                f = A[i, c]
                if f != 0:
                    for q in range(cnt):
                        j = nz[q]
                        A[i, j] = (A[i, j] - f * A[r, j]) % p
        piv[r] = c
        r += 1
    return piv[:r]


@njit(cache=True)
def _rank_dense(A, p):
    """In-place forward elimination; returns the rank."""
    m, n = A.shape
    nz = np.empty(n, dtype=np.int64)
    r = 0
    for c in range(n):
        if r == m:
            break
        k = -1
        for i in range(r, m):
            if A[i, c] != 0:
                k = i
                break
        if k < 0:
            continue
        if k != r:
            for j in range(c, n):
                t = A[k, j]
                A[k, j] = A[r, j]
                A[r, j] = t
        inv = _inv(A[r, c], p)
        cnt = 0
        for j in range(c, n):
            if A[r, j] != 0:
                A[r, j] = (A[r, j] * inv) % p
                nz[cnt] = j
                cnt += 1
        for i in range(r + 1, m):
            f = A[i, c]
            if f != 0:
                for q in range(cnt):
                    j = nz[q]
                    A[i, j] = (A[i, j] - f * A[r, j]) % p
        r += 1
    return r


@njit(cache=True)
def _peel_kernel(r_ptr, r_idx, c_ptr, c_idx, nrows, ncols):
    # repeatedly take a row with a single live entry; its column is a pivot
    # whose canonical row is the unit vector, so the column can be dropped
    alive = np.ones(ncols, dtype=np.bool_)
    count = np.empty(nrows, dtype=np.int64)
    stack = np.empty(nrows, dtype=np.int64)
    top = 0
    for i in range(nrows):
        count[i] = r_ptr[i + 1] - r_ptr[i]
        if count[i] == 1:
            stack[top] = i
            top += 1
    order = np.empty(ncols, dtype=np.int64)
    k = 0
    while top > 0:
        top -= 1
        i = stack[top]
        if count[i] != 1:
            continue
        c = -1
        for q in range(r_ptr[i], r_ptr[i + 1]):
            if alive[r_idx[q]]:
                c = r_idx[q]
                break
        if c < 0:
            continue
        alive[c] = False
        order[k] = c
        k += 1
        for q in range(c_ptr[c], c_ptr[c + 1]):
            j = c_idx[q]
            count[j] -= 1
            if count[j] == 1:
                stack[top] = j
                top += 1
    return order[:k]


def _peel(M):
    """Columns ``c`` with ``e_c`` forced into the row space of ``M`` by singleton rows.

    Returns the peeled columns and ``M`` with those columns removed (zeroed).
    """
    M = sp.csr_matrix(M)
    M.eliminate_zeros()
    if M.nnz == 0:
        return np.zeros(0, dtype=np.int64), M
    C = M.tocsc()
    peeled = _peel_kernel(
        M.indptr.astype(np.int64), M.indices.astype(np.int64),
        C.indptr.astype(np.int64), C.indices.astype(np.int64), M.shape[0], M.shape[1],
    )
    if len(peeled) == 0:
        return peeled, M
    keep = np.ones(M.shape[1], dtype=np.int64)
    keep[peeled] = 0
    R = M @ sp.diags(keep)
    R = sp.csr_matrix(R)
    R.eliminate_zeros()
    return np.sort(peeled), R


# ---------------------------------------------------------------------------
# block decomposition


def _packs(M):
    """Split the nonzero pattern of ``M`` into packed groups of components.

    Yields ``(rows, cols)`` index arrays (ascending); rows and columns that
    carry no entries are omitted.  Columns keep their relative order inside
    a pack, which is all a lowest-pivot echelon form needs.
    """
    m, n = M.shape
    C = sp.coo_matrix(M)
    if C.nnz == 0:
        return
    g = sp.coo_matrix(
        (np.ones(C.nnz, dtype=np.int8), (C.row, C.col + m)), shape=(m + n, m + n)
    )
    ncomp, label = connected_components(g, directed=False)
    used_rows = np.unique(C.row)
    used_cols = np.unique(C.col)
    rlab = label[used_rows]
    clab = label[used_cols + m]
    rorder = np.argsort(rlab, kind="stable")
    corder = np.argsort(clab, kind="stable")
    rl_sorted = rlab[rorder]
    cl_sorted = clab[corder]
    comps = np.unique(rl_sorted)
    rstart = np.searchsorted(rl_sorted, comps, "left")
    rend = np.searchsorted(rl_sorted, comps, "right")
    cstart = np.searchsorted(cl_sorted, comps, "left")
    cend = np.searchsorted(cl_sorted, comps, "right")
    # process components in order of their first column
    first_col = used_cols[corder[cstart]]
    pending_r: list[np.ndarray] = []
    pending_c: list[np.ndarray] = []
    nr = nc = 0
    for k in np.argsort(first_col, kind="stable"):
        rr = used_rows[rorder[rstart[k]:rend[k]]]
        cc = used_cols[corder[cstart[k]:cend[k]]]
        if pending_r and (nr + len(rr)) * (nc + len(cc)) > _PACK_BUDGET:
            yield np.sort(np.concatenate(pending_r)), np.sort(np.concatenate(pending_c))
            pending_r, pending_c, nr, nc = [], [], 0, 0
        pending_r.append(rr)
        pending_c.append(cc)
        nr += len(rr)
        nc += len(cc)
    if pending_r:
        yield np.sort(np.concatenate(pending_r)), np.sort(np.concatenate(pending_c))


def _dense_block(M, rows, cols):
    return np.ascontiguousarray(M[rows][:, cols].toarray().astype(np.int64))


def _rank_markowitz(M, p: int) -> int:
    """Sparse elimination, pivoting on the sparsest column and row."""
    C = sp.csr_matrix(M)
    rows = []
    cols: dict[int, set[int]] = {}
    for i in range(C.shape[0]):
        s, e = C.indptr[i], C.indptr[i + 1]
        r = {int(j): int(v) % p for j, v in zip(C.indices[s:e], C.data[s:e]) if v % p}
        rows.append(r)
        for j in r:
            cols.setdefault(j, set()).add(i)
    heap = [(len(v), j) for j, v in cols.items()]
    heapq.heapify(heap)
    rank = 0
    while heap:
        cnt, j = heapq.heappop(heap)
        col = cols.get(j)
        if not col:
            continue
        if len(col) != cnt:
            heapq.heappush(heap, (len(col), j))
            continue
        i = min(col, key=lambda k: (len(rows[k]), k))
        prow = rows[i]
        for jj in prow:
            cols[jj].discard(i)
        inv = pow(prow[j], p - 2, p)
        for k in list(col):
            r = rows[k]
            f = r[j] * inv % p
            for jj, v in prow.items():
                nv = (r.get(jj, 0) - f * v) % p
                if nv:
                    if jj not in r:
                        cols[jj].add(k)
                    r[jj] = nv
                elif jj in r:
                    del r[jj]
                    cols[jj].discard(k)
        rows[i] = {}
        del cols[j]
        rank += 1
        for jj in prow:
            if jj != j and cols[jj]:
                heapq.heappush(heap, (len(cols[jj]), jj))
    return rank


def rank(M, p: int) -> int:
    """Dimension of the column span of ``M`` over F_p."""
    M = reduce(M, p)
    total = 0
    while True:
        a, M = _peel(M)
        b, Mt = _peel(M.T)
        M = sp.csr_matrix(Mt.T)
        total += len(a) + len(b)
        if len(a) + len(b) == 0:
            break
    for rows, cols in _packs(M):
        if len(rows) * len(cols) > _DENSE_CELLS:
            total += _rank_markowitz(M[rows][:, cols], p)
            continue
        D = _dense_block(M, rows, cols)
        if D.shape[0] > D.shape[1]:
            D = np.ascontiguousarray(D.T)
        total += int(_rank_dense(D, p))
    return total


def rref(M, p: int):
    """Reduced row echelon form of the row space of ``M``.

    Returns:
        (R, pivots): ``R`` is an ``r x cols`` csr matrix whose rows form the
        canonical basis of the row space, ``pivots`` the ascending pivot
        columns (``R[i, pivots[i]] == 1``).
    """
    M = reduce(M, p)
    n = M.shape[1]
    rows_out, cols_out, vals_out, pivs = [], [], [], []
    peeled, M = _peel(M)
    if len(peeled):
        rows_out.append(np.arange(len(peeled)))
        cols_out.append(peeled)
        vals_out.append(np.ones(len(peeled), dtype=np.int64))
        pivs.append(peeled)
    for rows, cols in _packs(M):
        D = _dense_block(M, rows, cols)
        piv = _rref_dense(D, p)
        r = len(piv)
        if r == 0:
            continue
        sub = D[:r]
        ri, ci = np.nonzero(sub)
        rows_out.append(ri + sum(len(x) for x in pivs))
        cols_out.append(cols[ci])
        vals_out.append(sub[ri, ci])
        pivs.append(cols[piv])
    if not pivs:
        return zeros(0, n), np.zeros(0, dtype=np.int64)
    piv_all = np.concatenate(pivs)
    R = sp.csr_matrix(
        (np.concatenate(vals_out), (np.concatenate(rows_out), np.concatenate(cols_out))),
        shape=(len(piv_all), n),
        dtype=np.int64,
    )
    order = np.argsort(piv_all, kind="stable")
    return reduce(R[order], p), piv_all[order]


# ---------------------------------------------------------------------------
# subspaces


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace of F_p^n in canonical reduced column echelon form.

    ``basis`` is ``n x k``; column ``i`` has a 1 in row ``pivots[i]``, zeros
    in the other pivot rows, and no entries above its pivot.
    """

    ambient_dim: int
    basis: sp.csr_matrix
    pivots: np.ndarray
    p: int

    @property
    def dim(self) -> int:
        return len(self.pivots)

    @classmethod
    def span(cls, vectors, p: int) -> "Subspace":
        """Canonical subspace spanned by the columns of ``vectors``."""
        V = reduce(vectors, p)
        R, piv = rref(V.T, p)
        return cls(V.shape[0], reduce(R.T, p), piv, p)

    @classmethod
    def zero(cls, n: int, p: int) -> "Subspace":
        return cls(n, zeros(n, 0), np.zeros(0, dtype=np.int64), p)

    @classmethod
    def full(cls, n: int, p: int) -> "Subspace":
        return cls(n, identity(n), np.arange(n, dtype=np.int64), p)

    @classmethod
    def trusted(cls, basis, pivots, p: int) -> "Subspace":
        """Wrap a basis already known to be in canonical form.

        Used by constructions with explicit structure (orbit sums, fibre
        differences); ``check_canonical`` verifies the claim.
        """
        basis = reduce(basis, p)
        return cls(basis.shape[0], basis, np.asarray(pivots, dtype=np.int64), p)

    def check_canonical(self) -> bool:
        k = self.dim
        if k and np.any(np.diff(self.pivots) <= 0):
            return False
        Bp = self.basis[self.pivots]
        if not equal(Bp, identity(k), self.p):
            return False
        C = sp.csc_matrix(self.basis)
        for i in range(k):
            col = C.indices[C.indptr[i]:C.indptr[i + 1]]
            if len(col) and col.min() != self.pivots[i]:
                return False
        return True

    def coords(self, V) -> sp.csr_matrix:
        """Coordinates of the columns of ``V`` (which must lie in the span)."""
        V = reduce(V, self.p)
        X = V[self.pivots]
        if not equal(self.basis @ X, V, self.p):
            raise NotInvariantError("vectors not in subspace")
        return reduce(X, self.p)

    def contains(self, V) -> bool:
        V = reduce(V, self.p)
        return equal(self.basis @ V[self.pivots], V, self.p)

    def normal_form(self, V) -> sp.csr_matrix:
        """Reduce the columns of ``V`` modulo the subspace.

        The result vanishes on the pivot rows and is the unique such
        representative of each coset.
        """
        V = reduce(V, self.p)
        return reduce(V - self.basis @ V[self.pivots], self.p)

    def __contains__(self, other: "Subspace") -> bool:
        return self.contains(other.basis)

    def same_as(self, other: "Subspace") -> bool:
        return (
            self.ambient_dim == other.ambient_dim
            and np.array_equal(self.pivots, other.pivots)
            and equal(self.basis, other.basis, self.p)
        )


def kernel_basis(M, p: int) -> Subspace:
    """Canonical basis of ``{v : M v = 0}``."""
    M = reduce(M, p)
    n = M.shape[1]
    R, piv = rref(M, p)
    free = np.setdiff1d(np.arange(n), piv)
    if len(free) == 0:
        return Subspace.zero(n, p)
    # e_f - sum_i R[i, f] e_{piv[i]}
    Rf = sp.csr_matrix(R[:, free])
    Pm = sp.csr_matrix(
        (np.ones(len(piv), dtype=np.int64), (piv, np.arange(len(piv)))), shape=(n, len(piv))
    )
    E = sp.csr_matrix(
        (np.ones(len(free), dtype=np.int64), (free, np.arange(len(free)))), shape=(n, len(free))
    )
    K = reduce(E - Pm @ Rf, p)
    return Subspace.span(K, p)


def image_basis(M, p: int) -> Subspace:
    """Canonical basis of the column span of ``M``."""
    return Subspace.span(M, p)


def sum_subspaces(U: Subspace, V: Subspace) -> Subspace:
    return Subspace.span(sp.hstack([U.basis, V.basis]), U.p)


def intersect(U: Subspace, V: Subspace) -> Subspace:
    """Intersection via the kernel of ``[U | -V]``."""
    p = U.p
    if U.dim == 0 or V.dim == 0:
        return Subspace.zero(U.ambient_dim, p)
    K = kernel_basis(sp.hstack([U.basis, -V.basis]), p)
    return Subspace.span(U.basis @ K.basis[: U.dim], p)


def quotient_presentation(ambient_dim: int, sub: Subspace):
    """Projection onto and section of ``F_p^n / sub`` (pivot-complement rule).

    The quotient is coordinatised by the non-pivot rows of ``sub``.  The
    projection sends ``v`` to the non-pivot part of its normal form; the
    section embeds those coordinates back.
    """
    if sub.ambient_dim != ambient_dim:
        raise ValueError("ambient dimension mismatch")
    p = sub.p
    n = ambient_dim
    comp = np.setdiff1d(np.arange(n), sub.pivots)
    q = len(comp)
    S = sp.csr_matrix(
        (np.ones(q, dtype=np.int64), (comp, np.arange(q))), shape=(n, q), dtype=np.int64
    )
    Pc = S.T.tocsr()
    Pp = sp.csr_matrix(
        (np.ones(sub.dim, dtype=np.int64), (np.arange(sub.dim), sub.pivots)),
        shape=(sub.dim, n),
    )
    proj = reduce(Pc - Pc @ sub.basis @ Pp, p)
    return proj, reduce(S, p)


def restrict_map(M, source: Subspace, target: Subspace) -> sp.csr_matrix:
    """Matrix of ``M`` from ``source`` to ``target`` in their bases."""
    p = source.p
    Y = reduce(M @ source.basis, p)
    X = reduce(Y[target.pivots], p)
    if not equal(target.basis @ X, Y, p):
        raise NotInvariantError("not invariant")
    return X


def solve(M, Y, p: int) -> sp.csr_matrix:
    """A solution ``X`` of ``M X = Y`` (raises if none exists).

    The solution is canonical: coordinates on non-pivot columns of the
    reduced row echelon form of ``[M | Y]`` are zero.
    """
    M = reduce(M, p)
    Y = reduce(Y, p)
    m, n = M.shape
    k = Y.shape[1]
    R, piv = rref(sp.hstack([M, Y]), p)
    if np.any(piv >= n):
        raise ValueError("system has no solution")
    Rc = sp.csr_matrix(R[:, n:])
    X = sp.csr_matrix(
        (np.ones(len(piv), dtype=np.int64), (piv, np.arange(len(piv)))), shape=(n, len(piv))
    ) @ Rc
    return reduce(X, p)
