"""Exact linear algebra over F_p.

Every homology computation in the package reduces to ranks, kernels and
images of sparse matrices mod p.  This demo shows the primitives on a
small example and on a large sparse one.
"""

import time

import numpy as np
import scipy.sparse as sp

from nccartier import linalg as la

p = 3
M = la.from_dense(np.array([[1, 2, 0], [2, 1, 0], [0, 0, 1]]), p)
print("M mod 3 =\n", M.toarray())
print("rank over F_3:", la.rank(M, p), "(the first two rows are proportional mod 3)")
K = la.kernel_basis(M, p)
print("kernel basis:", K.basis.toarray().T.tolist())
print("M @ kernel is zero:", la.is_zero(la.matmul(M, K.basis, p), p))

# a boundary-like sparse matrix with 20 000 columns: cyclic shifts minus identity
n = 20_000
S = sp.eye(n, format="csr", dtype=np.int64)
shift = sp.csr_matrix((np.ones(n, dtype=np.int64), (np.arange(n), (np.arange(n) + 1) % n)), shape=(n, n))
D = la.add(shift, S, p, coeff=-1)
t = time.time()
r = la.rank(D, p)
print(f"rank of (shift - 1) on F_3^{n}: {r} (one-dimensional kernel) in {time.time() - t:.2f} s")
