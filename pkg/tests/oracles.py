"""Small independent oracles shared by the tests (plain python, no package code)."""

import itertools

import numpy as np


def naive_rank(rows, p):
    A = [[x % p for x in r] for r in rows]
    rank = 0
    ncols = len(A[0]) if A else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(A)) if A[i][c]), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        inv = pow(A[rank][c], p - 2, p)
        A[rank] = [(x * inv) % p for x in A[rank]]
        for i in range(len(A)):
            if i != rank and A[i][c]:
                f = A[i][c]
                A[i] = [(a - f * b) % p for a, b in zip(A[i], A[rank])]
        rank += 1
    return rank


def naive_tensor_face(A, n, i):
    """Face map of A^{(x)(n+1)} computed word by word from structure constants."""
    a = A.dim
    out = np.zeros((a**n, a ** (n + 1)), dtype=np.int64)
    for col, word in enumerate(itertools.product(range(a), repeat=n + 1)):
        if i < n:
            left, (x, y), right = word[:i], word[i:i + 2], word[i + 2:]
            for z in range(a):
                c = int(A.st[x, y, z])
                if c:
                    out[int(np.ravel_multi_index(left + (z,) + right, (a,) * n)), col] += c
        else:
            x, mid, y = word[-1], word[1:-1], word[0]
            for z in range(a):
                c = int(A.st[x, y, z])
                if c:
                    out[int(np.ravel_multi_index((z,) + mid, (a,) * n)), col] += c
    return out % A.p


def naive_hh_dims(A, d_max):
    """Hochschild homology dims from word-level faces and schoolbook ranks."""
    def b(n):
        M = sum((-1) ** i * naive_tensor_face(A, n, i) for i in range(n + 1))
        return (M % A.p).tolist()

    out = []
    for d in range(d_max + 1):
        rd = naive_rank(b(d), A.p) if d else 0
        out.append(A.dim ** (d + 1) - rd - naive_rank(b(d + 1), A.p))
    return out
