"""
Finite-dimensional unital associative algebras over F_p and finite monoids.

An :class:`Algebra` is stored through its structure constants: a dense
``(dim, dim, dim)`` integer array ``st`` with ``e_i * e_j = sum_k st[i, j, k] e_k``.
The algebras handled here are small (dimension at most a few dozen), so
a dense table is both the simplest and the fastest representation for
the tensor-power loops downstream.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la


class AxiomError(ValueError):
    """Raised when a table fails associativity or the unit law."""

    def __init__(self, message: str, triple: tuple | None = None):
        super().__init__(message)
        self.triple = triple


@dataclass(frozen=True, eq=False)
class Algebra:
    """Unital associative algebra with a distinguished basis.

    Attributes:
        p: characteristic of the base field.
        st: structure constants, ``st[i, j]`` is the coordinate vector of
            ``e_i e_j``.
        unit: coordinate vector of the unit.
        labels: display names of the basis vectors.
        name: free-form description.
    """

    p: int
    st: np.ndarray
    unit: np.ndarray
    labels: tuple[str, ...]
    name: str = ""
    # basis index whose vector is the unit, when the unit is a basis vector
    unit_index: int | None = field(default=None)

    def __post_init__(self):
        st = np.asarray(self.st, dtype=np.int64) % self.p
        unit = np.asarray(self.unit, dtype=np.int64) % self.p
        object.__setattr__(self, "st", st)
        object.__setattr__(self, "unit", unit)
        if self.unit_index is None:
            nz = np.nonzero(unit)[0]
            if len(nz) == 1 and unit[nz[0]] == 1:
                object.__setattr__(self, "unit_index", int(nz[0]))

    @property
    def dim(self) -> int:
        return self.st.shape[0]

    def mul(self, x, y) -> np.ndarray:
        """Product of two coordinate vectors."""
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        return np.einsum("i,j,ijk->k", x, y, self.st) % self.p

    def basis_vector(self, i: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.int64)
        v[i] = 1
        return v

    def power(self, x, n: int) -> np.ndarray:
        r = self.unit.copy()
        for _ in range(n):
            r = self.mul(r, x)
        return r

    def left_mult_matrix(self, x) -> np.ndarray:
        """Matrix of ``y -> x y`` (columns indexed by basis ``y``)."""
        return np.einsum("i,ijk->kj", np.asarray(x, dtype=np.int64), self.st) % self.p

    def is_commutative(self) -> bool:
        return bool(np.array_equal(self.st, self.st.transpose(1, 0, 2)))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.p}:{self.dim}:".encode())
        h.update(self.st.tobytes())
        h.update(self.unit.tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class FiniteMonoid:
    """Monoid on ``{0, ..., size-1}`` given by a multiplication table."""

    table: tuple[tuple[int, ...], ...]
    identity: int
    zero: int | None = None
    labels: tuple[str, ...] | None = None
    name: str = ""

    @property
    def size(self) -> int:
        return len(self.table)

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def label(self, a: int) -> str:
        return self.labels[a] if self.labels else str(a)

    def validate(self) -> None:
        n = self.size
        for row in self.table:
            if len(row) != n or any(not 0 <= x < n for x in row):
                raise AxiomError("malformed table")
        for a, b, c in itertools.product(range(n), repeat=3):
            if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)):
                raise AxiomError(f"not associative at ({a}, {b}, {c})", (a, b, c))
        for a in range(n):
            if self.mul(self.identity, a) != a or self.mul(a, self.identity) != a:
                raise AxiomError(f"identity fails at {a}", (self.identity, a))
        if self.zero is not None:
            for a in range(n):
                if self.mul(self.zero, a) != self.zero or self.mul(a, self.zero) != self.zero:
                    raise AxiomError(f"zero not absorbing at {a}", (self.zero, a))

    def is_commutative(self) -> bool:
        n = self.size
        return all(self.table[a][b] == self.table[b][a] for a in range(n) for b in range(n))


@dataclass(frozen=True, eq=False)
class AlgebraMap:
    source: Algebra
    target: Algebra
    matrix: np.ndarray  # target.dim x source.dim

    def __call__(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=np.int64) % self.source.p

    def is_homomorphism(self) -> bool:
        A, B, M = self.source, self.target, self.matrix
        if not np.array_equal(M @ A.unit % A.p, B.unit):
            return False
        for i in range(A.dim):
            for j in range(A.dim):
                lhs = M @ A.st[i, j] % A.p
                rhs = B.mul(M[:, i], M[:, j])
                if not np.array_equal(lhs, rhs):
                    return False
        return True


# ---------------------------------------------------------------------------
# validation


def axiom_violation(A: Algebra):
    """First failing associativity triple or unit index, else ``None``."""
    p, st = A.p, A.st
    # (e_i e_j) e_k and e_i (e_j e_k) for all triples at once
    left = np.einsum("ijm,mkl->ijkl", st, st) % p
    right = np.einsum("jkm,iml->ijkl", st, st) % p
    bad = np.argwhere(np.any(left != right, axis=3))
    if len(bad):
        return ("associativity", tuple(int(x) for x in bad[0]))
    lu = np.einsum("i,ijk->jk", A.unit, st) % p
    ru = np.einsum("j,ijk->ik", A.unit, st) % p
    eye = np.eye(A.dim, dtype=np.int64)
    for name, M in (("left unit", lu), ("right unit", ru)):
        bad = np.argwhere(np.any(M != eye, axis=1))
        if len(bad):
            return (name, (int(bad[0][0]),))
    return None


def verify_axioms(A: Algebra) -> bool:
    return axiom_violation(A) is None


def check(A: Algebra) -> Algebra:
    v = axiom_violation(A)
    if v is not None:
        kind, where = v
        names = ", ".join(A.labels[i] for i in where) if A.labels else ""
        raise AxiomError(f"{kind} fails at basis indices {where} ({names})", where)
    return A


# ---------------------------------------------------------------------------
# constructors


def _from_products(p, dim, products, unit_index, labels, name):
    st = np.zeros((dim, dim, dim), dtype=np.int64)
    for (i, j), vec in products.items():
        for k, c in vec.items():
            st[i, j, k] += c
    unit = np.zeros(dim, dtype=np.int64)
    unit[unit_index] = 1
    return Algebra(p, st, unit, tuple(labels), name, unit_index)


def monoid_algebra(G: FiniteMonoid, p: int) -> Algebra:
    """Linearised monoid algebra; the zero element (if any) becomes 0."""
    G.validate()
    elems = [g for g in range(G.size) if g != G.zero]
    pos = {g: i for i, g in enumerate(elems)}
    products = {}
    for a in elems:
        for b in elems:
            c = G.mul(a, b)
            products[pos[a], pos[b]] = {} if c == G.zero else {pos[c]: 1}
    labels = [G.label(g) for g in elems]
    return _from_products(p, len(elems), products, pos[G.identity], labels, G.name)


def cyclic_group(n: int) -> FiniteMonoid:
    table = tuple(tuple((a + b) % n for b in range(n)) for a in range(n))
    labels = tuple("e" if a == 0 else ("g" if a == 1 else f"g^{a}") for a in range(n))
    return FiniteMonoid(table, 0, None, labels, f"Z/{n}")


def product_monoid(G: FiniteMonoid, H: FiniteMonoid) -> FiniteMonoid:
    """Direct product, elements ordered ``g * |H| + h``."""
    m = H.size
    n = G.size * m
    table = tuple(
        tuple(G.mul(a // m, b // m) * m + H.mul(a % m, b % m) for b in range(n))
        for a in range(n)
    )
    labels = tuple(f"({G.label(a // m)},{H.label(a % m)})" for a in range(n))
    return FiniteMonoid(table, G.identity * m + H.identity, None, labels, f"{G.name}x{H.name}")


def truncated_monoid(m: int) -> FiniteMonoid:
    """Pointed monoid ``{1, x, ..., x^{m-1}, 0}`` with ``x^m = 0``."""
    z = m
    table = []
    for a in range(m + 1):
        row = []
        for b in range(m + 1):
            row.append(z if a == z or b == z or a + b >= m else a + b)
        table.append(tuple(row))
    labels = tuple(["1", "x"] + [f"x^{i}" for i in range(2, m)] + ["0"])[: m + 1]
    if m == 1:
        labels = ("1", "0")
    return FiniteMonoid(tuple(table), 0, z, labels, f"x^{m}=0")


def _renamed(A: Algebra, name: str) -> Algebra:
    return Algebra(A.p, A.st, A.unit, A.labels, name, A.unit_index)


def group_algebra(n: int, p: int) -> Algebra:
    return _renamed(monoid_algebra(cyclic_group(n), p), f"F_{p}[Z/{n}]")


def truncated_polynomial(m: int, p: int) -> Algebra:
    """``F_p[x]/x^m`` with basis ``1, x, ..., x^{m-1}``."""
    if m < 1:
        raise ValueError("m must be positive")
    return _renamed(monoid_algebra(truncated_monoid(m), p), f"F_{p}[x]/x^{m}")


def matrix_algebra(n: int, p: int) -> Algebra:
    """``M_n(F_p)`` with basis ``E_ij`` in row-major order."""
    if n < 1:
        raise ValueError("n must be positive")
    idx = lambda i, j: i * n + j  # noqa: E731
    products = {}
    for i, j, k, l in itertools.product(range(n), repeat=4):
        products[idx(i, j), idx(k, l)] = {idx(i, l): 1} if j == k else {}
    st = np.zeros((n * n,) * 3, dtype=np.int64)
    for (a, b), vec in products.items():
        for c, v in vec.items():
            st[a, b, c] = v
    unit = np.zeros(n * n, dtype=np.int64)
    for i in range(n):
        unit[idx(i, i)] = 1
    labels = tuple(f"E{i + 1}{j + 1}" for i in range(n) for j in range(n))
    return Algebra(p, st, unit, labels, f"M_{n}(F_{p})")


def prime_field(p: int) -> Algebra:
    return _renamed(truncated_polynomial(1, p), f"F_{p}")


def tensor_product(A: Algebra, B: Algebra) -> Algebra:
    """``A (x) B`` with basis ``a * dim(B) + b``."""
    if A.p != B.p:
        raise ValueError("modulus mismatch")
    st = np.einsum("ijk,abc->iajbkc", A.st, B.st).reshape(
        A.dim * B.dim, A.dim * B.dim, A.dim * B.dim
    )
    unit = np.kron(A.unit, B.unit)
    labels = tuple(f"{a}(x){b}" for a in A.labels for b in B.labels)
    return Algebra(A.p, st, unit, labels, f"{A.name}(x){B.name}")


def change_basis(A: Algebra, P) -> tuple[Algebra, AlgebraMap]:
    """Re-present ``A`` in the basis ``f_j = sum_i P[i, j] e_i``.

    Returns the new algebra and the isomorphism ``new -> A`` (matrix ``P``).
    """
    p = A.p
    P = np.asarray(P, dtype=np.int64) % p
    Pinv = _inverse(P, p)
    # f_a f_b = sum P[i,a] P[j,b] e_i e_j, then rewrite in f coordinates
    st = np.einsum("ia,jb,ijk,ck->abc", P, P, A.st, Pinv) % p
    unit = Pinv @ A.unit % p
    labels = tuple(f"f{j}" for j in range(A.dim))
    B = Algebra(p, st, unit, labels, f"{A.name}[rebased]")
    return B, AlgebraMap(B, A, P)


def permute_basis(A: Algebra, perm) -> tuple[Algebra, AlgebraMap]:
    """Reorder the basis: new vector ``j`` is old vector ``perm[j]``."""
    n = A.dim
    P = np.zeros((n, n), dtype=np.int64)
    for j, i in enumerate(perm):
        P[i, j] = 1
    B, phi = change_basis(A, P)
    B = Algebra(B.p, B.st, B.unit, tuple(A.labels[i] for i in perm), f"{A.name}[permuted]")
    return B, AlgebraMap(B, A, P)


def _inverse(P, p):
    n = P.shape[0]
    M = la.from_dense(P, p)
    if la.rank(M, p) != n:
        raise ValueError("basis change is singular")
    return la.solve(M, la.identity(n), p).toarray()


# ---------------------------------------------------------------------------
# invariants


def commutator_span(A: Algebra) -> la.Subspace:
    comm = (A.st - A.st.transpose(1, 0, 2)).reshape(A.dim * A.dim, A.dim).T
    return la.image_basis(la.from_dense(comm, A.p), A.p)


def hh0(A: Algebra) -> int:
    """``dim A / [A, A]``."""
    return A.dim - commutator_span(A).dim


def frobenius_matrix(A: Algebra) -> np.ndarray:
    """Matrix of ``x -> x^p``; additive only when ``A`` is commutative."""
    cols = [A.power(A.basis_vector(i), A.p) for i in range(A.dim)]
    return np.stack(cols, axis=1) % A.p

