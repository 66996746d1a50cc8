"""
Truncated cyclic and p-cyclic modules.

A :class:`CyclicModule` stores, for levels ``0..N``, the dimension of each
level together with lazily built face, degeneracy and cyclic-operator
matrices.  A module with ``period = p`` is a functor on the p-cyclic
category: level ``n`` then models the fine circle with ``p(n+1)`` cells,
``cyc(n)`` is the fine rotation by one step, and ``sigma(n) = cyc(n)^(n+1)``
is the deck transformation.  Ordinary cyclic modules are ``period = 1``.

Conventions on ``A^{(x) m}`` (basis index in mixed radix, factor 0 most
significant):

* face ``j < m-1`` multiplies factors ``j`` and ``j+1``; the wrap face
  multiplies the last factor into factor 0 (clockwise);
* degeneracy ``j`` inserts the unit after factor ``j``;
* the cyclic operator moves the last factor to the front.

In the p-cyclic structure the coarse face ``d_i`` is the composite of the
fine faces at ``i + k(n+1)`` (``k`` decreasing) and the coarse degeneracy
inserts a unit after position ``i`` of every block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce as _fold
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import linalg as la
from .algebras import Algebra


class EquivarianceError(ValueError):
    """A structure map does not commute with the deck transformation."""


def _perm_matrix(target: np.ndarray) -> sp.csr_matrix:
    """Matrix sending ``e_x`` to ``e_{target[x]}``."""
    n = len(target)
    return sp.csr_matrix(
        (np.ones(n, dtype=np.int64), (target, np.arange(n))), shape=(n, n)
    )


def _kron_all(mats) -> sp.csr_matrix:
    return _fold(lambda a, b: sp.kron(a, b, format="csr"), mats).astype(np.int64)


class CyclicModule:
    """A cyclic (``period == 1``) or p-cyclic module truncated at level ``N``.

    Structure maps are produced on demand by the supplied callables and
    memoised.  All matrices are csr over F_p.
    """

    def __init__(
        self,
        p: int,
        N: int,
        dims,
        face: Callable[[int, int], sp.csr_matrix],
        degen: Callable[[int, int], sp.csr_matrix],
        cyc: Callable[[int], sp.csr_matrix],
        period: int = 1,
        sigma: Callable[[int], sp.csr_matrix] | None = None,
        name: str = "",
    ):
        self.p = p
        self.N = N
        self._dims = dims if isinstance(dims, _LazyDims) else list(dims)
        self._face_fn = face
        self._degen_fn = degen
        self._cyc_fn = cyc
        self._sigma_fn = sigma
        self.period = period
        self.name = name
        self._cache: dict = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = la.reduce(fn(), self.p)
        return self._cache[key]

    def dim(self, n: int) -> int:
        return self._dims[n]

    @property
    def dims(self) -> list[int]:
        return list(self._dims[: self.N + 1])

    def face(self, n: int, i: int) -> sp.csr_matrix:
        if not (1 <= n <= self.N and 0 <= i <= n):
            raise IndexError(f"no face d_{i} at level {n}")
        return self._memo(("d", n, i), lambda: self._face_fn(n, i))

    def degen(self, n: int, i: int) -> sp.csr_matrix:
        if not (0 <= n < self.N and 0 <= i <= n):
            raise IndexError(f"no degeneracy s_{i} at level {n}")
        return self._memo(("s", n, i), lambda: self._degen_fn(n, i))

    def cyc(self, n: int) -> sp.csr_matrix:
        return self._memo(("t", n), lambda: self._cyc_fn(n))

    def sigma(self, n: int) -> sp.csr_matrix:
        if self._sigma_fn is not None:
            return self._memo(("sigma", n), lambda: self._sigma_fn(n))
        return self._memo(("sigma", n), lambda: la.power(self.cyc(n), n + 1, self.p))

    def truncate(self, N: int) -> "CyclicModule":
        return CyclicModule(
            self.p, min(N, self.N), self._dims, self.face, self.degen, self.cyc,
            self.period, self.sigma, self.name,
        )

    @classmethod
    def from_matrices(cls, p, dims, faces, degens, cycs, period=1, name=""):
        """Module from explicit dicts ``faces[(n, i)]``, ``degens[(n, i)]``, ``cycs[n]``."""
        return cls(
            p, len(dims) - 1, dims,
            lambda n, i: faces[n, i],
            lambda n, i: degens[n, i],
            lambda n: cycs[n],
            period, None, name,
        )

    def __repr__(self):
        kind = "CyclicModule" if self.period == 1 else f"PCyclicModule[p={self.period}]"
        return f"<{kind} {self.name} dims={self.dims}>"


class CyclicMap:
    """Levelwise matrices ``source(n) -> target(n)``, built lazily."""

    def __init__(self, source: CyclicModule, target: CyclicModule, fn, name=""):
        self.source = source
        self.target = target
        self._fn = fn
        self._cache: dict[int, sp.csr_matrix] = {}
        self.name = name

    def at(self, n: int) -> sp.csr_matrix:
        if n not in self._cache:
            M = la.reduce(self._fn(n), self.source.p)
            expect = (self.target.dim(n), self.source.dim(n))
            if M.shape != expect:
                raise ValueError(f"{self.name}: level {n} shape {M.shape} != {expect}")
            self._cache[n] = M
        return self._cache[n]

    def compose(self, other: "CyclicMap") -> "CyclicMap":
        """``self after other``."""
        p = self.source.p
        return CyclicMap(
            other.source, self.target,
            lambda n: la.matmul(self.at(n), other.at(n), p),
            f"{self.name}*{other.name}",
        )

    def failures(self, N: int | None = None) -> list[str]:
        """Generator-commutation failures up to level ``N``."""
        E, F, p = self.source, self.target, self.source.p
        N = min(E.N, F.N) if N is None else N
        out = []
        for n in range(N + 1):
            f = self.at(n)
            if not la.equal(f @ E.cyc(n), F.cyc(n) @ f, p):
                out.append(f"t at level {n}")
            if n >= 1:
                g = self.at(n - 1)
                for i in range(n + 1):
                    if not la.equal(g @ E.face(n, i), F.face(n, i) @ f, p):
                        out.append(f"d_{i} at level {n}")
            if n < N:
                h = self.at(n + 1)
                for i in range(n + 1):
                    if not la.equal(h @ E.degen(n, i), F.degen(n, i) @ f, p):
                        out.append(f"s_{i} at level {n}")
        return out

    def is_natural(self, N: int | None = None) -> bool:
        return not self.failures(N)


# ---------------------------------------------------------------------------
# relations


def relation_failures(E: CyclicModule, N: int | None = None) -> list[str]:
    """All violated simplicial, cyclic and deck relations up to level ``N``."""
    p = E.p
    N = E.N if N is None else min(N, E.N)
    bad: list[str] = []
    eq = lambda a, b: la.equal(la.reduce(a, p), la.reduce(b, p), p)  # noqa: E731
    for n in range(N + 1):
        t = E.cyc(n)
        I = la.identity(E.dim(n))
        sig = E.sigma(n)
        if not eq(la.power(t, n + 1, p), sig):
            bad.append(f"t^{n + 1} != sigma at level {n}")
        if not eq(la.power(sig, E.period, p), I):
            bad.append(f"sigma^{E.period} != id at level {n}")
        if n >= 1:
            tl = E.cyc(n - 1)
            for i in range(1, n + 1):
                if not eq(E.face(n, i) @ t, tl @ E.face(n, i - 1)):
                    bad.append(f"d_{i} t != t d_{i - 1} at level {n}")
            if not eq(E.face(n, 0) @ t, E.face(n, n)):
                bad.append(f"d_0 t != d_n at level {n}")
            for i in range(n + 1):
                if not eq(E.face(n, i) @ sig, E.sigma(n - 1) @ E.face(n, i)):
                    bad.append(f"d_{i} sigma at level {n}")
        if n >= 2:
            for j in range(n + 1):
                for i in range(j):
                    if not eq(E.face(n - 1, i) @ E.face(n, j), E.face(n - 1, j - 1) @ E.face(n, i)):
                        bad.append(f"d_{i} d_{j} at level {n}")
        if n < N:
            tu = E.cyc(n + 1)
            for i in range(1, n + 1):
                if not eq(E.degen(n, i) @ t, tu @ E.degen(n, i - 1)):
                    bad.append(f"s_{i} t != t s_{i - 1} at level {n}")
            if not eq(E.degen(n, 0) @ t, tu @ tu @ E.degen(n, n)):
                bad.append(f"s_0 t != t^2 s_n at level {n}")
            for j in range(n + 1):
                s = E.degen(n, j)
                for i in range(n + 2):
                    lhs = E.face(n + 1, i) @ s
                    if i < j:
                        rhs = E.degen(n - 1, j - 1) @ E.face(n, i)
                    elif i in (j, j + 1):
                        rhs = I
                    else:
                        rhs = E.degen(n - 1, j) @ E.face(n, i - 1)
                    if not eq(lhs, rhs):
                        bad.append(f"d_{i} s_{j} at level {n}")
        if n + 1 < N:
            for j in range(n + 1):
                for i in range(j + 1):
                    if not eq(E.degen(n + 1, i) @ E.degen(n, j), E.degen(n + 1, j + 1) @ E.degen(n, i)):
                        bad.append(f"s_{i} s_{j} at level {n}")
    return bad


def verify_cyclic_relations(E: CyclicModule, N: int | None = None) -> bool:
    return not relation_failures(E, N)


# ---------------------------------------------------------------------------
# tensor powers


def _mult_matrix(A: Algebra) -> sp.csr_matrix:
    """``a x a^2`` matrix of the multiplication ``A (x) A -> A``."""
    a = A.dim
    return la.from_dense(A.st.reshape(a * a, a).T, A.p)


def _rotation_target(a: int, m: int, shift_factors: int = 1) -> np.ndarray:
    """Index permutation moving the last ``shift_factors`` factors to the front."""
    idx = np.arange(a**m, dtype=np.int64)
    k = a**shift_factors
    return (idx % k) * a ** (m - shift_factors) + idx // k


class _TensorOps:
    def __init__(self, A: Algebra):
        self.A = A
        self.a = A.dim
        self.mu = _mult_matrix(A)
        self.u = la.from_dense(A.unit.reshape(-1, 1), A.p)

    def block_face(self, n, i):
        a = self.a
        return _kron_all([la.identity(a**i), self.mu, la.identity(a ** (n - 1 - i))])

    def block_degen(self, n, i):
        a = self.a
        return _kron_all([la.identity(a ** (i + 1)), self.u, la.identity(a ** (n - i))])


def tensor_module(A: Algebra, period: int, N: int, name: str = "") -> CyclicModule:
    """``A^{(x) period(n+1)}`` with the (p-)cyclic structure described above."""
    ops = _TensorOps(A)
    a, q = A.dim, period

    def rot(n):
        return _perm_matrix(_rotation_target(a, q * (n + 1)))

    def face(n, i):
        if i < n:
            return _kron_all([ops.block_face(n, i)] * q)
        return _kron_all([ops.block_face(n, 0)] * q) @ rot(n)

    def degen(n, i):
        return _kron_all([ops.block_degen(n, i)] * q)

    def sigma(n):
        return _perm_matrix(_rotation_target(a, q * (n + 1), n + 1))

    dims = [a ** (q * (n + 1)) for n in range(N + 1)]
    return CyclicModule(A.p, N, dims, face, degen, rot, q, sigma, name)


def build_asharp(A: Algebra, N: int) -> CyclicModule:
    return tensor_module(A, 1, N, f"{A.name}#")


def build_ip_pullback(A: Algebra, p: int, N: int) -> CyclicModule:
    if p % 2 == 0 or not la.is_prime(p):
        raise ValueError("p must be an odd prime")
    return tensor_module(A, p, N, f"i_{p}^*{A.name}#")


def pullback_pi(E: CyclicModule, p: int) -> CyclicModule:
    """``pi^{p*} E``: same levels and maps, deck transformation trivial."""
    return CyclicModule(
        E.p, E.N, E.dims, E.face, E.degen, E.cyc, p,
        lambda n: la.identity(E.dim(n)), f"pi^*{E.name}",
    )


def constant_module(p: int, N: int, period: int = 1) -> CyclicModule:
    one = lambda *args: la.identity(1)  # noqa: E731
    return CyclicModule(p, N, [1] * (N + 1), one, one, one, period, None, "k")


# ---------------------------------------------------------------------------
# cells of the fine circle


def _fine_cell_face(m: int, j: int, kind: int) -> sp.csr_matrix:
    """Cellular map from the ``m``-cell circle to the ``(m-1)``-cell circle
    collapsing edge ``j`` (merging its endpoints into vertex ``j``, or into
    vertex 0 for the wrap edge)."""
    if kind == 0:
        tgt = np.array([v if v <= j else v - 1 for v in range(m)])
        if j == m - 1:
            tgt[m - 1] = 0
        return sp.csr_matrix((np.ones(m, dtype=np.int64), (tgt, np.arange(m))), shape=(m - 1, m))
    cols = [e for e in range(m) if e != j]
    tgt = [e if e < j else e - 1 for e in cols]
    return sp.csr_matrix(
        (np.ones(m - 1, dtype=np.int64), (tgt, cols)), shape=(m - 1, m)
    )


def _fine_cell_degen(m: int, j: int, kind: int) -> sp.csr_matrix:
    """Subdivide edge ``j`` of the ``m``-cell circle by a new vertex ``j+1``."""
    if kind == 0:
        tgt = np.array([v if v <= j else v + 1 for v in range(m)])
        return sp.csr_matrix((np.ones(m, dtype=np.int64), (tgt, np.arange(m))), shape=(m + 1, m))
    rows, cols = [], []
    for e in range(m):
        if e < j:
            rows.append(e)
            cols.append(e)
        elif e == j:
            rows += [j, j + 1]
            cols += [j, j]
        else:
            rows.append(e + 1)
            cols.append(e)
    return sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(m + 1, m))


def _fine_cell_rot(m: int) -> sp.csr_matrix:
    return _perm_matrix((np.arange(m) + 1) % m)


def cell_face(q: int, n: int, i: int, kind: int) -> sp.csr_matrix:
    m = q * (n + 1)
    M = la.identity(m)
    for k in range(q - 1, -1, -1):
        pos = i + k * (n + 1)
        M = _fine_cell_face(M.shape[0], pos, kind) @ M
    return M.tocsr()


def cell_degen(q: int, n: int, i: int, kind: int) -> sp.csr_matrix:
    m = q * (n + 1)
    M = la.identity(m)
    for k in range(q - 1, -1, -1):
        pos = i + k * (n + 1)
        M = _fine_cell_degen(M.shape[0], pos, kind) @ M
    return M.tocsr()


def cell_module(p: int, N: int, kind: int, period: int = 1) -> CyclicModule:
    """``K_0`` (``kind=0``, vertices) or ``K_1`` (edges) with trivial coefficients."""
    q = period
    return CyclicModule(
        p, N, [q * (n + 1) for n in range(N + 1)],
        lambda n, i: cell_face(q, n, i, kind),
        lambda n, i: cell_degen(q, n, i, kind),
        lambda n: _fine_cell_rot(q * (n + 1)),
        q, None, f"K_{kind}",
    )


def cell_boundary(m: int) -> sp.csr_matrix:
    """``d e_j = v_{j+1} - v_j`` on the ``m``-cell circle."""
    j = np.arange(m)
    rows = np.concatenate([(j + 1) % m, j])
    vals = np.concatenate([np.ones(m), -np.ones(m)]).astype(np.int64)
    return sp.csr_matrix((vals, (rows, np.concatenate([j, j]))), shape=(m, m))


def tensor_modules(E: CyclicModule, F: CyclicModule, name: str = "") -> CyclicModule:
    """Levelwise tensor product, basis ``x * dim F + y``."""
    if E.period != F.period:
        raise ValueError("period mismatch")
    kr = lambda a, b: sp.kron(a, b, format="csr")  # noqa: E731
    return CyclicModule(
        E.p, min(E.N, F.N), [E.dim(n) * F.dim(n) for n in range(min(E.N, F.N) + 1)],
        lambda n, i: kr(E.face(n, i), F.face(n, i)),
        lambda n, i: kr(E.degen(n, i), F.degen(n, i)),
        lambda n: kr(E.cyc(n), F.cyc(n)),
        E.period,
        lambda n: kr(E.sigma(n), F.sigma(n)),
        name or f"{E.name}(x){F.name}",
    )


@dataclass
class KTwists:
    K0: CyclicModule
    K1: CyclicModule
    boundary: CyclicMap  # K1 -> K0
    kappa0: CyclicMap  # K0 -> E
    kappa1: CyclicMap  # E -> K1

    @property
    def B(self) -> CyclicMap:
        """``kappa1 after kappa0``: ``K0 -> K1``."""
        return self.kappa1.compose(self.kappa0)


def build_K_twists(E: CyclicModule) -> KTwists:
    """``E (x) K_0`` and ``E (x) K_1`` with the maps of the four-term sequence."""
    q, p = E.period, E.p
    K0 = tensor_modules(E, cell_module(p, E.N, 0, q), f"K0({E.name})")
    K1 = tensor_modules(E, cell_module(p, E.N, 1, q), f"K1({E.name})")
    ncell = lambda n: q * (n + 1)  # noqa: E731
    bd = CyclicMap(
        K1, K0,
        lambda n: sp.kron(la.identity(E.dim(n)), cell_boundary(ncell(n)), format="csr"),
        "boundary",
    )
    k0 = CyclicMap(
        K0, E,
        lambda n: sp.kron(la.identity(E.dim(n)), np.ones((1, ncell(n)), dtype=np.int64), format="csr"),
        "kappa0",
    )
    k1 = CyclicMap(
        E, K1,
        lambda n: sp.kron(la.identity(E.dim(n)), np.ones((ncell(n), 1), dtype=np.int64), format="csr"),
        "kappa1",
    )
    return KTwists(K0, K1, bd, k0, k1)


def four_term_exact(tw: KTwists, n: int) -> bool:
    """Exactness of ``0 -> E -> K1 -> K0 -> E -> 0`` at level ``n``."""
    p = tw.K0.p
    k1, bd, k0 = tw.kappa1.at(n), tw.boundary.at(n), tw.kappa0.at(n)
    e, c1, c0 = k1.shape[1], k1.shape[0], k0.shape[1]
    if not (la.is_zero(bd @ k1, p) and la.is_zero(k0 @ bd, p)):
        return False
    r1, rb, r0 = la.rank(k1, p), la.rank(bd, p), la.rank(k0, p)
    return r1 == e and r1 + rb == c1 and rb + r0 == c0 and r0 == e


# ---------------------------------------------------------------------------
# invariants and coinvariants


def _permutation(M: sp.csr_matrix):
    """Target array of a permutation matrix, or ``None``."""
    n = M.shape[0]
    if M.shape != (n, n) or M.nnz != n or np.any(M.data != 1):
        return None
    C = M.tocsc()
    if np.any(np.diff(C.indptr) != 1):
        return None
    tgt = C.indices.astype(np.int64)
    if len(np.unique(tgt)) != n:
        return None
    return tgt


def orbit_labels(tgt: np.ndarray, order: int):
    """Per-point orbit minimum and maximum under the permutation ``tgt``."""
    lo = np.arange(len(tgt))
    hi = lo.copy()
    cur = lo.copy()
    for _ in range(order - 1):
        cur = tgt[cur]
        lo = np.minimum(lo, cur)
        hi = np.maximum(hi, cur)
    return lo, hi


@dataclass
class SigmaPresentation:
    """Invariants and coinvariants of one level.

    ``inc`` (dim x k_inv) has the canonical invariant basis as columns and
    ``readout`` (k_inv x dim) recovers coordinates of invariant vectors.
    ``proj`` (k_co x dim) and ``section`` (dim x k_co) present the
    coinvariants by the pivot-complement rule.
    """

    inc: sp.csr_matrix
    readout: sp.csr_matrix
    proj: sp.csr_matrix
    section: sp.csr_matrix
    perm: np.ndarray | None = None
    orbit_min: np.ndarray | None = None
    orbit_max: np.ndarray | None = None

    @property
    def n_inv(self) -> int:
        return self.inc.shape[1]

    @property
    def n_coinv(self) -> int:
        return self.proj.shape[0]


def _select_rows(rows, n) -> sp.csr_matrix:
    k = len(rows)
    return sp.csr_matrix(
        (np.ones(k, dtype=np.int64), (np.arange(k), rows)), shape=(k, n)
    )


def sigma_presentation(sig: sp.csr_matrix, order: int, p: int, generic: bool = False):
    n = sig.shape[0]
    tgt = None if generic else _permutation(sig)
    if tgt is not None:
        lo, hi = orbit_labels(tgt, order)
        reps = np.flatnonzero(lo == np.arange(n))
        rep_of = np.searchsorted(reps, lo)
        inc = sp.csr_matrix(
            (np.ones(n, dtype=np.int64), (np.arange(n), rep_of)), shape=(n, len(reps))
        )
        readout = _select_rows(reps, n)
        tops = np.flatnonzero(hi == np.arange(n))
        top_of = np.searchsorted(tops, hi)
        proj = sp.csr_matrix(
            (np.ones(n, dtype=np.int64), (top_of, np.arange(n))), shape=(len(tops), n)
        )
        section = _select_rows(tops, n).T.tocsr()
        return SigmaPresentation(inc, readout, proj, section, tgt, lo, hi)
    D = la.add(sig, la.identity(n), p, -1)
    inv = la.kernel_basis(D, p)
    proj, section = la.quotient_presentation(n, la.image_basis(D, p))
    return SigmaPresentation(inv.basis, _select_rows(inv.pivots, n), proj, section)


class SigmaQuotients:
    """Invariants and coinvariants of a p-cyclic module, as cyclic modules."""

    def __init__(self, E: CyclicModule, check: bool = True, generic: bool = False):
        if E.period == 1:
            raise ValueError("module has no deck transformation")
        self.E = E
        self.p = E.p
        self.check = check
        self.generic = generic
        self._pres: dict[int, SigmaPresentation] = {}
        self.invariants = self._module("inv")
        self.coinvariants = self._module("coinv")

    def pres(self, n: int) -> SigmaPresentation:
        if n not in self._pres:
            self._pres[n] = sigma_presentation(self.E.sigma(n), self.E.period, self.p, self.generic)
        return self._pres[n]

    def _equivariant(self, g, n_src, n_tgt, label):
        if self.check:
            E, p = self.E, self.p
            if not la.equal(g @ E.sigma(n_src), E.sigma(n_tgt) @ g, p):
                raise EquivarianceError(f"not sigma-equivariant: {label}")
        return g

    def push(self, g, n_src, n_tgt, kind: str) -> sp.csr_matrix:
        """Matrix induced by ``g: E_{n_src} -> E_{n_tgt}`` on (co)invariants."""
        a, b = self.pres(n_src), self.pres(n_tgt)
        if kind == "inv":
            return la.reduce(b.readout @ (g @ a.inc), self.p)
        return la.reduce(b.proj @ (g @ a.section), self.p)

    def _module(self, kind):
        E = self.E

        def face(n, i):
            g = self._equivariant(E.face(n, i), n, n - 1, f"d_{i} at level {n}")
            return self.push(g, n, n - 1, kind)

        def degen(n, i):
            g = self._equivariant(E.degen(n, i), n, n + 1, f"s_{i} at level {n}")
            return self.push(g, n, n + 1, kind)

        def cyc(n):
            g = self._equivariant(E.cyc(n), n, n, f"t at level {n}")
            return self.push(g, n, n, kind)

        return CyclicModule(
            E.p, E.N, _LazyDims(lambda n: self._dim(n, kind), E.N),
            face, degen, cyc, 1, None, f"{kind}({E.name})",
        )

    def _dim(self, n, kind):
        pr = self.pres(n)
        return pr.n_inv if kind == "inv" else pr.n_coinv

    def trace(self) -> CyclicMap:
        """``tr = 1 + sigma + ... + sigma^{p-1}``: coinvariants -> invariants."""
        E, p = self.E, self.p

        def fn(n):
            pr = self.pres(n)
            if pr.perm is not None:
                # orbit of size p maps to its orbit sum, fixed points to p = 0
                free = pr.orbit_min != pr.orbit_max
                sec = pr.section.tocoo()
                cols = sec.col
                pts = sec.row
                keep = free[pts]
                reps = pr.orbit_min[pts[keep]]
                inv_index = np.searchsorted(np.flatnonzero(pr.orbit_min == np.arange(len(pr.perm))), reps)
                return sp.csr_matrix(
                    (np.ones(keep.sum(), dtype=np.int64), (inv_index, cols[keep])),
                    shape=(pr.n_inv, pr.n_coinv),
                )
            S = E.sigma(n)
            Nm = la.identity(E.dim(n))
            acc = Nm
            for _ in range(E.period - 1):
                Nm = la.matmul(S, Nm, p)
                acc = acc + Nm
            return pr.readout @ (acc @ pr.section)

        return CyclicMap(self.coinvariants, self.invariants, fn, "tr")

    def e_map(self) -> CyclicMap:
        """Include invariants, then project to coinvariants."""
        return CyclicMap(
            self.invariants, self.coinvariants,
            lambda n: self.pres(n).proj @ self.pres(n).inc, "e",
        )

    def induced(self, f: CyclicMap, other: "SigmaQuotients", kind: str) -> CyclicMap:
        """``pi_!`` (``kind='coinv'``) or ``pi_*`` (``'inv'``) of ``f: self.E -> other.E``."""
        src = self.coinvariants if kind == "coinv" else self.invariants
        tgt = other.coinvariants if kind == "coinv" else other.invariants

        def fn(n):
            a, b = self.pres(n), other.pres(n)
            g = f.at(n)
            if kind == "inv":
                return b.readout @ (g @ a.inc)
            return b.proj @ (g @ a.section)

        return CyclicMap(src, tgt, fn, f"pi({f.name})")


class _LazyDims:
    """List-like dimension table filled on demand."""

    def __init__(self, fn, N):
        self._fn = fn
        self._N = N
        self._vals: dict[int, int] = {}

    def __getitem__(self, key):
        if isinstance(key, slice):
            return [self[i] for i in range(*key.indices(self._N + 1))]
        if key not in self._vals:
            self._vals[key] = int(self._fn(key))
        return self._vals[key]

    def __len__(self):
        return self._N + 1

    def __iter__(self):
        return (self[i] for i in range(self._N + 1))


def invariants(E: CyclicModule) -> CyclicModule:
    return SigmaQuotients(E).invariants


def coinvariants(E: CyclicModule) -> CyclicModule:
    return SigmaQuotients(E).coinvariants


def trace_map(E: CyclicModule) -> CyclicMap:
    return SigmaQuotients(E).trace()


def e_map(E: CyclicModule) -> CyclicMap:
    return SigmaQuotients(E).e_map()


# ---------------------------------------------------------------------------
# p-th powers


def _diagonal_index(a: int, n: int, p: int) -> np.ndarray:
    """Index of ``x^{(x) p}`` for each basis tensor ``x`` of ``A^{(x)(n+1)}``."""
    M = a ** (n + 1)
    mult = sum(M**k for k in range(p))
    return np.arange(M, dtype=np.int64) * mult


def psi_map(asharp: CyclicModule, q: SigmaQuotients) -> CyclicMap:
    """``x -> [x^{(x) p}]`` from ``A_#`` to the coinvariants of ``i_p^* A_#``."""
    p = q.E.period
    a = round(asharp.dim(0))

    def fn(n):
        diag = _diagonal_index(a, n, p)
        M = asharp.dim(n)
        D = sp.csr_matrix(
            (np.ones(M, dtype=np.int64), (diag, np.arange(M))), shape=(q.E.dim(n), M)
        )
        return q.pres(n).proj @ D

    return CyclicMap(asharp, q.coinvariants, fn, "psi")


def psi_hat_map(q: SigmaQuotients, asharp: CyclicModule) -> CyclicMap:
    """Diagonal readout from the invariants of ``i_p^* A_#`` to ``A_#``."""
    p = q.E.period
    a = round(asharp.dim(0))

    def fn(n):
        diag = _diagonal_index(a, n, p)
        M = asharp.dim(n)
        R = sp.csr_matrix(
            (np.ones(M, dtype=np.int64), (np.arange(M), diag)), shape=(M, q.E.dim(n))
        )
        return R @ q.pres(n).inc

    return CyclicMap(q.invariants, asharp, fn, "psi_hat")


def psi(A: Algebra, p: int, N: int) -> CyclicMap:
    return psi_map(build_asharp(A, N), SigmaQuotients(build_ip_pullback(A, p, N)))


def psi_hat(A: Algebra, p: int, N: int) -> CyclicMap:
    return psi_hat_map(SigmaQuotients(build_ip_pullback(A, p, N)), build_asharp(A, N))


# ---------------------------------------------------------------------------
# tightness


def tate_data(q: SigmaQuotients, n: int):
    """Ranks describing ``e`` between ``Coker tr`` and ``Ker tr`` at level ``n``."""
    p = q.p
    tr = q.trace().at(n)
    e = q.e_map().at(n)
    r_tr = la.rank(tr, p)
    ker_tr = q.pres(n).n_coinv - r_tr
    coker_tr = q.pres(n).n_inv - r_tr
    r_e = la.rank(e, p)
    return {"ker_tr": ker_tr, "coker_tr": coker_tr, "rank_e": r_e}


def tightness_check(E: CyclicModule, N: int | None = None, generic: bool = False) -> bool:
    """``e`` induces ``Coker tr ~ Ker tr`` at every level."""
    q = SigmaQuotients(E, generic=generic)
    N = E.N if N is None else N
    for n in range(N + 1):
        d = tate_data(q, n)
        if not (d["rank_e"] == d["coker_tr"] == d["ker_tr"]):
            return False
    return True


def single_level_module(p: int, sigma, period: int) -> CyclicModule:
    """Level-0 p-cyclic module with the given deck transformation."""
    S = la.reduce(sigma, p)
    return CyclicModule(
        p, 0, [S.shape[0]],
        lambda n, i: None, lambda n, i: None, lambda n: S, period, None, "level0",
    )


# ---------------------------------------------------------------------------
# sub- and quotient modules


class SubModule(CyclicModule):
    """Levelwise subspaces stable under all generators.

    ``subspace(n)`` returns a canonical :class:`~nccartier.linalg.Subspace`
    of ``E(n)``; generators act by :func:`~nccartier.linalg.restrict_map`,
    which raises if a subspace is not preserved.
    """

    def __init__(self, E: CyclicModule, subspace, name: str = ""):
        self.ambient = E
        self._subs: dict[int, la.Subspace] = {}
        self._subspace_fn = subspace
        S = self.subspace
        super().__init__(
            E.p, E.N, _LazyDims(lambda n: S(n).dim, E.N),
            lambda n, i: la.restrict_map(E.face(n, i), S(n), S(n - 1)),
            lambda n, i: la.restrict_map(E.degen(n, i), S(n), S(n + 1)),
            lambda n: la.restrict_map(E.cyc(n), S(n), S(n)),
            E.period,
            (lambda n: la.restrict_map(E.sigma(n), S(n), S(n))) if E.period > 1 else None,
            name or f"sub({E.name})",
        )

    def subspace(self, n: int) -> la.Subspace:
        if n not in self._subs:
            self._subs[n] = self._subspace_fn(n)
        return self._subs[n]

    def inclusion(self) -> CyclicMap:
        return CyclicMap(self, self.ambient, lambda n: self.subspace(n).basis, "incl")


class QuotientModule(CyclicModule):
    """``E / S`` levelwise, presented by the pivot-complement rule."""

    def __init__(self, E: CyclicModule, subspace, name: str = ""):
        self.ambient = E
        self._pres: dict[int, tuple] = {}
        self._subspace_fn = subspace
        P = lambda n: self.presentation(n)[0]  # noqa: E731
        S = lambda n: self.presentation(n)[1]  # noqa: E731
        super().__init__(
            E.p, E.N, _LazyDims(lambda n: P(n).shape[0], E.N),
            lambda n, i: P(n - 1) @ (E.face(n, i) @ S(n)),
            lambda n, i: P(n + 1) @ (E.degen(n, i) @ S(n)),
            lambda n: P(n) @ (E.cyc(n) @ S(n)),
            E.period,
            (lambda n: P(n) @ (E.sigma(n) @ S(n))) if E.period > 1 else None,
            name or f"quot({E.name})",
        )

    def presentation(self, n: int):
        if n not in self._pres:
            sub = self._subspace_fn(n)
            self._pres[n] = (*la.quotient_presentation(self.ambient.dim(n), sub), sub)
        return self._pres[n]

    def killed(self, n: int) -> la.Subspace:
        return self.presentation(n)[2]

    def projection(self) -> CyclicMap:
        return CyclicMap(self.ambient, self, lambda n: self.presentation(n)[0], "proj")

    def section_at(self, n: int) -> sp.csr_matrix:
        return self.presentation(n)[1]


def image_submodule(f: CyclicMap, name: str = "") -> SubModule:
    p = f.source.p
    return SubModule(f.target, lambda n: la.image_basis(f.at(n), p), name or f"im({f.name})")


def kernel_submodule(f: CyclicMap, name: str = "") -> SubModule:
    p = f.source.p
    return SubModule(f.source, lambda n: la.kernel_basis(f.at(n), p), name or f"ker({f.name})")


def map_between(f: CyclicMap, source: CyclicModule, target: CyclicModule, name: str = "") -> CyclicMap:
    """Transport ``f`` to sub/quotient modules of its source and target.

    ``source`` may be ``f.source`` itself, a :class:`SubModule` of it or a
    :class:`QuotientModule` of it (then ``f`` must kill the relevant
    subspace); likewise for ``target``.
    """

    def fn(n):
        M = f.at(n)
        if isinstance(source, SubModule) and source.ambient is f.source:
            M = M @ source.subspace(n).basis
        elif isinstance(source, QuotientModule) and source.ambient is f.source:
            M = M @ source.section_at(n)
        if isinstance(target, SubModule) and target.ambient is f.target:
            M = la.restrict_map(la.reduce(M, f.source.p), la.Subspace.full(M.shape[1], f.source.p), target.subspace(n))
        elif isinstance(target, QuotientModule) and target.ambient is f.target:
            M = target.presentation(n)[0] @ M
        return M

    return CyclicMap(source, target, fn, name or f.name)
