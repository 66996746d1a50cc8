"""
Homology of chain complexes built from cyclic modules.

The central objects are

* :class:`ChainComplex`: finite-dimensional graded spaces with a
  differential ``diff(d): C_d -> C_{d-1}``, built lazily;
* :class:`ComplexOfCyclic`: a bounded complex of cyclic modules;
* :func:`total_complex`: the ``(b, B, u)`` total complex of such a complex,
  computing Hochschild (``u``-columns off) or cyclic homology.

Hochschild complexes are unnormalised.  Connes' operator is
``B = (1 - lambda) t s_n N`` with ``lambda = (-1)^n t`` and
``N = sum lambda^i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import linalg as la
from .cyclic import CyclicMap, CyclicModule, QuotientModule, SubModule


class TruncationError(ValueError):
    """The requested degree needs levels beyond the truncation."""


# ---------------------------------------------------------------------------
# chain complexes


class ChainComplex:
    """Graded spaces ``C_d`` for ``lo <= d <= hi`` with ``diff(d): C_d -> C_{d-1}``."""

    def __init__(self, p: int, lo: int, hi: int, dim_fn, diff_fn, name: str = "", bounded: bool = False):
        # ``bounded``: the complex really stops at ``hi``; otherwise ``hi`` is
        # a truncation and homology in degree ``hi`` is not available
        self.bounded = bounded
        self.p = p
        self.lo = lo
        self.hi = hi
        self._dim_fn = dim_fn
        self._diff_fn = diff_fn
        self._dims: dict[int, int] = {}
        self._diffs: dict[int, sp.csr_matrix] = {}
        self.name = name

    def dim(self, d: int) -> int:
        if d < self.lo or d > self.hi:
            return 0
        if d not in self._dims:
            self._dims[d] = int(self._dim_fn(d))
        return self._dims[d]

    def diff(self, d: int) -> sp.csr_matrix:
        if d not in self._diffs:
            if d <= self.lo or d > self.hi:
                M = la.zeros(self.dim(d - 1), self.dim(d))
            else:
                M = la.reduce(self._diff_fn(d), self.p)
            if M.shape != (self.dim(d - 1), self.dim(d)):
                raise ValueError(f"{self.name}: bad differential shape in degree {d}")
            self._diffs[d] = M
        return self._diffs[d]

    def squares_to_zero(self, d: int) -> bool:
        return la.is_zero(self.diff(d - 1) @ self.diff(d), self.p)


class ChainMap:
    def __init__(self, source: ChainComplex, target: ChainComplex, fn, shift: int = 0, name=""):
        """Degree ``shift`` map: ``C_d -> D_{d+shift}``."""
        self.source = source
        self.target = target
        self._fn = fn
        self.shift = shift
        self._cache: dict[int, sp.csr_matrix] = {}
        self.name = name

    def at(self, d: int) -> sp.csr_matrix:
        if d not in self._cache:
            M = la.reduce(self._fn(d), self.source.p)
            if M.shape != (self.target.dim(d + self.shift), self.source.dim(d)):
                raise ValueError(f"{self.name}: bad shape in degree {d}: {M.shape}")
            self._cache[d] = M
        return self._cache[d]

    def commutes(self, d: int, sign: int = 1) -> bool:
        """``D f = sign * f D`` on ``C_d``."""
        lhs = self.target.diff(d + self.shift) @ self.at(d)
        rhs = self.at(d - 1) @ self.source.diff(d)
        return la.equal(lhs, sign * rhs, self.source.p)


@dataclass
class HomologyData:
    """Homology in one degree.

    ``boundaries`` is the canonical subspace of boundaries, ``reps`` the
    canonical span of normal forms of cycles; class coordinates of a cycle
    are the ``reps``-coordinates of its normal form.
    """

    degree: int
    boundaries: la.Subspace
    cycles: la.Subspace
    reps: la.Subspace

    @property
    def dim(self) -> int:
        return self.reps.dim

    def coords(self, V) -> sp.csr_matrix:
        return self.reps.coords(self.boundaries.normal_form(V))

    def is_boundary(self, V) -> bool:
        return self.boundaries.contains(V)

    def basis(self) -> sp.csr_matrix:
        return self.reps.basis


def _guard(C: ChainComplex, d: int):
    if d >= C.hi and not C.bounded:
        raise TruncationError(f"{C.name}: degree {d} needs the complex beyond {C.hi}")


def homology(C: ChainComplex, d: int) -> HomologyData:
    _guard(C, d)
    key = ("H", d)
    cache = C.__dict__.setdefault("_hcache", {})
    if key not in cache:
        p = C.p
        Z = la.kernel_basis(C.diff(d), p)
        Bd = la.image_basis(C.diff(d + 1), p)
        reps = la.Subspace.span(Bd.normal_form(Z.basis), p)
        cache[key] = HomologyData(d, Bd, Z, reps)
    return cache[key]


def homology_dims(C: ChainComplex, degrees) -> list[int]:
    p = C.p
    out = []
    for d in degrees:
        _guard(C, d)
        z = C.dim(d) - la.rank(C.diff(d), p)
        out.append(z - la.rank(C.diff(d + 1), p))
    return out


def induced_map(f: ChainMap, d: int) -> sp.csr_matrix:
    """Matrix of ``H_d(C) -> H_{d+shift}(D)`` in the canonical class bases."""
    Hs = homology(f.source, d)
    Ht = homology(f.target, d + f.shift)
    return Ht.coords(f.at(d) @ Hs.basis())


def operator_on_homology(C: ChainComplex, op: Callable[[int], sp.csr_matrix], d: int, shift: int):
    Hs, Ht = homology(C, d), homology(C, d + shift)
    return Ht.coords(la.reduce(op(d) @ Hs.basis(), C.p))


# ---------------------------------------------------------------------------
# Hochschild operators of a cyclic module


def _memo(E: CyclicModule, key, fn):
    if key not in E._cache:
        E._cache[key] = la.reduce(fn(), E.p)
    return E._cache[key]


def b_matrix(E: CyclicModule, n: int) -> sp.csr_matrix:
    """``b = sum (-1)^i d_i`` from level ``n`` to ``n-1``."""
    if n == 0:
        return la.zeros(0, E.dim(0))

    def build():
        M = E.face(n, 0).copy()
        for i in range(1, n + 1):
            M = M + (-1) ** i * E.face(n, i)
        return M

    return _memo(E, ("b", n), build)


def norm_matrix(E: CyclicModule, n: int) -> sp.csr_matrix:
    """``N = sum_{i<=n} lambda^i``, ``lambda = (-1)^n t``."""

    def build():
        lam = (-1) ** n * E.cyc(n)
        acc = la.identity(E.dim(n))
        cur = acc
        for _ in range(n):
            cur = la.matmul(lam, cur, E.p)
            acc = acc + cur
        return acc

    return _memo(E, ("N", n), build)


def B_matrix(E: CyclicModule, n: int) -> sp.csr_matrix:
    """Connes' operator from level ``n`` to ``n+1``."""
    if n + 1 > E.N:
        raise TruncationError(f"B at level {n} needs level {n + 1} > {E.N}")

    def build():
        t1 = E.cyc(n + 1)
        lam = (-1) ** (n + 1) * t1
        extra = t1 @ E.degen(n, n)
        return (la.identity(E.dim(n + 1)) - lam) @ (extra @ norm_matrix(E, n))

    return _memo(E, ("B", n), build)


def B_rotation_formula(E: CyclicModule, n: int, signed: bool = True) -> sp.csr_matrix:
    """``sum_j eps_j (1 (x) rho^j x - rho^j x (x) 1)`` written with ``t`` and ``s_n``.

    ``rho^j`` is the rotation starting at the ``j``-th factor; ``eps_j`` is
    the Koszul sign ``(-1)^{nj}`` when ``signed`` and ``1`` otherwise.
    """
    p = E.p
    t = E.cyc(n)
    acc = la.zeros(E.dim(n), E.dim(n))
    for j in range(n + 1):
        rho = la.power(t, (n + 1 - j) % (n + 1), p)
        sign = (-1) ** (n * j) if signed else 1
        acc = acc + sign * rho
    s = E.degen(n, n)
    return la.reduce((E.cyc(n + 1) - la.identity(E.dim(n + 1))) @ (s @ acc), p)


def mixed_identities(E: CyclicModule, n: int) -> dict[str, bool]:
    """``b^2 = 0``, ``B^2 = 0`` and ``bB + Bb = 0`` starting at level ``n``."""
    p = E.p
    out = {}
    if n >= 1:
        out["bb"] = la.is_zero(b_matrix(E, n - 1) @ b_matrix(E, n), p) if n >= 2 else True
    if n + 2 <= E.N:
        out["BB"] = la.is_zero(B_matrix(E, n + 1) @ B_matrix(E, n), p)
    if n + 1 <= E.N:
        lhs = b_matrix(E, n + 1) @ B_matrix(E, n)
        if n >= 1:
            lhs = lhs + B_matrix(E, n - 1) @ b_matrix(E, n)
        out["bB+Bb"] = la.is_zero(lhs, p)
    return out


@dataclass
class MixedComplex:
    E: CyclicModule

    def b(self, n):
        return b_matrix(self.E, n)

    def B(self, n):
        return B_matrix(self.E, n)

    def check(self, upto: int) -> bool:
        return all(all(mixed_identities(self.E, n).values()) for n in range(upto + 1))


def mixed_from_cyclic(E: CyclicModule) -> MixedComplex:
    return MixedComplex(E)


def hochschild_complex(E: CyclicModule) -> ChainComplex:
    return ChainComplex(E.p, 0, E.N, E.dim, lambda d: b_matrix(E, d), f"CH({E.name})")


def hochschild_homology(E: CyclicModule, d_max: int) -> list[int]:
    if d_max > E.N - 1:
        raise TruncationError(f"HH through degree {d_max} needs N >= {d_max + 1}")
    return homology_dims(hochschild_complex(E), range(d_max + 1))


# ---------------------------------------------------------------------------
# complexes of cyclic modules and total complexes


class ComplexOfCyclic:
    """Cyclic modules ``Q_j`` in degrees ``low..low+len-1``.

    ``diffs[j]`` is the map ``Q_j -> Q_{j-1}`` (absolute degrees), absent
    for the lowest term.
    """

    def __init__(self, terms: dict[int, CyclicModule], diffs: dict[int, CyclicMap], name=""):
        self.terms = dict(terms)
        self.diffs = dict(diffs)
        self.name = name
        any_term = next(iter(self.terms.values()))
        self.p = any_term.p
        self.N = min(E.N for E in self.terms.values())

    @classmethod
    def single(cls, E: CyclicModule, degree: int = 0):
        return cls({degree: E}, {}, E.name)

    @property
    def degrees(self) -> list[int]:
        return sorted(self.terms)

    def diff_at(self, j: int, n: int):
        f = self.diffs.get(j)
        return None if f is None else f.at(n)

    def check(self, N=None) -> bool:
        N = self.N if N is None else N
        for j in self.degrees:
            if j in self.diffs and j - 1 in self.diffs:
                for n in range(N + 1):
                    if not la.is_zero(self.diffs[j - 1].at(n) @ self.diffs[j].at(n), self.p):
                        return False
        return True


class ComplexMap:
    """Termwise cyclic maps ``Q_j -> R_j`` commuting with the differentials."""

    def __init__(self, source: ComplexOfCyclic, target: ComplexOfCyclic, maps: dict[int, CyclicMap], name=""):
        self.source = source
        self.target = target
        self.maps = maps
        self.name = name


@dataclass
class _Component:
    j: int  # complex degree
    k: int  # power of u
    m: int  # simplicial level
    offset: int
    size: int


class TotalComplex(ChainComplex):
    """Total complex of the ``u``-bicomplex of a complex of cyclic modules.

    Degree ``d`` collects ``C(Q_j)_m u^k`` with ``j + 2k + m = d``;
    the differential is ``b + B u^{-1} + (-1)^m d_Q``.  With ``cyclic=False``
    only ``k = 0`` is used (Hochschild homology of the complex).
    """

    def __init__(self, Q: ComplexOfCyclic, cyclic: bool = True, d_max: int | None = None):
        self.Q = Q
        self.cyclic = cyclic
        lo = min(Q.degrees)
        hi = lo + Q.N if d_max is None else d_max
        self._layout: dict[int, list[_Component]] = {}
        super().__init__(Q.p, lo, hi, self._dim_of, self._build, f"Tot({Q.name})")

    def components(self, d: int) -> list[_Component]:
        if d not in self._layout:
            comps, off = [], 0
            for j in self.Q.degrees:
                kmax = (d - j) // 2 if self.cyclic else 0
                for k in range(0, max(kmax, -1) + 1):
                    m = d - j - 2 * k
                    if m < 0:
                        continue
                    if m > self.Q.N:
                        raise TruncationError(f"degree {d} needs level {m} > {self.Q.N}")
                    size = self.Q.terms[j].dim(m)
                    comps.append(_Component(j, k, m, off, size))
                    off += size
            self._layout[d] = comps
        return self._layout[d]

    def _dim_of(self, d):
        return sum(c.size for c in self.components(d))

    def find(self, d, j, k, m):
        for c in self.components(d):
            if (c.j, c.k, c.m) == (j, k, m):
                return c
        return None

    def _build(self, d):
        p = self.p
        blocks = []
        for c in self.components(d):
            E = self.Q.terms[c.j]
            if c.m >= 1:
                t = self.find(d - 1, c.j, c.k, c.m - 1)
                blocks.append((t, c, b_matrix(E, c.m)))
            if c.k >= 1:
                t = self.find(d - 1, c.j, c.k - 1, c.m + 1)
                blocks.append((t, c, B_matrix(E, c.m)))
            f = self.Q.diffs.get(c.j)
            if f is not None:
                t = self.find(d - 1, c.j - 1, c.k, c.m)
                if t is not None:
                    blocks.append((t, c, (-1) ** c.m * f.at(c.m)))
        return assemble(blocks, self.dim(d - 1), self.dim(d), p)


def assemble(blocks, rows, cols, p) -> sp.csr_matrix:
    """Sum of blocks ``(target_component, source_component, matrix)``."""
    rr, cc, vv = [], [], []
    for t, s, M in blocks:
        if t is None:
            continue
        C = sp.coo_matrix(M)
        rr.append(C.row + t.offset)
        cc.append(C.col + s.offset)
        vv.append(C.data)
    if not rr:
        return la.zeros(rows, cols)
    return la.reduce(
        sp.coo_matrix(
            (np.concatenate(vv), (np.concatenate(rr), np.concatenate(cc))), shape=(rows, cols)
        ),
        p,
    )


def total_complex(Q, cyclic=True, d_max=None) -> TotalComplex:
    if isinstance(Q, CyclicModule):
        Q = ComplexOfCyclic.single(Q)
    return TotalComplex(Q, cyclic, d_max)


def cyclic_homology(Q, d_max: int) -> list[int]:
    """``HC_0..HC_{d_max}`` of a cyclic module or complex of cyclic modules."""
    T = total_complex(Q, True, d_max + 1)
    return homology_dims(T, range(T.lo, d_max + 1)) if T.lo > 0 else homology_dims(T, range(d_max + 1))


def hochschild_of_complex(Q, d_max: int) -> list[int]:
    T = total_complex(Q, False, d_max + 1)
    return homology_dims(T, range(d_max + 1))


def total_map(f: ComplexMap, T_src: TotalComplex, T_tgt: TotalComplex, shift: int = 0) -> ChainMap:
    """Total-complex map induced by termwise cyclic maps (degree-preserving)."""

    def fn(d):
        blocks = []
        for c in T_src.components(d):
            g = f.maps.get(c.j)
            if g is None:
                continue
            t = T_tgt.find(d, c.j, c.k, c.m)
            if t is not None:
                blocks.append((t, c, g.at(c.m)))
        return assemble(blocks, T_tgt.dim(d), T_src.dim(d), T_src.p)

    return ChainMap(T_src, T_tgt, fn, 0, f.name)


def B_total(T: TotalComplex) -> ChainMap:
    """Connes' ``B`` on a Hochschild total complex (``cyclic=False``), degree +1."""

    def fn(d):
        blocks = []
        for c in T.components(d):
            t = T.find(d + 1, c.j, 0, c.m + 1)
            blocks.append((t, c, B_matrix(T.Q.terms[c.j], c.m)))
        return assemble(blocks, T.dim(d + 1), T.dim(d), T.p)

    return ChainMap(T, T, fn, 1, "B")


# ---------------------------------------------------------------------------
# canonical truncation and exact sequences


def canonical_truncation(Q: ComplexOfCyclic, a: int, b: int) -> tuple[ComplexOfCyclic, dict]:
    """``tau_[a, b]`` computed levelwise.

    Degree ``b`` becomes ``Q_b / im d_{b+1}``, degree ``a`` becomes
    ``ker d_a`` (both when ``a == b``), intermediate degrees are unchanged.
    Returns the truncated complex and, per degree, the relation of the new
    term to the old one (``"same"``, ``"sub"``, ``"quot"`` or ``"subquot"``).
    """
    if a > b:
        raise ValueError("empty window")
    p = Q.p
    degs = [j for j in Q.degrees if a <= j <= b]
    terms, kinds = {}, {}
    for j in degs:
        E = Q.terms[j]
        dn = Q.diffs.get(j + 1) if j == b else None
        up = Q.diffs.get(j) if j == a else None
        if up is not None and j - 1 not in Q.terms:
            up = None
        if dn is not None and up is not None:
            K = SubModule(E, lambda n, up=up: la.kernel_basis(up.at(n), p), f"Z{j}")
            terms[j] = QuotientModule(
                K, lambda n, dn=dn, K=K: la.Subspace.span(K.subspace(n).coords(dn.at(n)), p), f"H{j}"
            )
            kinds[j] = "subquot"
        elif dn is not None:
            terms[j] = QuotientModule(E, lambda n, dn=dn: la.image_basis(dn.at(n), p), f"C{j}/B")
            kinds[j] = "quot"
        elif up is not None:
            terms[j] = SubModule(E, lambda n, up=up: la.kernel_basis(up.at(n), p), f"Z{j}")
            kinds[j] = "sub"
        else:
            terms[j] = E
            kinds[j] = "same"
    diffs = {}
    for j in degs:
        if j - 1 in terms and j in Q.diffs:
            diffs[j] = _transport(Q.diffs[j], terms[j], terms[j - 1], Q.terms[j], Q.terms[j - 1])
    return ComplexOfCyclic(terms, diffs, f"tau[{a},{b}]({Q.name})"), kinds


def _to_ambient(M, mod, ambient, n):
    """Matrix from ``mod(n)`` to ``ambient(n)`` (section / inclusion chains)."""
    if mod is ambient:
        return M
    if isinstance(mod, SubModule):
        return _to_ambient(mod.subspace(n).basis @ M if M is not None else mod.subspace(n).basis, mod.ambient, ambient, n)
    if isinstance(mod, QuotientModule):
        S = mod.section_at(n)
        return _to_ambient(S @ M if M is not None else S, mod.ambient, ambient, n)
    raise ValueError("unrelated modules")


def _from_ambient(V, mod, ambient, n, p):
    """Coordinates in ``mod(n)`` of vectors of ``ambient(n)`` lying in ``mod``."""
    if mod is ambient:
        return V
    chain = []
    cur = mod
    while cur is not ambient:
        chain.append(cur)
        cur = cur.ambient
    for m in reversed(chain):
        if isinstance(m, SubModule):
            V = m.subspace(n).coords(V)
        else:
            V = la.reduce(m.presentation(n)[0] @ V, p)
    return V


def _transport(f: CyclicMap, src, tgt, src_amb, tgt_amb) -> CyclicMap:
    p = f.source.p

    def fn(n):
        S = _to_ambient(None, src, src_amb, n)
        S = la.identity(src_amb.dim(n)) if S is None else S
        Y = la.reduce(f.at(n) @ S, p)
        return _from_ambient(Y, tgt, tgt_amb, n, p)

    return CyclicMap(src, tgt, fn, f.name)


@dataclass
class LESReport:
    exact: bool
    nodes: list[tuple[str, int, bool]]
    checked: int


def les_check(
    sub: ChainComplex, mid: ChainComplex, quot: ChainComplex,
    incl: ChainMap, proj: ChainMap, d_max: int, d_min: int = 0, skip=(), lift=None,
) -> LESReport:
    """Exactness of the homology long exact sequence through degree ``d_max``.

    The sequence is checked at every node ``H_d(sub)``, ``H_d(mid)``,
    ``H_d(quot)`` with ``d_min <= d <= d_max`` except those listed in
    ``skip`` (pairs ``(name, d)``).  Degreewise exactness of
    ``0 -> sub -> mid -> quot -> 0`` is checked first.

    The rank of ``delta_{d+1}`` is computed on all cycles of ``quot`` in
    degree ``d + 1`` (boundaries go to zero), so the top node needs the
    complexes only through degree ``d_max + 1``.  ``lift``, if given, is a
    degreewise section of ``proj`` (``lift.at(d)``); otherwise lifts are
    solved for.
    """
    p = sub.p
    for d in range(d_min, d_max + 2):
        i, q = incl.at(d), proj.at(d)
        if not la.is_zero(q @ i, p):
            raise ValueError(f"input not degreewise exact in degree {d}")
        if la.rank(i, p) != sub.dim(d) or la.rank(q, p) != quot.dim(d) or sub.dim(d) + quot.dim(d) != mid.dim(d):
            raise ValueError(f"input not degreewise exact in degree {d}")
    cx = {"sub": sub, "mid": mid, "quot": quot}
    memo: dict = {}

    def hdim(name, d):
        if ("h", name, d) not in memo:
            C = cx[name]
            memo["h", name, d] = homology(C, d).dim if d >= C.lo else 0
        return memo["h", name, d]

    def rk(kind, d):
        # ranks of i_d, q_d and delta_d, computed only when some node needs them
        if (kind, d) not in memo:
            if kind == "i":
                ok = hdim("sub", d) and hdim("mid", d)
                memo[kind, d] = la.rank(induced_map(incl, d), p) if ok else 0
            elif kind == "q":
                ok = hdim("mid", d) and hdim("quot", d)
                memo[kind, d] = la.rank(induced_map(proj, d), p) if ok else 0
            else:
                memo[kind, d] = la.rank(_delta_on_cycles(incl, proj, d, lift), p) if hdim("sub", d - 1) else 0
        return memo[kind, d]

    nodes = []
    for d in range(d_min, d_max + 1):
        checks = [
            ("sub", d, lambda d=d: rk("delta", d + 1) + rk("i", d) == hdim("sub", d)),
            ("mid", d, lambda d=d: rk("i", d) + rk("q", d) == hdim("mid", d)),
            ("quot", d, lambda d=d: rk("q", d) + rk("delta", d) == hdim("quot", d)),
        ]
        for name, deg, ok in checks:
            if (name, deg) in skip:
                continue
            nodes.append((name, deg, bool(ok())))
    return LESReport(all(ok for _, _, ok in nodes), nodes, len(nodes))


def _delta_on_cycles(incl: ChainMap, proj: ChainMap, d: int, lift=None) -> sp.csr_matrix:
    """``delta`` applied to a basis of all cycles of ``quot`` in degree ``d``."""
    p = incl.source.p
    quot, mid, sub = proj.target, proj.source, incl.source
    Hs = homology(sub, d - 1)
    Z = la.kernel_basis(quot.diff(d), p)
    if Z.dim == 0 or Hs.dim == 0:
        return la.zeros(Hs.dim, Z.dim)
    y = la.matmul(lift.at(d), Z.basis, p) if lift is not None else la.solve(proj.at(d), Z.basis, p)
    dy = la.matmul(mid.diff(d), y, p)
    z = la.solve(incl.at(d - 1), dy, p)
    return Hs.coords(z)


def connecting_map(incl: ChainMap, proj: ChainMap, d: int) -> sp.csr_matrix:
    """``delta: H_d(quot) -> H_{d-1}(sub)`` by lift, differentiate, pull back."""
    p = incl.source.p
    quot, mid, sub = proj.target, proj.source, incl.source
    Hq = homology(quot, d)
    Hs = homology(sub, d - 1)
    if Hq.dim == 0 or Hs.dim == 0:
        return la.zeros(Hs.dim, Hq.dim)
    lift = la.solve(proj.at(d), Hq.basis(), p)
    dy = la.reduce(mid.diff(d) @ lift, p)
    z = la.solve(incl.at(d - 1), dy, p)
    return Hs.coords(z)


# ---------------------------------------------------------------------------
# edgewise subdivision


def iterated_product(A, r: int) -> sp.csr_matrix:
    """``a x a^r`` matrix of ``a_1 (x) ... (x) a_r -> a_1 ... a_r``."""
    from .cyclic import _mult_matrix

    mu = _mult_matrix(A)
    M = la.identity(A.dim)
    for _ in range(r - 1):
        M = la.matmul(mu, sp.kron(M, la.identity(A.dim), format="csr"), A.p)
    return M


def subdivision_matrix(A, p: int, i: int) -> sp.csr_matrix:
    """``h_p`` on ``A^{(x) p(i+1)}``: multiply the first ``(i+1)(p-1)+1`` factors."""
    r = (i + 1) * (p - 1) + 1
    return la.reduce(sp.kron(iterated_product(A, r), la.identity(A.dim**i), format="csr"), A.p)


@dataclass
class Subdivision:
    chain_map: ChainMap
    induced: list[sp.csr_matrix]
    is_chain_map: bool


def edgewise_subdivision(A, p: int, d_max: int, fine=None, coarse=None) -> Subdivision:
    """Chain map ``CH^{(p)}(A) -> CH(A)`` and its effect on ``HH_0..HH_{d_max}``."""
    from .cyclic import build_asharp, build_ip_pullback

    fine = fine or build_ip_pullback(A, p, d_max + 1)
    coarse = coarse or build_asharp(A, d_max + 1)
    Cf, Cc = hochschild_complex(fine), hochschild_complex(coarse)
    h = ChainMap(Cf, Cc, lambda i: subdivision_matrix(A, p, i), 0, "h_p")
    ok = all(h.commutes(d) for d in range(1, d_max + 2))
    induced = [induced_map(h, d) for d in range(d_max + 1)]
    return Subdivision(h, induced, ok)


def is_invertible(M, p) -> bool:
    return M.shape[0] == M.shape[1] and la.rank(M, p) == M.shape[0]


# ---------------------------------------------------------------------------
# shuffle product


def _shuffles(i: int, j: int):
    """(positions of the first word, sign) for all (i, j)-shuffles."""
    for pos in combinations(range(i + j), i):
        # sign = parity of inversions between the two words
        inv = sum(pj - k for k, pj in enumerate(pos))
        yield pos, (-1) ** inv


def shuffle_chain(A, x: np.ndarray, i: int, y: np.ndarray, j: int) -> np.ndarray:
    """Shuffle product of chains ``x`` in degree ``i`` and ``y`` in degree ``j``."""
    a, p = A.dim, A.p
    X = np.asarray(x, dtype=np.int64).reshape((a,) * (i + 1))
    Y = np.asarray(y, dtype=np.int64).reshape((a,) * (j + 1))
    # product of the zeroth factors, remaining factors kept apart
    T = np.tensordot(np.tensordot(X, Y, axes=0), np.ones(1), axes=0)[..., 0]
    T = np.moveaxis(T, i + 1, 1)  # (a0, b0, a1..ai, b1..bj)
    T = np.tensordot(A.st, T, axes=([0, 1], [0, 1])) % p  # (c, a1..ai, b1..bj)
    out = np.zeros((a,) * (i + j + 1), dtype=np.int64)
    for pos, sign in _shuffles(i, j):
        rest = [q for q in range(i + j) if q not in pos]
        # axis 1+k of T (a_{k+1}) goes to slot pos[k]; b's to the rest
        perm = [0] + [0] * (i + j)
        for k, q in enumerate(pos):
            perm[1 + q] = 1 + k
        for k, q in enumerate(rest):
            perm[1 + q] = 1 + i + k
        out = (out + sign * np.transpose(T, perm)) % p
    return out.reshape(-1)


@dataclass
class ShuffleAlgebra:
    """Shuffle product on ``HH_{<=d_max}`` of a commutative algebra."""

    A: object
    complex: ChainComplex
    d_max: int

    def classes(self, d) -> HomologyData:
        return homology(self.complex, d)

    def product(self, i: int, j: int) -> list[list[sp.csr_matrix]]:
        """``table[r][s]`` = coordinates of ``x_r * y_s`` in ``HH_{i+j}``."""
        Hi, Hj, Hk = self.classes(i), self.classes(j), self.classes(i + j)
        Xi = Hi.basis().toarray()
        Yj = Hj.basis().toarray()
        table = []
        for r in range(Hi.dim):
            row = []
            for s in range(Hj.dim):
                z = shuffle_chain(self.A, Xi[:, r], i, Yj[:, s], j)
                row.append(Hk.coords(la.from_dense(z.reshape(-1, 1), self.A.p)))
            table.append(row)
        return table

    def multiply(self, x, i, y, j) -> sp.csr_matrix:
        """Class of ``x * y`` for class coordinate vectors ``x``, ``y``."""
        p = self.A.p
        X = la.reduce(self.classes(i).basis() @ la.from_dense(np.reshape(x, (-1, 1)), p), p)
        Y = la.reduce(self.classes(j).basis() @ la.from_dense(np.reshape(y, (-1, 1)), p), p)
        z = shuffle_chain(self.A, X.toarray().ravel(), i, Y.toarray().ravel(), j)
        return self.classes(i + j).coords(la.from_dense(z.reshape(-1, 1), p))


def shuffle_product(A, d_max: int, E=None) -> ShuffleAlgebra:
    from .cyclic import build_asharp

    if not A.is_commutative():
        raise ValueError("shuffle product needs a commutative algebra")
    E = E or build_asharp(A, d_max + 2)
    return ShuffleAlgebra(A, hochschild_complex(E), d_max)


def B_on_classes(E: CyclicModule, d: int) -> sp.csr_matrix:
    """Connes' ``B``: ``HH_d -> HH_{d+1}`` in canonical class bases."""
    C = hochschild_complex(E)
    return operator_on_homology(C, lambda n: B_matrix(E, n), d, 1)


def derivation_failures(A, d_max: int) -> list[tuple[int, int, int, int]]:
    """Basis pairs where ``B(xy) != B(x) y + (-1)^|x| x B(y)`` on ``HH``."""
    from .cyclic import build_asharp

    p = A.p
    E = build_asharp(A, d_max + 2)
    S = shuffle_product(A, d_max, E)
    bad = []
    Bm = {d: B_on_classes(E, d) for d in range(d_max)}
    for i in range(d_max + 1):
        for j in range(d_max + 1 - i):
            if i + j + 1 > d_max:
                continue
            di, dj = S.classes(i).dim, S.classes(j).dim
            for r in range(di):
                for s in range(dj):
                    x = np.eye(di, dtype=np.int64)[r]
                    y = np.eye(dj, dtype=np.int64)[s]
                    xy = S.multiply(x, i, y, j)
                    lhs = la.reduce(Bm[i + j] @ xy, p)
                    Bx = (Bm[i] @ la.from_dense(x.reshape(-1, 1), p)).toarray().ravel()
                    By = (Bm[j] @ la.from_dense(y.reshape(-1, 1), p)).toarray().ravel()
                    rhs = S.multiply(Bx, i + 1, y, j) + (-1) ** i * S.multiply(x, i, By, j + 1)
                    if not la.equal(lhs, la.reduce(rhs, p), p):
                        bad.append((i, r, j, s))
    return bad


# ---------------------------------------------------------------------------
# periodic resolution of k over k[Z/p] and its diagonal


def _cyc_perm(p: int, shift: int) -> np.ndarray:
    """``sigma^shift`` on ``k[Z/p]`` (basis ``sigma^c``)."""
    M = np.zeros((p, p), dtype=np.int64)
    for c in range(p):
        M[(c + shift) % p, c] = 1
    return M


def periodic_resolution(p: int, d_max: int) -> dict[int, np.ndarray]:
    """Differentials ``W_d -> W_{d-1}`` of the 2-periodic free resolution.

    ``W_d = k[Z/p]`` with generator ``w_d``; ``d(w_odd) = (sigma - 1) w``,
    ``d(w_even) = N w``.  Matrices are equivariant (right-multiplication
    is avoided since the group is abelian).
    """
    S = _cyc_perm(p, 1)
    I = np.eye(p, dtype=np.int64)
    Nm = np.ones((p, p), dtype=np.int64)
    return {d: ((S - I) if d % 2 else Nm) % p for d in range(1, d_max + 1)}


def _delta_generator(p: int, i: int, j: int) -> np.ndarray:
    """Component ``W_i (x) W_j`` of ``Delta(w_{i+j})`` as a ``p x p`` array."""
    D = np.zeros((p, p), dtype=np.int64)
    if i % 2 == 0:
        D[0, 0] = 1
    elif j % 2 == 0:
        D[0, 1] = 1
    else:
        for a in range(p):
            for b in range(a + 1, p):
                D[a, b] += 1
    return D


def diagonal_approximation(p: int, d_max: int):
    """Equivariant ``Delta: W_n -> (W (x) W)_n`` for ``n <= d_max``.

    Returns ``(delta, checks)`` where ``delta[n]`` maps ``W_n`` into the
    direct sum over ``i + j = n`` of ``W_i (x) W_j`` (blocks ordered by
    ``i``), and ``checks`` records the chain-map and counit identities.
    """
    W = periodic_resolution(p, d_max)
    delta = {}
    for n in range(d_max + 1):
        blocks = []
        for i in range(n + 1):
            G = _delta_generator(p, i, n - i).reshape(-1)
            cols = []
            for c in range(p):
                # sigma^c acts diagonally on W_i (x) W_j
                Sc = np.kron(_cyc_perm(p, c), _cyc_perm(p, c))
                cols.append(Sc @ G)
            blocks.append(np.stack(cols, axis=1))
        delta[n] = np.concatenate(blocks, axis=0) % p

    def tensor_diff(n):
        # (W (x) W)_n -> (W (x) W)_{n-1}, Koszul signs
        rows_total = sum(p * p for _ in range(n))
        M = np.zeros((rows_total, p * p * (n + 1)), dtype=np.int64)
        I = np.eye(p, dtype=np.int64)
        for i in range(n + 1):
            j = n - i
            col = slice(i * p * p, (i + 1) * p * p)
            if i >= 1:
                M[(i - 1) * p * p:i * p * p, col] += np.kron(W[i], I)
            if j >= 1:
                M[i * p * p:(i + 1) * p * p, col] += (-1) ** i * np.kron(I, W[j])
        return M % p

    checks = {}
    for n in range(1, d_max + 1):
        checks[f"chain {n}"] = bool(np.array_equal(tensor_diff(n) @ delta[n] % p, delta[n - 1] @ W[n] % p))
    aug = np.ones((1, p), dtype=np.int64)
    for n in range(d_max + 1):
        first = delta[n][: p * p]  # W_0 (x) W_n block
        counit = np.kron(aug, np.eye(p, dtype=np.int64)) @ first % p
        checks[f"counit {n}"] = bool(np.array_equal(counit, np.eye(p, dtype=np.int64)))
    return delta, checks


def group_homology_complex(sigma, order: int, p: int, d_max: int) -> ChainComplex:
    """``(W (x) M)_sigma`` identified with ``M`` in every degree.

    ``w_{2i+1} (x) m -> w_{2i} (x) (sigma^{-1} - 1) m`` and
    ``w_{2i} (x) m -> w_{2i-1} (x) N m``.
    """
    S = la.reduce(sigma, p)
    n = S.shape[0]
    Sinv = la.power(S, order - 1, p)
    Nm = _fold_powers(S, order, p)
    diff = lambda d: la.add(Sinv, la.identity(n), p, -1) if d % 2 else Nm  # noqa: E731
    return ChainComplex(p, 0, d_max, lambda d: n, diff, "W(x)M")


def _fold_powers(S, order, p):
    acc = la.identity(S.shape[0])
    cur = acc
    for _ in range(order - 1):
        cur = la.matmul(S, cur, p)
        acc = acc + cur
    return la.reduce(acc, p)


def eps_cap(sigma, order: int, p: int, n: int) -> sp.csr_matrix:
    """Cap product with the degree-one class, degree ``n -> n-1``, on ``M``.

    Obtained from the ``W_1 (x) W_{n-1}`` block of the diagonal: ``sigma^{-1}``
    when ``n`` is odd and ``sum_b b sigma^{-b}`` when ``n`` is even.
    """
    S = la.reduce(sigma, p)
    Sinv = la.power(S, order - 1, p)
    if n % 2:
        return Sinv
    acc = la.zeros(*S.shape)
    for b in range(1, order):
        acc = acc + b * la.power(Sinv, b, p)
    return la.reduce(acc, p)


def eps_maps_on_homology(sigma, order: int, p: int, i: int):
    """``(H_{2i+1} -> H_{2i}, H_{2i} -> H_{2i-1})`` induced by the cap product."""
    C = group_homology_complex(sigma, order, p, 2 * i + 2)
    odd = operator_on_homology(C, lambda d: eps_cap(sigma, order, p, d), 2 * i + 1, -1)
    even = operator_on_homology(C, lambda d: eps_cap(sigma, order, p, d), 2 * i, -1)
    return odd, even


def eps_cap_is_chain_map(sigma, order, p, d_max) -> bool:
    """``d cap = - cap d`` on the periodic complex (degree -1 map)."""
    C = group_homology_complex(sigma, order, p, d_max + 1)
    for n in range(2, d_max + 1):
        lhs = C.diff(n - 1) @ eps_cap(sigma, order, p, n)
        rhs = eps_cap(sigma, order, p, n - 1) @ C.diff(n)
        if not (la.equal(lhs, rhs, p) or la.equal(lhs, -rhs, p)):
            return False
    return True


@dataclass
class CoactionWindow:
    """Levelwise realisation of the coaction on a window ``[2i, 2i+1]``.

    ``even[n]`` is the identity of ``H_{2i}`` (read into ``I(E)(n)``),
    ``odd[n]`` the cap product ``H_{2i+1} -> H_{2i}``; ``vanishing[n]`` the
    cap product ``H_{2i} -> H_{2i-1}``, which must be zero.
    """

    i: int
    dims: dict[int, tuple[int, int]]
    odd: dict[int, sp.csr_matrix]
    vanishing: dict[int, sp.csr_matrix]

    def is_quasi_isomorphism(self, p) -> bool:
        for n, (h_even, h_odd) in self.dims.items():
            if h_even != h_odd or not is_invertible(self.odd[n], p):
                return False
            if self.vanishing[n].nnz:
                return False
        return True


def _regular_block_acyclic(order: int, p: int, i: int) -> bool:
    """Group homology of the regular representation vanishes in degrees ``2i, 2i+1``."""
    C = group_homology_complex(_cyc_perm(order, 1), order, p, 2 * i + 2)
    return homology(C, 2 * i).dim == 0 and homology(C, 2 * i + 1).dim == 0


def _permutation_window(S, order: int, p: int, i: int):
    """Window data for a permutation action of prime order.

    Fixed points span a trivial summand, where the odd cap product is the
    identity and the even one is ``sum_b b = p(p-1)/2 = 0``; every other
    orbit is a copy of the regular representation, acyclic in positive
    degrees (checked once on a single block).
    """
    from .cyclic import _permutation, orbit_labels

    tgt = _permutation(S)
    if tgt is None or not la.is_prime(order) or not _regular_block_acyclic(order, p, i):
        return None
    lo, hi = orbit_labels(tgt, order)
    f = int(np.count_nonzero(lo == hi))
    even = la.reduce(sum(b for b in range(1, order)) * la.identity(f), p)
    return (f, f), la.identity(f), even


def coaction(E: CyclicModule, i: int, N: int | None = None, generic: bool = False) -> CoactionWindow:
    """Cap products on the window ``[2i, 2i+1]`` at every level through ``N``.

    Permutation actions (all ``i_p^*A_#``) use the orbit decomposition;
    ``generic=True`` forces group homology of the whole level.
    """
    from .cyclic import tightness_check

    if i < 1:
        raise ValueError("window index must be positive")
    if not tightness_check(E, N):
        raise ValueError("E not tight")
    N = E.N if N is None else N
    dims, odd, van = {}, {}, {}
    for n in range(N + 1):
        S = E.sigma(n)
        fast = None if generic else _permutation_window(S, E.period, E.p, i)
        if fast is not None:
            dims[n], odd[n], van[n] = fast
            continue
        o, v = eps_maps_on_homology(S, E.period, E.p, i)
        C = group_homology_complex(S, E.period, E.p, 2 * i + 2)
        dims[n] = (homology(C, 2 * i).dim, homology(C, 2 * i + 1).dim)
        odd[n], van[n] = o, v
    return CoactionWindow(i, dims, odd, van)
