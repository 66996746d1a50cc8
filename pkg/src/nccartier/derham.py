"""Kähler forms, the HKR lift and the classical Cartier operator at desk scale.

Presentations are restricted to one monic relation per variable,
``f_j(x_j) = 0``.  Reducing ``x_j^{deg f_j}`` by ``f_j`` is then a
confluent rewrite rule and the monomials ``x^e`` with ``e_j < deg f_j``
form a basis of the quotient.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg as la
from .algebras import Algebra, frobenius_matrix
from .cyclic import build_asharp
from .homology import B_matrix, B_rotation_formula, hochschild_complex, homology


class InfiniteDimensionalError(ValueError):
    """The presented quotient is not finite-dimensional."""


class UnsupportedPresentation(ValueError):
    """Relations outside the supported one-monic-relation-per-variable form."""


class NotEtaleError(ValueError):
    """Frobenius is not bijective: not étale at desk scale."""


class DegreeError(ValueError):
    """``1/i!`` is not invertible for ``i >= p``."""


# ---------------------------------------------------------------------------
# presentations


@dataclass(frozen=True)
class PresentedAlgebra:
    """``F_p[x_1..x_m] / (f_1(x_1), ..., f_m(x_m))`` with each ``f_j`` monic.

    ``relations[j]`` lists the coefficients of ``f_j`` from the constant
    term up; the last one is 1.
    """

    p: int
    variables: tuple[str, ...]
    relations: tuple[tuple[int, ...], ...]
    name: str = ""

    def __post_init__(self):
        if len(self.relations) != len(self.variables):
            raise InfiniteDimensionalError("every variable needs a relation")
        rel = []
        for f in self.relations:
            f = tuple(int(c) % self.p for c in f)
            while f and f[-1] == 0:
                f = f[:-1]
            if len(f) < 2:
                raise UnsupportedPresentation("relations must have positive degree")
            if f[-1] != 1:
                inv = pow(f[-1], -1, self.p)
                f = tuple(c * inv % self.p for c in f)
            rel.append(f)
        object.__setattr__(self, "relations", tuple(rel))

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(f) - 1 for f in self.relations)

    @property
    def nvars(self) -> int:
        return len(self.variables)

    @property
    def dim(self) -> int:
        return math.prod(self.degrees)

    def monomials(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(m) for m in self.degrees)))

    def index(self, e) -> int:
        return int(np.ravel_multi_index(tuple(e), self.degrees)) if self.nvars else 0

    def _reduce_power(self, j: int, k: int) -> np.ndarray:
        """Coordinates of ``x_j^k`` in ``1, x_j, ..., x_j^{m-1}``."""
        f = self.relations[j]
        m = len(f) - 1
        v = np.zeros(max(k + 1, m), dtype=np.int64)
        v[k] = 1
        for top in range(len(v) - 1, m - 1, -1):
            c = v[top]
            if c:
                v[top - m: top] -= c * np.array(f[:m])
                v[top] = 0
        return v[:m] % self.p

    def reduce_monomial(self, e) -> np.ndarray:
        """Coordinates of ``x^e`` (any exponents) in the monomial basis."""
        out = np.ones(1, dtype=np.int64)
        for j, k in enumerate(e):
            out = np.kron(out, self._reduce_power(j, k)) % self.p
        return out

    def to_algebra(self) -> Algebra:
        mons = self.monomials()
        n = len(mons)
        st = np.zeros((n, n, n), dtype=np.int64)
        for a, ea in enumerate(mons):
            for b, eb in enumerate(mons):
                st[a, b] = self.reduce_monomial([x + y for x, y in zip(ea, eb)])
        unit = np.zeros(n, dtype=np.int64)
        unit[0] = 1
        labels = tuple(_monomial_label(self.variables, e) for e in mons)
        return Algebra(self.p, st, unit, labels, self.name or self.describe(), 0)

    def describe(self) -> str:
        rels = ", ".join(_poly_label(v, f) for v, f in zip(self.variables, self.relations))
        return f"F_{self.p}[{','.join(self.variables)}]/({rels})"

    def derivative(self, k: int) -> np.ndarray:
        """Matrix of ``d/dx_k`` on monomial representatives."""
        mons = self.monomials()
        D = np.zeros((len(mons), len(mons)), dtype=np.int64)
        for c, e in enumerate(mons):
            if e[k] % self.p:
                f = list(e)
                f[k] -= 1
                D[self.index(f), c] = e[k] % self.p
        return D

    def relation_derivative(self, j: int) -> np.ndarray:
        """Coordinates of ``f_j'(x_j)``."""
        f = self.relations[j]
        v = np.zeros(self.dim, dtype=np.int64)
        for k in range(1, len(f)):
            e = [0] * self.nvars
            e[j] = k - 1
            v[self.index(e)] += k * f[k]
        return v % self.p


def _monomial_label(vs, e) -> str:
    parts = [v if k == 1 else f"{v}^{k}" for v, k in zip(vs, e) if k]
    return "*".join(parts) or "1"


def _poly_label(v, f) -> str:
    terms = []
    for k in range(len(f) - 1, -1, -1):
        if f[k]:
            mon = "1" if k == 0 else (v if k == 1 else f"{v}^{k}")
            terms.append(mon if f[k] == 1 and k else f"{f[k]}*{mon}" if k else str(f[k]))
    return " + ".join(terms)


def parse_presentation(p: int, variables, relations, name: str = "") -> PresentedAlgebra:
    """Build a presentation from relation strings such as ``"t^4 - 1"``."""
    import sympy

    syms = sympy.symbols(list(variables))
    syms = syms if isinstance(syms, (list, tuple)) else (syms,)
    if len(relations) != len(syms):
        raise InfiniteDimensionalError("every variable needs a relation")
    coeffs = [None] * len(syms)
    for r in relations:
        expr = sympy.sympify(r, locals={str(s): s for s in syms})
        free = expr.free_symbols
        if len(free) != 1:
            raise UnsupportedPresentation(f"relation {r!r} must involve exactly one variable")
        (s,) = free
        j = syms.index(s)
        if coeffs[j] is not None:
            raise UnsupportedPresentation(f"two relations for {s}")
        poly = sympy.Poly(expr, s)
        if any(not c.is_integer for c in poly.all_coeffs()):
            raise UnsupportedPresentation(f"non-integer coefficients in {r!r}")
        coeffs[j] = tuple(int(c) for c in reversed(poly.all_coeffs()))
    if any(c is None for c in coeffs):
        raise InfiniteDimensionalError("a variable has no relation; the quotient is infinite-dimensional")
    return PresentedAlgebra(p, tuple(variables), tuple(coeffs), name)


def cyclic_presentation(n: int, p: int) -> PresentedAlgebra:
    """``F_p[t]/(t^n - 1)``, the group algebra of ``Z/n``."""
    return PresentedAlgebra(p, ("t",), ((-1,) + (0,) * (n - 1) + (1,),), f"F_{p}[t]/(t^{n}-1)")


def truncated_presentation(m: int, p: int, var: str = "x") -> PresentedAlgebra:
    return PresentedAlgebra(p, (var,), ((0,) * m + (1,),), f"F_{p}[{var}]/{var}^{m}")


# ---------------------------------------------------------------------------
# forms


@dataclass
class FormSpace:
    """``Omega^i`` as quotients of the free modules ``A (x) Lambda^i``.

    ``ambient[i]`` has basis ``(monomial, J)`` ordered monomial-major over
    the increasing subsets ``J`` of size ``i``; ``relations[i]`` is the
    span of ``b f_j' e_J`` with ``j in J``.
    """

    A: PresentedAlgebra
    d_max: int
    subsets: dict[int, list[tuple[int, ...]]]
    relations: dict[int, la.Subspace]
    proj: dict[int, sp.csr_matrix]
    section: dict[int, sp.csr_matrix]
    d_free: dict[int, sp.csr_matrix] = field(default_factory=dict)

    def dim(self, i: int) -> int:
        return self.proj[i].shape[0] if i in self.proj else 0

    def ambient_dim(self, i: int) -> int:
        return self.A.dim * len(self.subsets.get(i, []))

    def d(self, i: int) -> sp.csr_matrix:
        """``d: Omega^i -> Omega^{i+1}``."""
        p = self.A.p
        if i + 1 not in self.proj:
            return la.zeros(0, self.dim(i))
        return la.matmul(self.proj[i + 1], la.matmul(self.d_free[i], self.section[i], p), p)

    def d_squared_zero(self) -> bool:
        p = self.A.p
        return all(la.is_zero(la.matmul(self.d(i + 1), self.d(i), p), p) for i in range(self.d_max - 1))

    def d_descends(self) -> bool:
        """``d`` maps relations into relations."""
        ok = True
        for i in range(self.d_max):
            R = self.relations[i]
            ok &= self.relations[i + 1].contains(la.matmul(self.d_free[i], R.basis, self.A.p))
        return ok


def _pos(subsets, J):
    return subsets.index(tuple(J))


def kaehler_forms(A: PresentedAlgebra, d_max: int) -> FormSpace:
    """``Omega^i = Lambda^i Omega^1`` with ``Omega^1 = (+ A dx_j)/(df_j)`` for ``i <= d_max``."""
    p, n, m = A.p, A.dim, A.nvars
    mult = A.to_algebra().st
    subsets, rels, proj, sec, dfree = {}, {}, {}, {}, {}
    for i in range(d_max + 1):
        S = [J for J in itertools.combinations(range(m), i)]
        subsets[i] = S
        vecs = []
        for J in S:
            for j in J:
                fj = A.relation_derivative(j)
                for b in range(n):
                    v = np.zeros(n * len(S), dtype=np.int64)
                    prod = fj @ mult[b]
                    v[np.arange(n) * len(S) + _pos(S, J)] = prod
                    vecs.append(v % p)
        amb = n * len(S)
        R = la.Subspace.span(sp.csr_matrix(np.array(vecs).T if vecs else np.zeros((amb, 0), dtype=np.int64)), p)
        rels[i] = R
        pr, se = la.quotient_presentation(amb, R)
        proj[i], sec[i] = pr, se
    for i in range(d_max):
        S, T = subsets[i], subsets[i + 1]
        D = np.zeros((n * len(T), n * len(S)), dtype=np.int64)
        for k in range(m):
            dk = A.derivative(k)
            for J in S:
                if k in J:
                    continue
                K = tuple(sorted(J + (k,)))
                sign = (-1) ** sum(1 for j in J if j < k)  # dx_k ^ e_J -> e_K
                for a in range(n):
                    D[np.arange(n) * len(T) + _pos(T, K), a * len(S) + _pos(S, J)] += sign * dk[:, a]
        dfree[i] = la.from_dense(D % p, p)
    return FormSpace(A, d_max, subsets, rels, proj, sec, dfree)


# ---------------------------------------------------------------------------
# the HKR lift


def _wedge_sign(J, k) -> tuple[int, tuple[int, ...]] | None:
    """``e_J ^ e_k = sign e_K``; ``None`` when ``k`` is in ``J``."""
    if k in J:
        return None
    return (-1) ** sum(1 for j in J if j > k), tuple(sorted(J + (k,)))


def hkr_matrix(A: PresentedAlgebra, i: int, forms: FormSpace | None = None) -> sp.csr_matrix:
    """``P(a_0 (x) ... (x) a_i) = (1/i!) a_0 da_1 ^ ... ^ da_i`` into ``Omega^i``."""
    p, n = A.p, A.dim
    forms = forms if forms is not None and forms.d_max >= i else kaehler_forms(A, i)
    if forms.dim(i) == 0:
        # the only map into the zero space; no division needed
        return la.zeros(0, n ** (i + 1))
    if i >= p:
        raise DegreeError(f"1/{i}! is not invertible mod {p} and Omega^{i} != 0")
    mult = A.to_algebra().st
    ders = [A.derivative(k) for k in range(A.nvars)]
    S = forms.subsets[i]
    scale = pow(math.factorial(i), -1, p)
    cols = []
    for digits in itertools.product(range(n), repeat=i + 1):
        # a form is a dict J -> coefficient vector in A
        cur = {(): np.eye(n, dtype=np.int64)[digits[0]]}
        for a in digits[1:]:
            nxt = {}
            for J, v in cur.items():
                for k, dk in enumerate(ders):
                    w = _wedge_sign(J, k)
                    if w is None or not dk[:, a].any():
                        continue
                    sign, K = w
                    prod = np.einsum("i,j,ijk->k", v, dk[:, a], mult) * sign
                    nxt[K] = (nxt.get(K, 0) + prod) % p
            cur = nxt
        col = np.zeros(forms.ambient_dim(i), dtype=np.int64)
        for J, v in cur.items():
            col[np.arange(n) * len(S) + _pos(S, J)] += v
        cols.append(col * scale % p)
    M = la.from_dense(np.array(cols, dtype=np.int64).reshape(len(cols), forms.ambient_dim(i)).T, p)
    return la.matmul(forms.proj[i], M, p)


def hkr_lift(A: PresentedAlgebra, chain, i: int) -> np.ndarray:
    """``P`` applied to a coordinate vector of ``A^{(x)(i+1)}``; the result lives in ``Omega^i``."""
    P = hkr_matrix(A, i)
    return (P @ np.asarray(chain, dtype=np.int64)) % A.p


@dataclass
class HKRCheck:
    ok: bool
    kills_boundaries: dict
    intertwines: dict
    forms_dims: list

    def __bool__(self):
        return self.ok


def connes_vs_derham(A: PresentedAlgebra, d_max: int, signed: bool = True) -> HKRCheck:
    """``P o b = 0`` and ``P o B = d o P`` on Hochschild cycles through ``d_max``.

    Needs ``P_i`` for ``i <= d_max + 1``, hence ``i < p`` or ``Omega^i = 0``
    (otherwise :class:`DegreeError`).  ``signed=False`` swaps Connes'
    operator for the unsigned rotation sum.
    """
    p = A.p
    alg = A.to_algebra()
    E = build_asharp(alg, d_max + 2)
    CH = hochschild_complex(E)
    forms = kaehler_forms(A, d_max + 1)
    P = {i: hkr_matrix(A, i, forms) for i in range(d_max + 2)}
    kills, inter = {}, {}
    for i in range(d_max + 1):
        kills[i] = la.is_zero(la.matmul(P[i], CH.diff(i + 1), p), p)
        Z = homology(CH, i).cycles.basis
        Bop = B_matrix(E, i) if signed else B_rotation_formula(E, i, signed=False)
        lhs = la.matmul(P[i + 1], la.matmul(Bop, Z, p), p)
        rhs = la.matmul(forms.d(i), la.matmul(P[i], Z, p), p)
        inter[i] = la.equal(lhs, rhs, p)
    ok = all(kills.values()) and all(inter.values())
    return HKRCheck(ok, kills, inter, [forms.dim(i) for i in range(d_max + 2)])


# ---------------------------------------------------------------------------
# the classical Cartier operator and the comparison


def _as_algebra(A) -> Algebra:
    return A.to_algebra() if isinstance(A, PresentedAlgebra) else A


def classical_cartier_degree0(A) -> np.ndarray:
    """Inverse of Frobenius ``a -> a^p`` on an étale ``A``, as a matrix."""
    alg = _as_algebra(A)
    p = alg.p
    if not alg.is_commutative():
        raise NotEtaleError("not commutative")
    if isinstance(A, PresentedAlgebra) and kaehler_forms(A, 1).dim(1):
        raise NotEtaleError("Omega^1 != 0: not étale at desk scale")
    F = la.from_dense(frobenius_matrix(alg), p)
    if la.rank(F, p) != alg.dim:
        raise NotEtaleError("Frobenius is not bijective: not étale at desk scale")
    return la.solve(F, la.identity(alg.dim), p).toarray() % p


@dataclass
class CartierComparison:
    ok: bool
    degenerate: dict
    agrees_degree0: bool
    xi_injective: dict
    zeta_injective: dict
    beta_surjective: dict
    sequences_exact: bool
    package: object = None

    def __bool__(self):
        return self.ok


def compare_cartier(
    A, p: int | None = None, d_max: int = 1, kp_degree: int | None = None, package=None
) -> CartierComparison:
    """Non-commutative ``C`` against the classical operator on an étale ``A``.

    ``kp_degree`` caps the degrees computed on the ``K^p`` side (default
    ``d_max``); degrees above it are covered by ``HH_d = 0``.  A
    precomputed :class:`~nccartier.cartier.CartierPackage` may be passed.
    """
    from .cartier import cartier_map

    alg = _as_algebra(A)
    p = alg.p if p is None else p
    if p != alg.p:
        raise ValueError("algebra and prime disagree")
    frob_inv = classical_cartier_degree0(A)
    CH = hochschild_complex(build_asharp(alg, d_max + 2))
    hh = [homology(CH, d).dim for d in range(d_max + 1)]
    degenerate = {d: hh[d] == 0 for d in range(1, d_max + 1)}
    if isinstance(A, PresentedAlgebra):
        F = kaehler_forms(A, d_max)
        for d in range(1, d_max + 1):
            degenerate[d] &= F.dim(d) == 0
    top = d_max if kp_degree is None else min(kp_degree, d_max)
    pkg = package if package is not None else cartier_map(alg, p, top, N=top + 2 if kp_degree is not None else None)
    # HH_0 of a commutative algebra is A itself
    H0 = pkg.pipeline.hh(0)
    T = H0.coords(la.identity(alg.dim))
    C0 = pkg.C[0]
    Cnc = la.matmul(C0, la.solve(pkg.zeta[0], la.identity(pkg.zeta[0].shape[0]), p), p)
    Ccl = la.matmul(T, la.matmul(la.from_dense(frob_inv, p), la.solve(T, la.identity(T.shape[0]), p), p), p)
    agrees = la.equal(Cnc, Ccl, p)
    xi_inj = {d: la.rank(M, p) == M.shape[1] for d, M in enumerate(pkg.xi)}
    zeta_inj = {d: la.rank(M, p) == M.shape[1] for d, M in enumerate(pkg.zeta)}
    beta_sur = {d: la.rank(M, p) == M.shape[0] for d, M in enumerate(pkg.beta)}
    exact = all(pkg.checks.values())
    ok = all(degenerate.values()) and agrees and all(xi_inj.values()) and all(zeta_inj.values())
    ok = ok and all(beta_sur.values()) and exact
    return CartierComparison(ok, degenerate, agrees, xi_inj, zeta_inj, beta_sur, exact, pkg)


# ---------------------------------------------------------------------------
# Laurent forms, symbolically


@dataclass(frozen=True)
class LogForm:
    """Sum of ``c * t^a dlog t_J`` over ``k[N^l x Z^(n-l)]``.

    ``terms`` maps ``(a, J)`` (exponent tuple, increasing index tuple) to a
    coefficient mod ``p``.
    """

    p: int
    terms: tuple

    @classmethod
    def of(cls, p: int, data: dict) -> "LogForm":
        return cls(p, tuple(sorted((k, v % p) for k, v in data.items() if v % p)))

    def as_dict(self) -> dict:
        return dict(self.terms)


def symbolic_c_inverse(w: LogForm) -> LogForm:
    """``t_i -> t_i^p``, ``dlog t_i -> dlog t_i``, coefficients fixed (``c^p = c``)."""
    p = w.p
    return LogForm.of(p, {(tuple(p * x for x in a), J): pow(c, p, p) for (a, J), c in w.terms})


def hkr_symbolic(chain, p: int) -> LogForm:
    """Degree 0 and 1 HKR images of a monomial chain: ``<t^a, t^b> -> t^a d(t^b)``.

    ``d(t^b) = sum_k b_k t^b dlog t_k``.
    """
    entries = chain.entries
    c = chain.coeff
    if len(entries) == 1:
        return LogForm.of(p, {(tuple(entries[0]), ()): c})
    if len(entries) != 2:
        raise DegreeError("only degrees 0 and 1 are handled symbolically")
    a, b = entries
    s = tuple(x + y for x, y in zip(a, b))
    out = {}
    for k, bk in enumerate(b):
        if bk % p:
            out[(s, (k,))] = out.get((s, (k,)), 0) + c * bk
    return LogForm.of(p, out)


def laurent_hkr_check(p: int, n: int = 1, l: int = 0, samples: int = 500, seed: int = 0) -> bool:
    """``HKR(zeta Phi(c)) = C^{-1}(HKR(c))`` on random chains of degree 0 and 1."""
    import random

    from .monoid import MonoidChain, mixed_monoid, zeta_phi

    M = mixed_monoid(n, l)
    rng = random.Random(seed)
    for _ in range(samples):
        deg = rng.randint(0, 1)
        c = MonoidChain(tuple(M.random_element(rng, 8) for _ in range(deg + 1)), rng.randint(1, p - 1))
        if hkr_symbolic(zeta_phi(M, c, p), p) != symbolic_c_inverse(hkr_symbolic(c, p)):
            return False
    return True
