"""Verification suites, one per group of module invariants.

Every suite returns a JSON-ready dict with a ``status`` of ``pass``,
``fail``, ``n/a`` or ``inconclusive: ...``.  Inconclusive means the
requested degrees need more levels (or larger spaces) than were allowed.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import linalg as la
from .algebras import Algebra, FiniteMonoid
from .homology import TruncationError

SUITES = (
    "relations",
    "mixed-identities",
    "subdivision",
    "trace",
    "tightness",
    "splitting",
    "kp",
    "exact-sequences",
    "factorization",
    "cartier",
    "monoid-phi",
    "derham-compare",
    "hh-dims",
)

# suites that build i_p^* A_# and therefore need an odd prime
NEEDS_ODD_PRIME = frozenset(SUITES) - {"relations", "mixed-identities", "hh-dims"}

PASS, FAIL, NA = "pass", "fail", "n/a"
RAISE_N = "inconclusive: raise N"


class Inconclusive(Exception):
    pass


@dataclass
class Source:
    """An algebra together with whatever extra structure the input carried."""

    algebra: Algebra
    monoid: FiniteMonoid | None = None
    presentation: object | None = None
    label: str = ""


def feasible_level(a: int, q: int, limit: int) -> int:
    """Largest level ``n`` with ``a^(q(n+1)) <= limit`` (at least 0)."""
    if a <= 1:
        return 1 << 30
    n = 0
    while a ** (q * (n + 2)) <= limit:
        n += 1
    return n


class Runner:
    """Runs suites on one algebra, sharing the expensive Cartier package."""

    def __init__(self, src: Source, p: int, d_max: int, truncation: int | None = None, seed: int = 0,
                 budget: int = 60_000, matrices: bool = False):
        self.src, self.A, self.p, self.d_max = src, src.algebra, p, d_max
        self.N = truncation
        self.seed = seed
        self.budget = budget
        self.matrices = matrices
        self._pkg = None

    # -- helpers -----------------------------------------------------------

    def levels(self, default: int) -> int:
        return default if self.N is None else self.N

    def fine_cap(self, wanted: int, q: int | None = None, limit: int | None = None) -> int:
        q = self.p if q is None else q
        cap = feasible_level(self.A.dim, q, self.budget if limit is None else limit)
        if wanted > cap:
            raise Inconclusive(f"inconclusive: level {wanted} exceeds the size budget (max level {cap})")
        return wanted

    def kp_degree(self) -> int:
        """Top degree reachable on the K^p side within the budget."""
        return feasible_level(self.A.dim, self.p, self.budget) - 1

    def package(self):
        from .cartier import cartier_map

        if self._pkg is None:
            N = self.d_max + 1 if self.N is None else self.N
            if N < self.d_max + 1:
                raise Inconclusive(RAISE_N)
            self.fine_cap(N)
            self._pkg = cartier_map(self.A, self.p, self.d_max, N)
        return self._pkg

    def run(self, name: str) -> dict:
        if name not in SUITES:
            raise KeyError(name)
        try:
            ok, dims, details = getattr(self, "s_" + name.replace("-", "_"))()
            status = NA if ok is None else (PASS if ok else FAIL)
        except TruncationError:
            status, dims, details = RAISE_N, {}, {}
        except Inconclusive as e:
            status, dims, details = str(e), {}, {}
        return {"name": name, "status": status, "dims": dims, "details": details}

    # -- suites ------------------------------------------------------------

    def s_relations(self):
        from .cyclic import SigmaQuotients, build_asharp, build_ip_pullback, build_K_twists, verify_cyclic_relations

        L = self.levels(self.d_max + 2)
        Ash = build_asharp(self.A, L)
        res = {"A#": verify_cyclic_relations(Ash)}
        tw = build_K_twists(Ash)
        res["K0(A#)"], res["K1(A#)"] = verify_cyclic_relations(tw.K0), verify_cyclic_relations(tw.K1)
        if self.p != 2:
            Lf = self.fine_cap(L, limit=5 * self.budget)
            E = build_ip_pullback(self.A, self.p, Lf)
            q = SigmaQuotients(E)
            res["i_p^*A#"] = verify_cyclic_relations(E)
            res["invariants"] = verify_cyclic_relations(q.invariants)
            res["coinvariants"] = verify_cyclic_relations(q.coinvariants)
        return all(res.values()), {"levels": L}, res

    def s_mixed_identities(self):
        from .cyclic import build_asharp
        from .homology import mixed_identities

        L = self.levels(self.d_max + 2)
        E = build_asharp(self.A, L + 2)
        res = {str(n): mixed_identities(E, n) for n in range(L + 1)}
        return all(all(v.values()) for v in res.values()), {"levels": L}, res

    def s_subdivision(self):
        from .homology import edgewise_subdivision, is_invertible

        self.fine_cap(self.d_max + 1)
        sub = edgewise_subdivision(self.A, self.p, self.d_max)
        iso = [bool(is_invertible(M, self.p)) for M in sub.induced]
        return sub.is_chain_map and all(iso), {"HH": [M.shape[0] for M in sub.induced]}, {
            "chain_map": sub.is_chain_map, "isomorphisms": iso}

    def _fine(self, L):
        from .cyclic import build_ip_pullback

        return build_ip_pullback(self.A, self.p, self.fine_cap(L, limit=5 * self.budget))

    def s_trace(self):
        from .cyclic import SigmaQuotients

        L = self.levels(self.d_max + 1)
        q = SigmaQuotients(self._fine(L))
        tr, e = q.trace(), q.e_map()
        res = {}
        for n in range(L + 1):
            res[str(n)] = la.is_zero(la.matmul(tr.at(n), e.at(n), self.p), self.p) and la.is_zero(
                la.matmul(e.at(n), tr.at(n), self.p), self.p)
        return all(res.values()), {"levels": L}, res

    def s_tightness(self):
        from .cyclic import tightness_check
        from .homology import coaction

        L = self.levels(self.d_max + 1)
        E = self._fine(L)
        tight = tightness_check(E, L)
        w = coaction(E, 1, L)
        eps_zero = all(v.nnz == 0 for v in w.vanishing.values())
        return tight and eps_zero and w.is_quasi_isomorphism(self.p), {"levels": L}, {
            "tight": tight, "eps_zero": eps_zero}

    def s_splitting(self):
        from .cartier import pullback_splitting

        L = self.fine_cap(self.levels(self.d_max + 1), q=1, limit=self.budget)
        r = pullback_splitting(self.A, self.p, L, degree=max(4, 2 * self.d_max))
        return r.ok, {str(n): v for n, v in r.dims.items()}, {
            "connecting_zero": r.connecting_zero, "kll_iso": r.kll_iso, "kll_natural": r.kll_natural}

    def s_kp(self):
        from .cartier import KpComplex, KpFamily

        L = self.levels(self.d_max + 1)
        self.fine_cap(L)
        kp = KpComplex(self.A, self.p, L)
        fam = KpFamily(kp)
        bad = kp.invariant_failures() + fam.containment_failures(range(L + 1)) + fam.identification_failures(
            range(L + 1))
        dims = {"K0": [kp.K0.dim(n) for n in range(L + 1)], "K1": [kp.K1.dim(n) for n in range(L + 1)]}
        return not bad, dims, {"failures": bad}

    def s_exact_sequences(self):
        pkg = self.package()
        keys = ("z_lg_exact", "car_seq_exact")
        return all(pkg.checks[k] for k in keys), {}, {k: pkg.checks[k] for k in keys} | {
            "nodes": pkg.notes["exact_sequences"]}

    def s_factorization(self):
        pkg = self.package()
        keys = ("B_factorization", "inclusions")
        return all(pkg.checks[k] for k in keys), {"BHH": pkg.dims["BHH"]}, {k: pkg.checks[k] for k in keys}

    def s_cartier(self):
        pkg = self.package()
        out = pkg.summary()
        details = {"checks": out["checks"]}
        if self.matrices:
            details["matrices"] = out["matrices"]
        return all(pkg.checks.values()), pkg.dims, details

    def s_monoid_phi(self):
        from .monoid import cross_check_phi, random_formula_check

        sym = {
            "Z": random_formula_check(1, 0, self.p, 1000, self.seed).ok,
            "NxZ": random_formula_check(2, 1, self.p, 1000, self.seed).ok,
        }
        details = {"symbolic": sym, "seed": self.seed}
        G = self.src.monoid
        if G is None or not G.is_commutative():
            details["pipeline"] = "no commutative monoid basis"
            return all(sym.values()), {}, details
        r = cross_check_phi(G, self.p, self.d_max, pipeline_degree=self.kp_degree())
        details["pipeline"] = {
            "lands_in_Z": _keys(r.lands_in_Z), "C_Phi_identity": _keys(r.c_phi_identity),
            "formula_chain_level": _keys(r.formula_chain_level), "formula_homology": _keys(r.formula_homology),
            "decomposition": _keys(r.decomposition), "notes": r.notes}
        return r.ok and all(sym.values()), {"HH": r.hh_dims}, details

    def s_derham_compare(self):
        from .derham import DegreeError, NotEtaleError, compare_cartier, connes_vs_derham, kaehler_forms, laurent_hkr_check

        P = self.src.presentation
        if P is None:
            return None, {}, {"reason": "no commutative presentation"}
        F = kaehler_forms(P, self.d_max + 1)
        details = {"d_squared_zero": F.d_squared_zero(), "laurent_hkr": laurent_hkr_check(self.p, seed=self.seed)}
        try:
            details["hkr"] = _keys(connes_vs_derham(P, self.d_max).intertwines)
        except DegreeError:
            # Omega^i != 0 for some i >= p: stop below the first such degree
            details["hkr"] = _keys(connes_vs_derham(P, max(self.p - 2, 0)).intertwines)
            details["hkr_note"] = f"HKR needs 1/i! beyond degree {self.p - 2}"
        ok = details["d_squared_zero"] and details["laurent_hkr"] and all(details["hkr"].values())
        try:
            kpd = min(self.d_max, self.kp_degree())
            pkg = self.package() if kpd == self.d_max else None
            r = compare_cartier(P, self.p, self.d_max, kp_degree=None if pkg else kpd, package=pkg)
            details["etale"] = {"degenerate": _keys(r.degenerate), "C0_is_inverse_frobenius": r.agrees_degree0,
                                "xi_injective": _keys(r.xi_injective), "zeta_injective": _keys(r.zeta_injective),
                                "beta_surjective": _keys(r.beta_surjective), "exact": r.sequences_exact}
            ok = ok and r.ok
        except NotEtaleError as e:
            details["etale"] = f"not étale: {e}"
        return ok, {"Omega": [F.dim(i) for i in range(self.d_max + 2)]}, details

    def s_hh_dims(self):
        from .cyclic import build_asharp
        from .homology import hochschild_homology

        dims = hochschild_homology(build_asharp(self.A, self.d_max + 1), self.d_max)
        return True, {"HH": dims}, {}


def _keys(d: dict) -> dict:
    return {str(k): bool(v) for k, v in d.items()}
